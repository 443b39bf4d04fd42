//! Transitions, whole-game records and the game-granular replay ring.

use std::collections::VecDeque;

use rand::Rng;

use crate::game::{ActionCode, LegalMask, Player, INPUT_SIZE};

use super::TrainerError;

/// One turn as seen by the player who made it.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    /// Mover's view before the turn.
    pub input: [f32; INPUT_SIZE],
    pub action: ActionCode,
    pub reward: f32,
    /// Opponent's view after the full turn.
    pub next_input: [f32; INPUT_SIZE],
    pub next_mask: LegalMask,
    pub terminal: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GameOutcome {
    Won(Player),
    Draw,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GameRecord {
    pub transitions: Vec<Transition>,
    pub outcome: GameOutcome,
}

impl GameRecord {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    /// Checks the reward and terminal-flag layout. A decisive game ends with
    /// the loser's last turn (-1) and the winner's last turn (+1), both
    /// terminal; a draw ends with one terminal zero-reward turn.
    pub fn validate(&self) -> Result<(), TrainerError> {
        let bad = |why: &str| Err(TrainerError::InvalidRecord(why.to_string()));
        let n = self.transitions.len();
        if n == 0 {
            return bad("empty game");
        }
        let terminal_tail = match self.outcome {
            GameOutcome::Draw => 1,
            GameOutcome::Won(_) => n.min(2),
        };
        for (i, t) in self.transitions.iter().enumerate() {
            let in_tail = i >= n - terminal_tail;
            if t.terminal != in_tail {
                return bad("terminal flag outside the final turns");
            }
            if !t.terminal && t.reward != 0.0 {
                return bad("non-terminal reward");
            }
            if t.next_mask.is_empty() && !t.terminal {
                return bad("blocked successor not terminal");
            }
        }
        let last = &self.transitions[n - 1];
        match self.outcome {
            GameOutcome::Draw if last.reward != 0.0 => bad("drawn game with reward"),
            GameOutcome::Won(_) if last.reward != 1.0 || !last.next_mask.is_empty() => {
                bad("winning turn must block the opponent and carry +1")
            }
            GameOutcome::Won(_) if n >= 2 && self.transitions[n - 2].reward != -1.0 => {
                bad("loser's last turn must carry -1")
            }
            _ => Ok(()),
        }
    }

    /// True when every non-terminal turn's successor is the next turn's
    /// input, as in any record produced by self-play.
    pub fn is_chained(&self) -> bool {
        self.transitions
            .windows(2)
            .all(|w| w[0].terminal || w[0].next_input == w[1].input)
            && self.transitions.last().map_or(true, |t| t.terminal)
    }

    /// Count of transitions with a nonzero reward.
    pub fn nonzero_rewards(&self) -> usize {
        self.transitions.iter().filter(|t| t.reward != 0.0).count()
    }
}

/// Ring buffer of the most recent games. Each stored game carries a serial
/// number (its push order, from 0).
#[derive(Clone, Debug)]
pub struct ReplayMemory {
    capacity: usize,
    games: VecDeque<(u64, GameRecord)>,
    pushed: u64,
    transitions: usize,
}

impl ReplayMemory {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        ReplayMemory {
            capacity,
            games: VecDeque::with_capacity(capacity.min(1 << 16)),
            pushed: 0,
            transitions: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.games.len()
    }

    pub fn is_empty(&self) -> bool {
        self.games.is_empty()
    }

    /// Games pushed over the memory's lifetime.
    pub fn total_pushed(&self) -> u64 {
        self.pushed
    }

    /// Games dropped to make room.
    pub fn evicted(&self) -> u64 {
        self.pushed - self.games.len() as u64
    }

    /// Transitions currently stored.
    pub fn transition_count(&self) -> usize {
        self.transitions
    }

    /// Appends a game, evicting the oldest when full. Returns its serial.
    pub fn push(&mut self, record: GameRecord) -> Result<u64, TrainerError> {
        if record.is_empty() {
            return Err(TrainerError::InvalidRecord("empty game".into()));
        }
        if self.games.len() == self.capacity {
            if let Some((_, old)) = self.games.pop_front() {
                self.transitions -= old.len();
            }
        }
        let serial = self.pushed;
        self.transitions += record.len();
        self.games.push_back((serial, record));
        self.pushed += 1;
        Ok(serial)
    }

    /// Stored games, oldest first, with their serials.
    pub fn iter(&self) -> impl Iterator<Item = (u64, &GameRecord)> {
        self.games.iter().map(|(s, g)| (*s, g))
    }

    pub fn newest(&self) -> Option<(u64, &GameRecord)> {
        self.games.back().map(|(s, g)| (*s, g))
    }

    /// One stored game, uniformly.
    pub fn sample_game<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<(u64, &GameRecord)> {
        if self.games.is_empty() {
            return None;
        }
        let (s, g) = &self.games[rng.gen_range(0..self.games.len())];
        Some((*s, g))
    }

    /// `count` transitions drawn uniformly over all stored transitions, with
    /// replacement.
    pub fn sample_transitions<R: Rng + ?Sized>(
        &self,
        count: usize,
        rng: &mut R,
    ) -> Vec<&Transition> {
        if self.transitions == 0 {
            return Vec::new();
        }
        let mut ends = Vec::with_capacity(self.games.len());
        let mut acc = 0;
        for (_, g) in &self.games {
            acc += g.len();
            ends.push(acc);
        }
        (0..count)
            .map(|_| {
                let k = rng.gen_range(0..self.transitions);
                let gi = ends.partition_point(|&e| e <= k);
                let start = if gi == 0 { 0 } else { ends[gi - 1] };
                &self.games[gi].1.transitions[k - start]
            })
            .collect()
    }
}
