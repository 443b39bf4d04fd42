//! Matches between agents, validation and the final evaluation report.

use std::fmt::{self, Write as _};

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::game::{start_position, ActionCode, GameState, Player, Turn};
use crate::neural::Network;
use crate::rng::{derive_rng, derive_seed};
use crate::solver::SolveTable;
use crate::trainer::select_turn;

pub const DEFAULT_TURN_CAP: usize = 100;

#[derive(Clone, Copy)]
pub enum Agent<'a> {
    /// Uniform legal placement, then a uniform neutral action.
    Random,
    /// Optimal play from the solved table.
    Perfect(&'a SolveTable),
    /// ε-greedy Q-network policy.
    Dqn { net: &'a Network, epsilon: f64 },
}

impl Agent<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            Agent::Random => "random",
            Agent::Perfect(_) => "perfect",
            Agent::Dqn { .. } => "dqn",
        }
    }

    /// A legal turn for the side to move, which must not be blocked.
    pub fn choose<R: Rng + ?Sized>(&self, state: &GameState, rng: &mut R) -> Turn {
        match *self {
            Agent::Random => random_turn(state, rng),
            Agent::Perfect(table) => table.perfect_move(state, rng),
            Agent::Dqn { net, epsilon } => {
                assert!((0.0..=1.0).contains(&epsilon), "epsilon outside [0, 1]");
                select_turn(net, state, epsilon, rng)
            }
        }
    }
}

impl fmt::Debug for Agent<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Agent::Dqn { epsilon, .. } => write!(f, "dqn(epsilon={epsilon})"),
            other => f.write_str(other.name()),
        }
    }
}

pub fn random_turn<R: Rng + ?Sized>(state: &GameState, rng: &mut R) -> Turn {
    let placements = state.legal_l_placements();
    let placement: ActionCode = *placements.choose(rng).expect("side to move is not blocked");
    let mid = state.place_l(placement).unwrap();
    let neutral = *mid.legal_neutral_actions().choose(rng).unwrap();
    Turn { placement, neutral }
}

/// Win, draw and loss fractions from one agent's side.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Rates {
    pub win: f64,
    pub draw: f64,
    pub loss: f64,
}

impl Rates {
    fn from_counts(win: u64, draw: u64, loss: u64) -> Self {
        let n = (win + draw + loss).max(1) as f64;
        Rates {
            win: win as f64 / n,
            draw: draw as f64 / n,
            loss: loss as f64 / n,
        }
    }
}

/// Results of the first-named agent while seated as one player.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SeatRecord {
    pub games: u64,
    pub wins: u64,
    pub draws: u64,
    pub losses: u64,
}

impl SeatRecord {
    pub fn win_rate(&self) -> f64 {
        self.wins as f64 / self.games.max(1) as f64
    }

    fn add(&mut self, o: &SeatRecord) {
        self.games += o.games;
        self.wins += o.wins;
        self.draws += o.draws;
        self.losses += o.losses;
    }
}

/// Outcome counts of a match, from the first-named agent's side.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct MatchResult {
    pub games: u64,
    pub wins_first: u64,
    pub wins_second: u64,
    pub draws: u64,
    pub total_turns: u64,
    pub longest_game: u64,
    /// The first agent's record when it moved first (as player A).
    pub first_as_p1: SeatRecord,
    /// The first agent's record when it moved second.
    pub first_as_p2: SeatRecord,
}

impl MatchResult {
    pub fn mean_length(&self) -> f64 {
        self.total_turns as f64 / self.games.max(1) as f64
    }

    pub fn first_rates(&self) -> Rates {
        Rates::from_counts(self.wins_first, self.draws, self.wins_second)
    }

    pub fn second_rates(&self) -> Rates {
        Rates::from_counts(self.wins_second, self.draws, self.wins_first)
    }

    fn merge(mut self, o: MatchResult) -> MatchResult {
        self.games += o.games;
        self.wins_first += o.wins_first;
        self.wins_second += o.wins_second;
        self.draws += o.draws;
        self.total_turns += o.total_turns;
        self.longest_game = self.longest_game.max(o.longest_game);
        self.first_as_p1.add(&o.first_as_p1);
        self.first_as_p2.add(&o.first_as_p2);
        self
    }
}

/// Winner (if any) and number of turns of one game from the start position.
pub fn play_game<R: Rng + ?Sized>(
    a: &Agent<'_>,
    b: &Agent<'_>,
    turn_cap: usize,
    rng: &mut R,
) -> (Option<Player>, usize) {
    let mut state = start_position();
    for turn in 0..turn_cap {
        if state.is_loss() {
            return (Some(state.to_move().opponent()), turn);
        }
        let agent = match state.to_move() {
            Player::A => a,
            Player::B => b,
        };
        let t = agent.choose(&state, rng);
        state = state.apply_turn(t).expect("agents play legal turns");
    }
    if state.is_loss() {
        (Some(state.to_move().opponent()), turn_cap)
    } else {
        (None, turn_cap)
    }
}

fn one_game(
    first: &Agent<'_>,
    second: &Agent<'_>,
    g: u64,
    turn_cap: usize,
    seed: u64,
) -> MatchResult {
    let mut rng = derive_rng(seed, "game", g);
    let first_is_a = g % 2 == 0;
    let (a, b) = if first_is_a {
        (first, second)
    } else {
        (second, first)
    };
    let (winner, turns) = play_game(a, b, turn_cap, &mut rng);
    let first_player = if first_is_a { Player::A } else { Player::B };
    let mut r = MatchResult {
        games: 1,
        total_turns: turns as u64,
        longest_game: turns as u64,
        ..MatchResult::default()
    };
    let mut seat = SeatRecord {
        games: 1,
        ..SeatRecord::default()
    };
    match winner {
        None => {
            r.draws = 1;
            seat.draws = 1;
        }
        Some(p) if p == first_player => {
            r.wins_first = 1;
            seat.wins = 1;
        }
        Some(_) => {
            r.wins_second = 1;
            seat.losses = 1;
        }
    }
    if let Some(p) = winner {
        let loser = if p == first_player { second } else { first };
        debug_assert!(
            !matches!(loser, Agent::Perfect(_)),
            "the perfect agent lost a game"
        );
    }
    if first_is_a {
        r.first_as_p1 = seat;
    } else {
        r.first_as_p2 = seat;
    }
    r
}

/// Plays `games` games, the first agent moving first on even game indices.
/// Games run in parallel on per-game random streams derived from `seed`, so
/// the result does not depend on scheduling.
pub fn play_match(
    first: Agent<'_>,
    second: Agent<'_>,
    games: u64,
    turn_cap: usize,
    seed: u64,
) -> MatchResult {
    assert!(games >= 1, "a match needs at least one game");
    (0..games)
        .into_par_iter()
        .map(|g| one_game(&first, &second, g, turn_cap, seed))
        .reduce(MatchResult::default, MatchResult::merge)
}

/// The network's rates in the periodic validation matches.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Validation {
    pub vs_random: Rates,
    pub vs_perfect: Option<Rates>,
}

/// Validation matches for `net` at `epsilon`: `random_games` against the
/// random agent, `perfect_games` against the perfect one (skipped when 0 or
/// no table is given).
pub fn validate(
    net: &Network,
    table: Option<&SolveTable>,
    random_games: usize,
    perfect_games: usize,
    epsilon: f64,
    turn_cap: usize,
    seed: u64,
) -> Validation {
    let me = Agent::Dqn { net, epsilon };
    let vs_random = play_match(
        me,
        Agent::Random,
        random_games as u64,
        turn_cap,
        derive_seed(seed, "vs-random", 0),
    )
    .first_rates();
    let vs_perfect = match table {
        Some(t) if perfect_games > 0 => Some(
            play_match(
                me,
                Agent::Perfect(t),
                perfect_games as u64,
                turn_cap,
                derive_seed(seed, "vs-perfect", 0),
            )
            .first_rates(),
        ),
        _ => None,
    };
    Validation {
        vs_random,
        vs_perfect,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvaluationConfig {
    pub random_games: u64,
    pub perfect_games: u64,
    pub epsilon: f64,
    pub turn_cap: usize,
    pub seed: u64,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        EvaluationConfig {
            random_games: 10_000,
            perfect_games: 1000,
            epsilon: 0.01,
            turn_cap: DEFAULT_TURN_CAP,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvaluationReport {
    pub config: EvaluationConfig,
    pub vs_random: Option<MatchResult>,
    pub vs_perfect: Option<MatchResult>,
}

impl EvaluationReport {
    /// Plain-text summary.
    pub fn text(&self) -> String {
        let mut s = String::new();
        let c = &self.config;
        writeln!(s, "agent epsilon: {}", c.epsilon).unwrap();
        for (name, m) in [("random", &self.vs_random), ("perfect", &self.vs_perfect)] {
            let Some(m) = m else { continue };
            let r = m.first_rates();
            writeln!(
                s,
                "vs {name}: {} games, mean length {:.1} turns",
                m.games,
                m.mean_length()
            )
            .unwrap();
            writeln!(
                s,
                "  win {:.4}  draw {:.4}  loss {:.4}",
                r.win, r.draw, r.loss
            )
            .unwrap();
            writeln!(
                s,
                "  as player 1: win rate {:.4} ({} games); as player 2: win rate {:.4} ({} games)",
                m.first_as_p1.win_rate(),
                m.first_as_p1.games,
                m.first_as_p2.win_rate(),
                m.first_as_p2.games
            )
            .unwrap();
        }
        s
    }

    /// Machine-readable record with the learning-curve columns.
    pub fn record_csv(&self, episode: u64) -> String {
        let triple = |m: &Option<MatchResult>| match m {
            Some(m) => {
                let r = m.first_rates();
                format!("{:.4},{:.4},{:.4}", r.win, r.draw, r.loss)
            }
            None => ",,".to_string(),
        };
        format!(
            "{}\n{},{:.6},,,{},{}\n",
            crate::trainer::CURVE_HEADER,
            episode,
            self.config.epsilon,
            triple(&self.vs_random),
            triple(&self.vs_perfect)
        )
    }
}

/// The full evaluation protocol: many games against the random agent and a
/// shorter match against the perfect one.
pub fn final_evaluation(
    net: &Network,
    table: Option<&SolveTable>,
    config: EvaluationConfig,
) -> EvaluationReport {
    let me = Agent::Dqn {
        net,
        epsilon: config.epsilon,
    };
    let vs_random = (config.random_games > 0).then(|| {
        play_match(
            me,
            Agent::Random,
            config.random_games,
            config.turn_cap,
            derive_seed(config.seed, "final-random", 0),
        )
    });
    let vs_perfect = match table {
        Some(t) if config.perfect_games > 0 => Some(play_match(
            me,
            Agent::Perfect(t),
            config.perfect_games,
            config.turn_cap,
            derive_seed(config.seed, "final-perfect", 0),
        )),
        _ => None,
    };
    EvaluationReport {
        config,
        vs_random,
        vs_perfect,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_match_closure_and_alternation() {
        let m = play_match(Agent::Random, Agent::Random, 201, DEFAULT_TURN_CAP, 5);
        assert_eq!(m.wins_first + m.wins_second + m.draws, 201);
        assert_eq!(m.first_as_p1.games, 101);
        assert_eq!(m.first_as_p2.games, 100);
        assert!(m.longest_game <= DEFAULT_TURN_CAP as u64);
        let r = m.first_rates();
        assert!((r.win + r.draw + r.loss - 1.0).abs() < 1e-12);
    }

    #[test]
    fn match_is_deterministic() {
        let a = play_match(Agent::Random, Agent::Random, 64, 30, 9);
        let b = play_match(Agent::Random, Agent::Random, 64, 30, 9);
        assert_eq!(a, b);
    }

    #[test]
    fn report_lists_both_seats() {
        let net = Network::with_dims(&[16, 4, 4, 128], 1);
        let rep = final_evaluation(
            &net,
            None,
            EvaluationConfig {
                random_games: 20,
                perfect_games: 0,
                ..EvaluationConfig::default()
            },
        );
        let text = rep.text();
        assert!(
            text.contains("as player 1") && text.contains("as player 2"),
            "{text}"
        );
        assert!(rep.record_csv(0).starts_with("episode,"));
    }
}
