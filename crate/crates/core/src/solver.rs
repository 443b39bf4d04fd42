//! Exact retrograde solution of the whole L-Game graph.
//!
//! Positions are keyed by canonical arrangement plus side to move, giving
//! `2 * 2296` entries. Labels are propagated backward from blocked positions;
//! anything still unlabeled at the fixpoint is a draw.

use std::collections::{BTreeMap, VecDeque};
use std::fmt::{self, Write as _};

use rand::Rng;

use crate::game::{all_arrangements, canonicalize, CanonicalKey, GameState, Player, Turn};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Outcome {
    Win,
    Loss,
    Draw,
}

impl Outcome {
    pub fn letter(self) -> char {
        match self {
            Outcome::Win => 'W',
            Outcome::Loss => 'L',
            Outcome::Draw => 'D',
        }
    }
}

/// Game-theoretic value for the side to move. `distance` counts plies to the
/// blocked position under optimal play and is `None` for draws.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SolvedValue {
    pub outcome: Outcome,
    pub distance: Option<u16>,
}

impl SolvedValue {
    pub const DRAW: SolvedValue = SolvedValue {
        outcome: Outcome::Draw,
        distance: None,
    };

    pub fn win(d: u16) -> Self {
        SolvedValue {
            outcome: Outcome::Win,
            distance: Some(d),
        }
    }

    pub fn loss(d: u16) -> Self {
        SolvedValue {
            outcome: Outcome::Loss,
            distance: Some(d),
        }
    }
}

impl fmt::Display for SolvedValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.distance {
            Some(d) => write!(f, "{}{}", self.outcome.letter(), d),
            None => write!(f, "{}", self.outcome.letter()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SolverError {
    #[error("position {0} is missing from the solve table")]
    MissingEntry(CanonicalKey),
}

/// Values for every (canonical arrangement, side to move).
#[derive(Clone, Debug)]
pub struct SolveTable {
    keys: Vec<CanonicalKey>,
    values: Vec<SolvedValue>,
}

#[inline]
fn side_index(p: Player) -> usize {
    p.index()
}

impl SolveTable {
    /// Runs the full retrograde analysis.
    pub fn solve_all() -> SolveTable {
        let mut keys: Vec<CanonicalKey> = all_arrangements().iter().map(canonicalize).collect();
        keys.sort_unstable();
        keys.dedup();
        let n_pos = keys.len() * 2;
        let index_of = |s: &GameState| -> usize {
            let k = canonicalize(s);
            let arr = keys
                .binary_search(&k)
                .expect("every arrangement is enumerated");
            arr * 2 + side_index(s.to_move())
        };

        // Distinct successors per position, in CSR form.
        let mut succ_start = Vec::with_capacity(n_pos + 1);
        let mut succ = Vec::new();
        let mut scratch = Vec::new();
        succ_start.push(0u32);
        for pos in 0..n_pos {
            let side = if pos % 2 == 0 { Player::A } else { Player::B };
            let state = keys[pos / 2].to_state(side);
            scratch.clear();
            state.for_each_successor(|_, next| scratch.push(index_of(&next) as u32));
            scratch.sort_unstable();
            scratch.dedup();
            succ.extend_from_slice(&scratch);
            succ_start.push(succ.len() as u32);
        }

        let mut pred_count = vec![0u32; n_pos + 1];
        for &s in &succ {
            pred_count[s as usize + 1] += 1;
        }
        for i in 0..n_pos {
            pred_count[i + 1] += pred_count[i];
        }
        let pred_start = pred_count.clone();
        let mut fill = pred_count;
        let mut pred = vec![0u32; succ.len()];
        for p in 0..n_pos {
            for &s in &succ[succ_start[p] as usize..succ_start[p + 1] as usize] {
                pred[fill[s as usize] as usize] = p as u32;
                fill[s as usize] += 1;
            }
        }

        let mut values: Vec<Option<SolvedValue>> = vec![None; n_pos];
        let mut remaining: Vec<u32> = (0..n_pos)
            .map(|p| succ_start[p + 1] - succ_start[p])
            .collect();
        let mut queue = VecDeque::new();
        for p in 0..n_pos {
            if remaining[p] == 0 {
                values[p] = Some(SolvedValue::loss(0));
                queue.push_back(p);
            }
        }
        // FIFO order processes labels in nondecreasing distance, so the first
        // WIN label is the shortest and the last WIN successor of a LOSS is
        // the longest.
        while let Some(p) = queue.pop_front() {
            let v = values[p].unwrap();
            let d = v.distance.unwrap();
            for &q in &pred[pred_start[p] as usize..pred_start[p + 1] as usize] {
                let q = q as usize;
                if values[q].is_some() {
                    continue;
                }
                match v.outcome {
                    Outcome::Loss => {
                        values[q] = Some(SolvedValue::win(d + 1));
                        queue.push_back(q);
                    }
                    Outcome::Win => {
                        remaining[q] -= 1;
                        if remaining[q] == 0 {
                            values[q] = Some(SolvedValue::loss(d + 1));
                            queue.push_back(q);
                        }
                    }
                    Outcome::Draw => unreachable!(),
                }
            }
        }

        SolveTable {
            keys,
            values: values
                .into_iter()
                .map(|v| v.unwrap_or(SolvedValue::DRAW))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Canonical arrangements, ascending.
    pub fn keys(&self) -> &[CanonicalKey] {
        &self.keys
    }

    pub fn value_of(&self, key: CanonicalKey, side: Player) -> Result<SolvedValue, SolverError> {
        self.keys
            .binary_search(&key)
            .map(|i| self.values[i * 2 + side_index(side)])
            .map_err(|_| SolverError::MissingEntry(key))
    }

    /// Value of `state` for its side to move.
    pub fn try_query(&self, state: &GameState) -> Result<SolvedValue, SolverError> {
        self.value_of(canonicalize(state), state.to_move())
    }

    /// Value of `state` for its side to move.
    ///
    /// Panics if the state is missing, which cannot happen for a valid state.
    pub fn query(&self, state: &GameState) -> SolvedValue {
        self.try_query(state).expect("solve table is complete")
    }

    /// Every entry as `(key, side, value)`.
    pub fn entries(&self) -> impl Iterator<Item = (CanonicalKey, Player, SolvedValue)> + '_ {
        self.keys.iter().enumerate().flat_map(move |(i, &k)| {
            [
                (k, Player::A, self.values[i * 2]),
                (k, Player::B, self.values[i * 2 + 1]),
            ]
        })
    }

    /// Optimal turns from `state`, before random tie-breaking.
    ///
    /// Winning: turns reaching the nearest lost position for the opponent.
    /// Drawn: turns keeping the draw. Lost: turns delaying the loss longest.
    pub fn optimal_turns(&self, state: &GameState) -> Vec<Turn> {
        let mut scored: Vec<(Turn, SolvedValue)> = Vec::new();
        state.for_each_successor(|t, next| scored.push((t, self.query(&next))));
        assert!(
            !scored.is_empty(),
            "perfect_move called on a blocked position"
        );
        let own = self.query(state);
        let pick: Box<dyn Fn(&SolvedValue) -> Option<i32>> = match own.outcome {
            Outcome::Win => {
                Box::new(|v| (v.outcome == Outcome::Loss).then(|| -(v.distance.unwrap() as i32)))
            }
            Outcome::Draw => Box::new(|v| (v.outcome == Outcome::Draw).then_some(0)),
            Outcome::Loss => Box::new(|v| v.distance.map(|d| d as i32)),
        };
        let best = scored
            .iter()
            .filter_map(|(_, v)| pick(v))
            .max()
            .expect("an optimal turn exists");
        scored
            .into_iter()
            .filter(|(_, v)| pick(v) == Some(best))
            .map(|(t, _)| t)
            .collect()
    }

    /// A uniformly random optimal turn.
    pub fn perfect_move<R: Rng + ?Sized>(&self, state: &GameState, rng: &mut R) -> Turn {
        let turns = self.optimal_turns(state);
        turns[rng.gen_range(0..turns.len())]
    }

    /// Sorted text dump, one `key side outcome distance` record per line.
    pub fn dump(&self) -> String {
        let mut out = String::with_capacity(self.len() * 16);
        for (k, side, v) in self.entries() {
            let d = v
                .distance
                .map_or_else(|| "-".to_string(), |d| d.to_string());
            let _ = writeln!(out, "{k} {side} {} {d}", v.outcome.letter());
        }
        out
    }

    pub fn stats(&self) -> SolveStats {
        SolveStats::from_table(self)
    }
}

/// How a ply distance is turned into a "number of moves".
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DistanceUnit {
    /// Plies until the blocked position is reached.
    Plies,
    /// Plies, counting the blocked position itself as one more.
    PliesInclusive,
    /// Turns taken by the side to move before the blocked position.
    OwnTurns,
    /// Turns of the side to move, counting its blocked turn if it is the loser.
    OwnTurnsInclusive,
}

impl DistanceUnit {
    pub const ALL: [DistanceUnit; 4] = [
        DistanceUnit::Plies,
        DistanceUnit::PliesInclusive,
        DistanceUnit::OwnTurns,
        DistanceUnit::OwnTurnsInclusive,
    ];

    pub fn convert(self, plies: u16) -> u16 {
        match self {
            DistanceUnit::Plies => plies,
            DistanceUnit::PliesInclusive => plies + 1,
            DistanceUnit::OwnTurns => plies.div_ceil(2),
            DistanceUnit::OwnTurnsInclusive => (plies + 1).div_ceil(2),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DistanceUnit::Plies => "plies",
            DistanceUnit::PliesInclusive => "plies incl. blocked",
            DistanceUnit::OwnTurns => "own turns",
            DistanceUnit::OwnTurnsInclusive => "own turns incl. blocked",
        }
    }
}

/// One reading of "positions decided within N moves" and its count.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DistanceCount {
    /// `Win` counts won positions; `Loss` counts lost but not yet blocked ones.
    pub outcome: Outcome,
    pub unit: DistanceUnit,
    pub limit: u16,
    pub count: usize,
}

impl fmt::Display for DistanceCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let what = match self.outcome {
            Outcome::Win => "won for side to move",
            Outcome::Loss => "forced loss, not blocked",
            Outcome::Draw => "drawn",
        };
        write!(
            f,
            "{what}, <= {} {}: {}",
            self.limit,
            self.unit.name(),
            self.count
        )
    }
}

/// Summary counts of the solved graph.
///
/// Histograms keyed "A to move" count every arrangement once up to colour
/// swap, since (arrangement, B to move) mirrors (swapped arrangement, A to
/// move).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SolveStats {
    pub positions: usize,
    pub arrangements: usize,
    /// Canonical arrangements (owners distinct) where some side is blocked.
    pub blocked_arrangements: usize,
    /// (arrangement, side) pairs whose side to move is blocked.
    pub blocked_positions: usize,
    /// Blocked positions up to colour swap: A to move and blocked.
    pub blocked_up_to_colour: usize,
    pub wins: usize,
    pub losses: usize,
    pub draws: usize,
    pub win_histogram: BTreeMap<u16, usize>,
    pub loss_histogram: BTreeMap<u16, usize>,
    pub win_histogram_a_to_move: BTreeMap<u16, usize>,
    pub loss_histogram_a_to_move: BTreeMap<u16, usize>,
    /// Largest number of legal L placements in any position.
    pub max_placements: usize,
    /// Largest number of legal full turns (placement and neutral option).
    pub max_turns: usize,
}

impl SolveStats {
    fn from_table(t: &SolveTable) -> Self {
        let mut s = SolveStats {
            positions: t.len(),
            arrangements: t.keys.len(),
            blocked_arrangements: 0,
            blocked_positions: 0,
            blocked_up_to_colour: 0,
            wins: 0,
            losses: 0,
            draws: 0,
            win_histogram: BTreeMap::new(),
            loss_histogram: BTreeMap::new(),
            win_histogram_a_to_move: BTreeMap::new(),
            loss_histogram_a_to_move: BTreeMap::new(),
            max_placements: 0,
            max_turns: 0,
        };
        for (i, key) in t.keys.iter().enumerate() {
            let (va, vb) = (t.values[i * 2], t.values[i * 2 + 1]);
            if va == SolvedValue::loss(0) || vb == SolvedValue::loss(0) {
                s.blocked_arrangements += 1;
            }
            for (side, v) in [(Player::A, va), (Player::B, vb)] {
                let state = key.to_state(side);
                let placements = state.legal_l_placements().len();
                s.max_placements = s.max_placements.max(placements);
                s.max_turns = s.max_turns.max(placements * 13);
                let (hist, hist_a) = match v.outcome {
                    Outcome::Win => {
                        s.wins += 1;
                        (&mut s.win_histogram, &mut s.win_histogram_a_to_move)
                    }
                    Outcome::Loss => {
                        s.losses += 1;
                        if v.distance == Some(0) {
                            s.blocked_positions += 1;
                            if side == Player::A {
                                s.blocked_up_to_colour += 1;
                            }
                        }
                        (&mut s.loss_histogram, &mut s.loss_histogram_a_to_move)
                    }
                    Outcome::Draw => {
                        s.draws += 1;
                        continue;
                    }
                };
                let d = v.distance.unwrap();
                *hist.entry(d).or_default() += 1;
                if side == Player::A {
                    *hist_a.entry(d).or_default() += 1;
                }
            }
        }
        s
    }

    /// Counts, up to colour swap, of positions decided within `limit` moves
    /// under every outcome/unit reading. Blocked positions are excluded.
    pub fn decided_within(&self, limit: u16) -> Vec<DistanceCount> {
        let mut out = Vec::new();
        for (outcome, hist) in [
            (Outcome::Win, &self.win_histogram_a_to_move),
            (Outcome::Loss, &self.loss_histogram_a_to_move),
        ] {
            for unit in DistanceUnit::ALL {
                let count = hist
                    .iter()
                    .filter(|(&d, _)| d > 0 && unit.convert(d) <= limit)
                    .map(|(_, &c)| c)
                    .sum();
                out.push(DistanceCount {
                    outcome,
                    unit,
                    limit,
                    count,
                });
            }
        }
        out
    }
}
