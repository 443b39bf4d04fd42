//! L-Game rules: board state, move generation, turn application and
//! the network-facing encodings.
//!
//! Cells are indexed row-major, `index = row * 4 + col`. Board contents are
//! kept as three disjoint 16-bit occupancy masks.

mod actions;
mod symmetry;

use std::fmt;
use std::str::FromStr;

pub use actions::{
    orientation_offsets, ActionCode, CodeOutOfRange, NeutralAction, Turn, NUM_ACTION_CODES,
    NUM_ON_BOARD, NUM_ORIENTATIONS,
};
pub use symmetry::{
    all_arrangements, canonicalize, enumerate_arrangements, symmetry_image, ArrangementCounts,
    CanonicalKey, NUM_SYMMETRIES,
};

pub const BOARD_SIDE: usize = 4;
pub const NUM_CELLS: usize = 16;
/// Length of the network input vector.
pub const INPUT_SIZE: usize = NUM_CELLS;

#[inline]
pub const fn cell_index(row: usize, col: usize) -> usize {
    row * BOARD_SIDE + col
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Player {
    A,
    B,
}

impl Player {
    #[inline]
    pub fn opponent(self) -> Player {
        match self {
            Player::A => Player::B,
            Player::B => Player::A,
        }
    }

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Player {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Player::A => "A",
            Player::B => "B",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Cell {
    Empty,
    L(Player),
    Neutral,
}

impl Cell {
    pub fn symbol(self) -> char {
        match self {
            Cell::Empty => '.',
            Cell::L(Player::A) => 'A',
            Cell::L(Player::B) => 'B',
            Cell::Neutral => 'o',
        }
    }

    pub fn from_symbol(ch: char) -> Option<Cell> {
        match ch {
            '.' => Some(Cell::Empty),
            'A' => Some(Cell::L(Player::A)),
            'B' => Some(Cell::L(Player::B)),
            'o' => Some(Cell::Neutral),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StateError {
    #[error("player {0} must cover exactly 4 cells, found {1}")]
    PieceCount(Player, u32),
    #[error("expected exactly 2 neutral pieces, found {0}")]
    NeutralCount(u32),
    #[error("cells of player {0} do not form an L tetromino")]
    NotAnL(Player),
    #[error("pieces overlap on {0} cell(s)")]
    Overlap(u32),
    #[error("board text must be 4 rows of 4 symbols from '.', 'A', 'B', 'o'")]
    BadText,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TurnError {
    #[error("illegal L placement {0}")]
    IllegalPlacement(ActionCode),
    #[error("illegal neutral action {0:?}")]
    IllegalNeutral(NeutralAction),
}

/// A full position: both L pieces, the two neutral pieces and the side to move.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct GameState {
    l_masks: [u16; 2],
    neutrals: u16,
    to_move: Player,
}

impl GameState {
    /// Builds a state from raw masks, checking every board invariant.
    pub fn from_masks(a: u16, b: u16, neutrals: u16, to_move: Player) -> Result<Self, StateError> {
        for (p, m) in [(Player::A, a), (Player::B, b)] {
            if m.count_ones() != 4 {
                return Err(StateError::PieceCount(p, m.count_ones()));
            }
        }
        if neutrals.count_ones() != 2 {
            return Err(StateError::NeutralCount(neutrals.count_ones()));
        }
        if a & b != 0 || (a | b) & neutrals != 0 {
            let overlap = (a & b) | ((a | b) & neutrals);
            return Err(StateError::Overlap(overlap.count_ones()));
        }
        for (p, m) in [(Player::A, a), (Player::B, b)] {
            if ActionCode::from_mask(m).is_none() {
                return Err(StateError::NotAnL(p));
            }
        }
        Ok(GameState::from_masks_unchecked(a, b, neutrals, to_move))
    }

    #[inline]
    pub(crate) fn from_masks_unchecked(a: u16, b: u16, neutrals: u16, to_move: Player) -> Self {
        GameState {
            l_masks: [a, b],
            neutrals,
            to_move,
        }
    }

    pub fn from_cells(cells: &[Cell; NUM_CELLS], to_move: Player) -> Result<Self, StateError> {
        let (mut a, mut b, mut n) = (0u16, 0u16, 0u16);
        for (i, c) in cells.iter().enumerate() {
            match c {
                Cell::Empty => {}
                Cell::L(Player::A) => a |= 1 << i,
                Cell::L(Player::B) => b |= 1 << i,
                Cell::Neutral => n |= 1 << i,
            }
        }
        GameState::from_masks(a, b, n, to_move)
    }

    /// Parses the 4-line text rendering (whitespace between rows is ignored).
    pub fn parse(text: &str, to_move: Player) -> Result<Self, StateError> {
        let symbols: Vec<char> = text.chars().filter(|c| !c.is_whitespace()).collect();
        if symbols.len() != NUM_CELLS {
            return Err(StateError::BadText);
        }
        let mut cells = [Cell::Empty; NUM_CELLS];
        for (slot, ch) in cells.iter_mut().zip(symbols) {
            *slot = Cell::from_symbol(ch).ok_or(StateError::BadText)?;
        }
        GameState::from_cells(&cells, to_move)
    }

    #[inline]
    pub fn to_move(&self) -> Player {
        self.to_move
    }

    #[inline]
    pub fn l_mask(&self, p: Player) -> u16 {
        self.l_masks[p.index()]
    }

    #[inline]
    pub fn neutral_mask(&self) -> u16 {
        self.neutrals
    }

    #[inline]
    pub fn occupied(&self) -> u16 {
        self.l_masks[0] | self.l_masks[1] | self.neutrals
    }

    /// Placement code of a player's L.
    pub fn l_code(&self, p: Player) -> ActionCode {
        ActionCode::from_mask(self.l_mask(p)).expect("state holds a valid L")
    }

    /// Neutral cells, lower index first.
    #[inline]
    pub fn neutral_cells(&self) -> [usize; 2] {
        let lo = self.neutrals.trailing_zeros() as usize;
        let hi = 15 - self.neutrals.leading_zeros() as usize;
        [lo, hi]
    }

    pub fn cell(&self, i: usize) -> Cell {
        let bit = 1u16 << i;
        if self.l_masks[0] & bit != 0 {
            Cell::L(Player::A)
        } else if self.l_masks[1] & bit != 0 {
            Cell::L(Player::B)
        } else if self.neutrals & bit != 0 {
            Cell::Neutral
        } else {
            Cell::Empty
        }
    }

    pub fn cells(&self) -> [Cell; NUM_CELLS] {
        std::array::from_fn(|i| self.cell(i))
    }

    /// Same arrangement with the other side to move.
    pub fn with_to_move(mut self, p: Player) -> Self {
        self.to_move = p;
        self
    }

    /// Legal L placements for the side to move, ascending by code.
    pub fn legal_l_placements(&self) -> Vec<ActionCode> {
        let mut out = Vec::with_capacity(NUM_ON_BOARD);
        self.for_each_placement(|c| out.push(c));
        out
    }

    #[inline]
    fn for_each_placement(&self, mut f: impl FnMut(ActionCode)) {
        let own = self.l_mask(self.to_move);
        let blocked = self.l_mask(self.to_move.opponent()) | self.neutrals;
        for code in ActionCode::on_board() {
            let m = code.mask().unwrap();
            if m & blocked == 0 && m != own {
                f(code);
            }
        }
    }

    pub fn legal_action_mask(&self) -> LegalMask {
        let mut bits = 0u128;
        self.for_each_placement(|c| bits |= 1u128 << c.index());
        LegalMask(bits)
    }

    /// True when the side to move cannot relocate its L, i.e. has lost.
    pub fn is_loss(&self) -> bool {
        let mut any = false;
        self.for_each_placement(|_| any = true);
        !any
    }

    /// Puts the mover's L on `code`, returning the intermediate state (same
    /// side still to move, neutral phase pending).
    pub fn place_l(&self, code: ActionCode) -> Result<GameState, TurnError> {
        let own = self.l_mask(self.to_move);
        let blocked = self.l_mask(self.to_move.opponent()) | self.neutrals;
        match code.mask() {
            Some(m) if m & blocked == 0 && m != own => {
                let mut next = *self;
                next.l_masks[self.to_move.index()] = m;
                Ok(next)
            }
            _ => Err(TurnError::IllegalPlacement(code)),
        }
    }

    /// Neutral options in an intermediate state, ascending by neutral code
    /// (so `NoMove` is first).
    pub fn legal_neutral_actions(&self) -> Vec<NeutralAction> {
        let vacant = !self.occupied();
        let mut out = Vec::with_capacity(13);
        out.push(NeutralAction::NoMove);
        for piece in 0..2u8 {
            for to in 0..NUM_CELLS as u8 {
                if vacant & (1 << to) != 0 {
                    out.push(NeutralAction::Move { piece, to });
                }
            }
        }
        out
    }

    /// Applies a neutral action to an intermediate state (side to move unchanged).
    pub fn apply_neutral(&self, action: NeutralAction) -> Result<GameState, TurnError> {
        match action {
            NeutralAction::NoMove => Ok(*self),
            NeutralAction::Move { piece, to } => {
                if piece > 1 || to as usize >= NUM_CELLS || self.occupied() & (1 << to) != 0 {
                    return Err(TurnError::IllegalNeutral(action));
                }
                let from = self.neutral_cells()[piece as usize];
                let mut next = *self;
                next.neutrals = (self.neutrals & !(1 << from)) | (1 << to);
                Ok(next)
            }
        }
    }

    /// Plays a full turn and hands the move to the opponent.
    pub fn apply_turn(&self, turn: Turn) -> Result<GameState, TurnError> {
        let mut next = self.place_l(turn.placement)?.apply_neutral(turn.neutral)?;
        next.to_move = self.to_move.opponent();
        Ok(next)
    }

    /// All legal turns, placement-major.
    pub fn legal_turns(&self) -> Vec<Turn> {
        let mut out = Vec::new();
        for placement in self.legal_l_placements() {
            let mid = self
                .place_l(placement)
                .expect("generated placement is legal");
            for neutral in mid.legal_neutral_actions() {
                out.push(Turn { placement, neutral });
            }
        }
        out
    }

    /// Calls `f` with each legal turn and its resulting state.
    pub fn for_each_successor(&self, mut f: impl FnMut(Turn, GameState)) {
        let mover = self.to_move;
        let opp = mover.opponent();
        self.for_each_placement(|placement| {
            let mut mid = *self;
            mid.l_masks[mover.index()] = placement.mask().unwrap();
            let mut done = mid;
            done.to_move = opp;
            f(
                Turn {
                    placement,
                    neutral: NeutralAction::NoMove,
                },
                done,
            );
            let vacant = !mid.occupied();
            let cells = mid.neutral_cells();
            for (piece, from) in cells.into_iter().enumerate() {
                for to in 0..NUM_CELLS {
                    if vacant & (1 << to) != 0 {
                        let mut next = done;
                        next.neutrals = (mid.neutrals & !(1 << from)) | (1 << to);
                        f(
                            Turn {
                                placement,
                                neutral: NeutralAction::Move {
                                    piece: piece as u8,
                                    to: to as u8,
                                },
                            },
                            next,
                        );
                    }
                }
            }
        });
    }

    /// Network input from the mover's point of view: own L +1, opponent L -1,
    /// neutral +0.5, empty 0.
    pub fn encode_for_network(&self) -> [f32; INPUT_SIZE] {
        let own = self.l_mask(self.to_move);
        let opp = self.l_mask(self.to_move.opponent());
        std::array::from_fn(|i| {
            let bit = 1u16 << i;
            if own & bit != 0 {
                1.0
            } else if opp & bit != 0 {
                -1.0
            } else if self.neutrals & bit != 0 {
                0.5
            } else {
                0.0
            }
        })
    }

    pub fn canonical_key(&self) -> CanonicalKey {
        canonicalize(self)
    }
}

impl fmt::Display for GameState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in 0..BOARD_SIDE {
            for col in 0..BOARD_SIDE {
                write!(f, "{}", self.cell(cell_index(row, col)).symbol())?;
            }
            if row + 1 < BOARD_SIDE {
                writeln!(f)?;
            }
        }
        Ok(())
    }
}

impl FromStr for GameState {
    type Err = StateError;

    /// Parses the board with player A to move.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        GameState::parse(s, Player::A)
    }
}

/// The opening position: neutrals in opposite corners `(0,0)` and `(3,3)`,
/// the two L pieces interlocked in the middle columns. A moves first.
pub fn start_position() -> GameState {
    GameState::parse(
        "oAA.
         .BA.
         .BA.
         .BBo",
        Player::A,
    )
    .expect("start position is valid")
}

/// Bitset over the 128 action codes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct LegalMask(pub u128);

impl LegalMask {
    #[inline]
    pub fn get(&self, code: usize) -> bool {
        code < NUM_ACTION_CODES && (self.0 >> code) & 1 == 1
    }

    #[inline]
    pub fn count(&self) -> usize {
        self.0.count_ones() as usize
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    /// Set codes, ascending.
    pub fn iter(&self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                None
            } else {
                let i = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(i)
            }
        })
    }

    pub fn to_bools(&self) -> [bool; NUM_ACTION_CODES] {
        std::array::from_fn(|i| self.get(i))
    }

    /// Largest `values[c]` over set codes; `empty` when no code is set.
    pub fn masked_max(&self, values: &[f32], empty: f32) -> f32 {
        self.iter()
            .map(|c| values[c])
            .fold(None, |acc: Option<f32>, v| {
                Some(acc.map_or(v, |a| a.max(v)))
            })
            .unwrap_or(empty)
    }

    /// Lowest code attaining the masked maximum.
    pub fn masked_argmax(&self, values: &[f32]) -> Option<usize> {
        let mut best: Option<(usize, f32)> = None;
        for c in self.iter() {
            if best.map_or(true, |(_, v)| values[c] > v) {
                best = Some((c, values[c]));
            }
        }
        best.map(|(c, _)| c)
    }
}
