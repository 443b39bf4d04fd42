//! L-piece placement codes and neutral-piece actions.
//!
//! A placement code packs `orientation * 16 + anchor`. Orientation is
//! `mirror * 4 + quarter_turns` applied to the base shape
//! `{(0,0),(1,0),(2,0),(2,1)}` (row, col), then shifted so its minimum row and
//! column are zero. The anchor is the cell the normalized shape is translated
//! to. Only 48 of the 128 codes land fully on the board.

use std::fmt;
use std::sync::OnceLock;

use super::{cell_index, BOARD_SIDE, NUM_CELLS};

/// Number of network output slots.
pub const NUM_ACTION_CODES: usize = 128;
/// Number of orientations of the L tetromino.
pub const NUM_ORIENTATIONS: usize = 8;
/// Number of codes whose placement fits on the board.
pub const NUM_ON_BOARD: usize = 48;

const BASE_SHAPE: [(i8, i8); 4] = [(0, 0), (1, 0), (2, 0), (2, 1)];

/// A placement of an L piece, `0..128`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ActionCode(u8);

/// Error for a code outside `0..128`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("action code {0} is outside 0..128")]
pub struct CodeOutOfRange(pub usize);

impl ActionCode {
    pub fn new(code: usize) -> Result<Self, CodeOutOfRange> {
        if code < NUM_ACTION_CODES {
            Ok(ActionCode(code as u8))
        } else {
            Err(CodeOutOfRange(code))
        }
    }

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }

    #[inline]
    pub fn orientation(self) -> usize {
        self.index() / NUM_CELLS
    }

    #[inline]
    pub fn anchor(self) -> usize {
        self.index() % NUM_CELLS
    }

    /// Occupied-cell bitmask, or `None` when the placement falls off the board.
    #[inline]
    pub fn mask(self) -> Option<u16> {
        let m = tables().masks[self.index()];
        (m != 0).then_some(m)
    }

    /// The four cells covered by this placement, ascending.
    pub fn cells(self) -> Option<[usize; 4]> {
        self.mask().map(mask_cells)
    }

    /// Iterator over every code that lands fully on the board, ascending.
    pub fn on_board() -> impl Iterator<Item = ActionCode> {
        tables().on_board.iter().copied()
    }

    /// Inverse of [`ActionCode::mask`] for on-board placements.
    pub fn from_mask(mask: u16) -> Option<ActionCode> {
        tables()
            .on_board
            .iter()
            .copied()
            .find(|c| tables().masks[c.index()] == mask)
    }
}

impl fmt::Display for ActionCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Cells of `(row, col)` offsets for orientation `o`, normalized to min 0.
pub fn orientation_offsets(o: usize) -> [(i8, i8); 4] {
    assert!(o < NUM_ORIENTATIONS, "orientation {o} out of range");
    let mirror = o / 4 == 1;
    let turns = o % 4;
    let mut pts = BASE_SHAPE;
    for p in pts.iter_mut() {
        if mirror {
            p.1 = -p.1;
        }
        for _ in 0..turns {
            *p = (p.1, -p.0);
        }
    }
    let min_r = pts.iter().map(|p| p.0).min().unwrap();
    let min_c = pts.iter().map(|p| p.1).min().unwrap();
    for p in pts.iter_mut() {
        p.0 -= min_r;
        p.1 -= min_c;
    }
    pts
}

fn decode_mask(code: usize) -> u16 {
    let o = code / NUM_CELLS;
    let anchor = code % NUM_CELLS;
    let (ar, ac) = ((anchor / BOARD_SIDE) as i8, (anchor % BOARD_SIDE) as i8);
    let mut mask = 0u16;
    for (dr, dc) in orientation_offsets(o) {
        let (r, c) = (ar + dr, ac + dc);
        if !(0..BOARD_SIDE as i8).contains(&r) || !(0..BOARD_SIDE as i8).contains(&c) {
            return 0;
        }
        mask |= 1 << cell_index(r as usize, c as usize);
    }
    mask
}

struct Tables {
    masks: [u16; NUM_ACTION_CODES],
    on_board: Vec<ActionCode>,
}

fn tables() -> &'static Tables {
    static TABLES: OnceLock<Tables> = OnceLock::new();
    TABLES.get_or_init(|| {
        let mut masks = [0u16; NUM_ACTION_CODES];
        for (code, m) in masks.iter_mut().enumerate() {
            *m = decode_mask(code);
        }
        let on_board = (0..NUM_ACTION_CODES)
            .filter(|&c| masks[c] != 0)
            .map(|c| ActionCode(c as u8))
            .collect();
        Tables { masks, on_board }
    })
}

pub(crate) fn mask_cells(mask: u16) -> [usize; 4] {
    let mut out = [0usize; 4];
    let mut m = mask;
    for slot in out.iter_mut() {
        *slot = m.trailing_zeros() as usize;
        m &= m - 1;
    }
    out
}

/// Optional relocation of one neutral piece after the L placement.
///
/// Neutral pieces are identical; `piece` 0 is the one on the lower cell index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NeutralAction {
    NoMove,
    Move { piece: u8, to: u8 },
}

impl NeutralAction {
    /// 0 for `NoMove`, otherwise `1 + piece * 16 + destination`.
    pub fn code(self) -> usize {
        match self {
            NeutralAction::NoMove => 0,
            NeutralAction::Move { piece, to } => 1 + piece as usize * NUM_CELLS + to as usize,
        }
    }

    pub fn from_code(code: usize) -> Option<Self> {
        match code {
            0 => Some(NeutralAction::NoMove),
            1..=32 => {
                let c = code - 1;
                Some(NeutralAction::Move {
                    piece: (c / NUM_CELLS) as u8,
                    to: (c % NUM_CELLS) as u8,
                })
            }
            _ => None,
        }
    }
}

/// One full turn: an L placement followed by an optional neutral move.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Turn {
    pub placement: ActionCode,
    pub neutral: NeutralAction,
}
