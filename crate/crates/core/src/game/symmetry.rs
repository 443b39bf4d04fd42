//! Square symmetries, canonical keys and arrangement enumeration.

use std::collections::HashSet;
use std::fmt;
use std::sync::OnceLock;

use super::{ActionCode, Cell, GameState, Player, BOARD_SIDE, NUM_CELLS};

pub const NUM_SYMMETRIES: usize = 8;

/// Minimal 2-bit-per-cell encoding of an arrangement over its 8 symmetric
/// images. Cell 0 occupies the most significant bits, so numeric order is the
/// lexicographic order of the cell sequence. L pieces keep their owner; the
/// neutral pieces are indistinguishable. Side to move is not included.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CanonicalKey(pub u32);

impl fmt::Display for CanonicalKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:08x}", self.0)
    }
}

fn permutations() -> &'static [[u8; NUM_CELLS]; NUM_SYMMETRIES] {
    static PERMS: OnceLock<[[u8; NUM_CELLS]; NUM_SYMMETRIES]> = OnceLock::new();
    PERMS.get_or_init(|| {
        let n = BOARD_SIDE - 1;
        std::array::from_fn(|k| {
            std::array::from_fn(|i| {
                let (mut r, mut c) = (i / BOARD_SIDE, i % BOARD_SIDE);
                if k / 4 == 1 {
                    c = n - c;
                }
                for _ in 0..k % 4 {
                    (r, c) = (c, n - r);
                }
                (r * BOARD_SIDE + c) as u8
            })
        })
    })
}

#[inline]
fn permute_mask(mask: u16, perm: &[u8; NUM_CELLS]) -> u16 {
    let mut out = 0u16;
    let mut m = mask;
    while m != 0 {
        let i = m.trailing_zeros() as usize;
        out |= 1 << perm[i];
        m &= m - 1;
    }
    out
}

/// Image of `state` under symmetry `k` (`mirror * 4 + quarter_turns`).
pub fn symmetry_image(state: &GameState, k: usize) -> GameState {
    let perm = &permutations()[k];
    GameState::from_masks_unchecked(
        permute_mask(state.l_mask(Player::A), perm),
        permute_mask(state.l_mask(Player::B), perm),
        permute_mask(state.neutral_mask(), perm),
        state.to_move(),
    )
}

#[inline]
fn raw_key(a: u16, b: u16, n: u16) -> u32 {
    let mut key = 0u32;
    for i in 0..NUM_CELLS {
        let bit = 1u16 << i;
        let v = if a & bit != 0 {
            1
        } else if b & bit != 0 {
            2
        } else if n & bit != 0 {
            3
        } else {
            0
        };
        key |= v << (2 * (NUM_CELLS - 1 - i));
    }
    key
}

/// Canonical key of the arrangement (side to move ignored).
pub fn canonicalize(state: &GameState) -> CanonicalKey {
    let (a, b, n) = (
        state.l_mask(Player::A),
        state.l_mask(Player::B),
        state.neutral_mask(),
    );
    let key = permutations()
        .iter()
        .map(|p| raw_key(permute_mask(a, p), permute_mask(b, p), permute_mask(n, p)))
        .min()
        .unwrap();
    CanonicalKey(key)
}

impl CanonicalKey {
    /// The arrangement this key encodes, with `to_move` attached.
    pub fn to_state(self, to_move: Player) -> GameState {
        let (mut a, mut b, mut n) = (0u16, 0u16, 0u16);
        for i in 0..NUM_CELLS {
            match (self.0 >> (2 * (NUM_CELLS - 1 - i))) & 3 {
                1 => a |= 1 << i,
                2 => b |= 1 << i,
                3 => n |= 1 << i,
                _ => {}
            }
        }
        GameState::from_masks_unchecked(a, b, n, to_move)
    }

    pub fn cell(self, i: usize) -> Cell {
        self.to_state(Player::A).cell(i)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ArrangementCounts {
    /// Arrangements with distinct placements, neutrals as an unordered pair.
    pub raw: usize,
    /// Distinct canonical keys among them.
    pub canonical: usize,
    /// Ordered, non-overlapping (L of A, L of B) placement pairs.
    pub l_pairs: usize,
}

/// Every valid arrangement, A to move, in (A code, B code, neutral pair) order.
pub fn all_arrangements() -> Vec<GameState> {
    let mut out = Vec::with_capacity(18368);
    for ca in ActionCode::on_board() {
        let ma = ca.mask().unwrap();
        for cb in ActionCode::on_board() {
            let mb = cb.mask().unwrap();
            if ma & mb != 0 {
                continue;
            }
            let free = !(ma | mb);
            for i in 0..NUM_CELLS {
                for j in i + 1..NUM_CELLS {
                    if free & (1 << i) != 0 && free & (1 << j) != 0 {
                        out.push(GameState::from_masks_unchecked(
                            ma,
                            mb,
                            (1 << i) | (1 << j),
                            Player::A,
                        ));
                    }
                }
            }
        }
    }
    out
}

pub fn enumerate_arrangements() -> ArrangementCounts {
    let all = all_arrangements();
    let keys: HashSet<CanonicalKey> = all.iter().map(canonicalize).collect();
    let l_pairs = all
        .iter()
        .map(|s| (s.l_mask(Player::A), s.l_mask(Player::B)))
        .collect::<HashSet<_>>()
        .len();
    ArrangementCounts {
        raw: all.len(),
        canonical: keys.len(),
        l_pairs,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::start_position;

    #[test]
    fn permutations_form_the_dihedral_group() {
        let perms = permutations();
        let set: HashSet<_> = perms.iter().collect();
        assert_eq!(set.len(), 8);
        // identity first
        assert!(perms[0].iter().enumerate().all(|(i, &j)| i == j as usize));
    }

    #[test]
    fn canonical_is_symmetry_invariant_and_idempotent() {
        let s = start_position();
        let k = canonicalize(&s);
        for sym in 0..NUM_SYMMETRIES {
            assert_eq!(canonicalize(&symmetry_image(&s, sym)), k);
        }
        assert_eq!(canonicalize(&k.to_state(Player::A)), k);
    }

    #[test]
    fn counts_match_known_totals() {
        let c = enumerate_arrangements();
        assert_eq!(c.raw, 18368);
        assert_eq!(c.canonical, 2296);
        assert_eq!(c.l_pairs, 656);
        assert_eq!(c.raw, c.l_pairs * 28);
    }

    #[test]
    fn orbit_sizes_sum_to_raw_count() {
        let mut orbit: std::collections::HashMap<CanonicalKey, HashSet<(u16, u16, u16)>> =
            Default::default();
        for s in all_arrangements() {
            for k in 0..NUM_SYMMETRIES {
                let t = symmetry_image(&s, k);
                orbit.entry(canonicalize(&s)).or_default().insert((
                    t.l_mask(Player::A),
                    t.l_mask(Player::B),
                    t.neutral_mask(),
                ));
            }
        }
        assert_eq!(orbit.len(), 2296);
        assert_eq!(orbit.values().map(|o| o.len()).sum::<usize>(), 18368);
    }
}
