//! Helpers for tetrahedral and double-bond stereo bookkeeping.
//!
//! A tetrahedral tag stored on an [`Atom`](super::Atom) is always expressed
//! relative to the *reference order* of its neighbours: the implicit hydrogen
//! or lone pair (if any) first, then the neighbouring atoms by ascending
//! index. Looking from the first neighbour, the remaining three run
//! anticlockwise for `@` and clockwise for `@@`.

/// One position around a stereocentre.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Slot {
    /// Implicit hydrogen or lone pair.
    Virtual,
    Atom(usize),
}

impl Slot {
    pub(crate) fn key(self, rank: impl Fn(usize) -> i64) -> i64 {
        match self {
            Slot::Virtual => -1,
            Slot::Atom(i) => rank(i),
        }
    }
}

/// True when sorting `keys` ascending needs an odd number of swaps.
/// Keys must be distinct.
pub(crate) fn is_odd_permutation(keys: &[i64]) -> bool {
    let mut inversions = 0usize;
    for i in 0..keys.len() {
        for j in i + 1..keys.len() {
            if keys[i] > keys[j] {
                inversions += 1;
            }
        }
    }
    inversions % 2 == 1
}

pub(crate) fn all_distinct(keys: &[i64]) -> bool {
    let mut sorted = keys.to_vec();
    sorted.sort_unstable();
    sorted.windows(2).all(|w| w[0] != w[1])
}
