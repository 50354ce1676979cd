//! Circular-environment (Morgan / ECFP-style) bit fingerprints and Tanimoto
//! similarity.
//!
//! Every atom starts from a hash of its local invariants. Each iteration
//! rehashes an atom together with the sorted `(bond code, neighbour hash)`
//! pairs around it, so the hash after `r` rounds describes the radius-`r`
//! environment. Hashes from every round, including round zero, are folded
//! into the bit vector by `hash mod width`.

mod similarity;

pub use similarity::{structure_similarity, Similarity, Structure, StructureError};

use crate::molgraph::MolGraph;

pub const DEFAULT_RADIUS: u32 = 2;
pub const DEFAULT_WIDTH: usize = 2048;
pub const MAX_RADIUS: u32 = 8;
pub const MIN_WIDTH: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FingerprintError {
    #[error("fingerprint widths differ: {left} vs {right}")]
    WidthMismatch { left: usize, right: usize },
    #[error("radius {0} exceeds the maximum of 8")]
    RadiusTooLarge(u32),
    #[error("width {0} must be a power of two and at least 64")]
    InvalidWidth(usize),
    #[error("bit {bit} outside width {width}")]
    BitOutOfRange { bit: usize, width: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FingerprintParams {
    pub radius: u32,
    pub width: usize,
}

impl Default for FingerprintParams {
    fn default() -> Self {
        FingerprintParams {
            radius: DEFAULT_RADIUS,
            width: DEFAULT_WIDTH,
        }
    }
}

impl FingerprintParams {
    pub fn new(radius: u32, width: usize) -> Result<Self, FingerprintError> {
        let p = FingerprintParams { radius, width };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), FingerprintError> {
        if self.radius > MAX_RADIUS {
            return Err(FingerprintError::RadiusTooLarge(self.radius));
        }
        if self.width < MIN_WIDTH || !self.width.is_power_of_two() {
            return Err(FingerprintError::InvalidWidth(self.width));
        }
        Ok(())
    }
}

/// Fixed-width bit vector with a cached population count.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Fingerprint {
    width: usize,
    words: Vec<u64>,
    set_count: u32,
}

impl Fingerprint {
    pub fn empty(width: usize) -> Fingerprint {
        Fingerprint {
            width,
            words: vec![0; width.div_ceil(64)],
            set_count: 0,
        }
    }

    pub fn from_bits(
        width: usize,
        bits: impl IntoIterator<Item = usize>,
    ) -> Result<Fingerprint, FingerprintError> {
        let mut fp = Fingerprint::empty(width);
        for bit in bits {
            if bit >= width {
                return Err(FingerprintError::BitOutOfRange { bit, width });
            }
            fp.set(bit);
        }
        Ok(fp)
    }

    fn set(&mut self, bit: usize) {
        let (w, mask) = (bit / 64, 1u64 << (bit % 64));
        if self.words[w] & mask == 0 {
            self.words[w] |= mask;
            self.set_count += 1;
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn set_count(&self) -> u32 {
        self.set_count
    }

    pub fn contains(&self, bit: usize) -> bool {
        bit < self.width && self.words[bit / 64] & (1u64 << (bit % 64)) != 0
    }

    /// Set bit positions in ascending order.
    pub fn bits(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.width).filter(|&b| self.contains(b))
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    /// Hex dump, most significant word first.
    pub fn to_hex(&self) -> String {
        self.words.iter().rev().map(|w| format!("{w:016x}")).collect()
    }
}

/// Integer bit counts behind one Tanimoto value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Overlap {
    pub shared: u32,
    pub left: u32,
    pub right: u32,
}

impl Overlap {
    pub fn union(&self) -> u32 {
        self.left + self.right - self.shared
    }

    /// `shared / union`, or 1.0 when both sides are empty.
    pub fn similarity(&self) -> f64 {
        match self.union() {
            0 => 1.0,
            u => f64::from(self.shared) / f64::from(u),
        }
    }

    /// Similarity exactly 1, decided on the integer counts.
    pub fn is_identical(&self) -> bool {
        self.shared == self.left && self.shared == self.right
    }
}

pub fn overlap(a: &Fingerprint, b: &Fingerprint) -> Result<Overlap, FingerprintError> {
    if a.width != b.width {
        return Err(FingerprintError::WidthMismatch {
            left: a.width,
            right: b.width,
        });
    }
    let shared = a
        .words
        .iter()
        .zip(&b.words)
        .map(|(x, y)| (x & y).count_ones())
        .sum();
    Ok(Overlap {
        shared,
        left: a.set_count,
        right: b.set_count,
    })
}

pub fn tanimoto(a: &Fingerprint, b: &Fingerprint) -> Result<f64, FingerprintError> {
    Ok(overlap(a, b)?.similarity())
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

struct Fnv(u64);

impl Fnv {
    fn new() -> Fnv {
        Fnv(FNV_OFFSET)
    }

    fn bytes(&mut self, data: &[u8]) -> &mut Fnv {
        for &b in data {
            self.0 ^= u64::from(b);
            self.0 = self.0.wrapping_mul(FNV_PRIME);
        }
        self
    }

    fn u64(&mut self, v: u64) -> &mut Fnv {
        self.bytes(&v.to_le_bytes())
    }
}

fn atom_seed(mol: &MolGraph, i: usize) -> u64 {
    let a = mol.atom(i);
    let heavy_degree = mol
        .neighbors(i)
        .iter()
        .filter(|nb| mol.atom(nb.atom).element.is_heavy())
        .count();
    let mut h = Fnv::new();
    h.bytes(&[
        a.element.atomic_number(),
        heavy_degree as u8,
        mol.hydrogen_count(i),
        a.charge as u8,
    ])
    .bytes(&a.isotope.unwrap_or(0).to_le_bytes())
    .bytes(&[u8::from(mol.is_ring_atom(i)), u8::from(a.aromatic)]);
    h.0
}

/// Per-atom environment hashes for rounds `0..=radius`.
pub fn environment_hashes(mol: &MolGraph, radius: u32) -> Vec<Vec<u64>> {
    let mut ids: Vec<u64> = (0..mol.atom_count()).map(|i| atom_seed(mol, i)).collect();
    let mut rounds = vec![ids.clone()];
    for r in 1..=radius {
        let next = (0..mol.atom_count())
            .map(|i| {
                let mut env: Vec<(u8, u64)> = mol
                    .neighbors(i)
                    .iter()
                    .map(|nb| (mol.bond(nb.bond).order.code(), ids[nb.atom]))
                    .collect();
                env.sort_unstable();
                let mut h = Fnv::new();
                h.u64(u64::from(r)).u64(ids[i]);
                for (code, id) in env {
                    h.bytes(&[code]).u64(id);
                }
                h.0
            })
            .collect::<Vec<u64>>();
        ids = next;
        rounds.push(ids.clone());
    }
    rounds
}

pub fn morgan_fingerprint(mol: &MolGraph, params: FingerprintParams) -> Fingerprint {
    let mut fp = Fingerprint::empty(params.width);
    for round in environment_hashes(mol, params.radius) {
        for id in round {
            fp.set((id % params.width as u64) as usize);
        }
    }
    fp
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molgraph::parse_smiles;

    fn fp(s: &str, radius: u32) -> Fingerprint {
        let p = FingerprintParams {
            radius,
            ..FingerprintParams::default()
        };
        morgan_fingerprint(&parse_smiles(s).unwrap(), p)
    }

    #[test]
    fn fnv_reference_vectors() {
        assert_eq!(Fnv::new().0, 0xcbf29ce484222325);
        assert_eq!(Fnv::new().bytes(b"a").0, 0xaf63dc4c8601ec8c);
        assert_eq!(Fnv::new().bytes(b"foobar").0, 0x85944171f73967e8);
    }

    #[test]
    fn reorder_invariant() {
        assert_eq!(fp("CCO", 2), fp("OCC", 2));
        assert_eq!(fp("c1ccccc1O", 2), fp("Oc1ccccc1", 2));
    }

    #[test]
    fn single_atom_radius_zero() {
        assert_eq!(fp("C", 0).set_count(), 1);
    }

    #[test]
    fn tanimoto_arithmetic() {
        let a = Fingerprint::from_bits(64, [0, 1, 2, 3]).unwrap();
        let b = Fingerprint::from_bits(64, [1, 2, 3, 4, 5]).unwrap();
        assert_eq!(tanimoto(&a, &b).unwrap(), 0.5);
        assert_eq!(tanimoto(&a, &a).unwrap(), 1.0);
        let e = Fingerprint::empty(64);
        assert_eq!(tanimoto(&e, &e).unwrap(), 1.0);
        assert_eq!(tanimoto(&a, &e).unwrap(), 0.0);
        let wide = Fingerprint::empty(128);
        assert_eq!(
            tanimoto(&a, &wide),
            Err(FingerprintError::WidthMismatch {
                left: 64,
                right: 128
            })
        );
    }

    #[test]
    fn params_are_validated() {
        assert!(FingerprintParams::new(8, 64).is_ok());
        assert_eq!(
            FingerprintParams::new(9, 2048),
            Err(FingerprintError::RadiusTooLarge(9))
        );
        assert_eq!(
            FingerprintParams::new(2, 1000),
            Err(FingerprintError::InvalidWidth(1000))
        );
        assert_eq!(
            FingerprintParams::new(2, 32),
            Err(FingerprintError::InvalidWidth(32))
        );
    }

    #[test]
    fn set_count_matches_popcount() {
        let f = fp("C=CCOc1ccc(N2C(=O)C=CC2=O)cc1", 2);
        assert_eq!(f.set_count() as usize, f.bits().count());
        assert_eq!(f.to_hex().len(), 2048 / 4);
    }
}
