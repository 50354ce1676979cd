//! Canonical atom ranking by iterative invariant refinement.
//!
//! Atoms start from a tuple of local invariants and are repeatedly split by
//! the sorted multiset of `(neighbour class, bond order)` pairs until the
//! partition is stable. Stereo tags whose neighbours are fully resolved by
//! the partition contribute a parity invariant, and the refinement is
//! rerun until nothing changes. Remaining ties are broken by promoting the
//! lowest-index member of the smallest tied class and refining again.

use super::graph::{DoubleBondConfig, MolGraph};
use super::stereo::{all_distinct, is_odd_permutation};

type Ranks = Vec<u32>;

fn dense_ranks<K: Ord + Clone>(keys: &[K]) -> Ranks {
    let mut sorted: Vec<K> = keys.to_vec();
    sorted.sort();
    sorted.dedup();
    keys.iter()
        .map(|k| sorted.binary_search(k).unwrap() as u32)
        .collect()
}

fn class_count(ranks: &[u32]) -> usize {
    let mut r = ranks.to_vec();
    r.sort_unstable();
    r.dedup();
    r.len()
}

fn initial_invariants(mol: &MolGraph) -> Ranks {
    let keys: Vec<_> = (0..mol.atom_count())
        .map(|i| {
            let a = mol.atom(i);
            (
                a.element.atomic_number(),
                a.charge,
                a.isotope.unwrap_or(0),
                mol.degree(i),
                mol.hydrogen_count(i),
                a.aromatic,
                mol.is_ring_atom(i),
                a.atom_class.unwrap_or(0),
            )
        })
        .collect();
    dense_ranks(&keys)
}

fn refine(mol: &MolGraph, mut ranks: Ranks) -> Ranks {
    let mut classes = class_count(&ranks);
    loop {
        let keys: Vec<(u32, Vec<(u32, u8)>)> = (0..mol.atom_count())
            .map(|i| {
                let mut env: Vec<(u32, u8)> = mol
                    .neighbors(i)
                    .iter()
                    .map(|nb| (ranks[nb.atom], mol.bond(nb.bond).order.code()))
                    .collect();
                env.sort_unstable();
                (ranks[i], env)
            })
            .collect();
        let next = dense_ranks(&keys);
        let next_classes = class_count(&next);
        ranks = next;
        if next_classes == classes {
            return ranks;
        }
        classes = next_classes;
    }
}

/// Parity of each tetrahedral centre whose neighbours all have distinct
/// ranks: 1 or 2, else 0.
fn tetrahedral_invariant(mol: &MolGraph, ranks: &[u32], atom: usize) -> Option<u8> {
    let tag = mol.atom(atom).chirality?;
    let slots = mol.stereo_slots(atom)?;
    let keys: Vec<i64> = slots.iter().map(|s| s.key(|a| i64::from(ranks[a]))).collect();
    if !all_distinct(&keys) {
        return None;
    }
    let relative = tag.flipped_if(is_odd_permutation(&keys));
    Some(match relative {
        super::Chirality::CounterClockwise => 1,
        super::Chirality::Clockwise => 2,
    })
}

/// Whether the lowest-index substituent differs from the lowest-ranked one,
/// or `None` when two substituents are tied.
fn reference_flip(mol: &MolGraph, ranks: &[u32], end: usize, partner: usize) -> Option<bool> {
    let subs = mol.substituents(end, partner);
    match subs.as_slice() {
        [_] => Some(false),
        [a, b] if ranks[*a] != ranks[*b] => Some(ranks[*b] < ranks[*a]),
        _ => None,
    }
}

fn double_bond_invariant(mol: &MolGraph, ranks: &[u32], stereo_index: usize) -> Option<u8> {
    let s = mol.double_bond_stereo()[stereo_index];
    let b = mol.bond(s.bond);
    let fa = reference_flip(mol, ranks, b.begin, b.end)?;
    let fb = reference_flip(mol, ranks, b.end, b.begin)?;
    Some(match s.config.flipped_if(fa ^ fb) {
        DoubleBondConfig::Cis => 1,
        DoubleBondConfig::Trans => 2,
    })
}

fn stereo_invariants(mol: &MolGraph, ranks: &[u32]) -> Vec<(u8, u8)> {
    let mut inv = vec![(0u8, 0u8); mol.atom_count()];
    for (i, slot) in inv.iter_mut().enumerate() {
        slot.0 = tetrahedral_invariant(mol, ranks, i).unwrap_or(0);
    }
    for k in 0..mol.double_bond_stereo().len() {
        if let Some(v) = double_bond_invariant(mol, ranks, k) {
            let b = mol.bond(mol.double_bond_stereo()[k].bond);
            inv[b.begin].1 = inv[b.begin].1.max(v);
            inv[b.end].1 = inv[b.end].1.max(v);
        }
    }
    inv
}

/// Refinement to a fixed point including stereo parities.
fn refine_with_stereo(mol: &MolGraph, ranks: Ranks) -> Ranks {
    let mut ranks = refine(mol, ranks);
    loop {
        let inv = stereo_invariants(mol, &ranks);
        let keys: Vec<(u32, (u8, u8))> = ranks.iter().copied().zip(inv).collect();
        let next = refine(mol, dense_ranks(&keys));
        if class_count(&next) == class_count(&ranks) {
            return ranks;
        }
        ranks = next;
    }
}

/// Stereo tags that cannot be distinguished from their mirror image: a
/// centre with two equivalent neighbours, or a double-bond end carrying two
/// equivalent substituents.
fn meaningless_stereo(mol: &MolGraph, ranks: &[u32]) -> (Vec<usize>, Vec<usize>) {
    let atoms = (0..mol.atom_count())
        .filter(|&i| mol.atom(i).chirality.is_some() && tetrahedral_invariant(mol, ranks, i).is_none())
        .collect();
    let bonds = mol
        .double_bond_stereo()
        .iter()
        .enumerate()
        .filter(|(k, _)| double_bond_invariant(mol, ranks, *k).is_none())
        .map(|(_, s)| s.bond)
        .collect();
    (atoms, bonds)
}

/// Strips stereo tags that carry no information and returns the stable
/// partition before tie-breaking.
pub(crate) fn sanitize(mol: &MolGraph) -> (MolGraph, Ranks) {
    let ranks = refine_with_stereo(mol, initial_invariants(mol));
    let (atoms, bonds) = meaningless_stereo(mol, &ranks);
    if atoms.is_empty() && bonds.is_empty() {
        return (mol.clone(), ranks);
    }
    let cleaned = mol.without_stereo(&atoms, &bonds);
    let ranks = refine_with_stereo(&cleaned, initial_invariants(&cleaned));
    (cleaned, ranks)
}

/// Canonical ranks (a permutation of `0..n`) for an already sanitized graph.
pub(crate) fn canonical_ranks(mol: &MolGraph, mut ranks: Ranks) -> Ranks {
    let n = mol.atom_count();
    while class_count(&ranks) < n {
        let mut counts = vec![0usize; n];
        for &r in &ranks {
            counts[r as usize] += 1;
        }
        let tied = (0..n as u32).find(|&r| counts[r as usize] > 1).unwrap();
        let chosen = (0..n).find(|&i| ranks[i] == tied).unwrap();
        let keys: Vec<(u32, u8)> = (0..n)
            .map(|i| (ranks[i], u8::from(ranks[i] == tied && i != chosen)))
            .collect();
        ranks = refine_with_stereo(mol, dense_ranks(&keys));
    }
    ranks
}
