//! Deliberately naive re-implementations used to check the library.

use std::collections::BTreeSet;

use chemreason::fingerprint::Fingerprint;
use chemreason::funcgroups::{Catalog, Pattern};
use chemreason::molgraph::MolGraph;

/// Every injective assignment of query atoms to target atoms, checked in
/// full; returns the distinct matched atom sets.
pub fn brute_force_matches(target: &MolGraph, pattern: &Pattern) -> BTreeSet<Vec<usize>> {
    let q = pattern.atoms().len();
    let n = target.atom_count();
    let mut out = BTreeSet::new();
    if q > n {
        return out;
    }
    let mut assign = vec![0usize; q];
    loop {
        let mut distinct = assign.clone();
        distinct.sort_unstable();
        distinct.dedup();
        if distinct.len() == q
            && (0..q).all(|i| pattern.atoms()[i].matches(target, assign[i]))
            && pattern.bonds().iter().all(|b| {
                target
                    .bond_between(assign[b.begin], assign[b.end])
                    .is_some_and(|k| b.query.matches(target.bond(k).order))
            })
        {
            out.insert(distinct);
        }
        // odometer increment
        let mut pos = 0;
        loop {
            if pos == q {
                return out;
            }
            assign[pos] += 1;
            if assign[pos] < n {
                break;
            }
            assign[pos] = 0;
            pos += 1;
        }
    }
}

/// Tanimoto from bit-by-bit counting, as an exact fraction.
pub fn popcount_tanimoto(a: &Fingerprint, b: &Fingerprint) -> (u32, u32) {
    let (mut both, mut either) = (0, 0);
    for bit in 0..a.width() {
        let (x, y) = (a.contains(bit), b.contains(bit));
        both += (x && y) as u32;
        either += (x || y) as u32;
    }
    (both, either)
}

/// The clipped token-level objective evaluated with plain loops.
pub fn scalar_objective(rewards: &[f64], ratios: &[Vec<f64>], eps_low: f64, eps_high: f64) -> f64 {
    let g = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / g;
    let var = rewards.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / g;
    let sd = var.sqrt();
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, rs) in ratios.iter().enumerate() {
        let adv = (rewards[i] - mean) / sd;
        for &r in rs {
            let clipped = if r < 1.0 - eps_low {
                1.0 - eps_low
            } else if r > 1.0 + eps_high {
                1.0 + eps_high
            } else {
                r
            };
            let a = r * adv;
            let b = clipped * adv;
            num += if a < b { a } else { b };
            den += 1.0;
        }
    }
    num / den
}

/// Catalog patterns plus a few generic shapes.
pub fn oracle_patterns() -> Vec<Pattern> {
    let mut v: Vec<Pattern> = Catalog::builtin().patterns().to_vec();
    for (k, src) in ["C~C~C", "[#6]~[#7]", "*~*~*~*", "C=C", "[#8]", "c:c", "C1CCC1", "[CX4]([#6])[#6]", "[N,O]"]
        .iter()
        .enumerate()
    {
        v.push(Pattern::parse(&format!("generic{k}"), src).expect("valid pattern"));
    }
    v
}
