//! Similarity between two structures, each either a molecule (possibly with
//! several dot-separated fragments) or a reaction.
//!
//! Molecules get one fingerprint over the whole graph. Reactions are compared
//! role by role: members are paired greedily by best Tanimoto, and the score
//! is the sum of paired similarities divided by the number of slots, where a
//! role contributes `max(members on either side)` slots. A reaction pair
//! scores exactly 1.0 only when every role holds the same canonical members.

use super::{morgan_fingerprint, overlap, Fingerprint, FingerprintParams};
use crate::molgraph::{
    parse_reaction, parse_smiles, MolGraph, ReactionError, ReactionGraph, Role, SmilesError,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StructureError {
    #[error(transparent)]
    Smiles(#[from] SmilesError),
    #[error(transparent)]
    Reaction(#[from] ReactionError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Structure {
    Molecule(MolGraph),
    Reaction(ReactionGraph),
}

impl Structure {
    /// Reaction when the text contains '>', molecule otherwise.
    pub fn parse(text: &str) -> Result<Structure, StructureError> {
        let text = text.trim();
        if text.contains('>') {
            Ok(Structure::Reaction(parse_reaction(text)?))
        } else {
            Ok(Structure::Molecule(parse_smiles(text)?))
        }
    }

    pub fn heavy_atom_count(&self) -> usize {
        match self {
            Structure::Molecule(m) => m.heavy_atom_count(),
            Structure::Reaction(r) => [Role::Reactant, Role::Agent, Role::Product]
                .iter()
                .flat_map(|&role| r.role(role))
                .map(MolGraph::heavy_atom_count)
                .sum(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Similarity {
    pub value: f64,
    /// Decided on integer bit counts (molecules) or canonical members
    /// (reactions), never on a float comparison.
    pub exact: bool,
}

impl Similarity {
    pub const ZERO: Similarity = Similarity {
        value: 0.0,
        exact: false,
    };
}

fn fingerprints(ms: &[MolGraph], params: FingerprintParams) -> Vec<Fingerprint> {
    ms.iter().map(|m| morgan_fingerprint(m, params)).collect()
}

/// Greedy best-first pairing; returns the sum of paired similarities.
fn greedy_pairing(left: &[Fingerprint], right: &[Fingerprint]) -> f64 {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (i, a) in left.iter().enumerate() {
        for (j, b) in right.iter().enumerate() {
            let s = overlap(a, b).expect("same params").similarity();
            pairs.push((s, i, j));
        }
    }
    pairs.sort_by(|x, y| y.0.total_cmp(&x.0).then((x.1, x.2).cmp(&(y.1, y.2))));
    let mut used_left = vec![false; left.len()];
    let mut used_right = vec![false; right.len()];
    let mut total = 0.0;
    for (s, i, j) in pairs {
        if !used_left[i] && !used_right[j] {
            used_left[i] = true;
            used_right[j] = true;
            total += s;
        }
    }
    total
}

fn reaction_similarity(
    pred: &ReactionGraph,
    truth: &ReactionGraph,
    params: FingerprintParams,
) -> Similarity {
    let mut total = 0.0;
    let mut slots = 0usize;
    for role in [Role::Reactant, Role::Agent, Role::Product] {
        let (p, t) = (pred.role(role), truth.role(role));
        slots += p.len().max(t.len());
        total += greedy_pairing(&fingerprints(p, params), &fingerprints(t, params));
    }
    let exact = pred.canonical_members() == truth.canonical_members();
    let value = if exact {
        1.0
    } else if slots == 0 {
        0.0
    } else {
        (total / slots as f64).min(1.0 - f64::EPSILON)
    };
    Similarity { value, exact }
}

/// Similarity of `pred` to `truth`; a molecule never matches a reaction.
pub fn structure_similarity(
    pred: &Structure,
    truth: &Structure,
    params: FingerprintParams,
) -> Similarity {
    match (pred, truth) {
        (Structure::Molecule(a), Structure::Molecule(b)) => {
            let o = overlap(&morgan_fingerprint(a, params), &morgan_fingerprint(b, params))
                .expect("same params");
            Similarity {
                value: o.similarity(),
                exact: o.is_identical(),
            }
        }
        (Structure::Reaction(a), Structure::Reaction(b)) => reaction_similarity(a, b, params),
        _ => Similarity::ZERO,
    }
}
