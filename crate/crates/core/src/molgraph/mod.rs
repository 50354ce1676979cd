//! Molecular graphs: SMILES and reaction SMILES parsing, canonical
//! numbering and SMILES output.
//!
//! Aromaticity is not perceived from first principles. Every constructed
//! graph goes through a normalization pass that marks 6-rings of C/N/O/S
//! with alternating single and double bonds, and 5-rings with one lone-pair
//! donor (N, O or S) plus two alternating double bonds, as aromatic. Rings of
//! other sizes, pyridone-like rings with exocyclic double bonds and systems
//! that only become aromatic through fusion with a non-qualifying ring keep
//! their written form.

mod canon;
mod element;
mod graph;
mod parser;
mod reaction;
mod stereo;
mod writer;

pub use element::{implicit_hydrogens, Element};
pub use graph::{
    Atom, Bond, BondDirection, BondOrder, Chirality, DoubleBondConfig, DoubleBondStereo, MolGraph,
    Neighbor,
};
pub use parser::parse_smiles;
pub use reaction::{
    parse_group, parse_reaction, reactions_equal, split_reaction, ReactionError, ReactionGraph,
    Role,
};
pub use stereo::Slot;
pub use writer::{write_smiles, WriteMode};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GraphError {
    #[error("atom {0}: charge outside -15..=15")]
    ChargeOutOfRange(usize),
    #[error("atom {0}: element cannot be aromatic")]
    NonAromaticElement(usize),
    #[error("bond endpoint {0} is not an atom")]
    AtomOutOfRange(usize),
    #[error("stereo refers to missing bond {0}")]
    BondOutOfRange(usize),
    #[error("atom {0} is bonded to itself")]
    SelfBond(usize),
    #[error("more than one bond between atoms {0} and {1}")]
    DuplicateBond(usize, usize),
    #[error("aromatic bond {0}-{1} touches a non-aromatic atom")]
    AromaticBondOnAliphaticAtom(usize, usize),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SmilesError {
    #[error("empty SMILES")]
    Empty,
    #[error("unbalanced branch at {position}")]
    UnbalancedBranch { position: usize },
    #[error("unexpected '{found}' at {position}")]
    UnexpectedCharacter { position: usize, found: char },
    #[error("bond symbol at {position} is not followed by an atom")]
    DanglingBond { position: usize },
    #[error("ring closure {digit} opened at {position} is never closed")]
    UnclosedRing { digit: u32, position: usize },
    #[error("ring closure at {position} bonds an atom to itself")]
    SelfBond { position: usize },
    #[error("ring closure {digit} at {position} has conflicting bond symbols")]
    ConflictingRingBond { digit: u32, position: usize },
    #[error("unknown element symbol '{symbol}' at {position}")]
    UnknownSymbol { position: usize, symbol: String },
    #[error("malformed bracket atom at {position}: {reason}")]
    MalformedBracketAtom {
        position: usize,
        reason: &'static str,
    },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Renumbers atoms by canonical rank. Stereo tags that cannot be told apart
/// from their mirror image are dropped first.
pub fn canonicalize(mol: &MolGraph) -> MolGraph {
    let (clean, ranks) = canon::sanitize(mol);
    let ranks = canon::canonical_ranks(&clean, ranks);
    let order_of: Vec<usize> = ranks.iter().map(|&r| r as usize).collect();
    clean.permuted(&order_of)
}

/// Structural identity, stereo tags included.
pub fn molecules_equal(a: &MolGraph, b: &MolGraph) -> bool {
    a.atom_count() == b.atom_count()
        && a.bonds().len() == b.bonds().len()
        && canonicalize(a) == canonicalize(b)
}

/// Canonical SMILES of a SMILES string.
pub fn canonical_smiles(text: &str) -> Result<String, SmilesError> {
    Ok(write_smiles(&parse_smiles(text)?, WriteMode::Canonical))
}
