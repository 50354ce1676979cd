use std::fmt;

use super::{parse_smiles, write_smiles, MolGraph, SmilesError, WriteMode};

/// Position of a molecule inside a reaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Role {
    Reactant,
    Agent,
    Product,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Reactant => "reactant",
            Role::Agent => "agent",
            Role::Product => "product",
        })
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ReactionError {
    #[error("reaction needs exactly two '>' separators, found {0}")]
    WrongSeparatorCount(usize),
    #[error("reaction has no reactants")]
    MissingReactants,
    #[error("reaction has no products")]
    MissingProducts,
    #[error("{role} {index}: {source}")]
    Component {
        role: Role,
        index: usize,
        #[source]
        source: SmilesError,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReactionGraph {
    pub reactants: Vec<MolGraph>,
    pub agents: Vec<MolGraph>,
    pub products: Vec<MolGraph>,
}

impl ReactionGraph {
    pub fn role(&self, role: Role) -> &[MolGraph] {
        match role {
            Role::Reactant => &self.reactants,
            Role::Agent => &self.agents,
            Role::Product => &self.products,
        }
    }

    /// Canonical SMILES of every member, sorted within each role.
    pub fn canonical_members(&self) -> [Vec<String>; 3] {
        let canon = |ms: &[MolGraph]| {
            let mut v: Vec<String> = ms
                .iter()
                .map(|m| write_smiles(m, WriteMode::Canonical))
                .collect();
            v.sort();
            v
        };
        [
            canon(&self.reactants),
            canon(&self.agents),
            canon(&self.products),
        ]
    }

    /// Canonical reaction SMILES with members sorted inside each role.
    pub fn to_canonical_smiles(&self) -> String {
        let [r, a, p] = self.canonical_members();
        format!("{}>{}>{}", r.join("."), a.join("."), p.join("."))
    }
}

/// Splits `text` into its three '>'-separated groups without parsing them.
pub fn split_reaction(text: &str) -> Result<[&str; 3], ReactionError> {
    let parts: Vec<&str> = text.trim().split('>').collect();
    match parts.as_slice() {
        [r, a, p] => Ok([r.trim(), a.trim(), p.trim()]),
        _ => Err(ReactionError::WrongSeparatorCount(parts.len() - 1)),
    }
}

/// Parses the dot-separated members of one reaction group.
pub fn parse_group(group: &str, role: Role) -> Result<Vec<MolGraph>, ReactionError> {
    if group.is_empty() {
        return Ok(Vec::new());
    }
    group
        .split('.')
        .enumerate()
        .map(|(index, member)| {
            parse_smiles(member).map_err(|source| ReactionError::Component {
                role,
                index,
                source,
            })
        })
        .collect()
}

pub fn parse_reaction(text: &str) -> Result<ReactionGraph, ReactionError> {
    let [r, a, p] = split_reaction(text)?;
    let reactants = parse_group(r, Role::Reactant)?;
    let agents = parse_group(a, Role::Agent)?;
    let products = parse_group(p, Role::Product)?;
    if reactants.is_empty() {
        return Err(ReactionError::MissingReactants);
    }
    if products.is_empty() {
        return Err(ReactionError::MissingProducts);
    }
    Ok(ReactionGraph {
        reactants,
        agents,
        products,
    })
}

/// True when both reactions have the same canonical members in every role.
pub fn reactions_equal(a: &ReactionGraph, b: &ReactionGraph) -> bool {
    a.canonical_members() == b.canonical_members()
}
