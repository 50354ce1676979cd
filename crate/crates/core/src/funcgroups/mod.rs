//! Functional-group detection by substructure matching against a named
//! pattern catalog.

mod matcher;
mod pattern;

use std::collections::BTreeSet;
use std::path::Path;

pub use matcher::{has_match, match_substructure};
pub use pattern::{AtomQuery, AtomTerm, BondQuery, Pattern, PatternError, QueryBond};

use crate::molgraph::MolGraph;

/// Built-in catalog in the line format accepted by [`Catalog::parse`].
pub const BUILTIN_CATALOG: &str = "\
# name\tpattern
hydroxyl\t[CX4,c][OX2H1]
carbonyl\t[#6]=O
aldehyde\t[CX3H1](=O)[#6]
ketone\t[#6][CX3](=O)[#6]
carboxylic_acid\t[CX3](=O)[OX2H1]
ester\t[#6][CX3](=O)[OX2][#6]
amide\t[CX3](=O)[NX3]
imide\t[CX3](=O)[NX3][CX3](=O)
amine_primary\t[NX3H2][CX4,c]
amine_secondary\t[CX4,c][NX3H1][CX4,c]
amine_tertiary\t[CX4,c][NX3H0]([CX4,c])[CX4,c]
ether\t[CX4,c][OX2][CX4,c]
alkene\t[CX3]=[CX3]
alkyne\tC#C
halide\t[#6][F,Cl,Br,I]
nitrile\t[NX1]#[CX2]
nitro\t[N+](=O)[O-]
arene\tc1ccccc1
thiol\t[#6][SX2H1]
sulfone\t[#6][SX4](=O)(=O)[#6]
";

#[derive(Debug, thiserror::Error)]
pub enum CatalogError {
    #[error("catalog has no patterns")]
    Empty,
    #[error("line {line}: expected name<TAB>pattern")]
    MissingTab { line: usize },
    #[error("line {line}: duplicate group name '{name}'")]
    DuplicateName { line: usize, name: String },
    #[error("line {line}: {source}")]
    Pattern {
        line: usize,
        #[source]
        source: PatternError,
    },
    #[error("reading catalog: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Catalog {
    patterns: Vec<Pattern>,
}

impl Catalog {
    pub fn builtin() -> Catalog {
        Catalog::parse(BUILTIN_CATALOG).expect("built-in catalog is valid")
    }

    /// Reads `name<TAB>pattern` lines; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Catalog, CatalogError> {
        let mut patterns: Vec<Pattern> = Vec::new();
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (name, source) = raw
                .split_once('\t')
                .ok_or(CatalogError::MissingTab { line })?;
            let name = name.trim();
            if patterns.iter().any(|p| p.name == name) {
                return Err(CatalogError::DuplicateName {
                    line,
                    name: name.to_string(),
                });
            }
            let pattern = Pattern::parse(name, source.trim())
                .map_err(|source| CatalogError::Pattern { line, source })?;
            patterns.push(pattern);
        }
        if patterns.is_empty() {
            return Err(CatalogError::Empty);
        }
        Ok(Catalog { patterns })
    }

    pub fn from_file(path: &Path) -> Result<Catalog, CatalogError> {
        Catalog::parse(&std::fs::read_to_string(path)?)
    }

    pub fn patterns(&self) -> &[Pattern] {
        &self.patterns
    }

    pub fn get(&self, name: &str) -> Option<&Pattern> {
        self.patterns.iter().find(|p| p.name == name)
    }
}

impl Default for Catalog {
    fn default() -> Self {
        Catalog::builtin()
    }
}

/// Names of every catalog group present in `mol`, sorted and deduplicated.
pub fn detect_functional_groups(mol: &MolGraph, catalog: &Catalog) -> Vec<String> {
    catalog
        .patterns()
        .iter()
        .filter(|p| has_match(mol, p))
        .map(|p| p.name.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}
