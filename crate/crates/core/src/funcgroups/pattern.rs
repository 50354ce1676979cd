//! Query patterns: SMILES-shaped templates with a few bracket primitives.
//!
//! Outside brackets an uppercase organic symbol matches aliphatic atoms of
//! that element, a lowercase one matches aromatic atoms and `*` matches any
//! atom. Inside brackets an atom is a comma-separated list of alternatives,
//! each a run of primitives that must all hold:
//!
//! | primitive | meaning |
//! |-----------|---------|
//! | `C`, `c`, `Cl` | element, aliphatic (upper) or aromatic (lower) |
//! | `#7` | element by atomic number, either aromaticity |
//! | `*` | any atom |
//! | `H2` | exactly two hydrogens (`H` alone means one) |
//! | `X3` | three connections counting hydrogens |
//! | `D2` | two explicit neighbours |
//! | `+`, `-2`, `++` | formal charge |
//!
//! Bonds are `-`, `=`, `#`, `:` and `~` (any order). An unwritten bond
//! matches single or aromatic bonds. There is no `.`, so every pattern is
//! connected.

use crate::molgraph::{BondOrder, Element, MolGraph};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PatternError {
    #[error("empty pattern")]
    Empty,
    #[error("unexpected '{found}' at {position}")]
    Unexpected { position: usize, found: char },
    #[error("unknown element at {position}")]
    UnknownElement { position: usize },
    #[error("unbalanced branch at {position}")]
    UnbalancedBranch { position: usize },
    #[error("ring closure {0} never closed")]
    UnclosedRing(u32),
    #[error("bond at {position} has no atom after it")]
    DanglingBond { position: usize },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AtomTerm {
    pub element: Option<Element>,
    /// `Some(true)` aromatic only, `Some(false)` aliphatic only.
    pub aromatic: Option<bool>,
    pub hydrogens: Option<u8>,
    pub connections: Option<u8>,
    pub degree: Option<u8>,
    pub charge: Option<i8>,
}

impl AtomTerm {
    fn matches(&self, mol: &MolGraph, i: usize) -> bool {
        let a = mol.atom(i);
        if let Some(e) = self.element {
            if a.element != e {
                return false;
            }
        }
        if let Some(ar) = self.aromatic {
            if a.aromatic != ar {
                return false;
            }
        }
        let explicit_h = mol
            .neighbors(i)
            .iter()
            .filter(|nb| mol.atom(nb.atom).element == Element::H)
            .count() as u8;
        let total_h = mol.hydrogen_count(i) + explicit_h;
        if self.hydrogens.is_some_and(|h| h != total_h) {
            return false;
        }
        let heavy_degree = mol.degree(i) as u8 - explicit_h;
        if self.connections.is_some_and(|x| x != heavy_degree + total_h) {
            return false;
        }
        if self.degree.is_some_and(|d| d as usize != mol.degree(i)) {
            return false;
        }
        self.charge.is_none_or(|c| c == a.charge)
    }
}

/// Alternatives joined by `,`; an atom matches when any one term holds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AtomQuery {
    pub terms: Vec<AtomTerm>,
}

impl AtomQuery {
    pub fn matches(&self, mol: &MolGraph, i: usize) -> bool {
        self.terms.iter().any(|t| t.matches(mol, i))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BondQuery {
    Order(BondOrder),
    SingleOrAromatic,
    Any,
}

impl BondQuery {
    pub fn matches(self, order: BondOrder) -> bool {
        match self {
            BondQuery::Order(o) => o == order,
            BondQuery::SingleOrAromatic => {
                matches!(order, BondOrder::Single | BondOrder::Aromatic)
            }
            BondQuery::Any => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QueryBond {
    pub begin: usize,
    pub end: usize,
    pub query: BondQuery,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pattern {
    pub name: String,
    pub source: String,
    atoms: Vec<AtomQuery>,
    bonds: Vec<QueryBond>,
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl Pattern {
    pub fn parse(name: &str, source: &str) -> Result<Pattern, PatternError> {
        let (atoms, bonds) = Reader::new(source).read()?;
        let mut adjacency = vec![Vec::new(); atoms.len()];
        for (k, b) in bonds.iter().enumerate() {
            adjacency[b.begin].push((b.end, k));
            adjacency[b.end].push((b.begin, k));
        }
        Ok(Pattern {
            name: name.to_string(),
            source: source.to_string(),
            atoms,
            bonds,
            adjacency,
        })
    }

    pub fn atoms(&self) -> &[AtomQuery] {
        &self.atoms
    }

    pub fn bonds(&self) -> &[QueryBond] {
        &self.bonds
    }

    pub fn neighbors(&self, q: usize) -> &[(usize, usize)] {
        &self.adjacency[q]
    }
}

fn is_ring_digit(c: u8) -> bool {
    c.is_ascii_digit() || c == b'%'
}

struct Reader<'a> {
    text: &'a [u8],
    pos: usize,
    atoms: Vec<AtomQuery>,
    bonds: Vec<QueryBond>,
}

impl<'a> Reader<'a> {
    fn new(source: &'a str) -> Reader<'a> {
        Reader {
            text: source.trim().as_bytes(),
            pos: 0,
            atoms: Vec::new(),
            bonds: Vec::new(),
        }
    }

    fn peek(&self) -> Option<u8> {
        self.text.get(self.pos).copied()
    }

    fn unexpected(&self) -> PatternError {
        PatternError::Unexpected {
            position: self.pos,
            found: self.peek().map(char::from).unwrap_or('\0'),
        }
    }

    fn number(&mut self) -> Option<u32> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        std::str::from_utf8(&self.text[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
    }

    fn read(mut self) -> Result<(Vec<AtomQuery>, Vec<QueryBond>), PatternError> {
        if self.text.is_empty() {
            return Err(PatternError::Empty);
        }
        let mut prev: Option<usize> = None;
        let mut branches: Vec<usize> = Vec::new();
        let mut pending: Option<(BondQuery, usize)> = None;
        let mut rings: std::collections::BTreeMap<u32, (usize, Option<BondQuery>)> =
            Default::default();
        while let Some(c) = self.peek() {
            match c {
                b'(' => {
                    let p = prev.ok_or(PatternError::UnbalancedBranch { position: self.pos })?;
                    branches.push(p);
                    self.pos += 1;
                }
                b')' => {
                    prev = Some(
                        branches
                            .pop()
                            .ok_or(PatternError::UnbalancedBranch { position: self.pos })?,
                    );
                    self.pos += 1;
                }
                b'-' | b'=' | b'#' | b':' | b'~' => {
                    let q = match c {
                        b'-' => BondQuery::Order(BondOrder::Single),
                        b'=' => BondQuery::Order(BondOrder::Double),
                        b'#' => BondQuery::Order(BondOrder::Triple),
                        b':' => BondQuery::Order(BondOrder::Aromatic),
                        _ => BondQuery::Any,
                    };
                    if pending.is_some() || prev.is_none() {
                        return Err(self.unexpected());
                    }
                    pending = Some((q, self.pos));
                    self.pos += 1;
                }
                c if is_ring_digit(c) => {
                    let Some(p) = prev else {
                        return Err(self.unexpected());
                    };
                    let digit = if c == b'%' {
                        self.pos += 1;
                        self.number().ok_or_else(|| self.unexpected())?
                    } else {
                        self.pos += 1;
                        u32::from(c - b'0')
                    };
                    let symbol = pending.take().map(|(q, _)| q);
                    match rings.remove(&digit) {
                        Some((open, open_symbol)) => {
                            let query = symbol.or(open_symbol).unwrap_or(BondQuery::SingleOrAromatic);
                            self.bonds.push(QueryBond {
                                begin: open,
                                end: p,
                                query,
                            });
                        }
                        None => {
                            rings.insert(digit, (p, symbol));
                        }
                    }
                }
                _ => {
                    let atom = self.atom()?;
                    let idx = self.atoms.len();
                    self.atoms.push(atom);
                    if let Some(p) = prev {
                        let query = pending
                            .take()
                            .map(|(q, _)| q)
                            .unwrap_or(BondQuery::SingleOrAromatic);
                        self.bonds.push(QueryBond {
                            begin: p,
                            end: idx,
                            query,
                        });
                    }
                    prev = Some(idx);
                }
            }
        }
        if let Some((_, position)) = pending {
            return Err(PatternError::DanglingBond { position });
        }
        if !branches.is_empty() {
            return Err(PatternError::UnbalancedBranch { position: self.pos });
        }
        if let Some((&digit, _)) = rings.iter().next() {
            return Err(PatternError::UnclosedRing(digit));
        }
        Ok((self.atoms, self.bonds))
    }

    fn atom(&mut self) -> Result<AtomQuery, PatternError> {
        if self.peek() == Some(b'[') {
            self.pos += 1;
            let mut terms = vec![self.term()?];
            while self.peek() == Some(b',') {
                self.pos += 1;
                terms.push(self.term()?);
            }
            if self.peek() != Some(b']') {
                return Err(self.unexpected());
            }
            self.pos += 1;
            return Ok(AtomQuery { terms });
        }
        if self.peek() == Some(b'*') {
            self.pos += 1;
            return Ok(AtomQuery {
                terms: vec![AtomTerm::default()],
            });
        }
        let (element, aromatic) = self.symbol().ok_or_else(|| self.unexpected())?;
        if !element.is_organic_subset() {
            return Err(PatternError::UnknownElement { position: self.pos });
        }
        Ok(AtomQuery {
            terms: vec![AtomTerm {
                element: Some(element),
                aromatic: Some(aromatic),
                ..AtomTerm::default()
            }],
        })
    }

    /// Element symbol at the cursor; lowercase means aromatic.
    fn symbol(&mut self) -> Option<(Element, bool)> {
        let rest = &self.text[self.pos..];
        let first = *rest.first()?;
        if first.is_ascii_uppercase() {
            if let Some(&second) = rest.get(1) {
                if second.is_ascii_lowercase() {
                    let two = std::str::from_utf8(&rest[..2]).ok()?;
                    if let Some(e) = Element::from_symbol(two) {
                        self.pos += 2;
                        return Some((e, false));
                    }
                }
            }
            let e = Element::from_symbol(std::str::from_utf8(&rest[..1]).ok()?)?;
            self.pos += 1;
            return Some((e, false));
        }
        if first.is_ascii_lowercase() {
            for len in [2, 1] {
                let Some(s) = rest.get(..len) else { continue };
                let s = std::str::from_utf8(s).ok()?;
                let upper = s[..1].to_ascii_uppercase() + &s[1..];
                if let Some(e) = Element::from_symbol(&upper) {
                    if e.may_be_aromatic() && (len == 1 || matches!(s, "se" | "as")) {
                        self.pos += len;
                        return Some((e, true));
                    }
                }
            }
        }
        None
    }

    fn term(&mut self) -> Result<AtomTerm, PatternError> {
        let mut t = AtomTerm::default();
        let start = self.pos;
        loop {
            match self.peek() {
                Some(b'*') => self.pos += 1,
                Some(b'#') => {
                    self.pos += 1;
                    let z = self.number().ok_or_else(|| self.unexpected())?;
                    let e = u8::try_from(z)
                        .ok()
                        .and_then(Element::from_atomic_number)
                        .ok_or(PatternError::UnknownElement { position: self.pos })?;
                    t.element = Some(e);
                }
                Some(b'H') if self.pos > start => {
                    self.pos += 1;
                    t.hydrogens = Some(self.number().unwrap_or(1) as u8);
                }
                Some(b'X') => {
                    self.pos += 1;
                    t.connections = Some(self.number().ok_or_else(|| self.unexpected())? as u8);
                }
                Some(b'D') => {
                    self.pos += 1;
                    t.degree = Some(self.number().ok_or_else(|| self.unexpected())? as u8);
                }
                Some(sign @ (b'+' | b'-')) => {
                    self.pos += 1;
                    let unit: i8 = if sign == b'+' { 1 } else { -1 };
                    let mut charge = unit;
                    if let Some(n) = self.number() {
                        charge = unit * n as i8;
                    } else {
                        while self.peek() == Some(sign) {
                            self.pos += 1;
                            charge += unit;
                        }
                    }
                    t.charge = Some(charge);
                }
                Some(b',' | b']') => break,
                Some(_) => {
                    let (e, aromatic) = self
                        .symbol()
                        .ok_or(PatternError::UnknownElement { position: self.pos })?;
                    t.element = Some(e);
                    t.aromatic = Some(aromatic);
                }
                None => return Err(self.unexpected()),
            }
        }
        if self.pos == start {
            return Err(self.unexpected());
        }
        Ok(t)
    }
}
