//! Recursive-descent-free SMILES reader: a single left-to-right scan with an
//! explicit branch stack and a ring-closure table.

use std::collections::BTreeMap;

use super::element::Element;
use super::graph::{Atom, Bond, BondDirection, BondOrder, Chirality, MolGraph};
use super::stereo::{is_odd_permutation, Slot};
use super::SmilesError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BondSymbol {
    Single,
    Double,
    Triple,
    Aromatic,
    Up,
    Down,
}

impl BondSymbol {
    fn from_byte(c: u8) -> Option<BondSymbol> {
        Some(match c {
            b'-' => BondSymbol::Single,
            b'=' => BondSymbol::Double,
            b'#' => BondSymbol::Triple,
            b':' => BondSymbol::Aromatic,
            b'/' => BondSymbol::Up,
            b'\\' => BondSymbol::Down,
            _ => return None,
        })
    }

    fn order(self) -> BondOrder {
        match self {
            BondSymbol::Single | BondSymbol::Up | BondSymbol::Down => BondOrder::Single,
            BondSymbol::Double => BondOrder::Double,
            BondSymbol::Triple => BondOrder::Triple,
            BondSymbol::Aromatic => BondOrder::Aromatic,
        }
    }

    fn direction(self) -> Option<BondDirection> {
        match self {
            BondSymbol::Up => Some(BondDirection::Up),
            BondSymbol::Down => Some(BondDirection::Down),
            _ => None,
        }
    }
}

struct PendingBond {
    begin: usize,
    end: usize,
    symbol: Option<BondSymbol>,
}

struct OpenRing {
    atom: usize,
    symbol: Option<BondSymbol>,
    /// Index into the opening atom's neighbour-order list to fill on close.
    slot: usize,
    position: usize,
}

struct Parser<'a> {
    text: &'a [u8],
    pos: usize,
    atoms: Vec<Atom>,
    /// Neighbour order as written, per atom (SMILES order).
    order: Vec<Vec<Option<Slot>>>,
    has_prev: Vec<bool>,
    bonds: Vec<PendingBond>,
    rings: BTreeMap<u32, OpenRing>,
    branch_stack: Vec<(usize, usize)>,
    prev: Option<usize>,
    pending: Option<(BondSymbol, usize)>,
}

/// Parses a SMILES string into a [`MolGraph`].
pub fn parse_smiles(text: &str) -> Result<MolGraph, SmilesError> {
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return Err(SmilesError::Empty);
    }
    let mut parser = Parser {
        text: trimmed.as_bytes(),
        pos: 0,
        atoms: Vec::new(),
        order: Vec::new(),
        has_prev: Vec::new(),
        bonds: Vec::new(),
        rings: BTreeMap::new(),
        branch_stack: Vec::new(),
        prev: None,
        pending: None,
    };
    parser.run()?;
    parser.build()
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<u8> {
        self.text.get(self.pos).copied()
    }

    fn run(&mut self) -> Result<(), SmilesError> {
        while let Some(c) = self.peek() {
            match c {
                b'(' => {
                    let Some(prev) = self.prev else {
                        return Err(SmilesError::UnbalancedBranch { position: self.pos });
                    };
                    if self.pending.is_some() {
                        return Err(SmilesError::UnexpectedCharacter {
                            position: self.pos,
                            found: '(',
                        });
                    }
                    self.branch_stack.push((prev, self.pos));
                    self.pos += 1;
                    if self.peek() == Some(b')') {
                        return Err(SmilesError::UnbalancedBranch { position: self.pos });
                    }
                }
                b')' => {
                    let Some((atom, _)) = self.branch_stack.pop() else {
                        return Err(SmilesError::UnbalancedBranch { position: self.pos });
                    };
                    if let Some((_, p)) = self.pending {
                        return Err(SmilesError::DanglingBond { position: p });
                    }
                    self.prev = Some(atom);
                    self.pos += 1;
                }
                b'.' => {
                    if let Some((_, p)) = self.pending {
                        return Err(SmilesError::DanglingBond { position: p });
                    }
                    if !self.branch_stack.is_empty() {
                        return Err(SmilesError::UnbalancedBranch { position: self.pos });
                    }
                    self.prev = None;
                    self.pos += 1;
                }
                b'-' | b'=' | b'#' | b':' | b'/' | b'\\' => {
                    if self.pending.is_some() || self.prev.is_none() {
                        return Err(SmilesError::UnexpectedCharacter {
                            position: self.pos,
                            found: c as char,
                        });
                    }
                    self.pending = Some((BondSymbol::from_byte(c).unwrap(), self.pos));
                    self.pos += 1;
                }
                b'0'..=b'9' | b'%' => self.ring_bond()?,
                b'[' => {
                    let atom = self.bracket_atom()?;
                    self.add_atom(atom);
                }
                _ => {
                    let atom = self.organic_atom()?;
                    self.add_atom(atom);
                }
            }
        }
        if let Some((_, p)) = self.branch_stack.last() {
            return Err(SmilesError::UnbalancedBranch { position: *p });
        }
        if let Some((digit, ring)) = self.rings.iter().next() {
            return Err(SmilesError::UnclosedRing {
                digit: *digit,
                position: ring.position,
            });
        }
        if let Some((_, p)) = self.pending {
            return Err(SmilesError::DanglingBond { position: p });
        }
        Ok(())
    }

    fn add_atom(&mut self, atom: Atom) {
        let idx = self.atoms.len();
        let h = atom.explicit_h.unwrap_or(0);
        self.atoms.push(atom);
        self.order.push(Vec::new());
        self.has_prev.push(self.prev.is_some());
        if let Some(prev) = self.prev {
            let symbol = self.pending.take().map(|(s, _)| s);
            self.bonds.push(PendingBond {
                begin: prev,
                end: idx,
                symbol,
            });
            self.order[prev].push(Some(Slot::Atom(idx)));
            self.order[idx].push(Some(Slot::Atom(prev)));
        }
        if h > 0 {
            self.order[idx].push(Some(Slot::Virtual));
        }
        self.prev = Some(idx);
    }

    fn ring_bond(&mut self) -> Result<(), SmilesError> {
        let start = self.pos;
        let Some(atom) = self.prev else {
            return Err(SmilesError::UnexpectedCharacter {
                position: start,
                found: self.peek().unwrap() as char,
            });
        };
        let digit = if self.peek() == Some(b'%') {
            let d = self.text.get(self.pos + 1..self.pos + 3);
            match d {
                Some(d) if d.iter().all(u8::is_ascii_digit) => {
                    self.pos += 3;
                    u32::from(d[0] - b'0') * 10 + u32::from(d[1] - b'0')
                }
                _ => {
                    return Err(SmilesError::UnexpectedCharacter {
                        position: start,
                        found: '%',
                    })
                }
            }
        } else {
            self.pos += 1;
            u32::from(self.text[start] - b'0')
        };
        let symbol = self.pending.take().map(|(s, _)| s);
        match self.rings.remove(&digit) {
            Some(open) => {
                if open.atom == atom {
                    return Err(SmilesError::SelfBond { position: start });
                }
                if let (Some(a), Some(b)) = (open.symbol, symbol) {
                    if a.order() != b.order() {
                        return Err(SmilesError::ConflictingRingBond { digit, position: start });
                    }
                }
                // a mark written at the opening digit reads opener -> closer
                let (begin, end, symbol) = match open.symbol {
                    Some(a) => (open.atom, atom, Some(a)),
                    None => (atom, open.atom, symbol),
                };
                self.bonds.push(PendingBond { begin, end, symbol });
                self.order[open.atom][open.slot] = Some(Slot::Atom(atom));
                self.order[atom].push(Some(Slot::Atom(open.atom)));
            }
            None => {
                let slot = self.order[atom].len();
                self.order[atom].push(None);
                self.rings.insert(
                    digit,
                    OpenRing {
                        atom,
                        symbol,
                        slot,
                        position: start,
                    },
                );
            }
        }
        Ok(())
    }

    fn organic_atom(&mut self) -> Result<Atom, SmilesError> {
        let start = self.pos;
        let rest = &self.text[self.pos..];
        let (element, aromatic, len) = match rest {
            [b'C', b'l', ..] => (Element::CL, false, 2),
            [b'B', b'r', ..] => (Element::BR, false, 2),
            [b'B', ..] => (Element::B, false, 1),
            [b'C', ..] => (Element::C, false, 1),
            [b'N', ..] => (Element::N, false, 1),
            [b'O', ..] => (Element::O, false, 1),
            [b'P', ..] => (Element::P, false, 1),
            [b'S', ..] => (Element::S, false, 1),
            [b'F', ..] => (Element::F, false, 1),
            [b'I', ..] => (Element::I, false, 1),
            [b'b', ..] => (Element::B, true, 1),
            [b'c', ..] => (Element::C, true, 1),
            [b'n', ..] => (Element::N, true, 1),
            [b'o', ..] => (Element::O, true, 1),
            [b'p', ..] => (Element::P, true, 1),
            [b's', ..] => (Element::S, true, 1),
            [b'*', ..] => (Element::WILDCARD, false, 1),
            _ => {
                let ch = std::str::from_utf8(rest)
                    .ok()
                    .and_then(|s| s.chars().next())
                    .unwrap_or('?');
                return Err(SmilesError::UnknownSymbol {
                    position: start,
                    symbol: ch.to_string(),
                });
            }
        };
        self.pos += len;
        Ok(Atom {
            aromatic,
            ..Atom::new(element)
        })
    }

    fn bracket_atom(&mut self) -> Result<Atom, SmilesError> {
        let start = self.pos;
        let close = self.text[start..]
            .iter()
            .position(|&c| c == b']')
            .map(|p| start + p)
            .ok_or(SmilesError::MalformedBracketAtom {
                position: start,
                reason: "missing ']'",
            })?;
        let body = &self.text[start + 1..close];
        self.pos = close + 1;
        parse_bracket_body(body).map_err(|reason| match reason {
            BracketProblem::Symbol(symbol) => SmilesError::UnknownSymbol {
                position: start + 1,
                symbol,
            },
            BracketProblem::Malformed(reason) => SmilesError::MalformedBracketAtom {
                position: start,
                reason,
            },
        })
    }

    fn build(mut self) -> Result<MolGraph, SmilesError> {
        // lone pair of a three-coordinate centre sits where an H would
        for i in 0..self.atoms.len() {
            let atom = &self.atoms[i];
            if atom.chirality.is_some()
                && atom.explicit_h.unwrap_or(0) == 0
                && self.order[i].len() == 3
            {
                let at = usize::from(self.has_prev[i]);
                self.order[i].insert(at, Some(Slot::Virtual));
            }
        }
        let mut bonds = Vec::with_capacity(self.bonds.len());
        let mut implicit_aromatic = Vec::new();
        for pb in &self.bonds {
            let both_aromatic = self.atoms[pb.begin].aromatic && self.atoms[pb.end].aromatic;
            let order = match pb.symbol {
                Some(s) => s.order(),
                None if both_aromatic => {
                    implicit_aromatic.push(bonds.len());
                    BondOrder::Aromatic
                }
                None => BondOrder::Single,
            };
            if order == BondOrder::Aromatic && !both_aromatic {
                return Err(SmilesError::Graph(
                    super::GraphError::AromaticBondOnAliphaticAtom(pb.begin, pb.end),
                ));
            }
            bonds.push(Bond {
                begin: pb.begin,
                end: pb.end,
                order,
                direction: pb.symbol.and_then(BondSymbol::direction),
            });
        }
        // chirality as written -> chirality in reference order
        for i in 0..self.atoms.len() {
            let Some(tag) = self.atoms[i].chirality else {
                continue;
            };
            let slots: Vec<Slot> = self.order[i].iter().map(|s| s.expect("rings closed")).collect();
            let keys: Vec<i64> = slots.iter().map(|s| s.key(|a| a as i64)).collect();
            let valid = matches!(slots.len(), 4)
                && slots.iter().filter(|s| **s == Slot::Virtual).count() <= 1;
            self.atoms[i].chirality = if valid {
                Some(tag.flipped_if(is_odd_permutation(&keys)))
            } else {
                None
            };
        }
        // Implicit bonds between aromatic atoms are aromatic only inside rings.
        let probe = MolGraph::new(self.atoms.clone(), bonds.clone()).map_err(SmilesError::Graph)?;
        let mut changed = false;
        for k in implicit_aromatic {
            if !probe.is_ring_bond(k) {
                bonds[k].order = BondOrder::Single;
                changed = true;
            }
        }
        if changed {
            MolGraph::new(self.atoms, bonds).map_err(SmilesError::Graph)
        } else {
            Ok(probe)
        }
    }
}

enum BracketProblem {
    Symbol(String),
    Malformed(&'static str),
}

fn parse_bracket_body(body: &[u8]) -> Result<Atom, BracketProblem> {
    let mut i = 0;
    let number = |i: &mut usize| -> Option<u32> {
        let start = *i;
        while *i < body.len() && body[*i].is_ascii_digit() {
            *i += 1;
        }
        if *i == start {
            None
        } else {
            std::str::from_utf8(&body[start..*i]).ok()?.parse().ok()
        }
    };
    let isotope = match number(&mut i) {
        Some(n) if n <= u32::from(u16::MAX) => Some(n as u16),
        Some(_) => return Err(BracketProblem::Malformed("isotope out of range")),
        None => None,
    };
    if i >= body.len() {
        return Err(BracketProblem::Malformed("missing element symbol"));
    }
    // element symbol: '*', aromatic lowercase (se, as, or single), or
    // uppercase letter optionally followed by a lowercase letter
    let (element, aromatic) = if body[i] == b'*' {
        i += 1;
        (Element::WILDCARD, false)
    } else if body[i].is_ascii_lowercase() {
        let two = body.get(i..i + 2);
        if two == Some(b"se") {
            i += 2;
            (Element::SE, true)
        } else if two == Some(b"as") {
            i += 2;
            (Element::AS, true)
        } else {
            let e = match body[i] {
                b'b' => Element::B,
                b'c' => Element::C,
                b'n' => Element::N,
                b'o' => Element::O,
                b'p' => Element::P,
                b's' => Element::S,
                other => return Err(BracketProblem::Symbol((other as char).to_string())),
            };
            i += 1;
            (e, true)
        }
    } else if body[i].is_ascii_uppercase() {
        let two = (i + 1 < body.len() && body[i + 1].is_ascii_lowercase())
            .then(|| std::str::from_utf8(&body[i..i + 2]).unwrap())
            .and_then(Element::from_symbol);
        if let Some(e) = two {
            i += 2;
            (e, false)
        } else {
            let one = std::str::from_utf8(&body[i..i + 1]).unwrap();
            let e = Element::from_symbol(one).ok_or_else(|| BracketProblem::Symbol(one.into()))?;
            i += 1;
            (e, false)
        }
    } else {
        return Err(BracketProblem::Malformed("missing element symbol"));
    };
    let mut chirality = None;
    if body.get(i) == Some(&b'@') {
        i += 1;
        if body.get(i) == Some(&b'@') {
            i += 1;
            chirality = Some(Chirality::Clockwise);
        } else {
            chirality = Some(Chirality::CounterClockwise);
        }
    }
    let mut explicit_h = Some(0u8);
    if body.get(i) == Some(&b'H') {
        i += 1;
        let n = number(&mut i).unwrap_or(1);
        if n > 9 {
            return Err(BracketProblem::Malformed("hydrogen count out of range"));
        }
        explicit_h = Some(n as u8);
    }
    let mut charge: i32 = 0;
    if let Some(&sign @ (b'+' | b'-')) = body.get(i) {
        let unit = if sign == b'+' { 1 } else { -1 };
        i += 1;
        if let Some(n) = number(&mut i) {
            charge = unit * n as i32;
        } else {
            charge = unit;
            while body.get(i) == Some(&sign) {
                charge += unit;
                i += 1;
            }
        }
        if !(-15..=15).contains(&charge) {
            return Err(BracketProblem::Malformed("charge out of range"));
        }
    }
    let mut atom_class = None;
    if body.get(i) == Some(&b':') {
        i += 1;
        atom_class = Some(number(&mut i).ok_or(BracketProblem::Malformed("missing atom class"))?);
    }
    if i != body.len() {
        return Err(BracketProblem::Malformed("unexpected characters"));
    }
    if aromatic && !element.may_be_aromatic() {
        return Err(BracketProblem::Malformed("element cannot be aromatic"));
    }
    Ok(Atom {
        element,
        isotope,
        charge: charge as i8,
        explicit_h,
        aromatic,
        chirality,
        atom_class,
    })
}
