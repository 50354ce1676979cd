use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::graph::{BondDirection, BondOrder, Chirality, DoubleBondConfig, MolGraph};
use super::stereo::{is_odd_permutation, Slot};
use super::canonicalize;

/// Traversal order used when writing SMILES.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WriteMode {
    /// Canonical numbering; identical output for every spelling of a molecule.
    Canonical,
    /// Start atoms and branch order drawn from the seed.
    Random(u64),
}

/// Writes `mol` as a SMILES string.
pub fn write_smiles(mol: &MolGraph, mode: WriteMode) -> String {
    match mode {
        WriteMode::Canonical => {
            let canon = canonicalize(mol);
            let order: Vec<usize> = (0..canon.atom_count()).collect();
            Writer::new(&canon, order).write()
        }
        WriteMode::Random(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut order: Vec<usize> = (0..mol.atom_count()).collect();
            order.shuffle(&mut rng);
            Writer::new(mol, order).write()
        }
    }
}

#[derive(Clone, Copy)]
struct RingEnd {
    bond: usize,
    partner: usize,
    opening: bool,
}

struct Writer<'a> {
    mol: &'a MolGraph,
    rank: Vec<usize>,
    visited: Vec<bool>,
    ring_seen: Vec<bool>,
    children: Vec<Vec<(usize, usize)>>,
    rings: Vec<Vec<RingEnd>>,
    parent: Vec<Option<(usize, usize)>>,
    /// Written orientation of every bond: the atom on the left.
    left: Vec<usize>,
    marks: Vec<Option<BondDirection>>,
    digits: Vec<Option<u32>>,
    in_use: Vec<bool>,
    /// Atom visiting order, used to order double bonds for marking.
    position: Vec<usize>,
}

impl<'a> Writer<'a> {
    fn new(mol: &'a MolGraph, rank: Vec<usize>) -> Writer<'a> {
        let n = mol.atom_count();
        let m = mol.bonds().len();
        Writer {
            mol,
            rank,
            visited: vec![false; n],
            ring_seen: vec![false; m],
            children: vec![Vec::new(); n],
            rings: vec![Vec::new(); n],
            parent: vec![None; n],
            left: vec![usize::MAX; m],
            marks: vec![None; m],
            digits: vec![None; m],
            in_use: vec![false; 100],
            position: vec![usize::MAX; n],
        }
    }

    fn write(mut self) -> String {
        let mut roots: Vec<usize> = Vec::new();
        let mut by_rank: Vec<usize> = (0..self.mol.atom_count()).collect();
        by_rank.sort_by_key(|&i| self.rank[i]);
        let mut counter = 0;
        for &v in &by_rank {
            if !self.visited[v] {
                roots.push(v);
                self.discover(v, usize::MAX, &mut counter);
            }
        }
        self.assign_marks();
        let mut out = String::new();
        for (k, &root) in roots.iter().enumerate() {
            if k > 0 {
                out.push('.');
            }
            self.emit(root, &mut out);
        }
        out
    }

    fn sorted_neighbors(&self, v: usize) -> Vec<(usize, usize)> {
        let mut nbs: Vec<(usize, usize)> = self
            .mol
            .neighbors(v)
            .iter()
            .map(|nb| (nb.atom, nb.bond))
            .collect();
        nbs.sort_by_key(|&(a, _)| self.rank[a]);
        nbs
    }

    fn discover(&mut self, v: usize, parent_bond: usize, counter: &mut usize) {
        self.visited[v] = true;
        self.position[v] = *counter;
        *counter += 1;
        for (u, bond) in self.sorted_neighbors(v) {
            if bond == parent_bond {
                continue;
            }
            if self.visited[u] {
                if !self.ring_seen[bond] {
                    self.ring_seen[bond] = true;
                    self.left[bond] = u;
                    self.rings[u].push(RingEnd {
                        bond,
                        partner: v,
                        opening: true,
                    });
                    self.rings[v].push(RingEnd {
                        bond,
                        partner: u,
                        opening: false,
                    });
                }
            } else {
                self.ring_seen[bond] = true;
                self.left[bond] = v;
                self.children[v].push((u, bond));
                self.parent[u] = Some((v, bond));
                self.discover(u, bond, counter);
            }
        }
    }

    /// Side (+1 above, -1 below) of substituent `x` implied by the mark on
    /// its bond to the double-bond end.
    fn side(&self, x: usize, bond: usize, dir: BondDirection) -> i8 {
        let x_left = self.left[bond] == x;
        if x_left == (dir == BondDirection::Up) {
            -1
        } else {
            1
        }
    }

    fn mark_for_side(&self, x: usize, bond: usize, side: i8) -> BondDirection {
        let x_left = self.left[bond] == x;
        if x_left == (side < 0) {
            BondDirection::Up
        } else {
            BondDirection::Down
        }
    }

    fn mark_candidates(&self, end: usize, partner: usize) -> Vec<(usize, usize)> {
        let mol = self.mol;
        let mut cands: Vec<(usize, usize)> = mol
            .neighbors(end)
            .iter()
            .filter(|nb| nb.atom != partner && mol.bond(nb.bond).order == BondOrder::Single)
            .map(|nb| (nb.atom, nb.bond))
            .collect();
        let near_double = |x: usize| {
            mol.neighbors(x)
                .iter()
                .any(|nb| mol.bond(nb.bond).order == BondOrder::Double)
        };
        cands.sort_by_key(|&(x, bond)| {
            (
                self.marks[bond].is_none(),
                near_double(x),
                self.position[x],
            )
        });
        cands
    }

    fn assign_marks(&mut self) {
        let mol = self.mol;
        let mut stereo: Vec<(usize, DoubleBondConfig)> = mol
            .double_bond_stereo()
            .iter()
            .map(|s| (s.bond, s.config))
            .collect();
        stereo.sort_by_key(|&(k, _)| {
            let b = mol.bond(k);
            self.position[b.begin].min(self.position[b.end])
        });
        for (k, config) in stereo {
            let b = mol.bond(k);
            let (first, second) = if self.position[b.begin] <= self.position[b.end] {
                (b.begin, b.end)
            } else {
                (b.end, b.begin)
            };
            let ref_first = mol.substituents(first, second)[0];
            let ref_second = mol.substituents(second, first)[0];
            let cands_a = self.mark_candidates(first, second);
            let cands_b = self.mark_candidates(second, first);
            let (Some(&(xa, ba)), Some(_)) = (cands_a.first(), cands_b.first()) else {
                continue;
            };
            let side_a = match self.marks[ba] {
                Some(dir) => self.side(xa, ba, dir),
                None => {
                    self.marks[ba] = Some(BondDirection::Up);
                    self.side(xa, ba, BondDirection::Up)
                }
            };
            let ref_side_a = if xa == ref_first { side_a } else { -side_a };
            let want_ref_b = match config {
                DoubleBondConfig::Cis => ref_side_a,
                DoubleBondConfig::Trans => -ref_side_a,
            };
            for &(xb, bb) in &cands_b {
                let want = if xb == ref_second { want_ref_b } else { -want_ref_b };
                match self.marks[bb] {
                    Some(dir) if self.side(xb, bb, dir) == want => break,
                    Some(_) => continue,
                    None => {
                        self.marks[bb] = Some(self.mark_for_side(xb, bb, want));
                        break;
                    }
                }
            }
        }
    }

    fn bond_text(&self, bond: usize) -> String {
        let b = self.mol.bond(bond);
        let both_aromatic = self.mol.atom(b.begin).aromatic && self.mol.atom(b.end).aromatic;
        match b.order {
            BondOrder::Single => match self.marks[bond] {
                Some(BondDirection::Up) => "/".into(),
                Some(BondDirection::Down) => "\\".into(),
                None if both_aromatic => "-".into(),
                None => String::new(),
            },
            BondOrder::Double => "=".into(),
            BondOrder::Triple => "#".into(),
            BondOrder::Aromatic if self.mol.is_ring_bond(bond) => String::new(),
            BondOrder::Aromatic => ":".into(),
        }
    }

    fn output_chirality(&self, v: usize) -> Option<Chirality> {
        let tag = self.mol.atom(v).chirality?;
        let reference = self.mol.stereo_slots(v)?;
        let mut order: Vec<Slot> = Vec::with_capacity(4);
        if let Some((p, _)) = self.parent[v] {
            order.push(Slot::Atom(p));
        }
        if reference.contains(&Slot::Virtual) {
            order.push(Slot::Virtual);
        }
        order.extend(self.rings[v].iter().map(|r| Slot::Atom(r.partner)));
        order.extend(self.children[v].iter().map(|&(c, _)| Slot::Atom(c)));
        let keys: Vec<i64> = order.iter().map(|s| s.key(|a| a as i64)).collect();
        Some(tag.flipped_if(is_odd_permutation(&keys)))
    }

    fn atom_text(&self, v: usize) -> String {
        let atom = self.mol.atom(v);
        let chirality = self.output_chirality(v);
        let symbol = if atom.aromatic {
            atom.element.symbol().to_ascii_lowercase()
        } else {
            atom.element.symbol().to_string()
        };
        if chirality.is_none() && atom.explicit_h.is_none() {
            return symbol;
        }
        let mut s = String::from("[");
        if let Some(iso) = atom.isotope {
            let _ = write!(s, "{iso}");
        }
        s.push_str(&symbol);
        if let Some(c) = chirality {
            s.push_str(c.symbol());
        }
        match self.mol.hydrogen_count(v) {
            0 => {}
            1 => s.push('H'),
            h => {
                let _ = write!(s, "H{h}");
            }
        }
        match atom.charge {
            0 => {}
            1 => s.push('+'),
            -1 => s.push('-'),
            c if c > 0 => {
                let _ = write!(s, "+{c}");
            }
            c => {
                let _ = write!(s, "-{}", -c);
            }
        }
        if let Some(class) = atom.atom_class {
            let _ = write!(s, ":{class}");
        }
        s.push(']');
        s
    }

    fn allocate_digit(&mut self) -> u32 {
        let d = (1..100).find(|&d| !self.in_use[d]).expect("fewer than 100 open rings");
        self.in_use[d] = true;
        d as u32
    }

    fn emit(&mut self, v: usize, out: &mut String) {
        out.push_str(&self.atom_text(v));
        let mut release = Vec::new();
        for ring in self.rings[v].clone() {
            let digit = if ring.opening {
                out.push_str(&self.bond_text(ring.bond));
                let d = self.allocate_digit();
                self.digits[ring.bond] = Some(d);
                d
            } else {
                let d = self.digits[ring.bond].expect("ring opened before closing");
                release.push(d);
                d
            };
            if digit < 10 {
                let _ = write!(out, "{digit}");
            } else {
                let _ = write!(out, "%{digit}");
            }
        }
        for d in release {
            self.in_use[d as usize] = false;
        }
        let children = self.children[v].clone();
        let last = children.len().saturating_sub(1);
        for (i, (child, bond)) in children.into_iter().enumerate() {
            let text = self.bond_text(bond);
            if i < last {
                out.push('(');
                out.push_str(&text);
                self.emit(child, out);
                out.push(')');
            } else {
                out.push_str(&text);
                self.emit(child, out);
            }
        }
    }
}
