use std::collections::HashSet;

use super::element::{implicit_hydrogens, Element};
use super::stereo::{is_odd_permutation, Slot};
use super::GraphError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Chirality {
    /// `@`
    CounterClockwise,
    /// `@@`
    Clockwise,
}

impl Chirality {
    pub fn flipped(self) -> Chirality {
        match self {
            Chirality::CounterClockwise => Chirality::Clockwise,
            Chirality::Clockwise => Chirality::CounterClockwise,
        }
    }

    pub(crate) fn flipped_if(self, flip: bool) -> Chirality {
        if flip {
            self.flipped()
        } else {
            self
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Chirality::CounterClockwise => "@",
            Chirality::Clockwise => "@@",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Atom {
    pub element: Element,
    pub isotope: Option<u16>,
    pub charge: i8,
    /// Hydrogen count written in brackets. `None` means the count follows
    /// the organic-subset valence table.
    pub explicit_h: Option<u8>,
    pub aromatic: bool,
    /// Tetrahedral tag relative to the reference neighbour order, see
    /// [`stereo`](super::stereo).
    pub chirality: Option<Chirality>,
    pub atom_class: Option<u32>,
}

impl Atom {
    pub fn new(element: Element) -> Atom {
        Atom {
            element,
            isotope: None,
            charge: 0,
            explicit_h: None,
            aromatic: false,
            chirality: None,
            atom_class: None,
        }
    }

    pub fn aromatic(element: Element) -> Atom {
        Atom {
            aromatic: true,
            ..Atom::new(element)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    /// Contribution to an atom's valence sum (aromatic counts as one).
    pub fn valence(self) -> u32 {
        match self {
            BondOrder::Single | BondOrder::Aromatic => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            BondOrder::Single => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
            BondOrder::Aromatic => 4,
        }
    }
}

/// Directional single-bond mark: `/` is [`Up`](BondDirection::Up), `\` is
/// [`Down`](BondDirection::Down), read from `begin` to `end`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BondDirection {
    Up,
    Down,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Bond {
    pub begin: usize,
    pub end: usize,
    pub order: BondOrder,
    pub direction: Option<BondDirection>,
}

impl Bond {
    pub fn new(begin: usize, end: usize, order: BondOrder) -> Bond {
        Bond {
            begin,
            end,
            order,
            direction: None,
        }
    }

    pub fn other(&self, atom: usize) -> usize {
        if self.begin == atom {
            self.end
        } else {
            self.begin
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DoubleBondConfig {
    Cis,
    Trans,
}

impl DoubleBondConfig {
    pub(crate) fn flipped_if(self, flip: bool) -> DoubleBondConfig {
        match (self, flip) {
            (c, false) => c,
            (DoubleBondConfig::Cis, true) => DoubleBondConfig::Trans,
            (DoubleBondConfig::Trans, true) => DoubleBondConfig::Cis,
        }
    }
}

/// Geometry of one double bond, relative to the lowest-index substituent on
/// each end.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DoubleBondStereo {
    pub bond: usize,
    pub config: DoubleBondConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Neighbor {
    pub atom: usize,
    pub bond: usize,
}

/// An attributed molecular graph. Immutable once built; all derived data
/// (adjacency, ring flags, hydrogen counts) is computed on construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MolGraph {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    double_bond_stereo: Vec<DoubleBondStereo>,
    adjacency: Vec<Vec<Neighbor>>,
    ring_atoms: Vec<bool>,
    ring_bonds: Vec<bool>,
    hydrogens: Vec<u8>,
}

impl MolGraph {
    /// Builds a graph, deriving double-bond geometry from directional bond
    /// marks and applying the aromaticity normalization pass.
    pub fn new(atoms: Vec<Atom>, bonds: Vec<Bond>) -> Result<MolGraph, GraphError> {
        let mut graph = MolGraph::skeleton(atoms, bonds)?;
        graph.double_bond_stereo = graph.stereo_from_directions();
        graph.finish();
        Ok(graph)
    }

    /// Builds a graph with explicitly supplied double-bond geometry. Bond
    /// direction marks are ignored.
    pub fn with_stereo(
        atoms: Vec<Atom>,
        bonds: Vec<Bond>,
        stereo: Vec<DoubleBondStereo>,
    ) -> Result<MolGraph, GraphError> {
        let mut graph = MolGraph::skeleton(atoms, bonds)?;
        for s in &stereo {
            if s.bond >= graph.bonds.len() {
                return Err(GraphError::BondOutOfRange(s.bond));
            }
        }
        graph.double_bond_stereo = stereo;
        graph.finish();
        Ok(graph)
    }

    fn skeleton(atoms: Vec<Atom>, bonds: Vec<Bond>) -> Result<MolGraph, GraphError> {
        let n = atoms.len();
        let mut seen = HashSet::new();
        let mut adjacency = vec![Vec::new(); n];
        for (i, atom) in atoms.iter().enumerate() {
            if !(-15..=15).contains(&atom.charge) {
                return Err(GraphError::ChargeOutOfRange(i));
            }
            if atom.aromatic && !atom.element.may_be_aromatic() {
                return Err(GraphError::NonAromaticElement(i));
            }
        }
        for (k, bond) in bonds.iter().enumerate() {
            if bond.begin >= n || bond.end >= n {
                return Err(GraphError::AtomOutOfRange(bond.begin.max(bond.end)));
            }
            if bond.begin == bond.end {
                return Err(GraphError::SelfBond(bond.begin));
            }
            let key = (bond.begin.min(bond.end), bond.begin.max(bond.end));
            if !seen.insert(key) {
                return Err(GraphError::DuplicateBond(key.0, key.1));
            }
            adjacency[bond.begin].push(Neighbor {
                atom: bond.end,
                bond: k,
            });
            adjacency[bond.end].push(Neighbor {
                atom: bond.begin,
                bond: k,
            });
        }
        for list in &mut adjacency {
            list.sort_by_key(|nb| nb.atom);
        }
        let mut graph = MolGraph {
            atoms,
            bonds,
            double_bond_stereo: Vec::new(),
            adjacency,
            ring_atoms: vec![false; n],
            ring_bonds: Vec::new(),
            hydrogens: vec![0; n],
        };
        graph.ring_bonds = graph.find_ring_bonds();
        graph.ring_atoms = (0..n)
            .map(|i| graph.adjacency[i].iter().any(|nb| graph.ring_bonds[nb.bond]))
            .collect();
        graph.hydrogens = (0..n).map(|i| graph.compute_hydrogens(i)).collect();
        for bond in &graph.bonds {
            if bond.order == BondOrder::Aromatic
                && !(graph.atoms[bond.begin].aromatic && graph.atoms[bond.end].aromatic)
            {
                return Err(GraphError::AromaticBondOnAliphaticAtom(bond.begin, bond.end));
            }
        }
        Ok(graph)
    }

    /// Aromaticity normalization followed by stereo sanitation. Hydrogen
    /// counts were fixed on the input bond orders before this runs.
    fn finish(&mut self) {
        self.normalize_aromaticity();
        self.normalize_hydrogen_spelling();
        for i in 0..self.atoms.len() {
            if self.atoms[i].chirality.is_some() && self.stereo_slots(i).is_none() {
                self.atoms[i].chirality = None;
            }
        }
        let mut kept: Vec<DoubleBondStereo> = Vec::new();
        for s in std::mem::take(&mut self.double_bond_stereo) {
            let b = &self.bonds[s.bond];
            if b.order == BondOrder::Double
                && !kept.iter().any(|k| k.bond == s.bond)
                && (1..=2).contains(&self.substituents(b.begin, b.end).len())
                && (1..=2).contains(&self.substituents(b.end, b.begin).len())
            {
                kept.push(s);
            }
        }
        kept.sort_by_key(|s| s.bond);
        self.double_bond_stereo = kept;
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn atom(&self, i: usize) -> &Atom {
        &self.atoms[i]
    }

    pub fn bond(&self, k: usize) -> &Bond {
        &self.bonds[k]
    }

    pub fn double_bond_stereo(&self) -> &[DoubleBondStereo] {
        &self.double_bond_stereo
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn heavy_atom_count(&self) -> usize {
        self.atoms.iter().filter(|a| a.element.is_heavy()).count()
    }

    pub fn neighbors(&self, i: usize) -> &[Neighbor] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn is_ring_atom(&self, i: usize) -> bool {
        self.ring_atoms[i]
    }

    pub fn is_ring_bond(&self, k: usize) -> bool {
        self.ring_bonds[k]
    }

    pub fn ring_membership(&self) -> &[bool] {
        &self.ring_atoms
    }

    /// Total hydrogens (implicit plus bracket count) on atom `i`. Explicit
    /// hydrogen atoms in the graph are not included.
    pub fn hydrogen_count(&self, i: usize) -> u8 {
        self.hydrogens[i]
    }

    /// Sum of implicit hydrogens over all atoms.
    pub fn total_hydrogens(&self) -> u32 {
        self.hydrogens.iter().map(|&h| u32::from(h)).sum()
    }

    pub fn bond_between(&self, a: usize, b: usize) -> Option<usize> {
        self.adjacency[a]
            .iter()
            .find(|nb| nb.atom == b)
            .map(|nb| nb.bond)
    }

    pub(crate) fn valence_sum(&self, i: usize) -> u32 {
        self.adjacency[i]
            .iter()
            .map(|nb| self.bonds[nb.bond].order.valence())
            .sum()
    }

    /// Hydrogen count an unbracketed spelling of atom `i` would imply.
    pub(crate) fn default_hydrogens(&self, i: usize) -> u8 {
        let atom = &self.atoms[i];
        implicit_hydrogens(atom.element, atom.aromatic, self.valence_sum(i))
    }

    fn compute_hydrogens(&self, i: usize) -> u8 {
        match self.atoms[i].explicit_h {
            Some(h) => h,
            None => self.default_hydrogens(i),
        }
    }

    /// Neighbours of `atom` other than `exclude`, ascending by index.
    pub(crate) fn substituents(&self, atom: usize, exclude: usize) -> Vec<usize> {
        self.adjacency[atom]
            .iter()
            .map(|nb| nb.atom)
            .filter(|&a| a != exclude)
            .collect()
    }

    /// Reference neighbour order of a tetrahedral centre, or `None` when the
    /// atom cannot carry a tetrahedral tag.
    pub(crate) fn stereo_slots(&self, i: usize) -> Option<Vec<Slot>> {
        let degree = self.degree(i);
        let h = self.hydrogens[i];
        let with_virtual = match (degree, h) {
            (4, 0) => false,
            (3, 0) | (3, 1) => true,
            _ => return None,
        };
        let mut slots = Vec::with_capacity(4);
        if with_virtual {
            slots.push(Slot::Virtual);
        }
        slots.extend(self.adjacency[i].iter().map(|nb| Slot::Atom(nb.atom)));
        Some(slots)
    }

    /// Bridges are the only non-ring bonds; everything else lies on a cycle.
    fn find_ring_bonds(&self) -> Vec<bool> {
        let n = self.atoms.len();
        let mut ring = vec![true; self.bonds.len()];
        let mut disc = vec![usize::MAX; n];
        let mut low = vec![0usize; n];
        let mut timer = 0usize;
        for root in 0..n {
            if disc[root] != usize::MAX {
                continue;
            }
            // iterative DFS: (atom, parent bond, next neighbour cursor)
            let mut stack: Vec<(usize, usize, usize)> = vec![(root, usize::MAX, 0)];
            disc[root] = timer;
            low[root] = timer;
            timer += 1;
            while let Some(&mut (v, parent_bond, ref mut cursor)) = stack.last_mut() {
                if *cursor < self.adjacency[v].len() {
                    let nb = self.adjacency[v][*cursor];
                    *cursor += 1;
                    if nb.bond == parent_bond {
                        continue;
                    }
                    if disc[nb.atom] == usize::MAX {
                        disc[nb.atom] = timer;
                        low[nb.atom] = timer;
                        timer += 1;
                        stack.push((nb.atom, nb.bond, 0));
                    } else {
                        low[v] = low[v].min(disc[nb.atom]);
                    }
                } else {
                    stack.pop();
                    if let Some(&(parent, _, _)) = stack.last() {
                        low[parent] = low[parent].min(low[v]);
                        if low[v] > disc[parent] {
                            ring[parent_bond] = false;
                        }
                    }
                }
            }
        }
        ring
    }

    /// Simple cycles of length 5 or 6, each as an atom sequence.
    fn small_cycles(&self) -> Vec<Vec<usize>> {
        let mut cycles = Vec::new();
        for start in 0..self.atoms.len() {
            if !self.ring_atoms[start] {
                continue;
            }
            let mut path = vec![start];
            self.extend_cycles(start, &mut path, &mut cycles);
        }
        cycles
    }

    fn extend_cycles(&self, start: usize, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        let last = *path.last().unwrap();
        for nb in &self.adjacency[last] {
            if !self.ring_bonds[nb.bond] {
                continue;
            }
            if nb.atom == start && path.len() >= 5 && path[1] < path[path.len() - 1] {
                out.push(path.clone());
            } else if nb.atom > start && !path.contains(&nb.atom) && path.len() < 6 {
                path.push(nb.atom);
                self.extend_cycles(start, path, out);
                path.pop();
            }
        }
    }

    fn cycle_bonds(&self, cycle: &[usize]) -> Vec<usize> {
        (0..cycle.len())
            .map(|k| {
                self.bond_between(cycle[k], cycle[(k + 1) % cycle.len()])
                    .expect("cycle edges exist")
            })
            .collect()
    }

    /// Marks kekulé 5- and 6-rings as aromatic; see the crate docs for the
    /// exact rule. Iterates so that rings fused to an already aromatic ring
    /// are picked up.
    fn normalize_aromaticity(&mut self) {
        let cycles = self.small_cycles();
        loop {
            let mut changed = false;
            for cycle in &cycles {
                let bonds = self.cycle_bonds(cycle);
                if bonds
                    .iter()
                    .all(|&k| self.bonds[k].order == BondOrder::Aromatic)
                {
                    continue;
                }
                if self.is_kekule_aromatic(cycle, &bonds) {
                    for &a in cycle {
                        self.atoms[a].aromatic = true;
                    }
                    for &k in &bonds {
                        self.bonds[k].order = BondOrder::Aromatic;
                        self.bonds[k].direction = None;
                    }
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        self.double_bond_stereo
            .retain(|s| self.bonds[s.bond].order == BondOrder::Double);
    }

    fn is_kekule_aromatic(&self, cycle: &[usize], bonds: &[usize]) -> bool {
        let allowed = [Element::C, Element::N, Element::O, Element::S];
        if !cycle.iter().all(|&a| allowed.contains(&self.atoms[a].element)) {
            return false;
        }
        // An atom contributes one pi electron when it is already aromatic or
        // carries exactly one double bond, and that bond lies in this cycle.
        let pi_atom = |a: usize| -> bool {
            if self.atoms[a].aromatic {
                return true;
            }
            let doubles: Vec<usize> = self.adjacency[a]
                .iter()
                .filter(|nb| self.bonds[nb.bond].order == BondOrder::Double)
                .map(|nb| nb.bond)
                .collect();
            doubles.len() == 1 && bonds.contains(&doubles[0])
        };
        match cycle.len() {
            6 => cycle.iter().all(|&a| pi_atom(a)),
            5 => {
                let donors: Vec<usize> = cycle
                    .iter()
                    .copied()
                    .filter(|&a| {
                        let atom = &self.atoms[a];
                        !atom.aromatic
                            && atom.charge == 0
                            && matches!(atom.element, e if e == Element::N || e == Element::O || e == Element::S)
                            && self.adjacency[a]
                                .iter()
                                .all(|nb| self.bonds[nb.bond].order == BondOrder::Single)
                    })
                    .collect();
                donors.len() == 1 && cycle.iter().all(|&a| a == donors[0] || pi_atom(a))
            }
            _ => false,
        }
    }

    /// Geometry implied by `/` and `\` marks around each double bond.
    fn stereo_from_directions(&self) -> Vec<DoubleBondStereo> {
        let mut out = Vec::new();
        for (k, bond) in self.bonds.iter().enumerate() {
            if bond.order != BondOrder::Double {
                continue;
            }
            let side_a = self.reference_side(bond.begin, bond.end);
            let side_b = self.reference_side(bond.end, bond.begin);
            if let (Some(a), Some(b)) = (side_a, side_b) {
                let config = if a == b {
                    DoubleBondConfig::Cis
                } else {
                    DoubleBondConfig::Trans
                };
                out.push(DoubleBondStereo { bond: k, config });
            }
        }
        out
    }

    /// Which side (+1 above, -1 below) the lowest-index substituent of
    /// `end` sits on, judged from the directional marks around it.
    fn reference_side(&self, end: usize, partner: usize) -> Option<i8> {
        let subs = self.substituents(end, partner);
        if subs.is_empty() || subs.len() > 2 {
            return None;
        }
        let mut side: Option<(usize, i8)> = None;
        for &x in &subs {
            let k = self.bond_between(end, x).unwrap();
            let bond = &self.bonds[k];
            let Some(dir) = bond.direction else { continue };
            if bond.order == BondOrder::Double {
                continue;
            }
            let up = dir == BondDirection::Up;
            // `x / end` puts x below; `end / x` puts x above.
            let s = if bond.begin == x {
                if up {
                    -1
                } else {
                    1
                }
            } else if up {
                1
            } else {
                -1
            };
            match side {
                None => side = Some((x, s)),
                Some((prev, ps)) => {
                    // both substituents marked: they must be on opposite sides
                    if ps == s && prev != x {
                        return None;
                    }
                }
            }
        }
        let (x, s) = side?;
        Some(if x == subs[0] { s } else { -s })
    }

    /// Renumbers atoms so that old atom `i` becomes `order_of[i]`, rewriting
    /// tetrahedral and double-bond tags for the new reference orders.
    pub(crate) fn permuted(&self, order_of: &[usize]) -> MolGraph {
        let n = self.atoms.len();
        let mut new_atoms = vec![Atom::new(Element::WILDCARD); n];
        for (old, atom) in self.atoms.iter().enumerate() {
            let mut atom = atom.clone();
            atom.explicit_h = Some(self.hydrogens[old]);
            if let (Some(tag), Some(slots)) = (atom.chirality, self.stereo_slots(old)) {
                // slots are in old reference order; mapped keys give the
                // permutation into the new reference order
                let keys: Vec<i64> = slots
                    .iter()
                    .map(|s| s.key(|a| order_of[a] as i64))
                    .collect();
                atom.chirality = Some(tag.flipped_if(is_odd_permutation(&keys)));
            }
            new_atoms[order_of[old]] = atom;
        }
        let mut new_bonds: Vec<(Bond, usize)> = self
            .bonds
            .iter()
            .enumerate()
            .map(|(k, b)| {
                let (x, y) = (order_of[b.begin], order_of[b.end]);
                (
                    Bond {
                        begin: x.min(y),
                        end: x.max(y),
                        order: b.order,
                        direction: None,
                    },
                    k,
                )
            })
            .collect();
        new_bonds.sort_by_key(|(b, _)| (b.begin, b.end));
        let mut bond_of = vec![0usize; self.bonds.len()];
        for (new_k, (_, old_k)) in new_bonds.iter().enumerate() {
            bond_of[*old_k] = new_k;
        }
        let stereo = self
            .double_bond_stereo
            .iter()
            .map(|s| {
                let b = &self.bonds[s.bond];
                let flip = |end: usize, partner: usize| -> bool {
                    let subs = self.substituents(end, partner);
                    let new_min = subs.iter().min_by_key(|&&a| order_of[a]).copied();
                    new_min != Some(subs[0])
                };
                let f = flip(b.begin, b.end) ^ flip(b.end, b.begin);
                DoubleBondStereo {
                    bond: bond_of[s.bond],
                    config: s.config.flipped_if(f),
                }
            })
            .collect();
        MolGraph::with_stereo(
            new_atoms,
            new_bonds.into_iter().map(|(b, _)| b).collect(),
            stereo,
        )
        .expect("permutation preserves validity")
    }

    /// Copy with selected stereo tags removed.
    pub(crate) fn without_stereo(&self, atoms: &[usize], double_bonds: &[usize]) -> MolGraph {
        let mut g = self.clone();
        for &a in atoms {
            g.atoms[a].chirality = None;
        }
        g.double_bond_stereo.retain(|s| !double_bonds.contains(&s.bond));
        g
    }

    /// Replaces each atom's bracket hydrogen count by its derived total,
    /// keeping `None` where the valence table reproduces the same count.
    fn normalize_hydrogen_spelling(&mut self) {
        for i in 0..self.atoms.len() {
            let total = self.hydrogens[i];
            let atom = &self.atoms[i];
            let plain = atom.element.is_organic_subset()
                && atom.isotope.is_none()
                && atom.charge == 0
                && atom.atom_class.is_none()
                && self.default_hydrogens(i) == total;
            self.atoms[i].explicit_h = if plain { None } else { Some(total) };
        }
    }

    /// Connected components as sorted atom lists, ordered by smallest atom.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.atoms.len();
        let mut comp = vec![usize::MAX; n];
        let mut out = Vec::new();
        for s in 0..n {
            if comp[s] != usize::MAX {
                continue;
            }
            let id = out.len();
            let mut members = vec![s];
            comp[s] = id;
            let mut k = 0;
            while k < members.len() {
                let v = members[k];
                k += 1;
                for nb in &self.adjacency[v] {
                    if comp[nb.atom] == usize::MAX {
                        comp[nb.atom] = id;
                        members.push(nb.atom);
                    }
                }
            }
            members.sort_unstable();
            out.push(members);
        }
        out
    }

    /// The subgraph induced by `members` (which must be sorted), renumbered
    /// in the same relative order.
    pub fn subgraph(&self, members: &[usize]) -> MolGraph {
        let mut index = vec![usize::MAX; self.atoms.len()];
        for (new, &old) in members.iter().enumerate() {
            index[old] = new;
        }
        let atoms = members
            .iter()
            .map(|&a| Atom {
                explicit_h: Some(self.hydrogens[a]),
                ..self.atoms[a].clone()
            })
            .collect();
        let mut bond_of = vec![usize::MAX; self.bonds.len()];
        let mut bonds = Vec::new();
        for (k, b) in self.bonds.iter().enumerate() {
            if index[b.begin] != usize::MAX && index[b.end] != usize::MAX {
                bond_of[k] = bonds.len();
                bonds.push(Bond {
                    begin: index[b.begin],
                    end: index[b.end],
                    order: b.order,
                    direction: b.direction,
                });
            }
        }
        // Index order is preserved, so reference orders and stereo carry over.
        let stereo = self
            .double_bond_stereo
            .iter()
            .filter(|s| bond_of[s.bond] != usize::MAX)
            .map(|s| DoubleBondStereo {
                bond: bond_of[s.bond],
                config: s.config,
            })
            .collect();
        MolGraph::with_stereo(atoms, bonds, stereo).expect("subgraph of valid graph")
    }
}
