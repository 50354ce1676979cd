//! Random molecule construction shared by the integration tests.
#![allow(dead_code)]

pub mod oracle;

use chemreason::molgraph::{
    Atom, Bond, BondOrder, Chirality, DoubleBondConfig, DoubleBondStereo, Element, MolGraph,
};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// SMILES strings from the reaction case study used throughout the tests.
pub const CASE_STUDY: [&str; 4] = [
    "C=CCOc1ccc(N2C(=O)CC(Cl)C2=O)cc1",
    "CCN(CC)CC",
    "ClCCl",
    "C=CCOc1ccc(N2C(=O)C=CC2=O)cc1",
];

pub const CASE_STUDY_REACTION: &str =
    "C=CCOc1ccc(N2C(=O)CC(Cl)C2=O)cc1.CCN(CC)CC>ClCCl>C=CCOc1ccc(N2C(=O)C=CC2=O)cc1";

struct Builder {
    atoms: Vec<Atom>,
    /// Remaining bonding capacity, which ends up as hydrogens.
    free: Vec<u8>,
    bonds: Vec<Bond>,
}

impl Builder {
    fn add_atom(&mut self, atom: Atom, free: u8) -> usize {
        self.atoms.push(atom);
        self.free.push(free);
        self.atoms.len() - 1
    }

    fn bond(&mut self, a: usize, b: usize, order: BondOrder, cost: u8) {
        self.free[a] -= cost;
        self.free[b] -= cost;
        self.bonds.push(Bond::new(a, b, order));
    }

    fn bonded(&self, a: usize, b: usize) -> bool {
        self.bonds
            .iter()
            .any(|x| (x.begin == a && x.end == b) || (x.begin == b && x.end == a))
    }

    /// Adds a ring template and returns the indices of its atoms.
    fn ring(&mut self, rng: &mut ChaCha8Rng) -> Vec<usize> {
        let start = self.atoms.len();
        match rng.random_range(0..8) {
            0 => {
                for _ in 0..6 {
                    self.add_atom(Atom::aromatic(Element::C), 1);
                }
                self.close_aromatic(start, 6);
            }
            1 => {
                self.add_atom(Atom::aromatic(Element::N), 0);
                for _ in 0..5 {
                    self.add_atom(Atom::aromatic(Element::C), 1);
                }
                self.close_aromatic(start, 6);
            }
            2 | 3 => {
                let (hetero, free) = match rng.random_range(0..3) {
                    0 => (Element::S, 0),
                    1 => (Element::O, 0),
                    _ => (Element::N, 1),
                };
                self.add_atom(Atom::aromatic(hetero), free);
                for _ in 0..4 {
                    self.add_atom(Atom::aromatic(Element::C), 1);
                }
                self.close_aromatic(start, 5);
            }
            4 => {
                for _ in 0..6 {
                    self.add_atom(Atom::new(Element::C), 4);
                }
                for k in 0..6 {
                    let (a, b) = (start + k, start + (k + 1) % 6);
                    if k % 2 == 0 {
                        self.bond(a, b, BondOrder::Double, 2);
                    } else {
                        self.bond(a, b, BondOrder::Single, 1);
                    }
                }
            }
            _ => {
                let size = rng.random_range(3..=7);
                for k in 0..size {
                    let element = if k > 0 && rng.random_bool(0.2) {
                        Element::N
                    } else {
                        Element::C
                    };
                    let free = if element == Element::C { 4 } else { 3 };
                    self.add_atom(Atom::new(element), free);
                }
                for k in 0..size {
                    self.bond(start + k, start + (k + 1) % size, BondOrder::Single, 1);
                }
            }
        }
        (start..self.atoms.len()).collect()
    }

    fn close_aromatic(&mut self, start: usize, size: usize) {
        for k in 0..size {
            self.bonds.push(Bond::new(
                start + k,
                start + (k + 1) % size,
                BondOrder::Aromatic,
            ));
        }
    }

    fn chain_atom(&mut self, rng: &mut ChaCha8Rng) -> usize {
        let (element, free) = *[
            (Element::C, 4),
            (Element::C, 4),
            (Element::C, 4),
            (Element::C, 4),
            (Element::N, 3),
            (Element::O, 2),
            (Element::S, 2),
            (Element::F, 1),
            (Element::CL, 1),
            (Element::BR, 1),
            (Element::P, 3),
        ]
        .choose(rng)
        .unwrap();
        let mut atom = Atom::new(element);
        let mut free = free;
        if element == Element::C && rng.random_bool(0.05) {
            atom.isotope = Some(13);
        }
        if element == Element::N && rng.random_bool(0.1) {
            atom.charge = 1;
            free += 1;
        }
        if element == Element::O && rng.random_bool(0.1) {
            atom.charge = -1;
            free -= 1;
        }
        self.add_atom(atom, free)
    }
}

/// Builds a random connected molecule with at most `max_heavy` atoms.
pub fn random_molecule(seed: u64, max_heavy: usize) -> MolGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let target = rng.random_range(2..=max_heavy.max(2));
    let mut b = Builder {
        atoms: Vec::new(),
        free: Vec::new(),
        bonds: Vec::new(),
    };
    if rng.random_bool(0.5) {
        b.ring(&mut rng);
    } else {
        b.chain_atom(&mut rng);
    }
    let mut attempts = 0;
    while b.atoms.len() < target && attempts < 200 {
        attempts += 1;
        let open: Vec<usize> = (0..b.atoms.len()).filter(|&i| b.free[i] > 0).collect();
        let Some(&anchor) = open.choose(&mut rng) else {
            break;
        };
        if target - b.atoms.len() >= 7 && rng.random_bool(0.2) {
            let ring = b.ring(&mut rng);
            let open_ring: Vec<usize> = ring.into_iter().filter(|&i| b.free[i] > 0).collect();
            if let Some(&r) = open_ring.choose(&mut rng) {
                b.bond(anchor, r, BondOrder::Single, 1);
            }
            continue;
        }
        let atom = b.chain_atom(&mut rng);
        let room = b.free[anchor].min(b.free[atom]);
        let aliphatic = !b.atoms[anchor].aromatic;
        let (order, cost) = match rng.random_range(0..10) {
            0..=1 if aliphatic && room >= 2 => (BondOrder::Double, 2),
            2 if aliphatic && room >= 3 => (BondOrder::Triple, 3),
            _ => (BondOrder::Single, 1),
        };
        if room == 0 {
            b.atoms.pop();
            b.free.pop();
            continue;
        }
        b.bond(anchor, atom, order, cost);
    }
    // extra ring closures between distant aliphatic atoms
    for _ in 0..rng.random_range(0..3) {
        let open: Vec<usize> = (0..b.atoms.len())
            .filter(|&i| b.free[i] > 0 && !b.atoms[i].aromatic)
            .collect();
        if open.len() < 2 {
            break;
        }
        let x = *open.choose(&mut rng).unwrap();
        let y = *open.choose(&mut rng).unwrap();
        if x != y && !b.bonded(x, y) {
            b.bond(x, y, BondOrder::Single, 1);
        }
    }
    let mut atoms = b.atoms.clone();
    for (i, atom) in atoms.iter_mut().enumerate() {
        atom.explicit_h = Some(b.free[i]);
    }
    let probe = MolGraph::new(atoms.clone(), b.bonds.clone()).expect("valid construction");
    let comps = probe.components();
    let probe = if comps.len() > 1 {
        let biggest = comps.iter().max_by_key(|c| c.len()).unwrap();
        probe.subgraph(biggest)
    } else {
        probe
    };
    add_stereo(probe, &mut rng)
}

fn add_stereo(mol: MolGraph, rng: &mut ChaCha8Rng) -> MolGraph {
    let mut atoms = mol.atoms().to_vec();
    for (i, atom) in atoms.iter_mut().enumerate() {
        let d = mol.degree(i);
        let h = mol.hydrogen_count(i);
        let sp3 = mol
            .neighbors(i)
            .iter()
            .all(|nb| mol.bond(nb.bond).order == BondOrder::Single);
        if atom.element == Element::C && sp3 && ((d == 4 && h == 0) || (d == 3 && h == 1)) && rng.random_bool(0.4) {
            atom.chirality = Some(if rng.random_bool(0.5) {
                Chirality::Clockwise
            } else {
                Chirality::CounterClockwise
            });
        }
    }
    let mut stereo = Vec::new();
    for (k, bond) in mol.bonds().iter().enumerate() {
        if bond.order != BondOrder::Double || mol.is_ring_bond(k) {
            continue;
        }
        let isolated = [bond.begin, bond.end].iter().all(|&end| {
            let others: Vec<_> = mol
                .neighbors(end)
                .iter()
                .filter(|nb| nb.bond != k)
                .collect();
            !others.is_empty()
                && others.len() <= 2
                && others.iter().all(|nb| {
                    mol.bond(nb.bond).order == BondOrder::Single
                        && mol
                            .neighbors(nb.atom)
                            .iter()
                            .all(|x| mol.bond(x.bond).order != BondOrder::Double)
                })
        });
        if isolated && rng.random_bool(0.6) {
            stereo.push(DoubleBondStereo {
                bond: k,
                config: if rng.random_bool(0.5) {
                    DoubleBondConfig::Cis
                } else {
                    DoubleBondConfig::Trans
                },
            });
        }
    }
    let bonds: Vec<Bond> = mol.bonds().to_vec();
    MolGraph::with_stereo(atoms, bonds, stereo).expect("stereo on valid graph")
}

/// A corpus of `count` random molecules drawn from `seed`.
pub fn random_corpus(seed: u64, count: usize, max_heavy: usize) -> Vec<MolGraph> {
    (0..count as u64)
        .map(|i| random_molecule(seed.wrapping_mul(1_000_003).wrapping_add(i), max_heavy))
        .collect()
}
