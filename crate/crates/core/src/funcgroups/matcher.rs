//! Backtracking subgraph matcher in the VF2 style: query atoms are visited
//! in breadth-first order so every atom after the first extends an already
//! mapped neighbour, and candidates come from that neighbour's adjacency.

use std::collections::HashSet;

use super::pattern::Pattern;
use crate::molgraph::MolGraph;

struct Search<'a> {
    target: &'a MolGraph,
    pattern: &'a Pattern,
    order: Vec<usize>,
    /// For each position in `order` after the first, an earlier mapped neighbour.
    anchor: Vec<Option<usize>>,
    mapping: Vec<usize>,
    used: Vec<bool>,
    seen_sets: HashSet<Vec<usize>>,
    found: Vec<Vec<usize>>,
    limit: Option<usize>,
}

fn visit_order(pattern: &Pattern) -> (Vec<usize>, Vec<Option<usize>>) {
    let n = pattern.atoms().len();
    let mut order = Vec::with_capacity(n);
    let mut anchor = Vec::with_capacity(n);
    let mut placed = vec![false; n];
    for start in 0..n {
        if placed[start] {
            continue;
        }
        placed[start] = true;
        order.push(start);
        anchor.push(None);
        let mut k = order.len() - 1;
        while k < order.len() {
            let v = order[k];
            k += 1;
            for &(u, _) in pattern.neighbors(v) {
                if !placed[u] {
                    placed[u] = true;
                    order.push(u);
                    anchor.push(Some(v));
                }
            }
        }
    }
    (order, anchor)
}

impl Search<'_> {
    fn feasible(&self, q: usize, t: usize) -> bool {
        if self.used[t]
            || self.target.degree(t) < self.pattern.neighbors(q).len()
            || !self.pattern.atoms()[q].matches(self.target, t)
        {
            return false;
        }
        self.pattern.neighbors(q).iter().all(|&(qn, qb)| {
            let tn = self.mapping[qn];
            if tn == usize::MAX {
                return true;
            }
            match self.target.bond_between(t, tn) {
                Some(k) => self.pattern.bonds()[qb]
                    .query
                    .matches(self.target.bond(k).order),
                None => false,
            }
        })
    }

    fn extend(&mut self, depth: usize) -> bool {
        if depth == self.order.len() {
            let mut set = self.mapping.clone();
            set.sort_unstable();
            if self.seen_sets.insert(set) {
                self.found.push(self.mapping.clone());
            }
            return self.limit.is_some_and(|l| self.found.len() >= l);
        }
        let q = self.order[depth];
        let candidates: Vec<usize> = match self.anchor[depth] {
            Some(a) => self
                .target
                .neighbors(self.mapping[a])
                .iter()
                .map(|nb| nb.atom)
                .collect(),
            None => (0..self.target.atom_count()).collect(),
        };
        for t in candidates {
            if self.feasible(q, t) {
                self.mapping[q] = t;
                self.used[t] = true;
                let stop = self.extend(depth + 1);
                self.used[t] = false;
                self.mapping[q] = usize::MAX;
                if stop {
                    return true;
                }
            }
        }
        false
    }
}

fn search(target: &MolGraph, pattern: &Pattern, limit: Option<usize>) -> Vec<Vec<usize>> {
    let (order, anchor) = visit_order(pattern);
    let mut s = Search {
        target,
        pattern,
        order,
        anchor,
        mapping: vec![usize::MAX; pattern.atoms().len()],
        used: vec![false; target.atom_count()],
        seen_sets: HashSet::new(),
        found: Vec::new(),
        limit,
    };
    if pattern.atoms().len() <= target.atom_count() {
        s.extend(0);
    }
    s.found
}

/// All matches of `pattern` in `target`; `result[m][q]` is the target atom
/// for query atom `q`. Matches covering the same atom set are reported once.
pub fn match_substructure(target: &MolGraph, pattern: &Pattern) -> Vec<Vec<usize>> {
    search(target, pattern, None)
}

pub fn has_match(target: &MolGraph, pattern: &Pattern) -> bool {
    !search(target, pattern, Some(1)).is_empty()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molgraph::parse_smiles;

    fn count(target: &str, pattern: &str) -> usize {
        let p = Pattern::parse("q", pattern).unwrap();
        match_substructure(&parse_smiles(target).unwrap(), &p).len()
    }

    #[test]
    fn any_bond_carbon_oxygen_in_ethanol() {
        assert_eq!(count("CCO", "C~O"), 1);
    }

    #[test]
    fn no_oxygen_no_acid() {
        assert_eq!(count("CCN", "C(=O)O"), 0);
    }

    #[test]
    fn benzene_ring_in_phenol_once() {
        assert_eq!(count("c1ccccc1O", "c1ccccc1"), 1);
    }

    #[test]
    fn aromatic_queries_need_aromatic_atoms() {
        assert_eq!(count("C1CCCCC1", "c1ccccc1"), 0);
        assert_eq!(count("c1ccccc1", "C"), 0);
        assert_eq!(count("c1ccccc1", "[#6]"), 6);
    }

    #[test]
    fn mappings_preserve_edges() {
        let m = parse_smiles("CC(=O)OCC(=O)O").unwrap();
        let p = Pattern::parse("q", "C(=O)O").unwrap();
        let found = match_substructure(&m, &p);
        assert_eq!(found.len(), 2);
        for map in found {
            for b in p.bonds() {
                let k = m.bond_between(map[b.begin], map[b.end]).unwrap();
                assert!(b.query.matches(m.bond(k).order));
            }
        }
    }
}
