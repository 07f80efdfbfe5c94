use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::factor_graph::Factor;
use crate::error::{Error, Result};
use crate::mln::{GroundAtom, Mln};

/// Label of a ground region: its atoms (global indices, ascending) and the
/// factors it owns.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundRegion {
    pub atoms: Vec<usize>,
    pub factors: Vec<Factor>,
}

/// Explicit region graph over a universe of ground atoms. Edges point from
/// parent to child.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundRegionGraph {
    pub atoms: Vec<GroundAtom>,
    pub regions: Vec<GroundRegion>,
    pub edges: Vec<(usize, usize)>,
}

/// A running-intersection violation: regions `first` and `second` both hold
/// `atom` but no common descendant-or-self region does.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RipViolation {
    pub first: usize,
    pub second: usize,
    pub atom: usize,
}

impl GroundRegionGraph {
    pub fn parents(&self) -> Vec<Vec<usize>> {
        let mut p = vec![Vec::new(); self.regions.len()];
        for &(a, b) in &self.edges {
            p[b].push(a);
        }
        p
    }

    pub fn children(&self) -> Vec<Vec<usize>> {
        let mut c = vec![Vec::new(); self.regions.len()];
        for &(a, b) in &self.edges {
            c[a].push(b);
        }
        c
    }

    /// Regions in topological order (parents first); error when cyclic.
    pub fn topological_order(&self) -> Result<Vec<usize>> {
        let n = self.regions.len();
        let children = self.children();
        let mut indeg = vec![0usize; n];
        for &(_, b) in &self.edges {
            indeg[b] += 1;
        }
        let mut stack: Vec<usize> = (0..n).rev().filter(|&v| indeg[v] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(v) = stack.pop() {
            order.push(v);
            for &c in children[v].iter().rev() {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    stack.push(c);
                }
            }
        }
        if order.len() != n {
            return Err(Error::RegionGraph("region graph has a cycle".into()));
        }
        Ok(order)
    }

    /// Strict descendants of every region, ascending.
    pub fn descendants(&self) -> Result<Vec<Vec<usize>>> {
        let order = self.topological_order()?;
        let children = self.children();
        let n = self.regions.len();
        let mut desc: Vec<Vec<bool>> = vec![vec![false; n]; n];
        for &v in order.iter().rev() {
            for &c in &children[v] {
                desc[v][c] = true;
                let (lo, hi) = if v < c {
                    let (a, b) = desc.split_at_mut(c);
                    (&mut a[v], &b[0])
                } else {
                    let (a, b) = desc.split_at_mut(v);
                    (&mut b[0], &a[c])
                };
                for (x, &y) in lo.iter_mut().zip(hi.iter()) {
                    *x |= y;
                }
            }
        }
        Ok(desc
            .into_iter()
            .map(|row| (0..n).filter(|&i| row[i]).collect())
            .collect())
    }

    /// Checks edge labels: each child's atoms lie within its parent's.
    pub fn check_labels(&self) -> Result<()> {
        for &(p, c) in &self.edges {
            let pa = &self.regions[p].atoms;
            if let Some(x) = self.regions[c]
                .atoms
                .iter()
                .find(|a| pa.binary_search(a).is_err())
            {
                return Err(Error::RegionGraph(format!(
                    "edge {p} -> {c}: child atom {x} not in parent"
                )));
            }
        }
        Ok(())
    }

    /// Undirected skeleton is connected and has |V| - 1 edges.
    pub fn is_tree(&self) -> bool {
        let n = self.regions.len();
        if n == 0 || self.edges.len() != n - 1 {
            return false;
        }
        let mut adj = vec![Vec::new(); n];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Deterministic text dump for fixtures.
    pub fn dump(&self, mln: &Mln) -> String {
        let mut s = String::new();
        for (i, r) in self.regions.iter().enumerate() {
            let names: Vec<String> = r
                .atoms
                .iter()
                .map(|&a| mln.fmt_atom(&self.atoms[a]))
                .collect();
            let _ = writeln!(
                s,
                "region {i} factors={} atoms={{{}}}",
                r.factors.len(),
                names.join(", ")
            );
        }
        for (a, b) in &self.edges {
            let _ = writeln!(s, "edge {a} -> {b}");
        }
        s
    }

    /// Canonical form for isomorphism checks: regions described by
    /// (sorted atom names, sorted factor tables) and edges by those labels.
    pub fn canonical_labels(&self) -> (Vec<String>, Vec<(String, String)>) {
        let label = |r: &GroundRegion| {
            let mut f: Vec<String> = r
                .factors
                .iter()
                .map(|f| {
                    let scope: Vec<String> = f
                        .scope
                        .iter()
                        .map(|a| format!("{:?}", self.atoms[*a]))
                        .collect();
                    format!("{}:{:?}", scope.join("&"), f.table)
                })
                .collect();
            f.sort();
            let atoms: Vec<String> = r
                .atoms
                .iter()
                .map(|a| format!("{:?}", self.atoms[*a]))
                .collect();
            format!("[{}]{{{}}}", atoms.join(","), f.join(";"))
        };
        let mut verts: Vec<String> = self.regions.iter().map(label).collect();
        let mut edges: Vec<(String, String)> = self
            .edges
            .iter()
            .map(|&(a, b)| (label(&self.regions[a]), label(&self.regions[b])))
            .collect();
        verts.sort();
        edges.sort();
        (verts, edges)
    }
}

/// Running intersection: any two regions sharing an atom have a common
/// descendant-or-self region containing it. Returns the first violation.
pub fn validate_running_intersection(rg: &GroundRegionGraph) -> Result<Option<RipViolation>> {
    let desc = rg.descendants()?;
    let n = rg.regions.len();
    let mut holders: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (v, r) in rg.regions.iter().enumerate() {
        for &a in &r.atoms {
            holders.entry(a).or_default().push(v);
        }
    }
    let mut closure = vec![vec![false; n]; n];
    for v in 0..n {
        closure[v][v] = true;
        for &d in &desc[v] {
            closure[v][d] = true;
        }
    }
    for (&atom, hs) in &holders {
        for (i, &v1) in hs.iter().enumerate() {
            for &v2 in &hs[i + 1..] {
                let ok = hs.iter().any(|&v3| closure[v1][v3] && closure[v2][v3]);
                if !ok {
                    return Ok(Some(RipViolation {
                        first: v1,
                        second: v2,
                        atom,
                    }));
                }
            }
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(atom_sets: &[&[usize]], edges: &[(usize, usize)]) -> GroundRegionGraph {
        let max = atom_sets
            .iter()
            .flat_map(|s| s.iter())
            .max()
            .copied()
            .unwrap_or(0);
        GroundRegionGraph {
            atoms: (0..=max).map(|i| GroundAtom::new(0, vec![i])).collect(),
            regions: atom_sets
                .iter()
                .map(|s| GroundRegion {
                    atoms: s.to_vec(),
                    factors: vec![],
                })
                .collect(),
            edges: edges.to_vec(),
        }
    }

    #[test]
    fn disjoint_regions() {
        let g = graph(&[&[0], &[1]], &[]);
        assert_eq!(validate_running_intersection(&g).unwrap(), None);
    }

    #[test]
    fn shared_atom_with_common_child() {
        let g = graph(&[&[0, 1], &[0, 2], &[0]], &[(0, 2), (1, 2)]);
        assert_eq!(validate_running_intersection(&g).unwrap(), None);
        assert!(g.check_labels().is_ok());
    }

    #[test]
    fn shared_atom_without_common_descendant() {
        // parents {0,1} and {0,2}, lone child {1}: atom 0 has no common holder
        let g = graph(&[&[0, 1], &[0, 2], &[1]], &[(0, 2)]);
        assert_eq!(
            validate_running_intersection(&g).unwrap(),
            Some(RipViolation {
                first: 0,
                second: 1,
                atom: 0
            })
        );
    }

    #[test]
    fn cycle_is_an_error() {
        let g = graph(&[&[0], &[0]], &[(0, 1), (1, 0)]);
        assert!(validate_running_intersection(&g).is_err());
    }
}
