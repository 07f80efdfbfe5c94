//! Parent-to-child generalized belief propagation on an explicit region graph.
//!
//! The belief of region `R` is the product of its own factors, the messages
//! from its parents, and the messages `P' -> D` into each descendant `D` from
//! parents `P'` outside `R` and its descendants. The update for edge `P -> R`
//! is `m <- m * sum_{x_P \ x_R} b_P / b_R`, normalized, then damped
//! geometrically against the previous message.

use super::region_graph::{validate_running_intersection, GroundRegionGraph};
use crate::error::{Error, Result};
use crate::numeric::{log_sum_exp, CLAMP};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schedule {
    Synchronous,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagationConfig {
    pub max_iterations: usize,
    pub tolerance: f64,
    pub damping: f64,
    pub schedule: Schedule,
}

impl Default for PropagationConfig {
    fn default() -> Self {
        PropagationConfig {
            max_iterations: 1000,
            tolerance: 1e-7,
            damping: 0.5,
            schedule: Schedule::Synchronous,
        }
    }
}

impl PropagationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::Model(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if !(0.0..1.0).contains(&self.damping) {
            return Err(Error::Model(format!(
                "damping must lie in [0, 1), got {}",
                self.damping
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeliefResult {
    /// Normalized belief table per region, indexed like the region's atoms.
    pub beliefs: Vec<Vec<f64>>,
    /// `P(atom = true)` per atom of the graph's universe.
    pub atom_marginals: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Residual after each sweep.
    pub residuals: Vec<f64>,
}

/// Index map from a region's table to a sub-scope's table.
fn projection(atoms: &[usize], sub: &[usize]) -> Vec<u32> {
    let pos: Vec<usize> = sub
        .iter()
        .map(|a| atoms.binary_search(a).expect("sub-scope atom missing"))
        .collect();
    (0..1usize << atoms.len())
        .map(|x| {
            pos.iter()
                .enumerate()
                .fold(0u32, |acc, (j, &p)| acc | ((((x >> p) & 1) as u32) << j))
        })
        .collect()
}

/// Message-passing state over a ground region graph.
#[derive(Debug, Clone)]
pub struct GroundGbp<'a> {
    rg: &'a GroundRegionGraph,
    local: Vec<Vec<f64>>,
    /// Per region: (projection into a sub-region, incoming edges multiplied
    /// through that projection).
    terms: Vec<Vec<(Vec<u32>, Vec<usize>)>>,
    /// Projection from parent table to child table, per edge.
    edge_maps: Vec<Vec<u32>>,
    /// Normalized message per edge, over the child's atoms.
    pub messages: Vec<Vec<f64>>,
}

impl<'a> GroundGbp<'a> {
    pub fn new(rg: &'a GroundRegionGraph) -> Result<Self> {
        rg.check_labels()?;
        let desc = rg.descendants()?;
        let n = rg.regions.len();
        let local = rg
            .regions
            .iter()
            .map(|r| {
                let mut t = vec![0.0; 1 << r.atoms.len()];
                for f in &r.factors {
                    let map = projection(&r.atoms, &f.scope);
                    for (x, v) in t.iter_mut().enumerate() {
                        *v += f.table[map[x] as usize];
                    }
                }
                t
            })
            .collect();
        let mut incoming: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (e, &(_, c)) in rg.edges.iter().enumerate() {
            incoming[c].push(e);
        }
        let mut terms = Vec::with_capacity(n);
        for r in 0..n {
            let mut inside = vec![false; n];
            inside[r] = true;
            for &d in &desc[r] {
                inside[d] = true;
            }
            let mut t = vec![(
                projection(&rg.regions[r].atoms, &rg.regions[r].atoms),
                incoming[r].clone(),
            )];
            for &d in &desc[r] {
                let edges: Vec<usize> = incoming[d]
                    .iter()
                    .copied()
                    .filter(|&e| !inside[rg.edges[e].0])
                    .collect();
                if !edges.is_empty() {
                    t.push((
                        projection(&rg.regions[r].atoms, &rg.regions[d].atoms),
                        edges,
                    ));
                }
            }
            terms.push(t);
        }
        let edge_maps = rg
            .edges
            .iter()
            .map(|&(p, c)| projection(&rg.regions[p].atoms, &rg.regions[c].atoms))
            .collect();
        let messages = rg
            .edges
            .iter()
            .map(|&(_, c)| {
                let k = 1usize << rg.regions[c].atoms.len();
                vec![1.0 / k as f64; k]
            })
            .collect();
        Ok(GroundGbp {
            rg,
            local,
            terms,
            edge_maps,
            messages,
        })
    }

    /// Normalized belief of region `r` under the current messages.
    pub fn belief(&self, r: usize) -> Vec<f64> {
        let mut t = self.local[r].clone();
        for (map, edges) in &self.terms[r] {
            for &e in edges {
                let m = &self.messages[e];
                for (x, v) in t.iter_mut().enumerate() {
                    *v += m[map[x] as usize].max(CLAMP).ln();
                }
            }
        }
        let z = log_sum_exp(&t);
        t.iter().map(|v| (v - z).exp()).collect()
    }

    pub fn beliefs(&self) -> Vec<Vec<f64>> {
        (0..self.rg.regions.len()).map(|r| self.belief(r)).collect()
    }

    /// One synchronous sweep; returns the max absolute message change.
    pub fn sweep(&mut self, damping: f64) -> f64 {
        let beliefs = self.beliefs();
        let mut residual: f64 = 0.0;
        let mut next = Vec::with_capacity(self.messages.len());
        for (e, &(p, c)) in self.rg.edges.iter().enumerate() {
            let old = &self.messages[e];
            let mut marg = vec![0.0; old.len()];
            for (x, &b) in beliefs[p].iter().enumerate() {
                marg[self.edge_maps[e][x] as usize] += b;
            }
            let new: Vec<f64> = (0..old.len())
                .map(|x| old[x] * marg[x] / beliefs[c][x].max(CLAMP))
                .collect();
            let m = damp(old, &new, damping);
            for (a, b) in m.iter().zip(old) {
                residual = residual.max((a - b).abs());
            }
            next.push(m);
        }
        self.messages = next;
        residual
    }

    /// `P(atom = true)` read from the smallest region holding each atom,
    /// ties going to the lower region index.
    pub fn atom_marginals(&self, beliefs: &[Vec<f64>]) -> Vec<f64> {
        let mut out = vec![f64::NAN; self.rg.atoms.len()];
        let mut best = vec![usize::MAX; self.rg.atoms.len()];
        for (r, reg) in self.rg.regions.iter().enumerate() {
            for (p, &a) in reg.atoms.iter().enumerate() {
                if reg.atoms.len() < best[a] {
                    best[a] = reg.atoms.len();
                    out[a] = beliefs[r]
                        .iter()
                        .enumerate()
                        .filter(|(x, _)| (x >> p) & 1 == 1)
                        .map(|(_, v)| v)
                        .sum();
                }
            }
        }
        out
    }
}

/// Normalizes `new` (clamped), then interpolates geometrically with `old`.
pub fn damp(old: &[f64], new: &[f64], damping: f64) -> Vec<f64> {
    let s: f64 = new.iter().map(|v| v.max(CLAMP)).sum();
    let logs: Vec<f64> = new
        .iter()
        .zip(old)
        .map(|(n, o)| (1.0 - damping) * (n.max(CLAMP) / s).ln() + damping * o.max(CLAMP).ln())
        .collect();
    let z = log_sum_exp(&logs);
    logs.iter().map(|v| (v - z).exp().max(CLAMP)).collect()
}

/// Runs synchronous sweeps until the residual drops below tolerance.
pub fn gbp_run(rg: &GroundRegionGraph, config: &PropagationConfig) -> Result<BeliefResult> {
    config.validate()?;
    if let Some(v) = validate_running_intersection(rg)? {
        return Err(Error::RegionGraph(format!(
            "running intersection fails: regions {} and {} share atom {}",
            v.first, v.second, v.atom
        )));
    }
    let mut state = GroundGbp::new(rg)?;
    let mut residuals = Vec::new();
    let mut converged = false;
    while residuals.len() < config.max_iterations {
        let r = state.sweep(config.damping);
        residuals.push(r);
        if r < config.tolerance {
            converged = true;
            break;
        }
    }
    let beliefs = state.beliefs();
    let atom_marginals = state.atom_marginals(&beliefs);
    Ok(BeliefResult {
        beliefs,
        atom_marginals,
        iterations: residuals.len(),
        converged,
        residuals,
    })
}
