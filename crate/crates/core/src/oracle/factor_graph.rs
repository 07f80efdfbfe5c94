use std::collections::HashMap;

use crate::mln::{ground_atoms, ground_formulas, GroundAtom, Mln};

/// A factor over binary variables. Table index bit `p` holds the value of
/// `scope[p]` (1 = true); entries are log weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    pub scope: Vec<usize>,
    pub table: Vec<f64>,
}

impl Factor {
    pub fn value(&self, world: &[bool]) -> f64 {
        let mut idx = 0usize;
        for (p, &v) in self.scope.iter().enumerate() {
            if world[v] {
                idx |= 1 << p;
            }
        }
        self.table[idx]
    }
}

/// Ground Markov network: one binary variable per ground atom.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorGraph {
    pub variables: Vec<GroundAtom>,
    pub factors: Vec<Factor>,
    index: HashMap<GroundAtom, usize>,
}

impl FactorGraph {
    pub fn new(variables: Vec<GroundAtom>, factors: Vec<Factor>) -> Self {
        let index = variables
            .iter()
            .enumerate()
            .map(|(i, a)| (a.clone(), i))
            .collect();
        FactorGraph {
            variables,
            factors,
            index,
        }
    }

    pub fn var_index(&self, atom: &GroundAtom) -> Option<usize> {
        self.index.get(atom).copied()
    }

    pub fn log_score(&self, world: &[bool]) -> f64 {
        self.factors.iter().map(|f| f.value(world)).sum()
    }
}

/// Builds a factor from a clause given as (positive, scope position) pairs:
/// rows satisfying the clause get `weight`, the rest 0.
pub fn clause_factor(scope: Vec<usize>, literals: &[(bool, usize)], weight: f64) -> Factor {
    let n = scope.len();
    let table = (0..1usize << n)
        .map(|row| {
            let sat = literals
                .iter()
                .any(|&(pos, p)| ((row >> p) & 1 == 1) == pos);
            if sat {
                weight
            } else {
                0.0
            }
        })
        .collect();
    Factor { scope, table }
}

/// One variable per ground atom, one factor per ground clause carrying the
/// clause weight on satisfying rows.
pub fn ground_markov_network(mln: &Mln) -> FactorGraph {
    let variables: Vec<GroundAtom> = ground_atoms(mln).into_iter().collect();
    let index: HashMap<&GroundAtom, usize> =
        variables.iter().enumerate().map(|(i, a)| (a, i)).collect();
    let factors = ground_formulas(mln)
        .iter()
        .map(|g| {
            let mut scope: Vec<usize> = Vec::new();
            let lits: Vec<(bool, usize)> = g
                .literals
                .iter()
                .map(|(pos, a)| {
                    let v = index[a];
                    let p = match scope.iter().position(|&s| s == v) {
                        Some(p) => p,
                        None => {
                            scope.push(v);
                            scope.len() - 1
                        }
                    };
                    (*pos, p)
                })
                .collect();
            clause_factor(scope, &lits, g.weight)
        })
        .collect();
    FactorGraph::new(variables, factors)
}
