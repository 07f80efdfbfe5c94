use std::collections::{BTreeSet, HashMap};

use super::csp::{Csp, Substitution};
use super::model::{Literal, Mln, PredicateId, Term, WeightedClause};
use crate::error::{Error, Result};

/// A predicate applied to constant indices (one per argument position, into
/// that position's domain).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroundAtom {
    pub predicate: PredicateId,
    pub args: Vec<usize>,
}

impl GroundAtom {
    pub fn new(predicate: PredicateId, args: Vec<usize>) -> Self {
        GroundAtom { predicate, args }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundClause {
    pub literals: Vec<(bool, GroundAtom)>,
    pub weight: f64,
    pub clause: usize,
    pub substitution: Substitution,
}

impl GroundClause {
    pub fn satisfied_by(&self, value: impl Fn(&GroundAtom) -> bool) -> bool {
        self.literals.iter().any(|(pos, a)| value(a) == *pos)
    }
}

/// Grounds one literal under a full solution of its clause's problem.
pub fn ground_literal(lit: &Literal, csp: &Csp, sol: &[usize]) -> GroundAtom {
    let args = lit
        .args
        .iter()
        .map(|t| match t {
            Term::Var(v) => {
                sol[csp
                    .var_index(v)
                    .expect("literal variable in clause problem")]
            }
            Term::Const(c) => *c,
        })
        .collect();
    GroundAtom::new(lit.predicate, args)
}

/// Ground clauses of a single first-order clause, in solution order.
pub fn ground_clause(mln: &Mln, index: usize, clause: &WeightedClause) -> Vec<GroundClause> {
    let csp = Csp::for_clause(clause, mln);
    csp.solve()
        .into_iter()
        .map(|sol| GroundClause {
            literals: clause
                .literals
                .iter()
                .map(|l| (l.positive, ground_literal(l, &csp, &sol)))
                .collect(),
            weight: clause.weight,
            clause: index,
            substitution: csp.to_substitution(&sol),
        })
        .collect()
}

/// All ground formulas, clause by clause. Identical groundings are kept.
pub fn ground_formulas(mln: &Mln) -> Vec<GroundClause> {
    mln.clauses
        .iter()
        .enumerate()
        .flat_map(|(i, c)| ground_clause(mln, i, c))
        .collect()
}

/// Every grounding of every predicate in `p`'s argument domains.
pub fn predicate_groundings(mln: &Mln, p: PredicateId) -> Vec<GroundAtom> {
    let doms = &mln.predicates[p].arg_domains;
    let mut out = vec![Vec::new()];
    for &d in doms {
        let n = mln.domains[d].len();
        out = out
            .into_iter()
            .flat_map(|prefix: Vec<usize>| {
                (0..n).map(move |c| {
                    let mut v = prefix.clone();
                    v.push(c);
                    v
                })
            })
            .collect();
    }
    out.into_iter()
        .map(|args| GroundAtom::new(p, args))
        .collect()
}

/// Ground atoms: all groundings of declared predicates (a superset of the
/// atoms mentioned by ground formulas).
pub fn ground_atoms(mln: &Mln) -> BTreeSet<GroundAtom> {
    let mut atoms: BTreeSet<GroundAtom> = (0..mln.predicates.len())
        .flat_map(|p| predicate_groundings(mln, p))
        .collect();
    for g in ground_formulas(mln) {
        atoms.extend(g.literals.into_iter().map(|(_, a)| a));
    }
    atoms
}

/// `Σ_i w_i g_i(world)` over all ground formulas.
pub fn world_log_score(mln: &Mln, world: &HashMap<GroundAtom, bool>) -> Result<f64> {
    for a in ground_atoms(mln) {
        if !world.contains_key(&a) {
            return Err(Error::Model(format!(
                "world does not assign {}",
                mln.fmt_atom(&a)
            )));
        }
    }
    Ok(ground_formulas(mln)
        .iter()
        .filter(|g| g.satisfied_by(|a| world[a]))
        .map(|g| g.weight)
        .sum())
}
