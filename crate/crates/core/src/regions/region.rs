//! A lifted region: a first-order formula with a set of grounded variables,
//! standing for one ground region per assignment of those variables.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::lifted::{
    compile, default_factorization, jd_contains, Circuit, LiftedFactorization, LiftedModel,
    PlanOptions,
};
use crate::mln::{
    AtomGroup, Constraint, Csp, GroundAtom, GroupSlot, Literal, Mln, Term, WeightedClause,
};

/// One ground copy of a lifted region.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionCopy {
    /// Values of the grounded variables, in order.
    pub theta: Vec<usize>,
    /// Literal atoms of every grounding consistent with `theta`.
    pub groundings: Vec<Vec<GroundAtom>>,
    pub atoms: BTreeSet<GroundAtom>,
}

#[derive(Debug, Clone)]
pub struct LiftedRegion {
    pub clause: WeightedClause,
    /// Grounded variables: none or every variable of the clause.
    pub grounded: Vec<String>,
    /// Global atom group for single-group regions.
    pub group: Option<usize>,
    /// Model of the representative (first) copy.
    pub model: LiftedModel,
    pub factorization: LiftedFactorization,
    pub circuit: Circuit,
    pub copies: Vec<RegionCopy>,
}

impl LiftedRegion {
    pub fn is_ground(&self) -> bool {
        !self.grounded.is_empty() || self.clause.vars().is_empty()
    }

    /// Atoms per ground copy.
    pub fn copy_size(&self) -> usize {
        self.copies[0].atoms.len()
    }

    pub fn label(&self, mln: &Mln) -> String {
        let vg = if self.grounded.is_empty() {
            "{}".to_string()
        } else {
            format!("{{{}}}", self.grounded.join(","))
        };
        format!("{} | {}", mln.fmt_clause(&self.clause), vg)
    }
}

/// Zero-weight unit clause whose single literal produces exactly the atoms
/// of `group`.
pub fn group_clause(mln: &Mln, group: &AtomGroup) -> WeightedClause {
    let doms = &mln.predicates[group.predicate].arg_domains;
    let name = |k: usize| format!("v{k}");
    let mut constraints = Vec::new();
    let mut seen = BTreeSet::new();
    let args = group
        .slots
        .iter()
        .enumerate()
        .map(|(p, s)| match s {
            GroupSlot::Var(k) => {
                if seen.insert(*k) {
                    constraints.push(Constraint::InDomain(name(*k), doms[p]));
                }
                Term::Var(name(*k))
            }
            GroupSlot::Const(c) => Term::Const(*c),
        })
        .collect();
    for &(a, b) in &group.distinct {
        constraints.push(Constraint::Neq(name(a), name(b)));
    }
    WeightedClause {
        literals: vec![Literal {
            positive: true,
            predicate: group.predicate,
            args,
        }],
        weight: 0.0,
        constraints,
    }
}

/// `clause` with the grounded variables replaced by constants. Constraints
/// over grounded variables are dropped (they hold for every copy).
pub fn substitute(clause: &WeightedClause, grounded: &[String], theta: &[usize]) -> WeightedClause {
    let value = |v: &str| grounded.iter().position(|g| g == v).map(|i| theta[i]);
    let literals = clause
        .literals
        .iter()
        .map(|l| Literal {
            positive: l.positive,
            predicate: l.predicate,
            args: l
                .args
                .iter()
                .map(|t| match t {
                    Term::Var(v) => value(v).map_or_else(|| t.clone(), Term::Const),
                    Term::Const(_) => t.clone(),
                })
                .collect(),
        })
        .collect();
    let constraints = clause
        .constraints
        .iter()
        .filter(|c| match c {
            Constraint::InDomain(v, _) => value(v).is_none(),
            Constraint::Eq(a, b) | Constraint::Neq(a, b) => {
                value(a).is_none() && value(b).is_none()
            }
        })
        .cloned()
        .collect();
    WeightedClause {
        literals,
        weight: clause.weight,
        constraints,
    }
}

/// Ground copies of a clause under a set of grounded variables, ordered by
/// `theta`.
pub fn region_copies(mln: &Mln, clause: &WeightedClause, grounded: &[String]) -> Vec<RegionCopy> {
    let csp = Csp::for_clause(clause, mln);
    let gi: Vec<usize> = grounded
        .iter()
        .map(|v| csp.var_index(v).expect("grounded variable"))
        .collect();
    let mut by_theta: BTreeMap<Vec<usize>, Vec<Vec<GroundAtom>>> = BTreeMap::new();
    for sol in csp.solve() {
        let theta: Vec<usize> = gi.iter().map(|&i| sol[i]).collect();
        let atoms = clause
            .literals
            .iter()
            .map(|l| crate::mln::ground_literal(l, &csp, &sol))
            .collect();
        by_theta.entry(theta).or_default().push(atoms);
    }
    by_theta
        .into_iter()
        .map(|(theta, groundings)| {
            let atoms = groundings.iter().flatten().cloned().collect();
            RegionCopy {
                theta,
                groundings,
                atoms,
            }
        })
        .collect()
}

fn fmt_ground(mln: &Mln, clause: &WeightedClause, atoms: &[GroundAtom]) -> String {
    clause
        .literals
        .iter()
        .zip(atoms)
        .map(|(l, a)| format!("{}{}", if l.positive { "" } else { "!" }, mln.fmt_atom(a)))
        .collect::<Vec<_>>()
        .join(" v ")
}

/// Builds a lifted region, planning a factorization when none is given.
/// Every ground formula of the representative copy must be jointly
/// accessible under the factorization.
pub fn make_lifted_region(
    mln: &Mln,
    clause: &WeightedClause,
    grounded: &[String],
    group: Option<usize>,
    factorization: Option<LiftedFactorization>,
    opts: &PlanOptions,
) -> Result<LiftedRegion> {
    let vars = clause.vars();
    if !grounded.is_empty() {
        let mut g: Vec<String> = grounded.to_vec();
        g.sort();
        if g != vars {
            return Err(Error::RegionGraph(format!(
                "grounded variables {{{}}} must be empty or all of {{{}}}",
                grounded.join(","),
                vars.join(",")
            )));
        }
    }
    let copies = region_copies(mln, clause, grounded);
    if copies.is_empty() {
        return Err(Error::RegionGraph(format!(
            "{} has no groundings",
            mln.fmt_clause(clause)
        )));
    }
    let rep = substitute(clause, grounded, &copies[0].theta);
    let model = LiftedModel::from_clauses(mln, &[rep])?;
    let factorization = match factorization {
        Some(f) => f,
        None => default_factorization(&model, opts)?,
    };
    let circuit = compile(&model, &factorization)?;
    for g in &copies[0].groundings {
        if !jd_contains(&model, &circuit, g)? {
            return Err(Error::Coverage(fmt_ground(mln, clause, g)));
        }
    }
    Ok(LiftedRegion {
        clause: clause.clone(),
        grounded: grounded.to_vec(),
        group,
        model,
        factorization,
        circuit,
        copies,
    })
}
