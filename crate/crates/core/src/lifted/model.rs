//! Residual models handed to the lifted evaluator: a clause list over a
//! partition of ground atoms into exchangeable groups, with every clause's
//! groundings kept alongside its first-order form.

use std::collections::{BTreeSet, HashMap};

use crate::error::{Error, Result};
use crate::mln::{AtomGroup, Csp, GroundAtom, Mln, Term, WeightedClause};

/// One grounding of a model clause: values of the clause variables (in
/// `WeightedClause::vars` order) and the atom index of every literal.
#[derive(Debug, Clone, PartialEq)]
pub struct Grounding {
    pub theta: Vec<usize>,
    pub atoms: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelClause {
    pub clause: WeightedClause,
    pub vars: Vec<String>,
    /// Group of each literal.
    pub lit_group: Vec<usize>,
    pub groundings: Vec<Grounding>,
}

impl ModelClause {
    pub fn var_index(&self, v: &str) -> usize {
        self.vars
            .iter()
            .position(|x| x == v)
            .expect("clause variable")
    }

    /// Variable index at each argument position of literal `l`.
    pub fn lit_vars(&self, l: usize) -> Vec<Option<usize>> {
        self.clause.literals[l]
            .args
            .iter()
            .map(|t| t.var().map(|v| self.var_index(v)))
            .collect()
    }

    /// Pairs of variable indices joined by an equality or inequality.
    pub fn constraint_pairs(&self) -> Vec<(usize, usize)> {
        self.clause
            .equalities()
            .chain(self.clause.inequalities())
            .map(|(a, b)| (self.var_index(a), self.var_index(b)))
            .collect()
    }
}

/// A model whose atoms are partitioned into groups. Atoms in no clause are
/// kept apart as free atoms; each contributes a factor of 2 to Z.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedModel {
    pub mln: Mln,
    pub atoms: Vec<GroundAtom>,
    pub atom_group: Vec<usize>,
    pub groups: Vec<AtomGroup>,
    /// Atom indices of each group, ascending by atom.
    pub group_atoms: Vec<Vec<usize>>,
    pub clauses: Vec<ModelClause>,
    pub free_atoms: Vec<GroundAtom>,
}

impl LiftedModel {
    /// Whole model: every clause of `mln`, free atoms included.
    pub fn from_mln(mln: &Mln) -> Result<LiftedModel> {
        let mut m = LiftedModel::from_clauses(mln, &mln.clauses)?;
        let covered: BTreeSet<&GroundAtom> = m.atoms.iter().collect();
        m.free_atoms = crate::mln::ground_atoms(mln)
            .into_iter()
            .filter(|a| !covered.contains(a))
            .collect();
        Ok(m)
    }

    /// Model over the given clauses only; atoms are those the clauses touch.
    pub fn from_clauses(mln: &Mln, clauses: &[WeightedClause]) -> Result<LiftedModel> {
        let mut groups: Vec<AtomGroup> = Vec::new();
        for c in clauses {
            for l in &c.literals {
                let g = AtomGroup::of_literal(c, l);
                if !groups.contains(&g) {
                    groups.push(g);
                }
            }
        }
        let mut atoms: Vec<GroundAtom> = Vec::new();
        let mut atom_group: Vec<usize> = Vec::new();
        let mut index: HashMap<GroundAtom, usize> = HashMap::new();
        let mut group_atoms = Vec::with_capacity(groups.len());
        for (gi, g) in groups.iter().enumerate() {
            let mut ids = Vec::new();
            for a in g.atoms(mln) {
                if let Some(&other) = index.get(&a) {
                    return Err(Error::Factorization(format!(
                        "atom groups {} and {} overlap on {}",
                        groups[atom_group[other]].label(mln),
                        g.label(mln),
                        mln.fmt_atom(&a)
                    )));
                }
                index.insert(a.clone(), atoms.len());
                ids.push(atoms.len());
                atoms.push(a);
                atom_group.push(gi);
            }
            group_atoms.push(ids);
        }
        let mut out = Vec::with_capacity(clauses.len());
        for c in clauses {
            let csp = Csp::for_clause(c, mln);
            let vars = c.vars();
            let lit_group: Vec<usize> = c
                .literals
                .iter()
                .map(|l| {
                    let g = AtomGroup::of_literal(c, l);
                    groups.iter().position(|x| *x == g).expect("literal group")
                })
                .collect();
            let groundings = csp
                .solve()
                .into_iter()
                .map(|sol| {
                    let theta: Vec<usize> = vars
                        .iter()
                        .map(|v| sol[csp.var_index(v).expect("clause variable")])
                        .collect();
                    let atoms = c
                        .literals
                        .iter()
                        .map(|l| {
                            let args = l
                                .args
                                .iter()
                                .map(|t| match t {
                                    Term::Var(v) => sol[csp.var_index(v).expect("clause variable")],
                                    Term::Const(k) => *k,
                                })
                                .collect();
                            index[&GroundAtom::new(l.predicate, args)]
                        })
                        .collect();
                    Grounding { theta, atoms }
                })
                .collect();
            out.push(ModelClause {
                clause: c.clone(),
                vars,
                lit_group,
                groundings,
            });
        }
        Ok(LiftedModel {
            mln: mln.clone(),
            atoms,
            atom_group,
            groups,
            group_atoms,
            clauses: out,
            free_atoms: Vec::new(),
        })
    }

    pub fn atom_index(&self, atom: &GroundAtom) -> Option<usize> {
        self.atoms.iter().position(|a| a == atom)
    }

    pub fn group_label(&self, g: usize) -> String {
        self.groups[g].label(&self.mln)
    }
}
