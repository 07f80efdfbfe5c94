use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::{Error, Result};

pub type DomainId = usize;
pub type PredicateId = usize;

/// A named, ordered set of constants. Constant order defines the indices used
/// by groundings and count-space encodings.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Domain {
    pub name: String,
    pub objects: Vec<String>,
}

impl Domain {
    pub fn new(name: impl Into<String>, objects: Vec<String>) -> Result<Self> {
        let name = name.into();
        let mut seen = BTreeSet::new();
        for o in &objects {
            if !seen.insert(o.as_str()) {
                return Err(Error::Model(format!(
                    "duplicate constant {o} in domain {name}"
                )));
            }
        }
        Ok(Domain { name, objects })
    }

    /// Domain `{1, ..., n}`.
    pub fn range(name: impl Into<String>, n: usize) -> Self {
        Domain {
            name: name.into(),
            objects: (1..=n).map(|i| i.to_string()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn index_of(&self, constant: &str) -> Option<usize> {
        self.objects.iter().position(|o| o == constant)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Predicate {
    pub name: String,
    pub arg_domains: Vec<DomainId>,
}

impl Predicate {
    pub fn arity(&self) -> usize {
        self.arg_domains.len()
    }
}

/// Argument of a literal: a logical variable or a constant index into the
/// domain of the argument position.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(String),
    Const(usize),
}

impl Term {
    pub fn var(&self) -> Option<&str> {
        match self {
            Term::Var(v) => Some(v),
            Term::Const(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Constraint {
    InDomain(String, DomainId),
    Eq(String, String),
    Neq(String, String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Literal {
    pub positive: bool,
    pub predicate: PredicateId,
    pub args: Vec<Term>,
}

impl Literal {
    pub fn vars(&self) -> impl Iterator<Item = &str> {
        self.args.iter().filter_map(Term::var)
    }
}

/// A weighted first-order clause with its constraint store. The weight is in
/// log space.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedClause {
    pub literals: Vec<Literal>,
    pub weight: f64,
    pub constraints: Vec<Constraint>,
}

impl WeightedClause {
    /// Logical variables in name order.
    pub fn vars(&self) -> Vec<String> {
        let mut vs: BTreeSet<String> = BTreeSet::new();
        for l in &self.literals {
            vs.extend(l.vars().map(str::to_string));
        }
        for c in &self.constraints {
            if let Constraint::InDomain(v, _) = c {
                vs.insert(v.clone());
            }
        }
        vs.into_iter().collect()
    }

    pub fn var_domain(&self, var: &str) -> Option<DomainId> {
        self.constraints.iter().find_map(|c| match c {
            Constraint::InDomain(v, d) if v == var => Some(*d),
            _ => None,
        })
    }

    pub fn equalities(&self) -> impl Iterator<Item = (&str, &str)> {
        self.constraints.iter().filter_map(|c| match c {
            Constraint::Eq(a, b) => Some((a.as_str(), b.as_str())),
            _ => None,
        })
    }

    pub fn inequalities(&self) -> impl Iterator<Item = (&str, &str)> {
        self.constraints.iter().filter_map(|c| match c {
            Constraint::Neq(a, b) => Some((a.as_str(), b.as_str())),
            _ => None,
        })
    }

    /// Renames every variable through `f`.
    pub fn rename_vars(&self, f: impl Fn(&str) -> String) -> WeightedClause {
        let term = |t: &Term| match t {
            Term::Var(v) => Term::Var(f(v)),
            c => c.clone(),
        };
        WeightedClause {
            literals: self
                .literals
                .iter()
                .map(|l| Literal {
                    positive: l.positive,
                    predicate: l.predicate,
                    args: l.args.iter().map(term).collect(),
                })
                .collect(),
            weight: self.weight,
            constraints: self
                .constraints
                .iter()
                .map(|c| match c {
                    Constraint::InDomain(v, d) => Constraint::InDomain(f(v), *d),
                    Constraint::Eq(a, b) => Constraint::Eq(f(a), f(b)),
                    Constraint::Neq(a, b) => Constraint::Neq(f(a), f(b)),
                })
                .collect(),
        }
    }
}

/// A Markov logic network: domains, predicates and weighted clauses.
#[derive(Debug, Clone, PartialEq)]
pub struct Mln {
    pub domains: Vec<Domain>,
    pub predicates: Vec<Predicate>,
    pub clauses: Vec<WeightedClause>,
}

impl Mln {
    /// Builds and validates a model, standardizing variables apart.
    pub fn new(
        domains: Vec<Domain>,
        predicates: Vec<Predicate>,
        clauses: Vec<WeightedClause>,
    ) -> Result<Self> {
        let mln = Mln {
            domains,
            predicates,
            clauses,
        }
        .standardized();
        mln.validate()?;
        Ok(mln)
    }

    pub fn domain_index(&self, name: &str) -> Option<DomainId> {
        self.domains.iter().position(|d| d.name == name)
    }

    pub fn predicate_index(&self, name: &str) -> Option<PredicateId> {
        self.predicates.iter().position(|p| p.name == name)
    }

    /// Renames clause variables to `base@clause` so no two clauses share one.
    pub fn standardized(mut self) -> Self {
        for (i, c) in self.clauses.iter_mut().enumerate() {
            *c = c.rename_vars(|v| {
                let base = v.split('@').next().unwrap_or(v);
                format!("{base}@{i}")
            });
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        let mut names = BTreeSet::new();
        for p in &self.predicates {
            if !names.insert(&p.name) {
                return Err(Error::Model(format!("duplicate predicate {}", p.name)));
            }
            if let Some(d) = p.arg_domains.iter().find(|&&d| d >= self.domains.len()) {
                return Err(Error::Model(format!(
                    "predicate {} references unknown domain {d}",
                    p.name
                )));
            }
        }
        for (ci, c) in self.clauses.iter().enumerate() {
            if !c.weight.is_finite() {
                return Err(Error::Model(format!("clause {ci} has non-finite weight")));
            }
            let mut doms: BTreeMap<&str, Vec<DomainId>> = BTreeMap::new();
            for con in &c.constraints {
                if let Constraint::InDomain(v, d) = con {
                    if *d >= self.domains.len() {
                        return Err(Error::Model(format!("clause {ci}: unknown domain {d}")));
                    }
                    doms.entry(v).or_default().push(*d);
                }
            }
            for (v, ds) in &doms {
                if ds.len() != 1 {
                    return Err(Error::Model(format!(
                        "clause {ci}: variable {v} has {} domain constraints",
                        ds.len()
                    )));
                }
            }
            for l in &c.literals {
                let p = self.predicates.get(l.predicate).ok_or_else(|| {
                    Error::Model(format!("clause {ci}: unknown predicate {}", l.predicate))
                })?;
                if p.arity() != l.args.len() {
                    return Err(Error::Model(format!(
                        "clause {ci}: predicate {} has arity {}, got {} arguments",
                        p.name,
                        p.arity(),
                        l.args.len()
                    )));
                }
                for (pos, t) in l.args.iter().enumerate() {
                    let dom = p.arg_domains[pos];
                    match t {
                        Term::Var(v) => match doms.get(v.as_str()) {
                            Some(ds) if ds[0] == dom => {}
                            Some(_) => {
                                return Err(Error::Model(format!(
                                    "clause {ci}: variable {v} used with conflicting domains"
                                )))
                            }
                            None => {
                                return Err(Error::Model(format!(
                                    "clause {ci}: variable {v} lacks a domain constraint"
                                )))
                            }
                        },
                        Term::Const(k) => {
                            if *k >= self.domains[dom].len() {
                                return Err(Error::Model(format!(
                                    "clause {ci}: constant index {k} out of range"
                                )));
                            }
                        }
                    }
                }
            }
            for (a, b) in c.equalities().chain(c.inequalities()) {
                match (doms.get(a), doms.get(b)) {
                    (Some(da), Some(db)) if da[0] == db[0] => {}
                    (Some(_), Some(_)) => {
                        return Err(Error::Model(format!(
                            "clause {ci}: constraint over {a} and {b} with different domains"
                        )))
                    }
                    _ => {
                        return Err(Error::Model(format!(
                            "clause {ci}: constraint over unknown variable {a} or {b}"
                        )))
                    }
                }
            }
        }
        Ok(())
    }

    /// Copy with every domain truncated to at most `n` constants. Clauses
    /// referring to dropped constants are rejected.
    pub fn with_domain_cap(&self, n: usize) -> Result<Mln> {
        let mut m = self.clone();
        for d in &mut m.domains {
            d.objects.truncate(n);
        }
        m.validate()?;
        Ok(m)
    }

    /// Copy with every domain replaced by `{1..n}`.
    pub fn with_domain_size(&self, n: usize) -> Mln {
        let mut m = self.clone();
        for d in &mut m.domains {
            *d = Domain::range(d.name.clone(), n);
        }
        m
    }

    pub fn fmt_atom(&self, atom: &super::GroundAtom) -> String {
        let p = &self.predicates[atom.predicate];
        let args: Vec<&str> = atom
            .args
            .iter()
            .zip(&p.arg_domains)
            .map(|(&c, &d)| self.domains[d].objects[c].as_str())
            .collect();
        format!("{}({})", p.name, args.join(","))
    }

    pub fn fmt_literal(&self, lit: &Literal, clause: &WeightedClause) -> String {
        let p = &self.predicates[lit.predicate];
        let args: Vec<String> = lit
            .args
            .iter()
            .zip(&p.arg_domains)
            .map(|(t, &d)| match t {
                Term::Var(v) => v.clone(),
                Term::Const(c) => self.domains[d].objects[*c].clone(),
            })
            .collect();
        let _ = clause;
        format!(
            "{}{}({})",
            if lit.positive { "" } else { "!" },
            p.name,
            args.join(",")
        )
    }

    pub fn fmt_clause(&self, clause: &WeightedClause) -> String {
        let lits: Vec<String> = clause
            .literals
            .iter()
            .map(|l| self.fmt_literal(l, clause))
            .collect();
        let cons: Vec<String> = clause
            .constraints
            .iter()
            .filter_map(|c| match c {
                Constraint::Eq(a, b) => Some(format!("{a} = {b}")),
                Constraint::Neq(a, b) => Some(format!("{a} != {b}")),
                Constraint::InDomain(..) => None,
            })
            .collect();
        let mut s = format!("{} :: {}", clause.weight, lits.join(" v "));
        if !cons.is_empty() {
            s.push_str(" ; ");
            s.push_str(&cons.join(", "));
        }
        s
    }
}

impl fmt::Display for Mln {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in &self.domains {
            writeln!(f, "domain {} = {{{}}}", d.name, d.objects.join(", "))?;
        }
        for p in &self.predicates {
            let ds: Vec<&str> = p
                .arg_domains
                .iter()
                .map(|&d| self.domains[d].name.as_str())
                .collect();
            writeln!(f, "predicate {}({})", p.name, ds.join(", "))?;
        }
        for c in &self.clauses {
            writeln!(f, "{}", self.fmt_clause(c))?;
        }
        Ok(())
    }
}
