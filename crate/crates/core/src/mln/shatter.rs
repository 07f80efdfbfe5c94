//! Exchangeable normal form: clause shattering by equality pattern, atom
//! groups, and a brute-force ENF checker.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::csp::Csp;
use super::ground::{ground_clause, GroundAtom};
use super::model::{Constraint, Literal, Mln, PredicateId, Term, WeightedClause};
use crate::error::{Error, Result};
use crate::oracle::{brute_force_marginals, ground_markov_network};

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }
    fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut y = x;
        while self.0[y] != r {
            let n = self.0[y];
            self.0[y] = r;
            y = n;
        }
        r
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Symmetry classes of clause variables: two variables share a class when
/// they are linked through a common predicate argument position or a
/// constraint. Constants of different classes can be permuted independently
/// without changing the ground model.
pub fn variable_classes(mln: &Mln) -> Vec<BTreeMap<String, usize>> {
    let mut pos_base = Vec::with_capacity(mln.predicates.len());
    let mut n = 0;
    for p in &mln.predicates {
        pos_base.push(n);
        n += p.arity();
    }
    let mut var_nodes: Vec<BTreeMap<String, usize>> = Vec::new();
    for c in &mln.clauses {
        let mut m = BTreeMap::new();
        for v in c.vars() {
            m.insert(v, n);
            n += 1;
        }
        var_nodes.push(m);
    }
    let mut uf = UnionFind::new(n);
    for (ci, c) in mln.clauses.iter().enumerate() {
        for l in &c.literals {
            for (pos, t) in l.args.iter().enumerate() {
                if let Term::Var(v) = t {
                    uf.union(var_nodes[ci][v], pos_base[l.predicate] + pos);
                }
            }
        }
        for (a, b) in c.equalities().chain(c.inequalities()) {
            uf.union(var_nodes[ci][a], var_nodes[ci][b]);
        }
    }
    var_nodes
        .into_iter()
        .map(|m| m.into_iter().map(|(v, node)| (v, uf.find(node))).collect())
        .collect()
}

/// Set partitions of `0..n` as restricted growth strings, coarsest first.
pub fn set_partitions(n: usize) -> Vec<Vec<usize>> {
    fn rec(i: usize, n: usize, cur: &mut Vec<usize>, max: usize, out: &mut Vec<Vec<usize>>) {
        if i == n {
            out.push(cur.clone());
            return;
        }
        for b in 0..=max + usize::from(i > 0) {
            if i == 0 && b > 0 {
                break;
            }
            cur.push(b);
            rec(i + 1, n, cur, max.max(b), out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if n == 0 {
        out.push(Vec::new());
    } else {
        rec(0, n, &mut Vec::new(), 0, &mut out);
    }
    out
}

/// Splits every clause by the equality pattern of its linked variables (same
/// symmetry class, or same atom and domain), emitting one constrained clause
/// per satisfiable pattern.
pub fn shatter_to_enf(mln: &Mln) -> Mln {
    let classes = variable_classes(mln);
    let mut out = Vec::new();
    for (ci, clause) in mln.clauses.iter().enumerate() {
        // Variables sharing an atom are split as well, so repeated-argument
        // atoms always form their own groups.
        let vars = clause.vars();
        let mut local = UnionFind::new(vars.len());
        for (i, a) in vars.iter().enumerate() {
            for (j, b) in vars.iter().enumerate().skip(i + 1) {
                let same_atom = clause.literals.iter().any(|l| {
                    l.args.iter().any(|t| t.var() == Some(a.as_str()))
                        && l.args.iter().any(|t| t.var() == Some(b.as_str()))
                });
                if classes[ci][a] == classes[ci][b]
                    || (same_atom && clause.var_domain(a) == clause.var_domain(b))
                {
                    local.union(i, j);
                }
            }
        }
        let mut by_class: BTreeMap<usize, Vec<String>> = BTreeMap::new();
        for (i, v) in vars.iter().enumerate() {
            by_class.entry(local.find(i)).or_default().push(v.clone());
        }
        let groups: Vec<Vec<String>> = by_class.into_values().filter(|g| g.len() > 1).collect();
        if groups.is_empty() {
            out.push(clause.clone());
            continue;
        }
        let eqs: Vec<(String, String)> = clause
            .equalities()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect();
        let neqs: Vec<(String, String)> = clause
            .inequalities()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect();

        // Per class, the partitions consistent with the clause's own constraints.
        let mut options: Vec<Vec<Vec<usize>>> = Vec::new();
        for g in &groups {
            let idx = |v: &str| g.iter().position(|x| x == v);
            let ok: Vec<Vec<usize>> = set_partitions(g.len())
                .into_iter()
                .filter(|p| {
                    eqs.iter().all(|(a, b)| match (idx(a), idx(b)) {
                        (Some(i), Some(j)) => p[i] == p[j],
                        _ => true,
                    }) && neqs.iter().all(|(a, b)| match (idx(a), idx(b)) {
                        (Some(i), Some(j)) => p[i] != p[j],
                        _ => true,
                    })
                })
                .collect();
            options.push(ok);
        }

        let mut choice = vec![0usize; groups.len()];
        'outer: loop {
            let mut constraints: Vec<Constraint> = clause
                .constraints
                .iter()
                .filter(|c| matches!(c, Constraint::InDomain(..)))
                .cloned()
                .collect();
            let mut skip = false;
            for (gi, g) in groups.iter().enumerate() {
                if options[gi].is_empty() {
                    skip = true;
                    break;
                }
                let part = &options[gi][choice[gi]];
                let nblocks = part.iter().max().map_or(0, |m| m + 1);
                let mut reps: Vec<Option<&String>> = vec![None; nblocks];
                for (vi, &b) in part.iter().enumerate() {
                    match reps[b] {
                        None => reps[b] = Some(&g[vi]),
                        Some(r) => constraints.push(Constraint::Eq(r.clone(), g[vi].clone())),
                    }
                }
                for a in 0..nblocks {
                    for b in a + 1..nblocks {
                        constraints.push(Constraint::Neq(
                            reps[a].unwrap().clone(),
                            reps[b].unwrap().clone(),
                        ));
                    }
                }
            }
            if !skip {
                let c = WeightedClause {
                    literals: clause.literals.clone(),
                    weight: clause.weight,
                    constraints,
                };
                if Csp::for_clause(&c, mln).count() > 0 {
                    out.push(c);
                }
            }
            // odometer over per-class options
            for gi in (0..groups.len()).rev() {
                choice[gi] += 1;
                if choice[gi] < options[gi].len() {
                    continue 'outer;
                }
                choice[gi] = 0;
            }
            break;
        }
    }
    Mln {
        domains: mln.domains.clone(),
        predicates: mln.predicates.clone(),
        clauses: out,
    }
    .standardized()
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GroupSlot {
    Var(usize),
    Const(usize),
}

/// A set of exchangeable ground atoms: a predicate plus an argument pattern
/// (which positions share a variable, which are pinned to constants, and
/// which variable slots must differ).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AtomGroup {
    pub predicate: PredicateId,
    pub slots: Vec<GroupSlot>,
    pub distinct: Vec<(usize, usize)>,
}

impl AtomGroup {
    /// Group of the atoms a literal can produce under its clause's constraints.
    pub fn of_literal(clause: &WeightedClause, lit: &Literal) -> AtomGroup {
        let vars = clause.vars();
        let mut uf = UnionFind::new(vars.len());
        let vi = |v: &str| vars.iter().position(|x| x == v).expect("clause variable");
        for (a, b) in clause.equalities() {
            uf.union(vi(a), vi(b));
        }
        let mut canon: Vec<usize> = Vec::new();
        let mut slots = Vec::new();
        for t in &lit.args {
            match t {
                Term::Const(c) => slots.push(GroupSlot::Const(*c)),
                Term::Var(v) => {
                    let r = uf.find(vi(v));
                    let k = match canon.iter().position(|&x| x == r) {
                        Some(k) => k,
                        None => {
                            canon.push(r);
                            canon.len() - 1
                        }
                    };
                    slots.push(GroupSlot::Var(k));
                }
            }
        }
        let mut distinct = BTreeSet::new();
        for (a, b) in clause.inequalities() {
            let (ra, rb) = (uf.find(vi(a)), uf.find(vi(b)));
            if let (Some(ka), Some(kb)) = (
                canon.iter().position(|&x| x == ra),
                canon.iter().position(|&x| x == rb),
            ) {
                distinct.insert((ka.min(kb), ka.max(kb)));
            }
        }
        AtomGroup {
            predicate: lit.predicate,
            slots,
            distinct: distinct.into_iter().collect(),
        }
    }

    /// Whole-predicate group with pairwise-free arguments.
    pub fn whole(mln: &Mln, predicate: PredicateId) -> AtomGroup {
        AtomGroup {
            predicate,
            slots: (0..mln.predicates[predicate].arity())
                .map(GroupSlot::Var)
                .collect(),
            distinct: Vec::new(),
        }
    }

    pub fn n_slot_vars(&self) -> usize {
        self.slots
            .iter()
            .filter_map(|s| match s {
                GroupSlot::Var(k) => Some(k + 1),
                _ => None,
            })
            .max()
            .unwrap_or(0)
    }

    pub fn contains(&self, atom: &GroundAtom) -> bool {
        if atom.predicate != self.predicate || atom.args.len() != self.slots.len() {
            return false;
        }
        let mut val: Vec<Option<usize>> = vec![None; self.n_slot_vars()];
        for (s, &a) in self.slots.iter().zip(&atom.args) {
            match s {
                GroupSlot::Const(c) if *c != a => return false,
                GroupSlot::Const(_) => {}
                GroupSlot::Var(k) => match val[*k] {
                    Some(v) if v != a => return false,
                    Some(_) => {}
                    None => val[*k] = Some(a),
                },
            }
        }
        self.distinct.iter().all(|&(a, b)| val[a] != val[b])
    }

    /// Member atoms in ascending order.
    pub fn atoms(&self, mln: &Mln) -> Vec<GroundAtom> {
        super::ground::predicate_groundings(mln, self.predicate)
            .into_iter()
            .filter(|a| self.contains(a))
            .collect()
    }

    pub fn size(&self, mln: &Mln) -> usize {
        self.atoms(mln).len()
    }

    pub fn label(&self, mln: &Mln) -> String {
        GroupLabel { group: self, mln }.to_string()
    }
}

struct GroupLabel<'a> {
    group: &'a AtomGroup,
    mln: &'a Mln,
}

impl fmt::Display for GroupLabel<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let g = self.group;
        let p = &self.mln.predicates[g.predicate];
        let args: Vec<String> = g
            .slots
            .iter()
            .zip(&p.arg_domains)
            .map(|(s, &d)| match s {
                GroupSlot::Var(k) => format!("v{k}"),
                GroupSlot::Const(c) => self.mln.domains[d].objects[*c].clone(),
            })
            .collect();
        write!(f, "{}({})", p.name, args.join(","))?;
        if !g.distinct.is_empty() {
            let ds: Vec<String> = g
                .distinct
                .iter()
                .map(|(a, b)| format!("v{a}!=v{b}"))
                .collect();
            write!(f, "[{}]", ds.join(","))?;
        }
        Ok(())
    }
}

/// Distinct atom groups of a model, in order of first appearance.
pub fn atom_groups(mln: &Mln) -> Vec<AtomGroup> {
    let mut out: Vec<AtomGroup> = Vec::new();
    for c in &mln.clauses {
        for l in &c.literals {
            let g = AtomGroup::of_literal(c, l);
            if !out.contains(&g) {
                out.push(g);
            }
        }
    }
    out
}

/// Brute-force check of exchangeable normal form: within each clause, every
/// ground formula has the same joint distribution over its atoms under the
/// literal-wise renaming.
pub fn is_enf(mln: &Mln, max_atoms: usize) -> Result<bool> {
    let fg = ground_markov_network(mln);
    if fg.variables.len() > max_atoms {
        return Err(Error::OracleLimit {
            atoms: fg.variables.len(),
            cap: max_atoms,
        });
    }
    for (ci, clause) in mln.clauses.iter().enumerate() {
        let grounds = ground_clause(mln, ci, clause);
        if grounds.len() < 2 {
            continue;
        }
        let mut scopes = Vec::new();
        let mut shapes = Vec::new();
        for g in &grounds {
            let mut scope: Vec<usize> = Vec::new();
            let mut shape = Vec::new();
            for (_, a) in &g.literals {
                let v = fg.var_index(a).expect("ground atom in network");
                let p = match scope.iter().position(|&s| s == v) {
                    Some(p) => p,
                    None => {
                        scope.push(v);
                        scope.len() - 1
                    }
                };
                shape.push(p);
            }
            scopes.push(scope);
            shapes.push(shape);
        }
        if shapes.iter().any(|s| *s != shapes[0]) {
            return Ok(false);
        }
        let tables = brute_force_marginals(&fg, &scopes, max_atoms)?;
        for t in &tables[1..] {
            if t.iter().zip(&tables[0]).any(|(a, b)| (a - b).abs() > 1e-9) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mln::{ground_formulas, parse_mln};

    const SELF_FRIEND: &str = "domain d = {a1, a2}\npredicate S(d)\npredicate F(d, d)\n\
                               1.3 :: S(x) v !S(y) v !F(x, y)\n";

    #[test]
    fn bell_numbers() {
        let counts: Vec<usize> = (0..6).map(|n| set_partitions(n).len()).collect();
        assert_eq!(counts, vec![1, 1, 2, 5, 15, 52]);
    }

    #[test]
    fn self_friend_splits_in_two() {
        let m = parse_mln(SELF_FRIEND).unwrap();
        let s = shatter_to_enf(&m);
        assert_eq!(s.clauses.len(), 2);
        assert!(s.clauses.iter().all(|c| c.weight == 1.3));
        assert_eq!(s.clauses[0].equalities().count(), 1);
        assert_eq!(s.clauses[1].inequalities().count(), 1);
        assert!(!is_enf(&m, 16).unwrap());
        assert!(is_enf(&s, 16).unwrap());
    }

    #[test]
    fn independent_clause_unchanged() {
        let m =
            parse_mln("domain d={1,2}\npredicate R(d)\npredicate S(d)\n1 :: R(x) v S(y)").unwrap();
        assert_eq!(shatter_to_enf(&m), m);
    }

    #[test]
    fn ternary_predicate_gets_bell_three() {
        let m = parse_mln("domain d={1,2,3}\npredicate R(d,d,d)\n0.4 :: R(x,y,z)").unwrap();
        let s = shatter_to_enf(&m);
        assert_eq!(s.clauses.len(), 5);
        let mut before: Vec<String> = ground_formulas(&m)
            .iter()
            .map(|g| format!("{:?}{}", g.literals, g.weight))
            .collect();
        let mut after: Vec<String> = ground_formulas(&s)
            .iter()
            .map(|g| format!("{:?}{}", g.literals, g.weight))
            .collect();
        before.sort();
        after.sort();
        assert_eq!(before, after);
    }

    #[test]
    fn single_ground_clause_is_enf() {
        let m = parse_mln("domain d={1}\npredicate R(d)\n1 :: R(x)").unwrap();
        assert!(is_enf(&m, 4).unwrap());
    }

    #[test]
    fn oracle_limit() {
        let m = parse_mln("domain d={1,2,3,4,5}\npredicate R(d,d)\n1 :: R(x,y)").unwrap();
        assert!(matches!(is_enf(&m, 10), Err(Error::OracleLimit { .. })));
    }

    #[test]
    fn group_membership() {
        let m = shatter_to_enf(&parse_mln(SELF_FRIEND).unwrap());
        let gs = atom_groups(&m);
        // S, F diagonal, S (same group), F off-diagonal
        assert_eq!(gs.len(), 3);
        let sizes: Vec<usize> = gs.iter().map(|g| g.size(&m)).collect();
        assert_eq!(sizes, vec![2, 2, 2]);
    }
}
