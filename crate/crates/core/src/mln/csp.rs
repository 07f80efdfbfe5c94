//! Constraint problems over logical variables: domain membership plus
//! pairwise equality and inequality.

use std::collections::BTreeMap;

use super::model::{Constraint, Mln, WeightedClause};

/// A satisfying assignment of constants to logical variables.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Substitution {
    pub bindings: BTreeMap<String, usize>,
}

impl Substitution {
    pub fn get(&self, var: &str) -> Option<usize> {
        self.bindings.get(var).copied()
    }
}

/// Index-based form of a constraint problem. Variables are sorted by name;
/// solutions are vectors of constant indices in that order.
#[derive(Debug, Clone)]
pub struct Csp {
    pub vars: Vec<String>,
    pub sizes: Vec<usize>,
    pub eq: Vec<(usize, usize)>,
    pub neq: Vec<(usize, usize)>,
    pub fixed: Vec<Option<usize>>,
}

impl Csp {
    /// Problem over `vars` with domain sizes taken from their membership
    /// constraints in `constraints`.
    pub fn new(vars: &[String], constraints: &[Constraint], mln: &Mln) -> Csp {
        let mut vars = vars.to_vec();
        vars.sort();
        vars.dedup();
        let idx = |v: &str| vars.iter().position(|x| x == v);
        let mut sizes = vec![0; vars.len()];
        let mut eq = Vec::new();
        let mut neq = Vec::new();
        for c in constraints {
            match c {
                Constraint::InDomain(v, d) => {
                    if let Some(i) = idx(v) {
                        sizes[i] = mln.domains[*d].len();
                    }
                }
                Constraint::Eq(a, b) => {
                    if let (Some(i), Some(j)) = (idx(a), idx(b)) {
                        eq.push((i, j));
                    }
                }
                Constraint::Neq(a, b) => {
                    if let (Some(i), Some(j)) = (idx(a), idx(b)) {
                        neq.push((i, j));
                    }
                }
            }
        }
        let fixed = vec![None; vars.len()];
        Csp {
            vars,
            sizes,
            eq,
            neq,
            fixed,
        }
    }

    pub fn for_clause(clause: &WeightedClause, mln: &Mln) -> Csp {
        Csp::new(&clause.vars(), &clause.constraints, mln)
    }

    pub fn var_index(&self, v: &str) -> Option<usize> {
        self.vars.iter().position(|x| x == v)
    }

    /// Freezes `var` to `value`; unknown variables are ignored.
    pub fn fix(&mut self, var: &str, value: usize) {
        if let Some(i) = self.var_index(var) {
            self.fixed[i] = Some(value);
        }
    }

    fn consistent(&self, assign: &[usize], upto: usize) -> bool {
        let v = upto;
        let val = assign[v];
        if let Some(f) = self.fixed[v] {
            if f != val {
                return false;
            }
        }
        for &(a, b) in &self.eq {
            let other = if a == v && b < v {
                b
            } else if b == v && a < v {
                a
            } else {
                continue;
            };
            if assign[other] != val {
                return false;
            }
        }
        for &(a, b) in &self.neq {
            let other = if a == v && b < v {
                b
            } else if b == v && a < v {
                a
            } else if a == v && b == v {
                return false;
            } else {
                continue;
            };
            if assign[other] == val {
                return false;
            }
        }
        true
    }

    /// All solutions in lexicographic order of constant indices.
    pub fn solve(&self) -> Vec<Vec<usize>> {
        let n = self.vars.len();
        let mut out = Vec::new();
        if n == 0 {
            out.push(Vec::new());
            return out;
        }
        let mut assign = vec![0usize; n];
        self.backtrack(0, &mut assign, &mut |a| out.push(a.to_vec()));
        out
    }

    fn backtrack(&self, depth: usize, assign: &mut [usize], emit: &mut dyn FnMut(&[usize])) {
        if depth == assign.len() {
            emit(assign);
            return;
        }
        let range: Vec<usize> = match self.fixed[depth] {
            Some(f) if f < self.sizes[depth] => vec![f],
            Some(_) => Vec::new(),
            None => (0..self.sizes[depth]).collect(),
        };
        for val in range {
            assign[depth] = val;
            if self.consistent(assign, depth) {
                self.backtrack(depth + 1, assign, emit);
            }
        }
    }

    /// Number of solutions, factored over connected components of the
    /// constraint graph.
    pub fn count(&self) -> u128 {
        let n = self.vars.len();
        let mut comp: Vec<usize> = (0..n).collect();
        fn find(c: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while c[r] != r {
                r = c[r];
            }
            let mut y = x;
            while c[y] != r {
                let next = c[y];
                c[y] = r;
                y = next;
            }
            r
        }
        for &(a, b) in self.eq.iter().chain(&self.neq) {
            let (ra, rb) = (find(&mut comp, a), find(&mut comp, b));
            comp[ra] = rb;
        }
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for v in 0..n {
            let r = find(&mut comp, v);
            groups.entry(r).or_default().push(v);
        }
        let mut total: u128 = 1;
        for members in groups.values() {
            let sub = self.restrict(members);
            let c = if members.len() == 1 {
                match sub.fixed[0] {
                    Some(f) => u128::from(f < sub.sizes[0]),
                    None => sub.sizes[0] as u128,
                }
            } else {
                let mut k = 0u128;
                let mut assign = vec![0usize; members.len()];
                sub.backtrack(0, &mut assign, &mut |_| k += 1);
                k
            };
            total *= c;
            if total == 0 {
                return 0;
            }
        }
        total
    }

    fn restrict(&self, members: &[usize]) -> Csp {
        let pos = |v: usize| members.iter().position(|&m| m == v);
        let pairs = |ps: &[(usize, usize)]| {
            ps.iter()
                .filter_map(|&(a, b)| Some((pos(a)?, pos(b)?)))
                .collect()
        };
        Csp {
            vars: members.iter().map(|&m| self.vars[m].clone()).collect(),
            sizes: members.iter().map(|&m| self.sizes[m]).collect(),
            eq: pairs(&self.eq),
            neq: pairs(&self.neq),
            fixed: members.iter().map(|&m| self.fixed[m]).collect(),
        }
    }

    pub fn to_substitution(&self, sol: &[usize]) -> Substitution {
        Substitution {
            bindings: self.vars.iter().cloned().zip(sol.iter().copied()).collect(),
        }
    }
}

/// All solutions of the problem `⟨vars, constraints⟩`, ordered
/// lexicographically by (variable name, constant index).
pub fn solve_csp(vars: &[String], constraints: &[Constraint], mln: &Mln) -> Vec<Substitution> {
    let csp = Csp::new(vars, constraints, mln);
    csp.solve().iter().map(|s| csp.to_substitution(s)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mln::model::{Domain, Mln};

    fn two_const() -> Mln {
        Mln {
            domains: vec![Domain::new("d", vec!["a1".into(), "a2".into()]).unwrap()],
            predicates: vec![],
            clauses: vec![],
        }
    }

    fn xy(extra: Option<Constraint>) -> Vec<Constraint> {
        let mut c = vec![
            Constraint::InDomain("x".into(), 0),
            Constraint::InDomain("y".into(), 0),
        ];
        c.extend(extra);
        c
    }

    #[test]
    fn inequality_pair() {
        let m = two_const();
        let sols = solve_csp(
            &["x".into(), "y".into()],
            &xy(Some(Constraint::Neq("x".into(), "y".into()))),
            &m,
        );
        let got: Vec<(usize, usize)> = sols
            .iter()
            .map(|s| (s.get("x").unwrap(), s.get("y").unwrap()))
            .collect();
        assert_eq!(got, vec![(0, 1), (1, 0)]);
    }

    #[test]
    fn equality_pair() {
        let m = two_const();
        let sols = solve_csp(
            &["x".into(), "y".into()],
            &xy(Some(Constraint::Eq("x".into(), "y".into()))),
            &m,
        );
        let got: Vec<(usize, usize)> = sols
            .iter()
            .map(|s| (s.get("x").unwrap(), s.get("y").unwrap()))
            .collect();
        assert_eq!(got, vec![(0, 0), (1, 1)]);
    }

    #[test]
    fn free_product_and_count() {
        let mut m = two_const();
        m.domains[0] = Domain::range("d", 4);
        let vars: Vec<String> = ["x", "y", "z"].iter().map(|s| s.to_string()).collect();
        let cons: Vec<Constraint> = vars
            .iter()
            .map(|v| Constraint::InDomain(v.clone(), 0))
            .collect();
        assert_eq!(solve_csp(&vars, &cons, &m).len(), 64);
        let mut csp = Csp::new(&vars, &cons, &m);
        assert_eq!(csp.count(), 64);
        csp.neq.push((0, 1));
        csp.neq.push((1, 2));
        assert_eq!(csp.count(), 4 * 3 * 3);
        assert_eq!(csp.count() as usize, csp.solve().len());
        csp.fix("y", 2);
        assert_eq!(csp.count(), 9);
        assert_eq!(csp.solve().len(), 9);
    }

    #[test]
    fn deterministic_order() {
        let m = two_const();
        let a = solve_csp(&["y".into(), "x".into()], &xy(None), &m);
        let b = solve_csp(&["x".into(), "y".into()], &xy(None), &m);
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
    }
}
