//! Exhaustive enumeration over all worlds of a factor graph.

use super::factor_graph::FactorGraph;
use crate::error::{Error, Result};
use crate::numeric::log_sum_exp;

/// Default cap on the number of variables the enumerator accepts.
pub const DEFAULT_CAP: usize = 25;

fn check_cap(fg: &FactorGraph, cap: usize) -> Result<()> {
    if fg.variables.len() > cap {
        return Err(Error::OracleLimit {
            atoms: fg.variables.len(),
            cap,
        });
    }
    Ok(())
}

/// Calls `visit(world, log_score)` for every world, in binary counting order.
fn for_each_world(fg: &FactorGraph, mut visit: impl FnMut(&[bool], f64)) {
    let n = fg.variables.len();
    let mut world = vec![false; n];
    for bits in 0u64..(1u64 << n) {
        for (i, w) in world.iter_mut().enumerate() {
            *w = (bits >> i) & 1 == 1;
        }
        let s = fg.log_score(&world);
        visit(&world, s);
    }
}

pub fn brute_force_z_capped(fg: &FactorGraph, cap: usize) -> Result<f64> {
    check_cap(fg, cap)?;
    let mut scores = Vec::with_capacity(1 << fg.variables.len().min(20));
    let mut acc = f64::NEG_INFINITY;
    for_each_world(fg, |_, s| {
        scores.push(s);
        if scores.len() == 4096 {
            acc = log_sum_exp(&[acc, log_sum_exp(&scores)]);
            scores.clear();
        }
    });
    scores.push(acc);
    Ok(log_sum_exp(&scores))
}

/// Exact log partition function.
pub fn brute_force_z(fg: &FactorGraph) -> Result<f64> {
    brute_force_z_capped(fg, DEFAULT_CAP)
}

/// Exact normalized joint marginals over several variable scopes at once.
/// Table bit `p` is the value of `scope[p]`.
pub fn brute_force_marginals(
    fg: &FactorGraph,
    scopes: &[Vec<usize>],
    cap: usize,
) -> Result<Vec<Vec<f64>>> {
    check_cap(fg, cap)?;
    let log_z = brute_force_z_capped(fg, cap)?;
    let mut tables: Vec<Vec<f64>> = scopes.iter().map(|s| vec![0.0; 1 << s.len()]).collect();
    for_each_world(fg, |world, s| {
        let p = (s - log_z).exp();
        for (scope, t) in scopes.iter().zip(tables.iter_mut()) {
            let mut idx = 0;
            for (b, &v) in scope.iter().enumerate() {
                if world[v] {
                    idx |= 1 << b;
                }
            }
            t[idx] += p;
        }
    });
    for t in &mut tables {
        let s: f64 = t.iter().sum();
        t.iter_mut().for_each(|x| *x /= s);
    }
    Ok(tables)
}

pub fn brute_force_marginal(fg: &FactorGraph, scope: &[usize]) -> Result<Vec<f64>> {
    Ok(brute_force_marginals(fg, &[scope.to_vec()], DEFAULT_CAP)?.remove(0))
}

/// `P(v = true)` for every variable.
pub fn brute_force_atom_marginals(fg: &FactorGraph) -> Result<Vec<f64>> {
    let scopes: Vec<Vec<usize>> = (0..fg.variables.len()).map(|v| vec![v]).collect();
    Ok(brute_force_marginals(fg, &scopes, DEFAULT_CAP)?
        .into_iter()
        .map(|t| t[1])
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mln::parse_mln;
    use crate::oracle::ground_markov_network;

    #[test]
    fn independent_atoms_zero_weight() {
        let m = parse_mln("domain d={1,2}\npredicate R(d)\n0 :: R(x)").unwrap();
        let fg = ground_markov_network(&m);
        assert!((brute_force_z(&fg).unwrap() - 4f64.ln()).abs() < 1e-12);
        for p in brute_force_atom_marginals(&fg).unwrap() {
            assert!((p - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn two_clause_disjunction_partition() {
        // 16 worlds; each contributes 2^(satisfied ground clauses).
        let mut z = 0.0;
        for bits in 0u32..16 {
            let r = [bits & 1 == 1, bits & 2 == 2];
            let s = [bits & 4 == 4, bits & 8 == 8];
            let sat = (0..2)
                .flat_map(|x| (0..2).map(move |y| (x, y)))
                .filter(|&(x, y)| r[x] || s[y])
                .count();
            z += 2f64.powi(sat as i32);
        }
        assert_eq!(z, 161.0);
        let m = parse_mln(&format!(
            "domain d={{1,2}}\npredicate R(d)\npredicate S(d)\n{} :: R(x) v S(y)",
            2f64.ln()
        ))
        .unwrap();
        let fg = ground_markov_network(&m);
        assert!((brute_force_z(&fg).unwrap() - 161f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn logistic_unit_clause() {
        let w: f64 = 0.7;
        let m = parse_mln(&format!("domain d={{1}}\npredicate R(d)\n{w} :: R(x)")).unwrap();
        let fg = ground_markov_network(&m);
        let p = brute_force_atom_marginals(&fg).unwrap()[0];
        assert!((p - w.exp() / (1.0 + w.exp())).abs() < 1e-12);
    }

    #[test]
    fn cap_exceeded() {
        let m = parse_mln("domain d={1,2,3}\npredicate R(d,d)\n0 :: R(x,y)").unwrap();
        let fg = ground_markov_network(&m);
        assert!(matches!(
            brute_force_z_capped(&fg, 8),
            Err(Error::OracleLimit { atoms: 9, cap: 8 })
        ));
    }
}
