use crate::error::{Error, Result};
use crate::mln::GroundAtom;
use crate::numeric::{binomial, log_binomial, log_sum_exp, CLAMP};

/// Largest group a counted message may be expanded over.
pub const MAX_EXPAND: usize = 20;

/// A message over the atoms of a child region, stored per assignment.
#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    /// One value per assignment; bit `p` of the index is `atoms[p]`.
    Tabular {
        atoms: Vec<GroundAtom>,
        values: Vec<f64>,
    },
    /// One value per number of true atoms, shared by every assignment with
    /// that count. `group` is a global atom group of `n` atoms.
    Counted {
        group: usize,
        n: usize,
        values: Vec<f64>,
    },
}

impl Message {
    pub fn uniform_tabular(atoms: Vec<GroundAtom>) -> Message {
        let k = 1usize << atoms.len();
        Message::Tabular {
            atoms,
            values: vec![1.0 / k as f64; k],
        }
    }

    pub fn uniform_counted(group: usize, n: usize) -> Message {
        Message::Counted {
            group,
            n,
            values: vec![0.5f64.powi(n as i32); n + 1],
        }
    }

    pub fn values(&self) -> &[f64] {
        match self {
            Message::Tabular { values, .. } | Message::Counted { values, .. } => values,
        }
    }

    pub fn values_mut(&mut self) -> &mut Vec<f64> {
        match self {
            Message::Tabular { values, .. } | Message::Counted { values, .. } => values,
        }
    }

    /// Log multiplicity of each entry: the number of assignments it stands for.
    pub fn log_weights(&self) -> Vec<f64> {
        match self {
            Message::Tabular { values, .. } => vec![0.0; values.len()],
            Message::Counted { n, .. } => (0..=*n).map(|k| log_binomial(*n, k)).collect(),
        }
    }

    /// Total mass over all assignments.
    pub fn mass(&self) -> f64 {
        match self {
            Message::Tabular { values, .. } => values.iter().sum(),
            Message::Counted { n, values, .. } => values
                .iter()
                .enumerate()
                .map(|(k, v)| binomial(*n, k) * v)
                .sum(),
        }
    }

    /// Tabular form over `atoms` (the group's atoms in order).
    pub fn expand(&self, atoms: &[GroundAtom]) -> Result<Message> {
        match self {
            Message::Tabular { .. } => Ok(self.clone()),
            Message::Counted { n, values, .. } => {
                if atoms.len() != *n {
                    return Err(Error::Model(format!(
                        "expected {n} atoms, got {}",
                        atoms.len()
                    )));
                }
                if *n > MAX_EXPAND {
                    return Err(Error::Intractable(format!(
                        "tabular message over {n} atoms"
                    )));
                }
                Ok(Message::Tabular {
                    atoms: atoms.to_vec(),
                    values: (0..1usize << n)
                        .map(|x| values[x.count_ones() as usize])
                        .collect(),
                })
            }
        }
    }

    /// Counted form of a tabular message that depends on counts only.
    pub fn collapse(&self, group: usize, tol: f64) -> Result<Message> {
        match self {
            Message::Counted { .. } => Ok(self.clone()),
            Message::Tabular { atoms, values } => {
                let n = atoms.len();
                let mut out: Vec<Option<f64>> = vec![None; n + 1];
                for (x, &v) in values.iter().enumerate() {
                    let k = x.count_ones() as usize;
                    match out[k] {
                        None => out[k] = Some(v),
                        Some(u) if (u - v).abs() <= tol => {}
                        Some(_) => return Err(Error::Model("message is not exchangeable".into())),
                    }
                }
                Ok(Message::Counted {
                    group,
                    n,
                    values: out
                        .into_iter()
                        .map(|v| v.expect("every count occurs"))
                        .collect(),
                })
            }
        }
    }
}

/// Normalizes `new` (clamped) and interpolates geometrically with `old`,
/// with entries weighted by the number of assignments they stand for.
pub fn damp_weighted(old: &[f64], new: &[f64], log_w: &[f64], damping: f64) -> Vec<f64> {
    let s: Vec<f64> = new
        .iter()
        .zip(log_w)
        .map(|(v, w)| v.max(CLAMP).ln() + w)
        .collect();
    let ls = log_sum_exp(&s);
    let logs: Vec<f64> = new
        .iter()
        .zip(old)
        .map(|(n, o)| (1.0 - damping) * (n.max(CLAMP).ln() - ls) + damping * o.max(CLAMP).ln())
        .collect();
    let weighted: Vec<f64> = logs.iter().zip(log_w).map(|(l, w)| l + w).collect();
    let z = log_sum_exp(&weighted);
    logs.iter().map(|v| (v - z).exp().max(CLAMP)).collect()
}

/// `KL(p || q)` in nats between two distributions over the same support.
/// Zero entries of `p` contribute nothing; `q` is clamped away from zero.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(&a, _)| a > 0.0)
        .map(|(&a, &b)| a * (a / b.max(CLAMP)).ln())
        .sum()
}

/// KL between the Bernoulli distributions of two single-atom marginals.
pub fn bernoulli_kl(p: f64, q: f64) -> f64 {
    kl_divergence(&[1.0 - p, p], &[1.0 - q, q])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::damp;

    #[test]
    fn counted_damp_matches_tabular() {
        let atoms: Vec<GroundAtom> = (0..3).map(|i| GroundAtom::new(0, vec![i])).collect();
        let old = Message::Counted {
            group: 0,
            n: 3,
            values: vec![0.3, 0.1, 0.05, 0.05],
        };
        let new = Message::Counted {
            group: 0,
            n: 3,
            values: vec![0.2, 0.4, 0.1, 0.9],
        };
        let d = damp_weighted(old.values(), new.values(), &old.log_weights(), 0.3);
        let t = damp(
            old.expand(&atoms).unwrap().values(),
            new.expand(&atoms).unwrap().values(),
            0.3,
        );
        for (x, v) in t.iter().enumerate() {
            assert!((v - d[x.count_ones() as usize]).abs() < 1e-15);
        }
    }

    #[test]
    fn uniform_counted_has_unit_mass() {
        for n in 0..12 {
            assert!((Message::uniform_counted(0, n).mass() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn expand_then_collapse() {
        let atoms: Vec<GroundAtom> = (0..4).map(|i| GroundAtom::new(2, vec![i])).collect();
        let m = Message::Counted {
            group: 5,
            n: 4,
            values: vec![0.1, 0.2, 0.3, 0.4, 0.5],
        };
        assert_eq!(m.expand(&atoms).unwrap().collapse(5, 0.0).unwrap(), m);
        let mut t = m.expand(&atoms).unwrap();
        t.values_mut()[1] += 0.01;
        assert!(t.collapse(5, 1e-9).is_err());
    }

    #[test]
    fn expansion_is_capped() {
        let atoms: Vec<GroundAtom> = (0..21).map(|i| GroundAtom::new(0, vec![i])).collect();
        assert!(Message::uniform_counted(0, 21).expand(&atoms).is_err());
    }

    #[test]
    fn kl_closed_forms() {
        assert_eq!(kl_divergence(&[0.3, 0.7], &[0.3, 0.7]), 0.0);
        let want = 0.5 * 2f64.ln() + 0.5 * (2.0f64 / 3.0).ln();
        assert!((kl_divergence(&[0.5, 0.5], &[0.25, 0.75]) - want).abs() < 1e-15);
        let big = kl_divergence(&[1.0, 0.0], &[0.0, 1.0]);
        assert!(big.is_finite() && big > 600.0);
        assert!(bernoulli_kl(0.3, 0.4) > 0.0);
    }
}
