//! Upward (partition function) and downward (state marginal) passes over a
//! compiled circuit, cached on each node's context.

use super::compile::{Circuit, ClauseEval, Contribution, PartMode};
use crate::numeric::log_sum_exp;

/// Per-node additive log-potentials over node states, e.g. incoming
/// messages. Missing entries mean no potential.
pub type Extra = [Option<Vec<f64>>];

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub log_z: f64,
    /// Normalized distribution over each node's states (for decomposed
    /// nodes: over the states of one copy).
    pub state_probs: Vec<Vec<f64>>,
}

impl Circuit {
    fn set_context(&self, v: usize, key: usize, cur: &mut [usize]) {
        let nd = &self.nodes[v];
        for (&u, &st) in nd.context.iter().zip(&nd.ctx_strides) {
            cur[u] = (key / st) % self.nodes[u].n_states();
        }
    }

    fn child_key(&self, c: usize, cur: &[usize]) -> usize {
        let nd = &self.nodes[c];
        nd.context
            .iter()
            .zip(&nd.ctx_strides)
            .map(|(&u, &st)| cur[u] * st)
            .sum()
    }

    fn part_value(&self, node: usize, part: usize, cur: &[usize]) -> u32 {
        self.nodes[node].states[cur[node]][part]
    }

    fn clause_weight(&self, v: usize, cur: &[usize]) -> f64 {
        let mut total = 0.0;
        for pc in &self.nodes[v].clauses {
            let sat = match &pc.eval {
                ClauseEval::Product { total, lits } => {
                    let mut unsat: u64 = 1;
                    for l in lits {
                        let mut t: u64 = 0;
                        for (node, part, contrib) in &l.terms {
                            let val = self.part_value(*node, *part, cur);
                            t += match contrib {
                                Contribution::Prefix(arr) => arr[val as usize] as u64,
                                Contribution::Mask(m) => (val & m).count_ones() as u64,
                            };
                        }
                        unsat *= if l.positive { l.size - t } else { t };
                        if unsat == 0 {
                            break;
                        }
                    }
                    total - unsat
                }
                ClauseEval::General(gs) => gs
                    .iter()
                    .filter(|lits| {
                        lits.iter().any(|r| {
                            let p = &self.nodes[r.node].parts[r.part];
                            p.atom_value(self.part_value(r.node, r.part, cur), r.idx) == r.positive
                        })
                    })
                    .count() as u64,
            };
            total += pc.weight * sat as f64;
        }
        total
    }

    /// Log weight of every state of `v` given the context in `cur`, with
    /// children folded in from `up`.
    fn and_values(
        &self,
        v: usize,
        cur: &mut [usize],
        extra: Option<&Extra>,
        up: &[Vec<f64>],
        out: &mut Vec<f64>,
    ) {
        self.and_values_with(v, cur, extra, None, out, &|c, k| {
            self.nodes[c].copies() as f64 * up[c][k]
        });
    }

    fn and_values_with(
        &self,
        v: usize,
        cur: &mut [usize],
        extra: Option<&Extra>,
        pin: Option<&[f64]>,
        out: &mut Vec<f64>,
        child: &dyn Fn(usize, usize) -> f64,
    ) {
        let nd = &self.nodes[v];
        out.clear();
        for s in 0..nd.n_states() {
            cur[v] = s;
            let mut val = nd.base[s];
            if let Some(Some(e)) = extra.map(|e| &e[v]) {
                val += e[s];
            }
            if let Some(p) = pin {
                val += p[s];
            }
            if val == f64::NEG_INFINITY {
                out.push(val);
                continue;
            }
            val += self.clause_weight(v, cur);
            for &c in &nd.children {
                val += child(c, self.child_key(c, cur));
            }
            out.push(val);
        }
    }

    fn upward(&self, extra: Option<&Extra>) -> Vec<Vec<f64>> {
        let n = self.nodes.len();
        let mut up: Vec<Vec<f64>> = vec![Vec::new(); n];
        let mut cur = vec![0usize; n];
        let mut buf = Vec::new();
        for &v in self.preorder.iter().rev() {
            let nd = &self.nodes[v];
            let mut table = Vec::with_capacity(nd.ctx_size);
            for key in 0..nd.ctx_size {
                self.set_context(v, key, &mut cur);
                self.and_values(v, &mut cur, extra, &up, &mut buf);
                table.push(log_sum_exp(&buf));
            }
            up[v] = table;
        }
        up
    }

    fn root_log_z(&self, up: &[Vec<f64>]) -> f64 {
        let mut z = self.free_atoms as f64 * std::f64::consts::LN_2;
        for &r in &self.roots {
            z += self.nodes[r].copies() as f64 * up[r][0];
        }
        z
    }

    /// Log partition function under optional extra potentials.
    pub fn log_z(&self, extra: Option<&Extra>) -> f64 {
        let up = self.upward(extra);
        self.root_log_z(&up)
    }

    /// Log partition function with `pinned` potentials applied to the
    /// representative copy only: below a decomposed node one copy sees them
    /// and the other copies keep the plain weights.
    pub fn log_z_pinned(&self, extra: Option<&Extra>, pinned: &Extra) -> f64 {
        let plain = self.upward(extra);
        let n = self.nodes.len();
        let mut touched = vec![false; n];
        for &v in self.preorder.iter().rev() {
            touched[v] = pinned[v].is_some() || self.nodes[v].children.iter().any(|&c| touched[c]);
        }
        let mut up: Vec<Vec<f64>> = vec![Vec::new(); n];
        let mut cur = vec![0usize; n];
        let mut buf = Vec::new();
        let mix = |c: usize, k: usize, up: &[Vec<f64>]| -> f64 {
            let copies = self.nodes[c].copies();
            if !touched[c] {
                copies as f64 * plain[c][k]
            } else if copies == 1 {
                up[c][k]
            } else {
                (copies - 1) as f64 * plain[c][k] + up[c][k]
            }
        };
        for &v in self.preorder.iter().rev() {
            if !touched[v] {
                continue;
            }
            let nd = &self.nodes[v];
            let mut table = Vec::with_capacity(nd.ctx_size);
            for key in 0..nd.ctx_size {
                self.set_context(v, key, &mut cur);
                self.and_values_with(
                    v,
                    &mut cur,
                    extra,
                    pinned[v].as_deref(),
                    &mut buf,
                    &|c, k| mix(c, k, &up),
                );
                table.push(log_sum_exp(&buf));
            }
            up[v] = table;
        }
        let mut z = self.free_atoms as f64 * std::f64::consts::LN_2;
        for &r in &self.roots {
            z += mix(r, 0, &up);
        }
        z
    }

    /// Log partition function and per-node state marginals.
    pub fn evaluate(&self, extra: Option<&Extra>) -> Evaluation {
        let up = self.upward(extra);
        let n = self.nodes.len();
        let mut reach: Vec<Vec<f64>> = self.nodes.iter().map(|nd| vec![0.0; nd.ctx_size]).collect();
        let mut state_probs: Vec<Vec<f64>> = self
            .nodes
            .iter()
            .map(|nd| vec![0.0; nd.n_states()])
            .collect();
        for &r in &self.roots {
            reach[r][0] = 1.0;
        }
        let mut cur = vec![0usize; n];
        let mut buf = Vec::new();
        for &v in &self.preorder {
            let nd = &self.nodes[v];
            for key in 0..nd.ctx_size {
                let mass = reach[v][key];
                let u = up[v][key];
                if mass == 0.0 || u == f64::NEG_INFINITY {
                    continue;
                }
                self.set_context(v, key, &mut cur);
                self.and_values(v, &mut cur, extra, &up, &mut buf);
                for (s, &a) in buf.iter().enumerate() {
                    let p = mass * (a - u).exp();
                    if p == 0.0 {
                        continue;
                    }
                    state_probs[v][s] += p;
                    cur[v] = s;
                    for &c in &nd.children {
                        let k = self.child_key(c, &cur);
                        reach[c][k] += p;
                    }
                }
            }
        }
        for t in &mut state_probs {
            let s: f64 = t.iter().sum();
            if s > 0.0 {
                t.iter_mut().for_each(|x| *x /= s);
            }
        }
        Evaluation {
            log_z: self.root_log_z(&up),
            state_probs,
        }
    }

    /// Leaves of the expanded search tree: count values and enumerated
    /// assignments along every path, one copy per decomposition.
    pub fn leaf_count(&self) -> u128 {
        fn leaves(c: &Circuit, v: usize) -> u128 {
            let nd = &c.nodes[v];
            let below: u128 = nd.children.iter().map(|&ch| leaves(c, ch)).sum();
            nd.n_states() as u128 * below.max(1)
        }
        self.roots.iter().map(|&r| leaves(self, r)).sum()
    }

    /// `P(atom = true)` for the atom at `(node, part, idx)`.
    pub fn atom_marginal(&self, eval: &Evaluation, node: usize, part: usize, idx: usize) -> f64 {
        let nd = &self.nodes[node];
        let p = &nd.parts[part];
        let n = p.atoms.len() as f64;
        nd.states
            .iter()
            .zip(&eval.state_probs[node])
            .map(|(vals, &pr)| {
                let v = vals[part];
                pr * match p.mode {
                    PartMode::Count => v as f64 / n,
                    PartMode::Enum => ((v >> idx) & 1) as f64,
                }
            })
            .sum()
    }

    /// Distribution of the value of one part (true count, or assignment
    /// for enumerated parts).
    pub fn part_distribution(&self, eval: &Evaluation, node: usize, part: usize) -> Vec<f64> {
        let nd = &self.nodes[node];
        let mut out = vec![0.0; nd.parts[part].radix()];
        for (vals, &pr) in nd.states.iter().zip(&eval.state_probs[node]) {
            out[vals[part] as usize] += pr;
        }
        out
    }
}
