use std::collections::{BTreeMap, HashMap};

use super::message::{damp_weighted, Message};
use crate::error::{Error, Result};
use crate::lifted::{
    atom_positions, joint_marginal, Circuit, Evaluation, LiftedModel, PartMode, PlanOptions,
};
use crate::mln::{ground_atoms, GroundAtom};
use crate::numeric::{binomial, log_sum_exp, CLAMP};
use crate::oracle::PropagationConfig;
use crate::regions::{make_lifted_region, LiftedRegionGraph};

/// How a child region's messages are represented.
#[derive(Debug, Clone, PartialEq)]
enum ChildKind {
    /// Ground copies of a single atom.
    Atom,
    /// All atoms of a group in one copy, exchanged by true count.
    Counted { n: usize },
    /// All atoms of a group in one copy, exchanged per assignment.
    Joint { atoms: Vec<GroundAtom> },
}

/// A message potential attached to a top region's representative copy.
#[derive(Debug, Clone)]
enum Attach {
    /// The same per-atom potential on every atom of a local group.
    Unary { group: usize, class: usize },
    /// Potential on the true count of the only part of `node`.
    Count { node: usize, class: usize },
    /// Potential per assignment of `atoms`, read off the states of `node`.
    Joint {
        node: usize,
        class: usize,
        index: Vec<usize>,
    },
}

/// Where the belief of a top region is read for an outgoing class.
#[derive(Debug, Clone)]
enum Readout {
    Atom(Vec<((usize, usize, usize), f64)>),
    Count { node: usize, n: usize },
    Joint(Vec<GroundAtom>),
}

#[derive(Debug, Clone)]
struct Top {
    region: usize,
    model: LiftedModel,
    circuit: Circuit,
    attach: Vec<Attach>,
    out: Vec<(usize, Readout)>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EngineOptions {
    /// Exchange per-assignment messages over counted groups instead of
    /// count-space ones.
    pub expand_counted: bool,
}

/// Parent-to-child propagation over a two-level lifted region graph: top
/// regions without parents, child regions over one atom group without
/// children.
#[derive(Debug, Clone)]
pub struct LgbpState<'a> {
    lrg: &'a LiftedRegionGraph,
    tops: Vec<Top>,
    kinds: Vec<Option<ChildKind>>,
    /// Classes into each child region.
    into: Vec<Vec<usize>>,
    /// One message per edge class.
    pub messages: Vec<Message>,
}

/// Final state of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct LgbpResult {
    /// `P(true)` per global atom group held by some region.
    pub group_marginals: BTreeMap<usize, f64>,
    /// `P(true)` per ground atom; atoms outside every region get 0.5.
    pub marginals: BTreeMap<GroundAtom, f64>,
    /// Normalized belief of every child region, per assignment (per true
    /// count for counted regions).
    pub child_beliefs: BTreeMap<usize, Vec<f64>>,
    pub iterations: usize,
    pub converged: bool,
    pub residuals: Vec<f64>,
}

fn fail<T>(msg: String) -> Result<T> {
    Err(Error::Attachment(msg))
}

impl<'a> LgbpState<'a> {
    /// Uniform messages on every edge class.
    pub fn new(lrg: &'a LiftedRegionGraph, opts: &EngineOptions) -> Result<LgbpState<'a>> {
        let n = lrg.regions.len();
        let mut kinds = vec![None; n];
        let mut into = vec![Vec::new(); n];
        for r in 0..n {
            let parents = lrg.parents(r);
            let children = lrg.children(r);
            if parents.is_empty() {
                continue;
            }
            if !children.is_empty() || parents.iter().any(|&p| !lrg.parents(p).is_empty()) {
                return Err(Error::RegionGraph(
                    "propagation needs a two-level graph".into(),
                ));
            }
            let reg = &lrg.regions[r];
            if reg.group.is_none() {
                return Err(Error::RegionGraph(format!(
                    "child region {r} is not over one atom group"
                )));
            }
            let atoms: Vec<GroundAtom> = reg.copies[0].atoms.iter().cloned().collect();
            kinds[r] = Some(if reg.is_ground() {
                if atoms.len() != 1 {
                    return Err(Error::RegionGraph(format!(
                        "ground child region {r} holds several atoms"
                    )));
                }
                ChildKind::Atom
            } else if opts.expand_counted {
                ChildKind::Joint { atoms }
            } else {
                ChildKind::Counted { n: atoms.len() }
            });
            into[r] = lrg.classes_into(r);
        }
        let messages = lrg
            .classes
            .iter()
            .map(|c| {
                let child = lrg.edges[c.edge].child;
                let atoms: Vec<GroundAtom> =
                    lrg.regions[child].copies[0].atoms.iter().cloned().collect();
                match kinds[child].as_ref().expect("child region") {
                    ChildKind::Counted { n } => {
                        Message::uniform_counted(lrg.regions[child].group.unwrap(), *n)
                    }
                    _ => Message::uniform_tabular(atoms),
                }
            })
            .collect();
        let mut tops = Vec::new();
        for r in 0..n {
            if kinds[r].is_none() {
                tops.push(Self::top(lrg, r, &kinds, opts)?);
            }
        }
        Ok(LgbpState {
            lrg,
            tops,
            kinds,
            into,
            messages,
        })
    }

    fn top(
        lrg: &LiftedRegionGraph,
        r: usize,
        kinds: &[Option<ChildKind>],
        opts: &EngineOptions,
    ) -> Result<Top> {
        let reg = &lrg.regions[r];
        let (model, circuit) = if opts.expand_counted && !reg.is_ground() {
            // enumerate every group exchanged per assignment
            let enumerate: Vec<usize> = lrg.rep_children[r]
                .iter()
                .filter_map(|&(k, _)| {
                    let c = lrg.edges[lrg.classes[k].edge].child;
                    match kinds[c] {
                        Some(ChildKind::Joint { .. }) => {
                            let h = &lrg.global.groups[lrg.regions[c].group?];
                            reg.model.groups.iter().position(|g| g == h)
                        }
                        _ => None,
                    }
                })
                .collect();
            let opts = PlanOptions {
                enumerate,
                ..Default::default()
            };
            let re = make_lifted_region(&lrg.mln, &reg.clause, &reg.grounded, None, None, &opts)?;
            (re.model, re.circuit)
        } else {
            (reg.model.clone(), reg.circuit.clone())
        };
        let index: HashMap<&GroundAtom, usize> = model
            .atoms
            .iter()
            .enumerate()
            .map(|(i, a)| (a, i))
            .collect();
        let mut attach = Vec::new();
        let mut unary: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
        let mut out: BTreeMap<usize, Readout> = BTreeMap::new();
        for &(k, u) in &lrg.rep_children[r] {
            let c = lrg.edges[lrg.classes[k].edge].child;
            let atoms: Vec<GroundAtom> = lrg.regions[c].copies[u].atoms.iter().cloned().collect();
            let local = |a: &GroundAtom| {
                index.get(a).copied().ok_or_else(|| {
                    Error::Attachment(format!("{} is not in region {r}", lrg.mln.fmt_atom(a)))
                })
            };
            match kinds[c].as_ref().expect("child region") {
                ChildKind::Atom => {
                    let i = local(&atoms[0])?;
                    let g = model.atom_group[i];
                    let e = unary.entry(g).or_insert((k, 0));
                    if e.0 != k {
                        return fail(format!(
                            "atoms of {} reach different edge classes",
                            model.group_label(g)
                        ));
                    }
                    e.1 += 1;
                    out.entry(k).or_insert_with(|| {
                        Readout::Atom(atom_positions(&model, &circuit, i).unwrap_or_default())
                    });
                }
                ChildKind::Counted { n } => {
                    let g = model.atom_group[local(&atoms[0])?];
                    let node = circuit.node_of_group[g];
                    let nd = &circuit.nodes[node];
                    if nd.parts.len() != 1
                        || nd.parts[0].mode != PartMode::Count
                        || nd.parts[0].atoms.len() != *n
                    {
                        return fail(format!(
                            "{} is not counted whole in region {r}",
                            model.group_label(g)
                        ));
                    }
                    attach.push(Attach::Count { node, class: k });
                    out.insert(k, Readout::Count { node, n: *n });
                }
                ChildKind::Joint { atoms: own } => {
                    let g = model.atom_group[local(&atoms[0])?];
                    let node = circuit.node_of_group[g];
                    let nd = &circuit.nodes[node];
                    if nd.parts.iter().any(|p| p.mode != PartMode::Enum) {
                        return fail(format!(
                            "{} is not enumerated in region {r}",
                            model.group_label(g)
                        ));
                    }
                    let mut bit = HashMap::new();
                    for (pi, p) in nd.parts.iter().enumerate() {
                        for (idx, &i) in p.atoms.iter().enumerate() {
                            let j =
                                own.iter()
                                    .position(|a| *a == model.atoms[i])
                                    .ok_or_else(|| {
                                        Error::Attachment("joint message atom missing".into())
                                    })?;
                            bit.insert((pi, idx), j);
                        }
                    }
                    if bit.len() != own.len() {
                        return fail(format!("{} is split in region {r}", model.group_label(g)));
                    }
                    let index = nd
                        .states
                        .iter()
                        .map(|vals| {
                            let mut x = 0usize;
                            for (&(pi, idx), &j) in &bit {
                                x |= (((vals[pi] >> idx) & 1) as usize) << j;
                            }
                            x
                        })
                        .collect();
                    attach.push(Attach::Joint {
                        node,
                        class: k,
                        index,
                    });
                    out.insert(k, Readout::Joint(own.clone()));
                }
            }
        }
        for (g, (k, seen)) in unary {
            if seen != model.group_atoms[g].len() {
                return fail(format!(
                    "only part of {} is attached in region {r}",
                    model.group_label(g)
                ));
            }
            attach.push(Attach::Unary { group: g, class: k });
        }
        let mut outs: Vec<(usize, Readout)> = out.into_iter().collect();
        for (k, ro) in &mut outs {
            if let Readout::Atom(pos) = ro {
                if pos.is_empty() {
                    return fail(format!("class {k} has no readable atom"));
                }
            }
        }
        let own_classes =
            (0..lrg.classes.len()).filter(|&k| lrg.edges[lrg.classes[k].edge].parent == r);
        for k in own_classes {
            if !outs.iter().any(|(j, _)| *j == k) {
                return fail(format!("edge class {k} has no child copy under region {r}"));
            }
        }
        Ok(Top {
            region: r,
            model,
            circuit,
            attach,
            out: outs,
        })
    }

    /// Log potential a child copy reached through class `k` receives inside
    /// its parent: every message into the child except the parent's own.
    fn potential(&self, k: usize) -> Vec<f64> {
        let c = self.lrg.edges[self.lrg.classes[k].edge].child;
        let mut pot = vec![0.0; self.messages[k].values().len()];
        for &e in &self.into[c] {
            let ex = self.lrg.classes[e].gp as f64 - if e == k { 1.0 } else { 0.0 };
            if ex == 0.0 {
                continue;
            }
            for (p, v) in pot.iter_mut().zip(self.messages[e].values()) {
                *p += ex * v.max(CLAMP).ln();
            }
        }
        pot
    }

    fn extras(&self, top: &Top) -> Vec<Option<Vec<f64>>> {
        let c = &top.circuit;
        let mut extra: Vec<Option<Vec<f64>>> = vec![None; c.nodes.len()];
        for a in &top.attach {
            let (node, add): (usize, Vec<f64>) = match a {
                Attach::Unary { group, class } => {
                    let pot = self.potential(*class);
                    let node = c.node_of_group[*group];
                    let nd = &c.nodes[node];
                    let add = nd
                        .states
                        .iter()
                        .map(|vals| {
                            nd.parts
                                .iter()
                                .zip(vals)
                                .map(|(p, &v)| {
                                    let t = match p.mode {
                                        PartMode::Count => v as f64,
                                        PartMode::Enum => v.count_ones() as f64,
                                    };
                                    t * pot[1] + (p.atoms.len() as f64 - t) * pot[0]
                                })
                                .sum()
                        })
                        .collect();
                    (node, add)
                }
                Attach::Count { node, class } => {
                    let pot = self.potential(*class);
                    let add = c.nodes[*node]
                        .states
                        .iter()
                        .map(|vals| pot[vals[0] as usize])
                        .collect();
                    (*node, add)
                }
                Attach::Joint { node, class, index } => {
                    let pot = self.potential(*class);
                    (*node, index.iter().map(|&x| pot[x]).collect())
                }
            };
            let slot = extra[node].get_or_insert_with(|| vec![0.0; add.len()]);
            for (s, v) in slot.iter_mut().zip(add) {
                *s += v;
            }
        }
        extra
    }

    /// Marginal of the top region's belief on the child copy of each
    /// outgoing class, per child assignment.
    fn top_marginals(&self, top: &Top) -> Result<Vec<(usize, Vec<f64>)>> {
        let extra = self.extras(top);
        let eval: Evaluation = top.circuit.evaluate(Some(extra.as_slice()));
        top.out
            .iter()
            .map(|(k, ro)| {
                let m = match ro {
                    Readout::Atom(pos) => {
                        let p: f64 = pos
                            .iter()
                            .map(|&((n, q, i), w)| w * top.circuit.atom_marginal(&eval, n, q, i))
                            .sum();
                        vec![1.0 - p, p]
                    }
                    Readout::Count { node, n } => top
                        .circuit
                        .part_distribution(&eval, *node, 0)
                        .iter()
                        .enumerate()
                        .map(|(j, p)| p / binomial(*n, j))
                        .collect(),
                    Readout::Joint(atoms) => {
                        joint_marginal(&top.model, &top.circuit, atoms, Some(extra.as_slice()))?
                            .to_table(atoms)?
                    }
                };
                Ok((*k, m))
            })
            .collect()
    }

    /// Normalized belief of child region `c`, per assignment.
    pub fn child_belief(&self, c: usize) -> Vec<f64> {
        let first = &self.messages[self.into[c][0]];
        let mut t = vec![0.0; first.values().len()];
        for &e in &self.into[c] {
            let gp = self.lrg.classes[e].gp as f64;
            for (x, v) in t.iter_mut().zip(self.messages[e].values()) {
                *x += gp * v.max(CLAMP).ln();
            }
        }
        let w = first.log_weights();
        let weighted: Vec<f64> = t.iter().zip(&w).map(|(a, b)| a + b).collect();
        let z = log_sum_exp(&weighted);
        t.iter().map(|v| (v - z).exp()).collect()
    }

    /// One synchronous sweep; returns the max absolute message change.
    pub fn sweep(&mut self, damping: f64) -> Result<f64> {
        let mut marg: Vec<Option<Vec<f64>>> = vec![None; self.messages.len()];
        for top in &self.tops {
            for (k, m) in self.top_marginals(top)? {
                marg[k] = Some(m);
            }
        }
        let beliefs: BTreeMap<usize, Vec<f64>> = (0..self.kinds.len())
            .filter(|&r| self.kinds[r].is_some())
            .map(|r| (r, self.child_belief(r)))
            .collect();
        let mut residual: f64 = 0.0;
        let mut next = self.messages.clone();
        for (k, msg) in next.iter_mut().enumerate() {
            let c = self.lrg.edges[self.lrg.classes[k].edge].child;
            let old = self.messages[k].values();
            let mk = marg[k].as_ref().expect("every class has a parent marginal");
            let b = &beliefs[&c];
            let new: Vec<f64> = (0..old.len())
                .map(|x| old[x] * mk[x] / b[x].max(CLAMP))
                .collect();
            let m = damp_weighted(old, &new, &self.messages[k].log_weights(), damping);
            for (a, o) in m.iter().zip(old) {
                residual = residual.max((a - o).abs());
            }
            *msg.values_mut() = m;
        }
        self.messages = next;
        Ok(residual)
    }

    /// Single-atom marginals from the smallest region holding each group,
    /// ties going to the lower region index.
    pub fn marginals(&self) -> Result<(BTreeMap<usize, f64>, BTreeMap<usize, Vec<f64>>)> {
        let lrg = self.lrg;
        let mut best: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
        for r in 0..lrg.regions.len() {
            let size = lrg.regions[r].copy_size();
            for h in lrg.region_groups(r) {
                let e = best.entry(h).or_insert((size, r));
                if size < e.0 {
                    *e = (size, r);
                }
            }
        }
        let beliefs: BTreeMap<usize, Vec<f64>> = (0..self.kinds.len())
            .filter(|&r| self.kinds[r].is_some())
            .map(|r| (r, self.child_belief(r)))
            .collect();
        let mut evals: HashMap<usize, Evaluation> = HashMap::new();
        let mut out = BTreeMap::new();
        for (&h, &(_, r)) in &best {
            let p = match &self.kinds[r] {
                Some(ChildKind::Atom) => beliefs[&r][1],
                Some(ChildKind::Counted { n }) => beliefs[&r]
                    .iter()
                    .enumerate()
                    .map(|(k, b)| binomial(*n, k) * b * k as f64 / *n as f64)
                    .sum(),
                Some(ChildKind::Joint { atoms }) => {
                    let n = atoms.len();
                    beliefs[&r]
                        .iter()
                        .enumerate()
                        .map(|(x, b)| b * x.count_ones() as f64 / n as f64)
                        .sum()
                }
                None => {
                    let top = self
                        .tops
                        .iter()
                        .find(|t| t.region == r)
                        .expect("top region");
                    let eval = evals
                        .entry(r)
                        .or_insert_with(|| top.circuit.evaluate(Some(self.extras(top).as_slice())));
                    let target = &lrg.global.groups[h];
                    let i = top
                        .model
                        .atoms
                        .iter()
                        .position(|a| target.contains(a))
                        .ok_or_else(|| Error::Attachment(format!("region {r} lacks group {h}")))?;
                    atom_positions(&top.model, &top.circuit, i)?
                        .into_iter()
                        .map(|((n, q, k), w)| w * top.circuit.atom_marginal(eval, n, q, k))
                        .sum()
                }
            };
            out.insert(h, p);
        }
        Ok((out, beliefs))
    }
}

/// Runs synchronous sweeps until the residual drops below tolerance or the
/// iteration budget runs out.
pub fn run_lgbp(
    lrg: &LiftedRegionGraph,
    config: &PropagationConfig,
    opts: &EngineOptions,
) -> Result<LgbpResult> {
    config.validate()?;
    let mut state = LgbpState::new(lrg, opts)?;
    let mut residuals = Vec::new();
    let mut converged = false;
    while residuals.len() < config.max_iterations {
        let r = state.sweep(config.damping)?;
        residuals.push(r);
        if r < config.tolerance {
            converged = true;
            break;
        }
    }
    if state.messages.is_empty() {
        converged = true;
    }
    let (group_marginals, child_beliefs) = state.marginals()?;
    let index: HashMap<&GroundAtom, usize> = lrg
        .global
        .atoms
        .iter()
        .enumerate()
        .map(|(i, a)| (a, i))
        .collect();
    let mut marginals = BTreeMap::new();
    for a in ground_atoms(&lrg.mln) {
        let p = index
            .get(&a)
            .and_then(|&i| group_marginals.get(&lrg.global.atom_group[i]).copied())
            .unwrap_or(0.5);
        marginals.insert(a, p);
    }
    Ok(LgbpResult {
        group_marginals,
        marginals,
        child_beliefs,
        iterations: residuals.len(),
        converged,
        residuals,
    })
}
