use std::collections::{BTreeMap, HashMap};

use super::compile::{compile, Circuit, PartMode, PosClass};
use super::eval::{Evaluation, Extra};
use super::factorization::LiftedFactorization;
use super::model::LiftedModel;
use super::plan::default_factorization;
use crate::error::{Error, Result};
use crate::mln::{GroundAtom, Mln};
use crate::numeric::{log_binomial, log_sum_exp};

/// Log partition function of `mln` under factorization `e`.
pub fn evaluate_z(model: &LiftedModel, e: &LiftedFactorization) -> Result<f64> {
    Ok(compile(model, e)?.log_z(None))
}

/// Number of leaves of the expanded search tree of `e`.
pub fn leaf_count(model: &LiftedModel, e: &LiftedFactorization) -> Result<u128> {
    Ok(compile(model, e)?.leaf_count())
}

/// Root-to-leaf group paths of a factorization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JdIndex {
    pub paths: Vec<Vec<usize>>,
}

pub fn jd_sets(circuit: &Circuit) -> JdIndex {
    let mut paths = Vec::new();
    let mut stack: Vec<(usize, Vec<usize>)> =
        circuit.roots.iter().rev().map(|&r| (r, vec![])).collect();
    while let Some((v, mut path)) = stack.pop() {
        path.push(circuit.nodes[v].group);
        let nd = &circuit.nodes[v];
        if nd.children.is_empty() {
            paths.push(path);
        } else {
            for &c in nd.children.iter().rev() {
                stack.push((c, path.clone()));
            }
        }
    }
    JdIndex { paths }
}

fn atom_index(model: &LiftedModel) -> HashMap<&GroundAtom, usize> {
    model
        .atoms
        .iter()
        .enumerate()
        .map(|(i, a)| (a, i))
        .collect()
}

fn is_ancestor_or_self(c: &Circuit, u: usize, mut v: usize) -> bool {
    loop {
        if u == v {
            return true;
        }
        match c.nodes[v].parent {
            Some(p) => v = p,
            None => return false,
        }
    }
}

fn path_to(c: &Circuit, mut v: usize) -> Vec<usize> {
    let mut p = vec![v];
    while let Some(u) = c.nodes[v].parent {
        p.push(u);
        v = u;
    }
    p.reverse();
    p
}

fn key_at(classes: &[PosClass], args: &[usize], len: usize) -> Vec<usize> {
    (0..len)
        .map(|i| {
            args[classes
                .iter()
                .position(|c| *c == PosClass::Key(i))
                .expect("key position")]
        })
        .collect()
}

/// Whether the joint over `atoms` is read off one root-to-leaf path of a
/// single decomposition copy. Atoms outside every group are independent of
/// the rest and always accessible.
pub fn jd_contains(model: &LiftedModel, circuit: &Circuit, atoms: &[GroundAtom]) -> Result<bool> {
    let index = atom_index(model);
    let mut ids = Vec::new();
    for a in atoms {
        match index.get(a) {
            Some(&i) => ids.push(i),
            None if model.free_atoms.contains(a) => {}
            None => {
                return Err(Error::Model(format!(
                    "{} is not an atom of the model",
                    model.mln.fmt_atom(a)
                )))
            }
        }
    }
    if ids.is_empty() {
        return Ok(true);
    }
    let nodes: Vec<usize> = ids
        .iter()
        .map(|&i| circuit.node_of_group[model.atom_group[i]])
        .collect();
    let deepest = *nodes
        .iter()
        .max_by_key(|&&v| path_to(circuit, v).len())
        .expect("non-empty");
    if !nodes
        .iter()
        .all(|&u| is_ancestor_or_self(circuit, u, deepest))
    {
        return Ok(false);
    }
    for u in path_to(circuit, deepest) {
        let Some(d) = &circuit.nodes[u].decomposition else {
            continue;
        };
        let mut key: Option<Vec<usize>> = None;
        for (&i, &v) in ids.iter().zip(&nodes) {
            if !is_ancestor_or_self(circuit, u, v) {
                continue;
            }
            let k = key_at(
                &d.classes[&model.atom_group[i]],
                &model.atoms[i].args,
                d.rep_key.len(),
            );
            match &key {
                Some(prev) if *prev != k => return Ok(false),
                Some(_) => {}
                None => key = Some(k),
            }
        }
    }
    Ok(true)
}

/// Maps `src` values onto `dst` values with a permutation of the domain
/// that touches as little else as possible.
fn permutation(src: &[usize], dst: &[usize]) -> impl Fn(usize) -> usize {
    let mut map: BTreeMap<usize, usize> = BTreeMap::new();
    for (&s, &d) in src.iter().zip(dst) {
        map.insert(s, d);
    }
    let free_src: Vec<usize> = src.iter().copied().filter(|s| !dst.contains(s)).collect();
    let free_dst: Vec<usize> = dst.iter().copied().filter(|d| !src.contains(d)).collect();
    for (&d, &s) in free_dst.iter().zip(&free_src) {
        map.insert(d, s);
    }
    move |x| *map.get(&x).unwrap_or(&x)
}

/// Most weighted atom tuples a symmetric average may expand to.
const MAX_ORBIT: usize = 1 << 12;

/// Maps `args` of an atom of group `g` into the representative copy of the
/// decomposition at `u`.
fn rep_step(
    model: &LiftedModel,
    circuit: &Circuit,
    u: usize,
    g: usize,
    predicate: usize,
    args: &mut [usize],
) {
    let Some(d) = &circuit.nodes[u].decomposition else {
        return;
    };
    let Some(cls) = d.classes.get(&g) else { return };
    let key = key_at(cls, args, d.rep_key.len());
    if key == d.rep_key {
        return;
    }
    let doms = &model.mln.predicates[predicate].arg_domains;
    let mut per_dom: BTreeMap<usize, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
    for (k, c) in cls.iter().enumerate() {
        if let PosClass::Key(j) = c {
            let e = per_dom.entry(doms[k]).or_default();
            if !e.0.contains(&key[*j]) {
                e.0.push(key[*j]);
                e.1.push(d.rep_key[*j]);
            }
        }
    }
    let perms: BTreeMap<usize, _> = per_dom
        .into_iter()
        .map(|(dom, (s, t))| (dom, permutation(&s, &t)))
        .collect();
    for (k, c) in cls.iter().enumerate() {
        if matches!(c, PosClass::Key(_) | PosClass::Moved) {
            if let Some(p) = perms.get(&doms[k]) {
                args[k] = p(args[k]);
            }
        }
    }
}

/// Every injective map from `from` into `into`.
fn injections(from: &[usize], into: &[usize]) -> Vec<BTreeMap<usize, usize>> {
    let mut out = vec![BTreeMap::new()];
    for &f in from {
        let mut next = Vec::new();
        for m in &out {
            for &t in into {
                if !m.values().any(|&x| x == t) {
                    let mut m2 = m.clone();
                    m2.insert(f, t);
                    next.push(m2);
                }
            }
        }
        out = next;
    }
    out
}

/// Weighted tuples of represented atoms whose average joint equals the
/// joint of `ids`: decompositions map onto the representative copy and
/// counted nodes average over permutations of their counted values.
fn canonical_tuples(
    model: &LiftedModel,
    circuit: &Circuit,
    index: &HashMap<&GroundAtom, usize>,
    ids: &[usize],
) -> Result<Vec<(Vec<usize>, f64)>> {
    if ids.is_empty() {
        return Ok(vec![(Vec::new(), 1.0)]);
    }
    let deepest = ids
        .iter()
        .map(|&i| circuit.node_of_group[model.atom_group[i]])
        .max_by_key(|&v| path_to(circuit, v).len())
        .expect("non-empty");
    let mut tuples: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
    tuples.insert(ids.to_vec(), 1.0);
    for u in path_to(circuit, deepest) {
        let mut next: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
        for (tuple, w) in tuples {
            let mut args: Vec<Vec<usize>> =
                tuple.iter().map(|&i| model.atoms[i].args.clone()).collect();
            for (a, &i) in args.iter_mut().zip(&tuple) {
                rep_step(
                    model,
                    circuit,
                    u,
                    model.atom_group[i],
                    model.atoms[i].predicate,
                    a,
                );
            }
            let maps = match &circuit.nodes[u].symmetry {
                None => vec![BTreeMap::new()],
                Some(sym) => {
                    let mut seen = Vec::new();
                    for (a, &i) in args.iter().zip(&tuple) {
                        for &p in sym
                            .positions
                            .get(&model.atom_group[i])
                            .into_iter()
                            .flatten()
                        {
                            if sym.values.contains(&a[p]) && !seen.contains(&a[p]) {
                                seen.push(a[p]);
                            }
                        }
                    }
                    injections(&seen, &sym.values)
                }
            };
            let share = w / maps.len() as f64;
            for m in &maps {
                let mapped: Vec<usize> = args
                    .iter()
                    .zip(&tuple)
                    .map(|(a, &i)| {
                        let mut a = a.clone();
                        if let Some(sym) = &circuit.nodes[u].symmetry {
                            for &p in sym
                                .positions
                                .get(&model.atom_group[i])
                                .into_iter()
                                .flatten()
                            {
                                if let Some(&t) = m.get(&a[p]) {
                                    a[p] = t;
                                }
                            }
                        }
                        index[&GroundAtom::new(model.atoms[i].predicate, a)]
                    })
                    .collect();
                *next.entry(mapped).or_insert(0.0) += share;
            }
            if next.len() > MAX_ORBIT {
                return Err(Error::Intractable(format!(
                    "symmetric average over {} atom tuples",
                    next.len()
                )));
            }
        }
        tuples = next;
    }
    Ok(tuples.into_iter().collect())
}

/// Represented positions standing in for model atom `i`, with weights: the
/// atom's marginal is the weighted average of theirs.
pub fn atom_positions(
    model: &LiftedModel,
    circuit: &Circuit,
    i: usize,
) -> Result<Vec<((usize, usize, usize), f64)>> {
    let index = atom_index(model);
    positions_with(model, circuit, &index, i)
}

fn positions_with(
    model: &LiftedModel,
    circuit: &Circuit,
    index: &HashMap<&GroundAtom, usize>,
    i: usize,
) -> Result<Vec<((usize, usize, usize), f64)>> {
    canonical_tuples(model, circuit, index, &[i])?
        .into_iter()
        .map(|(t, w)| {
            let pos = circuit.atom_pos[t[0]].ok_or_else(|| {
                Error::Model(format!(
                    "{} has no represented position",
                    model.mln.fmt_atom(&model.atoms[i])
                ))
            })?;
            Ok((pos, w))
        })
        .collect()
}

/// `P(atom = true)` for every model atom, in model order.
pub fn atom_marginals(
    model: &LiftedModel,
    circuit: &Circuit,
    eval: &Evaluation,
) -> Result<Vec<f64>> {
    let index = atom_index(model);
    (0..model.atoms.len())
        .map(|i| {
            Ok(positions_with(model, circuit, &index, i)?
                .into_iter()
                .map(|((n, p, k), w)| w * circuit.atom_marginal(eval, n, p, k))
                .sum())
        })
        .collect()
}

/// Joint marginal over a JD-accessible atom set.
#[derive(Debug, Clone, PartialEq)]
pub enum JointMarginal {
    /// Requested atoms are whole counted parts: value per count tuple, for
    /// each single assignment with those counts (so entries weighted by
    /// their multiplicities sum to one). Index is mixed radix over `sizes`.
    Count {
        parts: Vec<Vec<GroundAtom>>,
        sizes: Vec<usize>,
        values: Vec<f64>,
    },
    /// Table over the requested atoms; bit `p` is atom `p`.
    Tabular {
        atoms: Vec<GroundAtom>,
        table: Vec<f64>,
    },
}

impl JointMarginal {
    /// Table over `atoms` (bit `p` is atom `p`); `atoms` must be exactly
    /// the requested set, in any order.
    pub fn to_table(&self, atoms: &[GroundAtom]) -> Result<Vec<f64>> {
        let m = atoms.len();
        let mut out = vec![0.0; 1 << m];
        let find = |a: &GroundAtom| {
            atoms
                .iter()
                .position(|b| b == a)
                .ok_or_else(|| Error::Model("atom set differs from the request".into()))
        };
        match self {
            JointMarginal::Tabular { atoms: own, table } => {
                if own.len() != m {
                    return Err(Error::Model("atom set differs from the request".into()));
                }
                let map: Vec<usize> = own.iter().map(find).collect::<Result<_>>()?;
                for (pat, &v) in table.iter().enumerate() {
                    let idx: usize = map
                        .iter()
                        .enumerate()
                        .map(|(i, &j)| ((pat >> i) & 1) << j)
                        .sum();
                    out[idx] = v;
                }
            }
            JointMarginal::Count {
                parts,
                sizes,
                values,
            } => {
                let maps: Vec<Vec<usize>> = parts
                    .iter()
                    .map(|p| p.iter().map(find).collect::<Result<Vec<_>>>())
                    .collect::<Result<_>>()?;
                if maps.iter().map(Vec::len).sum::<usize>() != m {
                    return Err(Error::Model("atom set differs from the request".into()));
                }
                for (pat, x) in out.iter_mut().enumerate() {
                    let mut idx = 0;
                    let mut stride = 1;
                    for (map, &n) in maps.iter().zip(sizes) {
                        let k = map.iter().filter(|&&j| (pat >> j) & 1 == 1).count();
                        idx += k * stride;
                        stride *= n + 1;
                    }
                    *x = values[idx];
                }
            }
        }
        Ok(out)
    }
}

/// Normalized joint over `atoms`, with optional extra node potentials.
pub fn joint_marginal(
    model: &LiftedModel,
    circuit: &Circuit,
    atoms: &[GroundAtom],
    extra: Option<&Extra>,
) -> Result<JointMarginal> {
    if !jd_contains(model, circuit, atoms)? {
        return Err(Error::NotInJd(format!(
            "{{{}}}",
            atoms
                .iter()
                .map(|a| model.mln.fmt_atom(a))
                .collect::<Vec<_>>()
                .join(", ")
        )));
    }
    for (i, a) in atoms.iter().enumerate() {
        if atoms[..i].contains(a) {
            return Err(Error::Model(format!(
                "atom {} requested twice",
                model.mln.fmt_atom(a)
            )));
        }
    }
    let index = atom_index(model);
    let ids: Vec<usize> = atoms.iter().filter_map(|a| index.get(a).copied()).collect();
    let tuples = canonical_tuples(model, circuit, &index, &ids)?;
    let single = tuples.len() == 1;
    let mut mixed: Option<Vec<f64>> = None;
    for (tuple, w) in tuples {
        // position of each requested atom; free atoms get None
        let mut it = tuple.into_iter();
        let pos: Vec<Option<(usize, usize, usize)>> = atoms
            .iter()
            .map(|a| {
                index.get(a).map(|_| {
                    circuit.atom_pos[it.next().expect("tuple entry")].expect("represented atom")
                })
            })
            .collect();
        match joint_at(circuit, atoms, &pos, extra, single)? {
            JointMarginal::Tabular { table, .. } if !single => {
                let acc = mixed.get_or_insert_with(|| vec![0.0; table.len()]);
                for (x, y) in acc.iter_mut().zip(&table) {
                    *x += w * y;
                }
            }
            j => return Ok(j),
        }
    }
    Ok(JointMarginal::Tabular {
        atoms: atoms.to_vec(),
        table: mixed.expect("at least one tuple"),
    })
}

fn joint_at(
    circuit: &Circuit,
    atoms: &[GroundAtom],
    pos: &[Option<(usize, usize, usize)>],
    extra: Option<&Extra>,
    allow_count: bool,
) -> Result<JointMarginal> {
    let mut involved: Vec<usize> = pos.iter().flatten().map(|p| p.0).collect();
    involved.sort_unstable();
    involved.dedup();

    // joint over the involved nodes' states
    let radices: Vec<usize> = involved
        .iter()
        .map(|&v| circuit.nodes[v].n_states())
        .collect();
    let total: usize = radices.iter().product();
    if total > 1 << 20 {
        return Err(Error::Intractable(format!(
            "joint over {total} node configurations"
        )));
    }
    let mut joint = vec![0.0; total];
    if involved.len() == 1 {
        joint = circuit.evaluate(extra).state_probs[involved[0]].clone();
    } else if total > 0 {
        let mut logs = Vec::with_capacity(total);
        for combo in 0..total {
            let mut forced: Vec<Option<Vec<f64>>> = vec![None; circuit.nodes.len()];
            let mut rest = combo;
            for (&v, &r) in involved.iter().zip(&radices) {
                let s = rest % r;
                rest /= r;
                let mut t = vec![f64::NEG_INFINITY; r];
                t[s] = 0.0;
                forced[v] = Some(t);
            }
            logs.push(circuit.log_z_pinned(extra, &forced));
        }
        let z = log_sum_exp(&logs);
        joint = logs.iter().map(|l| (l - z).exp()).collect();
    }
    let state_of = |combo: usize, v: usize| -> usize {
        let mut rest = combo;
        for (&u, &r) in involved.iter().zip(&radices) {
            if u == v {
                return rest % r;
            }
            rest /= r;
        }
        unreachable!("node not involved")
    };

    // count space when the request is exactly a set of whole counted parts
    let mut parts: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    let mut atom_of: HashMap<(usize, usize, usize), usize> = HashMap::new();
    for (a, p) in pos.iter().enumerate() {
        if let Some(p) = p {
            parts.entry((p.0, p.1)).or_default().push(p.2);
            atom_of.insert(*p, a);
        }
    }
    let whole_counts = pos.iter().all(Option::is_some)
        && parts.iter().all(|(&(v, p), idxs)| {
            let part = &circuit.nodes[v].parts[p];
            part.mode == PartMode::Count && idxs.len() == part.atoms.len()
        });
    if allow_count && whole_counts && !parts.is_empty() {
        let keys: Vec<(usize, usize)> = parts.keys().copied().collect();
        let sizes: Vec<usize> = keys
            .iter()
            .map(|&(v, p)| circuit.nodes[v].parts[p].atoms.len())
            .collect();
        let n_vals: usize = sizes.iter().map(|s| s + 1).product();
        let mut values = vec![0.0; n_vals];
        for (combo, &pr) in joint.iter().enumerate() {
            let mut idx = 0;
            let mut stride = 1;
            let mut mult = 0.0;
            for (&(v, p), &n) in keys.iter().zip(&sizes) {
                let k = circuit.nodes[v].states[state_of(combo, v)][p] as usize;
                idx += k * stride;
                stride *= n + 1;
                mult += log_binomial(n, k);
            }
            values[idx] += pr * (-mult).exp();
        }
        let parts = keys
            .iter()
            .map(|&(v, p)| {
                let idxs = &parts[&(v, p)];
                let mut order: Vec<usize> = idxs.iter().map(|&i| atom_of[&(v, p, i)]).collect();
                order.sort_unstable();
                order.into_iter().map(|a| atoms[a].clone()).collect()
            })
            .collect();
        return Ok(JointMarginal::Count {
            parts,
            sizes,
            values,
        });
    }

    // tabular: hypergeometric spread inside counted parts, canonical values
    // where the caller averages over the node's symmetry
    let m = atoms.len();
    if m > 20 {
        return Err(Error::Intractable(format!("tabular joint over {m} atoms")));
    }
    let mut table = vec![0.0; 1 << m];
    for pattern in 0..(1usize << m) {
        let mut acc = 0.0;
        for (combo, &pr) in joint.iter().enumerate() {
            if pr == 0.0 {
                continue;
            }
            let mut lp = 0.0;
            for (&(v, p), idxs) in &parts {
                let part = &circuit.nodes[v].parts[p];
                let val = circuit.nodes[v].states[state_of(combo, v)][p];
                let bits: Vec<bool> = idxs
                    .iter()
                    .map(|&i| {
                        let a = pos
                            .iter()
                            .position(|q| *q == Some((v, p, i)))
                            .expect("requested");
                        (pattern >> a) & 1 == 1
                    })
                    .collect();
                let canonical = part.mode == PartMode::Enum || circuit.nodes[v].symmetry.is_some();
                match part.mode {
                    _ if canonical => {
                        if idxs
                            .iter()
                            .zip(&bits)
                            .any(|(&i, &b)| part.atom_value(val, i) != b)
                        {
                            lp = f64::NEG_INFINITY;
                        }
                    }
                    _ => {
                        let n = part.atoms.len();
                        let k = val as usize;
                        let j = bits.iter().filter(|&&b| b).count();
                        let r = idxs.len();
                        if j > k || r - j > n - k {
                            lp = f64::NEG_INFINITY;
                        } else {
                            lp += log_binomial(n - r, k - j) - log_binomial(n, k);
                        }
                    }
                }
            }
            acc += pr * lp.exp();
        }
        // free atoms are uniform and independent
        let n_free = pos.iter().filter(|p| p.is_none()).count();
        table[pattern] = acc * 0.5f64.powi(n_free as i32);
    }
    Ok(JointMarginal::Tabular {
        atoms: atoms.to_vec(),
        table,
    })
}

/// Exact single-atom marginals of every ground atom of `mln` by lifted
/// evaluation under the default factorization.
pub fn exact_atom_marginals(mln: &Mln) -> Result<BTreeMap<GroundAtom, f64>> {
    let model = LiftedModel::from_mln(mln)?;
    let e = default_factorization(&model, &Default::default())?;
    let circuit = compile(&model, &e)?;
    let eval = circuit.evaluate(None);
    let mut out: BTreeMap<GroundAtom, f64> = model
        .atoms
        .iter()
        .cloned()
        .zip(atom_marginals(&model, &circuit, &eval)?)
        .collect();
    for a in &model.free_atoms {
        out.insert(a.clone(), 0.5);
    }
    Ok(out)
}
