//! Checks the rule preconditions of a factorization and lowers it to a
//! circuit over node states.
//!
//! Every node fixes the representative of its decomposed positions, splits
//! its remaining atoms by ground positions into parts, and either counts
//! each part (state `k` stands for "the first `k` atoms true") or enumerates
//! it. Counting a part is sound when some domain permutation that fixes all
//! conditioned atoms maps any arrangement of `k` true atoms to any other;
//! decomposing is sound when the copies for different keys touch disjoint
//! atoms and are images of one another under such a permutation.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::factorization::{LiftedFactorization, Tag};
use super::model::{LiftedModel, ModelClause};
use crate::error::{Error, Result};
use crate::mln::GroupSlot;
use crate::numeric::log_binomial;

/// Largest part the circuit will enumerate assignment by assignment.
pub const MAX_ENUM_PART: usize = 20;
/// Largest state space of a single node.
pub const MAX_NODE_STATES: usize = 1 << 23;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartMode {
    Count,
    Enum,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Part {
    /// Model atom indices, ascending.
    pub atoms: Vec<usize>,
    pub mode: PartMode,
}

impl Part {
    pub fn radix(&self) -> usize {
        match self.mode {
            PartMode::Count => self.atoms.len() + 1,
            PartMode::Enum => 1 << self.atoms.len(),
        }
    }

    /// Truth of the atom at `idx` under part value `v`.
    pub fn atom_value(&self, v: u32, idx: usize) -> bool {
        match self.mode {
            PartMode::Count => (idx as u32) < v,
            PartMode::Enum => (v >> idx) & 1 == 1,
        }
    }
}

/// Role of an argument position relative to a decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PosClass {
    Key(usize),
    Moved,
    Other,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub rep_key: Vec<usize>,
    pub copies: usize,
    /// Position roles of every group below the node, keyed by group.
    pub classes: BTreeMap<usize, Vec<PosClass>>,
}

/// Exchangeability of a counted node: the circuit treats the first `k`
/// atoms of the part as the true ones, so atoms whose positions move with
/// the counted values are only right on average over permutations of
/// `values`.
#[derive(Debug, Clone, PartialEq)]
pub struct Symmetry {
    pub domain: usize,
    pub values: Vec<usize>,
    /// Moved argument positions of the node's group and the groups below.
    pub positions: BTreeMap<usize, Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Contribution {
    Prefix(Vec<u32>),
    Mask(u32),
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct LitCount {
    pub positive: bool,
    pub size: u64,
    pub terms: Vec<(usize, usize, Contribution)>,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct AtomRef {
    pub node: usize,
    pub part: usize,
    pub idx: usize,
    pub positive: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum ClauseEval {
    Product { total: u64, lits: Vec<LitCount> },
    General(Vec<Vec<AtomRef>>),
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct PlacedClause {
    pub weight: f64,
    pub eval: ClauseEval,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CircuitNode {
    pub group: usize,
    pub tags: Vec<Tag>,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    pub parts: Vec<Part>,
    /// Decoded part values of every state.
    pub states: Vec<Vec<u32>>,
    /// Binomial weight of every state.
    pub base: Vec<f64>,
    pub decomposition: Option<Decomposition>,
    pub symmetry: Option<Symmetry>,
    /// Ancestors whose states the subtree's clauses read.
    pub context: Vec<usize>,
    pub(crate) ctx_strides: Vec<usize>,
    pub(crate) ctx_size: usize,
    pub(crate) clauses: Vec<PlacedClause>,
}

impl CircuitNode {
    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    /// Number of independent identical copies this node's subtree stands for.
    pub fn copies(&self) -> usize {
        self.decomposition.as_ref().map_or(1, |d| d.copies)
    }
}

/// A validated factorization lowered to node state spaces.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    pub nodes: Vec<CircuitNode>,
    pub roots: Vec<usize>,
    pub preorder: Vec<usize>,
    pub node_of_group: Vec<usize>,
    pub free_atoms: usize,
    /// Position of each representative atom: (node, part, index in part).
    pub atom_pos: Vec<Option<(usize, usize, usize)>>,
}

fn violation<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Factorization(msg.into()))
}

/// Constraint closure of `seeds`, never entering `blocked` variables.
fn closure(
    c: &ModelClause,
    seeds: &BTreeSet<usize>,
    blocked: &BTreeMap<usize, usize>,
) -> BTreeSet<usize> {
    let pairs = c.constraint_pairs();
    let mut k: BTreeSet<usize> = seeds
        .iter()
        .copied()
        .filter(|v| !blocked.contains_key(v))
        .collect();
    loop {
        let mut grew = false;
        for &(a, b) in &pairs {
            for (x, y) in [(a, b), (b, a)] {
                if k.contains(&x) && !blocked.contains_key(&y) && k.insert(y) {
                    grew = true;
                }
            }
        }
        if !grew {
            return k;
        }
    }
}

/// Values of bound variables constrained against a member of `k`, paired
/// with the domain they live in.
fn linked_bound_values(
    c: &ModelClause,
    k: &BTreeSet<usize>,
    bound: &BTreeMap<usize, usize>,
) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (a, b) in c.constraint_pairs() {
        for (x, y) in [(a, b), (b, a)] {
            if k.contains(&x) {
                if let Some(&val) = bound.get(&y) {
                    let dom = c.clause.var_domain(&c.vars[y]).expect("variable domain");
                    out.push((dom, val));
                }
            }
        }
    }
    out
}

/// Lowers `fact` over `model`, checking every rule's precondition.
pub fn compile(model: &LiftedModel, fact: &LiftedFactorization) -> Result<Circuit> {
    lower(model, fact, true)
}

/// With `states_wanted` false only the rule preconditions are checked; node
/// state spaces, contexts and clause plans are left empty.
fn lower(model: &LiftedModel, fact: &LiftedFactorization, states_wanted: bool) -> Result<Circuit> {
    let parent = fact.check_shape(model)?;
    let n = fact.nodes.len();
    let preorder = fact.preorder();
    let mut node_of_group = vec![0; model.groups.len()];
    for (i, nd) in fact.nodes.iter().enumerate() {
        node_of_group[nd.group] = i;
    }
    let mut depth = vec![0usize; n];
    for &v in &preorder {
        if let Some(p) = parent[v] {
            depth[v] = depth[p] + 1;
        }
    }
    let is_ancestor_or_self = |u: usize, mut v: usize| loop {
        if u == v {
            return true;
        }
        match parent[v] {
            Some(p) => v = p,
            None => return false,
        }
    };

    // clause placement at the deepest node of its groups
    let mut placed_at = Vec::with_capacity(model.clauses.len());
    for (ci, c) in model.clauses.iter().enumerate() {
        let nodes: Vec<usize> = c.lit_group.iter().map(|&g| node_of_group[g]).collect();
        let deepest = *nodes
            .iter()
            .max_by_key(|&&v| depth[v])
            .expect("clause has literals");
        if let Some(&bad) = nodes.iter().find(|&&u| !is_ancestor_or_self(u, deepest)) {
            return violation(format!(
                "clause {ci}: groups {} and {} are not on one root-to-leaf path",
                model.group_label(fact.nodes[bad].group),
                model.group_label(fact.nodes[deepest].group)
            ));
        }
        placed_at.push(deepest);
    }
    let subtree_of =
        |v: usize| -> Vec<bool> { (0..n).map(|w| is_ancestor_or_self(v, w)).collect() };

    let mut avail: Vec<Vec<usize>> = model.group_atoms.clone();
    let mut grounding_ok: Vec<Vec<usize>> = model
        .clauses
        .iter()
        .map(|c| (0..c.groundings.len()).collect())
        .collect();
    let mut bound: Vec<BTreeMap<usize, usize>> = vec![BTreeMap::new(); model.clauses.len()];
    let mut nodes: Vec<CircuitNode> = Vec::with_capacity(n);
    let mut built: Vec<Option<CircuitNode>> = vec![None; n];

    for &v in &preorder {
        let fnode = &fact.nodes[v];
        let g = fnode.group;
        let group = &model.groups[g];
        let in_sub = subtree_of(v);
        let sub_group = |h: usize| in_sub[node_of_group[h]];
        let sub_clauses: Vec<usize> = (0..model.clauses.len())
            .filter(|&c| in_sub[placed_at[c]])
            .collect();
        let label = model.group_label(g);

        let slot_tag = |k: usize| -> Tag {
            let p = group
                .slots
                .iter()
                .position(|s| *s == GroupSlot::Var(k))
                .expect("slot");
            fnode.tags[p]
        };
        let n_slots = group.n_slot_vars();
        let d_slots: Vec<usize> = (0..n_slots).filter(|&k| slot_tag(k) == Tag::D).collect();
        let c_slots: Vec<usize> = (0..n_slots).filter(|&k| slot_tag(k) == Tag::C).collect();
        let g_slots: Vec<usize> = (0..n_slots).filter(|&k| slot_tag(k) == Tag::G).collect();
        let slot_pos = |k: usize| -> Vec<usize> {
            (0..group.slots.len())
                .filter(|&p| group.slots[p] == GroupSlot::Var(k))
                .collect()
        };
        let own_literal = |ci: usize| -> Result<Option<usize>> {
            let ls: Vec<usize> = (0..model.clauses[ci].lit_group.len())
                .filter(|&l| model.clauses[ci].lit_group[l] == g)
                .collect();
            match ls.len() {
                0 => Ok(None),
                1 => Ok(Some(ls[0])),
                _ => violation(format!(
                    "{label}: appears in more than one literal of clause {ci}"
                )),
            }
        };

        // lifted product
        let mut decomposition = None;
        if !d_slots.is_empty() {
            let mut classes: BTreeMap<usize, Vec<PosClass>> = BTreeMap::new();
            let mut xs: Vec<(usize, Vec<usize>)> = Vec::new();
            let mut linked: Vec<(usize, usize)> = Vec::new();
            for &ci in &sub_clauses {
                let c = &model.clauses[ci];
                let Some(l) = own_literal(ci)? else {
                    return violation(format!(
                        "{label}: decomposition requires every clause below to contain it; clause {ci} does not"
                    ));
                };
                let lv = c.lit_vars(l);
                let x: Vec<usize> = d_slots
                    .iter()
                    .map(|&k| lv[slot_pos(k)[0]].expect("slot position holds a variable"))
                    .collect();
                if x.iter().any(|v| bound[ci].contains_key(v)) {
                    return violation(format!("{label}: variable decomposed twice in clause {ci}"));
                }
                let seeds: BTreeSet<usize> = x.iter().copied().collect();
                let k = closure(c, &seeds, &bound[ci]);
                linked.extend(linked_bound_values(c, &k, &bound[ci]));
                for (li, &h) in c.lit_group.iter().enumerate() {
                    let vars = c.lit_vars(li);
                    if sub_group(h) {
                        let cls: Vec<PosClass> = vars
                            .iter()
                            .map(|pv| match pv {
                                Some(pv) => match x.iter().position(|xv| xv == pv) {
                                    Some(i) => PosClass::Key(i),
                                    None if k.contains(pv) => PosClass::Moved,
                                    None => PosClass::Other,
                                },
                                None => PosClass::Other,
                            })
                            .collect();
                        for i in 0..x.len() {
                            if !cls.contains(&PosClass::Key(i)) {
                                return violation(format!(
                                    "{label}: literal of {} in clause {ci} lacks decomposer variable {}",
                                    model.group_label(h),
                                    c.vars[x[i]]
                                ));
                            }
                        }
                        match classes.get(&h) {
                            Some(prev) if *prev != cls => {
                                return violation(format!(
                                    "{label}: decomposer sits at different positions of {}",
                                    model.group_label(h)
                                ));
                            }
                            Some(_) => {}
                            None => {
                                classes.insert(h, cls);
                            }
                        }
                    } else if vars.iter().flatten().any(|pv| k.contains(pv)) {
                        return violation(format!(
                            "{label}: decomposer linked to conditioned group {} in clause {ci}",
                            model.group_label(h)
                        ));
                    }
                }
                xs.push((ci, x));
            }
            let key_of =
                |h: usize, atom: usize, classes: &BTreeMap<usize, Vec<PosClass>>| -> Vec<usize> {
                    let cls = &classes[&h];
                    let args = &model.atoms[atom].args;
                    (0..d_slots.len())
                        .map(|i| {
                            args[cls
                                .iter()
                                .position(|c| *c == PosClass::Key(i))
                                .expect("key position")]
                        })
                        .collect()
                };
            if avail[g].is_empty() {
                return violation(format!("{label}: nothing left to decompose"));
            }
            let keys: BTreeSet<Vec<usize>> =
                avail[g].iter().map(|&a| key_of(g, a, &classes)).collect();
            let rep_key = key_of(g, avail[g][0], &classes);
            for (dom, val) in &linked {
                let hit = keys.iter().any(|kk| {
                    kk.iter().enumerate().any(|(i, kv)| {
                        let p = slot_pos(d_slots[i])[0];
                        kv == val && model.mln.predicates[group.predicate].arg_domains[p] == *dom
                    })
                });
                if hit {
                    return violation(format!(
                        "{label}: decomposer copies differ by a constraint on a decomposed value"
                    ));
                }
            }
            for h in 0..model.groups.len() {
                if !sub_group(h) {
                    continue;
                }
                if !classes.contains_key(&h) {
                    return violation(format!(
                        "{label}: group {} below has no clause fixing its decomposer position",
                        model.group_label(h)
                    ));
                }
                let kept: Vec<usize> = avail[h]
                    .iter()
                    .copied()
                    .filter(|&a| key_of(h, a, &classes) == rep_key)
                    .collect();
                avail[h] = kept;
            }
            for (ci, x) in &xs {
                let c = &model.clauses[*ci];
                grounding_ok[*ci].retain(|&gi| {
                    x.iter()
                        .zip(&rep_key)
                        .all(|(&xv, &kv)| c.groundings[gi].theta[xv] == kv)
                });
                for (&xv, &kv) in x.iter().zip(&rep_key) {
                    bound[*ci].insert(xv, kv);
                }
            }
            decomposition = Some(Decomposition {
                rep_key,
                copies: keys.len(),
                classes,
            });
        }

        // split into parts by ground positions
        let g_pos: Vec<usize> = g_slots.iter().flat_map(|&k| slot_pos(k)).collect();
        let mut by_key: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
        for &a in &avail[g] {
            let key: Vec<usize> = g_pos.iter().map(|&p| model.atoms[a].args[p]).collect();
            by_key.entry(key).or_default().push(a);
        }
        let mode = if c_slots.is_empty() {
            PartMode::Enum
        } else {
            PartMode::Count
        };
        let parts: Vec<Part> = by_key
            .into_values()
            .map(|atoms| Part { atoms, mode })
            .collect();

        // lifted sum
        let mut symmetry = None;
        if mode == PartMode::Count && parts.iter().any(|p| p.atoms.len() > 1) {
            let c_pos: BTreeSet<usize> = c_slots.iter().flat_map(|&k| slot_pos(k)).collect();
            let mut moved: BTreeSet<(usize, usize)> = c_pos.iter().map(|&p| (g, p)).collect();
            let mut ks: Vec<(usize, BTreeSet<usize>)> = Vec::new();
            for &ci in &sub_clauses {
                own_literal(ci)?;
            }
            loop {
                let mut grew = false;
                ks.clear();
                for &ci in &sub_clauses {
                    let c = &model.clauses[ci];
                    let mut seeds = BTreeSet::new();
                    for (li, &h) in c.lit_group.iter().enumerate() {
                        if !sub_group(h) {
                            continue;
                        }
                        for (p, pv) in c.lit_vars(li).into_iter().enumerate() {
                            if moved.contains(&(h, p)) {
                                match pv {
                                    Some(pv) if !bound[ci].contains_key(&pv) => {
                                        seeds.insert(pv);
                                    }
                                    _ => {
                                        return violation(format!(
                                            "{label}: counted position of {} is fixed in clause {ci}",
                                            model.group_label(h)
                                        ));
                                    }
                                }
                            }
                        }
                    }
                    if seeds.is_empty() {
                        continue;
                    }
                    let k = closure(c, &seeds, &bound[ci]);
                    for (li, &h) in c.lit_group.iter().enumerate() {
                        let vars = c.lit_vars(li);
                        if sub_group(h) {
                            for (p, pv) in vars.iter().enumerate() {
                                if pv.is_some_and(|pv| k.contains(&pv)) && moved.insert((h, p)) {
                                    grew = true;
                                }
                            }
                        } else if vars.iter().flatten().any(|pv| k.contains(pv)) {
                            return violation(format!(
                                "{label}: counted atoms linked to conditioned group {} in clause {ci}",
                                model.group_label(h)
                            ));
                        }
                    }
                    ks.push((ci, k));
                }
                if !grew {
                    break;
                }
            }
            if moved.iter().any(|&(h, p)| h == g && !c_pos.contains(&p)) {
                return violation(format!(
                    "{label}: counted variable linked to its own fixed positions"
                ));
            }
            if (parts.len() > 1 || c_slots.len() > 1) && moved.iter().any(|&(h, _)| h != g) {
                return violation(format!(
                    "{label}: counting over several slots or parts needs variables private to the group"
                ));
            }
            let pred_doms = &model.mln.predicates[group.predicate].arg_domains;
            for (ci, k) in &ks {
                for (dom, val) in linked_bound_values(&model.clauses[*ci], k, &bound[*ci]) {
                    let hit = parts.iter().any(|part| {
                        part.atoms.iter().any(|&a| {
                            c_pos
                                .iter()
                                .any(|&p| pred_doms[p] == dom && model.atoms[a].args[p] == val)
                        })
                    });
                    if hit {
                        return violation(format!(
                            "{label}: counted atoms differ by a constraint on a decomposed value"
                        ));
                    }
                }
            }
            if moved.iter().any(|&(h, _)| h != g) {
                let p0 = *c_pos.iter().next().expect("a counted position");
                let mut positions: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
                for &(h, p) in &moved {
                    positions.entry(h).or_default().push(p);
                }
                symmetry = Some(Symmetry {
                    domain: pred_doms[p0],
                    values: parts[0]
                        .atoms
                        .iter()
                        .map(|&a| model.atoms[a].args[p0])
                        .collect(),
                    positions,
                });
            }
        }

        // state space
        let mut n_states: usize = 1;
        if !states_wanted {
            built[v] = Some(CircuitNode {
                group: g,
                tags: fnode.tags.clone(),
                parent: parent[v],
                children: fnode.children.clone(),
                parts,
                states: Vec::new(),
                base: Vec::new(),
                decomposition,
                symmetry,
                context: Vec::new(),
                ctx_strides: Vec::new(),
                ctx_size: 1,
                clauses: Vec::new(),
            });
            continue;
        }
        for p in &parts {
            if p.mode == PartMode::Enum && p.atoms.len() > MAX_ENUM_PART {
                return Err(Error::Intractable(format!(
                    "{label}: enumerating {} atoms",
                    p.atoms.len()
                )));
            }
            n_states = n_states.saturating_mul(p.radix());
        }
        if n_states > MAX_NODE_STATES {
            return Err(Error::Intractable(format!(
                "{label}: {n_states} node states"
            )));
        }
        let mut states = Vec::with_capacity(n_states);
        let mut base = Vec::with_capacity(n_states);
        for s in 0..n_states {
            let mut rest = s;
            let mut vals = Vec::with_capacity(parts.len());
            let mut b = 0.0;
            for p in &parts {
                let r = p.radix();
                let val = (rest % r) as u32;
                rest /= r;
                if p.mode == PartMode::Count {
                    b += log_binomial(p.atoms.len(), val as usize);
                }
                vals.push(val);
            }
            states.push(vals);
            base.push(b);
        }
        built[v] = Some(CircuitNode {
            group: g,
            tags: fnode.tags.clone(),
            parent: parent[v],
            children: fnode.children.clone(),
            parts,
            states,
            base,
            decomposition,
            symmetry,
            context: Vec::new(),
            ctx_strides: Vec::new(),
            ctx_size: 1,
            clauses: Vec::new(),
        });
    }
    nodes.extend(built.into_iter().map(|b| b.expect("every node built")));

    let mut atom_pos = vec![None; model.atoms.len()];
    for (v, nd) in nodes.iter().enumerate() {
        for (pi, p) in nd.parts.iter().enumerate() {
            for (i, &a) in p.atoms.iter().enumerate() {
                atom_pos[a] = Some((v, pi, i));
            }
        }
    }

    if !states_wanted {
        for (ci, c) in model.clauses.iter().enumerate() {
            for &gi in &grounding_ok[ci] {
                for &a in &c.groundings[gi].atoms {
                    if atom_pos[a].is_none() {
                        return violation(format!(
                            "clause {ci}: atom {} falls outside the representative copy",
                            model.mln.fmt_atom(&model.atoms[a])
                        ));
                    }
                }
            }
        }
        return Ok(Circuit {
            nodes,
            roots: fact.roots.clone(),
            preorder,
            node_of_group,
            free_atoms: model.free_atoms.len(),
            atom_pos,
        });
    }

    // contexts
    let mut ctx: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for (ci, c) in model.clauses.iter().enumerate() {
        let w = placed_at[ci];
        for &h in &c.lit_group {
            let u = node_of_group[h];
            let mut x = w;
            while x != u {
                ctx[x].insert(u);
                x = parent[x].expect("ancestor on path");
            }
        }
    }
    for (v, nd) in nodes.iter_mut().enumerate() {
        nd.context = ctx[v].iter().copied().collect();
    }
    for v in 0..n {
        let mut stride = 1usize;
        let mut strides = Vec::new();
        for &u in &nodes[v].context {
            strides.push(stride);
            stride = stride.saturating_mul(nodes[u].n_states());
        }
        if stride > MAX_NODE_STATES {
            return Err(Error::Intractable(format!(
                "{}: context of {stride} configurations",
                model.group_label(nodes[v].group)
            )));
        }
        nodes[v].ctx_strides = strides;
        nodes[v].ctx_size = stride;
    }

    // clause evaluation plans
    for (ci, c) in model.clauses.iter().enumerate() {
        if c.clause.weight == 0.0 || grounding_ok[ci].is_empty() {
            continue;
        }
        let mut refs: Vec<Vec<AtomRef>> = Vec::with_capacity(grounding_ok[ci].len());
        for &gi in &grounding_ok[ci] {
            let mut r = Vec::with_capacity(c.clause.literals.len());
            for (li, &a) in c.groundings[gi].atoms.iter().enumerate() {
                let Some((node, part, idx)) = atom_pos[a] else {
                    return violation(format!(
                        "clause {ci}: atom {} falls outside the representative copy",
                        model.mln.fmt_atom(&model.atoms[a])
                    ));
                };
                r.push(AtomRef {
                    node,
                    part,
                    idx,
                    positive: c.clause.literals[li].positive,
                });
            }
            refs.push(r);
        }
        let n_lits = c.clause.literals.len();
        let lit_sets: Vec<BTreeSet<usize>> = (0..n_lits)
            .map(|li| {
                grounding_ok[ci]
                    .iter()
                    .map(|&gi| c.groundings[gi].atoms[li])
                    .collect()
            })
            .collect();
        let product: u128 = lit_sets.iter().map(|s| s.len() as u128).product();
        let eval = if product == refs.len() as u128 {
            let lits = lit_sets
                .iter()
                .enumerate()
                .map(|(li, set)| {
                    let mut terms: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
                    for &a in set {
                        let (node, part, idx) = atom_pos[a].expect("checked above");
                        terms.entry((node, part)).or_default().push(idx);
                    }
                    let mut terms: Vec<(usize, usize, Contribution)> = terms
                        .into_iter()
                        .map(|((node, part), idxs)| {
                            let p = &nodes[node].parts[part];
                            let contrib = match p.mode {
                                PartMode::Count => Contribution::Prefix(
                                    (0..=p.atoms.len())
                                        .map(|k| idxs.iter().filter(|&&i| i < k).count() as u32)
                                        .collect(),
                                ),
                                PartMode::Enum => {
                                    Contribution::Mask(idxs.iter().fold(0u32, |m, &i| m | (1 << i)))
                                }
                            };
                            (node, part, contrib)
                        })
                        .collect();
                    terms.sort_by_key(|t| (t.0, t.1));
                    LitCount {
                        positive: c.clause.literals[li].positive,
                        size: set.len() as u64,
                        terms,
                    }
                })
                .collect();
            ClauseEval::Product {
                total: refs.len() as u64,
                lits,
            }
        } else {
            ClauseEval::General(refs)
        };
        nodes[placed_at[ci]].clauses.push(PlacedClause {
            weight: c.clause.weight,
            eval,
        });
    }

    Ok(Circuit {
        nodes,
        roots: fact.roots.clone(),
        preorder,
        node_of_group,
        free_atoms: model.free_atoms.len(),
        atom_pos,
    })
}

/// `Ok(None)` when every rule applies, otherwise the first violated
/// precondition.
pub fn validate_factorization(
    model: &LiftedModel,
    fact: &LiftedFactorization,
) -> Result<Option<String>> {
    fact.check_shape(model)?;
    match lower(model, fact, false) {
        Ok(_) => Ok(None),
        Err(Error::Factorization(msg)) => Ok(Some(msg)),
        Err(e) => Err(e),
    }
}
