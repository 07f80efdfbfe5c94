//! Factorization construction: a greedy default plan and exhaustive
//! enumeration for small models.

use std::collections::BTreeSet;

use super::compile::validate_factorization;
use super::factorization::{FactorNode, LiftedFactorization, Tag};
use super::model::LiftedModel;
use crate::error::{Error, Result};
use crate::mln::GroupSlot;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PlanOptions {
    /// Never decompose (every group keeps all its atoms on its node).
    pub no_decompose: bool,
    /// Groups that must be enumerated assignment by assignment.
    pub enumerate: Vec<usize>,
    /// Groups that must be counted as one part, with no decomposition on
    /// the path above them.
    pub count: Vec<usize>,
}

/// Primal graph over groups: two groups are adjacent when a clause holds both.
fn adjacency(model: &LiftedModel) -> Vec<BTreeSet<usize>> {
    let mut adj = vec![BTreeSet::new(); model.groups.len()];
    for c in &model.clauses {
        for &a in &c.lit_group {
            for &b in &c.lit_group {
                if a != b {
                    adj[a].insert(b);
                }
            }
        }
    }
    adj
}

/// Pseudo-tree from a greedy min-fill elimination order; every clause's
/// groups end up on one root-to-leaf path. Ties eliminate the later group
/// first so earlier groups sit nearer the root.
fn pseudo_tree(model: &LiftedModel) -> Vec<Option<usize>> {
    let n = model.groups.len();
    let mut adj = adjacency(model);
    let mut alive = vec![true; n];
    let mut order = Vec::with_capacity(n);
    let mut later: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for _ in 0..n {
        let best = (0..n)
            .filter(|&v| alive[v])
            .min_by_key(|&v| {
                let nb: Vec<usize> = adj[v].iter().copied().collect();
                let mut fill = 0;
                for (i, &a) in nb.iter().enumerate() {
                    for &b in &nb[i + 1..] {
                        if !adj[a].contains(&b) {
                            fill += 1;
                        }
                    }
                }
                (fill, nb.len(), std::cmp::Reverse(v))
            })
            .expect("a live vertex");
        let nb: Vec<usize> = adj[best].iter().copied().collect();
        for &a in &nb {
            for &b in &nb {
                if a != b {
                    adj[a].insert(b);
                }
            }
            adj[a].remove(&best);
        }
        later[best] = nb.into_iter().collect();
        alive[best] = false;
        order.push(best);
    }
    let mut position = vec![0; n];
    for (i, &v) in order.iter().enumerate() {
        position[v] = i;
    }
    (0..n)
        .map(|v| later[v].iter().copied().min_by_key(|&u| position[u]))
        .collect()
}

/// Tag vectors for a group, most preferred first.
fn candidates(model: &LiftedModel, g: usize, opts: &PlanOptions, allow_d: bool) -> Vec<Vec<Tag>> {
    let slots = &model.groups[g].slots;
    let n_vars = model.groups[g].n_slot_vars();
    let expand = |slot_tags: &[Tag]| -> Vec<Tag> {
        slots
            .iter()
            .map(|s| match s {
                GroupSlot::Var(k) => slot_tags[*k],
                GroupSlot::Const(_) => Tag::G,
            })
            .collect()
    };
    let all_g = expand(&vec![Tag::G; n_vars]);
    if opts.enumerate.contains(&g) {
        return vec![all_g];
    }
    if opts.count.contains(&g) {
        return vec![expand(&vec![Tag::C; n_vars])];
    }
    let mut out = Vec::new();
    let subsets: Vec<u32> = {
        let mut s: Vec<u32> = (1..(1u32 << n_vars)).collect();
        s.sort_by_key(|m| (std::cmp::Reverse(m.count_ones()), *m));
        s
    };
    if allow_d {
        for &m in &subsets {
            let t: Vec<Tag> = (0..n_vars)
                .map(|k| if m >> k & 1 == 1 { Tag::D } else { Tag::C })
                .collect();
            out.push(expand(&t));
        }
    }
    out.push(expand(&vec![Tag::C; n_vars]));
    for &m in subsets.iter().rev() {
        let t: Vec<Tag> = (0..n_vars)
            .map(|k| if m >> k & 1 == 1 { Tag::G } else { Tag::C })
            .collect();
        let e = expand(&t);
        if !out.contains(&e) {
            out.push(e);
        }
    }
    if !out.contains(&all_g) {
        out.push(all_g);
    }
    out
}

/// Greedy plan: a min-fill pseudo-tree, then top-down per node the first
/// valid of decomposition (largest first), counting, partial grounding and
/// full grounding.
pub fn default_factorization(
    model: &LiftedModel,
    opts: &PlanOptions,
) -> Result<LiftedFactorization> {
    let parent = pseudo_tree(model);
    let spec: Vec<(usize, Vec<Tag>, Option<usize>)> = (0..model.groups.len())
        .map(|g| {
            let all_g = model.groups[g].slots.iter().map(|_| Tag::G).collect();
            (g, all_g, parent[g])
        })
        .collect();
    // no decomposition above a group that must stay whole
    let mut above_count = vec![false; model.groups.len()];
    for &g in &opts.count {
        let mut u = parent[g];
        while let Some(p) = u {
            above_count[p] = true;
            u = parent[p];
        }
    }
    let mut fact = LiftedFactorization::from_parents(&spec);
    for v in fact.preorder() {
        let g = fact.nodes[v].group;
        let mut chosen = false;
        let allow_d = !opts.no_decompose && !above_count[g];
        for tags in candidates(model, g, opts, allow_d) {
            fact.nodes[v].tags = tags;
            if validate_factorization(model, &fact)?.is_none() {
                chosen = true;
                break;
            }
        }
        if !chosen {
            return Err(Error::Factorization(format!(
                "no valid rule for {}",
                model.group_label(g)
            )));
        }
    }
    Ok(fact)
}

/// Every valid factorization of a small model, up to `cap` of them: all
/// forests over the groups, all per-slot tag choices.
pub fn enumerate_factorizations(
    model: &LiftedModel,
    cap: usize,
) -> Result<Vec<LiftedFactorization>> {
    let n = model.groups.len();
    let tag_choices: Vec<Vec<Vec<Tag>>> = (0..n)
        .map(|g| {
            let slots = &model.groups[g].slots;
            let k = model.groups[g].n_slot_vars();
            (0..3usize.pow(k as u32))
                .map(|mut code| {
                    let slot_tags: Vec<Tag> = (0..k)
                        .map(|_| {
                            let t = [Tag::C, Tag::D, Tag::G][code % 3];
                            code /= 3;
                            t
                        })
                        .collect();
                    slots
                        .iter()
                        .map(|s| match s {
                            GroupSlot::Var(j) => slot_tags[*j],
                            GroupSlot::Const(_) => Tag::G,
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    let mut out = Vec::new();
    let mut parent: Vec<Option<usize>> = vec![None; n];
    let total = (n + 1).pow(n as u32);
    for code in 0..total {
        let mut c = code;
        for p in parent.iter_mut() {
            let x = c % (n + 1);
            c /= n + 1;
            *p = if x == n { None } else { Some(x) };
        }
        // acyclic and no self loops
        let acyclic = (0..n).all(|v| {
            let mut u = v;
            for _ in 0..=n {
                match parent[u] {
                    Some(p) if p == v => return false,
                    Some(p) => u = p,
                    None => return true,
                }
            }
            false
        });
        if !acyclic {
            continue;
        }
        let mut nodes: Vec<FactorNode> = (0..n)
            .map(|g| FactorNode {
                group: g,
                tags: model.groups[g].slots.iter().map(|_| Tag::G).collect(),
                children: Vec::new(),
            })
            .collect();
        let mut roots = Vec::new();
        for v in 0..n {
            match parent[v] {
                Some(p) => nodes[p].children.push(v),
                None => roots.push(v),
            }
        }
        let mut fact = LiftedFactorization { nodes, roots };
        if validate_factorization(model, &fact)?.is_some() {
            continue;
        }
        let combos: usize = tag_choices.iter().map(Vec::len).product();
        for mut tc in 0..combos {
            for (v, choices) in tag_choices.iter().enumerate() {
                fact.nodes[v].tags = choices[tc % choices.len()].clone();
                tc /= choices.len();
            }
            if validate_factorization(model, &fact)?.is_none() {
                out.push(fact.clone());
                if out.len() >= cap {
                    return Ok(out);
                }
            }
        }
    }
    Ok(out)
}
