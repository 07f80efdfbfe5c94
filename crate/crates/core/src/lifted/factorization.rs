use std::collections::BTreeSet;
use std::fmt::Write as _;

use super::model::LiftedModel;
use crate::error::{Error, Result};
use crate::mln::GroupSlot;

/// Per-position rule: count (lifted sum), decompose (lifted product) or
/// ground (enumerate).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Tag {
    C,
    D,
    G,
}

impl Tag {
    pub fn symbol(self) -> char {
        match self {
            Tag::C => 'C',
            Tag::D => 'D',
            Tag::G => 'G',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FactorNode {
    /// Index into the model's atom groups.
    pub group: usize,
    /// One tag per argument position of the group's predicate.
    pub tags: Vec<Tag>,
    pub children: Vec<usize>,
}

/// A forest of factorization nodes, one per atom group. The roots hang off
/// an implicit top node carrying no rule.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LiftedFactorization {
    pub nodes: Vec<FactorNode>,
    pub roots: Vec<usize>,
}

impl LiftedFactorization {
    /// Builds a factorization from `(group, tags, parent)` triples, where
    /// `parent` indexes into the same list.
    pub fn from_parents(spec: &[(usize, Vec<Tag>, Option<usize>)]) -> LiftedFactorization {
        let mut nodes: Vec<FactorNode> = spec
            .iter()
            .map(|(g, t, _)| FactorNode {
                group: *g,
                tags: t.clone(),
                children: Vec::new(),
            })
            .collect();
        let mut roots = Vec::new();
        for (i, (_, _, p)) in spec.iter().enumerate() {
            match p {
                Some(p) => nodes[*p].children.push(i),
                None => roots.push(i),
            }
        }
        LiftedFactorization { nodes, roots }
    }

    /// A single path, first entry at the root.
    pub fn chain(spec: &[(usize, Vec<Tag>)]) -> LiftedFactorization {
        let triples: Vec<(usize, Vec<Tag>, Option<usize>)> = spec
            .iter()
            .enumerate()
            .map(|(i, (g, t))| (*g, t.clone(), i.checked_sub(1)))
            .collect();
        LiftedFactorization::from_parents(&triples)
    }

    /// Parent of every node; `None` for roots. Errors unless the structure is
    /// a forest reaching every node exactly once.
    pub fn parents(&self) -> Result<Vec<Option<usize>>> {
        let n = self.nodes.len();
        let mut parent = vec![None; n];
        let mut seen = vec![false; n];
        let mut stack: Vec<usize> = self.roots.clone();
        for &r in &self.roots {
            if r >= n {
                return Err(Error::Factorization(format!("root {r} out of range")));
            }
        }
        while let Some(v) = stack.pop() {
            if seen[v] {
                return Err(Error::Factorization(format!("node {v} reached twice")));
            }
            seen[v] = true;
            for &c in &self.nodes[v].children {
                if c >= n {
                    return Err(Error::Factorization(format!("child {c} out of range")));
                }
                parent[c] = Some(v);
                stack.push(c);
            }
        }
        if let Some(v) = seen.iter().position(|s| !s) {
            return Err(Error::Factorization(format!(
                "node {v} unreachable from the roots"
            )));
        }
        Ok(parent)
    }

    /// Nodes in depth-first preorder, children in listed order.
    pub fn preorder(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack: Vec<usize> = self.roots.iter().rev().copied().collect();
        while let Some(v) = stack.pop() {
            out.push(v);
            stack.extend(self.nodes[v].children.iter().rev());
        }
        out
    }

    /// Variables decomposed at each node: base names of the clause
    /// variables sitting at its D positions.
    pub fn edge_vars(&self, model: &LiftedModel, node: usize) -> Vec<String> {
        let n = &self.nodes[node];
        let mut out = BTreeSet::new();
        for c in &model.clauses {
            for (l, &g) in c.lit_group.iter().enumerate() {
                if g != n.group {
                    continue;
                }
                for (p, t) in c.clause.literals[l].args.iter().enumerate() {
                    if n.tags.get(p) == Some(&Tag::D) {
                        if let Some(v) = t.var() {
                            out.insert(v.split('@').next().unwrap_or(v).to_string());
                        }
                    }
                }
            }
        }
        out.into_iter().collect()
    }

    /// Deterministic indented form, two spaces per level:
    /// `R(v0) [C]` at the root, `S(v0) [D] {y}` below it.
    pub fn to_text(&self, model: &LiftedModel) -> String {
        let mut s = String::new();
        let mut stack: Vec<(usize, usize)> = self.roots.iter().rev().map(|&r| (r, 0)).collect();
        while let Some((v, depth)) = stack.pop() {
            let n = &self.nodes[v];
            let tags: String = n.tags.iter().map(|t| t.symbol()).collect();
            let _ = write!(
                s,
                "{}{} [{}]",
                "  ".repeat(depth),
                model.group_label(n.group),
                tags
            );
            let ev = self.edge_vars(model, v);
            if !ev.is_empty() {
                let _ = write!(s, " {{{}}}", ev.join(","));
            }
            s.push('\n');
            for &c in n.children.iter().rev() {
                stack.push((c, depth + 1));
            }
        }
        s
    }

    /// Structural checks that do not involve the inference rules.
    pub fn check_shape(&self, model: &LiftedModel) -> Result<Vec<Option<usize>>> {
        let parent = self.parents()?;
        let mut seen = vec![false; model.groups.len()];
        for (i, n) in self.nodes.iter().enumerate() {
            if n.group >= model.groups.len() {
                return Err(Error::Factorization(format!(
                    "node {i}: unknown group {}",
                    n.group
                )));
            }
            if std::mem::replace(&mut seen[n.group], true) {
                return Err(Error::Factorization(format!(
                    "group {} appears on two nodes",
                    model.group_label(n.group)
                )));
            }
            let slots = &model.groups[n.group].slots;
            if n.tags.len() != slots.len() {
                return Err(Error::Factorization(format!(
                    "node {i}: {} tags for arity {}",
                    n.tags.len(),
                    slots.len()
                )));
            }
            for (p, s) in slots.iter().enumerate() {
                for (q, t) in slots.iter().enumerate().skip(p + 1) {
                    if matches!(s, GroupSlot::Var(_)) && s == t && n.tags[p] != n.tags[q] {
                        return Err(Error::Factorization(format!(
                            "node {i}: positions {p} and {q} share a variable but carry different tags"
                        )));
                    }
                }
            }
        }
        if let Some(g) = seen.iter().position(|s| !s) {
            return Err(Error::Factorization(format!(
                "group {} has no node",
                model.group_label(g)
            )));
        }
        Ok(parent)
    }
}
