use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::{self, Write as _};
use std::str::FromStr;

use super::region::{group_clause, make_lifted_region, region_copies, LiftedRegion, RegionCopy};
use crate::error::{Error, Result};
use crate::lifted::{jd_contains, LiftedModel, PartMode, PlanOptions, Tag};
use crate::mln::{ground_atoms, ground_formulas, GroundAtom, Mln, Term, WeightedClause};
use crate::oracle::{
    clause_factor, validate_running_intersection, GroundRegion, GroundRegionGraph,
};

/// Default domain size at which lifted validity is checked.
pub const WITNESS_DOMAIN_SIZE: usize = 4;

/// Region graph construction strategies, named by how the top regions and
/// the shared atom regions are grounded (G) or kept lifted (L).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Structure {
    /// Ground clause copies over ground atoms: the Bethe approximation.
    GG,
    /// One lifted region per clause over ground atoms.
    LG,
    /// One lifted region per clause over counted atom groups where possible.
    LL,
}

impl Structure {
    pub const ALL: [Structure; 3] = [Structure::GG, Structure::LG, Structure::LL];
}

impl fmt::Display for Structure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Structure::GG => "GG",
            Structure::LG => "LG",
            Structure::LL => "LL",
        })
    }
}

impl FromStr for Structure {
    type Err = Error;
    fn from_str(s: &str) -> Result<Structure> {
        match s.to_ascii_uppercase().as_str() {
            "GG" => Ok(Structure::GG),
            "LG" => Ok(Structure::LG),
            "LL" => Ok(Structure::LL),
            _ => Err(Error::Model(format!(
                "unknown structure {s:?} (expected GG, LG or LL)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LiftedEdge {
    pub parent: usize,
    pub child: usize,
}

/// Ground edges of one lifted edge that look alike: the parent copy holds
/// the child copy's atoms through the same literals (`role`). `gp` is the
/// number of such parent copies of any one child copy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeClass {
    pub edge: usize,
    pub role: Vec<usize>,
    pub gp: usize,
}

#[derive(Debug, Clone)]
pub struct LiftedRegionGraph {
    pub mln: Mln,
    /// Atom groups of the whole model.
    pub global: LiftedModel,
    pub structure: Option<Structure>,
    pub regions: Vec<LiftedRegion>,
    pub edges: Vec<LiftedEdge>,
    pub classes: Vec<EdgeClass>,
    /// Per region: child copies of its representative copy as (class,
    /// child copy index).
    pub rep_children: Vec<Vec<(usize, usize)>>,
}

/// Literals of `clause` through which a parent copy reaches `atoms`.
fn role(copy: &RegionCopy, atoms: &BTreeSet<GroundAtom>) -> Vec<usize> {
    let mut out = BTreeSet::new();
    for g in &copy.groundings {
        for (l, a) in g.iter().enumerate() {
            if atoms.contains(a) {
                out.insert(l);
            }
        }
    }
    out.into_iter().collect()
}

fn has_constants(c: &WeightedClause) -> bool {
    c.literals
        .iter()
        .any(|l| l.args.iter().any(|t| matches!(t, Term::Const(_))))
}

impl LiftedRegionGraph {
    /// Assembles a graph from regions and edges and resolves edge classes.
    pub fn new(
        mln: &Mln,
        regions: Vec<LiftedRegion>,
        edges: Vec<LiftedEdge>,
    ) -> Result<LiftedRegionGraph> {
        let global = LiftedModel::from_mln(mln)?;
        for e in &edges {
            if e.parent >= regions.len() || e.child >= regions.len() || e.parent == e.child {
                return Err(Error::RegionGraph(format!(
                    "bad edge {} -> {}",
                    e.parent, e.child
                )));
            }
        }
        let mut classes: Vec<EdgeClass> = Vec::new();
        let mut rep_children = vec![Vec::new(); regions.len()];
        for (ei, e) in edges.iter().enumerate() {
            let (p, c) = (&regions[e.parent], &regions[e.child]);
            let mut gp: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
            for v in &p.copies {
                let r = role(v, &c.copies[0].atoms);
                if !r.is_empty() {
                    *gp.entry(r).or_default() += 1;
                }
            }
            let base = classes.len();
            for (r, n) in &gp {
                classes.push(EdgeClass {
                    edge: ei,
                    role: r.clone(),
                    gp: *n,
                });
            }
            for (ui, u) in c.copies.iter().enumerate() {
                let r = role(&p.copies[0], &u.atoms);
                if r.is_empty() {
                    continue;
                }
                let Some(k) = gp.keys().position(|x| *x == r) else {
                    return Err(Error::RegionGraph(format!(
                        "edge {} -> {} is not symmetric under renaming of constants",
                        e.parent, e.child
                    )));
                };
                rep_children[e.parent].push((base + k, ui));
            }
        }
        let g = LiftedRegionGraph {
            mln: mln.clone(),
            global,
            structure: None,
            regions,
            edges,
            classes,
            rep_children,
        };
        g.topological_order()?;
        Ok(g)
    }

    pub fn parents(&self, r: usize) -> Vec<usize> {
        self.edges
            .iter()
            .filter(|e| e.child == r)
            .map(|e| e.parent)
            .collect()
    }

    pub fn children(&self, r: usize) -> Vec<usize> {
        self.edges
            .iter()
            .filter(|e| e.parent == r)
            .map(|e| e.child)
            .collect()
    }

    /// Classes of edges into region `r`.
    pub fn classes_into(&self, r: usize) -> Vec<usize> {
        (0..self.classes.len())
            .filter(|&k| self.edges[self.classes[k].edge].child == r)
            .collect()
    }

    pub fn topological_order(&self) -> Result<Vec<usize>> {
        let n = self.regions.len();
        let mut indeg = vec![0usize; n];
        for e in &self.edges {
            indeg[e.child] += 1;
        }
        let mut ready: Vec<usize> = (0..n).rev().filter(|&v| indeg[v] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(v) = ready.pop() {
            order.push(v);
            for c in self.children(v) {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    ready.push(c);
                }
            }
        }
        if order.len() != n {
            return Err(Error::RegionGraph("lifted region graph has a cycle".into()));
        }
        Ok(order)
    }

    /// Tags of global group `h` in region `r`'s factorization.
    pub fn group_tags(&self, r: usize, h: usize) -> Option<Vec<Tag>> {
        let reg = &self.regions[r];
        let target = &self.global.groups[h];
        if reg.is_ground() {
            let holds = reg.copies[0].atoms.iter().any(|a| target.contains(a));
            return holds.then(|| target.slots.iter().map(|_| Tag::G).collect());
        }
        let g = reg.model.groups.iter().position(|x| x == target)?;
        reg.factorization
            .nodes
            .iter()
            .find(|n| n.group == g)
            .map(|n| n.tags.clone())
    }

    /// Every position the child counts is counted by the parent too.
    pub fn marginal_compatible(&self, rp: usize, rc: usize, h: usize) -> bool {
        match (self.group_tags(rp, h), self.group_tags(rc, h)) {
            (Some(p), Some(c)) => p
                .iter()
                .zip(&c)
                .all(|(tp, tc)| *tc != Tag::C || *tp == Tag::C),
            _ => false,
        }
    }

    /// Shared groups agree, the child's factorization is a single path and
    /// the child's atoms are jointly accessible in the parent.
    pub fn message_compatible(&self, rp: usize, rc: usize) -> Result<bool> {
        let child = &self.regions[rc];
        for g in 0..child.model.groups.len() {
            let a = &child.model.atoms[child.model.group_atoms[g][0]];
            let Some(&i) = self.global_index().get(a) else {
                return Ok(false);
            };
            if !self.marginal_compatible(rp, rc, self.global.atom_group[i]) {
                return Ok(false);
            }
        }
        let f = &child.factorization;
        if f.roots.len() > 1 || f.nodes.iter().any(|n| n.children.len() > 1) {
            return Ok(false);
        }
        let parent = &self.regions[rp];
        let Some(&(_, u)) = self.rep_children[rp]
            .iter()
            .find(|(k, _)| self.edges[self.classes[*k].edge].child == rc)
        else {
            return Ok(false);
        };
        let atoms: Vec<GroundAtom> = child.copies[u].atoms.iter().cloned().collect();
        jd_contains(&parent.model, &parent.circuit, &atoms)
    }

    fn global_index(&self) -> HashMap<&GroundAtom, usize> {
        self.global
            .atoms
            .iter()
            .enumerate()
            .map(|(i, a)| (a, i))
            .collect()
    }

    /// Global groups whose atoms region `r` holds.
    pub fn region_groups(&self, r: usize) -> BTreeSet<usize> {
        let index = self.global_index();
        self.regions[r].copies[0]
            .atoms
            .iter()
            .filter_map(|a| index.get(a).map(|&i| self.global.atom_group[i]))
            .collect()
    }

    /// Deterministic text form.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        if let Some(st) = self.structure {
            let _ = writeln!(s, "structure {st}");
        }
        for (i, r) in self.regions.iter().enumerate() {
            let _ = writeln!(
                s,
                "region {i}: {} copies={}",
                r.label(&self.mln),
                r.copies.len()
            );
            for line in r.factorization.to_text(&r.model).lines() {
                let _ = writeln!(s, "  {line}");
            }
        }
        for (k, c) in self.classes.iter().enumerate() {
            let e = self.edges[c.edge];
            let _ = writeln!(
                s,
                "edge {} -> {} class {k} role {:?} gp {}",
                e.parent, e.child, c.role, c.gp
            );
        }
        s
    }
}

/// Whether `h` (a group of region model `model`) sits on one counted part
/// holding all its atoms, with a single copy all the way from the root.
fn counts_whole(region: &LiftedRegion, g: usize) -> bool {
    let c = &region.circuit;
    let v = c.node_of_group[g];
    let nd = &c.nodes[v];
    if nd.parts.len() != 1 || nd.parts[0].mode != PartMode::Count {
        return false;
    }
    if nd.parts[0].atoms.len() != region.model.group_atoms[g].len() {
        return false;
    }
    let mut u = Some(v);
    while let Some(x) = u {
        if c.nodes[x].copies() != 1 {
            return false;
        }
        u = c.nodes[x].parent;
    }
    true
}

/// Top region of clause `j` for LL with groups `count` (global) counted whole.
fn ll_top(
    mln: &Mln,
    global: &LiftedModel,
    j: usize,
    count: &BTreeSet<usize>,
) -> Result<LiftedRegion> {
    let clause = &mln.clauses[j];
    let model = LiftedModel::from_clauses(mln, std::slice::from_ref(clause))?;
    let local: Vec<usize> = count
        .iter()
        .filter_map(|&h| model.groups.iter().position(|x| *x == global.groups[h]))
        .collect();
    let opts = PlanOptions {
        count: local.clone(),
        ..Default::default()
    };
    let r = make_lifted_region(mln, clause, &[], None, None, &opts)?;
    match local.iter().find(|&&g| !counts_whole(&r, g)) {
        Some(&g) => Err(Error::Factorization(format!(
            "{} is not counted whole",
            r.model.group_label(g)
        ))),
        None => Ok(r),
    }
}

/// Builds one of the standard structures. The MLN should be in exchangeable
/// normal form and free of constants.
pub fn construct_structure(mln: &Mln, structure: Structure) -> Result<LiftedRegionGraph> {
    if mln.clauses.iter().any(has_constants) {
        return Err(Error::Model(
            "region graph structures need constant-free clauses".into(),
        ));
    }
    let global = LiftedModel::from_mln(mln)?;
    let n = mln.clauses.len();
    // global groups of each clause
    let clause_groups: Vec<BTreeSet<usize>> = mln
        .clauses
        .iter()
        .map(|c| {
            c.literals
                .iter()
                .map(|l| {
                    let g = crate::mln::AtomGroup::of_literal(c, l);
                    global
                        .groups
                        .iter()
                        .position(|x| *x == g)
                        .expect("global group")
                })
                .collect()
        })
        .collect();
    let mut holders: BTreeMap<usize, usize> = BTreeMap::new();
    for gs in &clause_groups {
        for &h in gs {
            *holders.entry(h).or_default() += 1;
        }
    }
    let shared: BTreeSet<usize> = holders
        .iter()
        .filter(|(_, &k)| k >= 2)
        .map(|(&h, _)| h)
        .collect();
    let all: BTreeSet<usize> = holders.keys().copied().collect();

    let mut tops = Vec::with_capacity(n);
    let mut counted: BTreeSet<usize> = BTreeSet::new();
    let ground_children: BTreeSet<usize>;
    match structure {
        Structure::GG => {
            for c in &mln.clauses {
                tops.push(make_lifted_region(
                    mln,
                    c,
                    &c.vars(),
                    None,
                    None,
                    &Default::default(),
                )?);
            }
            ground_children = all.clone();
        }
        Structure::LG => {
            for c in &mln.clauses {
                tops.push(make_lifted_region(
                    mln,
                    c,
                    &[],
                    None,
                    None,
                    &Default::default(),
                )?);
            }
            ground_children = shared;
        }
        Structure::LL => {
            // groups each holder can count on its own, then drop groups until
            // every holder can count its share jointly
            counted = shared
                .iter()
                .copied()
                .filter(|&h| {
                    let one = BTreeSet::from([h]);
                    (0..n)
                        .filter(|&j| clause_groups[j].contains(&h))
                        .all(|j| ll_top(mln, &global, j, &one).is_ok())
                })
                .collect();
            'outer: loop {
                tops.clear();
                for j in 0..n {
                    let mine: BTreeSet<usize> =
                        counted.intersection(&clause_groups[j]).copied().collect();
                    match ll_top(mln, &global, j, &mine) {
                        Ok(r) => tops.push(r),
                        Err(_) => {
                            let last = *mine.iter().next_back().expect("a counted group");
                            counted.remove(&last);
                            continue 'outer;
                        }
                    }
                }
                break;
            }
            ground_children = shared.difference(&counted).copied().collect();
        }
    }

    let mut regions = tops;
    let mut edges = Vec::new();
    for h in all
        .iter()
        .copied()
        .filter(|h| counted.contains(h) || ground_children.contains(h))
    {
        let clause = group_clause(mln, &global.groups[h]);
        let region = if counted.contains(&h) {
            let model = LiftedModel::from_clauses(mln, std::slice::from_ref(&clause))?;
            let f = crate::lifted::LiftedFactorization::chain(&[(
                0,
                model.groups[0].slots.iter().map(|_| Tag::C).collect(),
            )]);
            make_lifted_region(mln, &clause, &[], Some(h), Some(f), &Default::default())?
        } else {
            make_lifted_region(
                mln,
                &clause,
                &clause.vars(),
                Some(h),
                None,
                &Default::default(),
            )?
        };
        let r = regions.len();
        regions.push(region);
        for (j, gs) in clause_groups.iter().enumerate() {
            if gs.contains(&h) {
                edges.push(LiftedEdge {
                    parent: j,
                    child: r,
                });
            }
        }
    }
    let mut g = LiftedRegionGraph::new(mln, regions, edges)?;
    g.structure = Some(structure);
    for e in &g.edges {
        if !g.message_compatible(e.parent, e.child)? {
            return Err(Error::RegionGraph(format!(
                "edge {} -> {} is not message compatible",
                e.parent, e.child
            )));
        }
    }
    Ok(g)
}

/// Ground region graph simulated from a lifted one, with the provenance of
/// every ground region and edge.
#[derive(Debug, Clone)]
pub struct SimulatedGraph {
    pub graph: GroundRegionGraph,
    /// (lifted region, copy index) of every ground region.
    pub origin: Vec<(usize, usize)>,
    /// First ground region of every lifted region.
    pub offsets: Vec<usize>,
    /// (lifted edge, role) of every ground edge.
    pub edge_roles: Vec<(usize, Vec<usize>)>,
}

fn simulate(
    mln: &Mln,
    clauses: &[&WeightedClause],
    copies: &[Vec<RegionCopy>],
    edges: &[LiftedEdge],
) -> Result<SimulatedGraph> {
    let universe: Vec<GroundAtom> = ground_atoms(mln).into_iter().collect();
    let index: HashMap<&GroundAtom, usize> =
        universe.iter().enumerate().map(|(i, a)| (a, i)).collect();
    let mut regions = Vec::new();
    let mut origin = Vec::new();
    let mut offsets = Vec::new();
    for (r, cs) in copies.iter().enumerate() {
        offsets.push(regions.len());
        let clause = clauses[r];
        for (k, copy) in cs.iter().enumerate() {
            let atoms: Vec<usize> = copy.atoms.iter().map(|a| index[a]).collect();
            let mut factors = Vec::new();
            if clause.weight != 0.0 {
                for g in &copy.groundings {
                    let mut scope: Vec<usize> = g.iter().map(|a| index[a]).collect();
                    scope.sort_unstable();
                    scope.dedup();
                    let lits: Vec<(bool, usize)> = clause
                        .literals
                        .iter()
                        .zip(g)
                        .map(|(l, a)| {
                            (
                                l.positive,
                                scope.binary_search(&index[a]).expect("scope atom"),
                            )
                        })
                        .collect();
                    factors.push(clause_factor(scope, &lits, clause.weight));
                }
            }
            regions.push(GroundRegion { atoms, factors });
            origin.push((r, k));
        }
    }
    let mut ground_edges = Vec::new();
    let mut edge_roles = Vec::new();
    for (ei, e) in edges.iter().enumerate() {
        for (pi, p) in copies[e.parent].iter().enumerate() {
            for (ci, c) in copies[e.child].iter().enumerate() {
                if p.atoms.intersection(&c.atoms).next().is_none() {
                    continue;
                }
                ground_edges.push((offsets[e.parent] + pi, offsets[e.child] + ci));
                edge_roles.push((ei, role(p, &c.atoms)));
            }
        }
    }
    let graph = GroundRegionGraph {
        atoms: universe,
        regions,
        edges: ground_edges,
    };
    graph.check_labels()?;
    Ok(SimulatedGraph {
        graph,
        origin,
        offsets,
        edge_roles,
    })
}

/// The ground region graph a lifted one stands for, at the model's own
/// domain sizes.
pub fn simulate_ground_graph(lrg: &LiftedRegionGraph) -> Result<SimulatedGraph> {
    let clauses: Vec<&WeightedClause> = lrg.regions.iter().map(|r| &r.clause).collect();
    let copies: Vec<Vec<RegionCopy>> = lrg.regions.iter().map(|r| r.copies.clone()).collect();
    simulate(&lrg.mln, &clauses, &copies, &lrg.edges)
}

impl SimulatedGraph {
    /// Edge class of every ground edge.
    pub fn edge_classes(&self, lrg: &LiftedRegionGraph) -> Result<Vec<usize>> {
        self.edge_roles
            .iter()
            .map(|(e, role)| {
                lrg.classes
                    .iter()
                    .position(|c| c.edge == *e && c.role == *role)
                    .ok_or_else(|| {
                        Error::RegionGraph(format!("ground edge of lifted edge {e} has no class"))
                    })
            })
            .collect()
    }

    fn copies_of(&self, r: usize) -> std::ops::Range<usize> {
        let end = self
            .offsets
            .get(r + 1)
            .copied()
            .unwrap_or(self.origin.len());
        self.offsets[r]..end
    }

    fn descendants_of(&self, v: usize) -> BTreeSet<usize> {
        let children = self.graph.children();
        let mut seen = BTreeSet::new();
        let mut stack = vec![v];
        while let Some(x) = stack.pop() {
            for &c in &children[x] {
                if seen.insert(c) {
                    stack.push(c);
                }
            }
        }
        seen
    }

    /// Parents in lifted region `rp` of the first copy of region `r`.
    pub fn stat_gp(&self, r: usize, rp: usize) -> usize {
        let v = self.offsets[r];
        let range = self.copies_of(rp);
        self.graph
            .edges
            .iter()
            .filter(|&&(a, b)| b == v && range.contains(&a))
            .count()
    }

    /// Descendants in lifted region `rd` of the first copy of region `r`.
    pub fn stat_gd(&self, r: usize, rd: usize) -> usize {
        let range = self.copies_of(rd);
        self.descendants_of(self.offsets[r])
            .into_iter()
            .filter(|d| range.contains(d))
            .count()
    }

    /// For the first copy of `r` and its first descendant in `rd`: parents
    /// of that descendant in `rdp` outside the copy and its descendants.
    pub fn stat_ge(&self, r: usize, rd: usize, rdp: usize) -> usize {
        let v = self.offsets[r];
        let mut inside = self.descendants_of(v);
        let range = self.copies_of(rd);
        let Some(d) = inside.iter().copied().find(|d| range.contains(d)) else {
            return 0;
        };
        inside.insert(v);
        let prange = self.copies_of(rdp);
        self.graph
            .edges
            .iter()
            .filter(|&&(a, b)| b == d && prange.contains(&a) && !inside.contains(&a))
            .count()
    }
}

/// Checks the ground graph a lifted graph stands for: child atoms within
/// parents, each ground formula counted once, running intersection. Domains
/// larger than `witness` are shrunk to it first.
pub fn validate_lifted(lrg: &LiftedRegionGraph, witness: usize) -> Result<bool> {
    let mln = if lrg.mln.domains.iter().any(|d| d.len() > witness) {
        lrg.mln.with_domain_size(witness)
    } else {
        lrg.mln.clone()
    };
    let clauses: Vec<&WeightedClause> = lrg.regions.iter().map(|r| &r.clause).collect();
    let copies: Vec<Vec<RegionCopy>> = lrg
        .regions
        .iter()
        .map(|r| region_copies(&mln, &r.clause, &r.grounded))
        .collect();
    let sim = match simulate(&mln, &clauses, &copies, &lrg.edges) {
        Ok(s) => s,
        Err(Error::RegionGraph(_)) => return Ok(false),
        Err(e) => return Err(e),
    };
    let mut have: Vec<String> = sim
        .graph
        .regions
        .iter()
        .flat_map(|r| r.factors.iter().map(|f| format!("{:?}", f)))
        .collect();
    let mut want: Vec<String> = Vec::new();
    let index: HashMap<GroundAtom, usize> = sim
        .graph
        .atoms
        .iter()
        .cloned()
        .enumerate()
        .map(|(i, a)| (a, i))
        .collect();
    for gc in ground_formulas(&mln) {
        if gc.weight == 0.0 {
            continue;
        }
        let mut scope: Vec<usize> = gc.literals.iter().map(|(_, a)| index[a]).collect();
        scope.sort_unstable();
        scope.dedup();
        let lits: Vec<(bool, usize)> = gc
            .literals
            .iter()
            .map(|(s, a)| (*s, scope.binary_search(&index[a]).expect("scope atom")))
            .collect();
        want.push(format!("{:?}", clause_factor(scope, &lits, gc.weight)));
    }
    have.sort();
    want.sort();
    if have != want {
        return Ok(false);
    }
    Ok(validate_running_intersection(&sim.graph)?.is_none())
}
