mod common;

use std::collections::BTreeMap;

use common::{r_or_s, random_small_mln, rst, two_clause};
use lgbp_core::lifted::{LiftedFactorization, Tag};
use lgbp_core::mln::{ground_atoms, ground_formulas, parse_mln, GroundAtom, Mln};
use lgbp_core::oracle::{
    clause_factor, validate_running_intersection, GroundRegion, GroundRegionGraph,
};
use lgbp_core::regions::{
    construct_structure, make_lifted_region, simulate_ground_graph, validate_lifted, LiftedEdge,
    LiftedRegionGraph, Structure,
};
use proptest::prelude::*;

/// Bethe graph straight from the ground network: one region per ground
/// formula over one region per atom.
fn bethe(mln: &Mln) -> GroundRegionGraph {
    let atoms: Vec<GroundAtom> = ground_atoms(mln).into_iter().collect();
    let idx = |a: &GroundAtom| atoms.iter().position(|b| b == a).unwrap();
    let mut regions = Vec::new();
    let mut used = std::collections::BTreeSet::new();
    for gc in ground_formulas(mln) {
        let mut scope: Vec<usize> = gc.literals.iter().map(|(_, a)| idx(a)).collect();
        scope.sort();
        scope.dedup();
        let lits: Vec<(bool, usize)> = gc
            .literals
            .iter()
            .map(|(s, a)| (*s, scope.iter().position(|&x| x == idx(a)).unwrap()))
            .collect();
        used.extend(scope.iter().copied());
        regions.push(GroundRegion {
            atoms: scope.clone(),
            factors: vec![clause_factor(scope, &lits, gc.weight)],
        });
    }
    let tops = regions.len();
    let mut edges = Vec::new();
    for a in used {
        regions.push(GroundRegion {
            atoms: vec![a],
            factors: vec![],
        });
        for t in 0..tops {
            if regions[t].atoms.contains(&a) {
                edges.push((t, regions.len() - 1));
            }
        }
    }
    GroundRegionGraph {
        atoms,
        regions,
        edges,
    }
}

#[test]
fn gg_simulates_the_bethe_graph() {
    for seed in 0..40 {
        let mln = random_small_mln(seed);
        let lrg = construct_structure(&mln, Structure::GG).unwrap();
        let sim = simulate_ground_graph(&lrg).unwrap();
        assert_eq!(
            sim.graph.canonical_labels(),
            bethe(&mln).canonical_labels(),
            "seed {seed}"
        );
    }
}

#[test]
fn ll_two_clause_is_a_tree() {
    for d in 2..=10 {
        let lrg = construct_structure(&two_clause(d, 0.3, -0.8), Structure::LL).unwrap();
        let sim = simulate_ground_graph(&lrg).unwrap();
        assert!(sim.graph.is_tree(), "d = {d}");
        assert_eq!(sim.graph.regions.len(), 3);
        // one joint message over every grounding of R
        let child = &lrg.regions[2];
        assert_eq!(child.copies.len(), 1);
        assert_eq!(child.copy_size(), d);
        assert_eq!(lrg.classes.len(), 2);
    }
}

#[test]
fn ll_two_clause_matches_hand_construction() {
    for d in 2..=3 {
        let mln = two_clause(d, 0.3, -0.8);
        let lrg = construct_structure(&mln, Structure::LL).unwrap();
        let sim = simulate_ground_graph(&lrg).unwrap();
        let atoms: Vec<GroundAtom> = ground_atoms(&mln).into_iter().collect();
        let idx = |a: &GroundAtom| atoms.iter().position(|b| b == a).unwrap();
        let mut regions = Vec::new();
        for (ci, other) in [(0usize, 1usize), (1, 2)] {
            let mut scope_all = std::collections::BTreeSet::new();
            let mut factors = Vec::new();
            for x in 0..d {
                for y in 0..d {
                    let r = idx(&GroundAtom::new(0, vec![x]));
                    let o = idx(&GroundAtom::new(other, vec![y]));
                    scope_all.insert(r);
                    scope_all.insert(o);
                    let scope = vec![r.min(o), r.max(o)];
                    factors.push(clause_factor(
                        scope,
                        &[(true, 0), (true, 1)],
                        mln.clauses[ci].weight,
                    ));
                }
            }
            regions.push(GroundRegion {
                atoms: scope_all.into_iter().collect(),
                factors,
            });
        }
        regions.push(GroundRegion {
            atoms: (0..d).map(|x| idx(&GroundAtom::new(0, vec![x]))).collect(),
            factors: vec![],
        });
        let hand = GroundRegionGraph {
            atoms,
            regions,
            edges: vec![(0, 2), (1, 2)],
        };
        assert_eq!(sim.graph.canonical_labels(), hand.canonical_labels());
    }
}

#[test]
fn gp_of_an_atom_region_under_bethe() {
    let mln = r_or_s(0.5);
    let lrg = construct_structure(&mln, Structure::GG).unwrap();
    let sim = simulate_ground_graph(&lrg).unwrap();
    // regions: the formula, then the R and S atom regions
    assert_eq!(sim.stat_gp(1, 0), 2);
    assert_eq!(sim.stat_gd(0, 1), 1);
    let r_edge = lrg.edges.iter().position(|e| e.child == 1).unwrap();
    let gp: usize = lrg
        .classes
        .iter()
        .filter(|c| c.edge == r_edge)
        .map(|c| c.gp)
        .sum();
    assert_eq!(gp, 2);
}

#[test]
fn fully_lifted_statistics_are_one() {
    let lrg = construct_structure(&two_clause(4, 0.3, 0.2), Structure::LL).unwrap();
    let sim = simulate_ground_graph(&lrg).unwrap();
    assert_eq!(sim.stat_gp(2, 0), 1);
    assert_eq!(sim.stat_gd(0, 2), 1);
    // the counted R region's other parent lies outside region 0's subtree
    assert_eq!(sim.stat_ge(0, 2, 1), 1);
    assert_eq!(sim.stat_ge(0, 2, 0), 0);
}

/// Ground formulas of clause `j` holding `atom`.
fn formulas_holding(mln: &Mln, j: usize, atom: &GroundAtom) -> usize {
    ground_formulas(mln)
        .iter()
        .filter(|g| g.clause == j && g.literals.iter().any(|(_, a)| a == atom))
        .count()
}

fn check_statistics(mln: &Mln, structure: Structure) {
    let Ok(lrg) = construct_structure(mln, structure) else {
        return;
    };
    let sim = simulate_ground_graph(&lrg).unwrap();
    let parents = sim.graph.parents();
    for (ei, e) in lrg.edges.iter().enumerate() {
        let gp = sim.stat_gp(e.child, e.parent);
        let by_class: usize = lrg
            .classes
            .iter()
            .filter(|c| c.edge == ei)
            .map(|c| c.gp)
            .sum();
        assert_eq!(gp, by_class, "{structure} edge {ei}");
        // the same for every copy of the child
        for (v, &(r, _)) in sim.origin.iter().enumerate() {
            if r != e.child {
                continue;
            }
            let n = parents[v]
                .iter()
                .filter(|&&p| sim.origin[p].0 == e.parent)
                .count();
            assert_eq!(n, gp, "{structure} edge {ei} copy {v}");
        }
        // ground formulas per ground atom under the Bethe structure
        if structure == Structure::GG {
            let atom = lrg.regions[e.child].copies[0].atoms.iter().next().unwrap();
            assert_eq!(gp, formulas_holding(mln, e.parent, atom));
        }
        // copy-independence of descendant counts
        let children = sim.graph.children();
        let gd = sim.stat_gd(e.parent, e.child);
        for (v, &(r, _)) in sim.origin.iter().enumerate() {
            if r == e.parent {
                let n = children[v]
                    .iter()
                    .filter(|&&c| sim.origin[c].0 == e.child)
                    .count();
                assert_eq!(n, gd);
            }
        }
    }
}

#[test]
fn statistics_match_explicit_counts() {
    let mut models = vec![
        two_clause(3, 0.2, 0.4),
        rst(3, [0.1, 0.2, 0.3]),
        r_or_s(0.5),
    ];
    for d in 2..=4 {
        models.push(two_clause(d, 0.5, -0.5));
    }
    models.extend((0..30).map(random_small_mln));
    for mln in &models {
        for s in Structure::ALL {
            check_statistics(mln, s);
        }
    }
}

#[test]
fn excluded_parents_under_bethe() {
    for d in 2..=4 {
        let mln = two_clause(d, 0.3, 0.6);
        let lrg = construct_structure(&mln, Structure::GG).unwrap();
        let sim = simulate_ground_graph(&lrg).unwrap();
        let r = lrg
            .regions
            .iter()
            .position(|r| r.group.is_some() && r.model.atoms[0].predicate == 0)
            .unwrap();
        // the first clause-0 copy holds R(1); clause-1 copies holding R(1)
        assert_eq!(sim.stat_ge(0, r, 1), d);
        assert_eq!(sim.stat_ge(0, r, 0), d - 1);
    }
}

#[test]
fn validity_of_standard_structures() {
    for mln in [
        two_clause(2, 0.1, 0.2),
        rst(3, [0.3, -0.2, 0.5]),
        r_or_s(1.0),
    ] {
        for s in Structure::ALL {
            let lrg = construct_structure(&mln, s).unwrap();
            assert!(validate_lifted(&lrg, 4).unwrap(), "{s}");
            let sim = simulate_ground_graph(&lrg).unwrap();
            assert!(validate_running_intersection(&sim.graph).unwrap().is_none());
        }
    }
}

#[test]
fn parents_without_a_common_child_break_running_intersection() {
    let mln = two_clause(2, 0.1, 0.2);
    let regions = (0..2)
        .map(|j| {
            make_lifted_region(&mln, &mln.clauses[j], &[], None, None, &Default::default()).unwrap()
        })
        .collect();
    let lrg = LiftedRegionGraph::new(&mln, regions, vec![]).unwrap();
    assert!(!validate_lifted(&lrg, 4).unwrap());
    let sim = simulate_ground_graph(&lrg).unwrap();
    assert!(validate_running_intersection(&sim.graph).unwrap().is_some());
}

#[test]
fn single_region_graph() {
    let mln = r_or_s(0.7);
    let r =
        make_lifted_region(&mln, &mln.clauses[0], &[], None, None, &Default::default()).unwrap();
    let lrg = LiftedRegionGraph::new(&mln, vec![r], vec![]).unwrap();
    assert!(validate_lifted(&lrg, 4).unwrap());
    assert_eq!(simulate_ground_graph(&lrg).unwrap().graph.regions.len(), 1);
}

#[test]
fn coverage_of_lifted_regions() {
    let mln = r_or_s(0.7);
    let c = &mln.clauses[0];
    let counted = LiftedFactorization::chain(&[(0, vec![Tag::C]), (1, vec![Tag::C])]);
    assert!(make_lifted_region(&mln, c, &[], None, Some(counted), &Default::default()).is_ok());
    let decomposed = LiftedFactorization::chain(&[(0, vec![Tag::D]), (1, vec![Tag::D])]);
    assert!(make_lifted_region(&mln, c, &[], None, Some(decomposed), &Default::default()).is_err());
    // fully grounded: one copy per grounding
    let r = make_lifted_region(&mln, c, &c.vars(), None, None, &Default::default()).unwrap();
    assert_eq!(r.copies.len(), 4);
    // partial grounding is not supported
    assert!(
        make_lifted_region(&mln, c, &["x".to_string()], None, None, &Default::default()).is_err()
    );
}

#[test]
fn compatibility_predicates() {
    let mln = two_clause(3, 0.4, 0.4);
    let lrg = construct_structure(&mln, Structure::LL).unwrap();
    for e in &lrg.edges {
        assert!(lrg.message_compatible(e.parent, e.child).unwrap());
    }
    // parent grounds R while the child counts it
    let lg = construct_structure(&mln, Structure::GG).unwrap();
    let ll_child = &lrg.regions[2];
    let mut regions = vec![lg.regions[0].clone(), ll_child.clone()];
    regions[1].group = ll_child.group;
    let mixed = LiftedRegionGraph::new(
        &mln,
        regions,
        vec![LiftedEdge {
            parent: 0,
            child: 1,
        }],
    )
    .unwrap();
    let h = ll_child.group.unwrap();
    assert!(!mixed.marginal_compatible(0, 1, h));
    assert!(mixed.marginal_compatible(1, 0, h));
    assert!(!mixed.message_compatible(0, 1).unwrap());

    // a child whose factorization branches is never compatible
    let m2 = parse_mln(
        "domain d={1,2}\npredicate S(d)\npredicate T(d)\n0 :: S(y)\n0 :: T(z)\n0.5 :: S(y) v T(z)",
    )
    .unwrap();
    let top =
        make_lifted_region(&m2, &m2.clauses[2], &[], None, None, &Default::default()).unwrap();
    let forest =
        LiftedFactorization::from_parents(&[(0, vec![Tag::C], None), (1, vec![Tag::C], None)]);
    let child = make_lifted_region(
        &m2,
        &m2.clauses[2],
        &[],
        None,
        Some(forest),
        &Default::default(),
    );
    if let Ok(child) = child {
        let g = LiftedRegionGraph::new(
            &m2,
            vec![top, child],
            vec![LiftedEdge {
                parent: 0,
                child: 1,
            }],
        )
        .unwrap();
        assert!(!g.message_compatible(0, 1).unwrap());
    }
}

#[test]
fn dump_is_deterministic() {
    let mln = rst(2, [0.1, 0.2, 0.3]);
    let a = construct_structure(&mln, Structure::LL).unwrap().dump();
    let b = construct_structure(&mln, Structure::LL).unwrap().dump();
    assert_eq!(a, b);
    assert!(a.starts_with("structure LL\n"));
}

#[test]
fn constants_are_rejected() {
    let mln =
        parse_mln("domain d={1,2}\npredicate R(d)\npredicate S(d)\n1 :: R(x) v S(1)").unwrap();
    assert!(construct_structure(&mln, Structure::LL).is_err());
}

fn class_counts(lrg: &LiftedRegionGraph) -> BTreeMap<usize, usize> {
    let mut out = BTreeMap::new();
    for c in &lrg.classes {
        *out.entry(c.edge).or_default() += 1;
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn simulated_edges_all_have_classes(seed in any::<u64>()) {
        let mln = random_small_mln(seed);
        for s in Structure::ALL {
            let Ok(lrg) = construct_structure(&mln, s) else { continue };
            let sim = simulate_ground_graph(&lrg).unwrap();
            let classes = sim.edge_classes(&lrg).unwrap();
            prop_assert_eq!(classes.len(), sim.graph.edges.len());
            prop_assert!(class_counts(&lrg).values().all(|&k| k >= 1));
            prop_assert!(validate_lifted(&lrg, 4).unwrap());
        }
    }
}
