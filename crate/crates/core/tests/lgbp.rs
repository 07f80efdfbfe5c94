mod common;

use common::{r_or_s, random_small_mln, rst, two_clause};
use lgbp_core::lgbp::{run_lgbp, EngineOptions, LgbpState, Message};
use lgbp_core::mln::{parse_mln, Mln};
use lgbp_core::oracle::{
    brute_force_atom_marginals, gbp_run, ground_markov_network, GroundGbp, PropagationConfig,
};
use lgbp_core::regions::{
    construct_structure, simulate_ground_graph, LiftedRegionGraph, Structure,
};
use proptest::prelude::*;

fn message_entry(m: &Message, x: usize) -> f64 {
    match m {
        Message::Tabular { values, .. } => values[x],
        Message::Counted { values, .. } => values[x.count_ones() as usize],
    }
}

/// Sweeps lifted and ground propagation side by side, comparing every
/// ground message with its class's message and the residuals.
fn lockstep(lrg: &LiftedRegionGraph, sweeps: usize, damping: f64) -> Result<(), TestCaseError> {
    let sim = simulate_ground_graph(lrg).unwrap();
    let classes = sim.edge_classes(lrg).unwrap();
    let mut ground = GroundGbp::new(&sim.graph).unwrap();
    let mut lifted = LgbpState::new(lrg, &EngineOptions::default()).unwrap();
    for s in 0..sweeps {
        let rg = ground.sweep(damping);
        let rl = lifted.sweep(damping).unwrap();
        prop_assert!((rg - rl).abs() < 1e-12, "sweep {s}: residual {rg} vs {rl}");
        for (e, &k) in classes.iter().enumerate() {
            for (x, &v) in ground.messages[e].iter().enumerate() {
                let w = message_entry(&lifted.messages[k], x);
                prop_assert!(
                    (v - w).abs() < 1e-12,
                    "sweep {s} edge {e} entry {x}: {v} vs {w}"
                );
            }
        }
    }
    Ok(())
}

fn same_marginals(
    mln: &Mln,
    lrg: &LiftedRegionGraph,
    config: &PropagationConfig,
) -> Result<(), TestCaseError> {
    let sim = simulate_ground_graph(lrg).unwrap();
    let g = gbp_run(&sim.graph, config).unwrap();
    let l = run_lgbp(lrg, config, &EngineOptions::default()).unwrap();
    prop_assert_eq!(g.iterations, l.iterations);
    prop_assert_eq!(g.converged, l.converged);
    for (a, p) in sim.graph.atoms.iter().zip(&g.atom_marginals) {
        if p.is_nan() {
            continue;
        }
        let q = l.marginals[a];
        prop_assert!((p - q).abs() < 1e-9, "{}: {p} vs {q}", mln.fmt_atom(a));
    }
    Ok(())
}

fn fixtures() -> Vec<Mln> {
    let mut v = vec![
        r_or_s(0.9),
        two_clause(2, 0.7, -1.1),
        two_clause(3, 1.2, 0.4),
        rst(2, [0.5, -0.8, 1.1]),
        rst(3, [1.5, 0.3, -0.6]),
        parse_mln("domain d={1,2,3}\npredicate F(d,d)\npredicate S(d)\npredicate C(d)\n0.8 :: !S(x) v C(x)\n1.1 :: !F(x,y) v !S(x) v S(y) ; x != y").unwrap(),
    ];
    v.extend((0..20).map(random_small_mln));
    v
}

#[test]
fn lockstep_with_ground_propagation() {
    for (i, mln) in fixtures().iter().enumerate() {
        for s in Structure::ALL {
            let Ok(lrg) = construct_structure(mln, s) else {
                continue;
            };
            if let Err(e) = lockstep(&lrg, 12, 0.5) {
                panic!("fixture {i} {s}: {e}");
            }
        }
    }
}

#[test]
fn marginals_match_ground_propagation() {
    let config = PropagationConfig {
        max_iterations: 200,
        ..Default::default()
    };
    for (i, mln) in fixtures().iter().enumerate() {
        for s in Structure::ALL {
            let Ok(lrg) = construct_structure(mln, s) else {
                continue;
            };
            if let Err(e) = same_marginals(mln, &lrg, &config) {
                panic!("fixture {i} {s}: {e}");
            }
        }
    }
}

#[test]
fn ll_tree_is_exact() {
    for d in 2..=3 {
        let mln = two_clause(d, 0.9, -1.3);
        let lrg = construct_structure(&mln, Structure::LL).unwrap();
        let res = run_lgbp(
            &lrg,
            &PropagationConfig::default(),
            &EngineOptions::default(),
        )
        .unwrap();
        assert!(res.converged);
        let fg = ground_markov_network(&mln);
        let exact = brute_force_atom_marginals(&fg).unwrap();
        for (a, p) in fg.variables.iter().zip(&exact) {
            assert!((res.marginals[a] - p).abs() < 1e-6, "d = {d}");
        }
    }
}

#[test]
fn expanded_messages_reproduce_counted_ones() {
    for mln in [two_clause(4, 0.8, -0.5), rst(3, [0.4, 1.0, -0.9])] {
        let lrg = construct_structure(&mln, Structure::LL).unwrap();
        let config = PropagationConfig::default();
        let a = run_lgbp(&lrg, &config, &EngineOptions::default()).unwrap();
        let b = run_lgbp(
            &lrg,
            &config,
            &EngineOptions {
                expand_counted: true,
            },
        )
        .unwrap();
        for (x, y) in a.marginals.values().zip(b.marginals.values()) {
            assert!((x - y).abs() < 1e-9);
        }
    }
}

#[test]
fn initial_messages_are_uniform() {
    let lrg = construct_structure(&two_clause(5, 0.1, 0.2), Structure::LL).unwrap();
    let s = LgbpState::new(&lrg, &EngineOptions::default()).unwrap();
    assert_eq!(s.messages.len(), 2);
    for m in &s.messages {
        let Message::Counted { n, values, .. } = m else {
            panic!("expected a counted message");
        };
        assert_eq!(*n, 5);
        assert!(values.iter().all(|v| (v - 1.0 / 32.0).abs() < 1e-15));
        assert!((m.mass() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn zero_weights_give_one_half() {
    let mln = two_clause(3, 0.0, 0.0);
    for s in Structure::ALL {
        let lrg = construct_structure(&mln, s).unwrap();
        let res = run_lgbp(
            &lrg,
            &PropagationConfig::default(),
            &EngineOptions::default(),
        )
        .unwrap();
        assert!(res.converged);
        assert_eq!(res.iterations, 1);
        for p in res.marginals.values() {
            assert!((p - 0.5).abs() < 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn random_models_in_lockstep(seed in any::<u64>(), damping in 0.0f64..0.8) {
        let mln = random_small_mln(seed);
        for s in Structure::ALL {
            let Ok(lrg) = construct_structure(&mln, s) else { continue };
            lockstep(&lrg, 6, damping)?;
        }
    }
}
