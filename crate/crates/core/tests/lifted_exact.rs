mod common;

use common::{close, r_or_s, random_small_mln};
use lgbp_core::lifted::{
    atom_marginals, compile, default_factorization, enumerate_factorizations, evaluate_z,
    jd_contains, joint_marginal, leaf_count, validate_factorization, JointMarginal,
    LiftedFactorization, LiftedModel, Tag,
};
use lgbp_core::mln::{parse_mln, GroundAtom};
use lgbp_core::oracle::{
    brute_force_atom_marginals, brute_force_marginal, brute_force_z, ground_markov_network,
};
use proptest::prelude::*;

fn left(m: &LiftedModel) -> LiftedFactorization {
    let _ = m;
    LiftedFactorization::chain(&[(0, vec![Tag::C]), (1, vec![Tag::D])])
}

fn right() -> LiftedFactorization {
    LiftedFactorization::chain(&[(0, vec![Tag::C]), (1, vec![Tag::C])])
}

fn atom(p: usize, args: &[usize]) -> GroundAtom {
    GroundAtom::new(p, args.to_vec())
}

#[test]
fn r_or_s_leaves() {
    let m = LiftedModel::from_mln(&r_or_s(2f64.ln())).unwrap();
    assert_eq!(leaf_count(&m, &left(&m)).unwrap(), 6);
    assert_eq!(leaf_count(&m, &right()).unwrap(), 9);
}

#[test]
fn r_or_s_partition_function() {
    let mln = r_or_s(2f64.ln());
    let m = LiftedModel::from_mln(&mln).unwrap();
    for e in [left(&m), right()] {
        assert!(validate_factorization(&m, &e).unwrap().is_none());
        assert!((evaluate_z(&m, &e).unwrap() - 161f64.ln()).abs() < 1e-12);
    }
    assert!((brute_force_z(&ground_markov_network(&mln)).unwrap() - 161f64.ln()).abs() < 1e-12);
}

#[test]
fn r_or_s_text_form() {
    let m = LiftedModel::from_mln(&r_or_s(1.0)).unwrap();
    assert_eq!(left(&m).to_text(&m), "R(v0) [C]\n  S(v0) [D] {y}\n");
    assert_eq!(
        default_factorization(&m, &Default::default()).unwrap(),
        left(&m)
    );
}

#[test]
fn zero_weight_counts_every_world() {
    let mln = parse_mln("domain d={1,2}\npredicate R(d)\n0 :: R(x)").unwrap();
    let m = LiftedModel::from_mln(&mln).unwrap();
    let e = LiftedFactorization::chain(&[(0, vec![Tag::C])]);
    assert_eq!(evaluate_z(&m, &e).unwrap(), 4f64.ln());
    assert_eq!(leaf_count(&m, &e).unwrap(), 3);
}

#[test]
fn decomposed_unit_clause() {
    let w: f64 = 0.8;
    let mln = parse_mln(&format!("domain d={{a,b,c}}\npredicate R(d)\n{w} :: R(x)")).unwrap();
    let m = LiftedModel::from_mln(&mln).unwrap();
    let e = LiftedFactorization::chain(&[(0, vec![Tag::D])]);
    let expected = 3.0 * (1.0 + w.exp()).ln();
    assert!((evaluate_z(&m, &e).unwrap() - expected).abs() < 1e-12);
    assert_eq!(leaf_count(&m, &e).unwrap(), 2);
}

#[test]
fn decomposer_missing_from_a_clause_is_rejected() {
    // y sits in S(y) v T(z) without T carrying it, so the copies for y = 1
    // and y = 2 share every T atom
    let src = "domain d={1,2}\npredicate R(d)\npredicate S(d)\npredicate T(d)\n\
               0.7 :: R(x) v S(y)\n-0.4 :: S(y) v T(z)\n";
    let mln = parse_mln(src).unwrap();
    let m = LiftedModel::from_mln(&mln).unwrap();
    let e = LiftedFactorization::chain(&[(0, vec![Tag::C]), (1, vec![Tag::D]), (2, vec![Tag::C])]);
    let v = validate_factorization(&m, &e).unwrap().expect("violation");
    assert!(v.contains("decomposer"), "{v}");

    // the copies are not independent: P(S(1), S(2)) does not factor
    let fg = ground_markov_network(&mln);
    let s1 = fg.var_index(&atom(1, &[0])).unwrap();
    let s2 = fg.var_index(&atom(1, &[1])).unwrap();
    let joint = brute_force_marginal(&fg, &[s1, s2]).unwrap();
    let p1 = joint[1] + joint[3];
    let p2 = joint[2] + joint[3];
    assert!((joint[3] - p1 * p2).abs() > 1e-6);
}

#[test]
fn jd_sets_of_r_or_s() {
    let m = LiftedModel::from_mln(&r_or_s(1.0)).unwrap();
    let l = compile(&m, &left(&m)).unwrap();
    let r = compile(&m, &right()).unwrap();
    let r1 = atom(0, &[0]);
    let r2 = atom(0, &[1]);
    let s1 = atom(1, &[0]);
    let s2 = atom(1, &[1]);
    assert!(jd_contains(&m, &l, &[r1.clone(), r2.clone(), s1.clone()]).unwrap());
    assert!(jd_contains(&m, &l, &[r1.clone(), r2.clone(), s2.clone()]).unwrap());
    assert!(!jd_contains(&m, &l, &[r1.clone(), r2.clone(), s1.clone(), s2.clone()]).unwrap());
    let all = [r1, r2, s1, s2];
    for mask in 0..16usize {
        let sub: Vec<GroundAtom> = (0..4)
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| all[i].clone())
            .collect();
        assert!(jd_contains(&m, &r, &sub).unwrap());
    }
    assert!(jd_contains(&m, &l, &[]).unwrap());
    assert!(matches!(
        joint_marginal(&m, &l, &all, None),
        Err(lgbp_core::Error::NotInJd(_))
    ));
}

#[test]
fn joint_marginals_match_enumeration() {
    let mln = r_or_s(2f64.ln());
    let m = LiftedModel::from_mln(&mln).unwrap();
    let fg = ground_markov_network(&mln);
    let c = compile(&m, &left(&m)).unwrap();
    let req = [atom(0, &[1]), atom(1, &[1]), atom(0, &[0])];
    let JointMarginal::Tabular { table, .. } = joint_marginal(&m, &c, &req, None).unwrap() else {
        panic!("expected a table");
    };
    let scope: Vec<usize> = req.iter().map(|a| fg.var_index(a).unwrap()).collect();
    let exact = brute_force_marginal(&fg, &scope).unwrap();
    for (a, b) in table.iter().zip(&exact) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn count_space_marginal_of_unit_clause() {
    let w: f64 = 0.6;
    let mln = parse_mln(&format!("domain d={{1,2}}\npredicate R(d)\n{w} :: R(x)")).unwrap();
    let m = LiftedModel::from_mln(&mln).unwrap();
    let c = compile(&m, &LiftedFactorization::chain(&[(0, vec![Tag::C])])).unwrap();
    let JointMarginal::Count { sizes, values, .. } =
        joint_marginal(&m, &c, &[atom(0, &[0]), atom(0, &[1])], None).unwrap()
    else {
        panic!("expected count space");
    };
    assert_eq!(sizes, vec![2]);
    let norm = (1.0 + w.exp()).powi(2);
    for (k, v) in values.iter().enumerate() {
        assert!((v - (k as f64 * w).exp() / norm).abs() < 1e-12);
    }
    let total: f64 = values
        .iter()
        .enumerate()
        .map(|(k, v)| [1.0, 2.0, 1.0][k] * v)
        .sum();
    assert!((total - 1.0).abs() < 1e-12);
}

#[test]
fn leaf_count_of_single_counted_group() {
    for n in 1..6 {
        let consts: Vec<String> = (1..=n).map(|i| i.to_string()).collect();
        let mln = parse_mln(&format!(
            "domain d={{{}}}\npredicate R(d)\n1 :: R(x)",
            consts.join(",")
        ))
        .unwrap();
        let m = LiftedModel::from_mln(&mln).unwrap();
        let e = LiftedFactorization::chain(&[(0, vec![Tag::C])]);
        assert_eq!(leaf_count(&m, &e).unwrap(), n as u128 + 1);
    }
}

fn check_model(seed: u64) -> Result<(), TestCaseError> {
    let mln = random_small_mln(seed);
    let Ok(m) = LiftedModel::from_mln(&mln) else {
        return Ok(());
    };
    let fg = ground_markov_network(&mln);
    let z = brute_force_z(&fg).unwrap();
    let all = enumerate_factorizations(&m, 400).unwrap();
    prop_assert!(!all.is_empty());
    for e in &all {
        let lz = evaluate_z(&m, e).unwrap();
        prop_assert!(
            close(lz, z, 1e-9),
            "seed {seed}: {} vs {z}\n{}",
            lz,
            e.to_text(&m)
        );
        // a valid decomposition in place of a count never adds leaves
        let base = leaf_count(&m, e).unwrap();
        for v in 0..e.nodes.len() {
            for p in 0..e.nodes[v].tags.len() {
                if e.nodes[v].tags[p] != Tag::C {
                    continue;
                }
                let mut d = e.clone();
                let slot = &m.groups[d.nodes[v].group].slots[p];
                for q in 0..d.nodes[v].tags.len() {
                    if m.groups[d.nodes[v].group].slots[q] == *slot {
                        d.nodes[v].tags[q] = Tag::D;
                    }
                }
                if validate_factorization(&m, &d).unwrap().is_none() {
                    prop_assert!(leaf_count(&m, &d).unwrap() <= base);
                }
            }
        }
    }
    // marginals under the default plan
    let e = default_factorization(&m, &Default::default()).unwrap();
    let c = compile(&m, &e).unwrap();
    let marg = atom_marginals(&m, &c, &c.evaluate(None)).unwrap();
    let exact = brute_force_atom_marginals(&fg).unwrap();
    for (i, a) in m.atoms.iter().enumerate() {
        let j = fg.var_index(a).unwrap();
        prop_assert!((marg[i] - exact[j]).abs() < 1e-9, "seed {seed} atom {i}");
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]
    #[test]
    fn every_valid_factorization_agrees_with_enumeration(seed in any::<u64>()) {
        check_model(seed)?;
    }
}

fn check_pairs(seed: u64) -> Result<(), TestCaseError> {
    let mln = random_small_mln(seed);
    let Ok(m) = LiftedModel::from_mln(&mln) else {
        return Ok(());
    };
    let fg = ground_markov_network(&mln);
    let e = default_factorization(&m, &Default::default()).unwrap();
    let c = compile(&m, &e).unwrap();
    let n = m.atoms.len().min(6);
    for i in 0..n {
        for j in (i + 1)..n {
            let req = [m.atoms[i].clone(), m.atoms[j].clone()];
            if !jd_contains(&m, &c, &req).unwrap() {
                continue;
            }
            let scope = [
                fg.var_index(&req[0]).unwrap(),
                fg.var_index(&req[1]).unwrap(),
            ];
            let exact = brute_force_marginal(&fg, &scope).unwrap();
            let table = joint_marginal(&m, &c, &req, None)
                .unwrap()
                .to_table(&req)
                .unwrap();
            for (a, b) in table.iter().zip(&exact) {
                prop_assert!(
                    (a - b).abs() < 1e-9,
                    "seed {seed} pair {i},{j}: {table:?} vs {exact:?}"
                );
            }
        }
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]
    #[test]
    fn accessible_pair_joints_agree_with_enumeration(seed in any::<u64>()) {
        check_pairs(seed)?;
    }
}
