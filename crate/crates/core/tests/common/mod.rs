#![allow(dead_code)]

use lgbp_core::mln::{parse_mln, shatter_to_enf, Mln};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Small random model over one domain: up to three predicates of arity one
/// or two, up to two clauses of up to three literals, occasional
/// inequalities. Shattered to exchangeable normal form. At most 16 ground
/// atoms.
pub fn random_small_mln(seed: u64) -> Mln {
    shatter_to_enf(&parse_mln(&random_small_source(seed)).expect("generated model parses"))
}

/// Source text of [`random_small_mln`] before shattering.
pub fn random_small_source(seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d: usize = rng.gen_range(1..=3);
    let n_pred: usize = rng.gen_range(1..=3);
    let mut arities = Vec::new();
    let mut atoms = 0;
    for _ in 0..n_pred {
        let mut a: usize = rng.gen_range(1..=2);
        if atoms + d.pow(a as u32) > 16 {
            a = 1;
        }
        atoms += d.pow(a as u32);
        arities.push(a);
    }
    let consts: Vec<String> = (1..=d).map(|i| i.to_string()).collect();
    let mut src = format!("domain d = {{{}}}\n", consts.join(", "));
    let names = ["P", "Q", "R"];
    for (i, &a) in arities.iter().enumerate() {
        let args = vec!["d"; a].join(", ");
        src.push_str(&format!("predicate {}({args})\n", names[i]));
    }
    let vars = ["x", "y", "z"];
    let n_clauses: usize = rng.gen_range(1..=2);
    for _ in 0..n_clauses {
        let n_lits: usize = rng.gen_range(1..=3);
        let mut lits = Vec::new();
        let mut used = Vec::new();
        for _ in 0..n_lits {
            let p = rng.gen_range(0..n_pred);
            let args: Vec<&str> = (0..arities[p]).map(|_| vars[rng.gen_range(0..3)]).collect();
            for a in &args {
                if !used.contains(a) {
                    used.push(*a);
                }
            }
            let neg = if rng.gen_bool(0.5) { "!" } else { "" };
            lits.push(format!("{neg}{}({})", names[p], args.join(", ")));
        }
        let w: f64 = rng.gen_range(-1.5..1.5);
        let mut line = format!("{w} :: {}", lits.join(" v "));
        if used.len() >= 2 && rng.gen_bool(0.3) {
            line.push_str(&format!(" ; {} != {}", used[0], used[1]));
        }
        src.push_str(&line);
        src.push('\n');
    }
    src
}

/// `R(x) v S(y)` over {1, 2}.
pub fn r_or_s(weight: f64) -> Mln {
    parse_mln(&format!(
        "domain d = {{1, 2}}\npredicate R(d)\npredicate S(d)\n{weight} :: R(x) v S(y)\n"
    ))
    .expect("model parses")
}

pub fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

fn over_domain(d: usize, body: &str) -> Mln {
    let consts: Vec<String> = (1..=d).map(|i| i.to_string()).collect();
    parse_mln(&format!("domain d = {{{}}}\n{body}", consts.join(", "))).expect("model parses")
}

/// `R(x) v S(y)` and `R(x) v T(z)`: the two clauses share only R.
pub fn two_clause(d: usize, w1: f64, w2: f64) -> Mln {
    over_domain(
        d,
        &format!("predicate R(d)\npredicate S(d)\npredicate T(d)\n{w1} :: R(x) v S(y)\n{w2} :: R(x) v T(z)\n"),
    )
}

/// Three clauses pairing R, S and T in a cycle.
pub fn rst(d: usize, w: [f64; 3]) -> Mln {
    over_domain(
        d,
        &format!(
            "predicate R(d)\npredicate S(d)\npredicate T(d)\n{} :: R(x) v S(y)\n{} :: S(y) v T(z)\n{} :: R(x) v T(z)\n",
            w[0], w[1], w[2]
        ),
    )
}
