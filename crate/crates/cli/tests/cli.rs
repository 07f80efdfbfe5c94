use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn lgbp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lgbp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const TWO_CLAUSE: &str = "domain d = {1, 2, 3}\npredicate R(d)\npredicate S(d)\npredicate T(d)\n\
                          0.9 :: R(x) v S(y)\n-1.3 :: R(x) v T(z)\n";

fn rows(out: &Output) -> Vec<(usize, f64)> {
    String::from_utf8_lossy(&out.stdout)
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split_whitespace().collect();
            (f[0].parse().unwrap(), f[1].parse().unwrap())
        })
        .collect()
}

#[test]
fn ll_inference_matches_exact_marginals_on_a_tree() {
    let dir = tempfile::tempdir().unwrap();
    let m = write(dir.path(), "m.mln", TWO_CLAUSE);
    let approx = lgbp(&["infer", &m, "--structure", "ll"]);
    let exact = lgbp(&["marginals", &m]);
    assert!(approx.status.success() && exact.status.success());
    let (a, e) = (rows(&approx), rows(&exact));
    assert_eq!(a.len(), 3);
    assert_eq!(a.len(), e.len());
    for ((ga, pa), (ge, pe)) in a.iter().zip(&e) {
        assert_eq!(ga, ge);
        assert!((pa - pe).abs() < 1e-6);
    }
}

#[test]
fn exactz_prints_log_partition_function() {
    let dir = tempfile::tempdir().unwrap();
    let m = write(
        dir.path(),
        "m.mln",
        "domain d = {1}\npredicate R(d)\n0 :: R(x)\n",
    );
    let out = lgbp(&["exactz", &m]);
    assert!(out.status.success());
    let z: f64 = String::from_utf8_lossy(&out.stdout).trim().parse().unwrap();
    assert!((z - 2f64.ln()).abs() < 1e-9);
}

#[test]
fn gen_random_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.mln");
    let b = dir.path().join("b.mln");
    for p in [&a, &b] {
        let out = lgbp(&[
            "gen-random",
            "--seed",
            "5",
            "--sigma",
            "0.3",
            "--domain",
            "2",
            "-o",
            p.to_str().unwrap(),
        ]);
        assert!(out.status.success());
    }
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    assert_eq!(text.lines().filter(|l| l.contains("::")).count(), 15);
    assert!(
        lgbp(&["validate", a.to_str().unwrap(), "--structure", "ll"])
            .status
            .success()
    );
}

#[test]
fn sweep_writes_one_row_per_record() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "sweep.toml",
        "n_models = 2\nsigmas = [0.0, 0.5]\ndomain_sizes = [2, 3]\ntiming = false\nseed = 3\n",
    );
    let csv = dir.path().join("out.csv");
    let out = lgbp(&["sweep", "--config", &cfg, "-o", csv.to_str().unwrap()]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 25);
    assert!(lines[0].starts_with("model_id,structure,sigma"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(lgbp(&["infer"]).status.code(), Some(1));
    assert_eq!(lgbp(&["--help"]).status.code(), Some(0));
    let bad = write(dir.path(), "bad.mln", "predicate R(d)\n");
    assert_eq!(lgbp(&["exactz", &bad]).status.code(), Some(2));
    let cfg = write(dir.path(), "bad.toml", "colour = 3\n");
    assert_eq!(lgbp(&["sweep", "--config", &cfg]).status.code(), Some(1));
    let hard = write(
        dir.path(),
        "hard.mln",
        "domain d = {1, 2, 3, 4, 5, 6}\npredicate F(d, d)\npredicate S(d)\n\
         1 :: !F(x, y) v !S(x) v S(y)\n1 :: !F(x, y) v F(y, z) v !F(x, z)\n",
    );
    assert_eq!(lgbp(&["marginals", &hard]).status.code(), Some(3));
}
