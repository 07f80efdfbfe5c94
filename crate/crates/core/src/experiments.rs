//! Model generators and structure sweeps: random tractable knowledge bases,
//! the friends-smokers-parents-cancer model, exact reference marginals and
//! KL-divergence records per (model, structure, sigma, domain size).

use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;

use rand::seq::index::sample;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lgbp::{bernoulli_kl, run_lgbp, EngineOptions};
use crate::lifted::exact_atom_marginals;
use crate::mln::{ground_atoms, parse_mln, shatter_to_enf, GroundAtom, Mln};
use crate::oracle::{
    brute_force_atom_marginals, ground_markov_network, PropagationConfig, DEFAULT_CAP,
};
use crate::regions::{construct_structure, validate_lifted, Structure, WITNESS_DOMAIN_SIZE};

pub const KB_PREDICATES: usize = 15;
pub const KB_CLAUSES: usize = 15;
pub const KB_LITERALS: usize = 3;

pub const CSV_HEADER: &str =
    "model_id,structure,sigma,domain_size,iterations,converged,mean_kl,max_kl,runtime_ms,witness_domain_size";

/// Clause templates over the unary predicates `R1(x1) .. R15(x15)`: each
/// clause lists three distinct predicate indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RandomKb {
    pub clauses: Vec<[usize; KB_LITERALS]>,
}

/// Literals drawn uniformly without replacement, all unnegated.
pub fn gen_random_kb(seed: u64) -> RandomKb {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let clauses = (0..KB_CLAUSES)
        .map(|_| {
            let mut c = [0; KB_LITERALS];
            for (slot, p) in c
                .iter_mut()
                .zip(sample(&mut rng, KB_PREDICATES, KB_LITERALS))
            {
                *slot = p;
            }
            c
        })
        .collect();
    RandomKb { clauses }
}

/// Standard normal draws scaled by `sigma`; the same seed gives the same
/// draws at every sigma.
fn weights(seed: u64, n: usize, sigma: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            sigma * z
        })
        .collect()
}

fn domain_line(d: usize) -> String {
    let consts: Vec<String> = (1..=d).map(|i| i.to_string()).collect();
    format!("domain d = {{{}}}\n", consts.join(", "))
}

/// MLN source for a knowledge base at domain size `d` with weights drawn
/// from `N(0, sigma)`.
pub fn instantiate_source(kb: &RandomKb, d: usize, sigma: f64, seed: u64) -> String {
    let mut src = domain_line(d);
    for p in 1..=KB_PREDICATES {
        src.push_str(&format!("predicate R{p}(d)\n"));
    }
    for (c, w) in kb
        .clauses
        .iter()
        .zip(weights(seed, kb.clauses.len(), sigma))
    {
        let lits: Vec<String> = c.iter().map(|&p| format!("R{0}(x{0})", p + 1)).collect();
        src.push_str(&format!("{w:?} :: {}\n", lits.join(" v ")));
    }
    src
}

pub fn instantiate(kb: &RandomKb, d: usize, sigma: f64, seed: u64) -> Result<Mln> {
    if d == 0 {
        return Err(Error::Model("domain size must be at least 1".into()));
    }
    parse_mln(&instantiate_source(kb, d, sigma, seed))
}

/// Friends, smokers, parents and cancer in clausal form, plus one weighted
/// unit clause per predicate.
pub fn fspc_mln(d: usize, sigma: f64, seed: u64) -> Result<Mln> {
    if d == 0 {
        return Err(Error::Model("domain size must be at least 1".into()));
    }
    let body = [
        "!Smokes(x) v !Friends(x, y) v Smokes(y)",
        "!Smokes(x) v Cancer(x)",
        "!Cancer(y) v !ParentOf(y, x) v Cancer(x)",
        "!Smokes(y) v !ParentOf(x, y) v Smokes(x)",
        "Smokes(x)",
        "Cancer(x)",
        "Friends(x, y)",
        "ParentOf(x, y)",
    ];
    let mut src = domain_line(d);
    src.push_str("predicate Smokes(d)\npredicate Cancer(d)\npredicate Friends(d, d)\npredicate ParentOf(d, d)\n");
    for (c, w) in body.iter().zip(weights(seed, body.len(), sigma)) {
        src.push_str(&format!("{w:?} :: {c}\n"));
    }
    parse_mln(&src)
}

/// Exact single-atom marginals: lifted when the whole model has a valid
/// factorization, else brute force within the oracle cap.
pub fn exact_marginals(mln: &Mln) -> Result<BTreeMap<GroundAtom, f64>> {
    match exact_atom_marginals(mln) {
        Ok(m) => Ok(m),
        Err(lifted) => {
            let fg = ground_markov_network(mln);
            if fg.variables.len() > DEFAULT_CAP {
                return Err(Error::Intractable(format!(
                    "no lifted plan ({lifted}) and {} atoms exceed the brute-force cap",
                    fg.variables.len()
                )));
            }
            let p = brute_force_atom_marginals(&fg)?;
            Ok(fg.variables.into_iter().zip(p).collect())
        }
    }
}

/// Mean and max per-atom KL of the approximation from the exact marginals.
pub fn kl_summary(
    exact: &BTreeMap<GroundAtom, f64>,
    approx: &BTreeMap<GroundAtom, f64>,
) -> (f64, f64) {
    let kls: Vec<f64> = exact
        .iter()
        .map(|(a, &p)| bernoulli_kl(p, approx.get(a).copied().unwrap_or(0.5)))
        .collect();
    if kls.is_empty() {
        return (0.0, 0.0);
    }
    let mean = kls.iter().sum::<f64>() / kls.len() as f64;
    (mean, kls.iter().copied().fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelFamily {
    /// A fresh random knowledge base per model id.
    Random,
    /// The friends-smokers model; model ids index weight draws.
    Fspc,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub family: ModelFamily,
    pub seed: u64,
    pub n_models: usize,
    pub sigmas: Vec<f64>,
    pub domain_sizes: Vec<usize>,
    pub structures: Vec<Structure>,
    pub engine: PropagationConfig,
    pub witness_domain_size: usize,
    /// Record wall-clock time; off gives byte-identical output per seed.
    pub timing: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            family: ModelFamily::Random,
            seed: 0,
            n_models: 50,
            sigmas: (0..=10).map(|i| i as f64 / 10.0).collect(),
            domain_sizes: (1..=8).collect(),
            structures: Structure::ALL.to_vec(),
            engine: PropagationConfig::default(),
            witness_domain_size: WITNESS_DOMAIN_SIZE,
            timing: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub model_id: usize,
    pub structure: Structure,
    pub sigma: f64,
    pub domain_size: usize,
    pub iterations: usize,
    /// `None` when the run failed.
    pub converged: Option<bool>,
    pub mean_kl: f64,
    pub max_kl: f64,
    pub runtime_ms: u128,
    pub witness_domain_size: usize,
}

impl SweepRecord {
    pub fn to_csv(&self) -> String {
        let converged = match self.converged {
            Some(c) => c.to_string(),
            None => "error".to_string(),
        };
        format!(
            "{},{},{},{},{},{},{:e},{:e},{},{}",
            self.model_id,
            self.structure,
            self.sigma,
            self.domain_size,
            self.iterations,
            converged,
            self.mean_kl,
            self.max_kl,
            self.runtime_ms,
            self.witness_domain_size
        )
    }
}

/// Seeds of model `id`: (knowledge base, weights). Each model id reads its
/// own ChaCha stream of the master seed.
pub fn model_seeds(master: u64, id: usize) -> (u64, u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(id as u64);
    (rng.next_u64(), rng.next_u64())
}

pub fn sweep_model(config: &SweepConfig, id: usize, sigma: f64, d: usize) -> Result<Mln> {
    let (kb_seed, w_seed) = model_seeds(config.seed, id);
    let mln = match config.family {
        ModelFamily::Random => instantiate(&gen_random_kb(kb_seed), d, sigma, w_seed)?,
        ModelFamily::Fspc => fspc_mln(d, sigma, w_seed)?,
    };
    Ok(shatter_to_enf(&mln))
}

fn failed(id: usize, s: Structure, sigma: f64, d: usize, witness: usize) -> SweepRecord {
    SweepRecord {
        model_id: id,
        structure: s,
        sigma,
        domain_size: d,
        iterations: 0,
        converged: None,
        mean_kl: f64::INFINITY,
        max_kl: f64::INFINITY,
        runtime_ms: 0,
        witness_domain_size: witness,
    }
}

/// Records of one (model, sigma, domain size) cell, one per structure.
pub fn sweep_cell(config: &SweepConfig, id: usize, sigma: f64, d: usize) -> Vec<SweepRecord> {
    let witness = d.min(config.witness_domain_size);
    let prepared =
        sweep_model(config, id, sigma, d).and_then(|m| exact_marginals(&m).map(|e| (m, e)));
    let Ok((mln, exact)) = prepared else {
        return config
            .structures
            .iter()
            .map(|&s| failed(id, s, sigma, d, witness))
            .collect();
    };
    config
        .structures
        .iter()
        .map(|&s| {
            let start = Instant::now();
            let run = construct_structure(&mln, s).and_then(|lrg| {
                if !validate_lifted(&lrg, config.witness_domain_size)? {
                    return Err(Error::RegionGraph("running intersection fails".into()));
                }
                run_lgbp(&lrg, &config.engine, &EngineOptions::default())
            });
            let runtime_ms = if config.timing {
                start.elapsed().as_millis()
            } else {
                0
            };
            match run {
                Ok(res) => {
                    let (mean_kl, max_kl) = kl_summary(&exact, &res.marginals);
                    SweepRecord {
                        model_id: id,
                        structure: s,
                        sigma,
                        domain_size: d,
                        iterations: res.iterations,
                        converged: Some(res.converged),
                        mean_kl,
                        max_kl,
                        runtime_ms,
                        witness_domain_size: witness,
                    }
                }
                Err(_) => failed(id, s, sigma, d, witness),
            }
        })
        .collect()
}

/// Every record of a sweep, in (model, structure, sigma, domain size) order.
pub fn run_sweep(config: &SweepConfig) -> Vec<SweepRecord> {
    let cells: Vec<(usize, f64, usize)> = (0..config.n_models)
        .flat_map(|id| {
            config
                .sigmas
                .iter()
                .flat_map(move |&s| config.domain_sizes.iter().map(move |&d| (id, s, d)))
        })
        .collect();
    let mut out: Vec<SweepRecord> = cells
        .par_iter()
        .flat_map_iter(|&(id, s, d)| sweep_cell(config, id, s, d))
        .collect();
    out.sort_by(|a, b| {
        (a.model_id, a.structure)
            .cmp(&(b.model_id, b.structure))
            .then(a.sigma.total_cmp(&b.sigma))
            .then(a.domain_size.cmp(&b.domain_size))
    });
    out
}

/// Header then one line per record.
pub fn write_csv(records: &[SweepRecord], out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in records {
        writeln!(out, "{}", r.to_csv())?;
    }
    Ok(())
}

/// Ground atom count of a model, for reporting.
pub fn atom_count(mln: &Mln) -> usize {
    ground_atoms(mln).len()
}
