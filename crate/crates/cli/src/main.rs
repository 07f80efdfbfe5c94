//! `lgbp` command-line tool.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Deserialize;

use lgbp_core::error::Error;
use lgbp_core::experiments::{
    exact_marginals, gen_random_kb, instantiate_source, model_seeds, run_sweep, write_csv,
    ModelFamily, SweepConfig,
};
use lgbp_core::lgbp::{run_lgbp, EngineOptions};
use lgbp_core::lifted::{default_factorization, evaluate_z, LiftedModel, PlanOptions};
use lgbp_core::mln::{parse_mln, shatter_to_enf, Mln};
use lgbp_core::oracle::PropagationConfig;
use lgbp_core::regions::{construct_structure, validate_lifted, Structure, WITNESS_DOMAIN_SIZE};

#[derive(Parser)]
#[command(
    name = "lgbp",
    version,
    about = "Lifted generalized belief propagation for Markov logic networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Approximate single-atom marginals by lifted propagation.
    Infer {
        model: PathBuf,
        #[arg(long, default_value = "ll")]
        structure: Structure,
        #[arg(long)]
        damping: Option<f64>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        max_iters: Option<usize>,
    },
    /// Exact log partition function.
    Exactz { model: PathBuf },
    /// Exact single-atom marginals.
    Marginals { model: PathBuf },
    /// Write a random tractable model.
    GenRandom {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        sigma: f64,
        #[arg(long)]
        domain: usize,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run a structure sweep and write CSV records.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Check a structure's simulated ground graph.
    Validate {
        model: PathBuf,
        #[arg(long)]
        structure: Structure,
        #[arg(long, default_value_t = WITNESS_DOMAIN_SIZE)]
        witness_domain: usize,
        /// Print the lifted graph.
        #[arg(long)]
        dump: bool,
    },
}

/// Sweep settings file; unset keys keep their defaults.
#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct SweepFile {
    family: Option<String>,
    seed: Option<u64>,
    n_models: Option<usize>,
    sigmas: Option<Vec<f64>>,
    domain_sizes: Option<Vec<usize>>,
    structures: Option<Vec<String>>,
    damping: Option<f64>,
    tol: Option<f64>,
    max_iters: Option<usize>,
    witness_domain_size: Option<usize>,
    timing: Option<bool>,
}

enum Failure {
    Usage(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

type Res<T> = std::result::Result<T, Failure>;

fn read_model(path: &Path) -> Res<Mln> {
    let text =
        fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Ok(parse_mln(&text)?)
}

fn write_out(path: &Option<PathBuf>, text: &[u8]) -> Res<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?,
        None => io::stdout().write_all(text).map_err(Error::from)?,
    }
    Ok(())
}

fn sweep_config(path: &Path) -> Res<SweepConfig> {
    let text =
        fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let file: SweepFile =
        toml::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    let mut c = SweepConfig::default();
    if let Some(f) = file.family {
        c.family = match f.as_str() {
            "random" => ModelFamily::Random,
            "fspc" => ModelFamily::Fspc,
            _ => return Err(Failure::Usage(format!("unknown family {f:?}"))),
        };
    }
    c.seed = file.seed.unwrap_or(c.seed);
    c.n_models = file.n_models.unwrap_or(c.n_models);
    c.sigmas = file.sigmas.unwrap_or(c.sigmas);
    c.domain_sizes = file.domain_sizes.unwrap_or(c.domain_sizes);
    if let Some(ss) = file.structures {
        c.structures = ss
            .iter()
            .map(|s| s.parse().map_err(|e: Error| Failure::Usage(e.to_string())))
            .collect::<Res<Vec<Structure>>>()?;
    }
    c.engine.damping = file.damping.unwrap_or(c.engine.damping);
    c.engine.tolerance = file.tol.unwrap_or(c.engine.tolerance);
    c.engine.max_iterations = file.max_iters.unwrap_or(c.engine.max_iterations);
    c.witness_domain_size = file.witness_domain_size.unwrap_or(c.witness_domain_size);
    c.timing = file.timing.unwrap_or(c.timing);
    if c.sigmas.iter().any(|s| !(*s >= 0.0)) {
        return Err(Failure::Usage("sigmas must be non-negative".into()));
    }
    if c.domain_sizes.contains(&0) {
        return Err(Failure::Usage("domain sizes must be at least 1".into()));
    }
    Ok(c)
}

fn run(cmd: Command) -> Res<()> {
    match cmd {
        Command::Infer {
            model,
            structure,
            damping,
            tol,
            max_iters,
        } => {
            let mln = shatter_to_enf(&read_model(&model)?);
            let mut config = PropagationConfig::default();
            config.damping = damping.unwrap_or(config.damping);
            config.tolerance = tol.unwrap_or(config.tolerance);
            config.max_iterations = max_iters.unwrap_or(config.max_iterations);
            let lrg = construct_structure(&mln, structure)?;
            let res = run_lgbp(&lrg, &config, &EngineOptions::default())?;
            eprintln!(
                "{} after {} iterations",
                if res.converged {
                    "converged"
                } else {
                    "not converged"
                },
                res.iterations
            );
            let mut out = String::from("group_id  P(true)  group\n");
            for (g, p) in &res.group_marginals {
                out.push_str(&format!("{g}  {p:.9}  {}\n", lrg.global.group_label(*g)));
            }
            write_out(&None, out.as_bytes())
        }
        Command::Exactz { model } => {
            let mln = shatter_to_enf(&read_model(&model)?);
            let lm = LiftedModel::from_mln(&mln)?;
            let plan = default_factorization(&lm, &PlanOptions::default())
                .map_err(|e| Error::Intractable(format!("no lifted plan: {e}")))?;
            println!("{:.12}", evaluate_z(&lm, &plan)?);
            Ok(())
        }
        Command::Marginals { model } => {
            let mln = shatter_to_enf(&read_model(&model)?);
            let lm = LiftedModel::from_mln(&mln)?;
            let exact = exact_marginals(&mln)?;
            let mut groups: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
            for (i, a) in lm.atoms.iter().enumerate() {
                let e = groups.entry(lm.atom_group[i]).or_default();
                e.0 += exact[a];
                e.1 += 1;
            }
            let mut out = String::from("group_id  P(true)  group\n");
            for (g, (s, n)) in groups {
                out.push_str(&format!(
                    "{g}  {:.9}  {}\n",
                    s / n as f64,
                    lm.group_label(g)
                ));
            }
            write_out(&None, out.as_bytes())
        }
        Command::GenRandom {
            seed,
            sigma,
            domain,
            output,
        } => {
            if domain == 0 || !(sigma >= 0.0) {
                return Err(Failure::Usage("need --domain >= 1 and --sigma >= 0".into()));
            }
            let (kb_seed, w_seed) = model_seeds(seed, 0);
            let src = instantiate_source(&gen_random_kb(kb_seed), domain, sigma, w_seed);
            write_out(&output, src.as_bytes())
        }
        Command::Sweep { config, output } => {
            let c = sweep_config(&config)?;
            let mut buf = Vec::new();
            write_csv(&run_sweep(&c), &mut buf).map_err(Error::from)?;
            write_out(&output, &buf)
        }
        Command::Validate {
            model,
            structure,
            witness_domain,
            dump,
        } => {
            let mln = shatter_to_enf(&read_model(&model)?);
            let lrg = construct_structure(&mln, structure)?;
            if dump {
                print!("{}", lrg.dump());
            }
            if validate_lifted(&lrg, witness_domain)? {
                println!("valid");
                Ok(())
            } else {
                println!("invalid");
                Err(Error::RegionGraph("running intersection fails".into()).into())
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            match e {
                Error::Intractable(_) | Error::OracleLimit { .. } => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}
