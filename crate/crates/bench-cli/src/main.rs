//! `mlmc-bench`: RMSE-versus-cost benchmarks for the standard and modified
//! multi-level estimators.
//!
//! Exit codes: 0 on success, 2 if some benchmark rows failed, 1 on
//! configuration errors. `MLMC_WORKERS` sets the worker thread count
//! (default: all available cores).

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Parser, Subcommand};

use mlmc_core::bench::{
    eps_schedule, metadata_text, parse_modes, resolve_problem, run_experiment, summarize, write_outputs,
    ExperimentConfig,
};
use mlmc_core::mlmc::{pilot_estimate_constants, ConstantSet, EstimatorConfig, EstimatorMode, MlmcError};
use mlmc_core::noise::RngStreamSpec;
use mlmc_core::theory::{
    asymptotic_ratio, classify, improvement_guaranteed, ratio_beta_eq_gamma, ratio_beta_lt_gamma_compact,
};

const WORKERS_ENV: &str = "MLMC_WORKERS";

#[derive(Parser)]
#[command(name = "mlmc-bench", version, about = "Multi-level Monte Carlo cost benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a benchmark and write rows.csv, summary.csv, metadata.txt and timing.csv.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        functional: Option<String>,
        /// Use eps = 4^-j for j = 0..=J.
        #[arg(long = "eps-min", value_name = "J")]
        eps_min: Option<u32>,
        #[arg(long)]
        replications: Option<u32>,
        #[arg(long)]
        seed: Option<u64>,
        /// standard, modified or both.
        #[arg(long)]
        mode: Option<String>,
        #[arg(long, default_value = "bench-out")]
        out: PathBuf,
    },
    /// Print pilot-estimated constants.
    Constants {
        #[arg(long)]
        model: String,
        #[arg(long)]
        functional: Option<String>,
        #[arg(long = "pilot-n")]
        pilot_n: u64,
        #[arg(long = "pilot-levels", default_value_t = 5)]
        pilot_levels: usize,
        #[arg(long, default_value = "modified")]
        mode: EstimatorMode,
        #[arg(long, default_value_t = mlmc_core::bench::DEFAULT_SEED)]
        seed: u64,
        #[arg(long = "M", default_value_t = 2)]
        refinement: usize,
    },
    /// Print the cost regime and asymptotic cost ratios for given rates.
    Theory {
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        p: f64,
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        gamma: f64,
        #[arg(long = "beta-l")]
        beta_l: Option<f64>,
        #[arg(long = "gamma-l")]
        gamma_l: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        c2: f64,
        #[arg(long, default_value_t = 1.0)]
        c3: f64,
        #[arg(long = "c2l", default_value_t = 1.0)]
        c2l: f64,
        #[arg(long = "c3l", default_value_t = 1.0)]
        c3l: f64,
        #[arg(long = "M", default_value_t = 2)]
        refinement: usize,
    },
}

enum Failure {
    Config(anyhow::Error),
    Partial(usize),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Config(e)
    }
}

fn init_workers() -> Result<()> {
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        let n: usize = v.parse().with_context(|| format!("{WORKERS_ENV} must be a positive integer"))?;
        if n == 0 {
            return Err(anyhow!("{WORKERS_ENV} must be a positive integer"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run(
    config: Option<PathBuf>,
    model: Option<String>,
    functional: Option<String>,
    eps_min: Option<u32>,
    replications: Option<u32>,
    seed: Option<u64>,
    mode: Option<String>,
    out: PathBuf,
) -> Result<(), Failure> {
    let mut cfg = match &config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            ExperimentConfig::parse(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(m) = model {
        if m != cfg.model_id {
            cfg.functional_id = None;
        }
        cfg.model_id = m;
    }
    if functional.is_some() {
        cfg.functional_id = functional;
    }
    if let Some(j) = eps_min {
        cfg.eps_list = eps_schedule(j);
    }
    if let Some(r) = replications {
        cfg.replications = r;
    }
    if let Some(s) = seed {
        cfg.master_seed = s;
    }
    if let Some(m) = mode {
        cfg.mode_list = parse_modes("--mode", &m).map_err(anyhow::Error::from)?;
    }
    cfg.validate().map_err(anyhow::Error::from)?;

    let outcome = run_experiment(&cfg).map_err(anyhow::Error::from)?;
    write_outputs(&out, &outcome).with_context(|| format!("writing {}", out.display()))?;

    eprint!("{}", metadata_text(&outcome));
    println!(
        "{:>10} {:>14} {:>14} {:>14} {:>14} {:>8}",
        "eps", "rmse_std", "cost_std", "rmse_mod", "cost_mod", "ratio"
    );
    let show = |x: Option<f64>| x.map(|v| format!("{v:.4e}")).unwrap_or_else(|| "-".into());
    for s in summarize(&outcome.rows) {
        println!(
            "{:>10.4e} {:>14} {:>14} {:>14} {:>14} {:>8}",
            s.eps,
            show(s.rmse_standard),
            show(s.cost_standard),
            show(s.rmse_modified),
            show(s.cost_modified),
            s.cost_ratio.map(|r| format!("{r:.3}")).unwrap_or_else(|| "-".into()),
        );
    }
    println!("asymptotic ratio bound (p/alpha)^2 = 4; output in {}", out.display());
    match outcome.failures() {
        0 => Ok(()),
        n => Err(Failure::Partial(n)),
    }
}

#[allow(clippy::too_many_arguments)]
fn constants(
    model: String,
    functional: Option<String>,
    pilot_n: u64,
    pilot_levels: usize,
    mode: EstimatorMode,
    seed: u64,
    refinement: usize,
) -> Result<(), Failure> {
    let problem = resolve_problem(&model, functional.as_deref()).map_err(anyhow::Error::from)?;
    let est = EstimatorConfig::em_ri6(mode);
    let fine = match mode {
        EstimatorMode::Standard => est.coarse,
        EstimatorMode::Modified => est.fine,
    };
    let report = pilot_estimate_constants(
        &problem.model,
        &problem.functional,
        est.coarse,
        fine,
        pilot_levels,
        pilot_n,
        refinement,
        &RngStreamSpec::new(seed),
    );
    match report {
        Ok(r) => {
            print_constants(&r.constants);
            println!("pilot_cost = {}", r.cost);
            Ok(())
        }
        Err(MlmcError::ZeroVariance { c1 }) => {
            println!("zero_variance = true\nc1 = {c1:e}");
            Ok(())
        }
        Err(MlmcError::InvalidInput(m)) => Err(anyhow!(m).into()),
        Err(e) => Err(Failure::Partial(1)).inspect_err(|_| eprintln!("error: {e}")),
    }
}

fn print_constants(c: &ConstantSet) {
    for (k, v) in [
        ("alpha", c.alpha),
        ("p", c.p),
        ("beta", c.beta),
        ("beta_l", c.beta_l),
        ("gamma", c.gamma),
        ("gamma_l", c.gamma_l),
        ("c1", c.c1),
        ("c20", c.c20),
        ("c2", c.c2),
        ("c2l", c.c2l),
        ("c30", c.c30),
        ("c3", c.c3),
        ("c3l", c.c3l),
    ] {
        println!("{k} = {v:e}");
    }
}

fn theory(c: ConstantSet, refinement: usize) -> Result<(), Failure> {
    c.validate().map_err(anyhow::Error::from)?;
    let r = classify(&c);
    println!("regime = {}", r.regime);
    let log = if r.log_squared { " (log eps)^2" } else { "" };
    println!("cost = O(eps^-{}{log})", r.cost_exponent);
    for cond in &r.conditions_met {
        println!("[{}] {}", if cond.met { "ok" } else { "FAILED" }, cond.text);
    }
    println!("ratio_beta_eq_gamma = {}", ratio_beta_eq_gamma(c.alpha, c.p));
    if c.gamma > c.beta {
        let compact = ratio_beta_lt_gamma_compact(refinement, c.beta, c.gamma, c.c2, c.c3, c.c2l, c.c3l);
        println!("ratio_beta_lt_gamma = {compact}");
    }
    if let Some(a) = asymptotic_ratio(&c, refinement) {
        println!("asymptotic ratio vs {} = {}", a.baseline.as_str(), a.value);
    }
    let check = improvement_guaranteed(&c, refinement);
    if check.applicable {
        for cond in &check.conditions {
            println!("[{}] {}", if cond.met { "ok" } else { "FAILED" }, cond.text);
        }
        println!("improvement_guaranteed = {}", check.guaranteed());
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    init_workers()?;
    match cli.command {
        Command::Run {
            config,
            model,
            functional,
            eps_min,
            replications,
            seed,
            mode,
            out,
        } => run(config, model, functional, eps_min, replications, seed, mode, out),
        Command::Constants {
            model,
            functional,
            pilot_n,
            pilot_levels,
            mode,
            seed,
            refinement,
        } => constants(model, functional, pilot_n, pilot_levels, mode, seed, refinement),
        Command::Theory {
            alpha,
            p,
            beta,
            gamma,
            beta_l,
            gamma_l,
            c2,
            c3,
            c2l,
            c3l,
            refinement,
        } => {
            let mut c = ConstantSet::unit(alpha, p, beta, gamma);
            c.beta_l = beta_l.unwrap_or(beta);
            c.gamma_l = gamma_l.unwrap_or(gamma);
            c.c2 = c2;
            c.c3 = c3;
            c.c2l = c2l;
            c.c3l = c3l;
            theory(c, refinement)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Partial(n)) => {
            eprintln!("{n} benchmark row(s) failed");
            ExitCode::from(2)
        }
    }
}
