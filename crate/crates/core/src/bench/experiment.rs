use std::time::Instant;

use rayon::prelude::*;

use super::config::{ConfigError, ConstantsSource, ExperimentConfig, QPolicy};
use crate::mlmc::{
    mlmc_estimate, optimal_q, pilot_estimate_constants, ConstantSet, EstimatorConfig, EstimatorMode, MlmcError,
    PlanConstants,
};
use crate::noise::RngStreamSpec;
use crate::schemes::SchemeDescriptor;
use crate::theory::{ratio_beta_eq_gamma, Baseline, Regime};

const PILOT_STREAM: u64 = 1;
const RUN_STREAM: u64 = 2;

/// Stream index of a mode; fixed so that a single-mode run reproduces the
/// matching half of a two-mode run.
pub fn mode_index(mode: EstimatorMode) -> u64 {
    match mode {
        EstimatorMode::Standard => 0,
        EstimatorMode::Modified => 1,
    }
}

pub fn resolve_q(policy: QPolicy, constants: Option<&ConstantSet>) -> f64 {
    match (policy, constants) {
        (QPolicy::Fixed(q), _) => q,
        (QPolicy::Optimal, Some(c)) if Regime::of(c.beta, c.gamma) == Regime::BetaLtGamma => {
            optimal_q(c.beta, c.gamma, c.p).unwrap_or(0.5)
        }
        _ => 0.5,
    }
}

/// Constants used for every run of one mode.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeSetup {
    pub mode: EstimatorMode,
    pub constants: Result<PlanConstants, String>,
    pub q: f64,
    pub pilot_cost: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub model_id: String,
    pub functional_id: String,
    pub mode: EstimatorMode,
    pub eps: f64,
    pub replication: u32,
    pub estimate: Option<f64>,
    pub exact: Option<f64>,
    pub abs_error: Option<f64>,
    pub total_cost: Option<u64>,
    pub levels: Option<usize>,
    pub samples: Vec<u64>,
    pub seed: u64,
    pub error: Option<String>,
    /// Auxiliary; never written next to the deterministic columns.
    pub wall_seconds: f64,
}

impl ResultRow {
    pub fn ok(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentOutcome {
    pub config: ExperimentConfig,
    pub setups: Vec<ModeSetup>,
    pub rows: Vec<ResultRow>,
}

impl ExperimentOutcome {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| !r.ok()).count()
    }
}

fn setup_mode(config: &ExperimentConfig, problem: &crate::sde::Problem, mode: EstimatorMode) -> ModeSetup {
    let est = EstimatorConfig::em_ri6(mode);
    let fine = match mode {
        EstimatorMode::Standard => est.coarse,
        EstimatorMode::Modified => est.fine,
    };
    let (constants, pilot_cost) = match config.constants_source {
        ConstantsSource::Explicit => (
            config
                .explicit(mode)
                .cloned()
                .map(PlanConstants::Explicit)
                .ok_or_else(|| format!("no explicit constants for {}", mode.as_str())),
            0,
        ),
        ConstantsSource::Pilot => {
            let spec = RngStreamSpec::with_path(config.master_seed, [PILOT_STREAM, mode_index(mode)]);
            match pilot_estimate_constants(
                &problem.model,
                &problem.functional,
                est.coarse,
                fine,
                config.pilot_levels,
                config.pilot_samples,
                config.refinement,
                &spec,
            ) {
                Ok(report) => (Ok(PlanConstants::Pilot(report.constants)), report.cost),
                Err(MlmcError::ZeroVariance { c1 }) => (Ok(PlanConstants::ZeroVariance { c1 }), 0),
                Err(e) => (Err(format!("pilot: {e}")), 0),
            }
        }
    };
    let q = resolve_q(
        config.q_policy,
        constants.as_ref().ok().and_then(|c| c.constants()),
    );
    ModeSetup {
        mode,
        constants,
        q,
        pilot_cost,
    }
}

/// Runs every `(eps, mode, replication)` cell. Per-row failures are
/// recorded in the row's `error` and do not stop the run.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome, ConfigError> {
    config.validate()?;
    let problem = super::resolve_problem(&config.model_id, config.functional_id.as_deref())?;
    let exact = problem.exact();
    let setups: Vec<ModeSetup> = config.mode_list.iter().map(|&m| setup_mode(config, &problem, m)).collect();

    let mut rows = Vec::new();
    for (eps_index, &eps) in config.eps_list.iter().enumerate() {
        for setup in &setups {
            let mut est = EstimatorConfig::em_ri6(setup.mode);
            est.refinement = config.refinement;
            est.q = setup.q;
            let cell: Vec<ResultRow> = (0..config.replications)
                .into_par_iter()
                .map(|r| {
                    let start = Instant::now();
                    let mut row = ResultRow {
                        model_id: config.model_id.clone(),
                        functional_id: problem.functional.label().to_string(),
                        mode: setup.mode,
                        eps,
                        replication: r,
                        estimate: None,
                        exact,
                        abs_error: None,
                        total_cost: None,
                        levels: None,
                        samples: Vec::new(),
                        seed: config.master_seed,
                        error: None,
                        wall_seconds: 0.0,
                    };
                    let spec = RngStreamSpec::with_path(
                        config.master_seed,
                        [RUN_STREAM, eps_index as u64, mode_index(setup.mode), r as u64],
                    );
                    let result = setup.constants.as_ref().map_err(Clone::clone).and_then(|constants| {
                        mlmc_estimate(&problem.model, &problem.functional, eps, constants, &est, &spec)
                            .map_err(|e| e.to_string())
                    });
                    match result {
                        Ok(report) => {
                            row.estimate = Some(report.estimate);
                            row.abs_error = exact.map(|x| (report.estimate - x).abs());
                            row.total_cost = Some(report.total_cost);
                            row.levels = Some(report.plan.levels);
                            row.samples = report.plan.samples;
                        }
                        Err(e) => row.error = Some(e),
                    }
                    row.wall_seconds = start.elapsed().as_secs_f64();
                    row
                })
                .collect();
            rows.extend(cell);
        }
    }
    Ok(ExperimentOutcome {
        config: config.clone(),
        setups,
        rows,
    })
}

/// Cost-versus-RMSE line for one `(model, functional, eps)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub model_id: String,
    pub functional_id: String,
    pub eps: f64,
    pub rmse_standard: Option<f64>,
    pub cost_standard: Option<f64>,
    pub ok_standard: u32,
    pub rmse_modified: Option<f64>,
    pub cost_modified: Option<f64>,
    pub ok_modified: u32,
    /// Mean standard cost over mean modified cost.
    pub cost_ratio: Option<f64>,
    /// Asymptotic lower bound for `cost_ratio` when `β = γ`.
    pub theory_ratio: f64,
    pub baseline: Baseline,
}

struct Cell {
    rmse: Option<f64>,
    cost: Option<f64>,
    ok: u32,
}

fn cell_stats<'a>(rows: impl Iterator<Item = &'a ResultRow>) -> Cell {
    let ok: Vec<&ResultRow> = rows.filter(|r| r.ok()).collect();
    if ok.is_empty() {
        return Cell {
            rmse: None,
            cost: None,
            ok: 0,
        };
    }
    let n = ok.len() as f64;
    let rmse = ok
        .iter()
        .map(|r| r.abs_error.map(|e| e * e))
        .sum::<Option<f64>>()
        .map(|s| (s / n).sqrt());
    let cost = ok.iter().map(|r| r.total_cost.unwrap_or(0) as f64).sum::<f64>() / n;
    Cell {
        rmse,
        cost: Some(cost),
        ok: ok.len() as u32,
    }
}

/// Groups rows by `(model, functional, eps)` in order of first appearance.
pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let theory_ratio = ratio_beta_eq_gamma(
        SchemeDescriptor::euler_maruyama().weak_order(),
        SchemeDescriptor::ri6().weak_order(),
    );
    let mut keys: Vec<(&str, &str, u64)> = Vec::new();
    for r in rows {
        let key = (r.model_id.as_str(), r.functional_id.as_str(), r.eps.to_bits());
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(model, functional, eps_bits)| {
            let in_cell = |mode: EstimatorMode| {
                rows.iter().filter(move |r| {
                    r.mode == mode && r.model_id == model && r.functional_id == functional && r.eps.to_bits() == eps_bits
                })
            };
            let s = cell_stats(in_cell(EstimatorMode::Standard));
            let m = cell_stats(in_cell(EstimatorMode::Modified));
            let cost_ratio = match (s.cost, m.cost) {
                (Some(a), Some(b)) if b > 0.0 => Some(a / b),
                _ => None,
            };
            SummaryRow {
                model_id: model.to_string(),
                functional_id: functional.to_string(),
                eps: f64::from_bits(eps_bits),
                rmse_standard: s.rmse,
                cost_standard: s.cost,
                ok_standard: s.ok,
                rmse_modified: m.rmse,
                cost_modified: m.cost,
                ok_modified: m.ok,
                cost_ratio,
                theory_ratio,
                baseline: Baseline::AllCoarse,
            }
        })
        .collect()
}
