//! Multi-level Monte Carlo estimators: planning, level sampling and pilot
//! estimation of the constants that drive the plan.

mod estimator;
mod pilot;
mod plan;
mod stats;

use thiserror::Error;

use crate::noise::NoiseError;
use crate::schemes::SchemeError;

pub use estimator::{
    execute_plan, mlmc_estimate, plan_for, run_level, EstimatorConfig, EstimatorMode, EstimatorReport, LevelResult,
    PlanConstants,
};
pub use pilot::{pilot_estimate_constants, PilotReport, MIN_PILOT_LEVELS, MIN_PILOT_SAMPLES};
pub use plan::{
    compute_kappa, compute_levels, compute_sample_sizes, optimal_q, plan_levels, sample_sizes_real, step_sizes,
    ConstantSet, LevelPlan, PolyCost, PolyCostTerm, EXPONENT_TOLERANCE,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MlmcError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid constant: {0}")]
    InvalidConstant(String),
    #[error("not applicable: {0}")]
    NotApplicable(String),
    #[error("pilot variances vanish; use the zero-variance shortcut (bias constant {c1})")]
    ZeroVariance { c1: f64 },
    #[error("degenerate regression: {0}")]
    DegenerateRegression(String),
    #[error("level {level}, sample {sample}: {source}")]
    Path {
        level: usize,
        sample: u64,
        #[source]
        source: SchemeError,
    },
    #[error(transparent)]
    Noise(#[from] NoiseError),
}
