//! Benchmark harness: RMSE versus metered cost for the standard and
//! modified estimators on the built-in test problems.

mod config;
mod experiment;
mod output;

pub use config::{eps_schedule, parse_modes, ConfigError, ConstantsSource, ExperimentConfig, QPolicy, DEFAULT_SEED};
pub use experiment::{
    mode_index, resolve_q, run_experiment, summarize, ExperimentOutcome, ModeSetup, ResultRow, SummaryRow,
};
pub use output::{format_float, metadata_text, rows_csv, summary_csv, timing_csv, write_outputs};

use crate::sde::{
    four_dim_reference, gbm_mean_reference, gbm_second_moment_reference, make_four_dim, make_gbm,
    make_nonlinear_scalar, Functional, Problem, GBM_INITIAL, GBM_RATE, GBM_VOLATILITY,
};

pub const MODEL_IDS: [&str; 3] = ["gbm", "nonlinear", "fourdim"];

/// Model with its default functional when `functional_id` is `None`:
/// `identity` for `gbm`, `paper_f` for `nonlinear`, `component_1` for `fourdim`.
pub fn resolve_problem(model_id: &str, functional_id: Option<&str>) -> Result<Problem, ConfigError> {
    let unknown_functional = |f: &str| ConfigError::Value {
        key: "functional_id".into(),
        reason: format!("`{f}` is not available for model `{model_id}`"),
    };
    match model_id {
        "gbm" => {
            let model = make_gbm(GBM_RATE, GBM_VOLATILITY, GBM_INITIAL);
            let (functional, reference) = match functional_id.unwrap_or("identity") {
                "identity" => (Functional::identity(), gbm_mean_reference(GBM_RATE, GBM_INITIAL)),
                "square" => (
                    Functional::square(),
                    gbm_second_moment_reference(GBM_RATE, GBM_VOLATILITY, GBM_INITIAL),
                ),
                f => return Err(unknown_functional(f)),
            };
            Ok(Problem {
                model,
                functional,
                reference: Some(reference),
            })
        }
        "nonlinear" => {
            let problem = make_nonlinear_scalar();
            match functional_id {
                None => Ok(problem),
                Some(f) if f == problem.functional.label() => Ok(problem),
                Some(f) => Err(unknown_functional(f)),
            }
        }
        "fourdim" => {
            let f = functional_id.unwrap_or("component_1");
            let index = f
                .strip_prefix("component_")
                .and_then(|i| i.parse::<usize>().ok())
                .filter(|i| (1..=4).contains(i))
                .ok_or_else(|| unknown_functional(f))?;
            Ok(Problem {
                model: make_four_dim(),
                functional: Functional::component(index - 1),
                reference: Some(four_dim_reference(index - 1)),
            })
        }
        other => Err(ConfigError::Value {
            key: "model_id".into(),
            reason: format!("unknown model `{other}` (expected one of {})", MODEL_IDS.join(", ")),
        }),
    }
}
