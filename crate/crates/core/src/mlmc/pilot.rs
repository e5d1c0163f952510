//! Pilot estimation of the rate/constant bundle.
//!
//! Variance constants come from log-log regression of level-summand sample
//! variances on `h_l`, restricted to the finest run of levels over which the
//! variance strictly decreases; coarser levels are treated as pre-asymptotic. Bias constants use the difference of consecutive
//! level means: with `E f(Y^h) - E f(X) ≈ c₁ h^k`,
//! `E f(Y^{l-1}) - E f(Y^l) ≈ c₁ h_{l-1}^k (1 - M^{-k})`. Cost constants
//! follow from the step law: `C_l = cost_per_step · T / h_l`, so `γ = 1`.

use super::estimator::{run_level, LevelResult};
use super::plan::ConstantSet;
use super::stats::fit_power_law;
use super::MlmcError;
use crate::noise::RngStreamSpec;
use crate::schemes::SchemeDescriptor;
use crate::sde::{Functional, SdeModel};

pub const MIN_PILOT_LEVELS: usize = 3;
pub const MIN_PILOT_SAMPLES: u64 = 1000;

/// A bias proxy is used only if it exceeds this many standard errors.
const BIAS_SIGNIFICANCE: f64 = 3.0;

/// Estimated constants plus the raw level statistics behind them.
#[derive(Clone, Debug, PartialEq)]
pub struct PilotReport {
    pub constants: ConstantSet,
    /// `Var(f(Y^0))` followed by coarse/coarse summand variances for levels `1..=pilot_levels`.
    pub coarse_variances: Vec<f64>,
    /// Fine-on-top summand variances for levels `1..=pilot_levels`.
    pub top_variances: Vec<f64>,
    /// Total metered cost of the pilot runs.
    pub cost: u64,
}

struct Survey {
    levels: Vec<LevelResult>,
    steps: Vec<f64>,
}

impl Survey {
    fn variances(&self) -> Vec<f64> {
        self.levels.iter().map(|r| r.variance.unwrap_or(0.0)).collect()
    }

    fn cost(&self) -> u64 {
        self.levels.iter().map(|r| r.cost).sum()
    }
}

#[allow(clippy::too_many_arguments)]
fn survey(
    model: &SdeModel,
    functional: &Functional,
    coarse: SchemeDescriptor,
    fine: SchemeDescriptor,
    levels: std::ops::RangeInclusive<usize>,
    samples: u64,
    refinement: usize,
    spec: &RngStreamSpec,
) -> Result<Survey, MlmcError> {
    let t = model.horizon();
    let mut out = Survey {
        levels: Vec::new(),
        steps: Vec::new(),
    };
    for level in levels {
        out.levels
            .push(run_level(model, functional, level, samples, coarse, fine, refinement, spec)?);
        out.steps.push(t / (refinement as f64).powi(level as i32));
    }
    Ok(out)
}

/// Power-law fit over the longest run of trailing levels with strictly
/// decreasing variance.
fn fit_decaying_tail(steps: &[f64], variances: &[f64]) -> Option<(f64, f64)> {
    let n = variances.len();
    if n < 2 {
        return None;
    }
    let mut start = n - 1;
    while start > 0 && variances[start - 1] > variances[start] {
        start -= 1;
    }
    fit_power_law(&steps[start..], &variances[start..])
}

/// Bias constant for a scheme of weak order `order` from coupled
/// same-scheme level differences, taken at the finest level whose mean is
/// distinguishable from zero. Coarse levels are often pre-asymptotic.
fn bias_constant(survey: &Survey, order: f64, refinement: usize) -> f64 {
    let damping = 1.0 - (refinement as f64).powf(-order);
    let mut estimate = None;
    let mut floor: f64 = 0.0;
    for (r, &h) in survey.levels.iter().zip(&survey.steps) {
        let h_coarse = h * refinement as f64;
        let scale = h_coarse.powf(order) * damping;
        let se = (r.variance.unwrap_or(0.0) / r.samples as f64).sqrt();
        if r.mean != 0.0 && r.mean.abs() > BIAS_SIGNIFICANCE * se {
            estimate = Some(r.mean.abs() / scale);
        }
        floor = floor.max(BIAS_SIGNIFICANCE * se / scale);
    }
    // bias below the noise floor at every pilot level
    estimate.unwrap_or(floor)
}

/// Estimates the constants for a run with `coarse` below the top level and
/// `fine` on it. Pass `fine == coarse` for the standard estimator.
///
/// Returns [`MlmcError::ZeroVariance`] when every pilot variance vanishes.
#[allow(clippy::too_many_arguments)]
pub fn pilot_estimate_constants(
    model: &SdeModel,
    functional: &Functional,
    coarse: SchemeDescriptor,
    fine: SchemeDescriptor,
    pilot_levels: usize,
    pilot_samples: u64,
    refinement: usize,
    spec: &RngStreamSpec,
) -> Result<PilotReport, MlmcError> {
    if pilot_levels < MIN_PILOT_LEVELS || pilot_samples < MIN_PILOT_SAMPLES {
        return Err(MlmcError::InvalidInput(format!(
            "pilot needs at least {MIN_PILOT_LEVELS} levels and {MIN_PILOT_SAMPLES} samples (got {pilot_levels}, {pilot_samples})"
        )));
    }
    let t = model.horizon();
    let level0 = run_level(model, functional, 0, pilot_samples, coarse, coarse, refinement, &spec.child(0))?;
    let interior = survey(model, functional, coarse, coarse, 1..=pilot_levels, pilot_samples, refinement, &spec.child(1))?;
    let same = fine == coarse;
    let top = if same {
        None
    } else {
        Some(survey(model, functional, coarse, fine, 1..=pilot_levels, pilot_samples, refinement, &spec.child(2))?)
    };
    let fine_bias = if same {
        None
    } else {
        Some(survey(model, functional, fine, fine, 1..=pilot_levels, pilot_samples, refinement, &spec.child(3))?)
    };

    let c1 = bias_constant(fine_bias.as_ref().unwrap_or(&interior), fine.weak_order(), refinement);

    let v0 = level0.variance.unwrap_or(0.0);
    let interior_var = interior.variances();
    let top_var = top.as_ref().map(Survey::variances).unwrap_or_else(|| interior_var.clone());
    if v0 <= 0.0 && interior_var.iter().all(|&v| v <= 0.0) && top_var.iter().all(|&v| v <= 0.0) {
        return Err(MlmcError::ZeroVariance { c1 });
    }

    let degenerate = |what: &str| MlmcError::DegenerateRegression(what.to_string());
    let (c2, beta) = fit_decaying_tail(&interior.steps, &interior_var).ok_or_else(|| degenerate("interior variance"))?;
    let (c2l, beta_l) = match &top {
        Some(s) => fit_decaying_tail(&s.steps, &top_var).ok_or_else(|| degenerate("top-level variance"))?,
        None => (c2, beta),
    };
    if !(beta > 0.0) || !(beta_l > 0.0) {
        return Err(degenerate("variance does not decay with the step size"));
    }
    if !(v0 > 0.0) {
        return Err(degenerate("level-0 variance"));
    }

    let m = refinement as f64;
    let (d, noise) = (model.dim_state(), model.dim_noise());
    let coarse_step = coarse.cost_per_step(d, noise) as f64;
    let fine_step = fine.cost_per_step(d, noise) as f64;

    let constants = ConstantSet {
        alpha: coarse.weak_order(),
        p: fine.weak_order(),
        beta,
        beta_l,
        gamma: 1.0,
        gamma_l: 1.0,
        c1,
        c20: v0 / t.powf(beta),
        c2,
        c2l,
        c30: coarse_step,
        c3: coarse_step * (1.0 + 1.0 / m),
        c3l: fine_step + coarse_step / m,
        poly_cost: None,
    };
    constants.validate()?;

    let mut coarse_variances = vec![v0];
    coarse_variances.extend(interior_var);
    let cost = level0.cost
        + interior.cost()
        + top.as_ref().map(Survey::cost).unwrap_or(0)
        + fine_bias.as_ref().map(Survey::cost).unwrap_or(0);
    Ok(PilotReport {
        constants,
        coarse_variances,
        top_variances: top_var,
        cost,
    })
}
