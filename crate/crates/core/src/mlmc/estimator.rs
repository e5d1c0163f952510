//! Level sampling and the standard / modified multi-level estimators.

use rayon::prelude::*;

use super::plan::{plan_levels, step_sizes, ConstantSet, LevelPlan};
use super::stats::SampleMoments;
use super::MlmcError;
use crate::noise::{sample_coupled_lanes, GridNoise, RngStreamSpec};
use crate::schemes::{Integrator, SchemeDescriptor};
use crate::sde::{Functional, SdeModel};

/// Samples are evaluated in blocks of this size and reduced in index order.
const BLOCK: u64 = 1 << 14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EstimatorMode {
    /// Coarse scheme on every level; level count from its weak order.
    Standard,
    /// Fine scheme on the top level only; level count from its weak order.
    Modified,
}

impl EstimatorMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            EstimatorMode::Standard => "standard",
            EstimatorMode::Modified => "modified",
        }
    }
}

impl std::str::FromStr for EstimatorMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "standard" => Ok(EstimatorMode::Standard),
            "modified" => Ok(EstimatorMode::Modified),
            other => Err(format!("unknown mode `{other}`")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimatorConfig {
    pub mode: EstimatorMode,
    pub coarse: SchemeDescriptor,
    pub fine: SchemeDescriptor,
    pub refinement: usize,
    pub q: f64,
}

impl EstimatorConfig {
    /// Euler–Maruyama below the top level, RI6 on top in modified mode, `M = 2`, `q = 1/2`.
    pub fn em_ri6(mode: EstimatorMode) -> Self {
        Self {
            mode,
            coarse: SchemeDescriptor::euler_maruyama(),
            fine: SchemeDescriptor::ri6(),
            refinement: 2,
            q: 0.5,
        }
    }

    /// Scheme for the fine path of level `level` in an `levels`-level run.
    pub fn fine_scheme_at(&self, level: usize, levels: usize) -> SchemeDescriptor {
        if self.mode == EstimatorMode::Modified && level == levels {
            self.fine
        } else {
            self.coarse
        }
    }
}

/// Where the constants behind a plan came from.
#[derive(Clone, Debug, PartialEq)]
pub enum PlanConstants {
    /// Constants supplied by the caller.
    Explicit(ConstantSet),
    /// Constants estimated from pilot runs.
    Pilot(ConstantSet),
    /// Pilot runs saw no variance: one sample per level, levels from the bias constant.
    ZeroVariance { c1: f64 },
}

impl PlanConstants {
    pub fn origin(&self) -> &'static str {
        match self {
            PlanConstants::Explicit(_) => "explicit",
            PlanConstants::Pilot(_) => "pilot",
            PlanConstants::ZeroVariance { .. } => "zero-variance",
        }
    }

    pub fn constants(&self) -> Option<&ConstantSet> {
        match self {
            PlanConstants::Explicit(c) | PlanConstants::Pilot(c) => Some(c),
            PlanConstants::ZeroVariance { .. } => None,
        }
    }
}

/// Builds the level plan for `config` at accuracy `eps`.
pub fn plan_for(eps: f64, constants: &PlanConstants, config: &EstimatorConfig, t: f64) -> Result<LevelPlan, MlmcError> {
    let order = match config.mode {
        EstimatorMode::Standard => config.coarse.weak_order(),
        EstimatorMode::Modified => config.fine.weak_order(),
    };
    match constants {
        PlanConstants::Explicit(c) | PlanConstants::Pilot(c) => {
            let order = match config.mode {
                EstimatorMode::Standard => c.alpha,
                EstimatorMode::Modified => c.p,
            };
            plan_levels(eps, config.q, c, order, t, config.refinement)
        }
        PlanConstants::ZeroVariance { c1 } => {
            let levels = if *c1 > 0.0 {
                super::plan::compute_levels(config.q, *c1, eps, t, order, config.refinement)?
            } else {
                1
            };
            Ok(LevelPlan {
                levels,
                refinement: config.refinement,
                q: config.q,
                step_sizes: step_sizes(t, config.refinement, levels),
                samples: vec![1; levels + 1],
                samples_real: vec![0.0; levels + 1],
                kappa: 0.0,
            })
        }
    }
}

/// Mean, sample variance and metered cost of one level's summands.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelResult {
    pub mean: f64,
    /// Unbiased sample variance; absent with a single sample.
    pub variance: Option<f64>,
    pub cost: u64,
    pub samples: u64,
}

/// Runs `samples` i.i.d. summands of level `level`.
///
/// Level 0 evaluates `f(Y^0)` on the one-step grid with `fine_scheme`.
/// Level `l ≥ 1` evaluates `f(Y^l) - f(Y^{l-1})` with the fine path on
/// `h_l` and the coarse path on `h_{l-1}`, both driven by the same
/// Brownian realisation. Sample `i` draws from stream `spec / level / i`.
#[allow(clippy::too_many_arguments)]
pub fn run_level(
    model: &SdeModel,
    functional: &Functional,
    level: usize,
    samples: u64,
    coarse_scheme: SchemeDescriptor,
    fine_scheme: SchemeDescriptor,
    refinement: usize,
    spec: &RngStreamSpec,
) -> Result<LevelResult, MlmcError> {
    if samples == 0 {
        return Err(MlmcError::InvalidInput("a level needs at least one sample".into()));
    }
    if refinement < 2 {
        return Err(MlmcError::InvalidInput(format!("refinement must be at least 2, got {refinement}")));
    }
    let t = model.horizon();
    let m = model.dim_noise();
    let n_fine = (refinement as u64)
        .checked_pow(level as u32)
        .and_then(|n| usize::try_from(n).ok())
        .ok_or_else(|| MlmcError::InvalidInput(format!("level {level} is too fine")))?;
    let h_fine = t / n_fine as f64;
    let level_spec = spec.child(level as u64);
    let two_point = fine_scheme.uses_two_point() || coarse_scheme.uses_two_point();

    let summand = |fine: &mut Integrator, coarse: &mut Integrator, i: u64| -> Result<(f64, u64), MlmcError> {
        let path_spec = level_spec.child(i);
        let wrap = |source| MlmcError::Path { level, sample: i, source };
        if level == 0 {
            let noise = GridNoise::sample_lanes(&path_spec, 1, m, t, two_point)?;
            let y = fine.integrate(1, t, &noise).map_err(wrap)?;
            return Ok((functional.eval(&y.terminal_state), y.cost));
        }
        let noise = sample_coupled_lanes(&path_spec, n_fine, m, h_fine, refinement, two_point)?;
        let yf = fine.integrate(n_fine, h_fine, noise.fine()).map_err(wrap)?;
        let yc = coarse
            .integrate(n_fine / refinement, noise.coarse().h(), noise.coarse())
            .map_err(wrap)?;
        Ok((
            functional.eval(&yf.terminal_state) - functional.eval(&yc.terminal_state),
            yf.cost + yc.cost,
        ))
    };

    let mut moments = SampleMoments::default();
    let mut cost = 0u64;
    let mut start = 0u64;
    while start < samples {
        let end = (start + BLOCK).min(samples);
        let block: Vec<Result<(f64, u64), MlmcError>> = (start..end)
            .into_par_iter()
            .map_init(
                || (Integrator::new(model, fine_scheme), Integrator::new(model, coarse_scheme)),
                |(fine, coarse), i| summand(fine, coarse, i),
            )
            .collect();
        for r in block {
            let (value, c) = r?;
            moments.push(value);
            cost += c;
        }
        start = end;
    }
    Ok(LevelResult {
        mean: moments.mean(),
        variance: moments.variance(),
        cost,
        samples,
    })
}

/// Outcome of one estimator run.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimatorReport {
    pub estimate: f64,
    pub level_means: Vec<f64>,
    pub level_variances: Vec<Option<f64>>,
    pub level_costs: Vec<u64>,
    pub total_cost: u64,
    pub plan: LevelPlan,
    pub mode: EstimatorMode,
    /// `explicit`, `pilot` or `zero-variance`.
    pub constants_origin: &'static str,
}

/// Executes an existing plan.
pub fn execute_plan(
    model: &SdeModel,
    functional: &Functional,
    plan: &LevelPlan,
    config: &EstimatorConfig,
    spec: &RngStreamSpec,
) -> Result<EstimatorReport, MlmcError> {
    let mut level_means = Vec::with_capacity(plan.levels + 1);
    let mut level_variances = Vec::with_capacity(plan.levels + 1);
    let mut level_costs = Vec::with_capacity(plan.levels + 1);
    for (level, &n) in plan.samples.iter().enumerate() {
        let fine = config.fine_scheme_at(level, plan.levels);
        let r = run_level(model, functional, level, n, config.coarse, fine, plan.refinement, spec)?;
        level_means.push(r.mean);
        level_variances.push(r.variance);
        level_costs.push(r.cost);
    }
    Ok(EstimatorReport {
        estimate: level_means.iter().sum(),
        total_cost: level_costs.iter().sum(),
        level_means,
        level_variances,
        level_costs,
        plan: plan.clone(),
        mode: config.mode,
        constants_origin: "explicit",
    })
}

/// Plans and runs the standard or modified multi-level estimator for `E f(X_T)`.
pub fn mlmc_estimate(
    model: &SdeModel,
    functional: &Functional,
    eps: f64,
    constants: &PlanConstants,
    config: &EstimatorConfig,
    spec: &RngStreamSpec,
) -> Result<EstimatorReport, MlmcError> {
    let plan = plan_for(eps, constants, config, model.horizon())?;
    let mut report = execute_plan(model, functional, &plan, config, spec)?;
    report.constants_origin = constants.origin();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sde::make_gbm;
    use std::sync::Arc;

    fn ode(rate: f64) -> SdeModel {
        SdeModel::new(
            "ode",
            1,
            1,
            Arc::new(move |x: &[f64], o: &mut [f64]| o[0] = rate * x[0]),
            Arc::new(|_: &[f64], _: usize, o: &mut [f64]| o[0] = 0.0),
            vec![1.0],
            0.0,
            1.0,
        )
        .unwrap()
    }

    const EM: SchemeDescriptor = SchemeDescriptor::euler_maruyama();
    const RI6: SchemeDescriptor = SchemeDescriptor::ri6();

    #[test]
    fn constant_dynamics_give_zero_summands() {
        let model = ode(0.0);
        let f = Functional::identity();
        for level in 1..4 {
            let r = run_level(&model, &f, level, 50, EM, EM, 2, &RngStreamSpec::new(1)).unwrap();
            assert_eq!(r.mean, 0.0);
            assert_eq!(r.variance, Some(0.0));
        }
    }

    #[test]
    fn deterministic_level_one_summand() {
        let model = ode(1.0);
        let r = run_level(&model, &Functional::identity(), 1, 20, EM, EM, 2, &RngStreamSpec::new(4)).unwrap();
        // Euler with h = 1/2 minus Euler with h = 1
        assert_eq!(r.mean, 1.5f64 * 1.5 - 2.0);
        assert_eq!(r.variance, Some(0.0));
        assert_eq!(r.cost, 20 * (2 * 2 + 2));
    }

    #[test]
    fn single_sample_has_no_variance() {
        let model = make_gbm(1.5, 0.1, 0.1);
        let r = run_level(&model, &Functional::identity(), 2, 1, EM, EM, 2, &RngStreamSpec::new(4)).unwrap();
        assert_eq!(r.variance, None);
    }

    #[test]
    fn level_cost_is_exact() {
        let model = make_gbm(1.5, 0.1, 0.1);
        let r = run_level(&model, &Functional::identity(), 3, 10, EM, RI6, 2, &RngStreamSpec::new(2)).unwrap();
        assert_eq!(r.cost, 10 * (8 * 7 + 4 * 2));
        let r = run_level(&model, &Functional::identity(), 0, 10, EM, EM, 2, &RngStreamSpec::new(2)).unwrap();
        assert_eq!(r.cost, 20);
    }

    #[test]
    fn deterministic_model_estimates_equal_top_level_scheme_value() {
        let model = ode(1.0);
        let f = Functional::identity();
        let constants = PlanConstants::ZeroVariance { c1: 1.0 };
        let spec = RngStreamSpec::new(8);
        for mode in [EstimatorMode::Standard, EstimatorMode::Modified] {
            let config = EstimatorConfig::em_ri6(mode);
            let report = mlmc_estimate(&model, &f, 0.05, &constants, &config, &spec).unwrap();
            let levels = report.plan.levels;
            let n = 1usize << levels;
            let h = 1.0 / n as f64;
            let expected = match mode {
                EstimatorMode::Standard => (1.0 + h).powi(n as i32),
                EstimatorMode::Modified => (1.0 + h + 0.5 * h * h).powi(n as i32),
            };
            assert!((report.estimate - expected).abs() < 1e-12, "{mode:?}");
            assert!(report.level_variances.iter().all(|v| v.is_none()));
            assert_eq!(report.constants_origin, "zero-variance");
        }
    }

    #[test]
    fn report_sums() {
        let model = make_gbm(1.5, 0.1, 0.1);
        let mut c = ConstantSet::unit(1.0, 2.0, 1.0, 1.0);
        c.c2 = 1e-4;
        c.c20 = 1e-3;
        c.c2l = 1e-4;
        c.c1 = 0.5;
        let config = EstimatorConfig::em_ri6(EstimatorMode::Modified);
        let r = mlmc_estimate(&model, &Functional::identity(), 0.05, &PlanConstants::Explicit(c), &config, &RngStreamSpec::new(3)).unwrap();
        assert_eq!(r.estimate, r.level_means.iter().sum::<f64>());
        assert_eq!(r.total_cost, r.level_costs.iter().sum::<u64>());
        assert_eq!(r.level_means.len(), r.plan.levels + 1);
    }

    #[test]
    fn telescoping_modes_agree_with_one_scheme() {
        let model = make_gbm(1.5, 0.1, 0.1);
        let mut c = ConstantSet::unit(1.0, 1.0, 1.0, 1.0);
        c.c2 = 1e-5;
        c.c20 = 1e-4;
        c.c2l = 1e-5;
        c.c1 = 0.5;
        let constants = PlanConstants::Explicit(c);
        let spec = RngStreamSpec::new(12);
        let mut standard = EstimatorConfig::em_ri6(EstimatorMode::Standard);
        standard.fine = EM;
        let modified = EstimatorConfig {
            mode: EstimatorMode::Modified,
            ..standard
        };
        let a = mlmc_estimate(&model, &Functional::identity(), 0.02, &constants, &standard, &spec).unwrap();
        let mut b = mlmc_estimate(&model, &Functional::identity(), 0.02, &constants, &modified, &spec).unwrap();
        b.mode = a.mode;
        assert_eq!(a, b);
    }

    #[test]
    fn results_do_not_depend_on_worker_count() {
        let model = make_gbm(1.5, 0.1, 0.1);
        let f = Functional::square();
        let spec = RngStreamSpec::with_path(77, vec![1, 2]);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| run_level(&model, &f, 4, 40_000, EM, RI6, 2, &spec).unwrap())
        };
        assert_eq!(run(1), run(3));
    }
}
