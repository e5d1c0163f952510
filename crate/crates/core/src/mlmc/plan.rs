//! Level count, κ and per-level sample sizes from the rate/constant bundle.

use super::MlmcError;

/// Exponent comparisons closer than this are treated as equal.
pub const EXPONENT_TOLERANCE: f64 = 1e-9;

/// Additional cost term `ĉ^{(i)} T h^{-γ+δ_i}` for level 0, interior levels
/// and the top level respectively.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyCostTerm {
    pub coefficients: [f64; 3],
    pub delta: f64,
}

/// Exact polynomial cost model: leading coefficients `(ĉ_{3,0}, ĉ_3, ĉ_{3,L})`
/// plus lower-order terms.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyCost {
    pub leading: [f64; 3],
    pub terms: Vec<PolyCostTerm>,
}

impl PolyCost {
    /// Single-term model matching the given cost constants.
    pub fn single(c30: f64, c3: f64, c3l: f64) -> Self {
        Self {
            leading: [c30, c3, c3l],
            terms: Vec::new(),
        }
    }

    /// Cost of one sample at step size `h`; `slot` is 0 (level 0), 1
    /// (interior) or 2 (top level) and `gamma` the matching growth exponent.
    pub fn sample_cost(&self, slot: usize, t: f64, h: f64, gamma: f64) -> f64 {
        let mut cost = self.leading[slot] * t * h.powf(-gamma);
        for term in &self.terms {
            cost += term.coefficients[slot] * t * h.powf(-gamma + term.delta);
        }
        cost
    }
}

/// Rates and constants of the variance, bias and cost bounds.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstantSet {
    /// Weak order of the scheme used below the top level.
    pub alpha: f64,
    /// Weak order of the scheme on the top level.
    pub p: f64,
    pub beta: f64,
    pub beta_l: f64,
    pub gamma: f64,
    pub gamma_l: f64,
    /// Bias constant of the top-level scheme.
    pub c1: f64,
    pub c20: f64,
    pub c2: f64,
    pub c2l: f64,
    pub c30: f64,
    pub c3: f64,
    pub c3l: f64,
    pub poly_cost: Option<PolyCost>,
}

impl ConstantSet {
    /// Every constant set to 1 with `β = β_L`, `γ = γ_L`.
    pub fn unit(alpha: f64, p: f64, beta: f64, gamma: f64) -> Self {
        Self {
            alpha,
            p,
            beta,
            beta_l: beta,
            gamma,
            gamma_l: gamma,
            c1: 1.0,
            c20: 1.0,
            c2: 1.0,
            c2l: 1.0,
            c30: 1.0,
            c3: 1.0,
            c3l: 1.0,
            poly_cost: None,
        }
    }

    pub fn validate(&self) -> Result<(), MlmcError> {
        let positive = [
            ("alpha", self.alpha),
            ("p", self.p),
            ("beta", self.beta),
            ("beta_L", self.beta_l),
            ("c1", self.c1),
            ("c20", self.c20),
            ("c2", self.c2),
            ("c2L", self.c2l),
            ("c30", self.c30),
            ("c3", self.c3),
            ("c3L", self.c3l),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(MlmcError::InvalidConstant(format!("{name} must be positive and finite, got {v}")));
            }
        }
        for (name, v) in [("gamma", self.gamma), ("gamma_L", self.gamma_l)] {
            if !(v >= 1.0 && v.is_finite()) {
                return Err(MlmcError::InvalidConstant(format!("{name} must be at least 1, got {v}")));
            }
        }
        if let Some(poly) = &self.poly_cost {
            if poly.leading.iter().any(|&c| !(c > 0.0)) {
                return Err(MlmcError::InvalidConstant("leading cost coefficients must be positive".into()));
            }
            for term in &poly.terms {
                if term.coefficients.iter().any(|&c| !(c >= 0.0)) || !(term.delta > 0.0) {
                    return Err(MlmcError::InvalidConstant(
                        "cost terms need non-negative coefficients and positive delta".into(),
                    ));
                }
                if self.gamma - term.delta < 1.0 || self.gamma_l - term.delta < 1.0 {
                    return Err(MlmcError::InvalidConstant(format!(
                        "gamma - delta and gamma_L - delta must be at least 1 (delta = {})",
                        term.delta
                    )));
                }
            }
        }
        Ok(())
    }

    /// Leading cost coefficients `(ĉ_{3,0}, ĉ_3, ĉ_{3,L})`, defaulting to the
    /// bound constants when no polynomial model is given.
    pub fn leading_cost(&self) -> [f64; 3] {
        self.poly_cost
            .as_ref()
            .map(|p| p.leading)
            .unwrap_or([self.c30, self.c3, self.c3l])
    }

    /// `(c_2, c_3, β, γ)` for level `l` of an `L`-level plan.
    pub fn level_constants(&self, level: usize, levels: usize) -> (f64, f64, f64, f64) {
        if level == 0 {
            (self.c20, self.c30, self.beta, self.gamma)
        } else if level == levels {
            (self.c2l, self.c3l, self.beta_l, self.gamma_l)
        } else {
            (self.c2, self.c3, self.beta, self.gamma)
        }
    }
}

/// Levels, step sizes and sample counts of one estimator run.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelPlan {
    /// Index of the finest level `L`.
    pub levels: usize,
    pub refinement: usize,
    pub q: f64,
    /// `h_l = T M^{-l}` for `l = 0..=L`.
    pub step_sizes: Vec<f64>,
    pub samples: Vec<u64>,
    /// Real-valued sample sizes before rounding up.
    pub samples_real: Vec<f64>,
    pub kappa: f64,
}

impl LevelPlan {
    pub fn top_step(&self) -> f64 {
        self.step_sizes[self.levels]
    }
}

/// `h_l = T M^{-l}`, `l = 0..=levels`.
pub fn step_sizes(t: f64, refinement: usize, levels: usize) -> Vec<f64> {
    let mut h = Vec::with_capacity(levels + 1);
    let mut steps = 1u64;
    for _ in 0..=levels {
        h.push(t / steps as f64);
        steps *= refinement as u64;
    }
    h
}

fn check_split(q: f64) -> Result<(), MlmcError> {
    if q > 0.0 && q < 1.0 {
        Ok(())
    } else {
        Err(MlmcError::InvalidInput(format!("q must lie in (0, 1), got {q}")))
    }
}

/// `L = ⌈ log(q^{-1/2} c₁ ε^{-1} T^order) / (order log M) ⌉`, at least 1.
pub fn compute_levels(q: f64, c1: f64, eps: f64, t: f64, order: f64, refinement: usize) -> Result<usize, MlmcError> {
    check_split(q)?;
    if !(c1 > 0.0 && eps > 0.0 && order > 0.0 && t > 0.0) || refinement < 2 {
        return Err(MlmcError::InvalidInput(format!(
            "level count needs c1, eps, T, order > 0 and M >= 2 (c1 = {c1}, eps = {eps}, T = {t}, order = {order}, M = {refinement})"
        )));
    }
    let x = (q.powf(-0.5) * c1 / eps * t.powf(order)).ln() / (order * (refinement as f64).ln());
    // Absorb round-off so that exact integers are not pushed up by one ulp.
    let levels = (x - 1e-12 * x.abs().max(1.0)).ceil();
    Ok(if levels < 1.0 { 1 } else { levels as usize })
}

/// κ for an `L`-level plan with finest step `h_L`.
pub fn compute_kappa(constants: &ConstantSet, h_top: f64, refinement: usize, t: f64, levels: usize) -> Result<f64, MlmcError> {
    let c = constants;
    let (beta, gamma) = (c.beta, c.gamma);
    let endpoint_0 = (c.c20 * c.c30).sqrt();
    let endpoint_l = (c.c2l * c.c3l).sqrt() * h_top.powf((c.beta_l - c.gamma_l) / 2.0);
    let interior = (c.c2 * c.c3).sqrt();
    if (beta - gamma).abs() <= EXPONENT_TOLERANCE {
        return Ok(endpoint_0 + (levels as f64 - 1.0) * interior + endpoint_l);
    }
    let e = (beta - gamma) / 2.0;
    let denominator = 1.0 - (refinement as f64).powf((gamma - beta) / 2.0);
    if denominator == 0.0 {
        return Err(MlmcError::InvalidInput("geometric κ series is degenerate".into()));
    }
    let geometric = ((t / refinement as f64).powf(e) - h_top.powf(e)) / denominator;
    Ok(endpoint_0 * t.powf(e) + interior * geometric + endpoint_l)
}

/// Real-valued `N_l = (1-q)^{-1} ε^{-2} h_l^{(β_l+γ_l)/2} (c_{2,l}/c_{3,l})^{1/2} κ`.
pub fn sample_sizes_real(eps: f64, q: f64, constants: &ConstantSet, step_sizes: &[f64], kappa: f64) -> Vec<f64> {
    let levels = step_sizes.len() - 1;
    let scale = kappa / ((1.0 - q) * eps * eps);
    step_sizes
        .iter()
        .enumerate()
        .map(|(l, &h)| {
            let (c2, c3, beta, gamma) = constants.level_constants(l, levels);
            scale * h.powf((beta + gamma) / 2.0) * (c2 / c3).sqrt()
        })
        .collect()
}

/// Rounded-up sample sizes, each at least 1.
pub fn compute_sample_sizes(eps: f64, q: f64, constants: &ConstantSet, plan_partial: &LevelPlan) -> Result<Vec<u64>, MlmcError> {
    check_split(q)?;
    if !(eps > 0.0) {
        return Err(MlmcError::InvalidInput(format!("eps must be positive, got {eps}")));
    }
    Ok(round_up(&sample_sizes_real(eps, q, constants, &plan_partial.step_sizes, plan_partial.kappa)))
}

pub(crate) fn round_up(real: &[f64]) -> Vec<u64> {
    real.iter().map(|&n| (n.ceil() as u64).max(1)).collect()
}

/// `q̂ = (γ-β)/(γ-β+2p)`, defined for `γ > β`.
pub fn optimal_q(beta: f64, gamma: f64, p: f64) -> Result<f64, MlmcError> {
    if !(gamma > beta) || !(p > 0.0) {
        return Err(MlmcError::NotApplicable(format!(
            "optimal split needs gamma > beta and p > 0 (beta = {beta}, gamma = {gamma}, p = {p})"
        )));
    }
    Ok((gamma - beta) / (gamma - beta + 2.0 * p))
}

/// Full plan for a run whose top-level scheme has weak order `order`.
pub fn plan_levels(
    eps: f64,
    q: f64,
    constants: &ConstantSet,
    order: f64,
    t: f64,
    refinement: usize,
) -> Result<LevelPlan, MlmcError> {
    constants.validate()?;
    let levels = compute_levels(q, constants.c1, eps, t, order, refinement)?;
    let step_sizes = step_sizes(t, refinement, levels);
    let kappa = compute_kappa(constants, step_sizes[levels], refinement, t, levels)?;
    let samples_real = sample_sizes_real(eps, q, constants, &step_sizes, kappa);
    Ok(LevelPlan {
        levels,
        refinement,
        q,
        samples: round_up(&samples_real),
        step_sizes,
        samples_real,
        kappa,
    })
}
