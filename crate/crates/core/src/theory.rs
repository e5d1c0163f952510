//! Asymptotic cost regimes of the multi-level estimator and the cost ratios
//! between the standard and modified estimators.
//!
//! Condition texts are the inequalities themselves, written in ASCII, so
//! that benchmark output can be read without the surrounding derivation.

use std::fmt;

use crate::mlmc::{ConstantSet, EXPONENT_TOLERANCE};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Regime {
    BetaGtGamma,
    BetaEqGamma,
    BetaLtGamma,
}

impl Regime {
    pub fn of(beta: f64, gamma: f64) -> Self {
        if (beta - gamma).abs() <= EXPONENT_TOLERANCE {
            Regime::BetaEqGamma
        } else if beta > gamma {
            Regime::BetaGtGamma
        } else {
            Regime::BetaLtGamma
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::BetaGtGamma => "beta_gt_gamma",
            Regime::BetaEqGamma => "beta_eq_gamma",
            Regime::BetaLtGamma => "beta_lt_gamma",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Condition {
    pub text: String,
    pub met: bool,
}

impl Condition {
    fn new(text: &str, met: bool) -> Self {
        Self {
            text: text.to_string(),
            met,
        }
    }
}

/// Cost bound `C = O(ε^{-e})`, times `(log ε)²` when `log_squared`.
#[derive(Clone, Debug, PartialEq)]
pub struct RegimeClassification {
    pub regime: Regime,
    pub cost_exponent: f64,
    pub log_squared: bool,
    pub conditions_met: Vec<Condition>,
}

impl RegimeClassification {
    pub fn all_conditions_met(&self) -> bool {
        self.conditions_met.iter().all(|c| c.met)
    }
}

/// Cost regime of the standard estimator built from order-α schemes.
pub fn classify(constants: &ConstantSet) -> RegimeClassification {
    let c = constants;
    let regime = Regime::of(c.beta, c.gamma);
    let max_gamma = c.gamma.max(c.gamma_l);
    match regime {
        Regime::BetaGtGamma | Regime::BetaEqGamma => RegimeClassification {
            regime,
            cost_exponent: 2.0,
            log_squared: regime == Regime::BetaEqGamma,
            conditions_met: vec![
                Condition::new("beta_L >= gamma_L", c.beta_l >= c.gamma_l),
                Condition::new("alpha >= max(gamma, gamma_L) / 2", c.alpha >= 0.5 * max_gamma),
            ],
        },
        Regime::BetaLtGamma => {
            let gap = (c.gamma - c.beta).max(c.gamma_l - c.beta_l);
            RegimeClassification {
                regime,
                cost_exponent: 2.0 + gap / c.alpha,
                log_squared: false,
                conditions_met: vec![Condition::new(
                    "alpha >= (max(gamma, gamma_L) - max(gamma - beta, gamma_L - beta_L)) / 2",
                    c.alpha >= 0.5 * (max_gamma - gap),
                )],
            }
        }
    }
}

/// Asymptotic lower bound `(p/α)²` on `C(standard) / C(modified)` when `β = γ`.
pub fn ratio_beta_eq_gamma(alpha: f64, p: f64) -> f64 {
    (p / alpha).powi(2)
}

/// Asymptotic lower bound on `C(ML(p,p)) / C(ML(α,p))` when `β < γ` and
/// `γ - β = γ_L - β_L`. `chat3`, `chat3l` are the leading coefficients of
/// the exact interior and top-level cost expansions.
#[allow(clippy::too_many_arguments)]
pub fn ratio_beta_lt_gamma(
    refinement: usize,
    beta: f64,
    gamma: f64,
    c2: f64,
    c3: f64,
    c2l: f64,
    c3l: f64,
    chat3: f64,
    chat3l: f64,
) -> f64 {
    let m = refinement as f64;
    let s = m.powf((gamma - beta) / 2.0) - 1.0;
    let bracket = (chat3 * c2) / (chat3l * c2l)
        + chat3 * (c2 * c3l).sqrt() / (chat3l * (c2l * c3).sqrt()) * s
        + ((c2 * c3) / (c2l * c3l)).sqrt() * s
        + s * s;
    m.powf(2.0 * (gamma - beta)) / bracket
}

/// Compact form of [`ratio_beta_lt_gamma`] valid when the leading cost
/// coefficients equal the bound constants:
/// `M^{γ-β} (1 - M^{(β-γ)/2} (1 - (c₂c₃/(c_{2,L}c_{3,L}))^{1/2}))^{-2}`.
pub fn ratio_beta_lt_gamma_compact(refinement: usize, beta: f64, gamma: f64, c2: f64, c3: f64, c2l: f64, c3l: f64) -> f64 {
    let m = refinement as f64;
    let r = ((c2 * c3) / (c2l * c3l)).sqrt();
    m.powf(gamma - beta) * (1.0 - m.powf((beta - gamma) / 2.0) * (1.0 - r)).powi(-2)
}

/// Which estimator an asymptotic ratio compares against the modified one.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Baseline {
    /// Order-α scheme on every level.
    AllCoarse,
    /// Order-p scheme on every level.
    AllFine,
}

impl Baseline {
    pub fn as_str(&self) -> &'static str {
        match self {
            Baseline::AllCoarse => "ML(alpha,alpha)",
            Baseline::AllFine => "ML(p,p)",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AsymptoticRatio {
    pub value: f64,
    pub baseline: Baseline,
}

/// Closed-form asymptotic cost ratio where one exists.
pub fn asymptotic_ratio(constants: &ConstantSet, refinement: usize) -> Option<AsymptoticRatio> {
    let c = constants;
    match Regime::of(c.beta, c.gamma) {
        Regime::BetaEqGamma => Some(AsymptoticRatio {
            value: ratio_beta_eq_gamma(c.alpha, c.p),
            baseline: Baseline::AllCoarse,
        }),
        Regime::BetaLtGamma => {
            let [_, chat3, chat3l] = c.leading_cost();
            Some(AsymptoticRatio {
                value: ratio_beta_lt_gamma(refinement, c.beta, c.gamma, c.c2, c.c3, c.c2l, c.c3l, chat3, chat3l),
                baseline: Baseline::AllFine,
            })
        }
        Regime::BetaGtGamma => None,
    }
}

/// Side conditions under which the modified estimator is eventually
/// cheaper when `β > γ`.
#[derive(Clone, Debug, PartialEq)]
pub struct ImprovementCheck {
    pub applicable: bool,
    pub conditions: Vec<Condition>,
}

impl ImprovementCheck {
    pub fn guaranteed(&self) -> bool {
        self.applicable && self.conditions.iter().all(|c| c.met)
    }
}

/// Evaluates the conditions for an eventual cost reduction in the `β > γ`
/// regime. Not applicable outside `β > γ` or when `β - γ > β_L - γ_L`.
pub fn improvement_guaranteed(constants: &ConstantSet, refinement: usize) -> ImprovementCheck {
    let c = constants;
    let gap = c.beta - c.gamma;
    let top_gap = c.beta_l - c.gamma_l;
    if Regime::of(c.beta, c.gamma) != Regime::BetaGtGamma || gap > top_gap + EXPONENT_TOLERANCE {
        return ImprovementCheck {
            applicable: false,
            conditions: Vec::new(),
        };
    }
    let max_gamma = c.gamma.max(c.gamma_l);
    let mut conditions = vec![
        Condition::new("alpha >= gamma / 2", c.alpha >= 0.5 * c.gamma),
        Condition::new("p >= max(gamma, gamma_L) / 2", c.p >= 0.5 * max_gamma),
        Condition::new(
            "p > max(beta + gamma, beta - gamma + 2 gamma_L) / 4",
            c.p > 0.25 * (c.beta + c.gamma).max(c.beta - c.gamma + 2.0 * c.gamma_l),
        ),
    ];
    if (gap - top_gap).abs() <= EXPONENT_TOLERANCE {
        let damp = (1.0 - (refinement as f64).powf((c.gamma - c.beta) / 2.0)).powi(2);
        let [_, chat3, chat3l] = c.leading_cost();
        conditions.push(Condition::new(
            "c2 c3 > (1 - M^((gamma - beta)/2))^2 c2L c3L",
            c.c2 * c.c3 > damp * c.c2l * c.c3l,
        ));
        conditions.push(Condition::new(
            "chat3^2 c2 / c3 > (1 - M^((gamma - beta)/2))^2 chat3L^2 c2L / c3L",
            chat3 * chat3 * c.c2 / c.c3 > damp * chat3l * chat3l * c.c2l / c.c3l,
        ));
    }
    ImprovementCheck {
        applicable: true,
        conditions,
    }
}
