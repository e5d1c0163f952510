//! Weak approximation schemes with metered evaluation cost.
//!
//! Cost is charged per component: one drift evaluation costs `d` units and
//! one diffusion column costs `d` units (each optionally weighted by
//! [`CostLaw`]). Euler–Maruyama consumes one drift and `m` diffusion
//! evaluations per step; RI6 consumes two drift and `5m` diffusion
//! evaluations, with `b^j(Y_n)` computed once and shared by all stages.

use std::fmt;

use thiserror::Error;

use crate::noise::{ihat_unchecked, GridNoise};
use crate::sde::SdeModel;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SchemeError {
    #[error("state became non-finite at step {step}")]
    Divergence { step: usize },
    #[error("noise grid provides {available} steps, {required} required")]
    MissingNoise { available: usize, required: usize },
    #[error("{0} needs the two-point lane, which was not drawn")]
    MissingTwoPoint(&'static str),
    #[error("noise dimension {got} does not match m = {expected}")]
    NoiseDimension { got: usize, expected: usize },
    #[error("step size must be positive, got {0}")]
    StepSize(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SchemeKind {
    /// Weak order 1.
    EulerMaruyama,
    /// Explicit weak order 2 stochastic Runge–Kutta scheme.
    Ri6,
}

impl SchemeKind {
    fn evaluations_per_step(self) -> (u64, u64) {
        match self {
            SchemeKind::EulerMaruyama => (1, 1),
            SchemeKind::Ri6 => (2, 5),
        }
    }
}

/// Units charged per drift and per diffusion-column evaluation, before the
/// factor `d`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CostLaw {
    pub drift_weight: u64,
    pub diffusion_weight: u64,
}

impl Default for CostLaw {
    fn default() -> Self {
        Self {
            drift_weight: 1,
            diffusion_weight: 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SchemeDescriptor {
    pub kind: SchemeKind,
    pub cost_law: CostLaw,
}

impl SchemeDescriptor {
    pub const fn euler_maruyama() -> Self {
        Self {
            kind: SchemeKind::EulerMaruyama,
            cost_law: CostLaw {
                drift_weight: 1,
                diffusion_weight: 1,
            },
        }
    }

    pub const fn ri6() -> Self {
        Self {
            kind: SchemeKind::Ri6,
            cost_law: CostLaw {
                drift_weight: 1,
                diffusion_weight: 1,
            },
        }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            SchemeKind::EulerMaruyama => "euler-maruyama",
            SchemeKind::Ri6 => "ri6",
        }
    }

    /// Whether steps read the two-point lane.
    pub fn uses_two_point(&self) -> bool {
        self.kind == SchemeKind::Ri6
    }

    pub fn weak_order(&self) -> f64 {
        match self.kind {
            SchemeKind::EulerMaruyama => 1.0,
            SchemeKind::Ri6 => 2.0,
        }
    }

    /// Closed-form cost of one step: `d (w_a k_a + w_b k_b m)`.
    pub fn cost_per_step(&self, d: usize, m: usize) -> u64 {
        let (drift, diffusion) = self.kind.evaluations_per_step();
        d as u64 * (self.cost_law.drift_weight * drift + self.cost_law.diffusion_weight * diffusion * m as u64)
    }

    fn charge(&self, d: usize, drift_evals: u64, diffusion_evals: u64) -> u64 {
        d as u64 * (self.cost_law.drift_weight * drift_evals + self.cost_law.diffusion_weight * diffusion_evals)
    }
}

impl fmt::Display for SchemeDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Terminal value and metered cost of one simulated path.
#[derive(Clone, Debug, PartialEq)]
pub struct PathResult {
    pub terminal_state: Vec<f64>,
    pub cost: u64,
    pub steps_taken: usize,
}

/// Reusable step buffers and evaluation counters for one model/scheme pair.
pub struct Integrator<'a> {
    model: &'a SdeModel,
    scheme: SchemeDescriptor,
    drift_evals: u64,
    diffusion_evals: u64,
    a0: Vec<f64>,
    a1: Vec<f64>,
    b0: Vec<f64>,
    stage: Vec<f64>,
    plus: Vec<f64>,
    minus: Vec<f64>,
    b_plus: Vec<f64>,
    b_minus: Vec<f64>,
    next: Vec<f64>,
}

impl<'a> Integrator<'a> {
    pub fn new(model: &'a SdeModel, scheme: SchemeDescriptor) -> Self {
        let d = model.dim_state();
        let m = model.dim_noise();
        Self {
            model,
            scheme,
            drift_evals: 0,
            diffusion_evals: 0,
            a0: vec![0.0; d],
            a1: vec![0.0; d],
            b0: vec![0.0; d * m],
            stage: vec![0.0; d],
            plus: vec![0.0; d],
            minus: vec![0.0; d],
            b_plus: vec![0.0; d],
            b_minus: vec![0.0; d],
            next: vec![0.0; d],
        }
    }

    pub fn scheme(&self) -> SchemeDescriptor {
        self.scheme
    }

    /// Units charged since construction or the last [`Integrator::reset_cost`].
    pub fn metered_cost(&self) -> u64 {
        self.scheme
            .charge(self.model.dim_state(), self.drift_evals, self.diffusion_evals)
    }

    pub fn evaluations(&self) -> (u64, u64) {
        (self.drift_evals, self.diffusion_evals)
    }

    pub fn reset_cost(&mut self) {
        self.drift_evals = 0;
        self.diffusion_evals = 0;
    }

    #[inline]
    fn drift(model: &SdeModel, counter: &mut u64, x: &[f64], out: &mut [f64]) {
        *counter += 1;
        model.drift_into(x, out);
    }

    #[inline]
    fn diffusion(model: &SdeModel, counter: &mut u64, x: &[f64], j: usize, out: &mut [f64]) {
        *counter += 1;
        model.diffusion_into(x, j, out);
    }

    /// Advances `y` in place by one step of the configured scheme.
    pub fn step(&mut self, y: &mut [f64], h: f64, dw: &[f64], two_point: &[f64]) {
        match self.scheme.kind {
            SchemeKind::EulerMaruyama => self.em(y, h, dw),
            SchemeKind::Ri6 => self.ri6(y, h, dw, two_point),
        }
    }

    fn em(&mut self, y: &mut [f64], h: f64, dw: &[f64]) {
        let model = self.model;
        let d = model.dim_state();
        Self::drift(model, &mut self.drift_evals, y, &mut self.a0);
        for i in 0..d {
            self.next[i] = y[i] + self.a0[i] * h;
        }
        for (j, &w) in dw.iter().enumerate() {
            Self::diffusion(model, &mut self.diffusion_evals, y, j, &mut self.b_plus);
            for i in 0..d {
                self.next[i] += self.b_plus[i] * w;
            }
        }
        y.copy_from_slice(&self.next);
    }

    fn ri6(&mut self, y: &mut [f64], h: f64, dw: &[f64], two_point: &[f64]) {
        let model = self.model;
        let d = model.dim_state();
        let m = model.dim_noise();
        let sqrt_h = h.sqrt();

        Self::drift(model, &mut self.drift_evals, y, &mut self.a0);
        for j in 0..m {
            Self::diffusion(model, &mut self.diffusion_evals, y, j, &mut self.b0[j * d..(j + 1) * d]);
        }

        // Υ = Y + a(Y) h + Σ_j b^j(Y) I_j
        for i in 0..d {
            self.stage[i] = y[i] + self.a0[i] * h;
        }
        for j in 0..m {
            let bj = &self.b0[j * d..(j + 1) * d];
            for i in 0..d {
                self.stage[i] += bj[i] * dw[j];
            }
        }
        Self::drift(model, &mut self.drift_evals, &self.stage, &mut self.a1);

        for i in 0..d {
            self.next[i] = y[i] + 0.5 * (self.a0[i] + self.a1[i]) * h;
        }

        for k in 0..m {
            let bk = &self.b0[k * d..(k + 1) * d];
            let ik = dw[k];

            // Υ±^(k) = Y + a(Y) h ± b^k(Y) √h
            for i in 0..d {
                let base = y[i] + self.a0[i] * h;
                self.plus[i] = base + bk[i] * sqrt_h;
                self.minus[i] = base - bk[i] * sqrt_h;
            }
            Self::diffusion(model, &mut self.diffusion_evals, &self.plus, k, &mut self.b_plus);
            Self::diffusion(model, &mut self.diffusion_evals, &self.minus, k, &mut self.b_minus);
            let ikk = ihat_unchecked(dw, two_point, sqrt_h, h, k, k) / sqrt_h;
            for i in 0..d {
                self.next[i] += 0.5 * (self.b_plus[i] - self.b_minus[i]) * ikk
                    + (0.5 * bk[i] + 0.25 * self.b_plus[i] + 0.25 * self.b_minus[i]) * ik;
            }

            // Υ̂±^(k) = Y ± Σ_{j≠k} b^j(Y) Î_(k,j) / √h
            self.plus.copy_from_slice(y);
            self.minus.copy_from_slice(y);
            for j in (0..m).filter(|&j| j != k) {
                let w = ihat_unchecked(dw, two_point, sqrt_h, h, k, j) / sqrt_h;
                let bj = &self.b0[j * d..(j + 1) * d];
                for i in 0..d {
                    self.plus[i] += bj[i] * w;
                    self.minus[i] -= bj[i] * w;
                }
            }
            Self::diffusion(model, &mut self.diffusion_evals, &self.plus, k, &mut self.b_plus);
            Self::diffusion(model, &mut self.diffusion_evals, &self.minus, k, &mut self.b_minus);
            let bk = &self.b0[k * d..(k + 1) * d];
            for i in 0..d {
                self.next[i] += 0.5 * (self.b_plus[i] - self.b_minus[i]) * sqrt_h
                    - (0.5 * bk[i] - 0.25 * self.b_plus[i] - 0.25 * self.b_minus[i]) * ik;
            }
        }
        y.copy_from_slice(&self.next);
    }

    /// Folds the scheme from the model's initial state over the first
    /// `grid_steps` rows of `noise` with step size `h`.
    pub fn integrate(&mut self, grid_steps: usize, h: f64, noise: &GridNoise) -> Result<PathResult, SchemeError> {
        if !(h > 0.0) {
            return Err(SchemeError::StepSize(h));
        }
        if noise.steps() < grid_steps {
            return Err(SchemeError::MissingNoise {
                available: noise.steps(),
                required: grid_steps,
            });
        }
        if noise.dim() != self.model.dim_noise() {
            return Err(SchemeError::NoiseDimension {
                got: noise.dim(),
                expected: self.model.dim_noise(),
            });
        }
        if grid_steps > 0 && self.scheme.uses_two_point() && !noise.has_two_point() {
            return Err(SchemeError::MissingTwoPoint(self.scheme.name()));
        }
        let start = self.metered_cost();
        let mut y = self.model.initial_state().to_vec();
        for n in 0..grid_steps {
            self.step(&mut y, h, noise.increments(n), noise.two_point(n));
            if !y.iter().all(|v| v.is_finite()) {
                return Err(SchemeError::Divergence { step: n });
            }
        }
        Ok(PathResult {
            terminal_state: y,
            cost: self.metered_cost() - start,
            steps_taken: grid_steps,
        })
    }
}

fn checked_step(
    model: &SdeModel,
    scheme: SchemeDescriptor,
    y: &[f64],
    h: f64,
    dw: &[f64],
    two_point: &[f64],
) -> Result<Vec<f64>, SchemeError> {
    if !(h > 0.0) {
        return Err(SchemeError::StepSize(h));
    }
    if dw.len() != model.dim_noise() || two_point.len() != model.dim_noise() {
        return Err(SchemeError::NoiseDimension {
            got: dw.len().min(two_point.len()),
            expected: model.dim_noise(),
        });
    }
    let mut out = y.to_vec();
    Integrator::new(model, scheme).step(&mut out, h, dw, two_point);
    if out.iter().all(|v| v.is_finite()) {
        Ok(out)
    } else {
        Err(SchemeError::Divergence { step: 0 })
    }
}

/// One Euler–Maruyama step `Y + a(Y) h + Σ_j b^j(Y) I_j`.
pub fn em_step(model: &SdeModel, y: &[f64], h: f64, dw: &[f64]) -> Result<Vec<f64>, SchemeError> {
    let unused = vec![0.0; dw.len()];
    checked_step(model, SchemeDescriptor::euler_maruyama(), y, h, dw, &unused)
}

/// One RI6 step.
pub fn ri6_step(model: &SdeModel, y: &[f64], h: f64, dw: &[f64], two_point: &[f64]) -> Result<Vec<f64>, SchemeError> {
    checked_step(model, SchemeDescriptor::ri6(), y, h, dw, two_point)
}

/// Simulates one path from the model's initial state.
pub fn integrate_path(
    model: &SdeModel,
    scheme: SchemeDescriptor,
    grid_steps: usize,
    h: f64,
    noise: &GridNoise,
) -> Result<PathResult, SchemeError> {
    Integrator::new(model, scheme).integrate(grid_steps, h, noise)
}
