//! Autonomous Itô SDE models `dX = a(X) dt + Σ_j b^j(X) dB^j` together with
//! scalar functionals and closed-form reference expectations.
//!
//! Diffusion columns are addressed with zero-based indices `0..dim_noise`.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

/// `drift(x, out)` writes `a(x)` into `out`.
pub type DriftFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
/// `diffusion(x, j, out)` writes the column `b^j(x)` into `out`.
pub type DiffusionFn = Arc<dyn Fn(&[f64], usize, &mut [f64]) + Send + Sync>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("dimensions must be positive (d = {dim_state}, m = {dim_noise})")]
    ZeroDimension { dim_state: usize, dim_noise: usize },
    #[error("initial state has length {got}, expected {expected}")]
    InitialStateLength { got: usize, expected: usize },
    #[error("time horizon must satisfy t_end > t_start (got [{t_start}, {t_end}])")]
    EmptyHorizon { t_start: f64, t_end: f64 },
}

/// Drift/diffusion system with fixed dimensions, initial value and horizon.
#[derive(Clone)]
pub struct SdeModel {
    name: String,
    dim_state: usize,
    dim_noise: usize,
    drift: DriftFn,
    diffusion: DiffusionFn,
    initial_state: Vec<f64>,
    t_start: f64,
    t_end: f64,
}

impl fmt::Debug for SdeModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SdeModel")
            .field("name", &self.name)
            .field("dim_state", &self.dim_state)
            .field("dim_noise", &self.dim_noise)
            .field("initial_state", &self.initial_state)
            .field("t_start", &self.t_start)
            .field("t_end", &self.t_end)
            .finish_non_exhaustive()
    }
}

impl SdeModel {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        dim_state: usize,
        dim_noise: usize,
        drift: DriftFn,
        diffusion: DiffusionFn,
        initial_state: Vec<f64>,
        t_start: f64,
        t_end: f64,
    ) -> Result<Self, ModelError> {
        if dim_state == 0 || dim_noise == 0 {
            return Err(ModelError::ZeroDimension { dim_state, dim_noise });
        }
        if initial_state.len() != dim_state {
            return Err(ModelError::InitialStateLength {
                got: initial_state.len(),
                expected: dim_state,
            });
        }
        if !(t_end > t_start) {
            return Err(ModelError::EmptyHorizon { t_start, t_end });
        }
        Ok(Self {
            name: name.into(),
            dim_state,
            dim_noise,
            drift,
            diffusion,
            initial_state,
            t_start,
            t_end,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim_state(&self) -> usize {
        self.dim_state
    }

    pub fn dim_noise(&self) -> usize {
        self.dim_noise
    }

    pub fn initial_state(&self) -> &[f64] {
        &self.initial_state
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    /// Length of the integration interval `T - t0`.
    pub fn horizon(&self) -> f64 {
        self.t_end - self.t_start
    }

    /// Same model on a different time interval.
    pub fn with_horizon(mut self, t_start: f64, t_end: f64) -> Result<Self, ModelError> {
        if !(t_end > t_start) {
            return Err(ModelError::EmptyHorizon { t_start, t_end });
        }
        self.t_start = t_start;
        self.t_end = t_end;
        Ok(self)
    }

    #[inline]
    pub fn drift_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim_state);
        debug_assert_eq!(out.len(), self.dim_state);
        (self.drift)(x, out);
    }

    #[inline]
    pub fn diffusion_into(&self, x: &[f64], column: usize, out: &mut [f64]) {
        assert!(
            column < self.dim_noise,
            "diffusion column {column} out of range for m = {}",
            self.dim_noise
        );
        debug_assert_eq!(out.len(), self.dim_state);
        (self.diffusion)(x, column, out);
    }

    pub fn drift(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim_state];
        self.drift_into(x, &mut out);
        out
    }

    pub fn diffusion(&self, x: &[f64], column: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim_state];
        self.diffusion_into(x, column, &mut out);
        out
    }
}

/// Scalar functional `f` applied to the terminal state.
#[derive(Clone)]
pub struct Functional {
    label: String,
    eval: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
}

impl fmt::Debug for Functional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Functional").field("label", &self.label).finish()
    }
}

impl Functional {
    pub fn new(label: impl Into<String>, eval: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            label: label.into(),
            eval: Arc::new(eval),
        }
    }

    pub fn identity() -> Self {
        Self::component(0).relabel("identity")
    }

    pub fn square() -> Self {
        Self::new("square", |x| x[0] * x[0])
    }

    /// Zero-based component `i` of the state vector.
    pub fn component(i: usize) -> Self {
        Self::new(format!("component_{}", i + 1), move |x| x[i])
    }

    fn relabel(mut self, label: &str) -> Self {
        self.label = label.to_string();
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.eval)(x)
    }
}

/// Closed-form `t ↦ E f(X_t)` for a model/functional pair.
#[derive(Clone)]
pub struct ExactReference {
    expectation: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    component_index: Option<usize>,
}

impl fmt::Debug for ExactReference {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExactReference")
            .field("component_index", &self.component_index)
            .finish_non_exhaustive()
    }
}

impl ExactReference {
    pub fn new(expectation: impl Fn(f64) -> f64 + Send + Sync + 'static, component_index: Option<usize>) -> Self {
        Self {
            expectation: Arc::new(expectation),
            component_index,
        }
    }

    pub fn at(&self, t: f64) -> f64 {
        (self.expectation)(t)
    }

    pub fn component_index(&self) -> Option<usize> {
        self.component_index
    }
}

/// A model bundled with a functional and, when known, its exact expectation.
#[derive(Clone, Debug)]
pub struct Problem {
    pub model: SdeModel,
    pub functional: Functional,
    pub reference: Option<ExactReference>,
}

impl Problem {
    /// Exact `E f(X_T)` at the model's terminal time.
    pub fn exact(&self) -> Option<f64> {
        self.reference.as_ref().map(|r| r.at(self.model.t_end()))
    }
}

pub const GBM_RATE: f64 = 1.5;
pub const GBM_VOLATILITY: f64 = 0.1;
pub const GBM_INITIAL: f64 = 0.1;

/// Scalar geometric Brownian motion `dX = r X dt + σ X dB` on `[0, 1]`.
pub fn make_gbm(r: f64, sigma: f64, x0: f64) -> SdeModel {
    SdeModel::new(
        "gbm",
        1,
        1,
        Arc::new(move |x: &[f64], out: &mut [f64]| out[0] = r * x[0]),
        Arc::new(move |x: &[f64], _j: usize, out: &mut [f64]| out[0] = sigma * x[0]),
        vec![x0],
        0.0,
        1.0,
    )
    .expect("gbm construction is valid")
}

/// `E X_t = x0 e^{rt}`.
pub fn gbm_mean_reference(r: f64, x0: f64) -> ExactReference {
    ExactReference::new(move |t| x0 * (r * t).exp(), None)
}

/// `E X_t² = x0² e^{(2r + σ²) t}`.
pub fn gbm_second_moment_reference(r: f64, sigma: f64, x0: f64) -> ExactReference {
    ExactReference::new(move |t| x0 * x0 * ((2.0 * r + sigma * sigma) * t).exp(), None)
}

/// `u³ - 6u² + 8u` with `u = asinh(x)`.
pub fn nonlinear_functional_value(x: f64) -> f64 {
    let u = x.asinh();
    ((u - 6.0) * u + 8.0) * u
}

/// Scalar SDE `dX = (X/2 + √(X²+1)) dt + √(X²+1) dB`, `X_0 = 0`, on `[0, 2]`.
///
/// Under `u = asinh(X)` the dynamics become `du = dt + dB`, which gives
/// `E f(X_t) = t³ - 3t² + 2t` for the bundled functional.
pub fn make_nonlinear_scalar() -> Problem {
    let model = SdeModel::new(
        "nonlinear",
        1,
        1,
        Arc::new(|x: &[f64], out: &mut [f64]| out[0] = 0.5 * x[0] + (x[0] * x[0] + 1.0).sqrt()),
        Arc::new(|x: &[f64], _j: usize, out: &mut [f64]| out[0] = (x[0] * x[0] + 1.0).sqrt()),
        vec![0.0],
        0.0,
        2.0,
    )
    .expect("nonlinear construction is valid");
    Problem {
        model,
        functional: Functional::new("paper_f", |x| nonlinear_functional_value(x[0])),
        reference: Some(ExactReference::new(|t| t * t * t - 3.0 * t * t + 2.0 * t, None)),
    }
}

/// Drift matrix of the four-dimensional test system as `(numerator, denominator)`.
pub const FOURDIM_DRIFT: [[(i64, i64); 4]; 4] = [
    [(243, 154), (-27, 77), (23, 154), (-65, 154)],
    [(27, 77), (-243, 154), (65, 154), (-23, 154)],
    [(5, 154), (-61, 154), (162, 77), (-36, 77)],
    [(61, 154), (-5, 154), (36, 77), (-162, 77)],
];

/// One diffusion column `scale · √(x_a² + x_b² + shift) · direction`.
#[derive(Clone, Copy, Debug)]
pub struct RootColumn {
    pub scale: (i64, i64),
    /// Zero-based state indices under the square root.
    pub indices: (usize, usize),
    pub shift: (i64, i64),
    /// Reciprocals of the direction entries.
    pub direction: [i64; 4],
}

pub const FOURDIM_DIFFUSION: [RootColumn; 6] = [
    RootColumn { scale: (1, 9), indices: (1, 2), shift: (2, 23), direction: [13, 14, 13, 15] },
    RootColumn { scale: (1, 8), indices: (3, 0), shift: (1, 11), direction: [14, 16, 16, 12] },
    RootColumn { scale: (1, 12), indices: (0, 1), shift: (1, 9), direction: [6, 5, 5, 6] },
    RootColumn { scale: (1, 14), indices: (2, 3), shift: (3, 29), direction: [8, 9, 8, 9] },
    RootColumn { scale: (1, 10), indices: (0, 2), shift: (1, 13), direction: [11, 15, 13, 11] },
    RootColumn { scale: (1, 11), indices: (1, 3), shift: (2, 25), direction: [12, 13, 16, 13] },
];

pub const FOURDIM_INITIAL: [(i64, i64); 4] = [(1, 8), (1, 8), (1, 1), (1, 8)];

fn ratio((num, den): (i64, i64)) -> f64 {
    num as f64 / den as f64
}

#[derive(Clone, Copy)]
struct Column {
    scale: f64,
    indices: (usize, usize),
    shift: f64,
    direction: [f64; 4],
}

/// Four-dimensional linear-drift system driven by six non-commuting noise
/// columns, `X_0 = (1/8, 1/8, 1, 1/8)` on `[0, 1]`; `E X_t^i = X_0^i e^{2t}`.
pub fn make_four_dim() -> SdeModel {
    let a: [[f64; 4]; 4] = FOURDIM_DRIFT.map(|row| row.map(ratio));
    let columns: [Column; 6] = FOURDIM_DIFFUSION.map(|c| Column {
        scale: ratio(c.scale),
        indices: c.indices,
        shift: ratio(c.shift),
        direction: c.direction.map(|d| 1.0 / d as f64),
    });
    SdeModel::new(
        "fourdim",
        4,
        6,
        Arc::new(move |x: &[f64], out: &mut [f64]| {
            for (o, row) in out.iter_mut().zip(a.iter()) {
                *o = row[0] * x[0] + row[1] * x[1] + row[2] * x[2] + row[3] * x[3];
            }
        }),
        Arc::new(move |x: &[f64], j: usize, out: &mut [f64]| {
            let c = &columns[j];
            let (p, q) = c.indices;
            let magnitude = c.scale * (x[p] * x[p] + x[q] * x[q] + c.shift).sqrt();
            for (o, dir) in out.iter_mut().zip(c.direction.iter()) {
                *o = magnitude * dir;
            }
        }),
        FOURDIM_INITIAL.map(ratio).to_vec(),
        0.0,
        1.0,
    )
    .expect("fourdim construction is valid")
}

/// `E X_t^i = X_0^i e^{2t}` for zero-based component `i`.
pub fn four_dim_reference(component: usize) -> ExactReference {
    let x0 = ratio(FOURDIM_INITIAL[component]);
    ExactReference::new(move |t| x0 * (2.0 * t).exp(), Some(component))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gbm_with_default_parameters() {
        let m = make_gbm(GBM_RATE, GBM_VOLATILITY, GBM_INITIAL);
        assert_eq!((m.dim_state(), m.dim_noise()), (1, 1));
        assert_eq!(m.initial_state(), &[0.1]);
        assert_relative_eq!(m.drift(&[0.1])[0], 0.15);
        assert_relative_eq!(m.diffusion(&[0.1], 0)[0], 0.01);
        assert_eq!(m.horizon(), 1.0);
    }

    #[test]
    fn gbm_zero_coefficients() {
        let m = make_gbm(0.0, 0.0, 1.0);
        assert_eq!(m.drift(&[1.0]), vec![0.0]);
        assert_eq!(m.diffusion(&[1.0], 0), vec![0.0]);
    }

    #[test]
    fn deterministic_gbm_mean_matches_rk4_ode() {
        // dx = 2x dt, integrated with classical RK4
        let m = make_gbm(2.0, 0.0, 1.0);
        let n = 2000;
        let h = 1.0 / n as f64;
        let f = |x: f64| m.drift(&[x])[0];
        let mut x = 1.0;
        for _ in 0..n {
            let k1 = f(x);
            let k2 = f(x + 0.5 * h * k1);
            let k3 = f(x + 0.5 * h * k2);
            let k4 = f(x + h * k3);
            x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        let exact = gbm_mean_reference(2.0, 1.0).at(1.0);
        assert_relative_eq!(exact, 2f64.exp(), max_relative = 1e-15);
        assert_relative_eq!(x, exact, max_relative = 1e-12);
    }

    #[test]
    fn nonlinear_reference_values() {
        let p = make_nonlinear_scalar();
        let r = p.reference.as_ref().unwrap();
        assert_eq!(r.at(2.0), 0.0);
        assert_eq!(r.at(0.0), 0.0);
        assert_eq!(r.at(1.0), 0.0);
        assert_eq!(p.exact(), Some(0.0));
        assert_eq!(p.model.horizon(), 2.0);
    }

    #[test]
    fn nonlinear_functional_substitution_identity() {
        for &u in &[-3.0f64, -1.25, -0.1, 0.0, 0.3, 1.0, 2.5, 4.0] {
            let x = f64::sinh(u);
            let expected = u * u * u - 6.0 * u * u + 8.0 * u;
            assert_relative_eq!(nonlinear_functional_value(x), expected, epsilon = 1e-12, max_relative = 1e-12);
        }
    }

    #[test]
    fn nonlinear_functional_is_stable_for_large_negative_state() {
        // log(x + sqrt(x² + 1)) loses all digits here; asinh does not
        let x = -1e9f64;
        let u = -(2e9f64).ln();
        assert_relative_eq!(x.asinh(), u, max_relative = 1e-14);
        assert!(nonlinear_functional_value(x).is_finite());
    }

    #[test]
    fn four_dim_references() {
        assert_relative_eq!(four_dim_reference(2).at(1.0), 7.38905609893065, max_relative = 1e-14);
        assert_eq!(four_dim_reference(0).at(0.0), 0.125);
        assert_eq!(four_dim_reference(3).component_index(), Some(3));
    }

    /// Exact rational `A x0` with x0 scaled by 8 to integers.
    #[test]
    fn four_dim_drift_at_initial_state_matches_rational_oracle() {
        let x0_times_8: [i64; 4] = [1, 1, 8, 1];
        let m = make_four_dim();
        let got = m.drift(m.initial_state());
        for (i, row) in FOURDIM_DRIFT.iter().enumerate() {
            // Σ n_k/d_k · x_k/8 over a common denominator 154·8
            let numerator: i64 = row
                .iter()
                .zip(x0_times_8.iter())
                .map(|(&(n, d), &x)| n * (154 / d) * x)
                .sum();
            let exact = numerator as f64 / (154.0 * 8.0);
            assert_relative_eq!(got[i], exact, max_relative = 1e-15);
            // x0 is an eigenvector with eigenvalue 2
            assert_eq!(numerator * 8, 2 * x0_times_8[i] * 154 * 8);
        }
    }

    #[test]
    fn four_dim_drift_is_linear() {
        let m = make_four_dim();
        let x = [0.3, -1.2, 0.7, 2.0];
        let y = [-0.4, 0.9, 1.1, -0.25];
        let xy: Vec<f64> = x.iter().zip(y.iter()).map(|(a, b)| a + b).collect();
        let (ax, ay, axy) = (m.drift(&x), m.drift(&y), m.drift(&xy));
        for i in 0..4 {
            assert_relative_eq!(axy[i], ax[i] + ay[i], epsilon = 1e-14);
        }
    }

    #[test]
    fn four_dim_diffusion_columns_are_positive() {
        let m = make_four_dim();
        for x in [[0.0; 4], [-5.0, 3.0, -1.0, 0.5], [1e-8, -1e-8, 0.0, 0.0]] {
            for j in 0..6 {
                assert!(m.diffusion(&x, j).iter().all(|&v| v > 0.0));
            }
        }
    }

    #[test]
    #[should_panic(expected = "out of range")]
    fn diffusion_rejects_column_beyond_m() {
        make_gbm(1.0, 1.0, 1.0).diffusion(&[1.0], 1);
    }

    #[test]
    fn rejects_empty_horizon() {
        let m = make_gbm(1.0, 1.0, 1.0);
        assert!(matches!(m.with_horizon(1.0, 1.0), Err(ModelError::EmptyHorizon { .. })));
    }
}
