//! Reference computations shared by the integration tests. Nothing here calls
//! into the planning or sampling code under test.

#![allow(dead_code)]

use std::sync::Arc;

use mlmc_core::mlmc::ConstantSet;
use mlmc_core::sde::{Functional, SdeModel};
use rand::Rng;

/// Variance and cost per sample of level `l` in an `levels`-level plan.
pub fn level_terms(c: &ConstantSet, l: usize, levels: usize, h: f64) -> (f64, f64) {
    let (c2, c3, beta, gamma) = if l == 0 {
        (c.c20, c.c30, c.beta, c.gamma)
    } else if l == levels {
        (c.c2l, c.c3l, c.beta_l, c.gamma_l)
    } else {
        (c.c2, c.c3, c.beta, c.gamma)
    };
    (c2 * h.powf(beta), c3 * h.powf(-gamma))
}

/// Minimises `Σ N_l C_l` subject to `Σ V_l / N_l = budget` over real `N_l > 0`
/// by bisecting on the multiplier `μ` in the stationarity condition
/// `N_l = √(μ V_l / C_l)`.
pub fn lagrange_sample_sizes(v: &[f64], cost: &[f64], budget: f64) -> Vec<f64> {
    let sizes = |mu: f64| -> Vec<f64> { v.iter().zip(cost).map(|(v, c)| (mu * v / c).sqrt()).collect() };
    let slack = |mu: f64| -> f64 { v.iter().zip(sizes(mu)).map(|(v, n)| v / n).sum::<f64>() - budget };
    let (mut lo, mut hi) = (1e-300f64, 1.0f64);
    while slack(hi) > 0.0 {
        hi *= 4.0;
    }
    while slack(lo) < 0.0 {
        lo /= 4.0;
    }
    for _ in 0..4000 {
        let mid = (lo * hi).sqrt();
        if mid == lo || mid == hi {
            break;
        }
        if slack(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    sizes((lo * hi).sqrt())
}

/// Smallest `L ≥ 1` with `c1 h_L^order ≤ √q ε`, by direct search.
pub fn smallest_level(q: f64, c1: f64, eps: f64, t: f64, order: f64, refinement: usize) -> usize {
    (1..200)
        .find(|&l| c1 * (t / (refinement as f64).powi(l as i32)).powf(order) <= q.sqrt() * eps * (1.0 + 1e-12))
        .unwrap()
}

/// Random valid constants covering `β < γ`, `β = γ` and `β > γ`, with distinct top-level values.
pub fn random_constant_set(rng: &mut impl Rng) -> ConstantSet {
    let alpha = rng.random_range(0.5..1.5);
    let p = alpha * rng.random_range(1.0..2.5);
    let gamma = rng.random_range(1.0..2.5);
    let beta = match rng.random_range(0..3) {
        0 => gamma,
        _ => rng.random_range(0.5..3.0),
    };
    let mut c = ConstantSet::unit(alpha, p, beta, gamma);
    c.beta_l = beta * rng.random_range(0.8..1.5);
    c.gamma_l = gamma * rng.random_range(1.0..1.5);
    c.c1 = rng.random_range(0.05..5.0);
    c.c20 = rng.random_range(0.01..10.0);
    c.c2 = rng.random_range(0.01..10.0);
    c.c2l = rng.random_range(0.01..10.0);
    c.c30 = rng.random_range(0.5..5.0);
    c.c3 = rng.random_range(0.5..5.0);
    c.c3l = rng.random_range(0.5..20.0);
    c
}

/// Exact mean and variance of `f(Y^l) - f(Y^{l-1})` (or `f(Y^0)` for `l = 0`)
/// for Euler–Maruyama on `dX = r X dt + σ X dW`, `f(x) = x`, `M = 2`.
///
/// Per coarse step the fine path multiplies by `(1+a+σΔW₁)(1+a+σΔW₂)` and the
/// coarse path by `1+2a+σ(ΔW₁+ΔW₂)`, with `a = r h_f`; the second moments of
/// the product over independent steps factorise.
pub fn gbm_em_level_moments(level: u32, r: f64, sigma: f64, x0: f64, t: f64) -> (f64, f64) {
    if level == 0 {
        return (x0 * (1.0 + r * t), x0 * x0 * sigma * sigma * t);
    }
    let n = 2f64.powi(level as i32 - 1);
    let hf = t / (2.0 * n);
    let a = r * hf;
    let v = sigma * sigma * hf;
    let ef = (1.0 + a) * (1.0 + a);
    let ec = 1.0 + 2.0 * a;
    let ef2 = ((1.0 + a) * (1.0 + a) + v).powi(2);
    let ec2 = ec * ec + 2.0 * v;
    let efc = (1.0 + a) * (1.0 + a) * ec + 2.0 * (1.0 + a) * v;
    let mean = x0 * (ef.powf(n) - ec.powf(n));
    let second = x0 * x0 * (ef2.powf(n) - 2.0 * efc.powf(n) + ec2.powf(n));
    (mean, second - mean * mean)
}

/// `dX¹ = dW¹`, `dX² = X¹ dW²` from `(1, 0)` on `[0, 1]` with `f(x) = √6 x₂`.
/// Under Euler–Maruyama with `M = 2` the level-`l` summand has variance
/// exactly `3 h_l`.
pub fn linear_variance_problem() -> (SdeModel, Functional) {
    let model = SdeModel::new(
        "iterated-integral",
        2,
        2,
        Arc::new(|_: &[f64], out: &mut [f64]| out.fill(0.0)),
        Arc::new(|x: &[f64], j: usize, out: &mut [f64]| {
            if j == 0 {
                out.copy_from_slice(&[1.0, 0.0]);
            } else {
                out.copy_from_slice(&[0.0, x[0]]);
            }
        }),
        vec![1.0, 0.0],
        0.0,
        1.0,
    )
    .unwrap();
    (model, Functional::new("sqrt6-x2", |x| 6f64.sqrt() * x[1]))
}

/// Ordinary least-squares slope of `y` against `x`.
pub fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}
