//! Single-step checks of the integrators against straight transcriptions of
//! their update formulas on random models, states and noise.

use std::sync::Arc;

use mlmc_core::schemes::{em_step, ri6_step};
use mlmc_core::sde::SdeModel;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

/// Smooth coefficient field with random parameters:
/// `a_i(x) = p_i · x + sin(x_i)`, `b^j_i(x) = q_ij · x + cos(x_i + j) / 2`.
struct RandomField {
    d: usize,
    m: usize,
    p: Vec<Vec<f64>>,
    q: Vec<Vec<Vec<f64>>>,
}

impl RandomField {
    fn new(rng: &mut impl Rng) -> Self {
        let d = rng.random_range(1..=4);
        let m = rng.random_range(1..=4);
        let mut coef = || rng.random_range(-1.0..1.0);
        let p = (0..d).map(|_| (0..d).map(|_| coef()).collect()).collect();
        let q = (0..m)
            .map(|_| (0..d).map(|_| (0..d).map(|_| coef()).collect()).collect())
            .collect();
        Self { d, m, p, q }
    }

    fn a(&self, x: &[f64]) -> Vec<f64> {
        (0..self.d)
            .map(|i| self.p[i].iter().zip(x).map(|(c, v)| c * v).sum::<f64>() + x[i].sin())
            .collect()
    }

    fn b(&self, x: &[f64], j: usize) -> Vec<f64> {
        (0..self.d)
            .map(|i| self.q[j][i].iter().zip(x).map(|(c, v)| c * v).sum::<f64>() + 0.5 * (x[i] + j as f64).cos())
            .collect()
    }

    fn model(self: &Arc<Self>) -> SdeModel {
        let (fa, fb) = (Arc::clone(self), Arc::clone(self));
        SdeModel::new(
            "random",
            self.d,
            self.m,
            Arc::new(move |x: &[f64], out: &mut [f64]| out.copy_from_slice(&fa.a(x))),
            Arc::new(move |x: &[f64], j: usize, out: &mut [f64]| out.copy_from_slice(&fb.b(x, j))),
            vec![0.0; self.d],
            0.0,
            1.0,
        )
        .unwrap()
    }
}

fn axpy(y: &[f64], s: f64, x: &[f64]) -> Vec<f64> {
    y.iter().zip(x).map(|(a, b)| a + s * b).collect()
}

fn ihat(i: &[f64], it: &[f64], h: f64, k: usize, j: usize) -> f64 {
    if k == j {
        0.5 * (i[k] * i[k] - h)
    } else if k < j {
        0.5 * (i[k] * i[j] - h.sqrt() * it[k])
    } else {
        0.5 * (i[k] * i[j] + h.sqrt() * it[j])
    }
}

fn ri6_oracle(f: &RandomField, y: &[f64], h: f64, i: &[f64], it: &[f64]) -> Vec<f64> {
    let sh = h.sqrt();
    let ay = f.a(y);
    let mut ups = axpy(y, h, &ay);
    for j in 0..f.m {
        ups = axpy(&ups, i[j], &f.b(y, j));
    }
    let mut next = axpy(y, 0.5 * h, &ay);
    next = axpy(&next, 0.5 * h, &f.a(&ups));
    for k in 0..f.m {
        let bk = f.b(y, k);
        let base = axpy(y, h, &ay);
        let bp = f.b(&axpy(&base, sh, &bk), k);
        let bm = f.b(&axpy(&base, -sh, &bk), k);
        let mut hat_p = y.to_vec();
        let mut hat_m = y.to_vec();
        for j in (0..f.m).filter(|&j| j != k) {
            let w = ihat(i, it, h, k, j) / sh;
            hat_p = axpy(&hat_p, w, &f.b(y, j));
            hat_m = axpy(&hat_m, -w, &f.b(y, j));
        }
        let bhp = f.b(&hat_p, k);
        let bhm = f.b(&hat_m, k);
        let ikk = ihat(i, it, h, k, k);
        for r in 0..f.d {
            next[r] += 0.5 * (bp[r] - bm[r]) * ikk / sh;
            next[r] += (0.5 * bk[r] + 0.25 * bp[r] + 0.25 * bm[r]) * i[k];
            next[r] += 0.5 * (bhp[r] - bhm[r]) * sh;
            next[r] -= (0.5 * bk[r] - 0.25 * bhp[r] - 0.25 * bhm[r]) * i[k];
        }
    }
    next
}

fn em_oracle(f: &RandomField, y: &[f64], h: f64, i: &[f64]) -> Vec<f64> {
    let mut next = axpy(y, h, &f.a(y));
    for j in 0..f.m {
        next = axpy(&next, i[j], &f.b(y, j));
    }
    next
}

struct Draw {
    field: Arc<RandomField>,
    y: Vec<f64>,
    h: f64,
    i: Vec<f64>,
    it: Vec<f64>,
}

fn draws(count: usize, seed: u64) -> impl Iterator<Item = Draw> {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    (0..count).map(move |_| {
        let field = Arc::new(RandomField::new(&mut rng));
        let h = rng.random_range(1e-4..0.5f64);
        let y = (0..field.d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let i = (0..field.m).map(|_| rng.random_range(-3.0..3.0) * h.sqrt()).collect();
        let it = (0..field.m)
            .map(|_| if rng.random::<bool>() { h.sqrt() } else { -h.sqrt() })
            .collect();
        Draw { field, y, h, i, it }
    })
}

fn assert_close(got: &[f64], want: &[f64], tol: f64, what: &str) {
    for (g, w) in got.iter().zip(want) {
        let scale = w.abs().max(1.0);
        assert!((g - w).abs() <= tol * scale, "{what}: {g} vs {w}");
    }
}

#[test]
fn ri6_matches_transcribed_update_on_random_inputs() {
    for d in draws(1000, 7) {
        let model = d.field.model();
        let got = ri6_step(&model, &d.y, d.h, &d.i, &d.it).unwrap();
        let want = ri6_oracle(&d.field, &d.y, d.h, &d.i, &d.it);
        assert_close(&got, &want, 1e-14, "ri6");
    }
}

#[test]
fn em_matches_transcribed_update_on_random_inputs() {
    for d in draws(1000, 8) {
        let model = d.field.model();
        let got = em_step(&model, &d.y, d.h, &d.i).unwrap();
        assert_close(&got, &em_oracle(&d.field, &d.y, d.h, &d.i), 1e-14, "em");
    }
}

#[test]
fn ri6_with_scalar_noise_ignores_two_point_variables() {
    for d in draws(200, 9).filter(|d| d.field.m == 1) {
        let model = d.field.model();
        let flipped: Vec<f64> = d.it.iter().map(|v| -v).collect();
        let a = ri6_step(&model, &d.y, d.h, &d.i, &d.it).unwrap();
        let b = ri6_step(&model, &d.y, d.h, &d.i, &flipped).unwrap();
        assert_eq!(a, b);
    }
}
