mod common;

use common::{lagrange_sample_sizes, level_terms, random_constant_set, smallest_level};
use mlmc_core::mlmc::{optimal_q, plan_levels, ConstantSet};
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

fn oracle_sizes(c: &ConstantSet, levels: usize, t: f64, m: usize, eps: f64, q: f64) -> Vec<f64> {
    let (v, cost): (Vec<f64>, Vec<f64>) = (0..=levels)
        .map(|l| level_terms(c, l, levels, t / (m as f64).powi(l as i32)))
        .unzip();
    lagrange_sample_sizes(&v, &cost, (1.0 - q) * eps * eps)
}

#[test]
fn sample_sizes_solve_the_constrained_cost_minimisation() {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(11);
    for _ in 0..40 {
        let c = random_constant_set(&mut rng);
        for &(t, m) in &[(1.0, 2usize), (2.0, 2), (1.0, 4), (0.5, 3)] {
            let eps = 0.05;
            let plan = plan_levels(eps, 0.5, &c, c.p, t, m).unwrap();
            let want = oracle_sizes(&c, plan.levels, t, m, eps, 0.5);
            for (got, want) in plan.samples_real.iter().zip(&want) {
                assert!((got / want - 1.0).abs() < 1e-9, "{got} vs {want} for {c:?}, T = {t}, M = {m}");
            }
        }
    }
}

#[test]
fn level_count_is_the_smallest_meeting_the_bias_budget() {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(12);
    for _ in 0..200 {
        let c = random_constant_set(&mut rng);
        for &eps in &[1.0, 0.1, 1e-3] {
            for &q in &[0.2, 0.5, 0.8] {
                let plan = plan_levels(eps, q, &c, c.p, 1.0, 2).unwrap();
                assert_eq!(plan.levels, smallest_level(q, c.c1, eps, 1.0, c.p, 2));
            }
        }
    }
}

#[test]
fn planned_variance_meets_its_share_of_the_budget() {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(13);
    for _ in 0..100 {
        let c = random_constant_set(&mut rng);
        let (eps, q) = (0.02, 0.3);
        let plan = plan_levels(eps, q, &c, c.alpha, 1.0, 2).unwrap();
        let var: f64 = (0..=plan.levels)
            .map(|l| level_terms(&c, l, plan.levels, plan.step_sizes[l]).0 / plan.samples[l] as f64)
            .sum();
        assert!(var <= (1.0 - q) * eps * eps * (1.0 + 1e-12));
    }
}

#[test]
fn optimal_split_minimises_the_leading_cost_factor() {
    for &(beta, gamma, p) in &[(1.0, 2.0, 1.0), (0.5, 1.0, 2.0), (1.0, 3.0, 0.5)] {
        let q_hat = optimal_q(beta, gamma, p).unwrap();
        let g = |q: f64| q.powf((beta - gamma) / (2.0 * p)) / (1.0 - q);
        for dq in [-1e-3, 1e-3] {
            assert!(g(q_hat) < g(q_hat + dq));
        }
    }
}
