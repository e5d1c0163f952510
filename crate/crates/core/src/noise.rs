//! Driving noise for coupled level simulation.
//!
//! Every sample owns a generator derived from `(master_seed, stream_path)`
//! alone, so results do not depend on how samples are scheduled across
//! workers. Brownian increments and two-point variables are drawn from
//! separate lanes: switching a path between Euler–Maruyama and RI6 never
//! shifts its Brownian increments.

use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rand_xoshiro::Xoshiro256PlusPlus;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NoiseError {
    #[error("number of fine steps {n_fine} is not divisible by the refinement factor {refinement}")]
    Indivisible { n_fine: usize, refinement: usize },
    #[error("refinement factor must be at least 2, got {0}")]
    Refinement(usize),
    #[error("step size must be positive and finite, got {0}")]
    StepSize(f64),
    #[error("noise index ({k}, {j}) out of range for m = {m}")]
    Index { k: usize, j: usize, m: usize },
}

/// Lane used for Gaussian Brownian increments.
pub const BROWNIAN_LANE: u64 = 0;
/// Lane used for the two-point variables.
pub const TWO_POINT_LANE: u64 = 1;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[inline]
fn absorb(state: u64, component: u64) -> u64 {
    splitmix64(state ^ splitmix64(component).rotate_left(17))
}

/// Position of a random stream in the tree rooted at `master_seed`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RngStreamSpec {
    pub master_seed: u64,
    pub stream_path: Vec<u64>,
}

impl RngStreamSpec {
    pub fn new(master_seed: u64) -> Self {
        Self {
            master_seed,
            stream_path: Vec::new(),
        }
    }

    pub fn with_path(master_seed: u64, stream_path: impl Into<Vec<u64>>) -> Self {
        Self {
            master_seed,
            stream_path: stream_path.into(),
        }
    }

    /// Stream one level deeper.
    pub fn child(&self, index: u64) -> Self {
        let mut stream_path = self.stream_path.clone();
        stream_path.push(index);
        Self {
            master_seed: self.master_seed,
            stream_path,
        }
    }

    /// Hash of the full path. The path length is absorbed last so that a
    /// path and its zero-extended prefix never collide.
    fn key(&self) -> u64 {
        let state = self
            .stream_path
            .iter()
            .fold(splitmix64(self.master_seed), |s, &c| absorb(s, c));
        absorb(state, self.stream_path.len() as u64)
    }

    /// Generator for one lane of this stream.
    pub fn rng(&self, lane: u64) -> Xoshiro256PlusPlus {
        let mut state = absorb(self.key(), lane);
        let mut seed = [0u8; 32];
        for chunk in seed.chunks_exact_mut(8) {
            state = splitmix64(state);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        Xoshiro256PlusPlus::from_seed(seed)
    }
}

/// Noise for one path on an equidistant grid: `steps × dim` Brownian
/// increments `N(0, h)` and two-point draws `±√h`, both row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct GridNoise {
    h: f64,
    steps: usize,
    dim: usize,
    increments: Vec<f64>,
    two_point: Vec<f64>,
}

impl GridNoise {
    /// Draws `steps × dim` increments for a single (uncoupled) path.
    pub fn sample(spec: &RngStreamSpec, steps: usize, dim: usize, h: f64) -> Result<Self, NoiseError> {
        check_step(h)?;
        Ok(Self::draw(spec, steps, dim, h, true))
    }

    /// Like [`GridNoise::sample`] but leaves the two-point lane undrawn
    /// unless `two_point` is set.
    pub(crate) fn sample_lanes(spec: &RngStreamSpec, steps: usize, dim: usize, h: f64, two_point: bool) -> Result<Self, NoiseError> {
        check_step(h)?;
        Ok(Self::draw(spec, steps, dim, h, two_point))
    }

    fn draw(spec: &RngStreamSpec, steps: usize, dim: usize, h: f64, with_two_point: bool) -> Self {
        let sqrt_h = h.sqrt();
        let mut brownian = spec.rng(BROWNIAN_LANE);
        let increments = (0..steps * dim)
            .map(|_| sqrt_h * brownian.sample::<f64, _>(StandardNormal))
            .collect();
        let two_point = if with_two_point {
            let mut signs = spec.rng(TWO_POINT_LANE);
            (0..steps * dim)
                .map(|_| if signs.random::<bool>() { sqrt_h } else { -sqrt_h })
                .collect()
        } else {
            Vec::new()
        };
        Self {
            h,
            steps,
            dim,
            increments,
            two_point,
        }
    }

    /// Builds a grid from explicit rows; used by tests and deterministic drivers.
    /// An empty `two_point` leaves the two-point lane undrawn.
    pub fn from_parts(h: f64, dim: usize, increments: Vec<f64>, two_point: Vec<f64>) -> Self {
        assert!(two_point.is_empty() || increments.len() == two_point.len());
        assert_eq!(increments.len() % dim, 0);
        Self {
            h,
            steps: increments.len() / dim,
            dim,
            increments,
            two_point,
        }
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Brownian increments `I_{(j),n}` of step `n`.
    #[inline]
    pub fn increments(&self, n: usize) -> &[f64] {
        &self.increments[n * self.dim..(n + 1) * self.dim]
    }

    /// Two-point variables `Ĩ_{(j),n}` of step `n`; empty when the lane was not drawn.
    #[inline]
    pub fn two_point(&self, n: usize) -> &[f64] {
        if self.two_point.is_empty() {
            return &[];
        }
        &self.two_point[n * self.dim..(n + 1) * self.dim]
    }

    pub fn has_two_point(&self) -> bool {
        !self.two_point.is_empty()
    }

    pub fn all_increments(&self) -> &[f64] {
        &self.increments
    }

    pub fn all_two_point(&self) -> &[f64] {
        &self.two_point
    }
}

/// Fine-grid noise plus its coarse-grid aggregate for one coupled sample.
#[derive(Clone, Debug, PartialEq)]
pub struct CoupledIncrements {
    refinement: usize,
    fine: GridNoise,
    coarse: GridNoise,
}

/// Draws fine increments and aggregates blocks of `refinement` consecutive
/// steps into coarse increments, summing in ascending index order.
///
/// Coarse two-point variables reuse the sign of the first fine two-point
/// draw in each block, scaled to `±√(M h)`.
pub fn sample_coupled(
    spec: &RngStreamSpec,
    n_fine: usize,
    m: usize,
    h_fine: f64,
    refinement: usize,
) -> Result<CoupledIncrements, NoiseError> {
    sample_coupled_lanes(spec, n_fine, m, h_fine, refinement, true)
}

pub(crate) fn sample_coupled_lanes(
    spec: &RngStreamSpec,
    n_fine: usize,
    m: usize,
    h_fine: f64,
    refinement: usize,
    two_point: bool,
) -> Result<CoupledIncrements, NoiseError> {
    if refinement < 2 {
        return Err(NoiseError::Refinement(refinement));
    }
    if !n_fine.is_multiple_of(refinement) {
        return Err(NoiseError::Indivisible { n_fine, refinement });
    }
    check_step(h_fine)?;
    let fine = GridNoise::draw(spec, n_fine, m, h_fine, two_point);
    Ok(CoupledIncrements::aggregate(fine, refinement))
}

impl CoupledIncrements {
    fn aggregate(fine: GridNoise, refinement: usize) -> Self {
        let m = fine.dim;
        let n_coarse = fine.steps / refinement;
        let h_coarse = fine.h * refinement as f64;
        let sqrt_hc = h_coarse.sqrt();
        let with_two_point = fine.has_two_point();
        let mut increments = vec![0.0; n_coarse * m];
        let mut two_point = if with_two_point { vec![0.0; n_coarse * m] } else { Vec::new() };
        for n in 0..n_coarse {
            for j in 0..m {
                let mut sum = 0.0;
                for r in 0..refinement {
                    sum += fine.increments[(n * refinement + r) * m + j];
                }
                increments[n * m + j] = sum;
                if with_two_point {
                    two_point[n * m + j] = sqrt_hc.copysign(fine.two_point[n * refinement * m + j]);
                }
            }
        }
        let coarse = GridNoise {
            h: h_coarse,
            steps: n_coarse,
            dim: m,
            increments,
            two_point,
        };
        Self { refinement, fine, coarse }
    }

    /// Couples an explicit fine grid.
    pub fn from_fine(fine: GridNoise, refinement: usize) -> Result<Self, NoiseError> {
        if refinement < 2 {
            return Err(NoiseError::Refinement(refinement));
        }
        if !fine.steps.is_multiple_of(refinement) {
            return Err(NoiseError::Indivisible {
                n_fine: fine.steps,
                refinement,
            });
        }
        Ok(Self::aggregate(fine, refinement))
    }

    pub fn refinement(&self) -> usize {
        self.refinement
    }

    pub fn h_fine(&self) -> f64 {
        self.fine.h
    }

    pub fn n_fine(&self) -> usize {
        self.fine.steps
    }

    pub fn fine(&self) -> &GridNoise {
        &self.fine
    }

    pub fn coarse(&self) -> &GridNoise {
        &self.coarse
    }
}

fn check_step(h: f64) -> Result<(), NoiseError> {
    if h > 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(NoiseError::StepSize(h))
    }
}

/// Mixed-increment surrogate `Î_{(k,j)}` for zero-based `k, j < m`:
///
/// * `k = j`: `½(I_k² − h)`
/// * `k < j`: `½(I_k I_j − √h Ĩ_k)`
/// * `k > j`: `½(I_k I_j + √h Ĩ_j)`
pub fn ihat(increments: &[f64], two_point: &[f64], h: f64, k: usize, j: usize) -> Result<f64, NoiseError> {
    let m = increments.len().min(two_point.len());
    if k >= m || j >= m {
        return Err(NoiseError::Index { k, j, m });
    }
    Ok(ihat_unchecked(increments, two_point, h.sqrt(), h, k, j))
}

#[inline]
pub(crate) fn ihat_unchecked(increments: &[f64], two_point: &[f64], sqrt_h: f64, h: f64, k: usize, j: usize) -> f64 {
    use std::cmp::Ordering::*;
    match k.cmp(&j) {
        Equal => 0.5 * (increments[k] * increments[k] - h),
        Less => 0.5 * (increments[k] * increments[j] - sqrt_h * two_point[k]),
        Greater => 0.5 * (increments[k] * increments[j] + sqrt_h * two_point[j]),
    }
}
