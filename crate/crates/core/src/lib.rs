//! Multi-level Monte Carlo for weak approximation of SDE functionals.
//!
//! The standard estimator runs one weak order-α scheme on every level. The
//! modified estimator keeps the order-α scheme below the top level and swaps
//! in an order-p scheme on the finest level, which needs fewer levels for
//! the same bias budget.
//!
//! * [`sde`]: test models, functionals and exact references
//! * [`noise`]: reproducible coupled Brownian and two-point increments
//! * [`schemes`]: Euler–Maruyama and RI6 with evaluation-count cost metering
//! * [`mlmc`]: level planning, estimators and pilot constant estimation
//! * [`theory`]: cost-regime classification and asymptotic cost ratios
//! * [`bench`]: RMSE-versus-cost experiments with CSV output

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod mlmc;
pub mod noise;
pub mod schemes;
pub mod sde;
pub mod theory;
