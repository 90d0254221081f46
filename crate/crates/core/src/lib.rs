//! Sample-size planning for positive false discovery rate (pFDR) control in
//! large-scale multiple testing.
//!
//! Under the random-effects model every null is false with probability `pi`,
//! and the smallest pFDR any rejection rule can reach is governed by the
//! supremum `rho_n` of the false-null to true-null density ratio of the test
//! statistic. Reaching a target level `alpha` needs `rho_n >= Q` with
//! `Q = (1 - alpha)(1 - pi) / (alpha pi)`. This crate computes the smallest
//! such `n` exactly for one-sample t tests and regression F tests, gives the
//! large-deviations asymptotics for split-sample Studentized tests on general
//! and score-based statistics, and ships a Monte Carlo harness that checks the
//! theory at desk scale.
//!
//! Module map:
//! - [`numerics`]: special functions, safeguarded series, root finding, quadrature.
//! - [`pfdr`]: targets, the `Q` threshold, the minimum pFDR and the generic minimum-n search.
//! - [`normal_t`]: exact and asymptotic planning for normal-mean t tests.
//! - [`f_test`]: exact and asymptotic planning for regression F tests.
//! - [`ldp`]: cumulant generating functions, Legendre transforms and Studentized-test asymptotics.
//! - [`mc`]: the Monte Carlo verification harness.

pub mod error;
pub mod ldp;
pub mod mc;
pub mod normal_t;
pub mod numerics;
pub mod pfdr;

pub use error::{Error, Result};
pub use pfdr::{min_n_search, min_pfdr, q_threshold, LrSupCurve, PfdrTarget, PlanReport, Regime};
