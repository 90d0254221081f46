//! Numerical kernels shared by every planner: gamma-family and Bessel special
//! functions, safeguarded positive series, bracketed root finding and
//! adaptive quadrature. Everything here is a pure function.

mod quad;
mod roots;
mod series;
mod special;

pub use quad::{effective_support, gauss_legendre, integrate};
pub use roots::{find_root_increasing, find_root_increasing_in, maximize_golden};
pub use series::{log_sum_series, sum_series, SeriesPolicy};
pub use special::{
    bessel_i0_log, bessel_i1_i0_ratio, digamma, gamma_p, ln_gamma_ratio, log_gamma, trigamma,
    EULER_GAMMA,
};

pub(crate) use special::{
    digamma_1p_plus_euler, ln_gamma_1p_plus_euler, ln_gamma_pos, trigamma_pos,
};
