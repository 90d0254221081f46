//! Split-sample t tests and Studentized score tests for general families:
//! cumulant generating functions, Legendre transforms, the tilt equation,
//! asymptotic sample sizes and the optimal split.

mod cgf;
mod plan;
mod psi;

pub use cgf::{empirical_cgf, CgfModel, EmpiricalCgf, Family, TailIndex, ZetaKind, EMPIRICAL_LOG_BUDGET};
pub use plan::{
    k_f, legendre, n_star_general, n_star_score, optimal_split, pfdr_floor_limit, solve_t0,
    split_objective, KfMode, ScoreModel, SplitOptimum, SplitSpec, SPLIT_SEARCH,
};
pub use psi::{eta_psi, psi_eval, PsiModel};
