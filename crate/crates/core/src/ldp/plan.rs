use std::fmt;

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::numerics::{effective_support, find_root_increasing_in, integrate, maximize_golden};
use crate::pfdr::{PfdrTarget, PlanReport, Regime};

use super::cgf::{CgfModel, Family, TailIndex};

/// Search interval for the optimal split.
pub const SPLIT_SEARCH: (f64, f64) = (1e-4, 1.0 - 1e-4);

/// A maximizer closer than this to either end of [`SPLIT_SEARCH`] is reported
/// as a boundary outcome.
const BOUNDARY_SLACK: f64 = 1e-6;

/// An end of [`SPLIT_SEARCH`] whose objective is within this relative margin of
/// the interior maximum also counts as a boundary outcome; the uniform family's
/// objective is flat to rounding near its supremum.
const BOUNDARY_REL_MARGIN: f64 = 1e-9;

/// Fraction `rho = m/N` of the `N = n + m` observations spent on the variance
/// estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SplitSpec {
    rho: f64,
}

impl SplitSpec {
    pub fn new(rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(invalid(format!("split rho must lie in (0, 1), got {rho}")));
        }
        Ok(Self { rho })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// `(n, m)` with `m = round(rho N)` and `n = N - m`.
    pub fn counts(&self, total: u64) -> (u64, u64) {
        let m = (self.rho * total as f64).round() as u64;
        let m = m.min(total);
        (total - m, m)
    }
}

/// Legendre transform `Lambda*(u)` and its maximizer `eta(u)`.
pub fn legendre(cgf: &dyn CgfModel, u: f64) -> Result<(f64, f64)> {
    if !u.is_finite() {
        return Err(Error::Range { target: u });
    }
    if u == 0.0 {
        return Ok((0.0, 0.0));
    }
    let (lo, hi) = cgf.domain();
    let hint = u / cgf.d2(0.0).max(f64::MIN_POSITIVE);
    let eta = find_root_increasing_in(|t| cgf.d1(t), u, hint.abs().max(1e-3), lo, hi)?;
    let value = (u * eta - cgf.lambda(eta)).max(0.0);
    Ok((value, eta))
}

/// Positive root of `t Lambda'(t) = (1 + lambda) rho / (1 - rho)`.
pub fn solve_t0(cgf: &dyn CgfModel, tail: &TailIndex, split: SplitSpec) -> Result<f64> {
    let rho = split.rho();
    let rhs = (1.0 + tail.lambda) * rho / (1.0 - rho);
    let hint = (rhs / cgf.d2(0.0).max(f64::MIN_POSITIVE)).sqrt();
    let upper = cgf.domain_sup();
    find_root_increasing_in(
        |t| t * cgf.d1(t),
        rhs,
        if hint.is_finite() && hint > 0.0 { hint } else { 1.0 },
        0.0,
        upper,
    )
}

/// Limit of the minimum attainable pFDR, `(1 - pi) / (1 - pi + pi exp((1 - rho) T t0))`.
pub fn pfdr_floor_limit(pi: f64, t_total: f64, split: SplitSpec, t0: f64) -> f64 {
    let exponent = (1.0 - split.rho()) * t_total * t0;
    // (1 - pi) / (1 - pi + pi e^x) written to stay finite for large x
    let null = 1.0 - pi;
    1.0 / (1.0 + pi / null * exponent.exp())
}

/// Asymptotic total sample size `N*` for the split-sample t test with shift `d`.
pub fn n_star_general(
    target: &PfdrTarget,
    cgf: &dyn CgfModel,
    tail: &TailIndex,
    split: SplitSpec,
    d: f64,
) -> Result<PlanReport> {
    if !(d > 0.0 && d.is_finite()) {
        return Err(invalid(format!("effect shift d must be positive, got {d}")));
    }
    let t0 = solve_t0(cgf, tail, split)?;
    let ln_q = target.q().ln();
    let n = ln_q / (d * (1.0 - split.rho()) * t0);
    let mut report = PlanReport::new(Regime::GeneralT, target.q());
    report.n_asymptotic = n;
    fill_split(&mut report, target, split, n, d, t0);
    report.diag("t0", t0).diag("lambda", tail.lambda).diag("d", d);
    report.notes.push(format!("family {}", cgf.family_tag()));
    Ok(report)
}

fn fill_split(report: &mut PlanReport, target: &PfdrTarget, split: SplitSpec, n: f64, shift: f64, t0: f64) {
    let total = n.ceil().max(1.0);
    let (n_mean, m_var) = split.counts(total as u64);
    report
        .diag("rho", split.rho())
        .diag("n_ceil", total)
        .diag("n_mean", n_mean as f64)
        .diag("m_variance", m_var as f64)
        .diag("pfdr_floor_at_n_ceil", pfdr_floor_limit(target.pi(), shift * total, split, t0));
}

/// How `K_f` is obtained for a score model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KfMode {
    /// `K_f = 0` for a symmetric score density.
    SymmetricBounded,
    /// `K_f = int z f^2 / int f^2`.
    DensityWeighted,
}

/// `K_f` for the score density `f`.
pub fn k_f<F>(density: F, mode: KfMode) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    match mode {
        KfMode::SymmetricBounded => Ok(0.0),
        KfMode::DensityWeighted => {
            let sq = |z: f64| {
                let v = density(z);
                v * v
            };
            let (lo, hi) = effective_support(sq, 0.0, 1e-20)
                .map_err(|e| Error::Quadrature(format!("cannot bracket the support of f^2: {e}")))?;
            let den = integrate(sq, lo, hi, 1e-10)?;
            if !(den > 0.0) {
                return Err(Error::Quadrature("int f^2 vanished".into()));
            }
            let num = integrate(|z| z * sq(z), lo, hi, 1e-10)?;
            Ok(num / den)
        }
    }
}

/// The score `X` of a parametric family at the null, with its tail index and `K_f`.
pub struct ScoreModel {
    cgf: Box<dyn CgfModel>,
    tail: TailIndex,
    k_f: f64,
    k_f_mode: KfMode,
}

impl fmt::Debug for ScoreModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScoreModel")
            .field("cgf", &self.cgf.family_tag())
            .field("tail", &self.tail)
            .field("k_f", &self.k_f)
            .field("k_f_mode", &self.k_f_mode)
            .finish()
    }
}

impl ScoreModel {
    pub fn new(cgf: Box<dyn CgfModel>, tail: TailIndex, k_f: f64, k_f_mode: KfMode) -> Result<Self> {
        if !k_f.is_finite() {
            return Err(invalid(format!("K_f must be finite, got {k_f}")));
        }
        if k_f_mode == KfMode::SymmetricBounded && k_f != 0.0 {
            return Err(invalid("K_f must be 0 for a symmetric score density"));
        }
        Ok(Self { cgf, tail, k_f, k_f_mode })
    }

    pub fn cgf(&self) -> &dyn CgfModel {
        self.cgf.as_ref()
    }

    pub fn tail(&self) -> &TailIndex {
        &self.tail
    }

    pub fn k_f(&self) -> f64 {
        self.k_f
    }

    pub fn k_f_mode(&self) -> KfMode {
        self.k_f_mode
    }
}

impl Family {
    /// The score model of a built-in `*Score` family.
    pub fn score_model(&self) -> Result<ScoreModel> {
        let mode = match self {
            Family::NormalScore { .. } | Family::CauchyScore => KfMode::SymmetricBounded,
            Family::GammaScore => KfMode::DensityWeighted,
            other => {
                return Err(invalid(format!("{} is not a score family", other.name())));
            }
        };
        let family = *self;
        let kf = k_f(|x| family.density(x), mode)?;
        ScoreModel::new(Box::new(family), self.tail_index(), kf, mode)
    }
}

/// Asymptotic `N*` for the Studentized score test with parameter `theta`.
pub fn n_star_score(
    target: &PfdrTarget,
    model: &ScoreModel,
    split: SplitSpec,
    theta: f64,
) -> Result<PlanReport> {
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(invalid(format!("theta must be positive, got {theta}")));
    }
    let t0 = solve_t0(model.cgf(), model.tail(), split)?;
    let slope = model.cgf().d1(t0);
    let rho = split.rho();
    // ln of the tail-ratio limit per unit T
    let rate = (1.0 - rho) * slope + 2.0 * rho * model.k_f();
    if !(rate > 0.0) {
        return Err(invalid(format!("score rate (1 - rho) Lambda'(t0) + 2 rho K_f = {rate} is not positive")));
    }
    let ln_q = target.q().ln();
    let n = ln_q / (theta * rate);
    let mut report = PlanReport::new(Regime::ScoreTest, target.q());
    report.n_asymptotic = n;
    let total = n.ceil().max(1.0);
    let (n_mean, m_var) = split.counts(total as u64);
    report
        .diag("t0", t0)
        .diag("lambda", model.tail().lambda)
        .diag("theta", theta)
        .diag("lambda_d1_at_t0", slope)
        .diag("k_f", model.k_f())
        .diag("ratio_limit_rate", rate)
        .diag("ratio_limit_at_n_ceil", (rate * theta * total).exp())
        .diag("rho", rho)
        .diag("n_ceil", total)
        .diag("n_mean", n_mean as f64)
        .diag("m_variance", m_var as f64);
    report.notes.push(format!("family {}", model.cgf().family_tag()));
    Ok(report)
}

/// Outcome of maximizing `(1 - rho) t0(rho)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum SplitOptimum {
    Interior { rho_star: f64, objective: f64 },
    /// The maximizer sits at an end of the search interval; `rho` is that end.
    Boundary { rho: f64, objective: f64, upper: bool },
}

impl SplitOptimum {
    pub fn objective(&self) -> f64 {
        match *self {
            SplitOptimum::Interior { objective, .. } | SplitOptimum::Boundary { objective, .. } => objective,
        }
    }
}

/// `(1 - rho) t0(rho)`; `N*` is inversely proportional to it.
pub fn split_objective(cgf: &dyn CgfModel, tail: &TailIndex, rho: f64) -> Result<f64> {
    Ok((1.0 - rho) * solve_t0(cgf, tail, SplitSpec::new(rho)?)?)
}

/// Split fraction minimizing `N*`.
pub fn optimal_split(cgf: &dyn CgfModel, tail: &TailIndex) -> Result<SplitOptimum> {
    let (a, b) = SPLIT_SEARCH;
    let (x, fx) = maximize_golden(|rho| split_objective(cgf, tail, rho), a, b, 1e-10)?;
    let at_a = split_objective(cgf, tail, a)?;
    let at_b = split_objective(cgf, tail, b)?;
    if x - a < BOUNDARY_SLACK || at_a >= fx * (1.0 - BOUNDARY_REL_MARGIN) {
        return Ok(SplitOptimum::Boundary { rho: a, objective: at_a.max(fx), upper: false });
    }
    if b - x < BOUNDARY_SLACK || at_b >= fx * (1.0 - BOUNDARY_REL_MARGIN) {
        return Ok(SplitOptimum::Boundary { rho: b, objective: at_b.max(fx), upper: true });
    }
    Ok(SplitOptimum::Interior { rho_star: x, objective: fx })
}
