//! The random-effects pFDR model: control targets, the `Q` threshold, the
//! minimum attainable pFDR and the search for the minimum sample size.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::error::{invalid, Error, Result};

/// Default upper limit for the minimum-n search.
pub const DEFAULT_N_MAX: u64 = 10_000_000;

/// A pFDR control target: level `alpha` with false-null proportion `pi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PfdrTarget {
    alpha: f64,
    pi: f64,
}

impl PfdrTarget {
    pub fn new(alpha: f64, pi: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(invalid(format!("alpha must lie in (0, 1), got {alpha}")));
        }
        if !(pi > 0.0 && pi < 1.0) {
            return Err(invalid(format!("pi must lie in (0, 1), got {pi}")));
        }
        Ok(Self { alpha, pi })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn pi(&self) -> f64 {
        self.pi
    }

    /// `Q = (1 - alpha)(1 - pi) / (alpha pi)`.
    pub fn q(&self) -> f64 {
        (1.0 - self.alpha) * (1.0 - self.pi) / (self.alpha * self.pi)
    }
}

/// The level `rho_n` must reach for `pFDR <= alpha` to be attainable.
pub fn q_threshold(target: &PfdrTarget) -> f64 {
    target.q()
}

/// Minimum pFDR `(1 - pi) / (1 - pi + pi rho)` given the likelihood-ratio supremum `rho`.
pub fn min_pfdr(pi: f64, rho: f64) -> Result<f64> {
    if !(pi > 0.0 && pi < 1.0) {
        return Err(invalid(format!("pi must lie in (0, 1), got {pi}")));
    }
    if !(rho >= 1.0) {
        return Err(invalid(format!("rho must be at least 1, got {rho}")));
    }
    Ok((1.0 - pi) / (1.0 - pi + pi * rho))
}

type RhoFn<'a> = dyn Fn(u64) -> Result<f64> + Send + Sync + 'a;

/// `n -> rho_n`, the supremum of the false-null to true-null density ratio of
/// the test statistic at sample-size index `n`.
pub struct LrSupCurve<'a> {
    eval: Box<RhoFn<'a>>,
    /// Set by [`min_n_search`]: whether the crossing it reports was verified
    /// to be consistent with a monotone curve.
    pub monotone_checked: bool,
}

impl<'a> LrSupCurve<'a> {
    pub fn new<F>(eval: F) -> Self
    where
        F: Fn(u64) -> Result<f64> + Send + Sync + 'a,
    {
        Self { eval: Box::new(eval), monotone_checked: false }
    }

    pub fn eval(&self, n: u64) -> Result<f64> {
        let rho = (self.eval)(n)?;
        if rho.is_nan() {
            return Err(invalid(format!("likelihood-ratio curve returned NaN at n = {n}")));
        }
        Ok(rho)
    }
}

impl fmt::Debug for LrSupCurve<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LrSupCurve").field("monotone_checked", &self.monotone_checked).finish()
    }
}

/// How [`min_n_search`] locates the crossing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SearchMode {
    /// Exponential bracketing and bisection, verified locally, with a linear
    /// scan fallback when the verification fails.
    #[default]
    Bracketed,
    /// Scan `n = 1, 2, ...` and stop at the first crossing.
    LinearScan,
}

/// Which formula produced a report's asymptotic sample size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Exact search only; no asymptotic formula applied.
    ExactOnly,
    /// One-sample normal t test, `n ~ ln Q / r` as the SNR `r -> 0`.
    NormalT,
    /// Normal t test with a mixed SNR, inverse moment generating function.
    NormalTMixture,
    /// F test, small effect with a fixed number of covariates.
    FSmallEffect,
    /// F test, small effect and many covariates (quadratic-root form).
    FSmallEffectManyCovariates,
    /// F test, fixed effect with many covariates.
    FManyCovariates,
    /// Split-sample Studentized t test on a general distribution.
    GeneralT,
    /// Split-sample Studentized score test.
    ScoreTest,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::ExactOnly => "exact_only",
            Regime::NormalT => "normal_t",
            Regime::NormalTMixture => "normal_t_mixture",
            Regime::FSmallEffect => "f_small_effect",
            Regime::FSmallEffectManyCovariates => "f_small_effect_many_covariates",
            Regime::FManyCovariates => "f_many_covariates",
            Regime::GeneralT => "general_t",
            Regime::ScoreTest => "score_test",
        }
    }
}

/// Output of every sizing computation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanReport {
    pub n_exact: Option<u64>,
    pub n_asymptotic: f64,
    pub regime: Regime,
    pub q_value: f64,
    pub diagnostics: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

impl PlanReport {
    pub fn new(regime: Regime, q_value: f64) -> Self {
        Self {
            n_exact: None,
            n_asymptotic: f64::NAN,
            regime,
            q_value,
            diagnostics: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    pub fn diag(&mut self, key: &str, value: f64) -> &mut Self {
        self.diagnostics.insert(key.to_string(), value);
        self
    }
}

/// Smallest `n` in `[1, n_max]` with `rho_n >= Q`.
///
/// The returned report carries `n_exact`, `rho_n` at the crossing and at its
/// predecessor, and the number of curve evaluations; `n_asymptotic` is left
/// for the caller.
pub fn min_n_search(
    curve: &mut LrSupCurve<'_>,
    target: &PfdrTarget,
    n_max: u64,
    mode: SearchMode,
) -> Result<PlanReport> {
    if n_max < 1 {
        return Err(invalid("n_max must be at least 1"));
    }
    let q = target.q();
    let mut evals = 0u64;
    let mut eval = |n: u64| -> Result<f64> {
        evals += 1;
        curve.eval(n)
    };
    let (n, rho_n, rho_prev, monotone) = match mode {
        SearchMode::LinearScan => {
            let (n, rho, prev) = linear_scan(&mut eval, q, n_max)?;
            (n, rho, prev, false)
        }
        SearchMode::Bracketed => {
            let mut seen = Vec::new();
            let mut logged = |n: u64| -> Result<f64> {
                let rho = eval(n)?;
                seen.push((n, rho));
                Ok(rho)
            };
            let (n, rho) = bracket_and_bisect(&mut logged, q, n_max)?;
            let prev = if n > 1 { Some(logged(n - 1)?) } else { None };
            seen.sort_by_key(|&(n, _)| n);
            let monotone = seen.windows(2).all(|w| w[0].1 <= w[1].1);
            if !monotone || prev.is_some_and(|p| p >= q) {
                let (n, rho, prev) = linear_scan(&mut eval, q, n_max)?;
                (n, rho, prev, false)
            } else {
                (n, rho, prev, true)
            }
        }
    };
    curve.monotone_checked = monotone;
    let mut report = PlanReport::new(Regime::ExactOnly, q);
    report.n_exact = Some(n);
    report.diag("rho_at_n_exact", rho_n);
    if let Some(p) = rho_prev {
        report.diag("rho_at_n_exact_minus_1", p);
    }
    report.diag("curve_evaluations", evals as f64);
    report.diag("monotone_checked", if monotone { 1.0 } else { 0.0 });
    Ok(report)
}

fn linear_scan<E>(eval: &mut E, q: f64, n_max: u64) -> Result<(u64, f64, Option<f64>)>
where
    E: FnMut(u64) -> Result<f64>,
{
    let mut prev = None;
    for n in 1..=n_max {
        let rho = eval(n)?;
        if rho >= q {
            return Ok((n, rho, prev));
        }
        prev = Some(rho);
    }
    Err(Error::NotAttainable { n_max, rho_at_max: prev.unwrap_or(f64::NAN), q })
}

fn bracket_and_bisect<E>(eval: &mut E, q: f64, n_max: u64) -> Result<(u64, f64)>
where
    E: FnMut(u64) -> Result<f64>,
{
    let rho1 = eval(1)?;
    if rho1 >= q {
        return Ok((1, rho1));
    }
    // invariant: rho(lo) < q
    let mut lo = 1u64;
    let mut hi = 2u64.min(n_max);
    let mut rho_hi;
    loop {
        rho_hi = eval(hi)?;
        if rho_hi >= q {
            break;
        }
        if hi == n_max {
            return Err(Error::NotAttainable { n_max, rho_at_max: rho_hi, q });
        }
        lo = hi;
        hi = hi.saturating_mul(2).min(n_max);
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        let rho = eval(mid)?;
        if rho >= q {
            hi = mid;
            rho_hi = rho;
        } else {
            lo = mid;
        }
    }
    Ok((hi, rho_hi))
}
