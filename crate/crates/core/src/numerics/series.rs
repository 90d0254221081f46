use crate::error::{invalid, Error, Result};

/// Truncation and accumulation policy for nonnegative infinite series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesPolicy {
    pub rel_tol: f64,
    pub max_terms: usize,
    /// Accumulate with a running log-scale even when terms are representable.
    pub log_domain: bool,
}

impl SeriesPolicy {
    pub fn new(rel_tol: f64, max_terms: usize, log_domain: bool) -> Result<Self> {
        if !(rel_tol > 0.0 && rel_tol <= 1e-6) {
            return Err(invalid(format!("series rel_tol must lie in (0, 1e-6], got {rel_tol}")));
        }
        if max_terms < 1000 {
            return Err(invalid(format!("series max_terms must be at least 1000, got {max_terms}")));
        }
        Ok(Self { rel_tol, max_terms, log_domain })
    }
}

impl Default for SeriesPolicy {
    fn default() -> Self {
        Self { rel_tol: 1e-14, max_terms: 1_000_000, log_domain: false }
    }
}

/// Running sum of terms given by their logarithms.
///
/// Starts as a plain sum and moves to `scale + ln(acc)` form as soon as a term
/// leaves the comfortably representable range (or immediately in log-domain mode).
struct LogAccumulator {
    scaled: bool,
    scale: f64,
    acc: f64,
}

const LINEAR_LIMIT: f64 = 600.0;

impl LogAccumulator {
    fn new(log_domain: bool) -> Self {
        Self { scaled: log_domain, scale: f64::NEG_INFINITY, acc: 0.0 }
    }

    fn push(&mut self, log_term: f64) {
        if log_term == f64::NEG_INFINITY {
            return;
        }
        if !self.scaled && log_term.abs() < LINEAR_LIMIT {
            self.acc += log_term.exp();
            return;
        }
        if !self.scaled {
            self.scaled = true;
            if self.acc > 0.0 {
                self.scale = self.acc.ln();
                self.acc = 1.0;
            }
        }
        if log_term > self.scale {
            self.acc = self.acc * (self.scale - log_term).exp() + 1.0;
            self.scale = log_term;
        } else {
            self.acc += (log_term - self.scale).exp();
        }
    }

    fn ln_sum(&self) -> f64 {
        if self.scaled {
            self.scale + self.acc.ln()
        } else {
            self.acc.ln()
        }
    }
}

/// Logarithm of the sum of a nonnegative series whose terms are supplied as
/// logarithms by `log_term(k)`; `None` marks the end of a finite series.
///
/// The series is truncated once the terms have passed their mode (a term
/// strictly smaller than its predecessor) and the current term has dropped
/// below `rel_tol` times the partial sum. Poisson-weighted series grow up to a
/// mode near the noncentrality before decaying, so a relative test alone could
/// stop early on the rising side.
pub fn log_sum_series<F>(mut log_term: F, policy: &SeriesPolicy) -> Result<f64>
where
    F: FnMut(usize) -> Option<f64>,
{
    let ln_tol = policy.rel_tol.ln();
    let mut acc = LogAccumulator::new(policy.log_domain);
    let mut prev = f64::NEG_INFINITY;
    let mut past_mode = false;
    for k in 0..policy.max_terms {
        let Some(lt) = log_term(k) else {
            return Ok(acc.ln_sum());
        };
        if lt.is_nan() || lt == f64::INFINITY {
            return Err(invalid(format!("series term {k} has log value {lt}")));
        }
        acc.push(lt);
        if k > 0 && lt < prev {
            past_mode = true;
        }
        prev = lt;
        if past_mode && lt < ln_tol + acc.ln_sum() {
            return Ok(acc.ln_sum());
        }
    }
    Err(Error::NonConvergence { max_terms: policy.max_terms })
}

/// Sum of a nonnegative series, see [`log_sum_series`].
pub fn sum_series<F>(log_term: F, policy: &SeriesPolicy) -> Result<f64>
where
    F: FnMut(usize) -> Option<f64>,
{
    log_sum_series(log_term, policy).map(f64::exp)
}
