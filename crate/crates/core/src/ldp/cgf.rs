use std::fmt;

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::numerics::{
    bessel_i0_log, bessel_i1_i0_ratio, digamma_1p_plus_euler, ln_gamma_1p_plus_euler, trigamma_pos,
};

/// A cumulant generating function `Lambda(t) = ln E exp(t X)` of a mean-zero
/// observable, with its first two derivatives on the open domain.
pub trait CgfModel: Send + Sync + fmt::Debug {
    fn lambda(&self, t: f64) -> f64;
    fn d1(&self, t: f64) -> f64;
    fn d2(&self, t: f64) -> f64;
    /// `(inf D, sup D)`; either end may be infinite.
    fn domain(&self) -> (f64, f64);
    fn family_tag(&self) -> String;

    fn domain_sup(&self) -> f64 {
        self.domain().1
    }
}

/// Behaviour of the slowly varying factor `zeta` in the tail index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ZetaKind {
    Constant,
    Logarithmic,
}

/// Local behaviour `g(x) ~ C x^lambda zeta(1/x)` of the density of `X - Y` at 0.
///
/// Only `lambda` enters the sample-size formulas; `zeta_kind` and `c_const`
/// are kept as metadata.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailIndex {
    pub lambda: f64,
    pub zeta_kind: ZetaKind,
    pub c_const: Option<f64>,
}

impl TailIndex {
    pub fn new(lambda: f64, zeta_kind: ZetaKind, c_const: Option<f64>) -> Result<Self> {
        if !(lambda > -1.0 && lambda.is_finite()) {
            return Err(invalid(format!("tail index lambda must exceed -1, got {lambda}")));
        }
        if let Some(c) = c_const {
            if !(c > 0.0 && c.is_finite()) {
                return Err(invalid(format!("tail constant C must be positive, got {c}")));
            }
        }
        Ok(Self { lambda, zeta_kind, c_const })
    }

    /// `lambda = 0` with constant `zeta`, the case of a density bounded away
    /// from 0 and infinity at the origin.
    pub fn regular(c_const: Option<f64>) -> Self {
        Self { lambda: 0.0, zeta_kind: ZetaKind::Constant, c_const }
    }
}

/// Built-in distribution families.
///
/// The first three are observation laws for the general split-sample t test;
/// the `*Score` variants describe the score `X = d/dtheta ln p_theta` at
/// `theta = 0` for the Studentized score test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    /// `N(0, sigma^2)`.
    Normal { sigma: f64 },
    /// Uniform on `(-width/2, width/2)`.
    Uniform { width: f64 },
    /// `xi - shape * scale` with `xi ~ gamma(shape, scale)`.
    CenteredGamma { shape: f64, scale: f64 },
    /// Score of the `N(theta, sigma^2)` location family, `X ~ N(0, 1/sigma^2)`.
    NormalScore { sigma: f64 },
    /// Score of the standard Cauchy location family, `X = sin(xi)` with `xi`
    /// uniform on `(-pi, pi)`.
    CauchyScore,
    /// Score of the `gamma(1 + theta, 1)` shape family, `X = ln(omega) - psi(1)`.
    GammaScore,
}

impl Family {
    pub fn normal(sigma: f64) -> Result<Self> {
        positive("sigma", sigma)?;
        Ok(Family::Normal { sigma })
    }

    pub fn uniform(width: f64) -> Result<Self> {
        positive("width", width)?;
        Ok(Family::Uniform { width })
    }

    pub fn centered_gamma(shape: f64, scale: f64) -> Result<Self> {
        positive("shape", shape)?;
        positive("scale", scale)?;
        Ok(Family::CenteredGamma { shape, scale })
    }

    pub fn normal_score(sigma: f64) -> Result<Self> {
        positive("sigma", sigma)?;
        Ok(Family::NormalScore { sigma })
    }

    pub fn is_score(&self) -> bool {
        matches!(self, Family::NormalScore { .. } | Family::CauchyScore | Family::GammaScore)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Family::Normal { .. } => "normal",
            Family::Uniform { .. } => "uniform",
            Family::CenteredGamma { .. } => "gamma",
            Family::NormalScore { .. } => "normal_score",
            Family::CauchyScore => "cauchy_score",
            Family::GammaScore => "gamma_score",
        }
    }

    /// Tail index of the density of `X - Y` at 0.
    pub fn tail_index(&self) -> TailIndex {
        use std::f64::consts::PI;
        match *self {
            Family::Normal { sigma } => TailIndex::regular(Some(1.0 / (2.0 * sigma * PI.sqrt()))),
            Family::NormalScore { sigma } => TailIndex::regular(Some(sigma / (2.0 * PI.sqrt()))),
            Family::Uniform { width } => TailIndex::regular(Some(1.0 / width)),
            Family::CenteredGamma { shape, scale } => {
                if shape > 0.5 {
                    // g(0) = int f^2 = Gamma(2a - 1) / (Gamma(a)^2 2^(2a-1) scale)
                    let ln_c = crate::numerics::ln_gamma_pos(2.0 * shape - 1.0)
                        - 2.0 * crate::numerics::ln_gamma_pos(shape)
                        - (2.0 * shape - 1.0) * std::f64::consts::LN_2
                        - scale.ln();
                    TailIndex::regular(Some(ln_c.exp()))
                } else if shape == 0.5 {
                    TailIndex { lambda: 0.0, zeta_kind: ZetaKind::Logarithmic, c_const: None }
                } else {
                    TailIndex { lambda: 2.0 * shape - 1.0, zeta_kind: ZetaKind::Constant, c_const: None }
                }
            }
            Family::CauchyScore => TailIndex {
                lambda: 0.0,
                zeta_kind: ZetaKind::Logarithmic,
                c_const: Some(1.0 / (PI * PI)),
            },
            Family::GammaScore => TailIndex::regular(Some(0.25)),
        }
    }

    /// Density of `X`, where it has a closed form.
    pub fn density(&self, x: f64) -> f64 {
        use std::f64::consts::PI;
        match *self {
            Family::Normal { sigma } => normal_pdf(x, sigma),
            Family::NormalScore { sigma } => normal_pdf(x, 1.0 / sigma),
            Family::Uniform { width } => {
                if x.abs() < 0.5 * width {
                    1.0 / width
                } else {
                    0.0
                }
            }
            Family::CenteredGamma { shape, scale } => {
                let xi = x + shape * scale;
                if xi <= 0.0 {
                    0.0
                } else {
                    ((shape - 1.0) * xi.ln() - xi / scale
                        - crate::numerics::ln_gamma_pos(shape)
                        - shape * scale.ln())
                    .exp()
                }
            }
            Family::CauchyScore => {
                if x.abs() < 1.0 {
                    1.0 / (PI * (1.0 - x * x).sqrt())
                } else {
                    0.0
                }
            }
            Family::GammaScore => {
                let y = x - crate::numerics::EULER_GAMMA;
                (y - y.exp()).exp()
            }
        }
    }
}

fn normal_pdf(x: f64, sd: f64) -> f64 {
    let z = x / sd;
    (-0.5 * z * z).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
}

fn positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(invalid(format!("{name} must be positive and finite, got {v}")));
    }
    Ok(())
}

/// `ln(2 sinh(x/2) / x)`, even in `x`.
fn uniform_lambda(x: f64) -> f64 {
    let x = x.abs();
    if x < 0.2 {
        let x2 = x * x;
        x2 * (1.0 / 24.0 - x2 * (1.0 / 2880.0 - x2 * (1.0 / 181_440.0 - x2 * (1.0 / 9_676_800.0 - x2 / 479_001_600.0))))
    } else {
        0.5 * x + (-(-x).exp()).ln_1p() - x.ln()
    }
}

/// `coth(x/2)/2 - 1/x`, odd in `x`.
fn uniform_d1(x: f64) -> f64 {
    let a = x.abs();
    let v = if a < 0.2 {
        let a2 = a * a;
        a * (1.0 / 12.0 - a2 * (1.0 / 720.0 - a2 * (1.0 / 30_240.0 - a2 * (1.0 / 1_209_600.0 - a2 / 47_900_160.0))))
    } else {
        0.5 / (0.5 * a).tanh() - 1.0 / a
    };
    v.copysign(x)
}

/// `1/x^2 - 1/(4 sinh^2(x/2))`.
fn uniform_d2(x: f64) -> f64 {
    let a = x.abs();
    if a < 0.2 {
        let a2 = a * a;
        1.0 / 12.0 - a2 * (1.0 / 240.0 - a2 * (1.0 / 6048.0 - a2 * (1.0 / 172_800.0 - a2 / 5_322_240.0)))
    } else {
        let s = (0.5 * a).sinh();
        1.0 / (a * a) - 0.25 / (s * s)
    }
}

/// `-ln(1 - x) - x`.
fn neg_log1m_minus_x(x: f64) -> f64 {
    if x.abs() < 1e-2 {
        let mut acc = 0.0;
        for k in (2..=12).rev() {
            acc = acc * x + 1.0 / k as f64;
        }
        acc * x * x
    } else {
        -(-x).ln_1p() - x
    }
}

impl CgfModel for Family {
    fn lambda(&self, t: f64) -> f64 {
        match *self {
            Family::Normal { sigma } => 0.5 * sigma * sigma * t * t,
            Family::NormalScore { sigma } => 0.5 * t * t / (sigma * sigma),
            Family::Uniform { width } => uniform_lambda(width * t),
            Family::CenteredGamma { shape, scale } => {
                if scale * t >= 1.0 {
                    f64::INFINITY
                } else {
                    shape * neg_log1m_minus_x(scale * t)
                }
            }
            Family::CauchyScore => bessel_i0_log(t),
            Family::GammaScore => {
                if t <= -1.0 {
                    f64::INFINITY
                } else {
                    ln_gamma_1p_plus_euler(t)
                }
            }
        }
    }

    fn d1(&self, t: f64) -> f64 {
        match *self {
            Family::Normal { sigma } => sigma * sigma * t,
            Family::NormalScore { sigma } => t / (sigma * sigma),
            Family::Uniform { width } => width * uniform_d1(width * t),
            Family::CenteredGamma { shape, scale } => {
                shape * scale * scale * t / (1.0 - scale * t)
            }
            Family::CauchyScore => bessel_i1_i0_ratio(t),
            Family::GammaScore => digamma_1p_plus_euler(t),
        }
    }

    fn d2(&self, t: f64) -> f64 {
        match *self {
            Family::Normal { sigma } => sigma * sigma,
            Family::NormalScore { sigma } => 1.0 / (sigma * sigma),
            Family::Uniform { width } => width * width * uniform_d2(width * t),
            Family::CenteredGamma { shape, scale } => {
                let v = 1.0 - scale * t;
                shape * scale * scale / (v * v)
            }
            Family::CauchyScore => {
                if t.abs() < 1e-4 {
                    0.5 - 3.0 * t * t / 16.0
                } else {
                    let r = bessel_i1_i0_ratio(t);
                    1.0 - r / t - r * r
                }
            }
            Family::GammaScore => trigamma_pos(1.0 + t),
        }
    }

    fn domain(&self) -> (f64, f64) {
        match *self {
            Family::CenteredGamma { scale, .. } => (f64::NEG_INFINITY, 1.0 / scale),
            Family::GammaScore => (-1.0, f64::INFINITY),
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    fn family_tag(&self) -> String {
        match *self {
            Family::Normal { sigma } => format!("normal(sigma={sigma})"),
            Family::Uniform { width } => format!("uniform(width={width})"),
            Family::CenteredGamma { shape, scale } => {
                format!("gamma(shape={shape}, scale={scale})")
            }
            Family::NormalScore { sigma } => format!("normal_score(sigma={sigma})"),
            Family::CauchyScore => "cauchy_score".to_string(),
            Family::GammaScore => "gamma_score".to_string(),
        }
    }
}

/// Log of the overflow budget for `t x_i` in [`empirical_cgf`].
pub const EMPIRICAL_LOG_BUDGET: f64 = 700.0;

/// Sample cumulant generating function of a re-centered sample.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCgf {
    sample: Vec<f64>,
    lo: f64,
    hi: f64,
}

/// Builds the sample CGF `ln((1/n) sum exp(t x_i))` of the re-centered sample.
///
/// The domain is the hull of the grid points (and 0) whose `max_i t x_i` stays
/// within [`EMPIRICAL_LOG_BUDGET`].
pub fn empirical_cgf(sample: &[f64], t_grid: &[f64]) -> Result<EmpiricalCgf> {
    if sample.len() < 100 {
        return Err(invalid(format!("empirical CGF needs at least 100 values, got {}", sample.len())));
    }
    if sample.iter().chain(t_grid).any(|v| !v.is_finite()) {
        return Err(invalid("sample and grid must be finite"));
    }
    let mean = sample.iter().sum::<f64>() / sample.len() as f64;
    let centered: Vec<f64> = sample.iter().map(|x| x - mean).collect();
    let xmax = centered.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let xmin = centered.iter().copied().fold(f64::INFINITY, f64::min);
    let admissible = |t: f64| (t * xmax).max(t * xmin) <= EMPIRICAL_LOG_BUDGET;
    let (mut lo, mut hi) = (0.0f64, 0.0f64);
    for &t in t_grid.iter().filter(|&&t| admissible(t)) {
        lo = lo.min(t);
        hi = hi.max(t);
    }
    Ok(EmpiricalCgf { sample: centered, lo, hi })
}

impl EmpiricalCgf {
    pub fn sample(&self) -> &[f64] {
        &self.sample
    }

    /// Log-sum-exp of `t x_i` and the tilted first two moments.
    fn tilted(&self, t: f64) -> (f64, f64, f64) {
        let m = self.sample.iter().map(|x| t * x).fold(f64::NEG_INFINITY, f64::max);
        let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
        for &x in &self.sample {
            let w = (t * x - m).exp();
            s0 += w;
            s1 += w * x;
            s2 += w * x * x;
        }
        let ln_mean = m + (s0 / self.sample.len() as f64).ln();
        (ln_mean, s1 / s0, s2 / s0)
    }
}

impl CgfModel for EmpiricalCgf {
    fn lambda(&self, t: f64) -> f64 {
        if t == 0.0 {
            return 0.0;
        }
        self.tilted(t).0
    }

    fn d1(&self, t: f64) -> f64 {
        self.tilted(t).1
    }

    fn d2(&self, t: f64) -> f64 {
        let (_, m1, m2) = self.tilted(t);
        (m2 - m1 * m1).max(0.0)
    }

    fn domain(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    fn family_tag(&self) -> String {
        format!("empirical(n={})", self.sample.len())
    }
}
