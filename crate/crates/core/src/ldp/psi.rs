use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::numerics::{find_root_increasing_in, integrate};

use super::cgf::Family;

/// `Psi(t) = ln E exp(t (X - Y)^2 / 2)` for iid `X, Y`.
///
/// Closed form for the normal family; quadrature over the triangular density
/// of `X - Y` for the uniform family. Other families have no tractable density
/// of `X - Y` and are rejected.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PsiModel {
    family: Family,
    sigma2: f64,
}

impl PsiModel {
    pub fn new(family: Family) -> Result<Self> {
        let sigma2 = match family {
            Family::Normal { sigma } => sigma * sigma,
            Family::Uniform { width } => width * width / 12.0,
            other => {
                return Err(Error::UnsupportedFamily(format!(
                    "Psi needs a closed-form density of X - Y; {} has none",
                    other.name()
                )))
            }
        };
        Ok(Self { family, sigma2 })
    }

    /// `Var X = Psi'(0)`.
    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    /// `sup` of the domain of `Psi`.
    pub fn domain_sup(&self) -> f64 {
        match self.family {
            Family::Normal { .. } => 0.5 / self.sigma2,
            _ => f64::INFINITY,
        }
    }

    /// `Psi'(t)`.
    pub fn d1(&self, t: f64) -> Result<f64> {
        match self.family {
            Family::Normal { .. } => {
                self.check_domain(t)?;
                Ok(self.sigma2 / (1.0 - 2.0 * self.sigma2 * t))
            }
            Family::Uniform { width } => {
                let (_, m1) = uniform_moments(width, t)?;
                Ok(m1)
            }
            _ => unreachable!("constructor admits normal and uniform only"),
        }
    }

    fn check_domain(&self, t: f64) -> Result<()> {
        if !(t < self.domain_sup()) || t.is_nan() {
            return Err(Error::Domain { name: "t", value: t });
        }
        Ok(())
    }
}

/// Log of `E exp(t D^2/2)` and the tilted mean of `D^2/2`, for `D` with the
/// triangular density `(w - |v|)/w^2` on `(-w, w)`.
fn uniform_moments(w: f64, t: f64) -> Result<(f64, f64)> {
    if !t.is_finite() {
        return Err(Error::Domain { name: "t", value: t });
    }
    // factor out the largest exponent, and shrink the range where the weight is negligible
    let (shift, upper) = if t > 0.0 {
        (0.5 * t * w * w, w)
    } else if t < 0.0 {
        (0.0, w.min(12.0 / (-t).sqrt()))
    } else {
        (0.0, w)
    };
    let weight = |v: f64| (0.5 * t * v * v - shift).exp() * (w - v) / (w * w);
    let m0 = 2.0 * integrate_rel(weight, upper)?;
    let m1 = 2.0 * integrate_rel(|v| 0.5 * v * v * weight(v), upper)?;
    Ok((shift + m0.ln(), m1 / m0))
}

/// Integral over `[0, b]` to a relative 1e-14 of a crude first estimate.
fn integrate_rel<F: Fn(f64) -> f64>(f: F, b: f64) -> Result<f64> {
    let crude = integrate(&f, 0.0, b, f64::INFINITY)?;
    integrate(&f, 0.0, b, 1e-14 * crude.abs())
}

/// `Psi(t)`.
pub fn psi_eval(model: &PsiModel, t: f64) -> Result<f64> {
    match model.family {
        Family::Normal { .. } => {
            model.check_domain(t)?;
            Ok(-0.5 * (-2.0 * model.sigma2 * t).ln_1p())
        }
        Family::Uniform { width } => {
            if t == 0.0 {
                return Ok(0.0);
            }
            Ok(uniform_moments(width, t)?.0)
        }
        _ => unreachable!("constructor admits normal and uniform only"),
    }
}

/// `eta_Psi(u)`, the inverse of `Psi'`, for `u` in `(0, sigma^2)`.
pub fn eta_psi(model: &PsiModel, u: f64) -> Result<f64> {
    if !(u > 0.0 && u < model.sigma2) {
        return Err(invalid(format!(
            "eta_Psi needs u in (0, sigma^2 = {}), got {u}",
            model.sigma2
        )));
    }
    match model.family {
        Family::Normal { .. } => Ok((1.0 - model.sigma2 / u) / (2.0 * model.sigma2)),
        _ => {
            let scale = 1.0 / model.sigma2;
            find_root_increasing_in(
                |t| model.d1(t).unwrap_or(f64::NAN),
                u,
                scale,
                f64::NEG_INFINITY,
                model.domain_sup(),
            )
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_examples() {
        let m = PsiModel::new(Family::Normal { sigma: 1.0 }).unwrap();
        assert!((psi_eval(&m, -1.0).unwrap() + 0.5 * 3f64.ln()).abs() < 1e-15);
        assert_eq!(psi_eval(&m, 0.0).unwrap(), 0.0);
        assert!(psi_eval(&m, 0.5).is_err());
        let v = 1e-3 * eta_psi(&m, 1e-3).unwrap();
        assert!((v + 0.5).abs() < 0.025);
    }

    #[test]
    fn small_u_limit_is_approached_monotonically() {
        for &sigma in &[1.0, 0.3] {
            let m = PsiModel::new(Family::Normal { sigma }).unwrap();
            let mut last = f64::INFINITY;
            for &u in &[1e-2, 1e-3, 1e-4] {
                let u = u * sigma * sigma;
                let err = (u * eta_psi(&m, u).unwrap() + 0.5).abs();
                assert!(err < last);
                last = err;
            }
        }
    }

    #[test]
    fn uniform_quadrature_matches_series_and_derivative() {
        let w = 1.0;
        let m = PsiModel::new(Family::Uniform { width: w }).unwrap();
        assert!((m.sigma2() - 1.0 / 12.0).abs() < 1e-16);
        assert!((m.d1(0.0).unwrap() - 1.0 / 12.0).abs() < 1e-13);
        // near 0, Psi(t) ~ sigma^2 t
        let t = 1e-4;
        assert!((psi_eval(&m, t).unwrap() / (t / 12.0) - 1.0).abs() < 1e-4);
        for &t in &[-50.0f64, -2.0, 0.7, 30.0] {
            let h = 1e-5 * (1.0f64).max(t.abs());
            let fd = (psi_eval(&m, t + h).unwrap() - psi_eval(&m, t - h).unwrap()) / (2.0 * h);
            assert!((fd - m.d1(t).unwrap()).abs() < 1e-7, "t={t}");
        }
        // Psi is strictly increasing
        let mut last = f64::NEG_INFINITY;
        for i in -20..20 {
            let v = psi_eval(&m, i as f64).unwrap();
            assert!(v > last);
            last = v;
        }
    }

    #[test]
    fn uniform_eta_inverts_the_derivative() {
        let m = PsiModel::new(Family::Uniform { width: 2.0 }).unwrap();
        for &u in &[1e-3, 0.05, 0.2, 0.3] {
            let eta = eta_psi(&m, u).unwrap();
            assert!((m.d1(eta).unwrap() / u - 1.0).abs() < 1e-9);
            assert!(eta < 0.0);
        }
        // u eta_Psi(u) -> -1/2 for a density bounded away from 0 at the origin
        let v = 1e-4 * eta_psi(&m, 1e-4).unwrap();
        assert!((v + 0.5).abs() < 0.05, "{v}");
    }

    #[test]
    fn other_families_are_rejected() {
        for f in [Family::CauchyScore, Family::GammaScore, Family::CenteredGamma { shape: 1.0, scale: 1.0 }] {
            assert!(matches!(PsiModel::new(f), Err(Error::UnsupportedFamily(_))));
        }
        let m = PsiModel::new(Family::Normal { sigma: 1.0 }).unwrap();
        assert!(eta_psi(&m, 1.0).is_err());
        assert!(eta_psi(&m, 0.0).is_err());
    }
}
