//! Multiple one-sample t tests on normal means.
//!
//! For a false null with signal-noise ratio `r = mu/sigma` the supremum of the
//! noncentral-to-central t density ratio with `n` degrees of freedom is
//!
//! `L(n, r) = exp(-delta^2/2) sum_k a_{n,k} (sqrt(2) delta)^k / k!`,
//! `delta = sqrt(n + 1) r`, `a_{n,k} = Gamma((n+k+1)/2) / Gamma((n+1)/2)`.

use std::f64::consts::SQRT_2;

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::numerics::{
    find_root_increasing, gamma_p, gauss_legendre, ln_gamma_pos, ln_gamma_ratio, log_sum_series,
    SeriesPolicy,
};
use crate::pfdr::{min_n_search, LrSupCurve, PfdrTarget, PlanReport, Regime, SearchMode};

/// Largest number of atoms a parametric mixture is discretized into.
pub const MAX_MIXTURE_ATOMS: usize = 512;

/// Probability mass left outside the quantile range of a discretized mixture.
pub const MIXTURE_TAIL_MASS: f64 = 1e-10;

/// Signal-noise ratio `mu/sigma` of a false null.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SnrEffect {
    r: f64,
}

impl SnrEffect {
    pub fn new(r: f64) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(invalid(format!("signal-noise ratio must be positive and finite, got {r}")));
        }
        Ok(Self { r })
    }

    pub fn r(&self) -> f64 {
        self.r
    }
}

/// `ln L(n, r)`.
pub fn ln_lr_sup_t(n: u64, r: SnrEffect, policy: &SeriesPolicy) -> Result<f64> {
    if n < 1 {
        return Err(invalid("degrees of freedom must be at least 1"));
    }
    let nf = n as f64;
    let delta = (nf + 1.0).sqrt() * r.r;
    let ln_x = (SQRT_2 * delta).ln();
    // g = ln(a_{n,k+1} / a_{n,k}), advanced with g_{k+1} = ln((n+k+1)/2) - g_k
    let mut g = ln_gamma_ratio(0.5 * (nf + 1.0), 0.5);
    let mut lt = 0.0;
    let ln_sum = log_sum_series(
        |k| {
            if k > 0 {
                let kf = k as f64;
                lt += g + ln_x - kf.ln();
                g = (0.5 * (nf + kf)).ln() - g;
            }
            Some(lt)
        },
        policy,
    )?;
    Ok(ln_sum - 0.5 * delta * delta)
}

/// `L(n, r)`, the supremum over the statistic of the false-null to true-null
/// t density ratio.
pub fn lr_sup_t(n: u64, r: SnrEffect) -> Result<f64> {
    ln_lr_sup_t(n, r, &SeriesPolicy::default()).map(f64::exp)
}

/// Exact minimum `n` for `pFDR <= alpha` and the asymptotic `ln Q / r`.
pub fn plan_t(target: &PfdrTarget, r: SnrEffect, n_max: u64) -> Result<PlanReport> {
    let mut curve = LrSupCurve::new(move |n| lr_sup_t(n, r));
    let mut report = min_n_search(&mut curve, target, n_max, SearchMode::Bracketed)?;
    let ln_q = target.q().ln();
    report.regime = Regime::NormalT;
    report.n_asymptotic = ln_q / r.r;
    report.diag("snr", r.r).diag("ln_q", ln_q);
    Ok(report)
}

/// How an [`SnrMixture`] was obtained.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MixtureKind {
    Discrete,
    /// Discretized from a parametric law; `name` describes it.
    Parametric { name: String },
}

/// SNR mixture `G(s r)`: false-null SNRs `s r_i` with probability `w_i`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SnrMixture {
    kind: MixtureKind,
    atoms: Vec<(f64, f64)>,
    scale: f64,
}

impl SnrMixture {
    /// Discrete mixture from `(r_i, w_i)` pairs; weights must sum to 1 within 1e-12.
    pub fn discrete(atoms: Vec<(f64, f64)>, scale: f64) -> Result<Self> {
        if atoms.is_empty() {
            return Err(invalid("mixture needs at least one atom"));
        }
        if let Some(&(r, w)) = atoms.iter().find(|(r, w)| !(*r > 0.0 && r.is_finite() && *w > 0.0)) {
            return Err(invalid(format!("mixture atoms need r > 0 and w > 0, got ({r}, {w})")));
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(invalid(format!("mixture weights sum to {total}, not 1")));
        }
        Self::check_scale(scale)?;
        Ok(Self { kind: MixtureKind::Discrete, atoms, scale })
    }

    /// Discretizes a law with density `density` by Gauss–Legendre quadrature
    /// on its effective support `[lo, hi]`.
    ///
    /// Atom weights are the quadrature weights times the density, renormalized
    /// to sum to 1. Finiteness of `E exp(c r^2)` for some `c > 0` is the
    /// caller's responsibility.
    pub fn from_density<F>(
        name: &str,
        density: F,
        support: (f64, f64),
        atoms: usize,
        scale: f64,
    ) -> Result<Self>
    where
        F: Fn(f64) -> f64,
    {
        if atoms == 0 || atoms > MAX_MIXTURE_ATOMS {
            return Err(invalid(format!(
                "parametric mixtures use 1 to {MAX_MIXTURE_ATOMS} atoms, got {atoms}"
            )));
        }
        let (lo, hi) = support;
        if !(lo > 0.0 && lo < hi && hi.is_finite()) {
            return Err(invalid(format!("mixture support ({lo}, {hi}) must be a positive interval")));
        }
        Self::check_scale(scale)?;
        let (nodes, weights) = gauss_legendre(atoms);
        let half = 0.5 * (hi - lo);
        let mut out = Vec::with_capacity(atoms);
        for (x, w) in nodes.iter().zip(&weights) {
            let r = lo + half * (x + 1.0);
            let mass = w * half * density(r);
            if !(mass >= 0.0 && mass.is_finite()) {
                return Err(invalid(format!("density at {r} is {}", density(r))));
            }
            if mass > 0.0 {
                out.push((r, mass));
            }
        }
        let total: f64 = out.iter().map(|a| a.1).sum();
        if !(total > 0.0) {
            return Err(invalid("density has no mass on the support"));
        }
        for a in &mut out {
            a.1 /= total;
        }
        Ok(Self { kind: MixtureKind::Parametric { name: name.to_string() }, atoms: out, scale })
    }

    /// Gamma law with the given shape and rate (mean `shape / rate`), cut to
    /// the quantile range leaving [`MIXTURE_TAIL_MASS`] outside.
    pub fn gamma(shape: f64, rate: f64, atoms: usize, scale: f64) -> Result<Self> {
        if !(shape > 0.0 && rate > 0.0 && shape.is_finite() && rate.is_finite()) {
            return Err(invalid(format!("gamma law needs positive shape and rate, got {shape}, {rate}")));
        }
        let mean = shape / rate;
        let quantile = |u: f64| {
            find_root_increasing(|x| gamma_p(shape, rate * x).unwrap_or(f64::NAN), u, mean)
        };
        let lo = quantile(0.5 * MIXTURE_TAIL_MASS)?;
        let hi = quantile(1.0 - 0.5 * MIXTURE_TAIL_MASS)?;
        let ln_norm = shape * rate.ln() - ln_gamma_pos(shape);
        let density = |r: f64| (ln_norm + (shape - 1.0) * r.ln() - rate * r).exp();
        Self::from_density(&format!("gamma(shape={shape}, rate={rate})"), density, (lo, hi), atoms, scale)
    }

    fn check_scale(scale: f64) -> Result<()> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(invalid(format!("mixture scale must be positive, got {scale}")));
        }
        Ok(())
    }

    pub fn kind(&self) -> &MixtureKind {
        &self.kind
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// The common SNR when all atoms coincide.
    fn point_mass(&self) -> Option<f64> {
        let r0 = self.atoms[0].0;
        self.atoms.iter().all(|a| a.0 == r0).then_some(r0)
    }

    /// `ln M_G(a) = ln sum_i w_i exp(a r_i)`.
    pub fn ln_mgf(&self, a: f64) -> f64 {
        let m = self.atoms.iter().map(|&(r, w)| w.ln() + a * r).fold(f64::NEG_INFINITY, f64::max);
        m + self.atoms.iter().map(|&(r, w)| (w.ln() + a * r - m).exp()).sum::<f64>().ln()
    }
}

/// `sum_i w_i L(n, s r_i)`.
pub fn lr_sup_t_mixture(n: u64, mixture: &SnrMixture) -> Result<f64> {
    let policy = SeriesPolicy::default();
    let mut total = 0.0;
    for &(r, w) in &mixture.atoms {
        let snr = SnrEffect::new(mixture.scale * r)?;
        total += w * ln_lr_sup_t(n, snr, &policy)?.exp();
    }
    Ok(total)
}

/// Exact minimum `n` under an SNR mixture and the asymptotic `M_G^{-1}(Q) / s`.
///
/// The asymptotic size inverts the moment generating function
/// `M_G(a) = E exp(a r)`, which is the limit of the averaged likelihood-ratio
/// supremum along `n s -> a`.
pub fn plan_t_mixture(target: &PfdrTarget, mixture: &SnrMixture, n_max: u64) -> Result<PlanReport> {
    let mix = mixture.clone();
    let mut curve = LrSupCurve::new(move |n| lr_sup_t_mixture(n, &mix));
    let mut report = min_n_search(&mut curve, target, n_max, SearchMode::Bracketed)?;
    let ln_q = target.q().ln();
    let s = mixture.scale;
    let a_star = match mixture.point_mass() {
        Some(r) => {
            // same expression as plan_t at SNR s r
            report.n_asymptotic = ln_q / (s * r);
            ln_q / r
        }
        None => {
            let mean: f64 = mixture.atoms.iter().map(|&(r, w)| r * w).sum();
            let a = if ln_q <= 0.0 {
                0.0
            } else {
                find_root_increasing(|a| mixture.ln_mgf(a), ln_q, ln_q / mean)?
            };
            report.n_asymptotic = a / s;
            a
        }
    };
    report.regime = Regime::NormalTMixture;
    report
        .diag("ln_q", ln_q)
        .diag("scale", s)
        .diag("atoms", mixture.atoms.len() as f64)
        .diag("mgf_inverse_at_q", a_star)
        .diag("transform_is_mgf", 1.0);
    report.notes.push(
        "asymptotic size inverts the moment generating function E exp(a r) of the SNR law; \
         the Laplace transform E exp(-a r) never exceeds 1 and cannot reach Q"
            .to_string(),
    );
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pfdr::q_threshold;
    use statrs::function::gamma::ln_gamma;

    fn snr(r: f64) -> SnrEffect {
        SnrEffect::new(r).unwrap()
    }

    /// The density ratio at a finite statistic value `x`, summed directly with
    /// an independent log-gamma.
    fn ratio_at(n: u64, r: f64, x: f64) -> f64 {
        let nf = n as f64;
        let delta = (nf + 1.0).sqrt() * r;
        let base = ln_gamma((nf + 1.0) / 2.0);
        let ln_z = (delta * x).ln() + 0.5 * (2.0 / (nf + x * x)).ln();
        let mut sum = 0.0;
        let mut ln_fact = 0.0;
        for k in 0..5000 {
            let kf = k as f64;
            if k > 0 {
                ln_fact += kf.ln();
            }
            let lt = ln_gamma((nf + kf + 1.0) / 2.0) - base + kf * ln_z - ln_fact;
            let t = lt.exp();
            sum += t;
            if k > 10 && t < 1e-18 * sum {
                break;
            }
        }
        (-0.5 * delta * delta).exp() * sum
    }

    /// Grid-plus-golden maximization of the ratio over `x`, requiring the grid
    /// tail to have flattened.
    fn brute_force_sup(n: u64, r: f64) -> f64 {
        let grid: Vec<f64> = (0..=320).map(|i| 10f64.powf(-2.0 + i as f64 * 8.0 / 320.0)).collect();
        let vals: Vec<f64> = grid.iter().map(|&x| ratio_at(n, r, x)).collect();
        let (imax, _) = vals
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        let last = vals.len() - 1;
        let flat = (vals[last] - vals[last - 4]).abs() / vals[last];
        assert!(flat < 1e-9, "tail not flat for n={n}, r={r}: {flat:e}");
        let lo = grid[imax.saturating_sub(1)].ln();
        let hi = grid[(imax + 1).min(last)].ln();
        let (_, best) =
            crate::numerics::maximize_golden(|u| Ok(ratio_at(n, r, u.exp())), lo, hi, 1e-10).unwrap();
        best.max(vals[imax])
    }

    #[test]
    fn matches_brute_force_maximization() {
        for &n in &[1u64, 3, 8, 15, 30] {
            for &r in &[0.05, 0.2, 0.4, 0.8, 1.0] {
                let want = brute_force_sup(n, r);
                let got = lr_sup_t(n, snr(r)).unwrap();
                assert!((got / want - 1.0).abs() < 1e-6, "n={n} r={r}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn tends_to_one_as_snr_vanishes() {
        assert!((lr_sup_t(10, snr(1e-8)).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn tends_to_exp_a_along_nr_fixed() {
        for &a in &[0.5f64, 1.0, 2.0] {
            let mut last = f64::INFINITY;
            for &n in &[100u64, 1000, 10_000] {
                let l = lr_sup_t(n, snr(a / n as f64)).unwrap();
                let err = (l / a.exp() - 1.0).abs();
                assert!(err < 10.0 / n as f64, "a={a} n={n} err={err}");
                assert!(err < last);
                last = err;
            }
        }
        let l = lr_sup_t(1000, snr(1e-3)).unwrap();
        assert!((l / 1f64.exp() - 1.0).abs() < 0.01);
    }

    #[test]
    fn strictly_increasing_in_snr() {
        for &n in &[1u64, 5, 50, 500] {
            let mut last = 0.0;
            for i in 1..60 {
                let l = lr_sup_t(n, snr(i as f64 * 0.02)).unwrap();
                assert!(l > last, "n={n} i={i}");
                last = l;
            }
        }
    }

    #[test]
    fn large_arguments_stay_finite() {
        let l = ln_lr_sup_t(1_000_000, snr(0.05), &SeriesPolicy::default()).unwrap();
        assert!(l.is_finite() && l > 0.0);
    }

    #[test]
    fn plan_t_examples() {
        let t = PfdrTarget::new(0.05, 0.1).unwrap();
        let rep = plan_t(&t, snr(0.01), 10_000_000).unwrap();
        assert!((rep.n_asymptotic - 100.0 * 171f64.ln()).abs() < 1e-9);
        let n = rep.n_exact.unwrap() as f64;
        assert!((n / rep.n_asymptotic - 1.0).abs() < 0.1);

        let half = PfdrTarget::new(0.5, 0.5).unwrap();
        assert_eq!(plan_t(&half, snr(0.3), 100).unwrap().n_exact, Some(1));

        let rep = plan_t(&t, snr(1.0), 1000).unwrap();
        let q = q_threshold(&t);
        let scan = (1..).find(|&n| lr_sup_t(n, snr(1.0)).unwrap() >= q).unwrap();
        assert_eq!(rep.n_exact, Some(scan));
    }

    #[test]
    fn mixture_validation() {
        assert!(SnrMixture::discrete(vec![], 1.0).is_err());
        assert!(SnrMixture::discrete(vec![(0.1, 0.5), (0.2, 0.4)], 1.0).is_err());
        assert!(SnrMixture::discrete(vec![(-0.1, 1.0)], 1.0).is_err());
        assert!(SnrMixture::discrete(vec![(0.1, 1.0)], 0.0).is_err());
        assert!(SnrMixture::gamma(2.0, 2.0, 513, 1.0).is_err());
    }

    #[test]
    fn mixture_reduces_to_single_atoms() {
        let one = SnrMixture::discrete(vec![(0.3, 1.0)], 1.0).unwrap();
        for n in [1u64, 7, 40] {
            assert_eq!(lr_sup_t_mixture(n, &one).unwrap(), lr_sup_t(n, snr(0.3)).unwrap());
        }
        let two = SnrMixture::discrete(vec![(0.1, 0.5), (0.2, 0.5)], 1.0).unwrap();
        let want = 0.5 * (lr_sup_t(50, snr(0.1)).unwrap() + lr_sup_t(50, snr(0.2)).unwrap());
        assert!((lr_sup_t_mixture(50, &two).unwrap() / want - 1.0).abs() < 1e-14);
    }

    #[test]
    fn gamma_mixture_tends_to_its_mgf() {
        // unit-mean gamma, shape 4: E exp(r) = (1 - 1/4)^-4
        let g = SnrMixture::gamma(4.0, 4.0, 256, 1e-3).unwrap();
        let total: f64 = g.atoms().iter().map(|a| a.1).sum();
        assert!((total - 1.0).abs() < 1e-12);
        let mean: f64 = g.atoms().iter().map(|a| a.0 * a.1).sum();
        assert!((mean - 1.0).abs() < 1e-8, "{mean}");
        let want = 0.75f64.powi(-4);
        let got = lr_sup_t_mixture(1000, &g).unwrap();
        assert!((got / want - 1.0).abs() < 0.02, "{got} vs {want}");
    }

    #[test]
    fn point_mass_mixture_reproduces_plan_t() {
        let t = PfdrTarget::new(0.05, 0.1).unwrap();
        for &(r, s) in &[(1.0, 0.01), (2.0, 0.05), (1.0, 0.3)] {
            let m = SnrMixture::discrete(vec![(r, 1.0)], s).unwrap();
            let a = plan_t_mixture(&t, &m, 1_000_000).unwrap();
            let b = plan_t(&t, snr(s * r), 1_000_000).unwrap();
            assert_eq!(a.n_exact, b.n_exact);
            assert_eq!(a.n_asymptotic, b.n_asymptotic);
            assert_eq!(a.q_value, b.q_value);
        }
        let eq = SnrMixture::discrete(vec![(1.0, 0.25); 4], 0.01).unwrap();
        let rep = plan_t_mixture(&t, &eq, 1_000_000).unwrap();
        assert!((rep.n_asymptotic - 100.0 * 171f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn two_atom_mgf_inversion() {
        let t = PfdrTarget::new(0.05, 0.1).unwrap();
        let m = SnrMixture::discrete(vec![(1.0, 0.5), (2.0, 0.5)], 0.01).unwrap();
        let rep = plan_t_mixture(&t, &m, 1_000_000).unwrap();
        // bisection on 0.5 e^a + 0.5 e^{2a} = 171
        let (mut lo, mut hi) = (0.0f64, 10.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if 0.5 * mid.exp() + 0.5 * (2.0 * mid).exp() < 171.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((rep.n_asymptotic / (100.0 * lo) - 1.0).abs() < 1e-10);
        assert_eq!(rep.diagnostics["transform_is_mgf"], 1.0);
    }
}
