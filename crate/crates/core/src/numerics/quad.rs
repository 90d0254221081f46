use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_SEGMENTS: usize = 4000;

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn gauss_kronrod_15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Segment {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let sum = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * sum;
        if j % 2 == 1 {
            gauss += WG[j / 2] * sum;
        }
    }
    Segment { a, b, value: kronrod * half, error: ((kronrod - gauss) * half).abs() }
}

/// Globally adaptive Gauss–Kronrod (7/15) quadrature on a finite interval.
///
/// Bisects the segment with the largest error estimate until the summed
/// estimate is below `abs_tol`.
pub fn integrate<F>(f: F, a: f64, b: f64, abs_tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Quadrature(format!("interval [{a}, {b}] is not finite")));
    }
    if a == b {
        return Ok(0.0);
    }
    let mut segments = vec![gauss_kronrod_15(&f, a, b)];
    loop {
        let total: f64 = segments.iter().map(|s| s.value).sum();
        let error: f64 = segments.iter().map(|s| s.error).sum();
        if !total.is_finite() {
            return Err(Error::Quadrature("integrand produced a non-finite value".into()));
        }
        if error <= abs_tol {
            return Ok(total);
        }
        if segments.len() >= MAX_SEGMENTS {
            return Err(Error::Quadrature(format!(
                "error estimate {error:e} above tolerance {abs_tol:e} after {MAX_SEGMENTS} segments"
            )));
        }
        let worst = segments
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let seg = segments.swap_remove(worst);
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a || mid >= seg.b {
            return Err(Error::Quadrature(format!("segment collapsed near {mid}")));
        }
        segments.push(gauss_kronrod_15(&f, seg.a, mid));
        segments.push(gauss_kronrod_15(&f, mid, seg.b));
    }
}

/// Finds `[lo, hi]` outside of which the nonnegative `f` is negligible.
///
/// Walks outward from `center` by doubling steps until `f` drops below
/// `rel_floor` times the largest value seen; fails if that needs |x| > 1e6.
pub fn effective_support<F>(f: F, center: f64, rel_floor: f64) -> Result<(f64, f64)>
where
    F: Fn(f64) -> f64,
{
    let mut peak = f(center).abs();
    for k in -40..=40 {
        peak = peak.max(f(center + k as f64 * 0.25).abs());
    }
    if !(peak > 0.0) || !peak.is_finite() {
        return Err(Error::Quadrature("density has no finite positive mass near the center".into()));
    }
    let walk = |dir: f64| -> Result<f64> {
        let mut step = 1.0;
        loop {
            let x = center + dir * step;
            // require two consecutive negligible points to step over local dips
            if f(x).abs() <= rel_floor * peak && f(center + dir * 1.5 * step).abs() <= rel_floor * peak {
                return Ok(x);
            }
            step *= 2.0;
            if step > 1e6 {
                return Err(Error::Quadrature(
                    "could not bracket the effective support of the density".into(),
                ));
            }
        }
    };
    Ok((walk(-1.0)?, walk(1.0)?))
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else if n == 1 { x } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = nf * (x * pn - pn1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_smooth_functions() {
        let v = integrate(f64::sin, 0.0, std::f64::consts::PI, 1e-13).unwrap();
        assert!((v - 2.0).abs() < 1e-13);
        let g = integrate(|x| (-x * x).exp(), -10.0, 10.0, 1e-13).unwrap();
        assert!((g - std::f64::consts::PI.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn integrable_endpoint_singularity() {
        // int_0^1 x^{-1/2} dx = 2
        let v = integrate(|x| if x > 0.0 { x.powf(-0.5) } else { 0.0 }, 0.0, 1.0, 1e-9).unwrap();
        assert!((v - 2.0).abs() < 1e-8);
    }

    #[test]
    fn support_bracketing() {
        let (lo, hi) = effective_support(|x| (-0.5 * x * x).exp(), 0.0, 1e-30).unwrap();
        assert!(lo <= -11.0 && hi >= 11.0);
        assert!(effective_support(|x| 1.0 / (1.0 + x * x), 0.0, 1e-30).is_err());
    }

    #[test]
    fn legendre_rule_is_exact_for_polynomials() {
        for n in [1usize, 2, 5, 16, 64, 512] {
            let (x, w) = gauss_legendre(n);
            let total: f64 = w.iter().sum();
            assert!((total - 2.0).abs() < 1e-12, "n = {n}");
            let deg = (2 * n - 1).min(30) as i32;
            let moment: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg - (deg % 2))).sum();
            let even = deg - (deg % 2);
            assert!((moment - 2.0 / (even as f64 + 1.0)).abs() < 1e-12, "n = {n}");
        }
    }
}
