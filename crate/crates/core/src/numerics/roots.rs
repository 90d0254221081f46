use crate::error::{invalid, Error, Result};

const MAX_DOUBLINGS: usize = 1100;

/// Solves `f(x) = target` for a strictly increasing `f` on `[0, inf)`.
///
/// The bracket is grown by doubling from `bracket_hint` and then refined with
/// Brent's bisection/secant hybrid to machine precision in `x`.
pub fn find_root_increasing<F>(f: F, target: f64, bracket_hint: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    find_root_increasing_in(f, target, bracket_hint, 0.0, f64::INFINITY)
}

/// Same as [`find_root_increasing`] on the open interval `(lower, upper)`.
///
/// The search is anchored at 0 clamped into the domain. Finite bounds are
/// approached to within a relative 1e-12 and never evaluated. Running out of
/// room below the anchor is a range error (the target lies under f's range);
/// hitting a finite upper bound is a bracket error.
pub fn find_root_increasing_in<F>(
    f: F,
    target: f64,
    bracket_hint: f64,
    lower: f64,
    upper: f64,
) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if !(bracket_hint > 0.0) || !target.is_finite() || !(lower < upper) {
        return Err(invalid(format!(
            "root search needs a positive hint, a finite target and lower < upper \
             (hint {bracket_hint}, target {target}, domain ({lower}, {upper}))"
        )));
    }
    let inner_lo = inset(lower, 1.0);
    let inner_hi = inset(upper, -1.0);
    let anchor = 0.0f64.clamp(inner_lo, inner_hi);
    let g = |x: f64| f(x) - target;
    let g_anchor = g(anchor);
    if g_anchor == 0.0 {
        return Ok(anchor);
    }
    let (mut a, mut ga, mut b, mut gb);
    if g_anchor < 0.0 {
        a = anchor;
        ga = g_anchor;
        let mut step = bracket_hint;
        let mut n = 0;
        loop {
            let mut x = anchor + step;
            let last = x >= inner_hi;
            if last {
                x = inner_hi;
            }
            let gx = g(x);
            if gx >= 0.0 {
                b = x;
                gb = gx;
                break;
            }
            if last {
                return Err(Error::Bracket { target, bound: upper });
            }
            a = x;
            ga = gx;
            step *= 2.0;
            n += 1;
            if n > MAX_DOUBLINGS || !step.is_finite() {
                return Err(Error::Range { target });
            }
        }
    } else if g_anchor > 0.0 {
        b = anchor;
        gb = g_anchor;
        let mut step = bracket_hint;
        let mut n = 0;
        loop {
            if anchor <= inner_lo {
                return Err(Error::Range { target });
            }
            let mut x = anchor - step;
            let last = x <= inner_lo;
            if last {
                x = inner_lo;
            }
            let gx = g(x);
            if gx <= 0.0 {
                a = x;
                ga = gx;
                break;
            }
            if last {
                return Err(Error::Range { target });
            }
            b = x;
            gb = gx;
            step *= 2.0;
            n += 1;
            if n > MAX_DOUBLINGS || !step.is_finite() {
                return Err(Error::Range { target });
            }
        }
    } else {
        return Err(invalid(format!("function is NaN at the anchor {anchor}")));
    }
    brent(&g, a, ga, b, gb)
}

fn inset(bound: f64, dir: f64) -> f64 {
    if bound.is_finite() {
        bound + dir * 1e-12 * bound.abs().max(1e-300)
    } else {
        bound
    }
}

/// Brent's method on a sign-changing bracket, run to machine precision.
fn brent<G: Fn(f64) -> f64>(g: &G, a0: f64, ga0: f64, b0: f64, gb0: f64) -> Result<f64> {
    let (mut a, mut fa, mut b, mut fb) = (a0, ga0, b0, gb0);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..500 {
        if (fb > 0.0) == (fc > 0.0) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 1e-300;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = g(b);
        if fb.is_nan() {
            return Err(invalid(format!("function is NaN at {b}")));
        }
    }
    Ok(b)
}

/// Golden-section maximization of a unimodal `f` on `[a, b]`.
///
/// Returns `(argmax, max)`; stops when the bracket is narrower than `x_tol`.
pub fn maximize_golden<F>(f: F, a: f64, b: f64, x_tol: f64) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64>,
{
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut lo, mut hi) = (a, b);
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while hi - lo > x_tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2)?;
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1)?;
        }
    }
    Ok(if f1 >= f2 { (x1, f1) } else { (x2, f2) })
}
