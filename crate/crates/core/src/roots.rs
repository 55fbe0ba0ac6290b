//! Scalar root finding: bisection and Brent's method on a sign-changing bracket.

use crate::error::{Error, Result};

/// Bisection on `[lo, hi]`, requiring a sign change. Stops when the bracket
/// is narrower than `tol`.
pub fn bisect(mut f: impl FnMut(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() || flo.is_nan() || fhi.is_nan() {
        return Err(Error::Bracket(format!("f({lo}) = {flo}, f({hi}) = {fhi}")));
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= tol || mid == lo || mid == hi {
            return Ok(mid);
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Brent's method. `tol` is an absolute tolerance on the abscissa.
pub fn brent(mut f: impl FnMut(f64) -> f64, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() || fa.is_nan() || fb.is_nan() {
        return Err(Error::Bracket(format!("f({a}) = {fa}, f({b}) = {fb}")));
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..300 {
        if fb.signum() == fc.signum() {
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
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            if 2.0 * p < (3.0 * xm * q - (tol1 * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b);
    }
    Err(Error::NoConvergence { iterations: 300, residual: fb.abs() })
}

/// Expands `hi` geometrically from `lo` until `f` changes sign, for
/// functions known to be increasing with `f(lo) < 0`.
pub fn bracket_upward(
    mut f: impl FnMut(f64) -> f64,
    lo: f64,
    mut hi: f64,
    limit: f64,
) -> Result<(f64, f64)> {
    let mut last = lo;
    while hi <= limit {
        let v = f(hi);
        if v >= 0.0 {
            return Ok((last, hi));
        }
        last = hi;
        hi = lo + 2.0 * (hi - lo);
    }
    Err(Error::Bracket(format!("no sign change found up to {limit}")))
}

/// Newton's method safeguarded by a sign-changing bracket `[lo, hi]` of an
/// increasing function. `f` returns `(value, derivative)`; falls back to
/// bisection whenever the Newton step leaves the bracket.
pub fn newton_bracketed(
    mut f: impl FnMut(f64) -> (f64, f64),
    mut lo: f64,
    mut hi: f64,
    tol: f64,
) -> Result<f64> {
    let mut x = 0.5 * (lo + hi);
    let mut last_step = f64::INFINITY;
    for _ in 0..200 {
        let (v, d) = f(x);
        if v == 0.0 {
            return Ok(x);
        }
        if v.is_nan() {
            return Err(Error::NonFinite(format!("function value at {x}")));
        }
        if v < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - v / d;
        // Newton steps that fail to halve are slow (e.g. multiple roots): bisect
        let next = if d > 0.0 && newton.is_finite() && newton > lo && newton < hi && (newton - x).abs() < 0.5 * last_step {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - x).abs() <= tol || hi - lo <= tol {
            return Ok(next);
        }
        last_step = (next - x).abs();
        x = next;
    }
    Err(Error::NoConvergence { iterations: 200, residual: hi - lo })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_sqrt_two() {
        let r = brent(|x| x * x - 2.0, 0.0, 2.0, 1e-14).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-13);
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-14).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn newton_with_bracket() {
        let r = newton_bracketed(|x| (x.exp() - 3.0, x.exp()), -10.0, 10.0, 1e-15).unwrap();
        assert!((r - 3f64.ln()).abs() < 1e-14);
        // a function with a nearly flat region still converges via bisection
        let r = newton_bracketed(|x| (x.powi(9), 9.0 * x.powi(8)), -1.0, 3.0, 1e-13).unwrap();
        assert!(r.abs() < 1e-1);
    }

    #[test]
    fn rejects_missing_bracket() {
        assert!(brent(|x| x * x + 1.0, -1.0, 1.0, 1e-10).is_err());
    }

    #[test]
    fn upward_bracket() {
        let (a, b) = bracket_upward(|x| x - 37.0, 0.0, 1.0, 1e6).unwrap();
        assert!(a < 37.0 && b >= 37.0);
    }
}
