use crate::error::{Error, Result};

/// Brent's method on a bracket `[lo, hi]` with `f(lo)` and `f(hi)` of
/// opposite sign. Stops when the bracket is narrower than
/// `rel_tol * |x| + 4 ε |x|` or `f` vanishes.
pub fn brent<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, rel_tol: f64) -> Result<f64> {
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::Root(format!(
            "no sign change on [{lo}, {hi}]: f = ({fa:e}, {fb:e})"
        )));
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..500 {
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
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * rel_tol * b.abs().max(f64::MIN_POSITIVE);
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
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
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
        fb = f(b);
    }
    Err(Error::Root("Brent iteration limit reached".into()))
}

/// Starting from a point `lo` where `f(lo) > 0`, doubles an upper endpoint
/// from `start` until `f` turns non-positive. Returns the bracket.
pub fn expand_bracket_up<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    start: f64,
    limit: f64,
) -> Result<(f64, f64)> {
    let mut lo = lo;
    let mut hi = start;
    while f(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > limit || !hi.is_finite() {
            return Err(Error::Root(format!("no sign change found below {limit:e}")));
        }
    }
    Ok((lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_ratio() {
        let r = brent(|x| 1.0 + x - x * x, 0.0, 4.0, 1e-14).unwrap();
        assert!((r - (1.0 + 5f64.sqrt()) / 2.0).abs() < 1e-13);
    }

    #[test]
    fn no_sign_change() {
        assert!(brent(|x| x * x + 1.0, -1.0, 1.0, 1e-12).is_err());
    }

    #[test]
    fn bracket_expansion() {
        let (lo, hi) = expand_bracket_up(|x| 1000.0 - x, 0.0, 1.0, 1e18).unwrap();
        assert!(lo < 1000.0 && hi >= 1000.0);
        assert!(expand_bracket_up(|_| 1.0, 0.0, 1.0, 1e6).is_err());
    }
}
