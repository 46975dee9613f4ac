//! Bracketed root finding for monotone scalar functions.

use crate::error::{invalid, Error, Result};

/// Plain bisection on a sign-changing bracket, run until the bracket is
/// narrower than `xtol` (or stops shrinking at machine resolution).
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, xtol: f64) -> Result<f64> {
    if lo.is_nan() || hi.is_nan() || lo >= hi {
        return Err(invalid(format!("bisection needs lo < hi, got [{lo}, {hi}]")));
    }
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::Internal(format!("no sign change on [{lo}, {hi}]: f = ({f_lo}, {f_hi})")));
    }
    while hi - lo > xtol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Newton's method kept inside a bracket `[lo, hi]` with `f(lo) < 0 < f(hi)`
/// for an increasing `f`; any step that leaves the bracket falls back to
/// bisection. `eval` returns `(f(x), f'(x))`.
///
/// Stops when `|f| <= ftol` or the bracket has collapsed to `xtol`.
pub fn newton_increasing<F: FnMut(f64) -> (f64, f64)>(
    mut eval: F,
    mut lo: f64,
    mut hi: f64,
    start: f64,
    ftol: f64,
    xtol: f64,
) -> Result<f64> {
    if lo.is_nan() || hi.is_nan() || lo >= hi {
        return Err(invalid(format!("bracket must satisfy lo < hi, got [{lo}, {hi}]")));
    }
    let mut x = if start > lo && start < hi { start } else { 0.5 * (lo + hi) };
    for _ in 0..400 {
        let (fx, dfx) = eval(x);
        if fx.abs() <= ftol {
            return Ok(x);
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= xtol {
            return Ok(0.5 * (lo + hi));
        }
        let step = if dfx > 0.0 { x - fx / dfx } else { f64::NAN };
        x = if step > lo && step < hi { step } else { 0.5 * (lo + hi) };
        if x <= lo || x >= hi {
            return Ok(x);
        }
    }
    Err(Error::Internal(format!("safeguarded Newton did not converge in [{lo}, {hi}]")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisect_finds_sqrt2() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-14).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn bisect_requires_sign_change() {
        assert!(bisect(|x| x * x + 1.0, -1.0, 1.0, 1e-10).is_err());
        assert!(bisect(|x| x, 1.0, -1.0, 1e-10).is_err());
    }

    #[test]
    fn newton_handles_flat_regions() {
        // tanh is nearly flat far from zero, so raw Newton would overshoot
        let r = newton_increasing(|x: f64| (x.tanh() - 0.5, 1.0 - x.tanh().powi(2)), -50.0, 50.0, 40.0, 1e-15, 1e-15)
            .unwrap();
        assert!((r - 0.5f64.atanh()).abs() < 1e-13);
    }
}
