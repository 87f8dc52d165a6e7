//! Principal branch of the Lambert W function on the real line.

use std::f64::consts::E;

use crate::error::{Error, Result};

const MAX_ITERATIONS: usize = 50;
const BRANCH_POINT: f64 = -1.0 / E;

/// Returns `w >= -1` with `w * e^w = x`.
///
/// Seeds with the branch-point series near `-1/e`, `ln(1+x)` for moderate
/// arguments and the asymptotic `ln x - ln ln x` for large ones, then
/// refines with Halley's iteration.
pub fn lambert_w0(x: f64) -> Result<f64> {
    if x.is_nan() {
        return Err(Error::domain("lambert_w0 of NaN"));
    }
    if x < BRANCH_POINT {
        // Rounding of -1/e itself must not be rejected.
        if x >= BRANCH_POINT - 4.0 * f64::EPSILON {
            return Ok(-1.0);
        }
        return Err(Error::domain(format!(
            "lambert_w0 undefined for {x} < -1/e"
        )));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == f64::INFINITY {
        return Ok(f64::INFINITY);
    }

    let mut w = initial_guess(x);
    for _ in 0..MAX_ITERATIONS {
        let ew = w.exp();
        let f = w * ew - x;
        let wp1 = w + 1.0;
        if wp1.abs() < 1e-300 {
            break;
        }
        let denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        let step = f / denom;
        if !step.is_finite() {
            break;
        }
        w -= step;
        if step.abs() <= 4.0 * f64::EPSILON * (1.0 + w.abs()) {
            break;
        }
    }
    Ok(w.max(-1.0))
}

fn initial_guess(x: f64) -> f64 {
    let t = E * x + 1.0;
    if t < 0.25 {
        // w = -1 + s - s^2/3 + 11 s^3/72 - ..., s = sqrt(2(e x + 1))
        let s = (2.0 * t.max(0.0)).sqrt();
        -1.0 + s - s * s / 3.0 + 11.0 / 72.0 * s * s * s
    } else if x < 3.0 {
        (1.0 + x).ln()
    } else {
        let l1 = x.ln();
        l1 - l1.ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_points() {
        assert_eq!(lambert_w0(0.0).unwrap(), 0.0);
        assert!((lambert_w0(E).unwrap() - 1.0).abs() < 1e-15);
        assert!((lambert_w0(-1.0 / E).unwrap() + 1.0).abs() < 1e-7);
        // Omega constant.
        assert!((lambert_w0(1.0).unwrap() - 0.567_143_290_409_784).abs() < 1e-15);
    }

    #[test]
    fn below_branch_point_is_rejected() {
        assert!(lambert_w0(-0.5).is_err());
        assert!(lambert_w0(f64::NAN).is_err());
    }

    #[test]
    fn max_throughput_argument() {
        // Oracle: plain bisection on w e^w = x over [-1, 0].
        let x = -(-1.0f64).exp() / 1.1;
        let (mut lo, mut hi) = (-1.0f64, 0.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid * mid.exp() < x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let w = lambert_w0(x).unwrap();
        assert!((w - lo).abs() < 1e-12, "w = {w}, bisection = {lo}");
        assert!((w + 0.624_489_638_372_214_8).abs() < 1e-12);
    }

    #[test]
    fn residual_on_grid() {
        let start = BRANCH_POINT + 1e-6;
        for k in 0..=20_000 {
            let x = start + (10.0 - start) * k as f64 / 20_000.0;
            let w = lambert_w0(x).unwrap();
            assert!(w >= -1.0);
            let r = (w * w.exp() - x).abs();
            assert!(r <= 1e-12 * x.abs().max(1.0), "x = {x}, residual {r}");
        }
        for x in [1e3, 1e6, 1e12, 1e100, 1e300] {
            let w = lambert_w0(x).unwrap();
            let r = ((w + w.ln()) - x.ln()).abs();
            assert!(r < 1e-12 * x.ln(), "x = {x}");
        }
    }
}
