//! Principal branch of the Lambert W function.

use std::f64::consts::E;

use crate::error::{Error, Result};

/// The branch point `-1/e`.
pub const BRANCH_POINT: f64 = -1.0 / E;

const MAX_ITER: usize = 64;

/// Principal branch `W₀(x)`, the solution `w ≥ -1` of `w·eʷ = x`.
///
/// Uses a branch-point series or logarithmic initial guess refined with
/// Halley's iteration.
pub fn lambert_w0(x: f64) -> Result<f64> {
    if x.is_nan() {
        return Err(Error::NonFinite("lambert_w0 argument".into()));
    }
    if x < BRANCH_POINT {
        // Arguments that only miss the branch point through rounding.
        if x >= BRANCH_POINT * (1.0 + 4.0 * f64::EPSILON) {
            return Ok(-1.0);
        }
        return Err(Error::LambertDomain(x));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == f64::INFINITY {
        return Ok(f64::INFINITY);
    }

    let mut w = initial_guess(x);
    for _ in 0..MAX_ITER {
        let ew = w.exp();
        let f = w * ew - x;
        let wp1 = w + 1.0;
        if wp1.abs() < 1e-300 {
            break;
        }
        let denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        if denom == 0.0 || !denom.is_finite() {
            break;
        }
        let step = f / denom;
        let next = w - step;
        // Stay on the principal branch.
        let next = if next < -1.0 { (w - 1.0) / 2.0 } else { next };
        if (next - w).abs() <= 4.0 * f64::EPSILON * (1.0 + next.abs()) {
            w = next;
            break;
        }
        w = next;
    }
    Ok(w)
}

/// `W₀'(x) = W / (x (1 + W))`, with `W₀'(0) = 1`. Infinite at the branch point.
pub fn lambert_w0_derivative(x: f64) -> Result<f64> {
    let w = lambert_w0(x)?;
    if x == 0.0 {
        return Ok(1.0);
    }
    if w == -1.0 {
        return Ok(f64::INFINITY);
    }
    Ok(w / (x * (1.0 + w)))
}

fn initial_guess(x: f64) -> f64 {
    if x < -0.25 {
        // Series in p = sqrt(2(ex + 1)) around the branch point.
        let p = (2.0 * (E * x + 1.0)).max(0.0).sqrt();
        -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p
    } else if x < 3.0 {
        // ln(1 + x) has the right slope at 0 and stays within the basin of
        // Halley's method up to moderate arguments.
        (1.0 + x).ln() * 0.8
    } else {
        let l1 = x.ln();
        let l2 = l1.ln();
        l1 - l2 + l2 / l1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_points() {
        assert_eq!(lambert_w0(0.0).unwrap(), 0.0);
        assert!((lambert_w0(E).unwrap() - 1.0).abs() < 1e-15);
        assert!((lambert_w0(BRANCH_POINT).unwrap() + 1.0).abs() < 1e-7);
        // 2 e^2 -> 2
        assert!((lambert_w0(2.0 * E * E).unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn below_branch_point_is_rejected() {
        assert!(matches!(
            lambert_w0(-0.4),
            Err(Error::LambertDomain(_))
        ));
    }

    #[test]
    fn omega_constant() {
        // W(1) is the omega constant.
        let w = lambert_w0(1.0).unwrap();
        assert!((w - 0.567_143_290_409_783_8).abs() < 1e-15);
    }

    #[test]
    fn derivative_matches_finite_difference() {
        for &x in &[-0.3, -0.1, 0.0, 0.5, 2.0, 10.0] {
            let h = 1e-6;
            let fd = (lambert_w0(x + h).unwrap() - lambert_w0(x - h).unwrap()) / (2.0 * h);
            let d = lambert_w0_derivative(x).unwrap();
            assert!((fd - d).abs() < 1e-6 * d.abs().max(1.0), "x={x} fd={fd} d={d}");
        }
    }

    #[test]
    fn large_and_tiny_arguments() {
        for &x in &[1e-300, 1e-12, -1e-12, 1e6, 1e100, 1e300] {
            let w = lambert_w0(x).unwrap();
            let back = w * w.exp();
            assert!(((back - x) / x).abs() < 1e-13, "x={x} w={w} back={back}");
        }
    }
}
