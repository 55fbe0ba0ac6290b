//! Standard Gaussian distribution function and friends.
//!
//! The tail function is evaluated through `erfc` directly so that
//! `1 - Φ(t)` keeps full relative precision for large `t`.

use libm::erfc;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// Standard normal density.
pub fn normal_pdf(t: f64) -> f64 {
    (-0.5 * t * t).exp() / (2.0 * PI).sqrt()
}

/// Φ(t).
pub fn normal_cdf(t: f64) -> f64 {
    0.5 * erfc(-t * FRAC_1_SQRT_2)
}

/// 1 − Φ(t), accurate in the upper tail.
pub fn normal_sf(t: f64) -> f64 {
    0.5 * erfc(t * FRAC_1_SQRT_2)
}

/// `e^{t²/2} (1 − Φ(t))`, the scaled Gaussian tail (Mills ratio times φ·√2π).
///
/// For large `t` the product `e^{t²/2}·erfc` underflows/overflows separately,
/// so the continued-fraction form of the Mills ratio takes over.
pub fn scaled_normal_sf(t: f64) -> f64 {
    if t < 20.0 {
        (0.5 * t * t).exp() * normal_sf(t)
    } else {
        // Mills ratio R(t) = (1-Φ)/φ via Laplace continued fraction
        let mut frac = t;
        for k in (1..=60).rev() {
            frac = t + k as f64 / frac;
        }
        1.0 / (frac * (2.0 * PI).sqrt())
    }
}

/// ∫₀^∞ exp(−c·a − β a²/2) da for β ≥ 0 and real c (infinite when
/// β = 0 and c ≤ 0).
pub fn gaussian_exponential_integral(c: f64, beta: f64) -> f64 {
    assert!(beta >= 0.0);
    if beta == 0.0 {
        return if c > 0.0 { 1.0 / c } else { f64::INFINITY };
    }
    let s = beta.sqrt();
    (2.0 * PI / beta).sqrt() * scaled_normal_sf(c / s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_reference_values() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-16);
        assert!((normal_cdf(1.0) - 0.841_344_746_068_542_9).abs() < 1e-15);
        assert!((normal_cdf(-2.5) - 0.006_209_665_325_776_132).abs() < 1e-16);
        // far tail keeps relative precision
        let t = normal_sf(8.0);
        assert!((t / 6.220_960_574_271_784e-16 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn scaled_tail_is_continuous_across_switch() {
        let a = (0.5f64 * 19.999 * 19.999).exp() * normal_sf(19.999);
        let b = scaled_normal_sf(20.001);
        assert!((a / b - 1.0).abs() < 1e-3);
        // large-argument asymptotics: e^{t²/2}(1-Φ) ≈ 1/(t√2π)
        let t = 1e4;
        assert!((scaled_normal_sf(t) * t * (2.0 * PI).sqrt() - 1.0).abs() < 1e-7);
    }

    #[test]
    fn gaussian_integral_matches_simpson() {
        let (c, beta) = (1.25, 0.7);
        let n = 200_000;
        let h = 40.0 / n as f64;
        let f = |a: f64| (-c * a - 0.5 * beta * a * a).exp();
        let mut s = f(0.0) + f(40.0);
        for i in 1..n {
            s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s *= h / 3.0;
        assert!((gaussian_exponential_integral(c, beta) - s).abs() < 1e-12);
    }
}
