//! Explicit stationary states and invasion boundaries of the registered models.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::{ModelFamily, ModelSpec};
use crate::models::kisdi;
use crate::roots::bisect;
use crate::special::{gaussian_exponential_integral, scaled_normal_sf};

/// Example 1: net reproduction rate `x(4−x) / (1 + d)` (fertility decays like `e^{−a}`).
pub fn example1_r0(x: f64, natural_death: f64) -> f64 {
    x * (4.0 - x) / (1.0 + natural_death)
}

/// Example 1 stationary mass `(x(4−x) − (1+d)d) / (c(4−x))`, zero when not viable.
///
/// Balance requires `x(4−x)/(1 + D) = 1` with `D` the equilibrium death rate,
/// and `D = d + c(4−x)M`.
pub fn example1_mass(x: f64, competition: f64, natural_death: f64) -> f64 {
    let total_death = x * (4.0 - x) - 1.0;
    let m = (total_death - natural_death) / (competition * (4.0 - x));
    if m > 0.0 && m.is_finite() {
        m
    } else {
        0.0
    }
}

/// Example 1 equilibrium density `M̂ (x(4−x)−1) e^{−(x(4−x)−1)a}`.
pub fn example1_density(x: f64, a: f64, competition: f64, natural_death: f64) -> f64 {
    let r = x * (4.0 - x) - 1.0;
    example1_mass(x, competition, natural_death) * r * (-r * a).exp()
}

/// Age-independent fertility variant: `R₀ = x(4−x)/d`.
pub fn no_senescence_r0(x: f64, natural_death: f64) -> f64 {
    x * (4.0 - x) / natural_death
}

/// `(x(4−x) − d) / (c(4−x))`.
pub fn no_senescence_mass(x: f64, competition: f64, natural_death: f64) -> f64 {
    let m = (x * (4.0 - x) - natural_death) / (competition * (4.0 - x));
    if m > 0.0 && m.is_finite() {
        m
    } else {
        0.0
    }
}

/// Example 1 invasion boundary `f(x) = 4 − (5/4)/(4−x)`: a mutant `y` invades
/// a resident `x` iff `y` lies strictly between `x` and `f(x)`.
pub fn invasion_boundary_example1(x: f64) -> Result<f64> {
    if !(x < 4.0) {
        return Err(Error::invalid(format!("boundary undefined at x = {x}")));
    }
    Ok(4.0 - 1.25 / (4.0 - x))
}

/// Boundary `f₂(x) = 4 − (1/4)/(4−x)` of the age-independent fertility variant.
pub fn invasion_boundary_no_senescence(x: f64) -> Result<f64> {
    if !(x < 4.0) {
        return Err(Error::invalid(format!("boundary undefined at x = {x}")));
    }
    Ok(4.0 - 0.25 / (4.0 - x))
}

/// Closed-form `∂₁g(x,x)` of Example 1 with the sign as printed in the
/// literature: `(4x²−32x+59)(x²−4x−1) / (4x²(x−4)³)`.
///
/// This expression equals `−∂₁g(x,x)`, i.e. the slope of the invasion
/// probability `1 − g` in the mutant trait.
pub fn example1_gradient_printed(x: f64) -> f64 {
    (4.0 * x * x - 32.0 * x + 59.0) * (x * x - 4.0 * x - 1.0) / (4.0 * x * x * (x - 4.0).powi(3))
}

/// Example 1 singular strategy `4 − √5/2`.
pub fn example1_ess() -> f64 {
    4.0 - 5f64.sqrt() / 2.0
}

/// Endpoints `2 ± √11/2` of the Example 1 viability window.
pub fn example1_viability_window() -> (f64, f64) {
    let h = 11f64.sqrt() / 2.0;
    (2.0 - h, 2.0 + h)
}

/// Age-logistic Kisdi model: the stationary mass solves
/// `1 = x(4−x) ∫ exp(−(1+d)a − β a²/2) da`, `β = U(x,x) M`.
pub fn age_logistic_mass(x: f64, natural_death: f64, c: f64, nu: f64, k: f64) -> Result<f64> {
    let b = x * (4.0 - x);
    let c1 = 1.0 + natural_death;
    if b / c1 <= 1.0 {
        return Ok(0.0);
    }
    let u = kisdi(c, nu, k, x, x);
    let balance = |m: f64| b * gaussian_exponential_integral(c1, u * m) - 1.0;
    // balance decreases in m: find an upper bracket
    let mut hi = 1.0;
    while balance(hi) > 0.0 {
        hi *= 2.0;
        if hi > 1e15 {
            return Err(Error::Bracket("age-logistic mass".into()));
        }
    }
    bisect(balance, 0.0, hi, 1e-12 * hi)
}

/// `Ê(x) = π x²(4−x)²/2`: total competition pressure per unit age at the
/// Example 2 equilibrium.
pub fn example2_e_hat(x: f64) -> f64 {
    PI * x * x * (4.0 - x) * (4.0 - x) / 2.0
}

/// Frozen pressure on a mutant `y` in the resident `x` equilibrium:
/// `Ê(y,x) = Ê(x)(1+ν)e^{−k(y−x)}/(1+νe^{−k(y−x)})`.
pub fn example2_e_hat_pair(y: f64, x: f64, nu: f64, k: f64) -> f64 {
    let s = (-k * (y - x)).exp();
    example2_e_hat(x) * (1.0 + nu) * s / (1.0 + nu * s)
}

/// Example 2 newborn density `m̂(x,0)`.
pub fn example2_m0(x: f64, c: f64, nu: f64) -> f64 {
    let e = example2_e_hat(x);
    if e <= 0.0 {
        return 0.0;
    }
    let bracket = 0.5 + scaled_normal_sf(1.0 / e.sqrt());
    e.powf(1.5) * (1.0 + nu) / (c * nu * (2.0 * PI).sqrt() * bracket)
}

/// Example 2 stationary mass `m̂(x,0)·√(π/(2Ê))`.
pub fn example2_mass(x: f64, c: f64, nu: f64) -> f64 {
    let e = example2_e_hat(x);
    if e <= 0.0 {
        return 0.0;
    }
    example2_m0(x, c, nu) * (PI / (2.0 * e)).sqrt()
}

/// Example 2 density `m̂(x,0) e^{−Ê a²/2}`.
pub fn example2_density(x: f64, a: f64, c: f64, nu: f64) -> f64 {
    example2_m0(x, c, nu) * (-example2_e_hat(x) * a * a / 2.0).exp()
}

/// Example 2 invasion criterion:
/// `x²(4−x)²(1+ν)e^{−k(y−x)}/(1+νe^{−k(y−x)}) < y²(4−y)²`.
pub fn example2_invades(y: f64, x: f64, nu: f64, k: f64) -> bool {
    example2_e_hat_pair(y, x, nu, k) < example2_e_hat(y)
}

/// Exact `∂₁g(x,x)` for Example 2: `(π/2)[−(4−2x)/(x(4−x)) − k/(2(1+ν))]`.
pub fn example2_gradient(x: f64, nu: f64, k: f64) -> f64 {
    PI / 2.0 * (-(4.0 - 2.0 * x) / (x * (4.0 - x)) - k / (2.0 * (1.0 + nu)))
}

/// The rounded closed form `1.4(x+1.4)(x−3.2)/(x(4−x))`.
pub fn example2_gradient_rounded(x: f64) -> f64 {
    1.4 * (x + 1.4) * (x - 3.2) / (x * (4.0 - x))
}

/// Zero of [`example2_gradient`] in (0, 4).
pub fn example2_singular_point(nu: f64, k: f64) -> f64 {
    // k x(4−x)/(2(1+ν)) + 4 − 2x = 0  ⇔  κx² + (2 − 4κ)x − 4 = 0
    let kappa = k / (2.0 * (1.0 + nu));
    let (a, b, c) = (kappa, 2.0 - 4.0 * kappa, -4.0);
    (-b + (b * b - 4.0 * a * c).sqrt()) / (2.0 * a)
}

/// Explicit equilibrium `(mass, m̂(x,0))` when the model family has one.
pub fn closed_form_equilibrium(model: &ModelSpec, x: f64) -> Option<Result<(f64, f64)>> {
    match model.family {
        ModelFamily::Example1 { competition, natural_death } => {
            let m = example1_mass(x, competition, natural_death);
            Some(Ok((m, m * (x * (4.0 - x) - 1.0).max(0.0))))
        }
        ModelFamily::Example1NoSenescence { competition, natural_death } => {
            let m = no_senescence_mass(x, competition, natural_death);
            Some(Ok((m, m * x * (4.0 - x))))
        }
        ModelFamily::AgeLogisticKisdi { natural_death, c, nu, k } => {
            Some(age_logistic_mass(x, natural_death, c, nu, k).map(|m| {
                // m̂(x,0) = M / ∫ e^{−(1+d)a − βa²/2}: mass over survivorship integral
                if m == 0.0 {
                    return (0.0, 0.0);
                }
                let beta = kisdi(c, nu, k, x, x) * m;
                let surv = gaussian_exponential_integral(natural_death, beta);
                (m, m / surv)
            }))
        }
        ModelFamily::Example2 { c, nu, .. } => {
            if x <= 0.0 || x >= 4.0 {
                return Some(Ok((0.0, 0.0)));
            }
            Some(Ok((example2_mass(x, c, nu), example2_m0(x, c, nu))))
        }
        ModelFamily::Custom => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{KISDI_C, KISDI_K, KISDI_NU};
    use crate::quadrature::integrate_half_line;

    #[test]
    fn example1_reference_masses() {
        assert_eq!(example1_mass(2.0, 0.001, 0.25), 1375.0);
        assert!((example1_mass(0.552, 0.001, 0.25) - 189.47).abs() < 0.01);
        assert_eq!(example1_mass(0.2, 0.001, 0.25), 0.0);
        assert!((no_senescence_mass(2.0, 0.001, 0.25) - 1875.0).abs() < 1e-9);
    }

    #[test]
    fn boundaries_and_fixed_points() {
        let xs = example1_ess();
        assert!((invasion_boundary_example1(xs).unwrap() - xs).abs() < 1e-14);
        assert!((invasion_boundary_no_senescence(3.5).unwrap() - 3.5).abs() < 1e-14);
        for i in 0..40 {
            let x = i as f64 * 0.0975;
            let f = invasion_boundary_example1(x).unwrap();
            assert!((invasion_boundary_example1(f).unwrap() - x).abs() < 1e-12);
        }
        assert!(invasion_boundary_example1(4.0).is_err());
        assert!(example1_gradient_printed(xs).abs() < 1e-12);
        assert!((example1_gradient_printed(2.0) - 0.4296875).abs() < 1e-15);
    }

    #[test]
    fn example2_normalizing_constant() {
        for &x in &[0.5, 1.7, 3.2, 3.9] {
            let e = example2_e_hat(x);
            // Ê = U(x,x) ∫ (1+e^{−α}) m̂(x,α) dα
            let integral =
                integrate_half_line(|a| (1.0 + (-a).exp()) * example2_density(x, a, KISDI_C, KISDI_NU), 1e-14, 1e-13)
                    .unwrap();
            let u = kisdi(KISDI_C, KISDI_NU, KISDI_K, x, x);
            assert!((u * integral / e - 1.0).abs() < 1e-9, "x = {x}");
            // balance: ∫ x(4−x) e^{−Êa²/2} = 1
            let bal = x * (4.0 - x) * integrate_half_line(|a| (-e * a * a / 2.0).exp(), 1e-14, 1e-13).unwrap();
            assert!((bal - 1.0).abs() < 1e-10);
        }
        let xs = example2_singular_point(KISDI_NU, KISDI_K);
        assert!((xs - (9.0 + 521f64.sqrt()) / 10.0).abs() < 1e-12);
        assert!(example2_gradient(xs, KISDI_NU, KISDI_K).abs() < 1e-12);
        assert!(example2_gradient_rounded(3.2).abs() < 1e-15);
    }

    #[test]
    fn age_logistic_balance() {
        let m = age_logistic_mass(2.0, 0.25, KISDI_C, KISDI_NU, KISDI_K).unwrap();
        let beta = kisdi(KISDI_C, KISDI_NU, KISDI_K, 2.0, 2.0) * m;
        let v = 4.0 * integrate_half_line(|a| (-1.25 * a - beta * a * a / 2.0).exp(), 1e-14, 1e-13).unwrap();
        assert!((v - 1.0).abs() < 1e-9);
        assert_eq!(age_logistic_mass(0.2, 0.25, KISDI_C, KISDI_NU, KISDI_K).unwrap(), 0.0);
    }
}
