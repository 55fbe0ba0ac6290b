//! Evolutionarily singular points and their second-order classification.

use serde::{Deserialize, Serialize};

use super::{fitness_gradient_generic, FitnessFunction};
use crate::demography::Analyzer;
use crate::error::{Error, Result};
use crate::model::TraitValue;
use crate::roots::brent;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SingularityKind {
    /// `∂₁₁g > 0`: no nearby mutant invades.
    Ess,
    /// `∂₂₂g < ∂₁₁g < 0`: convergence stable but invadable.
    BranchingPoint,
    Other,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SingularityReport {
    pub point: f64,
    /// `∂²g/∂y²` at `(x*, x*)`.
    pub d11: f64,
    /// `∂²g/∂x²` at `(x*, x*)`.
    pub d22: f64,
    /// Taylor coefficients `½∂₁₁g`, `½∂₂₂g` of `g − 1`.
    pub taylor11: f64,
    pub taylor22: f64,
    pub kind: SingularityKind,
}

fn kind_of(d11: f64, d22: f64) -> SingularityKind {
    if d11 > 0.0 {
        SingularityKind::Ess
    } else if d11 < 0.0 && d22 < d11 {
        SingularityKind::BranchingPoint
    } else {
        SingularityKind::Other
    }
}

fn richardson(second_diff: impl Fn(f64) -> Result<f64>, h: f64) -> Result<f64> {
    let coarse = second_diff(h)?;
    let fine = second_diff(0.5 * h)?;
    Ok((4.0 * fine - coarse) / 3.0)
}

/// Classifies a singular point of an arbitrary `g(y, x)` with `g(x,x) = 1`,
/// using Richardson-extrapolated second differences with step `h`.
pub fn classify_from_g(g: impl Fn(f64, f64) -> Result<f64>, point: f64, h: f64) -> Result<SingularityReport> {
    let c = point;
    let d11 = richardson(|h| Ok((g(c + h, c)? - 2.0 + g(c - h, c)?) / (h * h)), h)?;
    let d22 = richardson(|h| Ok((g(c, c + h)? - 2.0 + g(c, c - h)?) / (h * h)), h)?;
    Ok(SingularityReport { point, d11, d22, taylor11: 0.5 * d11, taylor22: 0.5 * d22, kind: kind_of(d11, d22) })
}

/// Classifies the singular point `x*` of a model with scalar traits.
pub fn classify_singularity(an: &Analyzer, point: f64) -> Result<SingularityReport> {
    let h = 1e-3 * an.model.trait_box.range();
    let resident = an.equilibrium(&TraitValue::scalar(point))?;
    if resident.trivial {
        return Err(Error::NotViable { trait_value: vec![point], r0: an.net_reproduction_rate(&[point]) });
    }
    let g = |y: f64, x: f64| -> Result<f64> {
        if x == point {
            FitnessFunction::new(an, &[y], &resident)?.root()
        } else {
            super::g_scalar(an, y, x)
        }
    };
    classify_from_g(g, point, h)
}

/// Zeros of the fitness gradient in `[lo, hi]`, located by scanning `n`
/// subintervals for sign changes and refining with Brent's method.
pub fn find_singular_points(an: &Analyzer, lo: f64, hi: f64, n: usize, tol: f64) -> Result<Vec<f64>> {
    let grad = |x: f64| fitness_gradient_generic(an, x);
    let xs: Vec<f64> = (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect();
    let vals: Vec<Option<f64>> = xs.iter().map(|&x| grad(x).ok()).collect();
    let mut out = Vec::new();
    for i in 0..n {
        if let (Some(a), Some(b)) = (vals[i], vals[i + 1]) {
            if a == 0.0 {
                out.push(xs[i]);
            } else if a.signum() != b.signum() && b != 0.0 {
                let r = brent(|x| grad(x).unwrap_or(f64::NAN), xs[i], xs[i + 1], tol)?;
                out.push(r);
            }
        }
    }
    if let Some(Some(b)) = vals.last() {
        if *b == 0.0 {
            out.push(hi);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demography::closed_form::{example1_ess, example2_singular_point};
    use crate::models::*;

    #[test]
    fn toy_quadratic() {
        let c = 1.7;
        let g = |y: f64, x: f64| Ok(1.0 + (y - x).powi(2) - 2.0 * (y - x) * (x - c));
        let r = classify_from_g(g, c, 1e-2).unwrap();
        assert!((r.d11 - 2.0).abs() < 1e-8 && (r.d22 - 6.0).abs() < 1e-8);
        assert_eq!(r.kind, SingularityKind::Ess);
    }

    #[test]
    fn example1_is_ess() {
        let an = Analyzer::new(&build_example1()).unwrap();
        let pts = find_singular_points(&an, 0.5, 3.5, 30, 1e-12).unwrap();
        assert_eq!(pts.len(), 1);
        assert!((pts[0] - example1_ess()).abs() < 1e-9);
        assert_eq!(classify_singularity(&an, pts[0]).unwrap().kind, SingularityKind::Ess);
    }

    #[test]
    fn example2_is_branching() {
        let an = Analyzer::new(&build_example2()).unwrap();
        let x = example2_singular_point(KISDI_NU, KISDI_K);
        let r = classify_singularity(&an, x).unwrap();
        assert_eq!(r.kind, SingularityKind::BranchingPoint, "{r:?}");
        assert!((r.d11 + 0.610).abs() < 0.01, "{r:?}");
        assert!((r.d22 + 5.62).abs() < 0.05, "{r:?}");
    }
}
