//! Linear stability of the Example 2 equilibria: zeros of the eigenvalue
//! function `Λ(λ, x)` in the closed right half-plane, counted by the
//! argument principle along a Jordan contour.
//!
//! With `ĝ(a) = e^{−Êa²/2}`, `J(λ) = ∫ĝ(1 − e^{−λa})` and `U = Cν/(1+ν)`,
//!
//! ```text
//! Λ(λ,x) = U m̂(x,0) ∫ (1+e^{−a}) ĝ(a) (−a + 1/λ − e^{−λa}/(Ê J(λ))) da − λ.
//! ```

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::demography::closed_form::{example2_e_hat, example2_m0};
use crate::error::{Error, Result};
use crate::model::{ModelFamily, ModelSpec};
use crate::quadrature::gauss_legendre;

/// Gaussian-weight truncation: `Êa²/2` at the cut-off.
const TAIL_EXPONENT: f64 = 45.0;

/// The eigenvalue function of one Example 2 equilibrium.
#[derive(Clone, Debug)]
pub struct Linearization {
    pub x: f64,
    pub e_hat: f64,
    pub m0: f64,
    pub u_xx: f64,
    a_cut: f64,
    /// `∫(1+e^{−a})ĝ` and `∫(1+e^{−a}) a ĝ`.
    g1: f64,
    ga1: f64,
    /// `∫ĝ`.
    g0: f64,
    gl: (Vec<f64>, Vec<f64>),
}

impl Linearization {
    pub fn new(model: &ModelSpec, x: f64) -> Result<Self> {
        let ModelFamily::Example2 { c, nu, .. } = model.family else {
            return Err(Error::invalid("the eigenvalue function is derived for Example 2 only"));
        };
        if !(x > 0.0 && x < 4.0) {
            return Err(Error::invalid(format!("trait {x} outside (0, 4)")));
        }
        let e_hat = example2_e_hat(x);
        let m0 = example2_m0(x, c, nu);
        let a_cut = (2.0 * TAIL_EXPONENT / e_hat).sqrt();
        let mut lin = Linearization {
            x,
            e_hat,
            m0,
            u_xx: c * nu / (1.0 + nu),
            a_cut,
            g1: 0.0,
            ga1: 0.0,
            g0: 0.0,
            gl: gauss_legendre(16),
        };
        let (mut g0, mut g1, mut ga1) = (0.0, 0.0, 0.0);
        lin.for_each_node(0.5, |a, w| {
            let g = (-0.5 * e_hat * a * a).exp();
            g0 += w * g;
            g1 += w * (1.0 + (-a).exp()) * g;
            ga1 += w * (1.0 + (-a).exp()) * a * g;
        });
        lin.g0 = g0;
        lin.g1 = g1;
        lin.ga1 = ga1;
        Ok(lin)
    }

    fn for_each_node(&self, width: f64, mut f: impl FnMut(f64, f64)) {
        let panels = (self.a_cut / width).ceil().max(1.0) as usize;
        let h = self.a_cut / panels as f64;
        let (t, w) = &self.gl;
        for p in 0..panels {
            let a0 = p as f64 * h;
            for k in 0..t.len() {
                f(a0 + 0.5 * h * (t[k] + 1.0), 0.5 * h * w[k]);
            }
        }
    }

    /// `∫₀^∞ e^{−Êa²/2 − λa} da` for `Re λ ≥ 0`.
    fn laplace(&self, lambda: Complex64) -> Complex64 {
        let width = (1.0 / (1.0 + lambda.norm())).min(0.5);
        let mut s = Complex64::new(0.0, 0.0);
        let e = self.e_hat;
        self.for_each_node(width, |a, w| {
            s += w * (-(0.5 * e * a * a) - lambda * a).exp();
        });
        s
    }

    /// Upper bound on the neglected tail of the age integrals.
    pub fn tail_bound(&self) -> f64 {
        let a = self.a_cut;
        // ∫_A^∞ (2 + a) e^{−Êa²/2} ≤ (2/(ÊA) + 1/Ê) e^{−ÊA²/2}
        (2.0 / (self.e_hat * a) + 1.0 / self.e_hat) * (-0.5 * self.e_hat * a * a).exp()
    }

    /// `Λ(λ, x)`; requires `λ ≠ 0` and `Re λ ≥ 0`.
    pub fn eval(&self, lambda: Complex64) -> Result<Complex64> {
        if lambda.norm() == 0.0 {
            return Err(Error::invalid("Λ is singular at λ = 0"));
        }
        if lambda.re < -1e-12 {
            return Err(Error::invalid("Λ is evaluated in the closed right half-plane only"));
        }
        let tail = self.tail_bound() * (1.0 + 1.0 / lambda.norm());
        if tail > 1e-10 * (1.0 + lambda.norm()) {
            return Err(Error::Tail(format!("age-integral tail bound {tail:e} too large")));
        }
        let l0 = self.laplace(lambda);
        let l1 = self.laplace(lambda + 1.0);
        let j = Complex64::new(self.g0, 0.0) - l0;
        let integral = -self.ga1 + self.g1 / lambda - (l0 + l1) / (self.e_hat * j);
        Ok(self.u_xx * self.m0 * integral - lambda)
    }

    /// The `λ = 0` eigenvalue condition reduces to this quantity vanishing;
    /// it is strictly positive (per unit perturbation `E`).
    pub fn zero_eigenvalue_residual(&self) -> f64 {
        let mut s = 0.0;
        let e = self.e_hat;
        self.for_each_node(0.5, |a, w| s += w * 0.5 * a * a * (-0.5 * e * a * a).exp());
        self.m0 * self.x * (4.0 - self.x) * s
    }
}

/// Closed curve made of straight and circular pieces, traversed once.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct JordanContour {
    pub segments: Vec<Segment>,
    /// Initial samples per segment before adaptive refinement.
    pub samples_per_segment: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum Segment {
    Line { from: (f64, f64), to: (f64, f64) },
    /// Arc of the circle `|λ − centre| = radius` from angle `start` to `end`.
    Arc { centre: (f64, f64), radius: f64, start: f64, end: f64 },
}

impl Segment {
    pub fn point(&self, s: f64) -> Complex64 {
        match *self {
            Segment::Line { from, to } => Complex64::new(from.0 + s * (to.0 - from.0), from.1 + s * (to.1 - from.1)),
            Segment::Arc { centre, radius, start, end } => {
                Complex64::new(centre.0, centre.1) + Complex64::from_polar(radius, start + s * (end - start))
            }
        }
    }
}

impl JordanContour {
    /// Positively oriented boundary of `[0, r] × [−h, h]` whose left edge
    /// bypasses the origin along a right half-circle of radius `delta`.
    pub fn indented_rectangle(r: f64, h: f64, delta: f64, samples_per_segment: usize) -> Result<Self> {
        if !(delta > 0.0 && delta < h && delta < r) {
            return Err(Error::Contour(format!("invalid rectangle r = {r}, h = {h}, delta = {delta}")));
        }
        use std::f64::consts::FRAC_PI_2;
        Ok(JordanContour {
            segments: vec![
                Segment::Line { from: (0.0, -h), to: (r, -h) },
                Segment::Line { from: (r, -h), to: (r, h) },
                Segment::Line { from: (r, h), to: (0.0, h) },
                Segment::Line { from: (0.0, h), to: (0.0, delta) },
                Segment::Arc { centre: (0.0, 0.0), radius: delta, start: FRAC_PI_2, end: -FRAC_PI_2 },
                Segment::Line { from: (0.0, -delta), to: (0.0, -h) },
            ],
            samples_per_segment,
        })
    }

    /// Positively oriented circle.
    pub fn circle(centre: (f64, f64), radius: f64, samples: usize) -> Self {
        JordanContour {
            segments: vec![Segment::Arc { centre, radius, start: 0.0, end: std::f64::consts::TAU }],
            samples_per_segment: samples,
        }
    }
}

impl Default for JordanContour {
    fn default() -> Self {
        JordanContour::indented_rectangle(50.0, 50.0, 1e-3, 400).expect("valid default contour")
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WindingReport {
    pub x: Option<f64>,
    pub winding: i64,
    /// Total argument change divided by 2π before rounding.
    pub raw: f64,
    pub min_abs: f64,
    /// Largest argument step between consecutive samples.
    pub max_phase_step: f64,
    pub samples: usize,
}

impl WindingReport {
    pub fn verdict(&self) -> &'static str {
        if self.winding == 0 {
            "asymptotically-stable"
        } else {
            "unstable"
        }
    }
}

/// Winding number of `f(Γ)` about 0, tracking the argument continuously and
/// bisecting any contour step whose phase change reaches π/2.
pub fn winding_number(f: impl Fn(Complex64) -> Result<Complex64>, contour: &JordanContour) -> Result<WindingReport> {
    const MAX_DEPTH: u32 = 30;
    let mut total = 0.0;
    let mut min_abs = f64::INFINITY;
    let mut max_step: f64 = 0.0;
    let mut samples = 0usize;
    let n = contour.samples_per_segment.max(2);
    for seg in &contour.segments {
        let mut s0 = 0.0;
        let mut v0 = f(seg.point(0.0))?;
        samples += 1;
        min_abs = min_abs.min(v0.norm());
        for i in 1..=n {
            let s1 = i as f64 / n as f64;
            // refine [s0, s1] with an explicit stack
            let mut stack = vec![(s1, f(seg.point(s1))?, 0u32)];
            samples += 1;
            while let Some(&(s_hi, v_hi, depth)) = stack.last() {
                let step = (v_hi / v0).arg();
                if step.abs() >= std::f64::consts::FRAC_PI_2 {
                    if depth >= MAX_DEPTH {
                        return Err(Error::Contour(format!(
                            "phase step {step:.3} persists after refinement near λ = {}; a zero may lie on the contour",
                            seg.point(s_hi)
                        )));
                    }
                    let sm = 0.5 * (s0 + s_hi);
                    let vm = f(seg.point(sm))?;
                    samples += 1;
                    stack.push((sm, vm, depth + 1));
                    continue;
                }
                stack.pop();
                total += step;
                max_step = max_step.max(step.abs());
                min_abs = min_abs.min(v_hi.norm());
                s0 = s_hi;
                v0 = v_hi;
            }
        }
    }
    if !(min_abs > 0.0) {
        return Err(Error::Contour("the function vanishes on the contour".into()));
    }
    let raw = total / std::f64::consts::TAU;
    let winding = raw.round();
    if (raw - winding).abs() > 0.1 {
        return Err(Error::Contour(format!("argument change {raw} is not close to an integer")));
    }
    Ok(WindingReport { x: None, winding: winding as i64, raw, min_abs, max_phase_step: max_step, samples })
}

/// Number of eigenvalues of the Example 2 linearization at `x` inside the contour.
pub fn stability_winding(model: &ModelSpec, x: f64, contour: &JordanContour) -> Result<WindingReport> {
    let lin = Linearization::new(model, x)?;
    let mut r = winding_number(|l| lin.eval(l), contour)?;
    r.x = Some(x);
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::build_example2;

    #[test]
    fn synthetic_oracles() {
        let c = JordanContour::default();
        let l0 = Complex64::new(3.0, -2.0);
        for m in 1..=3 {
            let r = winding_number(|l| Ok((l - l0).powi(m)), &c).unwrap();
            assert_eq!(r.winding, m as i64);
        }
        let r = winding_number(|l| Ok(l + 1.0), &c).unwrap();
        assert_eq!(r.winding, 0);
        let circle = JordanContour::circle((0.0, 0.0), 1.0, 16);
        assert_eq!(winding_number(|l| Ok(l.powi(5)), &circle).unwrap().winding, 5);
    }

    #[test]
    fn conjugate_symmetry_and_real_axis() {
        let lin = Linearization::new(&build_example2(), 2.0).unwrap();
        let l = Complex64::new(0.7, 3.1);
        let a = lin.eval(l).unwrap();
        let b = lin.eval(l.conj()).unwrap();
        assert!((a - b.conj()).norm() < 1e-10 * a.norm());
        let r = lin.eval(Complex64::new(1.3, 0.0)).unwrap();
        assert!(r.im.abs() < 1e-12 && r.re < 0.0);
        assert!(lin.zero_eigenvalue_residual() > 0.0);
    }

    #[test]
    fn equilibria_are_stable() {
        let m = build_example2();
        let c = JordanContour::indented_rectangle(50.0, 50.0, 1e-3, 200).unwrap();
        for &x in &[0.5, 2.0, 3.2] {
            assert_eq!(stability_winding(&m, x, &c).unwrap().winding, 0);
        }
    }
}
