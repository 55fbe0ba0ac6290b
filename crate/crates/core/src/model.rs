//! Trait/age domain types and the model specification: rates, interaction,
//! mutation kernel and the rate bounds used by the exact simulators.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::quadrature::AgeQuadrature;
use crate::special::{normal_cdf, normal_pdf};

/// A rate depending on (trait, age).
pub type TraitAgeFn = Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;
/// A function of age alone.
pub type AgeFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
/// A function of (focal trait, competitor trait).
pub type TraitPairFn = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;
/// U((x,a),(y,α)).
pub type InteractionFn = Arc<dyn Fn(&[f64], f64, &[f64], f64) -> f64 + Send + Sync>;
/// A function of the trait alone.
pub type TraitFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A point of trait space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TraitValue(pub Vec<f64>);

impl TraitValue {
    pub fn scalar(x: f64) -> Self {
        TraitValue(vec![x])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// The coordinate of a one-dimensional trait.
    pub fn value(&self) -> Result<f64> {
        match self.0.as_slice() {
            [x] => Ok(*x),
            other => Err(Error::Dimension { expected: 1, found: other.len() }),
        }
    }
}

impl fmt::Display for TraitValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let [x] = self.0.as_slice() {
            write!(f, "{x}")
        } else {
            write!(f, "{:?}", self.0)
        }
    }
}

/// Closed box of admissible traits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraitBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl TraitBox {
    pub fn interval(lo: f64, hi: f64) -> Self {
        TraitBox { lo: vec![lo], hi: vec![hi] }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (l, h))| *l <= *v && *v <= *h)
    }

    /// Length of the first coordinate's interval.
    pub fn range(&self) -> f64 {
        self.hi[0] - self.lo[0]
    }
}

/// The interaction kernel U((x,a),(y,α)).
#[derive(Clone)]
pub enum Interaction {
    /// `U = focal(a) · kernel(x, y) · competitor(α)`.
    Separable { focal: AgeFn, competitor: AgeFn, kernel: TraitPairFn },
    General(InteractionFn),
}

impl Interaction {
    #[inline]
    pub fn eval(&self, x: &[f64], a: f64, y: &[f64], alpha: f64) -> f64 {
        match self {
            Interaction::Separable { focal, competitor, kernel } => {
                focal(a) * kernel(x, y) * competitor(alpha)
            }
            Interaction::General(u) => u(x, a, y, alpha),
        }
    }

    pub fn is_separable(&self) -> bool {
        matches!(self, Interaction::Separable { .. })
    }
}

impl fmt::Debug for Interaction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Interaction::Separable { .. } => f.write_str("Separable"),
            Interaction::General(_) => f.write_str("General"),
        }
    }
}

/// Rate bounds: `b ≤ b_max`, `d_min ≤ d ≤ d_max`,
/// `u_min ≤ U ≤ u_max + u_age_slope · a` (a the focal age).
///
/// A positive `u_age_slope` covers interactions growing linearly in the
/// focal age; the simulator then bounds ages over a finite lookahead window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateBounds {
    pub b_max: f64,
    pub d_min: f64,
    pub d_max: f64,
    pub u_min: f64,
    pub u_max: f64,
    pub u_age_slope: f64,
}

impl RateBounds {
    pub fn interaction_bound(&self, max_age: f64) -> f64 {
        self.u_max + self.u_age_slope * max_age
    }
}

/// Layout of the Gauss–Legendre age quadrature used for age integrals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgeGridSpec {
    pub a_max: f64,
    pub panel_width: f64,
    pub per_panel: usize,
}

impl AgeGridSpec {
    pub fn build(&self) -> Result<AgeQuadrature> {
        AgeQuadrature::new(self.a_max, self.panel_width, self.per_panel)
    }
}

/// Centered displacement law for mutations, conditioned so that `x + h`
/// stays in the trait box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum MutationKernel {
    /// Gaussian with the given variance per coordinate, conditioned on the box.
    TruncatedGaussian { variance: f64 },
    /// Point mass at zero displacement (mutants identical to parents).
    Degenerate,
}

impl MutationKernel {
    pub fn gaussian(variance: f64) -> Result<Self> {
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(Error::invalid(format!("mutation variance must be positive, got {variance}")));
        }
        Ok(MutationKernel::TruncatedGaussian { variance })
    }

    /// The kernel of `ε·h` with `h ~ k`: `k_ε(h) = k(h/ε)/ε`.
    pub fn scaled(&self, eps: f64) -> Self {
        match *self {
            MutationKernel::TruncatedGaussian { variance } => {
                MutationKernel::TruncatedGaussian { variance: variance * eps * eps }
            }
            MutationKernel::Degenerate => MutationKernel::Degenerate,
        }
    }

    /// Probability mass of the unconditioned law on the admissible set.
    pub fn normalizer(&self, x: &[f64], bx: &TraitBox) -> f64 {
        match *self {
            MutationKernel::TruncatedGaussian { variance } => {
                let s = variance.sqrt();
                x.iter()
                    .enumerate()
                    .map(|(i, xi)| normal_cdf((bx.hi[i] - xi) / s) - normal_cdf((bx.lo[i] - xi) / s))
                    .product()
            }
            MutationKernel::Degenerate => 1.0,
        }
    }

    /// Density of the displacement `h` at resident `x` (zero off the box).
    /// For the degenerate kernel this is not a density; returns 0.
    pub fn density(&self, x: &[f64], h: &[f64], bx: &TraitBox) -> f64 {
        match *self {
            MutationKernel::TruncatedGaussian { variance } => {
                let s = variance.sqrt();
                let mut p = 1.0;
                for i in 0..x.len() {
                    let y = x[i] + h[i];
                    if y < bx.lo[i] || y > bx.hi[i] {
                        return 0.0;
                    }
                    p *= normal_pdf(h[i] / s) / s;
                }
                p / self.normalizer(x, bx)
            }
            MutationKernel::Degenerate => 0.0,
        }
    }

    /// Draws a displacement into `out`.
    pub fn sample_into<R: Rng + ?Sized>(&self, x: &[f64], bx: &TraitBox, rng: &mut R, out: &mut [f64]) {
        match *self {
            MutationKernel::TruncatedGaussian { variance } => {
                let s = variance.sqrt();
                for i in 0..x.len() {
                    out[i] = truncated_normal(s, bx.lo[i] - x[i], bx.hi[i] - x[i], rng);
                }
            }
            MutationKernel::Degenerate => out.iter_mut().for_each(|h| *h = 0.0),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, x: &[f64], bx: &TraitBox, rng: &mut R) -> Vec<f64> {
        let mut h = vec![0.0; x.len()];
        self.sample_into(x, bx, rng, &mut h);
        h
    }

    /// `(∫_{h>0} h² k(x,h) dh, ∫_{h<0} h² k(x,h) dh)` for a scalar trait.
    pub fn half_moments(&self, x: f64, bx: &TraitBox) -> (f64, f64) {
        match *self {
            MutationKernel::TruncatedGaussian { variance } => {
                let s = variance.sqrt();
                let lo = (bx.lo[0] - x) / s;
                let hi = (bx.hi[0] - x) / s;
                let z = normal_cdf(hi) - normal_cdf(lo);
                // ∫_l^u t² φ(t) dt
                let m2 = |l: f64, u: f64| {
                    let tl = if l.is_finite() { l * normal_pdf(l) } else { 0.0 };
                    let tu = if u.is_finite() { u * normal_pdf(u) } else { 0.0 };
                    normal_cdf(u) - normal_cdf(l) - tu + tl
                };
                let plus = if hi > 0.0 { m2(lo.max(0.0), hi) } else { 0.0 };
                let minus = if lo < 0.0 { m2(lo, hi.min(0.0)) } else { 0.0 };
                (variance * plus / z, variance * minus / z)
            }
            MutationKernel::Degenerate => (0.0, 0.0),
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            MutationKernel::TruncatedGaussian { variance } => variance,
            MutationKernel::Degenerate => 0.0,
        }
    }
}

/// Standard deviation `s` normal conditioned on `[lo, hi]` (lo ≤ 0 ≤ hi
/// not required).
fn truncated_normal<R: Rng + ?Sized>(s: f64, lo: f64, hi: f64, rng: &mut R) -> f64 {
    let (l, u) = (lo / s, hi / s);
    let mass = normal_cdf(u) - normal_cdf(l);
    if mass > 0.05 {
        loop {
            let t: f64 = rng.sample(StandardNormal);
            if t >= l && t <= u {
                return t * s;
            }
        }
    }
    // inverse CDF in whichever tail keeps precision
    let std = Normal::new(0.0, 1.0).expect("standard normal");
    let flip = l > 0.0;
    let (l, u) = if flip { (-u, -l) } else { (l, u) };
    let (pl, pu) = (normal_cdf(l), normal_cdf(u));
    let v: f64 = rng.random();
    let t = std.inverse_cdf(pl + v * (pu - pl)).clamp(l, u);
    if flip {
        -t * s
    } else {
        t * s
    }
}

/// Registered model families with closed-form validators.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ModelFamily {
    /// Logistic competition with senescent fertility.
    Example1 { competition: f64, natural_death: f64 },
    /// Same competition, fertility independent of age.
    Example1NoSenescence { competition: f64, natural_death: f64 },
    /// Senescent fertility, competition growing with the focal age (Kisdi kernel).
    AgeLogisticKisdi { natural_death: f64, c: f64, nu: f64, k: f64 },
    /// Constant fertility, no natural death, age-weighted Kisdi competition.
    Example2 { c: f64, nu: f64, k: f64 },
    Custom,
}

/// Optional analytic derivatives in the focal (first) trait coordinate.
#[derive(Clone, Default)]
pub struct Derivatives {
    pub birth: Option<TraitAgeFn>,
    pub death: Option<TraitAgeFn>,
    /// ∂ₓ of the separable trait kernel K(x, y).
    pub kernel: Option<TraitPairFn>,
    /// ∂ₓ of a general interaction.
    pub interaction: Option<InteractionFn>,
}

/// Everything defining the individual-level dynamics.
#[derive(Clone)]
pub struct ModelSpec {
    pub name: String,
    pub family: ModelFamily,
    pub trait_box: TraitBox,
    pub birth: TraitAgeFn,
    pub death: TraitAgeFn,
    pub interaction: Interaction,
    pub mutation_prob: f64,
    pub kernel: MutationKernel,
    pub bounds: RateBounds,
    pub age_grid: AgeGridSpec,
    pub derivatives: Derivatives,
    /// True when the birth rate does not depend on age.
    pub birth_age_independent: bool,
    /// Optional sharper interaction bound: `U((x,·),(·,·)) ≤ cap(x)` over all
    /// partners and ages. Only used when `U` does not grow with age.
    pub interaction_cap: Option<TraitFn>,
}

impl fmt::Debug for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelSpec")
            .field("name", &self.name)
            .field("family", &self.family)
            .field("trait_box", &self.trait_box)
            .field("interaction", &self.interaction)
            .field("mutation_prob", &self.mutation_prob)
            .field("kernel", &self.kernel)
            .field("bounds", &self.bounds)
            .finish()
    }
}

impl ModelSpec {
    pub fn dim(&self) -> usize {
        self.trait_box.dim()
    }

    #[inline]
    pub fn b(&self, x: &[f64], a: f64) -> f64 {
        (self.birth)(x, a)
    }

    #[inline]
    pub fn d(&self, x: &[f64], a: f64) -> f64 {
        (self.death)(x, a)
    }

    #[inline]
    pub fn u(&self, x: &[f64], a: f64, y: &[f64], alpha: f64) -> f64 {
        self.interaction.eval(x, a, y, alpha)
    }

    /// Step for finite differences in trait.
    pub fn fd_step(&self) -> f64 {
        1e-5 * self.trait_box.range()
    }

    /// ∂ₓ b(x, a) for scalar traits.
    pub fn birth_dx(&self, x: f64, a: f64) -> f64 {
        match &self.derivatives.birth {
            Some(f) => f(&[x], a),
            None => {
                let h = self.fd_step();
                (self.b(&[x + h], a) - self.b(&[x - h], a)) / (2.0 * h)
            }
        }
    }

    /// ∂ₓ d(x, a) for scalar traits.
    pub fn death_dx(&self, x: f64, a: f64) -> f64 {
        match &self.derivatives.death {
            Some(f) => f(&[x], a),
            None => {
                let h = self.fd_step();
                (self.d(&[x + h], a) - self.d(&[x - h], a)) / (2.0 * h)
            }
        }
    }

    /// ∂ₓ of the separable trait kernel K(x, y) for scalar traits.
    pub fn kernel_dx(&self, x: f64, y: f64) -> Option<f64> {
        let Interaction::Separable { kernel, .. } = &self.interaction else {
            return None;
        };
        Some(match &self.derivatives.kernel {
            Some(f) => f(&[x], &[y]),
            None => {
                let h = self.fd_step();
                (kernel(&[x + h], &[y]) - kernel(&[x - h], &[y])) / (2.0 * h)
            }
        })
    }

    /// ∂ₓ U((x,a),(y,α)) for scalar traits.
    pub fn interaction_dx(&self, x: f64, a: f64, y: f64, alpha: f64) -> f64 {
        match &self.interaction {
            Interaction::Separable { focal, competitor, .. } => {
                focal(a) * self.kernel_dx(x, y).expect("separable") * competitor(alpha)
            }
            Interaction::General(u) => match &self.derivatives.interaction {
                Some(f) => f(&[x], a, &[y], alpha),
                None => {
                    let h = self.fd_step();
                    (u(&[x + h], a, &[y], alpha) - u(&[x - h], a, &[y], alpha)) / (2.0 * h)
                }
            },
        }
    }

    /// Replaces the mutation kernel by its ε-rescaled version.
    pub fn with_scaled_kernel(&self, eps: f64) -> ModelSpec {
        let mut m = self.clone();
        m.kernel = self.kernel.scaled(eps);
        m
    }

    /// Spot-checks the declared rate bounds on an `nx × na` grid of
    /// (trait, age) with ages in `[0, a_max]`. Returns the first violation.
    pub fn check_bounds(&self, nx: usize, na: usize, a_max: f64) -> Result<()> {
        if self.dim() != 1 {
            return Err(Error::Dimension { expected: 1, found: self.dim() });
        }
        let (lo, hi) = (self.trait_box.lo[0], self.trait_box.hi[0]);
        let tol = 1e-12;
        let xs: Vec<f64> = (0..nx).map(|i| lo + (hi - lo) * i as f64 / (nx - 1) as f64).collect();
        let ages: Vec<f64> = (0..na).map(|i| a_max * i as f64 / (na - 1) as f64).collect();
        let bd = &self.bounds;
        for &x in &xs {
            for &a in &ages {
                let b = self.b(&[x], a);
                let d = self.d(&[x], a);
                if !(b >= -tol && b <= bd.b_max + tol) {
                    return Err(Error::Assertion(format!("b({x},{a}) = {b} outside [0, {}]", bd.b_max)));
                }
                if !(d >= bd.d_min - tol && d <= bd.d_max + tol) {
                    return Err(Error::Assertion(format!("d({x},{a}) = {d} outside bounds")));
                }
            }
        }
        // interaction on a coarser product grid of both individuals
        let step = (nx / 10).max(1);
        for &x in xs.iter().step_by(step) {
            for &y in xs.iter().step_by(step) {
                for &a in ages.iter().step_by(step) {
                    for &al in ages.iter().step_by(step) {
                        let u = self.u(&[x], a, &[y], al);
                        let cap = self.interaction_cap.as_ref().map_or(f64::INFINITY, |f| f(&[x]));
                        if !(u >= bd.u_min - tol && u <= bd.interaction_bound(a).min(cap) + tol) {
                            return Err(Error::Assertion(format!(
                                "U(({x},{a}),({y},{al})) = {u} outside bounds"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate_adaptive;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn kernel_normalizes_on_box() {
        let k = MutationKernel::gaussian(0.15).unwrap();
        let bx = TraitBox::interval(0.0, 4.0);
        for &x in &[0.0, 0.1, 1.3, 2.0, 3.95, 4.0] {
            let total =
                integrate_adaptive(|h| k.density(&[x], &[h], &bx), -x, 4.0 - x, 1e-13, 1e-13).unwrap();
            assert!((total - 1.0).abs() < 1e-10, "x = {x}: {total}");
        }
    }

    #[test]
    fn half_moments_match_quadrature() {
        let k = MutationKernel::gaussian(0.15).unwrap();
        let bx = TraitBox::interval(0.0, 4.0);
        for &x in &[0.0, 0.2, 2.0, 3.9] {
            let (p, m) = k.half_moments(x, &bx);
            let qp = integrate_adaptive(|h| h * h * k.density(&[x], &[h], &bx), 0.0, 4.0 - x, 1e-14, 1e-12)
                .unwrap();
            let qm = integrate_adaptive(|h| h * h * k.density(&[x], &[h], &bx), -x, 0.0, 1e-14, 1e-12)
                .unwrap();
            assert!((p - qp).abs() < 1e-10 && (m - qm).abs() < 1e-10, "x = {x}");
        }
        // interior: half the variance each side
        let (p, m) = k.half_moments(2.0, &bx);
        assert!((p - 0.075).abs() < 1e-5 && (m - 0.075).abs() < 1e-5);
    }

    #[test]
    fn samples_stay_in_box_with_right_mean() {
        let k = MutationKernel::gaussian(0.15).unwrap();
        let bx = TraitBox::interval(0.0, 4.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &x in &[0.0, 2.0, 4.0] {
            let n = 20_000;
            let mut mean = 0.0;
            for _ in 0..n {
                let h = k.sample(&[x], &bx, &mut rng)[0];
                assert!(bx.contains(&[x + h]));
                mean += h / n as f64;
            }
            let exact = integrate_adaptive(|h| h * k.density(&[x], &[h], &bx), -x, 4.0 - x, 1e-13, 1e-12)
                .unwrap();
            assert!((mean - exact).abs() < 0.02, "x = {x}: {mean} vs {exact}");
        }
        // far-tail inverse-CDF path, both sides
        for _ in 0..200 {
            let t = truncated_normal(0.1, 0.5, 1.0, &mut rng);
            assert!((0.5..=1.0).contains(&t));
            let t = truncated_normal(0.1, -1.0, -0.5, &mut rng);
            assert!((-1.0..=-0.5).contains(&t));
        }
    }

    #[test]
    fn rejects_nonpositive_variance() {
        assert!(MutationKernel::gaussian(0.0).is_err());
        assert!(MutationKernel::gaussian(-1.0).is_err());
    }
}
