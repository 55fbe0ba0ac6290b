//! Invasion analysis: the extinction probability of a mutant lineage in a
//! resident equilibrium, the function `g`, and the fitness gradient.
//!
//! For a mutant `y` in the equilibrium of `x`, with `B(a) = ∫₀ᵃ b(y,·)` and
//! `D̂(a) = ∫₀ᵃ d̂(y,·,x)`,
//!
//! ```text
//! F(z) = ∫ b(y,a) exp((z−1)B(a) − D̂(a)) da − 1
//! ```
//!
//! is strictly increasing with `F(0) < 0`; `g(y,x)` is its unique root on
//! `ℝ₊` and the extinction probability is `z₀ = min(g, 1)`.

pub mod pip;
pub mod singular;

use serde::{Deserialize, Serialize};

use crate::demography::{Analyzer, Equilibrium};
use crate::error::{Error, Result};
use crate::model::{Interaction, TraitValue};
use crate::roots::newton_bracketed;

pub use pip::{pip, PipCell, PipGrid, PipSpec};
pub use singular::{classify_from_g, classify_singularity, SingularityKind, SingularityReport};

const ROOT_TOL: f64 = 1e-14;

/// Extinction analysis for one (resident, mutant) pair.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FitnessReport {
    pub resident: TraitValue,
    pub mutant: TraitValue,
    /// `∫ b(y,a) e^{−∫₀ᵃ d̂(y,·,x)} da`.
    pub invasion_integral: f64,
    /// Extinction probability `min(g, 1)`.
    pub z0: f64,
    pub invadable: bool,
    /// Unconstrained root `g(y, x)`.
    pub g_value: f64,
}

impl FitnessReport {
    /// Survival probability `1 − z₀` of the mutant lineage.
    pub fn invasion_fitness(&self) -> f64 {
        1.0 - self.z0
    }
}

/// `F(·, y, x)` with all age profiles precomputed.
#[derive(Clone, Debug)]
pub struct FitnessFunction<'a> {
    an: &'a Analyzer,
    b: Vec<f64>,
    bcum: Vec<f64>,
    dcum: Vec<f64>,
    b_end: f64,
    b_total: f64,
    d_end: f64,
    d_total: f64,
}

impl<'a> FitnessFunction<'a> {
    pub fn new(an: &'a Analyzer, y: &[f64], resident: &Equilibrium) -> Result<Self> {
        let fd = an.frozen_death(y, resident)?;
        let bp = an.birth_profile(y);
        Ok(FitnessFunction {
            an,
            b: bp.rate,
            bcum: bp.cumulative,
            dcum: fd.cumulative,
            b_end: bp.end_rate,
            b_total: bp.total,
            d_end: fd.end_rate,
            d_total: fd.total,
        })
    }

    /// `(F(z), F'(z))`. `F` is `+∞` when the integral diverges.
    pub fn eval(&self, z: f64) -> (f64, f64) {
        let c = z - 1.0;
        let w = &self.an.quad.weights;
        let (mut f, mut df) = (0.0, 0.0);
        let mut prev = f64::INFINITY;
        let mut truncated = false;
        for i in 0..self.b.len() {
            let e = c * self.bcum[i] - self.dcum[i];
            if e < -745.0 && e < prev {
                truncated = true;
                break;
            }
            prev = e;
            let t = w[i] * self.b[i] * e.exp();
            f += t;
            df += t * self.bcum[i];
        }
        if !truncated {
            // exponential tail with rates frozen at the truncation age
            let e = c * self.b_total - self.d_total;
            let head = self.b_end * e.exp();
            if head > 0.0 {
                let r = self.d_end - c * self.b_end;
                if r <= 0.0 {
                    return (f64::INFINITY, f64::INFINITY);
                }
                f += head / r;
                df += head * (self.b_total / r + self.b_end / (r * r));
            }
        }
        (f - 1.0, df)
    }

    pub fn value(&self, z: f64) -> f64 {
        self.eval(z).0
    }

    /// Invasion integral `F(1) + 1`.
    pub fn invasion_integral(&self) -> f64 {
        self.value(1.0) + 1.0
    }

    /// Bounds `(lower, upper)` on the survival probability `1 − z₀` from the
    /// convexity of `F`: the tangent at 1 and the chord over `[0, 1]`.
    /// Both vanish when the invasion integral is at most 1.
    pub fn survival_bounds(&self) -> (f64, f64) {
        let (f1, d1) = self.eval(1.0);
        if !(f1 > 0.0) {
            return (0.0, 0.0);
        }
        if !f1.is_finite() {
            return (0.0, 1.0);
        }
        let f0 = self.value(0.0);
        let lower = if d1.is_finite() && d1 > 0.0 { (f1 / d1).min(1.0) } else { 0.0 };
        let upper = if f0 < 0.0 { f1 / (f1 - f0) } else { 1.0 };
        (lower, upper.max(lower))
    }

    /// The unconstrained root `g` on `ℝ₊`.
    pub fn root(&self) -> Result<f64> {
        let f1 = self.value(1.0);
        if f1 == 0.0 {
            return Ok(1.0);
        }
        if f1 > 0.0 {
            let f0 = self.value(0.0);
            if !(f0 < 0.0) {
                return Err(Error::Bracket(format!("F(0) = {f0} is not negative")));
            }
            return newton_bracketed(|z| self.eval(z), 0.0, 1.0, ROOT_TOL);
        }
        let mut lo = 1.0;
        let mut hi = 2.0;
        loop {
            let v = self.value(hi);
            if v >= 0.0 {
                break;
            }
            lo = hi;
            hi *= 2.0;
            if hi > 1e6 {
                return Err(Error::Bracket("no root of F below 1e6".into()));
            }
        }
        newton_bracketed(|z| self.eval(z), lo, hi, ROOT_TOL)
    }
}

/// Extinction probability of a single `y` mutant in the equilibrium `resident`.
pub fn extinction_probability(an: &Analyzer, resident: &Equilibrium, y: &TraitValue) -> Result<FitnessReport> {
    let f = FitnessFunction::new(an, y.as_slice(), resident)?;
    let invasion_integral = f.invasion_integral();
    let g = f.root()?;
    let invadable = invasion_integral > 1.0;
    let z0 = if invadable { g.min(1.0) } else { 1.0 };
    Ok(FitnessReport {
        resident: resident.trait_value.clone(),
        mutant: y.clone(),
        invasion_integral,
        z0,
        invadable,
        g_value: g,
    })
}

/// `g(y, x)` for scalar traits, computing the resident equilibrium.
pub fn g_scalar(an: &Analyzer, y: f64, x: f64) -> Result<f64> {
    let eq = an.equilibrium(&TraitValue::scalar(x))?;
    if eq.trivial {
        return Err(Error::NotViable { trait_value: vec![x], r0: an.net_reproduction_rate(&[x]) });
    }
    FitnessFunction::new(an, &[y], &eq)?.root()
}

/// `∂₁g(x,x)` from the ratio formula
///
/// ```text
/// ∂₁g(x,x) = −∫ (∂₁b − b·∫₀ᵃ(∂₁d + ∫∂₁U m̂)) e^{−D̂} da / ∫ b·B·e^{−D̂} da
/// ```
///
/// with all rates at `(x, ·)` and `D̂` the equilibrium death integral.
pub fn fitness_gradient_generic(an: &Analyzer, x: f64) -> Result<f64> {
    let eq = an.equilibrium(&TraitValue::scalar(x))?;
    fitness_gradient_at(an, &eq)
}

/// As [`fitness_gradient_generic`] for a precomputed equilibrium.
pub fn fitness_gradient_at(an: &Analyzer, eq: &Equilibrium) -> Result<f64> {
    if eq.trivial {
        let x = eq.trait_value.value()?;
        return Err(Error::NotViable { trait_value: vec![x], r0: an.net_reproduction_rate(&[x]) });
    }
    let x = eq.trait_value.value()?;
    let m = &an.model;
    let q = &an.quad;
    let fd = an.frozen_death(&[x], eq)?;
    let bp = an.birth_profile(&[x]);
    let db = q.sample(|a| m.birth_dx(x, a));
    // ∂₁ of the frozen death rate at the nodes
    let dd: Vec<f64> = match &m.interaction {
        Interaction::Separable { focal, .. } => {
            let load = eq.load.expect("separable equilibrium carries a load");
            let dk = m.kernel_dx(x, x).expect("separable");
            q.nodes.iter().map(|&a| m.death_dx(x, a) + focal(a) * dk * load).collect()
        }
        Interaction::General(_) => q
            .nodes
            .iter()
            .map(|&a| {
                let p: f64 = q
                    .nodes
                    .iter()
                    .zip(&q.weights)
                    .zip(&eq.density)
                    .map(|((&al, w), mh)| w * m.interaction_dx(x, a, x, al) * mh)
                    .sum();
                m.death_dx(x, a) + p
            })
            .collect(),
    };
    let ddc = q.cumulative(&dd);
    let dd_total = q.integrate(&dd);
    let mut num = 0.0;
    let mut den = 0.0;
    let mut truncated = false;
    for i in 0..q.len() {
        let e = -fd.cumulative[i];
        if e < -745.0 {
            truncated = true;
            break;
        }
        let s = q.weights[i] * e.exp();
        num += (db[i] - bp.rate[i] * ddc[i]) * s;
        den += bp.rate[i] * bp.cumulative[i] * s;
    }
    if !truncated {
        // rates frozen at the truncation age
        let a_end = q.a_max();
        let r = fd.end_rate;
        let s = (-fd.total).exp();
        if s > 0.0 && r > 0.0 {
            let db_end = m.birth_dx(x, a_end);
            let dd_rate = match &m.interaction {
                Interaction::Separable { focal, .. } => {
                    m.death_dx(x, a_end) + focal(a_end) * m.kernel_dx(x, x).unwrap_or(0.0) * eq.load.unwrap_or(0.0)
                }
                Interaction::General(_) => *dd.last().unwrap_or(&0.0),
            };
            num += s * ((db_end - bp.end_rate * dd_total) / r - bp.end_rate * dd_rate / (r * r));
            den += s * bp.end_rate * (bp.total / r + bp.end_rate / (r * r));
        }
    }
    if den == 0.0 {
        return Err(Error::Scheme("zero denominator in gradient (birth rate vanishes)".into()));
    }
    Ok(-num / den)
}

/// Directional derivative `lim (z₀(x+εh, x) − 1)/ε = min(h·∂₁g(x,x), 0)`.
pub fn directional_derivative_z0(gradient: f64, h: f64) -> f64 {
    (h * gradient).min(0.0)
}
