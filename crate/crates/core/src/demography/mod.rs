//! Deterministic large-population demography: net reproduction, stationary
//! age profiles, frozen death rates and the age-structured PDE.

pub mod closed_form;
pub mod pde;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Interaction, ModelSpec, TraitValue};
use crate::quadrature::AgeQuadrature;
use crate::roots::bisect;

pub use pde::{AgeDensity, AgeGrid, PdeOptions, PdeRun};

/// A model together with its age quadrature and precomputed age profiles of
/// the separable interaction factors. Cheap to share; build once per model.
#[derive(Clone, Debug)]
pub struct Analyzer {
    pub model: ModelSpec,
    pub quad: AgeQuadrature,
    /// focal(a) at the nodes and its running integral (separable only)
    focal: Vec<f64>,
    focal_cum: Vec<f64>,
    focal_at_end: f64,
    focal_total: f64,
    competitor: Vec<f64>,
    competitor_at_end: f64,
}

impl Analyzer {
    pub fn new(model: &ModelSpec) -> Result<Self> {
        let quad = model.age_grid.build()?;
        let (focal, competitor, focal_at_end, competitor_at_end) = match &model.interaction {
            Interaction::Separable { focal, competitor, .. } => (
                quad.sample(|a| focal(a)),
                quad.sample(|a| competitor(a)),
                focal(quad.a_max()),
                competitor(quad.a_max()),
            ),
            Interaction::General(_) => (Vec::new(), Vec::new(), 0.0, 0.0),
        };
        let focal_cum = if focal.is_empty() { Vec::new() } else { quad.cumulative(&focal) };
        let focal_total = if focal.is_empty() { 0.0 } else { quad.integrate(&focal) };
        Ok(Analyzer {
            model: model.clone(),
            quad,
            focal,
            focal_cum,
            focal_at_end,
            focal_total,
            competitor,
            competitor_at_end,
        })
    }

    fn scalar(&self, x: &TraitValue) -> Result<f64> {
        x.value()
    }

    /// Net reproduction rate `R₀(x) = ∫ b(x,a) e^{−∫₀ᵃ d(x,·)} da`.
    pub fn net_reproduction_rate(&self, x: &[f64]) -> f64 {
        let b = self.quad.sample(|a| self.model.b(x, a));
        let d = self.quad.sample(|a| self.model.d(x, a));
        let dc = self.quad.cumulative(&d);
        let end = self.quad.a_max();
        let tail = Tail {
            b: self.model.b(x, end),
            cum_b: 0.0,
            rate: self.model.d(x, end),
            cum_d: self.quad.integrate(&d),
        };
        survival_weighted_integral(&self.quad, &b, &dc, None, 0.0, &tail)
    }

    /// Stationary equilibrium of the monomorphic population of trait `x`.
    ///
    /// Uses the model's closed form when one exists, otherwise solves the
    /// balance condition for the scalar competition load (separable
    /// interactions), otherwise integrates the PDE to stationarity.
    pub fn equilibrium(&self, x: &TraitValue) -> Result<Equilibrium> {
        let xs = x.as_slice();
        if !self.model.trait_box.contains(xs) {
            return Err(Error::invalid(format!("trait {x} outside the trait box")));
        }
        let r0 = self.net_reproduction_rate(xs);
        if r0 <= 1.0 {
            return Ok(Equilibrium::trivial(x.clone(), self.quad.len()));
        }
        if x.dim() == 1 {
            if let Some(cf) = closed_form::closed_form_equilibrium(&self.model, self.scalar(x)?) {
                let (mass, m0) = cf?;
                if mass > 0.0 {
                    let mut eq = self.from_newborn_density(x, m0, EquilibriumMethod::ClosedForm);
                    eq.mass = mass;
                    return Ok(eq);
                }
                return Ok(Equilibrium::trivial(x.clone(), self.quad.len()));
            }
        }
        match &self.model.interaction {
            Interaction::Separable { .. } => self.separable_equilibrium(x),
            Interaction::General(_) => self.pde_equilibrium(x, &PdeOptions::default()),
        }
    }

    /// Solves `∫ b e^{−∫d − K(x,x)·S·∫focal} = 1` for the load `S`.
    fn separable_equilibrium(&self, x: &TraitValue) -> Result<Equilibrium> {
        let xs = x.as_slice();
        let Interaction::Separable { kernel, .. } = &self.model.interaction else { unreachable!() };
        let kxx = kernel(xs, xs);
        if !(kxx > 0.0) {
            return Err(Error::Scheme(format!("self-interaction vanishes at {x}; no bounded equilibrium")));
        }
        let b = self.quad.sample(|a| self.model.b(xs, a));
        let d = self.quad.sample(|a| self.model.d(xs, a));
        let dc = self.quad.cumulative(&d);
        let d_total = self.quad.integrate(&d);
        let end = self.quad.a_max();
        let balance = |s: f64| {
            let cum: Vec<f64> = dc.iter().zip(&self.focal_cum).map(|(d, f)| d + kxx * s * f).collect();
            let tail = Tail {
                b: self.model.b(xs, end),
                cum_b: 0.0,
                rate: self.model.d(xs, end) + kxx * s * self.focal_at_end,
                cum_d: d_total + kxx * s * self.focal_total,
            };
            survival_weighted_integral(&self.quad, &b, &cum, None, 0.0, &tail) - 1.0
        };
        let mut hi = 1.0;
        while balance(hi) > 0.0 {
            hi *= 2.0;
            if hi > 1e300 {
                return Err(Error::Bracket("competition load".into()));
            }
        }
        let s = bisect(balance, 0.0, hi, 1e-15 * hi)?;
        // m̂(x,0) from the load definition S = ∫ competitor · m̂
        let surv: Vec<f64> = dc.iter().zip(&self.focal_cum).map(|(d, f)| (-(d + kxx * s * f)).exp()).collect();
        let denom: f64 = self.quad.integrate(&surv.iter().zip(&self.competitor).map(|(s, c)| s * c).collect::<Vec<_>>())
            + self.competitor_at_end * self.density_tail(xs, 1.0, kxx * s);
        let m0 = s / denom;
        Ok(self.from_newborn_density(x, m0, EquilibriumMethod::Balance))
    }

    /// Builds the equilibrium `m̂(x,a) = m̂(x,0) e^{−∫₀ᵃ d̂(x,·,x)}` from its
    /// newborn density, for separable interactions.
    fn from_newborn_density(&self, x: &TraitValue, m0: f64, method: EquilibriumMethod) -> Equilibrium {
        let xs = x.as_slice();
        let d = self.quad.sample(|a| self.model.d(xs, a));
        let dc = self.quad.cumulative(&d);
        match &self.model.interaction {
            Interaction::Separable { kernel, .. } => {
                let kxx = kernel(xs, xs);
                // fixed point in S: S = m0 ∫ c(α) e^{−∫d − K S ∫focal}; for closed
                // forms m0 is exact so one contraction-free solve suffices
                let load_eq = |s: f64| {
                    let v: Vec<f64> = (0..self.quad.len())
                        .map(|i| self.competitor[i] * (-(dc[i] + kxx * s * self.focal_cum[i])).exp())
                        .collect();
                    m0 * (self.quad.integrate(&v) + self.competitor_at_end * self.density_tail(xs, 1.0, kxx * s)) - s
                };
                // load_eq is decreasing in s, positive at 0
                let mut hi = m0.max(1.0);
                while load_eq(hi) > 0.0 {
                    hi *= 2.0;
                }
                let s = bisect(load_eq, 0.0, hi, 1e-15 * hi).unwrap_or(hi);
                let density: Vec<f64> =
                    (0..self.quad.len()).map(|i| m0 * (-(dc[i] + kxx * s * self.focal_cum[i])).exp()).collect();
                let mass = self.quad.integrate(&density) + self.density_tail(xs, m0, kxx * s);
                Equilibrium { trait_value: x.clone(), mass, m0, load: Some(s), density, trivial: false, method }
            }
            Interaction::General(_) => unreachable!("general interactions use the PDE path"),
        }
    }

    /// Mass beyond the truncation age under exponential extrapolation.
    fn density_tail(&self, xs: &[f64], m0: f64, ks: f64) -> f64 {
        let end = self.quad.a_max();
        let rate = self.model.d(xs, end) + ks * self.focal_at_end;
        let cum = self.quad.integrate(&self.quad.sample(|a| self.model.d(xs, a))) + ks * self.focal_total;
        let at_end = m0 * (-cum).exp();
        if rate > 0.0 {
            at_end / rate
        } else {
            0.0
        }
    }

    /// Equilibrium obtained by running the PDE to stationarity, then sampled
    /// at the quadrature nodes.
    pub fn pde_equilibrium(&self, x: &TraitValue, opts: &PdeOptions) -> Result<Equilibrium> {
        let xs = x.as_slice();
        let grid = AgeGrid::new(opts.a_max.unwrap_or(self.quad.a_max()), opts.cells)?;
        let init = AgeDensity::from_fn(grid, |a| opts.init_mass * (-a).exp());
        let run = pde::run_to_stationarity(&self.model, xs, init, opts)?;
        let dens = run.final_density();
        let density: Vec<f64> = self.quad.nodes.iter().map(|&a| dens.interpolate(a)).collect();
        let m0 = dens.newborn();
        let load = match &self.model.interaction {
            Interaction::Separable { competitor, .. } => Some(dens.integrate(|a| competitor(a))),
            _ => None,
        };
        Ok(Equilibrium {
            trait_value: x.clone(),
            mass: dens.mass(),
            m0,
            load,
            density,
            trivial: false,
            method: EquilibriumMethod::Pde,
        })
    }

    /// Frozen death rate `d̂(y,a,x)` of a `y` individual in the resident
    /// equilibrium, evaluated at the quadrature nodes together with its
    /// running integral.
    pub fn frozen_death(&self, y: &[f64], resident: &Equilibrium) -> Result<FrozenDeath> {
        if resident.trivial {
            return Err(Error::invalid("frozen death rate needs a nontrivial resident equilibrium"));
        }
        let xs = resident.trait_value.as_slice();
        let n = self.quad.len();
        let end = self.quad.a_max();
        let mut rate = self.quad.sample(|a| self.model.d(y, a));
        let (end_rate, _) = match &self.model.interaction {
            Interaction::Separable { kernel, .. } => {
                let load = resident.load.expect("separable equilibria carry a load");
                let ks = kernel(y, xs) * load;
                for i in 0..n {
                    rate[i] += ks * self.focal[i];
                }
                (self.model.d(y, end) + ks * self.focal_at_end, ks)
            }
            Interaction::General(u) => {
                let pressure = |a: f64| -> f64 {
                    self.quad
                        .nodes
                        .iter()
                        .zip(&self.quad.weights)
                        .zip(&resident.density)
                        .map(|((&al, w), m)| w * u(y, a, xs, al) * m)
                        .sum()
                };
                for i in 0..n {
                    rate[i] += pressure(self.quad.nodes[i]);
                }
                (self.model.d(y, end) + pressure(end), 0.0)
            }
        };
        let cumulative = self.quad.cumulative(&rate);
        let total = self.quad.integrate(&rate);
        Ok(FrozenDeath { rate, cumulative, total, end_rate })
    }

    /// Birth rate of `y` at the nodes, its running integral, and the
    /// values at the truncation age.
    pub fn birth_profile(&self, y: &[f64]) -> BirthProfile {
        let rate = self.quad.sample(|a| self.model.b(y, a));
        let cumulative = self.quad.cumulative(&rate);
        let total = self.quad.integrate(&rate);
        BirthProfile { end_rate: self.model.b(y, self.quad.a_max()), rate, cumulative, total }
    }

    /// `∫ b(y,a) e^{−∫₀ᵃ d̂(y,·,x)} da`; equals 1 at `y = x`.
    pub fn invasion_integral(&self, y: &[f64], resident: &Equilibrium) -> Result<f64> {
        let fd = self.frozen_death(y, resident)?;
        let bp = self.birth_profile(y);
        let tail = Tail { b: bp.end_rate, cum_b: bp.total, rate: fd.end_rate, cum_d: fd.total };
        Ok(survival_weighted_integral(&self.quad, &bp.rate, &fd.cumulative, None, 0.0, &tail))
    }

    /// Equilibrium density at an arbitrary age.
    pub fn density_at(&self, eq: &Equilibrium, a: f64) -> f64 {
        if eq.trivial {
            return 0.0;
        }
        let xs = eq.trait_value.as_slice();
        match (&self.model.interaction, eq.load) {
            (Interaction::Separable { kernel, focal, .. }, Some(s)) if eq.method != EquilibriumMethod::Pde => {
                let ks = kernel(xs, xs) * s;
                let (t, w) = crate::quadrature::gauss_legendre(16);
                let panels = (a.ceil() as usize).max(1);
                let h = a / panels as f64;
                let mut cum = 0.0;
                for p in 0..panels {
                    for k in 0..t.len() {
                        let s = (p as f64 + 0.5 * (t[k] + 1.0)) * h;
                        cum += 0.5 * h * w[k] * (self.model.d(xs, s) + ks * focal(s));
                    }
                }
                eq.m0 * (-cum).exp()
            }
            _ => interpolate_nodes(&self.quad.nodes, &eq.density, a),
        }
    }
}

fn interpolate_nodes(nodes: &[f64], values: &[f64], a: f64) -> f64 {
    let i = nodes.partition_point(|&n| n < a);
    if i == 0 {
        return values[0];
    }
    if i >= nodes.len() {
        return 0.0;
    }
    let t = (a - nodes[i - 1]) / (nodes[i] - nodes[i - 1]);
    values[i - 1] * (1.0 - t) + values[i] * t
}

/// Values at the truncation age used for the exponential tail beyond it.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Tail {
    pub b: f64,
    pub cum_b: f64,
    pub rate: f64,
    pub cum_d: f64,
}

/// `∫ b(a) exp(c·B(a) − D(a)) da` with the running integrals given at the
/// nodes, plus an exponential tail beyond the truncation age.
/// `cum_b` may be `None` when `c = 0`. Returns `+∞` when the tail diverges.
pub(crate) fn survival_weighted_integral(
    quad: &AgeQuadrature,
    b: &[f64],
    cum_d: &[f64],
    cum_b: Option<&[f64]>,
    c: f64,
    tail: &Tail,
) -> f64 {
    let mut s = 0.0;
    let mut prev = f64::INFINITY;
    for i in 0..b.len() {
        let e = match cum_b {
            Some(cb) => c * cb[i] - cum_d[i],
            None => -cum_d[i],
        };
        if e < -745.0 && e < prev {
            return s;
        }
        prev = e;
        s += quad.weights[i] * b[i] * e.exp();
    }
    let e_end = c * tail.cum_b - tail.cum_d;
    let r = tail.rate - c * tail.b;
    let head = tail.b * e_end.exp();
    if head == 0.0 {
        return s;
    }
    if r <= 0.0 {
        return f64::INFINITY;
    }
    s + head / r
}

/// How an equilibrium was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EquilibriumMethod {
    Trivial,
    ClosedForm,
    Balance,
    Pde,
}

/// Stationary state of a monomorphic population.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Equilibrium {
    pub trait_value: TraitValue,
    /// Total mass `M̂ₓ`.
    pub mass: f64,
    /// Newborn density `m̂(x,0)`, also the stationary birth flux `∫b m̂`.
    pub m0: f64,
    /// `∫ competitor(α) m̂(x,α) dα` for separable interactions.
    pub load: Option<f64>,
    /// `m̂(x,·)` at the analyzer's quadrature nodes.
    pub density: Vec<f64>,
    pub trivial: bool,
    pub method: EquilibriumMethod,
}

impl Equilibrium {
    pub fn trivial(x: TraitValue, nodes: usize) -> Self {
        Equilibrium {
            trait_value: x,
            mass: 0.0,
            m0: 0.0,
            load: Some(0.0),
            density: vec![0.0; nodes],
            trivial: true,
            method: EquilibriumMethod::Trivial,
        }
    }

    /// Birth flux `∫ b(x,a) m̂(x,a) da`.
    pub fn birth_flux(&self) -> f64 {
        self.m0
    }
}

/// Frozen death rate of a mutant at the quadrature nodes.
#[derive(Clone, Debug)]
pub struct FrozenDeath {
    pub rate: Vec<f64>,
    pub cumulative: Vec<f64>,
    pub total: f64,
    pub end_rate: f64,
}

/// Birth rate of a mutant at the quadrature nodes.
#[derive(Clone, Debug)]
pub struct BirthProfile {
    pub rate: Vec<f64>,
    pub cumulative: Vec<f64>,
    pub total: f64,
    pub end_rate: f64,
}

/// Outcome of competition between two logistic residents.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CoexistenceDiagnosis {
    XFixes,
    YFixes,
    Undetermined,
}

/// Invasion-implies-fixation check for logistic (age-independent)
/// interactions `U(x,y)`: requires `U(x,x)U(y,y) − U(x,y)U(y,x) ≤ 0` and
/// opposite signs of `U(x,x)M̂ₓ − U(x,y)M̂_y` and `U(y,y)M̂_y − U(y,x)M̂ₓ`.
pub fn check_non_coexistence_logistic(an: &Analyzer, x: f64, y: f64) -> Result<CoexistenceDiagnosis> {
    let m = &an.model;
    let u = |p: f64, q: f64| m.u(&[p], 0.0, &[q], 0.0);
    for &(a, al) in &[(0.0, 1.0), (2.0, 0.0), (5.0, 3.0)] {
        if (m.u(&[x], a, &[y], al) - u(x, y)).abs() > 1e-14 * u(x, y).abs().max(1e-300) {
            return Err(Error::invalid("non-coexistence check needs an age-independent interaction"));
        }
    }
    if x == y {
        return Ok(CoexistenceDiagnosis::Undetermined);
    }
    let ex = an.equilibrium(&TraitValue::scalar(x))?;
    let ey = an.equilibrium(&TraitValue::scalar(y))?;
    if ex.trivial || ey.trivial {
        return Ok(CoexistenceDiagnosis::Undetermined);
    }
    let det = u(x, x) * u(y, y) - u(x, y) * u(y, x);
    if det > 1e-15 * (u(x, x) * u(y, y)).abs() {
        return Ok(CoexistenceDiagnosis::Undetermined);
    }
    let sx = u(x, x) * ex.mass - u(x, y) * ey.mass;
    let sy = u(y, y) * ey.mass - u(y, x) * ex.mass;
    Ok(if sx < 0.0 && sy > 0.0 {
        CoexistenceDiagnosis::YFixes
    } else if sx > 0.0 && sy < 0.0 {
        CoexistenceDiagnosis::XFixes
    } else {
        CoexistenceDiagnosis::Undetermined
    })
}

/// Convenience wrapper: `R₀(x)` for a model.
pub fn net_reproduction_rate(model: &ModelSpec, x: &[f64]) -> Result<f64> {
    Ok(Analyzer::new(model)?.net_reproduction_rate(x))
}

/// Convenience wrapper: stationary equilibrium for a model.
pub fn stationary_equilibrium(model: &ModelSpec, x: &TraitValue) -> Result<Equilibrium> {
    Analyzer::new(model)?.equilibrium(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::*;

    #[test]
    fn r0_example1() {
        let an = Analyzer::new(&build_example1()).unwrap();
        for &x in &[0.3, 1.0, 2.0, 3.3] {
            let r = an.net_reproduction_rate(&[x]);
            assert!((r - 4.0 * x * (4.0 - x) / 5.0).abs() < 1e-12, "x = {x}: {r}");
        }
    }

    #[test]
    fn r0_constant_rates_is_ratio() {
        let an = Analyzer::new(&build_example1_no_senescence()).unwrap();
        let r = an.net_reproduction_rate(&[2.0]);
        assert!((r - 16.0).abs() < 1e-10);
    }

    #[test]
    fn balance_path_matches_closed_forms() {
        for m in [build_example1(), build_example1_no_senescence(), build_example1_age_logistic_kisdi(), build_example2()] {
            let an = Analyzer::new(&m).unwrap();
            let mut custom = m.clone();
            custom.family = crate::model::ModelFamily::Custom;
            let an2 = Analyzer::new(&custom).unwrap();
            for &x in &[0.8, 2.0, 3.2] {
                let e1 = an.equilibrium(&TraitValue::scalar(x)).unwrap();
                let e2 = an2.equilibrium(&TraitValue::scalar(x)).unwrap();
                assert_eq!(e2.method, EquilibriumMethod::Balance);
                assert!((e1.mass / e2.mass - 1.0).abs() < 1e-8, "{} x = {x}: {} vs {}", m.name, e1.mass, e2.mass);
                assert!((e1.m0 / e2.m0 - 1.0).abs() < 1e-8, "{} x = {x}", m.name);
                let bal = an.invasion_integral(&[x], &e1).unwrap();
                assert!((bal - 1.0).abs() < 1e-9, "{} x = {x}: balance {bal}", m.name);
            }
        }
    }

    #[test]
    fn pde_path_matches_closed_forms() {
        for (m, x) in [(build_example1(), 2.0), (build_example1(), 0.552), (build_example2(), 3.2), (build_example1_age_logistic_kisdi(), 2.0)] {
            let an = Analyzer::new(&m).unwrap();
            let exact = an.equilibrium(&TraitValue::scalar(x)).unwrap();
            let pde = an.pde_equilibrium(&TraitValue::scalar(x), &PdeOptions::default()).unwrap();
            let l1: f64 = an.quad.integrate(&exact.density.iter().zip(&pde.density).map(|(a, b)| (a - b).abs()).collect::<Vec<_>>());
            assert!((pde.mass / exact.mass - 1.0).abs() < 5e-3, "{} x = {x}", m.name);
            assert!(l1 / exact.mass < 5e-3);
        }
    }

    #[test]
    fn frozen_death_example1_at_two() {
        let an = Analyzer::new(&build_example1()).unwrap();
        let eq = an.equilibrium(&TraitValue::scalar(2.0)).unwrap();
        assert_eq!(eq.mass, 1375.0);
        let fd = an.frozen_death(&[2.0], &eq).unwrap();
        assert!(fd.rate.iter().all(|r| (r - 3.0).abs() < 1e-12));
    }

    #[test]
    fn non_coexistence_example1() {
        let an = Analyzer::new(&build_example1()).unwrap();
        assert_eq!(check_non_coexistence_logistic(&an, 1.0, 3.0).unwrap(), CoexistenceDiagnosis::YFixes);
        assert_eq!(check_non_coexistence_logistic(&an, 3.0, 1.0).unwrap(), CoexistenceDiagnosis::XFixes);
        assert_eq!(check_non_coexistence_logistic(&an, 2.0, 2.0).unwrap(), CoexistenceDiagnosis::Undetermined);
        let an2 = Analyzer::new(&build_example2()).unwrap();
        assert!(check_non_coexistence_logistic(&an2, 1.0, 3.0).is_err());
    }
}
