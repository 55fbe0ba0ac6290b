//! Age-structured transport with nonlocal death and renewal boundary,
//! integrated along characteristics with `Δt = Δa`.
//!
//! Each step shifts every cell one age class up (exact advection), applies
//! the survival factor `exp(−Δt·μ)` with the hazard evaluated at the
//! mid-transit age, and fills the newborn cell by a trapezoid rule in time
//! that is solved implicitly for the new birth flux. The nonlocal
//! competition load is taken at the half step by a predictor–corrector pass.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Interaction, ModelSpec};

/// Uniform age grid on `[0, a_max]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgeGrid {
    pub a_max: f64,
    pub n_cells: usize,
}

impl AgeGrid {
    pub fn new(a_max: f64, n_cells: usize) -> Result<Self> {
        if !(a_max > 0.0) || n_cells < 16 {
            return Err(Error::invalid(format!("age grid needs a_max > 0 and >= 16 cells (got {a_max}, {n_cells})")));
        }
        Ok(AgeGrid { a_max, n_cells })
    }

    pub fn da(&self) -> f64 {
        self.a_max / self.n_cells as f64
    }

    pub fn midpoint(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.da()
    }
}

/// Cell averages of an age density.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgeDensity {
    pub grid: AgeGrid,
    pub values: Vec<f64>,
}

impl AgeDensity {
    pub fn zeros(grid: AgeGrid) -> Self {
        AgeDensity { grid, values: vec![0.0; grid.n_cells] }
    }

    /// Cell averages of `f` by two-point Gauss rule per cell.
    pub fn from_fn(grid: AgeGrid, f: impl Fn(f64) -> f64) -> Self {
        let da = grid.da();
        let g = 0.5 / 3f64.sqrt();
        let values = (0..grid.n_cells)
            .map(|i| {
                let m = grid.midpoint(i);
                0.5 * (f(m - g * da) + f(m + g * da))
            })
            .collect();
        AgeDensity { grid, values }
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.da()
    }

    /// Midpoint-rule `∫ f(a) m(a) da`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        let da = self.grid.da();
        self.values.iter().enumerate().map(|(i, v)| v * f(self.grid.midpoint(i))).sum::<f64>() * da
    }

    /// Linear interpolation between cell midpoints (constant extrapolation
    /// below the first midpoint, zero past the last cell).
    pub fn interpolate(&self, a: f64) -> f64 {
        let da = self.grid.da();
        let s = a / da - 0.5;
        if s <= 0.0 {
            return if self.values.len() > 1 {
                self.values[0] + s * (self.values[1] - self.values[0])
            } else {
                self.values[0]
            };
        }
        let i = s.floor() as usize;
        if i + 1 >= self.values.len() {
            return if a <= self.grid.a_max { *self.values.last().unwrap_or(&0.0) } else { 0.0 };
        }
        let t = s - i as f64;
        self.values[i] * (1.0 - t) + self.values[i + 1] * t
    }

    /// Density extrapolated to age 0.
    pub fn newborn(&self) -> f64 {
        self.interpolate(0.0)
    }

    /// `∫ |m − n|`.
    pub fn l1_distance(&self, other: &AgeDensity) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).sum::<f64>() * self.grid.da()
    }
}

/// Integration settings.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PdeOptions {
    pub cells: usize,
    /// Truncation age; defaults to the model's quadrature range.
    pub a_max: Option<f64>,
    /// Mass of the default `e^{−a}` initial profile used for equilibria.
    pub init_mass: f64,
    /// Hard limit on integration time when seeking stationarity.
    pub t_max: f64,
    /// Relative mass variation below which the state counts as stationary.
    pub stationarity_tol: f64,
    /// Time window over which the variation must stay below tolerance.
    pub window: f64,
    /// Snapshot cadence (time units); 0 disables snapshots.
    pub record_every: f64,
}

impl Default for PdeOptions {
    fn default() -> Self {
        PdeOptions {
            cells: 3000,
            a_max: None,
            init_mass: 100.0,
            t_max: 5000.0,
            stationarity_tol: 1e-8,
            window: 5.0,
            record_every: 0.0,
        }
    }
}

/// A PDE integration: mass series per trait and optional snapshots.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PdeRun {
    pub traits: Vec<Vec<f64>>,
    pub times: Vec<f64>,
    /// `masses[k][s]`: mass of trait `s` at `times[k]`.
    pub masses: Vec<Vec<f64>>,
    pub snapshots: Vec<(f64, Vec<AgeDensity>)>,
    pub final_states: Vec<AgeDensity>,
    /// Mass that left the grid through `a_max`, cumulated.
    pub outflow: f64,
    pub stationary: bool,
}

impl PdeRun {
    pub fn final_density(&self) -> &AgeDensity {
        &self.final_states[0]
    }

    pub fn total_mass(&self, k: usize) -> f64 {
        self.masses[k].iter().sum()
    }
}

struct Stepper<'a> {
    model: &'a ModelSpec,
    traits: Vec<Vec<f64>>,
    grid: AgeGrid,
    /// b at cell midpoints
    birth: Vec<Vec<f64>>,
    /// d at cell boundaries iΔa (i = 1..=n) and at Δa/2 (index 0)
    death: Vec<Vec<f64>>,
    focal: Vec<f64>,
    competitor: Vec<f64>,
    /// K(x_s, x_r)
    kmat: Vec<Vec<f64>>,
    /// general interaction, U[s][r][i][j] flattened per (s, r)
    general: Vec<Vec<Vec<f64>>>,
}

impl<'a> Stepper<'a> {
    fn new(model: &'a ModelSpec, traits: Vec<Vec<f64>>, grid: AgeGrid) -> Self {
        let n = grid.n_cells;
        let da = grid.da();
        let hazard_age = |i: usize| if i == 0 { 0.5 * da } else { i as f64 * da };
        let birth = traits.iter().map(|x| (0..n).map(|i| model.b(x, grid.midpoint(i))).collect()).collect();
        let death = traits.iter().map(|x| (0..n).map(|i| model.d(x, hazard_age(i))).collect()).collect();
        let (focal, competitor, kmat, general) = match &model.interaction {
            Interaction::Separable { focal, competitor, kernel } => (
                (0..n).map(|i| focal(hazard_age(i))).collect(),
                (0..n).map(|i| competitor(grid.midpoint(i))).collect(),
                traits.iter().map(|x| traits.iter().map(|y| kernel(x, y)).collect()).collect(),
                Vec::new(),
            ),
            Interaction::General(u) => {
                let general = traits
                    .iter()
                    .map(|x| {
                        traits
                            .iter()
                            .map(|y| {
                                let mut m = Vec::with_capacity(n * n);
                                for i in 0..n {
                                    for j in 0..n {
                                        m.push(u(x, hazard_age(i), y, grid.midpoint(j)));
                                    }
                                }
                                m
                            })
                            .collect()
                    })
                    .collect();
                (Vec::new(), Vec::new(), Vec::new(), general)
            }
        };
        Stepper { model, traits, grid, birth, death, focal, competitor, kmat, general }
    }

    /// Competition pressure on each species at each hazard age, given states.
    fn pressure(&self, states: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = self.grid.n_cells;
        let da = self.grid.da();
        match &self.model.interaction {
            Interaction::Separable { .. } => {
                let loads: Vec<f64> = states
                    .iter()
                    .map(|u| u.iter().zip(&self.competitor).map(|(u, c)| u * c).sum::<f64>() * da)
                    .collect();
                (0..self.traits.len())
                    .map(|s| {
                        let k: f64 = (0..self.traits.len()).map(|r| self.kmat[s][r] * loads[r]).sum();
                        self.focal.iter().map(|f| f * k).collect()
                    })
                    .collect()
            }
            Interaction::General(_) => (0..self.traits.len())
                .map(|s| {
                    let mut p = vec![0.0; n];
                    for (r, u) in states.iter().enumerate() {
                        let m = &self.general[s][r];
                        for i in 0..n {
                            p[i] += m[i * n..(i + 1) * n].iter().zip(u).map(|(a, b)| a * b).sum::<f64>() * da;
                        }
                    }
                    p
                })
                .collect(),
        }
    }

    fn birth_flux(&self, s: usize, u: &[f64]) -> f64 {
        self.birth[s].iter().zip(u).map(|(b, u)| b * u).sum::<f64>() * self.grid.da()
    }

    /// One step from `old` using hazard pressure `p`; returns new states and outflow.
    fn advance(&self, old: &[Vec<f64>], p: &[Vec<f64>]) -> (Vec<Vec<f64>>, f64) {
        let n = self.grid.n_cells;
        let dt = self.grid.da();
        let mut outflow = 0.0;
        let mut new = Vec::with_capacity(old.len());
        for (s, u) in old.iter().enumerate() {
            let mut v = vec![0.0; n];
            outflow += u[n - 1] * dt;
            for i in 1..n {
                v[i] = u[i - 1] * (-dt * (self.death[s][i] + p[s][i])).exp();
            }
            let b_old = self.birth_flux(s, u);
            let rest: f64 = (1..n).map(|i| self.birth[s][i] * v[i]).sum::<f64>() * dt;
            let surv0 = (-dt * (self.death[s][0] + p[s][0])).exp();
            v[0] = 0.5 * (rest + b_old * surv0) / (1.0 - 0.5 * self.birth[s][0] * dt);
            new.push(v);
        }
        (new, outflow)
    }

    fn step(&self, old: &[Vec<f64>]) -> (Vec<Vec<f64>>, f64) {
        let p0 = self.pressure(old);
        let (pred, _) = self.advance(old, &p0);
        let p1 = self.pressure(&pred);
        let mid: Vec<Vec<f64>> =
            p0.iter().zip(&p1).map(|(a, b)| a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect()).collect();
        self.advance(old, &mid)
    }
}

fn check_states(states: &[Vec<f64>], t: f64) -> Result<()> {
    for u in states {
        for v in u {
            if !v.is_finite() || *v < 0.0 {
                return Err(Error::Scheme(format!("invalid density value {v} at t = {t}")));
            }
        }
    }
    Ok(())
}

/// Integrates the coupled system for the given traits over `[0, t_end]`,
/// stopping early at stationarity when `stop_when_stationary`.
pub fn integrate_polymorphic(
    model: &ModelSpec,
    traits: &[Vec<f64>],
    inits: Vec<AgeDensity>,
    t_end: f64,
    opts: &PdeOptions,
    stop_when_stationary: bool,
) -> Result<PdeRun> {
    if traits.len() != inits.len() || traits.is_empty() {
        return Err(Error::invalid("one initial density per trait required"));
    }
    let grid = inits[0].grid;
    if inits.iter().any(|d| d.grid != grid) {
        return Err(Error::invalid("initial densities must share a grid"));
    }
    if inits.iter().flat_map(|d| &d.values).any(|v| !(*v >= 0.0)) {
        return Err(Error::invalid("initial densities must be nonnegative"));
    }
    let stepper = Stepper::new(model, traits.to_vec(), grid);
    let dt = grid.da();
    let steps = (t_end / dt).round() as usize;
    let mut states: Vec<Vec<f64>> = inits.into_iter().map(|d| d.values).collect();
    let mass_of = |u: &Vec<f64>| u.iter().sum::<f64>() * dt;
    let mut run = PdeRun {
        traits: traits.to_vec(),
        times: vec![0.0],
        masses: vec![states.iter().map(mass_of).collect()],
        snapshots: Vec::new(),
        final_states: Vec::new(),
        outflow: 0.0,
        stationary: false,
    };
    let snap = |states: &[Vec<f64>]| -> Vec<AgeDensity> {
        states.iter().map(|u| AgeDensity { grid, values: u.clone() }).collect()
    };
    if opts.record_every > 0.0 {
        run.snapshots.push((0.0, snap(&states)));
    }
    let record_stride = if opts.record_every > 0.0 { ((opts.record_every / dt).round() as usize).max(1) } else { 0 };
    let window_steps = ((opts.window / dt).round() as usize).max(1);
    let mut window: VecDeque<f64> = VecDeque::with_capacity(window_steps + 1);
    for k in 1..=steps {
        let (next, out) = stepper.step(&states);
        states = next;
        run.outflow += out;
        let t = k as f64 * dt;
        if k % 64 == 0 {
            check_states(&states, t)?;
        }
        let masses: Vec<f64> = states.iter().map(mass_of).collect();
        let total: f64 = masses.iter().sum();
        run.times.push(t);
        run.masses.push(masses);
        if record_stride > 0 && k % record_stride == 0 {
            run.snapshots.push((t, snap(&states)));
        }
        if stop_when_stationary {
            window.push_back(total);
            if window.len() > window_steps {
                window.pop_front();
                let (lo, hi) = window.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &m| (l.min(m), h.max(m)));
                if total > 0.0 && (hi - lo) / total < opts.stationarity_tol {
                    run.stationary = true;
                    break;
                }
                if total == 0.0 {
                    run.stationary = true;
                    break;
                }
            }
        }
    }
    check_states(&states, *run.times.last().unwrap_or(&0.0))?;
    run.final_states = snap(&states);
    Ok(run)
}

/// Monomorphic integration over `[0, t_end]`.
pub fn integrate_monomorphic(model: &ModelSpec, x: &[f64], init: AgeDensity, t_end: f64, opts: &PdeOptions) -> Result<PdeRun> {
    integrate_polymorphic(model, &[x.to_vec()], vec![init], t_end, opts, false)
}

/// Dimorphic integration over `[0, t_end]`.
pub fn integrate_dimorphic(
    model: &ModelSpec,
    x: &[f64],
    y: &[f64],
    init_x: AgeDensity,
    init_y: AgeDensity,
    t_end: f64,
    opts: &PdeOptions,
) -> Result<PdeRun> {
    integrate_polymorphic(model, &[x.to_vec(), y.to_vec()], vec![init_x, init_y], t_end, opts, false)
}

/// Runs the monomorphic PDE until the mass is stationary.
pub fn run_to_stationarity(model: &ModelSpec, x: &[f64], init: AgeDensity, opts: &PdeOptions) -> Result<PdeRun> {
    let run = integrate_polymorphic(model, &[x.to_vec()], vec![init], opts.t_max, opts, true)?;
    if !run.stationary {
        let n = run.masses.len();
        let last = run.masses[n - 1][0];
        let before = run.masses[n.saturating_sub(2)][0];
        return Err(Error::NoConvergence {
            iterations: n,
            residual: ((last - before) / last.max(f64::MIN_POSITIVE)).abs(),
        });
    }
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::build_example1;
    use std::sync::Arc;

    fn pure_death(delta: f64) -> ModelSpec {
        let mut m = build_example1();
        m.birth = Arc::new(|_, _| 0.0);
        m.death = Arc::new(move |_, _| delta);
        m.interaction = Interaction::Separable {
            focal: Arc::new(|_| 0.0),
            competitor: Arc::new(|_| 1.0),
            kernel: Arc::new(|_, _| 0.0),
        };
        m
    }

    #[test]
    fn zero_initial_stays_zero() {
        let m = build_example1();
        let g = AgeGrid::new(20.0, 400).unwrap();
        let run = integrate_monomorphic(&m, &[2.0], AgeDensity::zeros(g), 5.0, &PdeOptions::default()).unwrap();
        assert!(run.masses.iter().all(|v| v[0] == 0.0));
    }

    #[test]
    fn pure_death_decays_exponentially() {
        let m = pure_death(0.7);
        let g = AgeGrid::new(30.0, 3000).unwrap();
        let init = AgeDensity::from_fn(g, |a| 5.0 * (-2.0 * a).exp());
        let m0 = init.mass();
        let run = integrate_monomorphic(&m, &[2.0], init, 1.0, &PdeOptions::default()).unwrap();
        let m1 = *run.masses.last().unwrap().first().unwrap();
        assert!((m1 / (m0 * (-0.7f64).exp()) - 1.0).abs() < 1e-4);
    }

    #[test]
    fn symmetric_traits_stay_identical() {
        let m = build_example1();
        let g = AgeGrid::new(20.0, 500).unwrap();
        let init = AgeDensity::from_fn(g, |a| 50.0 * (-a).exp());
        let run = integrate_dimorphic(&m, &[2.0], &[2.0], init.clone(), init, 10.0, &PdeOptions::default()).unwrap();
        assert_eq!(run.final_states[0], run.final_states[1]);
    }
}
