//! The canonical equation of adaptive dynamics for age-structured
//! populations, and an adaptive Dormand–Prince integrator for it.
//!
//! ```text
//! dx/dt = p · (∫ b m̂) · ( [∂₁g]₋ ∫_{h>0} h² k(x,h) dh − [∂₁g]₊ ∫_{h<0} h² k(x,h) dh )
//! ```

use serde::{Deserialize, Serialize};

use crate::demography::closed_form::{example1_gradient_printed, example1_mass};
use crate::demography::Analyzer;
use crate::error::{Error, Result};
use crate::fitness::fitness_gradient_at;
use crate::model::TraitValue;

/// Right-hand side of the canonical equation at `x`.
pub fn canonical_rhs(an: &Analyzer, x: f64) -> Result<f64> {
    if an.model.dim() != 1 {
        return Err(Error::Dimension { expected: 1, found: an.model.dim() });
    }
    let eq = an.equilibrium(&TraitValue::scalar(x))?;
    if eq.trivial {
        return Err(Error::NotViable { trait_value: vec![x], r0: an.net_reproduction_rate(&[x]) });
    }
    let grad = fitness_gradient_at(an, &eq)?;
    let (plus, minus) = an.model.kernel.half_moments(x, &an.model.trait_box);
    Ok(an.model.mutation_prob * eq.birth_flux() * assemble(grad, plus, minus))
}

fn assemble(grad: f64, plus: f64, minus: f64) -> f64 {
    (-grad).max(0.0) * plus - grad.max(0.0) * minus
}

/// Example 1 right-hand side from the explicit mass and gradient.
pub fn example1_canonical_rhs(x: f64, p: f64, plus: f64, minus: f64) -> f64 {
    let m0 = example1_mass(x, 0.001, 0.25) * (x * (4.0 - x) - 1.0);
    p * m0 * assemble(-example1_gradient_printed(x), plus, minus)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h0: f64,
    pub h_max: f64,
    /// Integration stops once `|dx/dt|` falls below this...
    pub rest_tol: f64,
    /// ...or once the Newton distance `|f/f'|` to the rest point (with `f'`
    /// from the last two accepted states) falls below this.
    pub rest_dx: f64,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions { rtol: 1e-9, atol: 1e-12, h0: 1e-4, h_max: 0.01, rest_tol: 1e-10, rest_dx: 1e-8 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    EndTime,
    RestPoint,
    LeftViability,
}

/// A solution of `dx/dt = f(x)` with dense output by cubic Hermite
/// interpolation between accepted steps.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    pub dxdt: Vec<f64>,
    pub stop: StopReason,
    pub rest_point: Option<f64>,
}

impl Trajectory {
    /// State at time `t`; constant after the last recorded time.
    pub fn at(&self, t: f64) -> f64 {
        let n = self.t.len();
        if t <= self.t[0] {
            return self.x[0];
        }
        if t >= self.t[n - 1] {
            return self.x[n - 1];
        }
        let i = self.t.partition_point(|&s| s <= t) - 1;
        let h = self.t[i + 1] - self.t[i];
        let s = (t - self.t[i]) / h;
        let (h00, h10, h01, h11) =
            (2.0 * s.powi(3) - 3.0 * s * s + 1.0, s.powi(3) - 2.0 * s * s + s, -2.0 * s.powi(3) + 3.0 * s * s, s.powi(3) - s * s);
        h00 * self.x[i] + h10 * h * self.dxdt[i] + h01 * self.x[i + 1] + h11 * h * self.dxdt[i + 1]
    }

    pub fn final_state(&self) -> f64 {
        *self.x.last().expect("nonempty trajectory")
    }
}

/// Dormand–Prince 5(4) for a scalar autonomous ODE. `f` returning an error
/// (e.g. outside the viability window) stops the integration.
pub fn integrate_ode(f: impl Fn(f64) -> Result<f64>, x0: f64, t_end: f64, opts: &OdeOptions) -> Result<Trajectory> {
    const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
    const A: [[f64; 6]; 7] = [
        [0.0; 6],
        [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
    const B4: [f64; 7] =
        [5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0, -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0];
    let _ = C;
    let mut t = 0.0;
    let mut x = x0;
    let mut fx = f(x)?;
    let mut out = Trajectory { t: vec![0.0], x: vec![x], dxdt: vec![fx], stop: StopReason::EndTime, rest_point: None };
    let mut h = opts.h0.min(opts.h_max);
    while t < t_end {
        if fx.abs() < opts.rest_tol {
            out.stop = StopReason::RestPoint;
            out.rest_point = Some(x);
            return Ok(out);
        }
        let n = out.x.len();
        if n >= 2 && out.x[n - 1] != out.x[n - 2] {
            let slope = (out.dxdt[n - 1] - out.dxdt[n - 2]) / (out.x[n - 1] - out.x[n - 2]);
            if slope < 0.0 && (fx / slope).abs() < opts.rest_dx {
                out.stop = StopReason::RestPoint;
                out.rest_point = Some(x - fx / slope);
                return Ok(out);
            }
        }
        h = h.min(t_end - t);
        let mut k = [0.0; 7];
        k[0] = fx;
        let mut failed = false;
        for s in 1..7 {
            let xi = x + h * (0..s).map(|j| A[s][j] * k[j]).sum::<f64>();
            match f(xi) {
                Ok(v) => k[s] = v,
                Err(_) => {
                    failed = true;
                    break;
                }
            }
        }
        if failed {
            h *= 0.25;
            if h < 1e-14 {
                out.stop = StopReason::LeftViability;
                return Ok(out);
            }
            continue;
        }
        let x5 = x + h * (0..7).map(|j| B5[j] * k[j]).sum::<f64>();
        let x4 = x + h * (0..7).map(|j| B4[j] * k[j]).sum::<f64>();
        let sc = opts.atol + opts.rtol * x.abs().max(x5.abs());
        let err = ((x5 - x4) / sc).abs();
        if err <= 1.0 {
            t += h;
            x = x5;
            fx = k[6];
            out.t.push(t);
            out.x.push(x);
            out.dxdt.push(fx);
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h = (h * factor).min(opts.h_max);
    }
    Ok(out)
}

/// Integrates the canonical equation from `x0` up to `t_end`.
pub fn integrate_canonical(an: &Analyzer, x0: f64, t_end: f64, opts: &OdeOptions) -> Result<Trajectory> {
    let r0 = an.net_reproduction_rate(&[x0]);
    if !(r0 > 1.0) {
        return Err(Error::NotViable { trait_value: vec![x0], r0 });
    }
    integrate_ode(|x| canonical_rhs(an, x), x0, t_end, opts)
}

/// Sup-distance between the mean of ε-rescaled TSS paths and the canonical
/// trajectory, for one ε.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConsistencyRow {
    pub epsilon: f64,
    pub paths: usize,
    pub sup_distance: f64,
    pub mean_path: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub x0: f64,
    pub times: Vec<f64>,
    pub ode: Vec<f64>,
    pub rows: Vec<ConsistencyRow>,
}

impl ConsistencyReport {
    /// Whether the sup-distance decreases strictly along the ε sequence
    /// (ordered from large to small ε).
    pub fn monotone(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].sup_distance < w[0].sup_distance)
    }
}

/// Runs `paths` ε-TSS paths per ε from `x0` over `[0, horizon]` and
/// compares their mean with the canonical trajectory on `grid` points.
pub fn tss_consistency(
    model: &crate::ModelSpec,
    x0: f64,
    epsilons: &[f64],
    paths: usize,
    horizon: f64,
    grid: usize,
    seed: u64,
) -> Result<ConsistencyReport> {
    use crate::tss::{mean_path, simulate_tss, TssOptions};
    if paths == 0 || grid < 2 || !(horizon > 0.0) {
        return Err(Error::invalid("need paths, at least two grid points and a positive horizon"));
    }
    let an = Analyzer::new(model)?;
    let tr = integrate_canonical(&an, x0, horizon, &OdeOptions::default())?;
    let times: Vec<f64> = (0..grid).map(|k| horizon * k as f64 / (grid - 1) as f64).collect();
    let ode: Vec<f64> = times.iter().map(|&t| tr.at(t)).collect();
    let mut rows = Vec::new();
    for &eps in epsilons {
        let runs = (0..paths)
            .map(|p| {
                let opts = TssOptions { horizon, seed: seed.wrapping_add(p as u64), epsilon: Some(eps), ..Default::default() };
                simulate_tss(model, &TraitValue::scalar(x0), &opts)
            })
            .collect::<Result<Vec<_>>>()?;
        let mean = mean_path(&runs, &times);
        let sup_distance = mean.iter().zip(&ode).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        rows.push(ConsistencyRow { epsilon: eps, paths, sup_distance, mean_path: mean });
    }
    Ok(ConsistencyReport { x0, times, ode, rows })
}
