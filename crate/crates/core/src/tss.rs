//! The age-structured trait substitution sequence: a jump process on
//! monomorphic equilibria. A resident `x` produces mutants at rate
//! `p·∫b m̂`, displaced by `h ~ k(x,·)`, which invade with probability
//! `1 − z₀(x+h, x)`; an invasion replaces the resident by the mutant.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::demography::closed_form::closed_form_equilibrium;
use crate::demography::{check_non_coexistence_logistic, Analyzer, CoexistenceDiagnosis, Equilibrium};
use crate::error::{Error, Result};
use crate::fitness::{extinction_probability, FitnessFunction};
use crate::model::{ModelSpec, MutationKernel, TraitValue};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TssOptions {
    /// Evolutionary time horizon.
    pub horizon: f64,
    pub seed: u64,
    /// Mutation-size scaling `ε`: kernel `k(h/ε)/ε` and clock `1/ε²`.
    pub epsilon: Option<f64>,
    /// Multiplies the thinning bound (≥ 1); does not change the path law.
    pub bound_factor: f64,
    /// Resolution of the equilibrium memo for models without closed forms.
    pub memo_resolution: f64,
    pub max_jumps: usize,
}

impl Default for TssOptions {
    fn default() -> Self {
        TssOptions { horizon: 100.0, seed: 1, epsilon: None, bound_factor: 1.0, memo_resolution: 1e-3, max_jumps: 1_000_000 }
    }
}

/// One state of the path, entered at `time`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TssJump {
    pub time: f64,
    pub trait_value: TraitValue,
    pub mass: f64,
    pub birth_flux: f64,
    /// Invasion probability `1 − z₀` of the mutant that produced this state.
    pub invasion_probability: f64,
    /// Set when invasion-implies-fixation could not be confirmed for the
    /// substitution leading here (coexistence of the two traits possible).
    pub assumption_violated: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TssPath {
    pub model: String,
    pub seed: u64,
    pub epsilon: Option<f64>,
    pub horizon: f64,
    pub jumps: Vec<TssJump>,
    pub candidates: u64,
}

impl TssPath {
    /// Scalar trait value at evolutionary time `t`.
    pub fn trait_at(&self, t: f64) -> f64 {
        let i = self.jumps.partition_point(|j| j.time <= t).max(1) - 1;
        self.jumps[i].trait_value.0[0]
    }

    pub fn terminal_trait(&self) -> &TraitValue {
        &self.jumps.last().expect("path has an initial state").trait_value
    }

    pub fn times(&self) -> Vec<f64> {
        self.jumps.iter().map(|j| j.time).collect()
    }
}

/// Equilibrium memo: exact for closed-form models, lattice-snapped otherwise.
pub struct EquilibriumCache<'a> {
    an: &'a Analyzer,
    resolution: f64,
    closed_form: bool,
    memo: HashMap<Vec<i64>, Equilibrium>,
}

impl<'a> EquilibriumCache<'a> {
    pub fn new(an: &'a Analyzer, resolution: f64) -> Self {
        let closed_form = an.model.dim() == 1 && closed_form_equilibrium(&an.model, 2.0).is_some();
        EquilibriumCache { an, resolution, closed_form, memo: HashMap::new() }
    }

    pub fn get(&mut self, x: &TraitValue) -> Result<Equilibrium> {
        if self.closed_form {
            return self.an.equilibrium(x);
        }
        let key: Vec<i64> = x.0.iter().map(|v| (v / self.resolution).round() as i64).collect();
        if let Some(eq) = self.memo.get(&key) {
            let mut eq = eq.clone();
            eq.trait_value = x.clone();
            return Ok(eq);
        }
        let snapped = TraitValue(key.iter().map(|&k| k as f64 * self.resolution).collect());
        let snapped = if self.an.model.trait_box.contains(&snapped.0) { snapped } else { x.clone() };
        let mut eq = self.an.equilibrium(&snapped)?;
        self.memo.insert(key, eq.clone());
        eq.trait_value = x.clone();
        Ok(eq)
    }
}

/// `p·(∫b m̂)·(1 − z₀(x+h, x))·k(x, h)`.
pub fn tss_jump_rate_density(an: &Analyzer, resident: &Equilibrium, h: &[f64]) -> Result<f64> {
    if resident.trivial {
        return Err(Error::invalid("TSS state needs a viable resident"));
    }
    let x = resident.trait_value.as_slice();
    let y: Vec<f64> = x.iter().zip(h).map(|(a, b)| a + b).collect();
    let k = an.model.kernel.density(x, h, &an.model.trait_box);
    if k == 0.0 {
        return Ok(0.0);
    }
    let z0 = extinction_probability(an, resident, &TraitValue(y))?.z0;
    Ok(an.model.mutation_prob * resident.birth_flux() * (1.0 - z0) * k)
}

fn substitution_flag(an: &Analyzer, old: &Equilibrium, new: &Equilibrium) -> Result<bool> {
    let (x, y) = (&old.trait_value, &new.trait_value);
    if x.dim() == 1 {
        if let Ok(d) = check_non_coexistence_logistic(an, x.0[0], y.0[0]) {
            return Ok(d != CoexistenceDiagnosis::YFixes);
        }
    }
    // age-dependent interactions: flag mutual invasibility
    let back = FitnessFunction::new(an, x.as_slice(), new)?.invasion_integral();
    Ok(back > 1.0)
}

/// Simulates one path of the (optionally ε-rescaled) TSS from `x0`.
pub fn simulate_tss(model: &ModelSpec, x0: &TraitValue, opts: &TssOptions) -> Result<TssPath> {
    if !(opts.bound_factor >= 1.0) {
        return Err(Error::invalid("bound_factor must be at least 1"));
    }
    let (model, clock) = match opts.epsilon {
        Some(e) if e > 0.0 => (model.with_scaled_kernel(e), 1.0 / (e * e)),
        Some(e) => return Err(Error::invalid(format!("epsilon must be positive, got {e}"))),
        None => (model.clone(), 1.0),
    };
    let an = Analyzer::new(&model)?;
    let r0 = an.net_reproduction_rate(x0.as_slice());
    if !(r0 > 1.0) {
        return Err(Error::NotViable { trait_value: x0.0.clone(), r0 });
    }
    let mut cache = EquilibriumCache::new(&an, opts.memo_resolution);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut eq = cache.get(x0)?;
    let mut path = TssPath {
        model: model.name.clone(),
        seed: opts.seed,
        epsilon: opts.epsilon,
        horizon: opts.horizon,
        jumps: vec![TssJump {
            time: 0.0,
            trait_value: x0.clone(),
            mass: eq.mass,
            birth_flux: eq.birth_flux(),
            invasion_probability: f64::NAN,
            assumption_violated: false,
        }],
        candidates: 0,
    };
    if matches!(model.kernel, MutationKernel::Degenerate) || model.mutation_prob == 0.0 {
        return Ok(path);
    }
    let b_max = model.bounds.b_max;
    let mut t = 0.0;
    let mut h = vec![0.0; x0.dim()];
    loop {
        let bound = opts.bound_factor * clock * model.mutation_prob * b_max * eq.mass;
        let flux_ratio = eq.birth_flux() / (b_max * eq.mass);
        if flux_ratio > 1.0 + 1e-9 {
            return Err(Error::Assertion(format!("birth flux exceeds b_max·M̂ at {}", eq.trait_value)));
        }
        t += Exp::new(bound).map_err(|e| Error::Scheme(e.to_string()))?.sample(&mut rng);
        if t > opts.horizon {
            break;
        }
        path.candidates += 1;
        let x = eq.trait_value.clone();
        model.kernel.sample_into(x.as_slice(), &model.trait_box, &mut rng, &mut h);
        let y = TraitValue(x.0.iter().zip(&h).map(|(a, b)| a + b).collect());
        // cheap rejection before solving for the extinction probability
        let u: f64 = rng.random::<f64>() * opts.bound_factor;
        if u >= flux_ratio {
            continue;
        }
        let f = FitnessFunction::new(&an, y.as_slice(), &eq)?;
        // decide against the convexity bounds first; the root only when needed
        let (_, upper) = f.survival_bounds();
        if u >= flux_ratio * upper {
            continue;
        }
        let invade = 1.0 - f.root()?.min(1.0);
        if u >= flux_ratio * invade {
            continue;
        }
        if !(invade > 0.0) {
            return Err(Error::Assertion("accepted a mutant with zero invasion probability".into()));
        }
        let new_eq = cache.get(&y)?;
        if new_eq.trivial {
            return Err(Error::NotViable { trait_value: y.0.clone(), r0: an.net_reproduction_rate(y.as_slice()) });
        }
        let flag = substitution_flag(&an, &eq, &new_eq)?;
        path.jumps.push(TssJump {
            time: t,
            trait_value: y,
            mass: new_eq.mass,
            birth_flux: new_eq.birth_flux(),
            invasion_probability: invade,
            assumption_violated: flag,
        });
        eq = new_eq;
        if path.jumps.len() > opts.max_jumps {
            break;
        }
    }
    Ok(path)
}

/// Checks that the Example-1 intervals between `X_k` and `f(X_k)` are
/// strictly nested along the path.
pub fn nested_intervals_hold(path: &TssPath, f: impl Fn(f64) -> f64) -> bool {
    let iv: Vec<(f64, f64)> = path
        .jumps
        .iter()
        .map(|j| {
            let x = j.trait_value.0[0];
            let fx = f(x);
            (x.min(fx), x.max(fx))
        })
        .collect();
    iv.windows(2).all(|w| {
        let ((a0, b0), (a1, b1)) = (w[0], w[1]);
        a0 <= a1 && b1 <= b0 && (a0 < a1 || b1 < b0)
    })
}

/// Mean of scalar paths on a time grid.
pub fn mean_path(paths: &[TssPath], times: &[f64]) -> Vec<f64> {
    times.iter().map(|&t| paths.iter().map(|p| p.trait_at(t)).sum::<f64>() / paths.len() as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demography::closed_form::{example1_ess, example1_mass, invasion_boundary_example1};
    use crate::models::*;

    #[test]
    fn degenerate_kernel_never_jumps() {
        let mut m = build_example1();
        m.kernel = MutationKernel::Degenerate;
        let p = simulate_tss(&m, &TraitValue::scalar(1.0), &TssOptions::default()).unwrap();
        assert_eq!(p.jumps.len(), 1);
    }

    #[test]
    fn rate_density_vanishes_at_zero_displacement() {
        let an = Analyzer::new(&build_example1()).unwrap();
        let eq = an.equilibrium(&TraitValue::scalar(1.0)).unwrap();
        assert_eq!(tss_jump_rate_density(&an, &eq, &[0.0]).unwrap(), 0.0);
        assert!(tss_jump_rate_density(&an, &eq, &[0.3]).unwrap() > 0.0);
        assert_eq!(tss_jump_rate_density(&an, &eq, &[-0.3]).unwrap(), 0.0);
    }

    #[test]
    fn example1_path_climbs_to_ess() {
        let m = build_example1();
        let p = simulate_tss(&m, &TraitValue::scalar(0.552), &TssOptions { horizon: 20.0, seed: 3, ..Default::default() })
            .unwrap();
        assert!(p.jumps.len() > 2);
        assert!(nested_intervals_hold(&p, |x| invasion_boundary_example1(x).unwrap()));
        for j in &p.jumps {
            let x = j.trait_value.0[0];
            assert!((j.mass - example1_mass(x, 0.001, 0.25)).abs() < 1e-9 * j.mass);
            assert!(!j.assumption_violated);
        }
        assert!((p.trait_at(20.0) - example1_ess()).abs() < 0.3);
    }
}
