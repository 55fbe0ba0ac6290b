//! Independent oracles for the fitness module: Monte-Carlo simulation of
//! linear age-structured birth–death processes, the Malthusian exponent,
//! and the generation-tree generating-function fixed point.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};

use crate::demography::{Analyzer, Equilibrium};
use crate::error::{Error, Result};
use crate::model::{AgeFn, Interaction};
use crate::quadrature::AgeQuadrature;
use crate::roots::{bisect, bracket_upward};

/// Spacing of the sampling tables.
const TABLE_STEP: f64 = 2e-3;

/// A linear age-structured birth–death process: every individual gives
/// birth at rate `b(a)` and dies at rate `δ(a)` independently of all others.
/// Rates are frozen at their values at `a_max` beyond the quadrature range.
#[derive(Clone)]
pub struct LinearBranchingSpec {
    pub birth: AgeFn,
    pub death: AgeFn,
    quad: AgeQuadrature,
    table: SamplingTable,
}

impl std::fmt::Debug for LinearBranchingSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LinearBranchingSpec").field("a_max", &self.quad.a_max()).finish_non_exhaustive()
    }
}

/// Running integrals of both rates on a fine uniform grid.
#[derive(Clone, Debug)]
struct SamplingTable {
    h: f64,
    cum_b: Vec<f64>,
    cum_d: Vec<f64>,
    b_end: f64,
    d_end: f64,
}

impl SamplingTable {
    fn build(birth: &AgeFn, death: &AgeFn, a_max: f64) -> Self {
        let n = (a_max / TABLE_STEP).ceil().max(1.0) as usize;
        let h = a_max / n as f64;
        let g = 0.5 / 3f64.sqrt();
        let mut cum_b = Vec::with_capacity(n + 1);
        let mut cum_d = Vec::with_capacity(n + 1);
        let (mut sb, mut sd) = (0.0, 0.0);
        cum_b.push(0.0);
        cum_d.push(0.0);
        for i in 0..n {
            let (a1, a2) = ((i as f64 + 0.5 - g) * h, (i as f64 + 0.5 + g) * h);
            sb += 0.5 * h * (birth(a1) + birth(a2));
            sd += 0.5 * h * (death(a1) + death(a2));
            cum_b.push(sb);
            cum_d.push(sd);
        }
        SamplingTable { h, cum_b, cum_d, b_end: birth(a_max), d_end: death(a_max) }
    }

    fn eval(cum: &[f64], end_rate: f64, h: f64, a: f64) -> f64 {
        let n = cum.len() - 1;
        let t = a / h;
        if t >= n as f64 {
            return cum[n] + end_rate * (a - n as f64 * h);
        }
        let i = t as usize;
        let f = t - i as f64;
        cum[i] + f * (cum[i + 1] - cum[i])
    }

    /// Smallest age with running integral `v`; `∞` if never reached.
    fn invert(cum: &[f64], end_rate: f64, h: f64, v: f64) -> f64 {
        let n = cum.len() - 1;
        if v > cum[n] {
            return if end_rate > 0.0 { n as f64 * h + (v - cum[n]) / end_rate } else { f64::INFINITY };
        }
        let i = cum.partition_point(|&c| c < v).max(1);
        let (c0, c1) = (cum[i - 1], cum[i]);
        let f = if c1 > c0 { (v - c0) / (c1 - c0) } else { 0.0 };
        (i as f64 - 1.0 + f) * h
    }

    fn cum_birth(&self, a: f64) -> f64 {
        Self::eval(&self.cum_b, self.b_end, self.h, a)
    }

    fn lifetime(&self, v: f64) -> f64 {
        Self::invert(&self.cum_d, self.d_end, self.h, v)
    }

    fn birth_age(&self, v: f64) -> f64 {
        Self::invert(&self.cum_b, self.b_end, self.h, v)
    }
}

impl LinearBranchingSpec {
    /// Builds the process from rate closures on the age quadrature `quad`.
    pub fn new(birth: AgeFn, death: AgeFn, quad: AgeQuadrature) -> Result<Self> {
        for &a in quad.nodes.iter().chain(std::iter::once(&quad.a_max())) {
            let (b, d) = (birth(a), death(a));
            if !(b >= 0.0 && b.is_finite() && d >= 0.0 && d.is_finite()) {
                return Err(Error::invalid(format!("rates at age {a} must be finite and nonnegative (b = {b}, δ = {d})")));
            }
        }
        if !(death(quad.a_max()) > 0.0) {
            return Err(Error::invalid("death rate must be positive at the truncation age"));
        }
        let table = SamplingTable::build(&birth, &death, quad.a_max());
        Ok(LinearBranchingSpec { birth, death, quad, table })
    }

    /// Constant rates `b`, `δ` on `[0, a_max]`.
    pub fn constant(b: f64, delta: f64, a_max: f64) -> Result<Self> {
        let quad = AgeQuadrature::new(a_max, 1.0, 8)?;
        Self::new(Arc::new(move |_| b), Arc::new(move |_| delta), quad)
    }

    /// A mutant `y` in the frozen environment of the resident equilibrium:
    /// `b(a) = b(y,a)`, `δ(a) = d̂(y,a,x)`. Rates are re-evaluated from the
    /// model closures rather than taken from the fitness tables.
    pub fn frozen(an: &Analyzer, y: &[f64], resident: &Equilibrium) -> Result<Self> {
        if resident.trivial {
            return Err(Error::invalid("frozen environment needs a nontrivial resident"));
        }
        let m = an.model.clone();
        let y = y.to_vec();
        let x = resident.trait_value.0.clone();
        let birth: AgeFn = {
            let (m, y) = (m.clone(), y.clone());
            Arc::new(move |a| m.b(&y, a))
        };
        let death: AgeFn = match &m.interaction {
            Interaction::Separable { focal, kernel, .. } => {
                let s = resident.load.ok_or_else(|| Error::invalid("separable resident without a load"))?;
                let ks = kernel(&y, &x) * s;
                let focal = focal.clone();
                let m = m.clone();
                Arc::new(move |a| m.d(&y, a) + ks * focal(a))
            }
            Interaction::General(u) => {
                let u = u.clone();
                let q = an.quad.clone();
                let dens = resident.density.clone();
                let m = m.clone();
                Arc::new(move |a| {
                    let p: f64 = q
                        .nodes
                        .iter()
                        .zip(&q.weights)
                        .zip(&dens)
                        .map(|((&al, w), mh)| w * u(&y, a, &x, al) * mh)
                        .sum();
                    m.d(&y, a) + p
                })
            }
        };
        Self::new(birth, death, an.quad.clone())
    }

    /// `∫ b(a) e^{−λa − ∫₀ᵃ δ} da`.
    pub fn laplace_reproduction(&self, lambda: f64) -> f64 {
        let q = &self.quad;
        let b = q.sample(|a| (self.birth)(a));
        let d = q.sample(|a| (self.death)(a));
        let dc = q.cumulative(&d);
        let mut s = 0.0;
        for i in 0..q.len() {
            s += q.weights[i] * b[i] * (-lambda * q.nodes[i] - dc[i]).exp();
        }
        let end = q.a_max();
        let r = (self.death)(end) + lambda;
        if r <= 0.0 {
            return f64::INFINITY;
        }
        s + (self.birth)(end) * (-lambda * end - q.integrate(&d)).exp() / r
    }

    /// Mean offspring number `∫ b e^{−∫δ}`.
    pub fn mean_offspring(&self) -> f64 {
        self.laplace_reproduction(0.0)
    }

    /// Generating function of the offspring number and its derivative:
    /// `G(s) = ∫ δ(a) e^{−∫₀ᵃδ} e^{(s−1)∫₀ᵃb} da`.
    pub fn offspring_pgf(&self, s: f64) -> (f64, f64) {
        let q = &self.quad;
        let c = s - 1.0;
        let (mut g, mut dg) = (0.0, 0.0);
        let b = q.sample(|a| (self.birth)(a));
        let d = q.sample(|a| (self.death)(a));
        let bc = q.cumulative(&b);
        let dc = q.cumulative(&d);
        for i in 0..q.len() {
            let t = q.weights[i] * d[i] * (c * bc[i] - dc[i]).exp();
            g += t;
            dg += t * bc[i];
        }
        let end = q.a_max();
        let (bt, dt) = (q.integrate(&b), q.integrate(&d));
        let (be, de) = ((self.birth)(end), (self.death)(end));
        let head = de * (c * bt - dt).exp();
        let r = de - c * be;
        g += head / r;
        dg += head * (bt / r + be / (r * r));
        (g, dg)
    }

    /// Smallest fixed point of the offspring generating function on `[0,1]`,
    /// by Newton's iteration from 0 (monotone for a convex `G`).
    pub fn generation_gw_extinction(&self) -> f64 {
        let mut s = 0.0;
        for _ in 0..100_000 {
            let (g, dg) = self.offspring_pgf(s);
            let h = g - s;
            let dh = dg - 1.0;
            if h <= 0.0 {
                return s;
            }
            if dh >= 0.0 {
                return 1.0;
            }
            let next = s - h / dh;
            if next >= 1.0 {
                return 1.0;
            }
            if next - s <= 1e-15 {
                return next;
            }
            s = next;
        }
        s
    }

    /// Unique `λ > 0` with `∫ b e^{−λa−∫δ} = 1`.
    pub fn malthusian_exponent(&self) -> Result<f64> {
        let r0 = self.mean_offspring();
        if !(r0 > 1.0) {
            return Err(Error::invalid(format!("process is not supercritical (mean offspring {r0})")));
        }
        let f = |l: f64| 1.0 - self.laplace_reproduction(l);
        let (lo, hi) = bracket_upward(f, 0.0, 1.0, 1e6)?;
        bisect(f, lo, hi, 1e-13)
    }

    /// Mean offspring from the sampling table (used as a self-check).
    pub fn table_mean_offspring(&self) -> f64 {
        // ∫ B(a) δ(a) e^{−Δ(a)} da by the table's step
        let t = &self.table;
        let n = t.cum_d.len() - 1;
        let mut s = 0.0;
        for i in 0..n {
            let p = (-t.cum_d[i]).exp() - (-t.cum_d[i + 1]).exp();
            s += p * 0.5 * (t.cum_b[i] + t.cum_b[i + 1]);
        }
        let tail_p = (-t.cum_d[n]).exp();
        s + tail_p * (t.cum_b[n] + t.b_end / t.d_end)
    }

    /// Runs the stochastic process from one newborn; see [`BranchingOptions`].
    pub fn simulate(&self, opts: &BranchingOptions) -> Result<BranchingReport> {
        if opts.replicates == 0 {
            return Err(Error::invalid("at least one replicate is required"));
        }
        let mut extinct = 0usize;
        let mut by_size = 0usize;
        let mut by_time = 0usize;
        let mut rates = Vec::new();
        for rep in 0..opts.replicates {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(rep as u64);
            let out = self.replicate(opts, &mut rng)?;
            match out.fate {
                Fate::Extinct => extinct += 1,
                Fate::SizeThreshold => by_size += 1,
                Fate::TimeLimit => by_time += 1,
            }
            if let Some(r) = out.growth_rate {
                rates.push(r);
            }
        }
        let (lo, hi) = clopper_pearson(extinct, opts.replicates, opts.confidence)?;
        let growth_rate = (!rates.is_empty()).then(|| rates.iter().sum::<f64>() / rates.len() as f64);
        Ok(BranchingReport {
            replicates: opts.replicates,
            extinct,
            survived_by_size: by_size,
            survived_by_time: by_time,
            extinction_frequency: extinct as f64 / opts.replicates as f64,
            ci_low: lo,
            ci_high: hi,
            confidence: opts.confidence,
            growth_rate,
            growth_samples: rates.len(),
        })
    }

    fn replicate(&self, opts: &BranchingOptions, rng: &mut ChaCha8Rng) -> Result<Replicate> {
        let t = &self.table;
        let mut heap: BinaryHeap<Event> = BinaryHeap::new();
        heap.push(Event { time: 0.0, birth: true });
        let mut alive = 0usize;
        let mut next_level = opts.growth_from.max(1);
        let mut hits: Vec<(f64, f64)> = Vec::new();
        while let Some(ev) = heap.pop() {
            if ev.time > opts.t_max {
                return Ok(Replicate { fate: Fate::TimeLimit, growth_rate: growth_slope(&hits) });
            }
            if !ev.birth {
                alive -= 1;
                if alive == 0 {
                    return Ok(Replicate { fate: Fate::Extinct, growth_rate: None });
                }
                continue;
            }
            alive += 1;
            if alive >= next_level {
                hits.push((ev.time, (alive as f64).ln()));
                next_level *= 2;
            }
            if alive >= opts.survival_size {
                return Ok(Replicate { fate: Fate::SizeThreshold, growth_rate: growth_slope(&hits) });
            }
            let horizon = opts.t_max - ev.time;
            let v: f64 = -(1.0 - rng.random::<f64>()).ln();
            let life = t.lifetime(v);
            let span = life.min(horizon);
            let mean = t.cum_birth(span);
            if !mean.is_finite() {
                return Err(Error::NonFinite("expected offspring number".into()));
            }
            if mean > 0.0 {
                let k = Poisson::new(mean).map_err(|e| Error::Scheme(e.to_string()))?.sample(rng) as u64;
                for _ in 0..k {
                    let a = t.birth_age(rng.random::<f64>() * mean);
                    heap.push(Event { time: ev.time + a, birth: true });
                }
            }
            // deaths past t_max are queued too: popping one ends the run as
            // a time-limit survival rather than draining the heap
            heap.push(Event { time: ev.time + life, birth: false });
        }
        Ok(Replicate { fate: Fate::Extinct, growth_rate: None })
    }
}

/// Least-squares slope of log-size against hitting time.
fn growth_slope(hits: &[(f64, f64)]) -> Option<f64> {
    if hits.len() < 3 {
        return None;
    }
    let n = hits.len() as f64;
    let mt = hits.iter().map(|h| h.0).sum::<f64>() / n;
    let ml = hits.iter().map(|h| h.1).sum::<f64>() / n;
    let sxy: f64 = hits.iter().map(|h| (h.0 - mt) * (h.1 - ml)).sum();
    let sxx: f64 = hits.iter().map(|h| (h.0 - mt).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[derive(Clone, Copy, Debug)]
struct Event {
    time: f64,
    birth: bool,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Event {}
impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Event {
    // min-heap on time; deaths before births at equal times
    fn cmp(&self, other: &Self) -> Ordering {
        other.time.total_cmp(&self.time).then(other.birth.cmp(&self.birth))
    }
}

enum Fate {
    Extinct,
    SizeThreshold,
    TimeLimit,
}

struct Replicate {
    fate: Fate,
    growth_rate: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BranchingOptions {
    pub replicates: usize,
    pub seed: u64,
    /// Survival is declared at this many living individuals...
    pub survival_size: usize,
    /// ...or when the lineage is still alive at this time.
    pub t_max: f64,
    pub confidence: f64,
    /// Smallest population size used in the growth-rate regression.
    pub growth_from: usize,
}

impl Default for BranchingOptions {
    fn default() -> Self {
        BranchingOptions { replicates: 10_000, seed: 1, survival_size: 10_000, t_max: 50.0, confidence: 0.99, growth_from: 64 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BranchingReport {
    pub replicates: usize,
    pub extinct: usize,
    pub survived_by_size: usize,
    pub survived_by_time: usize,
    pub extinction_frequency: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub confidence: f64,
    /// Mean over surviving replicates of the fitted `d log Z_t / dt`.
    pub growth_rate: Option<f64>,
    pub growth_samples: usize,
}

impl BranchingReport {
    pub fn covers(&self, p: f64) -> bool {
        self.ci_low <= p && p <= self.ci_high
    }
}

/// Exact (Clopper–Pearson) two-sided interval for a binomial proportion.
pub fn clopper_pearson(successes: usize, trials: usize, confidence: f64) -> Result<(f64, f64)> {
    if trials == 0 || successes > trials || !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::invalid("invalid binomial interval arguments"));
    }
    let alpha = 1.0 - confidence;
    let (k, n) = (successes as f64, trials as f64);
    let lo = if successes == 0 {
        0.0
    } else {
        Beta::new(k, n - k + 1.0).map_err(|e| Error::invalid(e.to_string()))?.inverse_cdf(alpha / 2.0)
    };
    let hi = if successes == trials {
        1.0
    } else {
        Beta::new(k + 1.0, n - k).map_err(|e| Error::invalid(e.to_string()))?.inverse_cdf(1.0 - alpha / 2.0)
    };
    Ok((lo, hi))
}

/// The three estimates of the extinction probability of `y` in the
/// equilibrium of a resident.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OracleTriangle {
    pub resident: f64,
    pub mutant: f64,
    pub f_root: f64,
    pub g_fixed_point: f64,
    pub monte_carlo: BranchingReport,
}

impl OracleTriangle {
    pub fn deterministic_gap(&self) -> f64 {
        (self.f_root - self.g_fixed_point).abs()
    }

    pub fn consistent(&self, tol: f64) -> bool {
        self.deterministic_gap() <= tol && self.monte_carlo.covers(self.f_root) && self.monte_carlo.covers(self.g_fixed_point)
    }
}

/// Computes the extinction probability of `y` against resident `x` by the
/// fitness root, the generating-function fixed point and simulation.
pub fn oracle_triangle(an: &Analyzer, x: f64, y: f64, opts: &BranchingOptions) -> Result<OracleTriangle> {
    let eq = an.equilibrium(&crate::TraitValue::scalar(x))?;
    let f_root = crate::fitness::extinction_probability(an, &eq, &crate::TraitValue::scalar(y))?.z0;
    let spec = LinearBranchingSpec::frozen(an, &[y], &eq)?;
    let g_fixed_point = spec.generation_gw_extinction();
    let monte_carlo = spec.simulate(opts)?;
    Ok(OracleTriangle { resident: x, mutant: y, f_root, g_fixed_point, monte_carlo })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::build_example1;
    use crate::TraitValue;

    fn quick() -> BranchingOptions {
        BranchingOptions { replicates: 2000, survival_size: 300, ..Default::default() }
    }

    #[test]
    fn long_lived_lineages_hit_the_time_limit() {
        // mean lifetime 100 ≫ t_max: the founder is almost surely alive at t_max
        let spec = LinearBranchingSpec::constant(1e-3, 0.01, 2000.0).unwrap();
        let r = spec.simulate(&BranchingOptions { replicates: 200, t_max: 1.0, ..Default::default() }).unwrap();
        assert!(r.survived_by_time >= 195, "{r:?}");
        assert_eq!(r.extinct + r.survived_by_time + r.survived_by_size, 200);
    }

    #[test]
    fn constant_rates() {
        let spec = LinearBranchingSpec::constant(2.0, 1.0, 20.0).unwrap();
        assert!((spec.generation_gw_extinction() - 0.5).abs() < 1e-12);
        assert!((spec.malthusian_exponent().unwrap() - 1.0).abs() < 1e-10);
        assert!((spec.table_mean_offspring() - 2.0).abs() < 1e-6);
        let r = spec.simulate(&quick()).unwrap();
        assert!(r.covers(0.5), "{r:?}");
    }

    #[test]
    fn no_births_always_extinct() {
        let spec = LinearBranchingSpec::constant(0.0, 1.0, 10.0).unwrap();
        assert!((spec.generation_gw_extinction() - 1.0).abs() < 1e-12);
        assert_eq!(spec.simulate(&quick()).unwrap().extinction_frequency, 1.0);
        assert!(spec.malthusian_exponent().is_err());
    }

    #[test]
    fn clopper_pearson_reference() {
        // reference values for k = 5, n = 20 at 95%
        let (lo, hi) = clopper_pearson(5, 20, 0.95).unwrap();
        assert!((lo - 0.0865715).abs() < 1e-6 && (hi - 0.4910459).abs() < 1e-6, "{lo} {hi}");
        assert_eq!(clopper_pearson(0, 10, 0.99).unwrap().0, 0.0);
    }

    #[test]
    fn example1_pair_agrees() {
        let an = Analyzer::new(&build_example1()).unwrap();
        let eq = an.equilibrium(&TraitValue::scalar(1.0)).unwrap();
        let spec = LinearBranchingSpec::frozen(&an, &[2.0], &eq).unwrap();
        let z = crate::fitness::extinction_probability(&an, &eq, &TraitValue::scalar(2.0)).unwrap().z0;
        assert!((spec.generation_gw_extinction() - z).abs() < 1e-10);
        // b = 4e^{-a}, δ = 1.25 + 0.002 M̂(1): λ solves 4 = 1 + λ + δ
        let delta = 0.25 + 0.002 * (3.0 - 1.25) / 0.003;
        assert!((spec.malthusian_exponent().unwrap() - (3.0 - delta)).abs() < 1e-9);
    }
}
