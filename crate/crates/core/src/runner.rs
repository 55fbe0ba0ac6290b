//! Configuration-driven experiments: one JSON file selects a model, an
//! operation and its settings; the run writes CSV tables, SVG plots and a
//! manifest into an output directory. Figure presets are ready-made
//! configurations at desk scale.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::canonical::{integrate_canonical, tss_consistency, ConsistencyReport, OdeOptions};
use crate::demography::closed_form::{invasion_boundary_example1, invasion_boundary_no_senescence};
use crate::demography::pde::{integrate_monomorphic, AgeDensity, AgeGrid, PdeOptions};
use crate::demography::Analyzer;
use crate::error::{Error, Result};
use crate::fitness::{
    classify_singularity, extinction_probability, fitness_gradient_generic, pip, PipCell, PipGrid, PipSpec,
};
use crate::ibm::{simulate, IbmOptions, IbmRun, PopulationState};
use crate::model::{ModelFamily, ModelSpec, TraitValue};
use crate::models::ModelId;
use crate::output::{num, ArtifactDir, Manifest};
use crate::plot::{ramp, Plot, PALETTE};
use crate::stability::{stability_winding, JordanContour};
use crate::stats::{dip_test, kde_modes, silverman_bandwidth};
use crate::tss::{simulate_tss, TssOptions, TssPath};
use crate::verify::{oracle_triangle, BranchingOptions, OracleTriangle};

/// Top-level experiment description.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelId,
    pub operation: Operation,
    /// Relative paths are resolved against the output root.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Worker threads for replicate-parallel steps.
    #[serde(default = "default_jobs")]
    pub jobs: usize,
}

fn default_seed() -> u64 {
    1
}

fn default_jobs() -> usize {
    1
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum Operation {
    Ibm(IbmSettings),
    Pde(PdeSettings),
    Equilibrium(EquilibriumSettings),
    Fitness(FitnessSettings),
    Pip(PipSettings),
    Tss(TssSettings),
    Canonical(CanonicalSettings),
    Stability(StabilitySettings),
    Verify(VerifySettings),
}

pub const OPERATION_NAMES: [&str; 9] =
    ["ibm", "pde", "equilibrium", "fitness", "pip", "tss", "canonical", "stability", "verify"];

impl Operation {
    pub fn name(&self) -> &'static str {
        match self {
            Operation::Ibm(_) => "ibm",
            Operation::Pde(_) => "pde",
            Operation::Equilibrium(_) => "equilibrium",
            Operation::Fitness(_) => "fitness",
            Operation::Pip(_) => "pip",
            Operation::Tss(_) => "tss",
            Operation::Canonical(_) => "canonical",
            Operation::Stability(_) => "stability",
            Operation::Verify(_) => "verify",
        }
    }

    /// The operation with default settings.
    pub fn default_for(name: &str) -> Result<Operation> {
        Ok(match name {
            "ibm" => Operation::Ibm(Default::default()),
            "pde" => Operation::Pde(Default::default()),
            "equilibrium" => Operation::Equilibrium(Default::default()),
            "fitness" => Operation::Fitness(Default::default()),
            "pip" => Operation::Pip(Default::default()),
            "tss" => Operation::Tss(Default::default()),
            "canonical" => Operation::Canonical(Default::default()),
            "stability" => Operation::Stability(Default::default()),
            "verify" => Operation::Verify(Default::default()),
            other => return Err(Error::Config(format!("unknown operation '{other}'; known: {}", OPERATION_NAMES.join(", ")))),
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialPopulation {
    pub count: usize,
    /// Traits uniform on `[trait_lo, trait_hi]` (equal bounds: monomorphic).
    pub trait_lo: f64,
    pub trait_hi: f64,
    /// Ages exponential with this rate.
    pub age_rate: f64,
}

impl Default for InitialPopulation {
    fn default() -> Self {
        InitialPopulation { count: 2000, trait_lo: 0.0, trait_hi: 1.3, age_rate: 2.0 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BimodalitySettings {
    /// The two highest density modes must lie on either side of this.
    pub split: f64,
    pub significance: f64,
    pub dip_replicates: usize,
}

impl Default for BimodalitySettings {
    fn default() -> Self {
        BimodalitySettings { split: 3.2, significance: 0.05, dip_replicates: 200 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IbmSettings {
    pub horizon: f64,
    pub scale_n: f64,
    pub mutation_scale: f64,
    pub initial: InitialPopulation,
    /// Independent runs with seeds `seed, seed+1, …`.
    pub replicates: usize,
    pub record_every: f64,
    /// Trait clouds are stored every this many time units.
    pub snapshot_every: f64,
    pub max_population: usize,
    pub record_events: bool,
    pub age_bin: f64,
    pub bimodality: Option<BimodalitySettings>,
}

impl Default for IbmSettings {
    fn default() -> Self {
        IbmSettings {
            horizon: 50.0,
            scale_n: 1.0,
            mutation_scale: 1.0,
            initial: InitialPopulation::default(),
            replicates: 1,
            record_every: 0.5,
            snapshot_every: 1.0,
            max_population: 1_000_000,
            record_events: false,
            age_bin: 0.25,
            bimodality: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PdeSettings {
    pub trait_value: f64,
    pub horizon: f64,
    pub cells: usize,
    pub a_max: Option<f64>,
    /// Initial density `init_mass·r·e^{−r a}` with `r = init_age_rate`.
    pub init_mass: f64,
    pub init_age_rate: f64,
    pub record_every: f64,
}

impl Default for PdeSettings {
    fn default() -> Self {
        PdeSettings { trait_value: 2.0, horizon: 30.0, cells: 3000, a_max: None, init_mass: 1.0, init_age_rate: 1.0, record_every: 0.1 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EquilibriumSettings {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
    /// Age-density strips are written for this many evenly spaced traits.
    pub strips: usize,
}

impl Default for EquilibriumSettings {
    fn default() -> Self {
        EquilibriumSettings { lo: 0.02, hi: 3.98, points: 199, strips: 8 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitnessSettings {
    /// `n × n` grid of cell centres for the extinction probability.
    pub n: usize,
    pub lo: f64,
    pub hi: f64,
    /// Gradient and singular-point scan resolution.
    pub gradient_points: usize,
}

impl Default for FitnessSettings {
    fn default() -> Self {
        FitnessSettings { n: 80, lo: 0.0, hi: 4.0, gradient_points: 200 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipSettings {
    pub n: usize,
    pub lo: f64,
    pub hi: f64,
}

impl Default for PipSettings {
    fn default() -> Self {
        PipSettings { n: 200, lo: 0.0, hi: 4.0 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TssSettings {
    pub x0: f64,
    pub horizon: f64,
    pub paths: usize,
    pub epsilon: Option<f64>,
    pub bound_factor: f64,
    /// Age profiles `m̂(x,·)` of the successive states of the first path.
    pub strips: bool,
}

impl Default for TssSettings {
    fn default() -> Self {
        TssSettings { x0: 0.552, horizon: 100.0, paths: 1, epsilon: None, bound_factor: 1.0, strips: true }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConsistencySettings {
    pub epsilons: Vec<f64>,
    pub paths: usize,
    pub horizon: f64,
    pub grid: usize,
}

impl Default for ConsistencySettings {
    fn default() -> Self {
        ConsistencySettings { epsilons: vec![0.2, 0.1, 0.05], paths: 100, horizon: 0.5, grid: 101 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CanonicalSettings {
    pub x0: f64,
    pub t_end: f64,
    pub h_max: f64,
    pub gradient_points: usize,
    /// Also compare with the mean of ε-rescaled TSS paths.
    pub consistency: Option<ConsistencySettings>,
}

impl Default for CanonicalSettings {
    fn default() -> Self {
        CanonicalSettings { x0: 0.552, t_end: 2.0, h_max: 0.01, gradient_points: 200, consistency: None }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StabilitySettings {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
    pub width: f64,
    pub height: f64,
    pub indentation: f64,
    pub samples_per_segment: usize,
}

impl Default for StabilitySettings {
    fn default() -> Self {
        StabilitySettings { lo: 0.1, hi: 3.9, step: 0.1, width: 50.0, height: 50.0, indentation: 1e-3, samples_per_segment: 400 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySettings {
    /// `(resident, mutant)` pairs.
    pub pairs: Vec<(f64, f64)>,
    pub replicates: usize,
    pub survival_size: usize,
    pub t_max: f64,
    pub confidence: f64,
    pub tolerance: f64,
}

impl Default for VerifySettings {
    fn default() -> Self {
        VerifySettings {
            pairs: vec![(1.0, 2.0), (2.0, 2.5), (2.5, 3.0)],
            replicates: 10_000,
            survival_size: 500,
            t_max: 50.0,
            confidence: 0.99,
            tolerance: 1e-8,
        }
    }
}

impl ExperimentConfig {
    pub fn new(model: ModelId, operation: Operation) -> Self {
        ExperimentConfig { model, operation, output_dir: None, seed: 1, jobs: 1 }
    }

    /// Parses a configuration, or the `config` field of a run manifest.
    pub fn from_json(text: &str) -> Result<Self> {
        let mut v: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if v.get("tool").and_then(|t| t.as_str()) == Some("agedyn") {
            if let Some(c) = v.get_mut("config") {
                v = c.take();
            }
        }
        let cfg: ExperimentConfig = serde_json::from_value(v).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Applies `key.path=value` overrides (values parsed as JSON, falling
    /// back to strings) and re-validates.
    pub fn with_overrides(&self, overrides: &[String]) -> Result<Self> {
        let mut v = serde_json::to_value(self)?;
        for o in overrides {
            let (key, raw) = o.split_once('=').ok_or_else(|| Error::Config(format!("override '{o}' is not key=value")))?;
            let value: serde_json::Value =
                serde_json::from_str(raw).unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
            let mut slot = &mut v;
            for part in key.split('.') {
                let obj = slot.as_object_mut().ok_or_else(|| Error::Config(format!("'{key}' does not name a setting")))?;
                slot = obj.entry(part.to_string()).or_insert(serde_json::Value::Null);
            }
            *slot = value;
        }
        let cfg: ExperimentConfig = serde_json::from_value(v).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks every setting before any computation starts.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        let model = self.model.build()?;
        if self.jobs == 0 {
            return bad("jobs must be at least 1".into());
        }
        let in_box = |x: f64| x > 0.0 && x < 4.0;
        match &self.operation {
            Operation::Ibm(s) => {
                if !(s.horizon > 0.0) || !(s.scale_n > 0.0) || !(0.0..=1.0).contains(&s.mutation_scale) {
                    return bad("ibm: horizon and scale_n must be positive, mutation_scale in [0, 1]".into());
                }
                let i = &s.initial;
                if !(i.trait_lo <= i.trait_hi) || !model.trait_box.contains(&[i.trait_lo]) || !model.trait_box.contains(&[i.trait_hi]) {
                    return bad("ibm: initial trait range must lie in the trait box".into());
                }
                if !(i.age_rate > 0.0) || s.replicates == 0 || !(s.age_bin > 0.0) || s.record_every < 0.0 || s.snapshot_every < 0.0 {
                    return bad("ibm: age_rate, replicates and age_bin must be positive; cadences nonnegative".into());
                }
                if i.count > s.max_population {
                    return bad("ibm: initial count exceeds max_population".into());
                }
                if let Some(b) = &s.bimodality {
                    if !(b.significance > 0.0 && b.significance < 1.0) || b.dip_replicates == 0 {
                        return bad("ibm: bimodality needs a significance in (0,1) and dip replicates".into());
                    }
                }
            }
            Operation::Pde(s) => {
                if !in_box(s.trait_value) || !(s.horizon > 0.0) || s.cells < 10 || !(s.init_mass > 0.0) || !(s.init_age_rate > 0.0) {
                    return bad("pde: trait in (0,4), positive horizon/mass/rate and at least 10 cells required".into());
                }
            }
            Operation::Equilibrium(s) => {
                if !(s.lo < s.hi) || !in_box(s.lo) || !in_box(s.hi) || s.points < 2 {
                    return bad("equilibrium: need 0 < lo < hi < 4 and at least 2 points".into());
                }
            }
            Operation::Fitness(s) => {
                if !(s.lo < s.hi) || s.n < 2 || s.gradient_points < 2 {
                    return bad("fitness: need lo < hi and at least 2 points".into());
                }
            }
            Operation::Pip(s) => {
                if !(s.lo < s.hi) || s.n < 2 {
                    return bad("pip: need lo < hi and n >= 2".into());
                }
            }
            Operation::Tss(s) => {
                if !in_box(s.x0) || !(s.horizon > 0.0) || s.paths == 0 || !(s.bound_factor >= 1.0) {
                    return bad("tss: x0 in (0,4), positive horizon, paths >= 1, bound_factor >= 1".into());
                }
                if let Some(e) = s.epsilon {
                    if !(e > 0.0 && e <= 1.0) {
                        return bad("tss: epsilon must lie in (0, 1]".into());
                    }
                }
            }
            Operation::Canonical(s) => {
                if !in_box(s.x0) || !(s.t_end > 0.0) || !(s.h_max > 0.0) || s.gradient_points < 2 {
                    return bad("canonical: x0 in (0,4), positive t_end and h_max".into());
                }
                if let Some(c) = &s.consistency {
                    if c.epsilons.is_empty() || c.epsilons.iter().any(|e| !(*e > 0.0)) || c.paths == 0 || c.grid < 2 || !(c.horizon > 0.0) {
                        return bad("canonical: consistency needs positive epsilons, paths, horizon and grid".into());
                    }
                }
            }
            Operation::Stability(s) => {
                if !matches!(model.family, ModelFamily::Example2 { .. }) {
                    return bad("stability: the eigenvalue function is available for example2 only".into());
                }
                if !(s.lo <= s.hi) || !in_box(s.lo) || !in_box(s.hi) || !(s.step > 0.0) {
                    return bad("stability: need 0 < lo <= hi < 4 and a positive step".into());
                }
                JordanContour::indented_rectangle(s.width, s.height, s.indentation, s.samples_per_segment)
                    .map_err(|e| Error::Config(format!("stability: {e}")))?;
            }
            Operation::Verify(s) => {
                if s.pairs.is_empty() || s.replicates == 0 || s.survival_size == 0 || !(s.t_max > 0.0) {
                    return bad("verify: need pairs, replicates, survival_size and t_max".into());
                }
                if !(s.confidence > 0.0 && s.confidence < 1.0) || !(s.tolerance > 0.0) {
                    return bad("verify: confidence in (0,1) and positive tolerance required".into());
                }
                if s.pairs.iter().any(|&(x, y)| !in_box(x) || !in_box(y)) {
                    return bad("verify: traits must lie in (0, 4)".into());
                }
            }
        }
        Ok(())
    }
}

/// Runs `f` over `0..n` on `jobs` threads; results come back in index order.
pub fn parallel_map<T: Send>(n: usize, jobs: usize, f: impl Fn(usize) -> T + Sync) -> Vec<T> {
    if jobs <= 1 || n <= 1 {
        return (0..n).map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<T>>> = Mutex::new((0..n).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..jobs.min(n) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let r = f(i);
                slots.lock().expect("no worker panicked")[i] = Some(r);
            });
        }
    });
    slots.into_inner().expect("no worker panicked").into_iter().map(|r| r.expect("every index ran")).collect()
}

/// Summary returned by [`run`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunOutcome {
    pub output_dir: PathBuf,
    pub manifest: Manifest,
    /// Operation-specific results (also written as `summary.json`).
    pub summary: serde_json::Value,
}

/// Runs a validated configuration. `root` resolves relative output paths;
/// `preset` is recorded in the manifest.
pub fn run(cfg: &ExperimentConfig, root: &Path, preset: Option<&str>) -> Result<RunOutcome> {
    cfg.validate()?;
    let model = cfg.model.build()?;
    let dir = match &cfg.output_dir {
        Some(p) if p.is_absolute() => p.clone(),
        Some(p) => root.join(p),
        None => root.join(format!("{}-{}", cfg.operation.name(), cfg.model.name)),
    };
    let mut out = ArtifactDir::create(&dir)?;
    let (summary, failure) = match &cfg.operation {
        Operation::Ibm(s) => run_ibm(&model, s, cfg, &mut out)?,
        Operation::Pde(s) => (run_pde(&model, s, &mut out)?, None),
        Operation::Equilibrium(s) => (run_equilibrium(&model, s, &mut out)?, None),
        Operation::Fitness(s) => (run_fitness(&model, s, &mut out)?, None),
        Operation::Pip(s) => (run_pip(&model, s, &mut out)?, None),
        Operation::Tss(s) => (run_tss(&model, s, cfg, &mut out)?, None),
        Operation::Canonical(s) => (run_canonical(&model, s, cfg, &mut out)?, None),
        Operation::Stability(s) => (run_stability(&model, s, cfg, &mut out)?, None),
        Operation::Verify(s) => run_verify(&model, s, cfg, &mut out)?,
    };
    out.json("summary.json", &summary)?;
    let manifest = out.finish(cfg.operation.name(), preset, cfg, cfg.seed)?;
    if let Some(msg) = failure {
        return Err(Error::Assertion(format!("{msg} (artifacts in {})", dir.display())));
    }
    Ok(RunOutcome { output_dir: dir, manifest, summary })
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

fn svg(out: &mut ArtifactDir, name: &str, plot: &Plot) -> Result<()> {
    out.text(name, &plot.to_svg())
}

/// Bimodality verdict of one trait cloud.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Bimodality {
    pub count: usize,
    pub dip: f64,
    pub p_value: f64,
    pub bandwidth: f64,
    /// The two highest density modes, ascending.
    pub modes: Vec<f64>,
    pub bimodal: bool,
    pub straddles: bool,
}

pub fn assess_bimodality(traits: &[f64], s: &BimodalitySettings, seed: u64) -> Result<Bimodality> {
    if traits.len() < 4 {
        return Ok(Bimodality {
            count: traits.len(),
            dip: f64::NAN,
            p_value: 1.0,
            bandwidth: f64::NAN,
            modes: vec![],
            bimodal: false,
            straddles: false,
        });
    }
    let t = dip_test(traits, s.dip_replicates, seed)?;
    let bandwidth = silverman_bandwidth(traits)?;
    let lo = traits.iter().copied().fold(f64::INFINITY, f64::min) - 3.0 * bandwidth;
    let hi = traits.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 3.0 * bandwidth;
    let mut modes: Vec<f64> = kde_modes(traits, bandwidth, lo, hi, 1601)?.iter().take(2).map(|m| m.0).collect();
    modes.sort_by(f64::total_cmp);
    let bimodal = t.p_value < s.significance;
    let straddles = modes.len() == 2 && modes[0] < s.split && s.split < modes[1];
    Ok(Bimodality { count: traits.len(), dip: t.dip.dip, p_value: t.p_value, bandwidth, modes, bimodal, straddles })
}

fn initial_state(model: &ModelSpec, s: &IbmSettings, seed: u64) -> Result<PopulationState> {
    let i = &s.initial;
    if i.trait_lo == i.trait_hi {
        PopulationState::monomorphic(&TraitValue::scalar(i.trait_lo), i.count, i.age_rate, s.scale_n, seed)
    } else {
        if model.dim() != 1 {
            return Err(Error::Config("uniform initial traits need a scalar trait".into()));
        }
        PopulationState::uniform_scalar(i.trait_lo, i.trait_hi, i.count, i.age_rate, s.scale_n, seed)
    }
}

type Outcome = (serde_json::Value, Option<String>);

fn run_ibm(model: &ModelSpec, s: &IbmSettings, cfg: &ExperimentConfig, out: &mut ArtifactDir) -> Result<Outcome> {
    let snaps: Vec<f64> = if s.snapshot_every > 0.0 {
        let k = (s.horizon / s.snapshot_every).floor() as usize;
        (0..=k).map(|i| i as f64 * s.snapshot_every).collect()
    } else {
        vec![s.horizon]
    };
    let runs: Vec<Result<IbmRun>> = parallel_map(s.replicates, cfg.jobs, |r| {
        let seed = cfg.seed + r as u64;
        let init = initial_state(model, s, seed)?;
        let opts = IbmOptions {
            horizon: s.horizon,
            seed,
            mutation_scale: s.mutation_scale,
            max_population: s.max_population,
            record_every: s.record_every,
            snapshot_times: snaps.clone(),
            record_events: s.record_events,
            ..Default::default()
        };
        simulate(model, init, &opts)
    });
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    out.csv(
        "mass.csv",
        &["replicate", "time", "mass"],
        runs.iter().enumerate().flat_map(|(r, run)| {
            run.times.iter().zip(&run.masses).map(move |(t, m)| vec![r.to_string(), num(*t), num(*m)])
        }),
    )?;
    out.csv(
        "traits.csv",
        &["replicate", "time", "trait", "age"],
        runs.iter().enumerate().flat_map(|(r, run)| {
            run.snapshots.iter().flat_map(move |st| {
                (0..st.len()).map(move |i| vec![r.to_string(), num(st.time), num(st.trait_of(i)[0]), num(st.age_of(i))])
            })
        }),
    )?;
    let hist = runs[0].final_state.age_histogram(s.age_bin)?;
    out.csv(
        "final_ages.csv",
        &["age", "density"],
        (0..hist.values.len()).map(|k| vec![num(hist.grid.midpoint(k)), num(hist.values[k])]),
    )?;
    if let Some(log) = &runs[0].events {
        out.csv(
            "events.csv",
            &["time", "kind", "index", "partner"],
            log.events.iter().map(|e| {
                vec![
                    num(e.time),
                    serde_json::to_value(e.kind).expect("event kinds serialize").as_str().unwrap_or("").to_string(),
                    e.index.to_string(),
                    e.partner.map(|p| p.to_string()).unwrap_or_default(),
                ]
            }),
        )?;
    }
    let mut cloud = Plot::new(&format!("Trait support, {}", model.name), "time", "trait").y_range(0.0, 4.0);
    let pts: Vec<(f64, f64)> =
        runs[0].snapshots.iter().flat_map(|st| (0..st.len()).map(move |i| (st.time, st.trait_of(i)[0]))).collect();
    // keep the SVG light: at most ~40k points
    let stride = (pts.len() / 40_000).max(1);
    cloud.points(pts.into_iter().step_by(stride).collect(), PALETTE[0], 0.8, 0.25);
    svg(out, "traits.svg", &cloud)?;
    let mut mass = Plot::new("Population mass", "time", "mass");
    for (r, run) in runs.iter().enumerate().take(8) {
        mass.line(run.times.iter().copied().zip(run.masses.iter().copied()).collect(), PALETTE[r % 8], None);
    }
    svg(out, "mass.svg", &mass)?;
    if s.scale_n != 1.0 || s.mutation_scale != 1.0 {
        out.note(format!("desk scale: n = {}, mutation scale u_n = {}", s.scale_n, s.mutation_scale));
    }
    let mut summary = serde_json::json!({
        "replicates": runs.len(),
        "final_counts": runs.iter().map(|r| r.final_state.len()).collect::<Vec<_>>(),
        "final_mean_trait": runs.iter().map(|r| {
            let t = r.final_state.scalar_traits();
            if t.is_empty() { f64::NAN } else { t.iter().sum::<f64>() / t.len() as f64 }
        }).collect::<Vec<_>>(),
        "candidates": runs.iter().map(|r| r.counters.candidates).collect::<Vec<_>>(),
    });
    if let Some(b) = &s.bimodality {
        let verdicts = runs
            .iter()
            .enumerate()
            .map(|(r, run)| assess_bimodality(&run.final_state.scalar_traits(), b, cfg.seed + r as u64))
            .collect::<Result<Vec<_>>>()?;
        out.csv(
            "bimodality.csv",
            &["replicate", "count", "dip", "p_value", "bandwidth", "mode_low", "mode_high", "bimodal", "straddles"],
            verdicts.iter().enumerate().map(|(r, v)| {
                vec![
                    r.to_string(),
                    v.count.to_string(),
                    num(v.dip),
                    num(v.p_value),
                    num(v.bandwidth),
                    v.modes.first().map(|m| num(*m)).unwrap_or_default(),
                    v.modes.get(1).map(|m| num(*m)).unwrap_or_default(),
                    v.bimodal.to_string(),
                    v.straddles.to_string(),
                ]
            }),
        )?;
        let passing = verdicts.iter().filter(|v| v.bimodal && v.straddles).count();
        summary["bimodality"] = serde_json::json!({ "passing": passing, "replicates": verdicts.len(), "verdicts": verdicts });
    }
    Ok((summary, None))
}

fn run_pde(model: &ModelSpec, s: &PdeSettings, out: &mut ArtifactDir) -> Result<serde_json::Value> {
    let a_max = s.a_max.unwrap_or(model.age_grid.a_max);
    let opts = PdeOptions { cells: s.cells, a_max: Some(a_max), record_every: s.record_every, ..Default::default() };
    let grid = AgeGrid::new(a_max, s.cells)?;
    let r = s.init_age_rate;
    let init = AgeDensity::from_fn(grid, |a| s.init_mass * r * (-r * a).exp());
    let run = integrate_monomorphic(model, &[s.trait_value], init, s.horizon, &opts)?;
    let stride = ((s.record_every / grid.da()).round() as usize).max(1);
    let rows: Vec<(f64, f64)> =
        (0..run.times.len()).step_by(stride).map(|k| (run.times[k], run.total_mass(k))).collect();
    out.csv("mass.csv", &["time", "mass"], rows.iter().map(|(t, m)| vec![num(*t), num(*m)]))?;
    let fin = run.final_density();
    out.csv(
        "final_density.csv",
        &["age", "density"],
        (0..fin.values.len()).map(|k| vec![num(fin.grid.midpoint(k)), num(fin.values[k])]),
    )?;
    let an = Analyzer::new(model)?;
    let eq = an.equilibrium(&TraitValue::scalar(s.trait_value))?;
    let mut p = Plot::new(&format!("PDE mass, x = {}", s.trait_value), "time", "mass");
    p.line(rows.clone(), PALETTE[0], Some("PDE"));
    p.dashed(vec![(0.0, eq.mass), (s.horizon, eq.mass)], PALETTE[1], Some("equilibrium"));
    svg(out, "mass.svg", &p)?;
    let last = rows.last().map(|r| r.1).unwrap_or(f64::NAN);
    Ok(serde_json::json!({ "final_mass": last, "equilibrium_mass": eq.mass, "relative_gap": (last - eq.mass).abs() / eq.mass.max(1e-300) }))
}

fn run_equilibrium(model: &ModelSpec, s: &EquilibriumSettings, out: &mut ArtifactDir) -> Result<serde_json::Value> {
    let an = Analyzer::new(model)?;
    let xs = linspace(s.lo, s.hi, s.points);
    let mut rows = Vec::new();
    let mut eqs = Vec::new();
    for &x in &xs {
        let r0 = an.net_reproduction_rate(&[x]);
        match an.equilibrium(&TraitValue::scalar(x)) {
            Ok(eq) => {
                rows.push(vec![num(x), num(r0), num(eq.mass), num(eq.m0), format!("{:?}", eq.method)]);
                eqs.push(Some(eq));
            }
            Err(e) => {
                rows.push(vec![num(x), num(r0), String::new(), String::new(), format!("failed: {e}")]);
                eqs.push(None);
            }
        }
    }
    out.csv("equilibria.csv", &["trait", "r0", "mass", "newborn_density", "method"], rows)?;
    let ages = linspace(0.0, model.age_grid.a_max.min(20.0), 201);
    let strip_idx: Vec<usize> = if s.strips == 0 { vec![] } else { linspace(0.0, (xs.len() - 1) as f64, s.strips.min(xs.len()).max(2)).iter().map(|v| v.round() as usize).collect() };
    let mut strip_rows = Vec::new();
    let mut sp = Plot::new("Equilibrium age profiles", "age", "density");
    for (c, &i) in strip_idx.iter().enumerate() {
        if let Some(eq) = eqs[i].as_ref().filter(|e| !e.trivial) {
            let line: Vec<(f64, f64)> = ages.iter().map(|&a| (a, an.density_at(eq, a))).collect();
            strip_rows.extend(line.iter().map(|(a, d)| vec![num(xs[i]), num(*a), num(*d)]));
            sp.line(line, PALETTE[c % 8], Some(&format!("x = {:.2}", xs[i])));
        }
    }
    out.csv("profiles.csv", &["trait", "age", "density"], strip_rows)?;
    svg(out, "profiles.svg", &sp)?;
    let mut p = Plot::new(&format!("Equilibrium size, {}", model.name), "trait", "mass");
    p.line(xs.iter().zip(&eqs).map(|(&x, e)| (x, e.as_ref().map(|e| e.mass).unwrap_or(f64::NAN))).collect(), PALETTE[0], None);
    svg(out, "mass.svg", &p)?;
    let best = xs.iter().zip(&eqs).filter_map(|(&x, e)| e.as_ref().map(|e| (x, e.mass))).fold((f64::NAN, 0.0), |a, b| if b.1 > a.1 { b } else { a });
    Ok(serde_json::json!({ "points": xs.len(), "largest_mass": { "trait": best.0, "mass": best.1 } }))
}

fn run_fitness(model: &ModelSpec, s: &FitnessSettings, out: &mut ArtifactDir) -> Result<serde_json::Value> {
    let an = Analyzer::new(model)?;
    let spec = PipSpec { n: s.n, lo: s.lo, hi: s.hi };
    let xs = spec.centres();
    let h = spec.cell_width();
    let mut rows = Vec::new();
    let mut cells = Vec::new();
    for &x in &xs {
        let eq = an.equilibrium(&TraitValue::scalar(x)).ok().filter(|e| !e.trivial);
        for &y in &xs {
            let z0 = match &eq {
                Some(eq) => extinction_probability(&an, eq, &TraitValue::scalar(y)).map(|r| r.z0).unwrap_or(f64::NAN),
                None => f64::NAN,
            };
            rows.push(vec![num(x), num(y), num(z0)]);
            let fill = if z0.is_finite() { ramp(1.0 - z0) } else { "#dddddd".to_string() };
            cells.push((x - h / 2.0, x + h / 2.0, y - h / 2.0, y + h / 2.0, fill));
        }
    }
    out.csv("extinction.csv", &["resident", "mutant", "z0"], rows)?;
    let mut p = Plot::new("Extinction probability z0 (blue = 1)", "resident trait", "mutant trait").x_range(s.lo, s.hi).y_range(s.lo, s.hi);
    p.cells(cells);
    svg(out, "extinction.svg", &p)?;
    let gx = linspace(s.lo.max(1e-3), s.hi.min(model.trait_box.hi[0] - 1e-3), s.gradient_points);
    let grads: Vec<f64> = gx.iter().map(|&x| fitness_gradient_generic(&an, x).unwrap_or(f64::NAN)).collect();
    out.csv("gradient.csv", &["trait", "gradient"], gx.iter().zip(&grads).map(|(x, g)| vec![num(*x), num(*g)]))?;
    let mut gp = Plot::new("Fitness gradient", "trait", "d1 g(x,x)");
    gp.line(gx.iter().copied().zip(grads.iter().copied()).collect(), PALETTE[0], None);
    gp.dashed(vec![(gx[0], 0.0), (gx[gx.len() - 1], 0.0)], PALETTE[7], None);
    svg(out, "gradient.svg", &gp)?;
    let singular = crate::fitness::singular::find_singular_points(&an, gx[0], gx[gx.len() - 1], s.gradient_points, 1e-12)?;
    let reports: Vec<_> = singular.iter().filter_map(|&x| classify_singularity(&an, x).ok()).collect();
    Ok(serde_json::json!({ "singular_points": reports }))
}

/// Closed-form nontrivial invasion boundary, where known.
fn known_boundary(model: &ModelSpec) -> Option<fn(f64) -> Result<f64>> {
    match model.family {
        ModelFamily::Example1 { competition, natural_death } if competition == 0.001 && natural_death == 0.25 => {
            Some(invasion_boundary_example1)
        }
        ModelFamily::Example1NoSenescence { competition, natural_death } if competition == 0.001 && natural_death == 0.25 => {
            Some(invasion_boundary_no_senescence)
        }
        _ => None,
    }
}

pub fn pip_svg(grid: &PipGrid, title: &str, boundary: Option<fn(f64) -> Result<f64>>) -> Plot {
    let h = grid.spec.cell_width();
    let mut cells = Vec::new();
    for (i, &x) in grid.xs.iter().enumerate() {
        for (j, &y) in grid.xs.iter().enumerate() {
            let fill = match grid.cells[i][j] {
                PipCell::Invades => "#4a7fb5",
                PipCell::Resists => "#f4f4f4",
                PipCell::NonViable => "#bbbbbb",
                PipCell::Failed => "#ff00ff",
            };
            cells.push((x - h / 2.0, x + h / 2.0, y - h / 2.0, y + h / 2.0, fill.to_string()));
        }
    }
    let mut p = Plot::new(title, "resident trait x", "mutant trait y").x_range(grid.spec.lo, grid.spec.hi).y_range(grid.spec.lo, grid.spec.hi);
    p.cells(cells);
    if let Some(f) = boundary {
        let line = linspace(grid.spec.lo, grid.spec.hi, 400).into_iter().map(|x| (x, f(x).unwrap_or(f64::NAN))).collect();
        p.dashed(line, PALETTE[1], Some("closed-form boundary"));
    }
    p
}

fn run_pip(model: &ModelSpec, s: &PipSettings, out: &mut ArtifactDir) -> Result<serde_json::Value> {
    let an = Analyzer::new(model)?;
    let grid = pip(&an, PipSpec { n: s.n, lo: s.lo, hi: s.hi })?;
    let mut rows = Vec::new();
    for (i, &x) in grid.xs.iter().enumerate() {
        for (j, &y) in grid.xs.iter().enumerate() {
            rows.push(vec![num(x), num(y), format!("{:?}", grid.cells[i][j]).to_lowercase(), num(grid.fitness[i][j])]);
        }
    }
    out.csv("pip.csv", &["resident", "mutant", "cell", "invasion_integral_minus_one"], rows)?;
    out.text("pip.txt", &grid.render_ascii())?;
    let boundary = known_boundary(model);
    svg(out, "pip.svg", &pip_svg(&grid, &format!("Pairwise invasibility, {}", model.name), boundary))?;
    let comparison = boundary.map(|f| {
        grid.compare(
            |x, y| {
                if an.net_reproduction_rate(&[x]) <= 1.0 {
                    return None;
                }
                let fx = f(x).ok()?;
                Some((y > x && y < fx) || (y < x && y > fx))
            },
            |x| f(x).ok(),
        )
    });
    Ok(serde_json::json!({ "n": s.n, "comparison": comparison }))
}

fn run_tss(model: &ModelSpec, s: &TssSettings, cfg: &ExperimentConfig, out: &mut ArtifactDir) -> Result<serde_json::Value> {
    let paths: Vec<Result<TssPath>> = parallel_map(s.paths, cfg.jobs, |p| {
        let opts = TssOptions {
            horizon: s.horizon,
            seed: cfg.seed + p as u64,
            epsilon: s.epsilon,
            bound_factor: s.bound_factor,
            ..Default::default()
        };
        simulate_tss(model, &TraitValue::scalar(s.x0), &opts)
    });
    let paths = paths.into_iter().collect::<Result<Vec<_>>>()?;
    out.csv(
        "paths.csv",
        &["path", "jump", "time", "trait", "mass", "birth_flux", "invasion_probability", "assumption_violated"],
        paths.iter().enumerate().flat_map(|(p, path)| {
            path.jumps.iter().enumerate().map(move |(k, j)| {
                vec![
                    p.to_string(),
                    k.to_string(),
                    num(j.time),
                    num(j.trait_value.0[0]),
                    num(j.mass),
                    num(j.birth_flux),
                    num(j.invasion_probability),
                    j.assumption_violated.to_string(),
                ]
            })
        }),
    )?;
    let mut p = Plot::new(&format!("Trait substitution sequence, {}", model.name), "evolutionary time", "trait").y_range(0.0, 4.0);
    for (k, path) in paths.iter().enumerate().take(8) {
        let mut stairs = Vec::new();
        for (i, j) in path.jumps.iter().enumerate() {
            if i > 0 {
                stairs.push((j.time, path.jumps[i - 1].trait_value.0[0]));
            }
            stairs.push((j.time, j.trait_value.0[0]));
        }
        stairs.push((s.horizon, path.terminal_trait().0[0]));
        p.line(stairs, PALETTE[k % 8], None);
    }
    svg(out, "tss.svg", &p)?;
    if s.strips {
        let an = Analyzer::new(model)?;
        let ages = linspace(0.0, model.age_grid.a_max.min(20.0), 201);
        let mut rows = Vec::new();
        let mut sp = Plot::new("Successive equilibrium age profiles", "age", "density");
        let jumps = &paths[0].jumps;
        let every = (jumps.len() / 12).max(1);
        for (k, j) in jumps.iter().enumerate() {
            let eq = an.equilibrium(&j.trait_value)?;
            let line: Vec<(f64, f64)> = ages.iter().map(|&a| (a, an.density_at(&eq, a))).collect();
            rows.extend(line.iter().map(|(a, d)| vec![k.to_string(), num(j.trait_value.0[0]), num(*a), num(*d)]));
            if k % every == 0 {
                sp.line(line, PALETTE[(k / every) % 8], None);
            }
        }
        out.csv("strips.csv", &["jump", "trait", "age", "density"], rows)?;
        svg(out, "strips.svg", &sp)?;
    }
    let flagged: usize = paths.iter().map(|p| p.jumps.iter().filter(|j| j.assumption_violated).count()).sum();
    Ok(serde_json::json!({
        "terminal_traits": paths.iter().map(|p| p.terminal_trait().0[0]).collect::<Vec<_>>(),
        "jumps": paths.iter().map(|p| p.jumps.len() - 1).collect::<Vec<_>>(),
        "flagged_substitutions": flagged,
    }))
}

fn run_canonical(model: &ModelSpec, s: &CanonicalSettings, cfg: &ExperimentConfig, out: &mut ArtifactDir) -> Result<serde_json::Value> {
    let an = Analyzer::new(model)?;
    let tr = integrate_canonical(&an, s.x0, s.t_end, &OdeOptions { h_max: s.h_max, ..Default::default() })?;
    out.csv(
        "trajectory.csv",
        &["time", "trait", "velocity"],
        (0..tr.t.len()).map(|k| vec![num(tr.t[k]), num(tr.x[k]), num(tr.dxdt[k])]),
    )?;
    let mut p = Plot::new(&format!("Canonical equation, {}", model.name), "time", "trait");
    p.line(tr.t.iter().copied().zip(tr.x.iter().copied()).collect(), PALETTE[0], Some("ODE"));
    let gx = linspace(0.02, 3.98, s.gradient_points);
    let grads: Vec<f64> = gx.iter().map(|&x| fitness_gradient_generic(&an, x).unwrap_or(f64::NAN)).collect();
    out.csv("gradient.csv", &["trait", "gradient"], gx.iter().zip(&grads).map(|(x, g)| vec![num(*x), num(*g)]))?;
    let mut summary = serde_json::json!({
        "stop": tr.stop,
        "rest_point": tr.rest_point,
        "final_trait": tr.final_state(),
    });
    if let Some(c) = &s.consistency {
        let rep: ConsistencyReport = tss_consistency(model, s.x0, &c.epsilons, c.paths, c.horizon, c.grid, cfg.seed)?;
        let mut rows = Vec::new();
        for (k, &t) in rep.times.iter().enumerate() {
            let mut r = vec![num(t), num(rep.ode[k])];
            r.extend(rep.rows.iter().map(|row| num(row.mean_path[k])));
            rows.push(r);
        }
        let names: Vec<String> = rep.rows.iter().map(|r| format!("mean_eps_{}", r.epsilon)).collect();
        let mut header = vec!["time", "ode"];
        header.extend(names.iter().map(String::as_str));
        out.csv("consistency.csv", &header, rows)?;
        for (i, row) in rep.rows.iter().enumerate() {
            p.dashed(
                rep.times.iter().copied().zip(row.mean_path.iter().copied()).collect(),
                PALETTE[(i + 1) % 8],
                Some(&format!("TSS mean, eps = {}", row.epsilon)),
            );
        }
        summary["consistency"] = serde_json::json!({
            "sup_distances": rep.rows.iter().map(|r| (r.epsilon, r.sup_distance)).collect::<Vec<_>>(),
            "monotone": rep.monotone(),
        });
    }
    svg(out, "canonical.svg", &p)?;
    Ok(summary)
}

fn run_stability(model: &ModelSpec, s: &StabilitySettings, cfg: &ExperimentConfig, out: &mut ArtifactDir) -> Result<serde_json::Value> {
    let contour = JordanContour::indented_rectangle(s.width, s.height, s.indentation, s.samples_per_segment)?;
    let n = ((s.hi - s.lo) / s.step + 1e-9).floor() as usize + 1;
    let xs: Vec<f64> = (0..n).map(|k| ((s.lo + k as f64 * s.step) * 1e9).round() / 1e9).collect();
    let reports = parallel_map(xs.len(), cfg.jobs, |k| stability_winding(model, xs[k], &contour));
    let reports = reports.into_iter().collect::<Result<Vec<_>>>()?;
    out.csv(
        "stability.csv",
        &["trait", "winding", "min_abs_lambda", "verdict"],
        xs.iter().zip(&reports).map(|(x, r)| vec![num(*x), r.winding.to_string(), num(r.min_abs), r.verdict().to_string()]),
    )?;
    let mut p = Plot::new("Zeros of the eigenvalue function in the right half-plane", "trait", "winding number").y_range(-0.5, 2.5);
    p.points(xs.iter().zip(&reports).map(|(&x, r)| (x, r.winding as f64)).collect(), PALETTE[0], 3.0, 1.0);
    svg(out, "stability.svg", &p)?;
    let unstable: Vec<f64> = xs.iter().zip(&reports).filter(|(_, r)| r.winding != 0).map(|(x, _)| *x).collect();
    Ok(serde_json::json!({ "traits": xs.len(), "all_stable": unstable.is_empty(), "unstable": unstable }))
}

fn run_verify(model: &ModelSpec, s: &VerifySettings, cfg: &ExperimentConfig, out: &mut ArtifactDir) -> Result<Outcome> {
    let an = Analyzer::new(model)?;
    let opts = BranchingOptions {
        replicates: s.replicates,
        seed: cfg.seed,
        survival_size: s.survival_size,
        t_max: s.t_max,
        confidence: s.confidence,
        ..Default::default()
    };
    let tris: Vec<Result<OracleTriangle>> = parallel_map(s.pairs.len(), cfg.jobs, |k| {
        let (x, y) = s.pairs[k];
        oracle_triangle(&an, x, y, &BranchingOptions { seed: opts.seed + k as u64, ..opts.clone() })
    });
    let tris = tris.into_iter().collect::<Result<Vec<_>>>()?;
    out.csv(
        "verify.csv",
        &["resident", "mutant", "f_root", "g_fixed_point", "mc_frequency", "ci_low", "ci_high", "consistent"],
        tris.iter().map(|t| {
            vec![
                num(t.resident),
                num(t.mutant),
                num(t.f_root),
                num(t.g_fixed_point),
                num(t.monte_carlo.extinction_frequency),
                num(t.monte_carlo.ci_low),
                num(t.monte_carlo.ci_high),
                t.consistent(s.tolerance).to_string(),
            ]
        }),
    )?;
    if s.survival_size < 10_000 {
        out.note(format!("survival declared at {} individuals", s.survival_size));
    }
    let failing: Vec<(f64, f64)> = tris.iter().filter(|t| !t.consistent(s.tolerance)).map(|t| (t.resident, t.mutant)).collect();
    let summary = serde_json::json!({ "pairs": tris.len(), "all_consistent": failing.is_empty(), "failing": failing, "triangles": tris });
    let failure = (!failing.is_empty()).then(|| format!("extinction-probability oracles disagree for {failing:?}"));
    Ok((summary, failure))
}

/// Figure identifiers accepted by [`preset`].
pub const FIGURES: [&str; 9] = ["fig1a", "fig1b", "fig1c", "fig4", "fig5", "fig6", "fig7", "fig8", "fig9-scan"];

/// The configurations that reproduce one figure at desk scale, each with
/// the sub-directory it writes to.
pub fn preset(figure: &str) -> Result<Vec<(String, ExperimentConfig)>> {
    let cfg = |model: &str, op: Operation| ExperimentConfig::new(ModelId::new(model), op);
    let ibm = |horizon: f64, mutation_scale: f64| IbmSettings { horizon, mutation_scale, ..Default::default() };
    let out = match figure {
        "fig1a" => vec![("ibm".into(), cfg("example1", Operation::Ibm(ibm(100.0, 1.0))))],
        "fig1b" => vec![("ibm".into(), cfg("example1-no-senescence", Operation::Ibm(ibm(100.0, 1.0))))],
        "fig1c" => vec![(
            "ibm".into(),
            cfg(
                "example2",
                Operation::Ibm(IbmSettings {
                    replicates: 10,
                    snapshot_every: 2.0,
                    bimodality: Some(BimodalitySettings::default()),
                    ..ibm(200.0, 0.05)
                }),
            ),
        )],
        "fig4" => vec![
            ("extinction".into(), cfg("example1", Operation::Fitness(FitnessSettings { n: 100, ..Default::default() }))),
            ("pip".into(), cfg("example1", Operation::Pip(PipSettings::default()))),
        ],
        "fig5" => vec![("tss".into(), cfg("example1", Operation::Tss(TssSettings { horizon: 50.0, ..Default::default() })))],
        "fig6" => vec![("canonical".into(), cfg("example1", Operation::Canonical(CanonicalSettings::default())))],
        "fig7" => vec![("equilibrium".into(), cfg("example1-age-logistic", Operation::Equilibrium(EquilibriumSettings::default())))],
        "fig8" => vec![
            ("extinction".into(), cfg("example1-age-logistic", Operation::Fitness(FitnessSettings { n: 60, ..Default::default() }))),
            ("pip".into(), cfg("example1-age-logistic", Operation::Pip(PipSettings { n: 100, ..Default::default() }))),
            ("tss".into(), cfg("example1-age-logistic", Operation::Tss(TssSettings { horizon: 50.0, x0: 1.0, ..Default::default() }))),
            ("canonical".into(), cfg("example1-age-logistic", Operation::Canonical(CanonicalSettings { x0: 1.0, t_end: 5.0, ..Default::default() }))),
        ],
        "fig9-scan" => vec![("stability".into(), cfg("example2", Operation::Stability(StabilitySettings::default())))],
        other => return Err(Error::Config(format!("unknown figure '{other}'; known: {}", FIGURES.join(", ")))),
    };
    Ok(out
        .into_iter()
        .map(|(sub, mut c): (String, ExperimentConfig)| {
            c.output_dir = Some(PathBuf::from(figure).join(&sub));
            (sub, c)
        })
        .collect())
}

/// Runs every configuration of a figure preset under `root`.
pub fn reproduce(figure: &str, root: &Path, jobs: usize) -> Result<Vec<RunOutcome>> {
    preset(figure)?
        .into_iter()
        .map(|(_, mut c)| {
            c.jobs = jobs.max(1);
            run(&c, root, Some(figure))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_and_unknown_keys_rejected() {
        assert!(matches!(ExperimentConfig::from_json("{}"), Err(Error::Config(_))));
        assert!(matches!(ExperimentConfig::from_json(""), Err(Error::Config(_))));
        let bad = r#"{"model": {"name": "example1"}, "operation": {"pip": {"n": 10, "typo": 1}}}"#;
        assert!(matches!(ExperimentConfig::from_json(bad), Err(Error::Config(_))));
        let bad_model = r#"{"model": {"name": "example3"}, "operation": {"pip": {}}}"#;
        assert!(matches!(ExperimentConfig::from_json(bad_model), Err(Error::Config(_))));
    }

    #[test]
    fn defaults_and_overrides() {
        let c = ExperimentConfig::from_json(r#"{"model": {"name": "example1"}, "operation": {"pip": {}}}"#).unwrap();
        assert_eq!(c.seed, 1);
        let c2 = c.with_overrides(&["operation.pip.n=12".into(), "seed=4".into()]).unwrap();
        assert!(matches!(c2.operation, Operation::Pip(PipSettings { n: 12, .. })));
        assert_eq!(c2.seed, 4);
        assert!(c.with_overrides(&["operation.pip.n=-3".into()]).is_err());
        assert!(c.with_overrides(&["operation.pip.bogus=1".into()]).is_err());
    }

    #[test]
    fn stability_needs_example2() {
        let c = ExperimentConfig::new(ModelId::new("example1"), Operation::Stability(Default::default()));
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn every_preset_validates() {
        for f in FIGURES {
            for (_, c) in preset(f).unwrap() {
                c.validate().unwrap_or_else(|e| panic!("{f}: {e}"));
                let text = serde_json::to_string(&c).unwrap();
                ExperimentConfig::from_json(&text).unwrap();
            }
        }
        assert!(preset("fig2").is_err());
    }

    #[test]
    fn parallel_map_keeps_order() {
        assert_eq!(parallel_map(10, 3, |i| i * i), (0..10).map(|i| i * i).collect::<Vec<_>>());
    }

    #[test]
    fn small_pip_run_writes_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = ExperimentConfig::new(ModelId::new("example1"), Operation::Pip(PipSettings { n: 12, ..Default::default() }));
        c.output_dir = Some("p".into());
        let o = run(&c, dir.path(), None).unwrap();
        for f in ["pip.csv", "pip.svg", "pip.txt", "summary.json", "manifest.json"] {
            assert!(o.output_dir.join(f).exists(), "{f}");
        }
        assert_eq!(o.manifest.config_hash, crate::output::config_hash(&serde_json::to_value(&c).unwrap()));
    }
}
