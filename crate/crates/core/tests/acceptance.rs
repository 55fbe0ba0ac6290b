//! Acceptance run: each criterion prints one PASS/FAIL line with the
//! measured quantities and wall time; the process fails if any criterion
//! fails.

use std::time::{Duration, Instant};

use agedyn::canonical::tss_consistency;
use agedyn::demography::closed_form::{
    example2_gradient_rounded, invasion_boundary_example1, invasion_boundary_no_senescence,
};
use agedyn::demography::pde::PdeOptions;
use agedyn::demography::Analyzer;
use agedyn::fitness::singular::{find_singular_points, SingularityKind};
use agedyn::fitness::{classify_singularity, extinction_probability, fitness_gradient_generic, g_scalar, pip, PipSpec};
use agedyn::ibm::law_of_large_numbers;
use agedyn::models::{build_example1, build_example1_no_senescence, build_example2, ModelId, MODEL_NAMES};
use agedyn::roots::bisect;
use agedyn::runner;
use agedyn::stability::{stability_winding, winding_number, JordanContour};
use agedyn::tss::{nested_intervals_hold, simulate_tss, TssOptions};
use agedyn::verify::{oracle_triangle, BranchingOptions};
use agedyn::TraitValue;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = agedyn::Result<(bool, String)>;

/// Example 1 stationary mass from the balance condition
/// `x(4−x)/(1 + d̂) = 1` with `d̂ = 1/4 + c(4−x)M`.
fn example1_mass_oracle(x: f64) -> f64 {
    (x * (4.0 - x) - 1.25) / (0.001 * (4.0 - x))
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn c1() -> Check {
    let an = Analyzer::new(&build_example1())?;
    let m2 = an.equilibrium(&TraitValue::scalar(2.0))?.mass;
    let pde = an.pde_equilibrium(&TraitValue::scalar(2.0), &PdeOptions::default())?.mass;
    let m552 = an.equilibrium(&TraitValue::scalar(0.552))?.mass;
    let ok = m2 == example1_mass_oracle(2.0) && m2 == 1375.0 && rel(pde, 1375.0) < 5e-3 && rel(m552, 189.47) < 5e-3;
    Ok((ok, format!("M(2) = {m2}, PDE path {pde:.3} ({:.2e} rel), M(0.552) = {m552:.3}", rel(pde, 1375.0))))
}

fn c2() -> Check {
    let an = Analyzer::new(&build_example1())?;
    let r = |x: f64| an.net_reproduction_rate(&[x]) - 1.0;
    let lo = bisect(r, 1e-9, 2.0, 1e-13)?;
    let hi = bisect(r, 2.0, 4.0 - 1e-9, 1e-13)?;
    let h = 11f64.sqrt() / 2.0;
    let err = (lo - (2.0 - h)).abs().max((hi - (2.0 + h)).abs());
    Ok((err < 1e-6, format!("R0 = 1 at {lo:.9}, {hi:.9}; max error {err:.2e}")))
}

fn pip_check(model: agedyn::ModelSpec, boundary: fn(f64) -> agedyn::Result<f64>) -> agedyn::Result<(f64, usize, usize)> {
    let an = Analyzer::new(&model)?;
    let singular = find_singular_points(&an, 0.05, 3.95, 400, 1e-12)?;
    let ess = singular.iter().copied().find(|&x| classify_singularity(&an, x).is_ok_and(|r| r.kind == SingularityKind::Ess)).unwrap_or(f64::NAN);
    let grid = pip(&an, PipSpec { n: 200, lo: 0.0, hi: 4.0 })?;
    let cmp = grid.compare(
        |x, y| {
            if an.net_reproduction_rate(&[x]) <= 1.0 {
                return None;
            }
            let f = boundary(x).ok()?;
            Some((x < y && y < f) || (f < y && y < x))
        },
        |x| boundary(x).ok(),
    );
    Ok((ess, cmp.far_mismatches + cmp.failed, cmp.mismatches))
}

fn c3() -> Check {
    let (ess, far, near) = pip_check(build_example1(), invasion_boundary_example1)?;
    let target = 4.0 - 5f64.sqrt() / 2.0;
    Ok(((ess - target).abs() < 1e-6 && far == 0, format!("ESS {ess:.9} (error {:.2e}); PIP 200x200: {far} cells off by more than one cell, {near} within one cell", (ess - target).abs())))
}

fn c4() -> Check {
    let (ess, far, near) = pip_check(build_example1_no_senescence(), invasion_boundary_no_senescence)?;
    Ok(((ess - 3.5).abs() < 1e-6 && far == 0, format!("ESS {ess:.9} (error {:.2e}); PIP 200x200: {far} far mismatches, {near} within one cell", (ess - 3.5).abs())))
}

fn c5() -> Check {
    let an = Analyzer::new(&build_example2())?;
    let rounded_root = bisect(example2_gradient_rounded, 2.0, 3.9, 1e-13)?;
    let pts = find_singular_points(&an, 0.05, 3.95, 400, 1e-12)?;
    let [x] = pts.as_slice() else {
        return Ok((false, format!("expected one singular point, found {pts:?}")));
    };
    let r = classify_singularity(&an, *x)?;
    let within = |v: f64, t: f64| rel(v, t) < 0.15;
    let ok = (x - rounded_root).abs() < 0.02
        && r.kind == SingularityKind::BranchingPoint
        && r.d22 < r.d11
        && r.d11 < 0.0
        && within(r.taylor22, -2.9)
        && within(r.taylor11, -0.3);
    Ok((
        ok,
        format!(
            "x* = {x:.6} (rounded-formula root {rounded_root:.4}); {:?}; second derivatives d22 = {:.3} < d11 = {:.3} < 0; series coefficients ({:.3}, {:.3}) vs (-2.9, -0.3)",
            r.kind, r.d22, r.d11, r.taylor22, r.taylor11
        ),
    ))
}

fn c6() -> Check {
    let pairs = [
        ("example1", 1.0, 2.0),
        ("example1", 2.0, 2.5),
        ("example1", 2.5, 3.0),
        ("example1", 1.5, 1.8),
        ("example1", 3.2, 2.9),
        ("example2", 1.0, 1.3),
        ("example2", 2.0, 2.3),
        ("example2", 2.5, 2.8),
        ("example2", 3.0, 3.1),
        ("example2", 3.5, 3.3),
    ];
    let mut worst_gap: f64 = 0.0;
    let mut bad = Vec::new();
    for (k, (name, x, y)) in pairs.iter().enumerate() {
        let an = Analyzer::new(&ModelId::new(name).build()?)?;
        let opts = BranchingOptions { replicates: 10_000, seed: 100 + k as u64, survival_size: 500, ..Default::default() };
        let t = oracle_triangle(&an, *x, *y, &opts)?;
        worst_gap = worst_gap.max(t.deterministic_gap());
        if !t.consistent(1e-8) {
            bad.push(format!("{name} ({x}, {y}): root {} fixed point {} CI [{}, {}]", t.f_root, t.g_fixed_point, t.monte_carlo.ci_low, t.monte_carlo.ci_high));
        }
    }
    Ok((bad.is_empty(), format!("10 pairs, worst root/fixed-point gap {worst_gap:.2e}, CI misses: {bad:?}")))
}

fn c7() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    let mut counted = Vec::new();
    for name in MODEL_NAMES {
        let an = Analyzer::new(&ModelId::new(name).build()?)?;
        let mut n = 0;
        while n < 50 {
            let x: f64 = rng.random_range(0.01..3.99);
            if an.net_reproduction_rate(&[x]) <= 1.0 + 1e-6 {
                continue;
            }
            let eq = an.equilibrium(&TraitValue::scalar(x))?;
            let r = extinction_probability(&an, &eq, &TraitValue::scalar(x))?;
            worst = worst.max((r.z0 - 1.0).abs()).max((r.g_value - 1.0).abs());
            n += 1;
        }
        counted.push(n);
    }
    Ok((worst < 1e-8, format!("{counted:?} traits per model, max |z0(x,x) - 1| = {worst:.2e}")))
}

fn c8() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    for model in [build_example1(), build_example2()] {
        let an = Analyzer::new(&model)?;
        let mut n = 0;
        while n < 20 {
            let x: f64 = rng.random_range(0.2..3.8);
            if an.net_reproduction_rate(&[x]) <= 1.01 {
                continue;
            }
            let eps = 1e-4;
            let fd = (g_scalar(&an, x + eps, x)? - g_scalar(&an, x - eps, x)?) / (2.0 * eps);
            let g = fitness_gradient_generic(&an, x)?;
            // relative, with an absolute floor where the gradient vanishes
            worst = worst.max((fd - g).abs() / g.abs().max(1e-2));
            n += 1;
        }
    }
    Ok((worst < 1e-4, format!("40 traits, max relative deviation {worst:.2e}")))
}

fn c9() -> Check {
    let model = build_example1();
    let target = 4.0 - 5f64.sqrt() / 2.0;
    let f = |x: f64| invasion_boundary_example1(x).unwrap_or(f64::NAN);
    let (mut close, mut nested) = (0, 0);
    let mut far = Vec::new();
    for seed in 1..=50 {
        let path = simulate_tss(&model, &TraitValue::scalar(0.552), &TssOptions { horizon: 100.0, seed, ..Default::default() })?;
        let end = path.terminal_trait().0[0];
        if (end - target).abs() < 0.05 {
            close += 1;
        } else {
            far.push(end);
        }
        nested += nested_intervals_hold(&path, f) as usize;
    }
    Ok((close >= 48 && nested == 50, format!("{close}/50 terminal traits within 0.05 of the ESS (others {far:?}); nested intervals on {nested}/50 paths")))
}

fn c10() -> Check {
    let rep = tss_consistency(&build_example1(), 0.552, &[0.2, 0.1, 0.05], 100, 0.5, 101, 1)?;
    let d: Vec<String> = rep.rows.iter().map(|r| format!("eps {} -> {:.4}", r.epsilon, r.sup_distance)).collect();
    Ok((rep.monotone(), format!("100 paths on [0, 0.5]: {}", d.join(", "))))
}

fn c11() -> Check {
    let model = ModelId::new("example1").with("p", 0.0).build()?;
    let small = law_of_large_numbers(&model, 2.0, 100.0, 1.0, 20.0, 0.1, 30, 11, 5_000_000)?;
    let large = law_of_large_numbers(&model, 2.0, 1000.0, 1.0, 20.0, 0.1, 30, 12, 5_000_000)?;
    Ok((
        large.sup_distance < small.sup_distance,
        format!("sup distance {:.4} (n = 100) -> {:.4} (n = 1000), 30 replicates each", small.sup_distance, large.sup_distance),
    ))
}

fn c12() -> Check {
    let model = build_example2();
    let contour = JordanContour::default();
    let mut nonzero = Vec::new();
    for k in 1..40 {
        let x = k as f64 / 10.0;
        let w = stability_winding(&model, x, &contour)?;
        if w.winding != 0 {
            nonzero.push((x, w.winding));
        }
    }
    let mut synthetic = Vec::new();
    for (m, l0) in [(1u32, Complex64::new(3.0, 4.0)), (2, Complex64::new(0.5, -20.0)), (3, Complex64::new(45.0, 1.0))] {
        let w = winding_number(|l| Ok((l - l0).powu(m)), &contour)?;
        synthetic.push((m, w.winding));
    }
    let ok = nonzero.is_empty() && synthetic.iter().all(|&(m, w)| w == m as i64);
    Ok((ok, format!("39 traits, nonzero windings {nonzero:?}; synthetic (multiplicity, winding) {synthetic:?}")))
}

fn c13() -> Check {
    let dir = tempfile::tempdir()?;
    let outcomes = runner::reproduce("fig1c", dir.path(), 1)?;
    let b = &outcomes[0].summary["bimodality"];
    let passing = b["passing"].as_u64().unwrap_or(0);
    let modes: Vec<String> = b["verdicts"]
        .as_array()
        .map(|v| v.iter().map(|r| format!("p={:.3} modes={}", r["p_value"].as_f64().unwrap_or(f64::NAN), r["modes"])).collect())
        .unwrap_or_default();
    Ok((passing >= 7, format!("{passing}/10 seeds bimodal with modes straddling 3.2: {}", modes.join("; "))))
}

fn main() {
    let criteria: [(&str, fn() -> Check, u64); 13] = [
        ("equilibrium values, Example 1", c1, 10),
        ("viability window, Example 1", c2, 1),
        ("ESS and PIP boundary, Example 1", c3, 300),
        ("no-senescence ESS and boundary", c4, 60),
        ("Example 2 branching point", c5, 120),
        ("extinction-probability oracle triangle", c6, 300),
        ("diagonal normalization", c7, 60),
        ("gradient vs finite differences", c8, 120),
        ("TSS long-time behavior", c9, 600),
        ("canonical/TSS consistency", c10, 600),
        ("IBM/PDE law of large numbers", c11, 600),
        ("stability scan, Example 2", c12, 300),
        ("microscopic branching, fig1c", c13, 600),
    ];
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failures = 0;
    for (i, (name, check, limit)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let in_time = elapsed <= Duration::from_secs(*limit);
        let (ok, detail) = match result {
            Ok((ok, d)) => (ok && in_time, d),
            Err(e) => (false, format!("error: {e}")),
        };
        failures += !ok as usize;
        println!(
            "{} criterion {n:2} ({name}): {detail} [{:.1} s, limit {limit} s]",
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
    }
    if failures > 0 {
        eprintln!("{failures} criteria failed");
        std::process::exit(1);
    }
}
