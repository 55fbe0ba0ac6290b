//! Randomized checks of the structural invariants.

use agedyn::demography::Analyzer;
use agedyn::fitness::{extinction_probability, g_scalar, fitness_gradient_generic, FitnessFunction};
use agedyn::ibm::{simulate, IbmOptions, PopulationState};
use agedyn::models::{build_example1, build_example2, ModelId, MODEL_NAMES};
use agedyn::stability::{winding_number, JordanContour};
use agedyn::tss::{simulate_tss, TssOptions};
use agedyn::verify::LinearBranchingSpec;
use agedyn::{ModelSpec, TraitValue};
use num_complex::Complex64;
use proptest::prelude::*;
use std::sync::OnceLock;

fn models() -> &'static Vec<(ModelSpec, Analyzer)> {
    static M: OnceLock<Vec<(ModelSpec, Analyzer)>> = OnceLock::new();
    M.get_or_init(|| {
        MODEL_NAMES
            .iter()
            .map(|n| {
                let m = ModelId::new(n).build().unwrap();
                let an = Analyzer::new(&m).unwrap();
                (m, an)
            })
            .collect()
    })
}

/// A viable trait for model `k`, found from a uniform draw on the box.
fn viable(k: usize, u: f64) -> Option<f64> {
    let (_, an) = &models()[k];
    let x = 0.05 + 3.9 * u;
    (an.net_reproduction_rate(&[x]) > 1.0 + 1e-6).then_some(x)
}

fn simpson(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (hi - lo) / n as f64;
    let mut s = f(lo) + f(hi);
    for i in 1..n {
        s += f(lo + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    #[test]
    fn rates_respect_declared_bounds(k in 0usize..4, x in 0.0f64..=4.0, a in 0.0f64..30.0, y in 0.0f64..=4.0, al in 0.0f64..30.0) {
        let (m, _) = &models()[k];
        let b = m.b(&[x], a);
        let d = m.d(&[x], a);
        let u = m.u(&[x], a, &[y], al);
        prop_assert!(b >= 0.0 && b <= m.bounds.b_max * (1.0 + 1e-12));
        prop_assert!(d >= m.bounds.d_min - 1e-12 && d <= m.bounds.d_max * (1.0 + 1e-12));
        prop_assert!(u >= m.bounds.u_min - 1e-15 && u <= m.bounds.interaction_bound(a.max(al)) * (1.0 + 1e-12));
    }

    #[test]
    fn mutation_kernel_is_normalized(k in 0usize..4, x in 0.0f64..=4.0) {
        let (m, _) = &models()[k];
        let bx = &m.trait_box;
        let total = simpson(|h| m.kernel.density(&[x], &[h], bx), bx.lo[0] - x, bx.hi[0] - x, 40_000);
        prop_assert!((total - 1.0).abs() < 1e-8, "{total}");
    }

    #[test]
    fn kisdi_kernel_decreases_in_difference(y in 0.0f64..=4.0, x1 in 0.0f64..=4.0, dx in 0.01f64..1.0) {
        let k = |x: f64| agedyn::models::kisdi(2.0, 1.2, 4.0, x, y);
        prop_assert!(k(x1 + dx) < k(x1));
    }

    #[test]
    fn diagonal_extinction_is_one(k in 0usize..4, u in 0.0f64..1.0) {
        if let Some(x) = viable(k, u) {
            let (_, an) = &models()[k];
            let eq = an.equilibrium(&TraitValue::scalar(x)).unwrap();
            let r = extinction_probability(an, &eq, &TraitValue::scalar(x)).unwrap();
            prop_assert!((r.g_value - 1.0).abs() < 1e-8, "g(x,x) = {}", r.g_value);
            prop_assert!((r.z0 - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn fitness_report_is_consistent(k in 0usize..4, u in 0.0f64..1.0, y in 0.02f64..3.98) {
        if let Some(x) = viable(k, u) {
            let (_, an) = &models()[k];
            let eq = an.equilibrium(&TraitValue::scalar(x)).unwrap();
            let r = extinction_probability(an, &eq, &TraitValue::scalar(y)).unwrap();
            prop_assert!((0.0..=1.0).contains(&r.z0));
            prop_assert_eq!(r.z0, r.g_value.min(1.0));
            prop_assert_eq!(r.invadable, r.invasion_integral > 1.0);
            prop_assert_eq!(r.invadable, r.z0 < 1.0);
            let f = FitnessFunction::new(an, &[y], &eq).unwrap();
            // F(0) < 0 and F increasing
            let f0 = f.value(0.0);
            prop_assert!(f0 < 0.0);
            let mut prev = f0;
            for i in 1..=10 {
                let v = f.value(i as f64 / 10.0);
                prop_assert!(v > prev);
                prev = v;
            }
            if r.invadable {
                prop_assert!(f.value(r.z0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn equilibria_satisfy_the_balance_condition(k in 0usize..4, u in 0.0f64..1.0) {
        if let Some(x) = viable(k, u) {
            let (_, an) = &models()[k];
            let eq = an.equilibrium(&TraitValue::scalar(x)).unwrap();
            let integral = an.invasion_integral(&[x], &eq).unwrap();
            prop_assert!((integral - 1.0).abs() < 1e-6, "{integral}");
            prop_assert!(eq.density.iter().all(|v| *v >= 0.0));
        }
    }

    #[test]
    fn constant_rates_match_the_explicit_formula(b in 0.1f64..5.0, d in 0.1f64..5.0) {
        let spec = LinearBranchingSpec::constant(b, d, 60.0 / d.min(b).max(0.5)).unwrap();
        let expected = (d / b).min(1.0);
        prop_assert!((spec.generation_gw_extinction() - expected).abs() < 1e-8);
    }

    #[test]
    fn synthetic_windings_count_multiplicity(re in 1.0f64..40.0, im in -40.0f64..40.0, m in 0u32..4) {
        let l0 = Complex64::new(re, im);
        let c = JordanContour::default();
        let w = winding_number(|l| Ok((l - l0).powu(m)), &c).unwrap();
        prop_assert_eq!(w.winding, m as i64);
        let outside = Complex64::new(-re, im);
        let w = winding_number(|l| Ok((l - outside).powu(m)), &c).unwrap();
        prop_assert_eq!(w.winding, 0);
    }

    #[test]
    fn contour_is_closed(r in 1.0f64..100.0, h in 1.0f64..100.0) {
        let c = JordanContour::indented_rectangle(r, h, 1e-3, 100).unwrap();
        let first = c.segments.first().unwrap().point(0.0);
        let last = c.segments.last().unwrap().point(1.0);
        prop_assert!((first - last).norm() < 1e-12);
        for pair in c.segments.windows(2) {
            prop_assert!((pair[0].point(1.0) - pair[1].point(0.0)).norm() < 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 20, ..ProptestConfig::default() })]

    #[test]
    fn gradient_matches_finite_differences(ex2 in any::<bool>(), u in 0.0f64..1.0) {
        let k = if ex2 { 3 } else { 0 };
        if let Some(x) = viable(k, 0.05 + 0.9 * u) {
            let (_, an) = &models()[k];
            let eps = 1e-4;
            let fd = (g_scalar(an, x + eps, x).unwrap() - g_scalar(an, x - eps, x).unwrap()) / (2.0 * eps);
            let g = fitness_gradient_generic(an, x).unwrap();
            prop_assert!((fd - g).abs() <= 1e-4 * g.abs().max(1e-2), "x = {x}: {g} vs {fd}");
        }
    }

    #[test]
    fn ibm_states_stay_consistent(seed in 0u64..1000, x in 1.0f64..3.0) {
        let model = build_example1();
        let init = PopulationState::monomorphic(&TraitValue::scalar(x), 50, 1.0, 10.0, seed).unwrap();
        let opts = IbmOptions { horizon: 2.0, seed, record_events: true, snapshot_times: vec![0.5, 1.0, 2.0], ..Default::default() };
        let run = simulate(&model, init, &opts).unwrap();
        for s in run.snapshots.iter().chain(std::iter::once(&run.final_state)) {
            prop_assert!((s.mass() - s.len() as f64 / 10.0).abs() < 1e-12);
            for i in 0..s.len() {
                prop_assert!(s.age_of(i) >= 0.0);
                prop_assert!(model.trait_box.contains(s.trait_of(i)));
            }
        }
        let ev = run.events.unwrap().events;
        prop_assert!(ev.windows(2).all(|w| w[0].time <= w[1].time));
    }

    #[test]
    fn tss_paths_are_well_formed(seed in 0u64..1000, x0 in 0.6f64..3.4) {
        let model = build_example1();
        let path = simulate_tss(&model, &TraitValue::scalar(x0), &TssOptions { horizon: 5.0, seed, ..Default::default() }).unwrap();
        for w in path.jumps.windows(2) {
            prop_assert!(w[1].time > w[0].time);
            prop_assert!(w[1].trait_value != w[0].trait_value);
            prop_assert!(w[1].invasion_probability > 0.0);
        }
    }

    #[test]
    fn example2_mutual_invasion_near_branching(h in 0.01f64..0.05) {
        // both morphs invade each other close to the branching point
        let m = build_example2();
        let an = Analyzer::new(&m).unwrap();
        let xs = agedyn::demography::closed_form::example2_singular_point(1.2, 4.0);
        let g1 = g_scalar(&an, xs + h, xs - h).unwrap();
        let g2 = g_scalar(&an, xs - h, xs + h).unwrap();
        prop_assert!(g1 < 1.0 && g2 < 1.0, "{g1} {g2}");
    }
}
