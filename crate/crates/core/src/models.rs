//! Registry of the concrete models: logistic competition with senescence
//! ("example1"), its age-independent-fertility variant, the age-logistic
//! Kisdi variant, and the age-weighted Kisdi model ("example2").

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    AgeGridSpec, Derivatives, Interaction, ModelFamily, ModelSpec, MutationKernel, RateBounds,
    TraitBox,
};

pub const DEFAULT_MUTATION_PROB: f64 = 0.13;
pub const DEFAULT_MUTATION_VARIANCE: f64 = 0.15;
pub const DEFAULT_COMPETITION: f64 = 0.001;
pub const DEFAULT_NATURAL_DEATH: f64 = 0.25;
pub const KISDI_C: f64 = 0.002;
pub const KISDI_NU: f64 = 1.2;
pub const KISDI_K: f64 = 4.0;

/// Kisdi's asymmetric competition kernel `C(1 − 1/(1 + ν e^{−k(x−y)}))`.
pub fn kisdi(c: f64, nu: f64, k: f64, x: f64, y: f64) -> f64 {
    c * (1.0 - 1.0 / (1.0 + nu * (-k * (x - y)).exp()))
}

/// ∂ₓ of [`kisdi`].
pub fn kisdi_dx(c: f64, nu: f64, k: f64, x: f64, y: f64) -> f64 {
    let s = nu * (-k * (x - y)).exp();
    -c * k * s / ((1.0 + s) * (1.0 + s))
}

/// A registered model name plus numeric parameter overrides.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelId {
    pub name: String,
    #[serde(default)]
    pub overrides: BTreeMap<String, f64>,
}

impl ModelId {
    pub fn new(name: &str) -> Self {
        ModelId { name: name.to_string(), overrides: BTreeMap::new() }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.overrides.insert(key.to_string(), value);
        self
    }

    pub fn build(&self) -> Result<ModelSpec> {
        let allowed: &[&str] = match self.name.as_str() {
            "example1" | "example1-no-senescence" => &["competition", "natural_death"],
            "example1-age-logistic" => &["natural_death", "C", "nu", "k"],
            "example2" => &["C", "nu", "k"],
            other => return Err(Error::Config(format!("unknown model '{other}'; known: {}", MODEL_NAMES.join(", ")))),
        };
        for key in self.overrides.keys() {
            let common = ["p", "sigma2", "a_max", "panel_width"];
            if !allowed.contains(&key.as_str()) && !common.contains(&key.as_str()) {
                return Err(Error::Config(format!("model '{}' has no parameter '{key}'", self.name)));
            }
        }
        let get = |k: &str, default: f64| self.overrides.get(k).copied().unwrap_or(default);
        let mut m = match self.name.as_str() {
            "example1" => example1_with(get("competition", DEFAULT_COMPETITION), get("natural_death", DEFAULT_NATURAL_DEATH)),
            "example1-no-senescence" => example1_no_senescence_with(
                get("competition", DEFAULT_COMPETITION),
                get("natural_death", DEFAULT_NATURAL_DEATH),
            ),
            "example1-age-logistic" => age_logistic_kisdi_with(
                get("natural_death", DEFAULT_NATURAL_DEATH),
                get("C", KISDI_C),
                get("nu", KISDI_NU),
                get("k", KISDI_K),
            ),
            _ => example2_with(get("C", KISDI_C), get("nu", KISDI_NU), get("k", KISDI_K)),
        };
        let p = get("p", DEFAULT_MUTATION_PROB);
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Config(format!("mutation probability {p} outside [0, 1]")));
        }
        m.mutation_prob = p;
        m.kernel = MutationKernel::gaussian(get("sigma2", DEFAULT_MUTATION_VARIANCE))
            .map_err(|e| Error::Config(e.to_string()))?;
        m.age_grid.a_max = get("a_max", m.age_grid.a_max);
        m.age_grid.panel_width = get("panel_width", m.age_grid.panel_width);
        if !(m.age_grid.a_max > 0.0 && m.age_grid.panel_width > 0.0) {
            return Err(Error::Config("age grid parameters must be positive".into()));
        }
        for (k, v) in &self.overrides {
            if !v.is_finite() {
                return Err(Error::Config(format!("parameter '{k}' is not finite")));
            }
        }
        Ok(m)
    }
}

pub const MODEL_NAMES: [&str; 4] = ["example1", "example1-no-senescence", "example1-age-logistic", "example2"];

fn default_kernel() -> MutationKernel {
    MutationKernel::TruncatedGaussian { variance: DEFAULT_MUTATION_VARIANCE }
}

/// Senescent fertility `x(4−x)e^{−a}`, natural death 1/4, logistic competition
/// `0.001(4−x)` exerted by every individual.
pub fn build_example1() -> ModelSpec {
    example1_with(DEFAULT_COMPETITION, DEFAULT_NATURAL_DEATH)
}

pub fn example1_with(competition: f64, natural_death: f64) -> ModelSpec {
    let c = competition;
    ModelSpec {
        name: "example1".into(),
        family: ModelFamily::Example1 { competition, natural_death },
        trait_box: TraitBox::interval(0.0, 4.0),
        birth: Arc::new(|x, a| x[0] * (4.0 - x[0]) * (-a).exp()),
        death: Arc::new(move |_, _| natural_death),
        interaction: Interaction::Separable {
            focal: Arc::new(|_| 1.0),
            competitor: Arc::new(|_| 1.0),
            kernel: Arc::new(move |x, _| c * (4.0 - x[0])),
        },
        mutation_prob: DEFAULT_MUTATION_PROB,
        kernel: default_kernel(),
        bounds: RateBounds {
            b_max: 4.0,
            d_min: natural_death,
            d_max: natural_death,
            u_min: 0.0,
            u_max: 4.0 * c,
            u_age_slope: 0.0,
        },
        age_grid: AgeGridSpec { a_max: 30.0, panel_width: 0.5, per_panel: 10 },
        derivatives: Derivatives {
            birth: Some(Arc::new(|x, a| (4.0 - 2.0 * x[0]) * (-a).exp())),
            death: Some(Arc::new(|_, _| 0.0)),
            kernel: Some(Arc::new(move |_, _| -c)),
            interaction: None,
        },
        birth_age_independent: false,
        interaction_cap: Some(Arc::new(move |x| c * (4.0 - x[0]))),
    }
}

/// As [`build_example1`] with fertility `x(4−x)` at every age.
pub fn build_example1_no_senescence() -> ModelSpec {
    example1_no_senescence_with(DEFAULT_COMPETITION, DEFAULT_NATURAL_DEATH)
}

pub fn example1_no_senescence_with(competition: f64, natural_death: f64) -> ModelSpec {
    let mut m = example1_with(competition, natural_death);
    m.name = "example1-no-senescence".into();
    m.family = ModelFamily::Example1NoSenescence { competition, natural_death };
    m.birth = Arc::new(|x, _| x[0] * (4.0 - x[0]));
    m.derivatives.birth = Some(Arc::new(|x, _| 4.0 - 2.0 * x[0]));
    m.birth_age_independent = true;
    m
}

/// Senescent fertility with competition `a·U(x,y)`, `U` the Kisdi kernel.
pub fn build_example1_age_logistic_kisdi() -> ModelSpec {
    age_logistic_kisdi_with(DEFAULT_NATURAL_DEATH, KISDI_C, KISDI_NU, KISDI_K)
}

pub fn age_logistic_kisdi_with(natural_death: f64, c: f64, nu: f64, k: f64) -> ModelSpec {
    let mut m = example1_with(DEFAULT_COMPETITION, natural_death);
    m.name = "example1-age-logistic".into();
    m.family = ModelFamily::AgeLogisticKisdi { natural_death, c, nu, k };
    m.interaction = Interaction::Separable {
        focal: Arc::new(|a| a),
        competitor: Arc::new(|_| 1.0),
        kernel: Arc::new(move |x, y| kisdi(c, nu, k, x[0], y[0])),
    };
    m.derivatives.kernel = Some(Arc::new(move |x, y| kisdi_dx(c, nu, k, x[0], y[0])));
    m.bounds.u_max = 0.0;
    m.bounds.u_age_slope = c;
    m.interaction_cap = None;
    m
}

/// Fertility `x(4−x)`, no natural death, competition `a(1+e^{−α})U(x,y)`.
pub fn build_example2() -> ModelSpec {
    example2_with(KISDI_C, KISDI_NU, KISDI_K)
}

pub fn example2_with(c: f64, nu: f64, k: f64) -> ModelSpec {
    ModelSpec {
        name: "example2".into(),
        family: ModelFamily::Example2 { c, nu, k },
        trait_box: TraitBox::interval(0.0, 4.0),
        birth: Arc::new(|x, _| x[0] * (4.0 - x[0])),
        death: Arc::new(|_, _| 0.0),
        interaction: Interaction::Separable {
            focal: Arc::new(|a| a),
            competitor: Arc::new(|alpha| 1.0 + (-alpha).exp()),
            kernel: Arc::new(move |x, y| kisdi(c, nu, k, x[0], y[0])),
        },
        mutation_prob: DEFAULT_MUTATION_PROB,
        kernel: default_kernel(),
        bounds: RateBounds { b_max: 4.0, d_min: 0.0, d_max: 0.0, u_min: 0.0, u_max: 0.0, u_age_slope: 2.0 * c },
        age_grid: AgeGridSpec { a_max: 40.0, panel_width: 0.25, per_panel: 10 },
        derivatives: Derivatives {
            birth: Some(Arc::new(|x, _| 4.0 - 2.0 * x[0])),
            death: Some(Arc::new(|_, _| 0.0)),
            kernel: Some(Arc::new(move |x, y| kisdi_dx(c, nu, k, x[0], y[0]))),
            interaction: None,
        },
        birth_age_independent: true,
        interaction_cap: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example1_rates() {
        let m = build_example1();
        assert_eq!(m.b(&[2.0], 0.0), 4.0);
        assert_eq!(m.b(&[0.0], 3.0), 0.0);
        // total death at mass 1375
        let d = m.d(&[2.0], 0.0) + 1375.0 * m.u(&[2.0], 0.0, &[2.0], 0.0);
        assert!((d - 3.0).abs() < 1e-12);
        assert_eq!(m.mutation_prob, 0.13);
        assert_eq!(m.kernel.variance(), 0.15);
    }

    #[test]
    fn no_senescence_rates() {
        let m = build_example1_no_senescence();
        assert_eq!(m.b(&[2.0], 10.0), 4.0);
        assert_eq!(m.b(&[4.0], 0.0), 0.0);
    }

    #[test]
    fn kisdi_kernel() {
        let m = build_example1_age_logistic_kisdi();
        let u = m.u(&[1.7], 1.0, &[1.7], 0.0);
        assert!((u - 0.002 * 1.2 / 2.2).abs() < 1e-15);
        let mut prev = f64::INFINITY;
        for i in 0..100 {
            let x = -4.0 + 8.0 * i as f64 / 99.0;
            let v = kisdi(KISDI_C, KISDI_NU, KISDI_K, x, 0.0);
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn example2_rates() {
        let m = build_example2();
        assert_eq!(m.d(&[1.0], 5.0), 0.0);
        let u0 = m.u(&[1.0], 0.7, &[2.0], 0.0);
        assert!((u0 - 2.0 * 0.7 * kisdi(KISDI_C, KISDI_NU, KISDI_K, 1.0, 2.0)).abs() < 1e-15);
        let uinf = m.u(&[1.0], 0.7, &[2.0], 800.0);
        assert!((uinf - 0.7 * kisdi(KISDI_C, KISDI_NU, KISDI_K, 1.0, 2.0)).abs() < 1e-15);
    }

    #[test]
    fn analytic_derivatives_match_differences() {
        for m in [build_example1(), build_example1_no_senescence(), build_example1_age_logistic_kisdi(), build_example2()] {
            let mut fd = m.clone();
            fd.derivatives = Derivatives::default();
            for &(x, a, y) in &[(0.7, 0.3, 1.9), (2.5, 1.1, 2.4), (3.6, 2.0, 0.4)] {
                assert!((m.birth_dx(x, a) - fd.birth_dx(x, a)).abs() < 1e-7);
                assert!((m.death_dx(x, a) - fd.death_dx(x, a)).abs() < 1e-7);
                let (u1, u2) = (m.interaction_dx(x, a, y, 0.5), fd.interaction_dx(x, a, y, 0.5));
                assert!((u1 - u2).abs() < 1e-9, "{}: {u1} vs {u2}", m.name);
            }
        }
    }

    #[test]
    fn registry_overrides() {
        let m = ModelId::new("example1").with("competition", 0.002).with("p", 0.5).build().unwrap();
        assert!((m.u(&[2.0], 0.0, &[2.0], 0.0) - 0.004).abs() < 1e-15);
        assert_eq!(m.mutation_prob, 0.5);
        assert!(ModelId::new("example1").with("nu", 1.0).build().is_err());
        assert!(ModelId::new("nope").build().is_err());
        assert!(ModelId::new("example2").with("p", 1.5).build().is_err());
    }
}
