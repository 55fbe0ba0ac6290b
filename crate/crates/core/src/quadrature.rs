//! Quadrature rules used throughout: Gauss–Legendre panels on a truncated
//! age axis (with cumulative integrals at the nodes) and an adaptive
//! Gauss–Kronrod integrator for one-off integrals and oracles.

use crate::error::{Error, Result};

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n
        let mut t = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, t);
            dp = d;
            let dt = p / d;
            t -= dt;
            if dt.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, t);
        if d.is_finite() {
            dp = d;
        }
        let w = 2.0 / ((1.0 - t * t) * dp * dp);
        nodes[i] = -t;
        nodes[n - 1 - i] = t;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, t: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = t;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (t * p1 - p0) / (t * t - 1.0);
    (p1, d)
}

/// Composite Gauss–Legendre rule on `[0, a_max]` with equal panels.
///
/// Besides plain integration it provides running integrals
/// `∫₀^{aᵢ} f` at every node, exact for polynomials of degree `< q` on each
/// panel. Age-cumulative hazards are smooth, so this is spectrally accurate.
#[derive(Debug, Clone)]
pub struct AgeQuadrature {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    a_max: f64,
    panel_width: f64,
    per_panel: usize,
    /// row-major q×q: ∫_{panel start}^{node i} ℓ_j
    cum: Vec<f64>,
}

impl AgeQuadrature {
    pub fn new(a_max: f64, panel_width: f64, per_panel: usize) -> Result<Self> {
        if !(a_max > 0.0 && panel_width > 0.0 && per_panel >= 2) {
            return Err(Error::invalid("age quadrature needs a_max > 0, width > 0, q >= 2"));
        }
        let panels = (a_max / panel_width).ceil().max(1.0) as usize;
        let h = a_max / panels as f64;
        let (t, w) = gauss_legendre(per_panel);
        let mut nodes = Vec::with_capacity(panels * per_panel);
        let mut weights = Vec::with_capacity(panels * per_panel);
        for p in 0..panels {
            let a0 = p as f64 * h;
            for k in 0..per_panel {
                nodes.push(a0 + 0.5 * h * (t[k] + 1.0));
                weights.push(0.5 * h * w[k]);
            }
        }
        let q = per_panel;
        let mut cum = vec![0.0; q * q];
        for i in 0..q {
            // ∫_{-1}^{t_i} ℓ_j(s) ds with a q-point rule on [-1, t_i]
            let half = 0.5 * (t[i] + 1.0);
            for k in 0..q {
                let s = -1.0 + half * (t[k] + 1.0);
                for j in 0..q {
                    let mut l = 1.0;
                    for m in 0..q {
                        if m != j {
                            l *= (s - t[m]) / (t[j] - t[m]);
                        }
                    }
                    cum[i * q + j] += half * w[k] * l;
                }
            }
            for j in 0..q {
                cum[i * q + j] *= 0.5 * h;
            }
        }
        Ok(AgeQuadrature { nodes, weights, a_max, panel_width: h, per_panel, cum })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn a_max(&self) -> f64 {
        self.a_max
    }

    pub fn panel_width(&self) -> f64 {
        self.panel_width
    }

    pub fn per_panel(&self) -> usize {
        self.per_panel
    }

    /// Samples `f` at every node.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.nodes.iter().map(|&a| f(a)).collect()
    }

    pub fn integrate(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.nodes.len());
        values.iter().zip(&self.weights).map(|(v, w)| v * w).sum()
    }

    pub fn integrate_fn(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&a, w)| f(a) * w).sum()
    }

    /// Running integral `∫₀^{aᵢ} f` at each node, written into `out`.
    pub fn cumulative_into(&self, values: &[f64], out: &mut [f64]) {
        let q = self.per_panel;
        let mut base = 0.0;
        for (p, chunk) in values.chunks_exact(q).enumerate() {
            for i in 0..q {
                let row = &self.cum[i * q..(i + 1) * q];
                let s: f64 = row.iter().zip(chunk).map(|(c, v)| c * v).sum();
                out[p * q + i] = base + s;
            }
            let w = &self.weights[p * q..(p + 1) * q];
            base += w.iter().zip(chunk).map(|(w, v)| w * v).sum::<f64>();
        }
    }

    pub fn cumulative(&self, values: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; values.len()];
        self.cumulative_into(values, &mut out);
        out
    }

    /// Total integral over the full panel range (the value of the running
    /// integral at `a_max`).
    pub fn total(&self, values: &[f64]) -> f64 {
        self.integrate(values)
    }
}

// Gauss–Kronrod 7/15 abscissae and weights.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut rk = fc * WGK[7];
    let mut rg = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        rk += WGK[j] * s;
        if j % 2 == 1 {
            rg += WG[j / 2] * s;
        }
    }
    (rk * h, ((rk - rg) * h).abs())
}

/// Globally adaptive Gauss–Kronrod integration on a finite interval.
pub fn integrate_adaptive(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let (v, e) = gk15(&mut f, a, b);
    let mut segs: Vec<(f64, f64, f64, f64)> = vec![(a, b, v, e)];
    for _ in 0..5000 {
        let total: f64 = segs.iter().map(|s| s.2).sum();
        let err: f64 = segs.iter().map(|s| s.3).sum();
        if !total.is_finite() {
            return Err(Error::NonFinite("integrand not finite".into()));
        }
        if err <= abs_tol.max(rel_tol * total.abs()) {
            return Ok(total);
        }
        let (k, _) = segs
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("nonempty");
        let (lo, hi, _, _) = segs.swap_remove(k);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&mut f, lo, mid);
        let (v2, e2) = gk15(&mut f, mid, hi);
        segs.push((lo, mid, v1, e1));
        segs.push((mid, hi, v2, e2));
    }
    let err: f64 = segs.iter().map(|s| s.3).sum();
    Err(Error::NoConvergence { iterations: 5000, residual: err })
}

/// `∫₀^∞ f` by mapping `a = t/(1−t)`.
pub fn integrate_half_line(
    mut f: impl FnMut(f64) -> f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<f64> {
    integrate_adaptive(
        |t| {
            if t >= 1.0 {
                return 0.0;
            }
            let s = 1.0 - t;
            let v = f(t / s) / (s * s);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        abs_tol,
        rel_tol,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_rule_is_exact_for_polynomials() {
        for n in 1..=20 {
            let (t, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13, "n = {n}");
            for deg in 0..(2 * n) {
                let q: f64 = t.iter().zip(&w).map(|(t, w)| w * t.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((q - exact).abs() < 1e-12, "n = {n}, deg = {deg}");
            }
        }
    }

    #[test]
    fn cumulative_of_exponential() {
        let q = AgeQuadrature::new(20.0, 0.5, 10).unwrap();
        let v = q.sample(|a| (-0.7 * a).exp());
        let c = q.cumulative(&v);
        for (a, c) in q.nodes.iter().zip(&c) {
            let exact = (1.0 - (-0.7 * a).exp()) / 0.7;
            assert!((c - exact).abs() < 1e-14, "a = {a}");
        }
        assert!((q.integrate(&v) - (1.0 - (-14.0f64).exp()) / 0.7).abs() < 1e-14);
    }

    #[test]
    fn adaptive_kronrod_handles_peaks() {
        let v = integrate_adaptive(|x| 1.0 / (1e-4 + x * x), -1.0, 1.0, 1e-12, 1e-12).unwrap();
        let exact = 2.0 * (1.0f64 / 1e-2).atan() / 1e-2;
        assert!((v - exact).abs() < 1e-8 * exact);
        let g = integrate_half_line(|a| (-a * a / 2.0).exp(), 1e-13, 1e-13).unwrap();
        assert!((g - (std::f64::consts::PI / 2.0).sqrt()).abs() < 1e-11);
    }
}
