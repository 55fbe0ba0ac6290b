//! Pairwise invasibility plots on a regular grid of (resident, mutant).

use serde::{Deserialize, Serialize};

use super::FitnessFunction;
use crate::demography::Analyzer;
use crate::error::Result;
use crate::model::TraitValue;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PipCell {
    /// The resident is not viable.
    NonViable,
    /// The mutant's lineage survives with positive probability.
    Invades,
    Resists,
    /// The numerical evaluation failed.
    Failed,
}

impl PipCell {
    pub fn symbol(self) -> char {
        match self {
            PipCell::NonViable => '.',
            PipCell::Invades => '+',
            PipCell::Resists => '-',
            PipCell::Failed => '?',
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PipSpec {
    pub n: usize,
    pub lo: f64,
    pub hi: f64,
}

impl PipSpec {
    pub fn cell_width(&self) -> f64 {
        (self.hi - self.lo) / self.n as f64
    }

    /// Cell-centre coordinates.
    pub fn centres(&self) -> Vec<f64> {
        let h = self.cell_width();
        (0..self.n).map(|i| self.lo + (i as f64 + 0.5) * h).collect()
    }
}

/// `cells[i][j]` is the outcome for resident `xs[i]` and mutant `xs[j]`;
/// `fitness` holds the invasion integral minus one (`NaN` where undefined).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PipGrid {
    pub spec: PipSpec,
    pub xs: Vec<f64>,
    pub cells: Vec<Vec<PipCell>>,
    pub fitness: Vec<Vec<f64>>,
}

/// Evaluates the pairwise invasibility plot. The diagonal is `Resists`.
pub fn pip(an: &Analyzer, spec: PipSpec) -> Result<PipGrid> {
    let xs = spec.centres();
    let n = xs.len();
    let mut cells = vec![vec![PipCell::Failed; n]; n];
    let mut fitness = vec![vec![f64::NAN; n]; n];
    for (i, &x) in xs.iter().enumerate() {
        let eq = match an.equilibrium(&TraitValue::scalar(x)) {
            Ok(eq) => eq,
            Err(_) => continue,
        };
        if eq.trivial {
            cells[i].fill(PipCell::NonViable);
            continue;
        }
        for (j, &y) in xs.iter().enumerate() {
            if i == j {
                cells[i][j] = PipCell::Resists;
                fitness[i][j] = 0.0;
                continue;
            }
            if let Ok(f) = FitnessFunction::new(an, &[y], &eq) {
                let v = f.invasion_integral() - 1.0;
                if v.is_finite() || v == f64::INFINITY {
                    fitness[i][j] = v;
                    cells[i][j] = if v > 0.0 { PipCell::Invades } else { PipCell::Resists };
                }
            }
        }
    }
    Ok(PipGrid { spec, xs, cells, fitness })
}

/// Disagreements between a computed plot and a reference classification.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct PipComparison {
    pub compared: usize,
    pub mismatches: usize,
    /// Mismatches farther than one cell from both `y = x` and `y = f(x)`.
    pub far_mismatches: usize,
    pub failed: usize,
}

impl PipGrid {
    /// Compares against `expected(x, y)` (`None` for a non-viable resident).
    /// A mismatch is tolerated when the cell lies within one cell of the
    /// diagonal or of the nontrivial boundary `y = f(x)`.
    pub fn compare(
        &self,
        expected: impl Fn(f64, f64) -> Option<bool>,
        boundary: impl Fn(f64) -> Option<f64>,
    ) -> PipComparison {
        let h = self.spec.cell_width();
        let mut out = PipComparison::default();
        for (i, &x) in self.xs.iter().enumerate() {
            for (j, &y) in self.xs.iter().enumerate() {
                let got = self.cells[i][j];
                if got == PipCell::Failed {
                    out.failed += 1;
                    continue;
                }
                let want = expected(x, y);
                out.compared += 1;
                let ok = match (want, got) {
                    (None, PipCell::NonViable) => true,
                    (Some(true), PipCell::Invades) => true,
                    (Some(false), PipCell::Resists) => true,
                    _ => false,
                };
                if ok {
                    continue;
                }
                out.mismatches += 1;
                let near_diag = (y - x).abs() <= h * (1.0 + 1e-9);
                let near_curve = [x - h, x, x + h]
                    .iter()
                    .filter_map(|&xx| boundary(xx))
                    .fold(None, |acc: Option<(f64, f64)>, f| match acc {
                        None => Some((f, f)),
                        Some((a, b)) => Some((a.min(f), b.max(f))),
                    })
                    .is_some_and(|(a, b)| y >= a - h && y <= b + h);
                if !(near_diag || near_curve) {
                    out.far_mismatches += 1;
                }
            }
        }
        out
    }

    /// Text rendering with rows of increasing mutant trait from bottom to top.
    pub fn render_ascii(&self) -> String {
        let n = self.xs.len();
        let mut s = String::with_capacity(n * (n + 1));
        for j in (0..n).rev() {
            for i in 0..n {
                s.push(self.cells[i][j].symbol());
            }
            s.push('\n');
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demography::closed_form::*;
    use crate::models::*;

    #[test]
    fn coarse_example1_plot_matches_closed_form() {
        let an = Analyzer::new(&build_example1()).unwrap();
        let grid = pip(&an, PipSpec { n: 40, lo: 0.0, hi: 4.0 }).unwrap();
        let expected = |x: f64, y: f64| {
            (example1_r0(x, 0.25) > 1.0).then(|| {
                let m = example1_mass(x, 0.001, 0.25);
                y * (4.0 - y) / (1.25 + 0.001 * (4.0 - y) * m) > 1.0
            })
        };
        let cmp = grid.compare(expected, |x| invasion_boundary_example1(x).ok());
        assert_eq!(cmp.failed, 0);
        assert_eq!(cmp.far_mismatches, 0, "{cmp:?}");
        assert!(grid.render_ascii().contains('+'));
    }
}
