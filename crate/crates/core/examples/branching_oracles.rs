//! Three independent routes to a mutant's extinction probability: root of
//! the fitness function, fixed point of the offspring generating function,
//! and Monte Carlo of the age-structured branching process.

use agedyn::demography::Analyzer;
use agedyn::models::build_example1;
use agedyn::verify::{oracle_triangle, BranchingOptions};

fn main() -> agedyn::Result<()> {
    let an = Analyzer::new(&build_example1())?;
    let opts = BranchingOptions { replicates: 4000, seed: 3, survival_size: 500, ..Default::default() };
    for (x, y) in [(1.0, 2.0), (2.0, 2.5), (2.5, 3.0)] {
        let t = oracle_triangle(&an, x, y, &opts)?;
        let mc = &t.monte_carlo;
        println!(
            "x = {x}, y = {y}: root {:.5}  fixed point {:.5}  simulated {:.4} [{:.4}, {:.4}]  consistent {}",
            t.f_root, t.g_fixed_point, mc.extinction_frequency, mc.ci_low, mc.ci_high, t.consistent(1e-8)
        );
    }
    Ok(())
}
