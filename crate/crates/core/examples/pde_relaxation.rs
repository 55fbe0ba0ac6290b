//! The deterministic age-structured PDE relaxes to the stationary profile.

use agedyn::demography::pde::{integrate_monomorphic, AgeDensity, AgeGrid, PdeOptions};
use agedyn::demography::Analyzer;
use agedyn::models::build_example1;
use agedyn::TraitValue;

fn main() -> agedyn::Result<()> {
    let model = build_example1();
    let x = 2.0;
    let grid = AgeGrid::new(40.0, 4000)?;
    let init = AgeDensity::from_fn(grid, |a| 10.0 * (-a).exp());
    let opts = PdeOptions { cells: 4000, a_max: Some(40.0), record_every: 0.0, ..Default::default() };
    let eq = Analyzer::new(&model)?.equilibrium(&TraitValue::scalar(x))?;
    for t_end in [1.0, 5.0, 10.0, 20.0, 40.0] {
        let run = integrate_monomorphic(&model, &[x], init.clone(), t_end, &opts)?;
        let k = run.times.len() - 1;
        println!("t = {t_end:5.1}  mass = {:10.3}  (stationary {:.3})", run.total_mass(k), eq.mass);
    }
    Ok(())
}
