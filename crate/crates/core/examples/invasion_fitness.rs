//! Extinction probabilities of single mutants, the fitness gradient, and
//! the classification of singular strategies.

use agedyn::demography::Analyzer;
use agedyn::fitness::singular::find_singular_points;
use agedyn::fitness::{classify_singularity, extinction_probability, fitness_gradient_generic};
use agedyn::models::{build_example1, build_example2};
use agedyn::TraitValue;

fn main() -> agedyn::Result<()> {
    let an = Analyzer::new(&build_example1())?;
    let resident = an.equilibrium(&TraitValue::scalar(2.0))?;
    for y in [1.8, 2.0, 2.2, 2.6, 3.0] {
        let r = extinction_probability(&an, &resident, &TraitValue::scalar(y))?;
        println!("x = 2.0, y = {y:.1}: z0 = {:.5}  invades = {}", r.z0, r.invadable);
    }
    for x in [1.0, 2.0, 2.5, 3.0] {
        println!("gradient at {x:.1}: {:+.5}", fitness_gradient_generic(&an, x)?);
    }
    for (name, model) in [("example1", build_example1()), ("example2", build_example2())] {
        let an = Analyzer::new(&model)?;
        for x in find_singular_points(&an, 0.05, 3.95, 200, 1e-12)? {
            println!("{name}: {:?}", classify_singularity(&an, x)?);
        }
    }
    Ok(())
}
