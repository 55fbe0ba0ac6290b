//! Builds the reference models, tweaks a parameter, and prints net
//! reproduction rates and stationary population sizes.

use agedyn::demography::Analyzer;
use agedyn::models::ModelId;
use agedyn::TraitValue;

fn main() -> agedyn::Result<()> {
    for id in [
        ModelId::new("example1"),
        ModelId::new("example1").with("competition", 0.002),
        ModelId::new("example1-no-senescence"),
        ModelId::new("example1-age-logistic"),
    ] {
        let model = id.build()?;
        let an = Analyzer::new(&model)?;
        println!("{} {:?}", model.name, id.overrides);
        for x in [0.5, 1.5, 2.5, 3.5] {
            let r0 = an.net_reproduction_rate(&[x]);
            let eq = an.equilibrium(&TraitValue::scalar(x))?;
            println!("  x = {x:.1}  R0 = {r0:8.4}  mass = {:10.3}  newborns = {:9.3}", eq.mass, eq.m0);
        }
    }
    Ok(())
}
