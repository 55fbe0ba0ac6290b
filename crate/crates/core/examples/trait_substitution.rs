//! Trait substitution sequences: rare mutations, each invading mutant
//! replaces the resident.

use agedyn::models::build_example1;
use agedyn::tss::{simulate_tss, TssOptions};
use agedyn::TraitValue;

fn main() -> agedyn::Result<()> {
    let model = build_example1();
    for seed in 1..=3 {
        let path = simulate_tss(&model, &TraitValue::scalar(0.552), &TssOptions { horizon: 100.0, seed, ..Default::default() })?;
        println!("seed {seed}: {} substitutions", path.jumps.len() - 1);
        for j in &path.jumps {
            println!("  t = {:8.3}  x = {:.4}  mass = {:8.1}", j.time, j.trait_value.0[0], j.mass);
        }
    }
    Ok(())
}
