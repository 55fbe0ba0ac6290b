//! Example 2 individual-based run with rare mutations: the trait cloud
//! splits around the singular point. Reports the dip test and KDE modes.

use agedyn::ibm::{simulate, IbmOptions, PopulationState};
use agedyn::models::build_example2;
use agedyn::runner::{assess_bimodality, BimodalitySettings};

fn main() -> agedyn::Result<()> {
    let model = build_example2();
    let init = PopulationState::uniform_scalar(0.0, 1.3, 2000, 2.0, 1.0, 1)?;
    let opts = IbmOptions { horizon: 200.0, seed: 1, mutation_scale: 0.05, record_every: 50.0, ..Default::default() };
    let run = simulate(&model, init, &opts)?;
    let traits = run.final_state.scalar_traits();
    let b = assess_bimodality(&traits, &BimodalitySettings::default(), 1)?;
    println!("{} individuals, dip = {:.4}, p = {:.3}, modes = {:?}", b.count, b.dip, b.p_value, b.modes);
    Ok(())
}
