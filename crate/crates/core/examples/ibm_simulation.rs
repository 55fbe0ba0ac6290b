//! Individual-based simulation of Example 1 from a monomorphic start:
//! the mean trait drifts toward the evolutionary singular point.

use agedyn::ibm::{simulate, IbmOptions, PopulationState};
use agedyn::models::build_example1;
use agedyn::TraitValue;

fn main() -> agedyn::Result<()> {
    let model = build_example1();
    let init = PopulationState::monomorphic(&TraitValue::scalar(1.0), 1000, 1.0, 1.0, 7)?;
    let opts = IbmOptions { horizon: 150.0, seed: 7, record_every: 10.0, snapshot_times: vec![0.0, 50.0, 100.0, 150.0], ..Default::default() };
    let run = simulate(&model, init, &opts)?;
    for (t, m) in run.times.iter().zip(&run.masses).step_by(3) {
        println!("t = {t:6.1}  mass = {m:8.1}");
    }
    for s in &run.snapshots {
        let xs = s.scalar_traits();
        let mean = xs.iter().sum::<f64>() / xs.len().max(1) as f64;
        println!("t = {:6.1}  individuals = {:5}  mean trait = {mean:.3}", s.time, xs.len());
    }
    println!("{:?}", run.counters);
    Ok(())
}
