//! The canonical equation of adaptive dynamics, compared with the mean of
//! time-rescaled substitution sequences for small mutation steps.

use agedyn::canonical::{integrate_canonical, tss_consistency, OdeOptions};
use agedyn::demography::Analyzer;
use agedyn::models::build_example1;

fn main() -> agedyn::Result<()> {
    let model = build_example1();
    let an = Analyzer::new(&model)?;
    let tr = integrate_canonical(&an, 0.552, 2.0, &OdeOptions::default())?;
    for k in 0..=8 {
        let t = k as f64 * 0.25;
        println!("t = {t:.2}  x = {:.5}", tr.at(t));
    }
    println!("stopped: {:?} at rest point {:?}", tr.stop, tr.rest_point);
    let rep = tss_consistency(&model, 0.552, &[0.2, 0.1], 10, 0.5, 26, 1)?;
    for row in &rep.rows {
        println!("eps = {:.2}: sup |mean TSS - ODE| = {:.3}", row.epsilon, row.sup_distance);
    }
    Ok(())
}
