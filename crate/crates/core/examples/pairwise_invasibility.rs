//! A coarse pairwise invasibility plot drawn in the terminal
//! (`+` the mutant invades, `.` it does not, blank: resident not viable).

use agedyn::demography::Analyzer;
use agedyn::fitness::{pip, PipSpec};
use agedyn::models::build_example1_no_senescence;

fn main() -> agedyn::Result<()> {
    let an = Analyzer::new(&build_example1_no_senescence())?;
    let grid = pip(&an, PipSpec { n: 40, lo: 0.0, hi: 4.0 })?;
    print!("{}", grid.render_ascii());
    Ok(())
}
