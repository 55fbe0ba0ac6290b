//! Linear stability of Example 2 equilibria: winding number of the
//! eigenvalue function around the right half-plane.

use agedyn::models::build_example2;
use agedyn::stability::{stability_winding, JordanContour};

fn main() -> agedyn::Result<()> {
    let model = build_example2();
    let contour = JordanContour::indented_rectangle(50.0, 50.0, 1e-3, 400)?;
    for x in [0.5, 1.5, 2.5, 3.2, 3.8] {
        let r = stability_winding(&model, x, &contour)?;
        println!("x = {x:.1}: winding {} (raw {:+.4}), min |E| = {:.3e} -> {}", r.winding, r.raw, r.min_abs, r.verdict());
    }
    Ok(())
}
