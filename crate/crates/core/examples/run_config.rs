//! Drives the experiment runner from a JSON configuration, the same way
//! `agedyn run config.json` does, and prints the manifest.

use agedyn::runner::{run, ExperimentConfig};

fn main() -> agedyn::Result<()> {
    let cfg = ExperimentConfig::from_json(
        r#"{
            "model": {"name": "example1", "overrides": {"competition": 0.002}},
            "operation": {"canonical": {"x0": 1.0, "t_end": 3.0}},
            "seed": 5
        }"#,
    )?;
    let root = std::env::temp_dir().join("agedyn-example");
    let out = run(&cfg, &root, None)?;
    println!("wrote {:?} to {}", out.manifest.artifacts, out.output_dir.display());
    println!("{}", serde_json::to_string_pretty(&out.summary)?);
    Ok(())
}
