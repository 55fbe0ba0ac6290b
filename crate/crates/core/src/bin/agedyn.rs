//! Command-line front end. Exit codes: 0 success, 2 configuration error,
//! 3 numerical failure, 4 failed cross-check.

use std::path::PathBuf;
use std::process::ExitCode;

use agedyn::models::ModelId;
use agedyn::output::default_output_root;
use agedyn::runner::{self, ExperimentConfig, Operation};
use agedyn::Error;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "agedyn", version, about = "Adaptive dynamics for age-structured populations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Output root (default: $AGEDYN_OUTPUT_ROOT or ./agedyn-output).
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Override a setting by dotted path, e.g. `operation.tss.horizon=20`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args, Clone)]
struct OpArgs {
    /// Model name: example1, example1-no-senescence, example1-age-logistic, example2.
    #[arg(long, default_value = "example1")]
    model: String,
    #[command(flatten)]
    common: Common,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a JSON configuration file.
    Run {
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Regenerate one figure at desk scale.
    Reproduce {
        /// fig1a, fig1b, fig1c, fig4, fig5, fig6, fig7, fig8 or fig9-scan.
        figure: String,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Individual-based simulation.
    Ibm(OpArgs),
    /// Deterministic age-structured PDE for a monomorphic population.
    Pde(OpArgs),
    /// Equilibria over a trait range.
    Equilibrium(OpArgs),
    /// Extinction probabilities, fitness gradient and singular points.
    Fitness(OpArgs),
    /// Pairwise invasibility plot.
    Pip(OpArgs),
    /// Trait substitution sequence.
    Tss(OpArgs),
    /// Canonical equation.
    Canonical(OpArgs),
    /// Winding-number stability scan.
    Stability(OpArgs),
    /// Cross-check extinction probabilities against branching simulations.
    Verify(OpArgs),
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Json(_) => 2,
        Error::Assertion(_) => 4,
        _ => 3,
    }
}

fn apply(mut cfg: ExperimentConfig, common: &Common) -> agedyn::Result<ExperimentConfig> {
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(j) = common.jobs {
        cfg.jobs = j;
    }
    cfg.with_overrides(&common.set)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, common } => ExperimentConfig::from_path(&config)
            .and_then(|c| apply(c, &common))
            .and_then(|c| runner::run(&c, &common.output.clone().unwrap_or_else(default_output_root), None))
            .map(|o| vec![o]),
        Command::Reproduce { figure, output, jobs } => {
            runner::reproduce(&figure, &output.unwrap_or_else(default_output_root), jobs)
        }
        Command::Ibm(a) => single("ibm", a),
        Command::Pde(a) => single("pde", a),
        Command::Equilibrium(a) => single("equilibrium", a),
        Command::Fitness(a) => single("fitness", a),
        Command::Pip(a) => single("pip", a),
        Command::Tss(a) => single("tss", a),
        Command::Canonical(a) => single("canonical", a),
        Command::Stability(a) => single("stability", a),
        Command::Verify(a) => single("verify", a),
    };
    match result {
        Ok(outcomes) => {
            for o in outcomes {
                println!("{}", o.output_dir.display());
                println!("{}", serde_json::to_string_pretty(&o.summary).unwrap_or_default());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn single(op: &str, a: OpArgs) -> agedyn::Result<Vec<runner::RunOutcome>> {
    let cfg = ExperimentConfig::new(ModelId::new(&a.model), Operation::default_for(op)?);
    let cfg = apply(cfg, &a.common)?;
    Ok(vec![runner::run(&cfg, &a.common.output.clone().unwrap_or_else(default_output_root), None)?])
}
