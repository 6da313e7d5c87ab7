//! Experiment harness for the `tracerecon` library: simulation, end-to-end
//! reconstruction, estimator runs, parameter sweeps and coded reconstruction,
//! with reproducible CSV or JSON output.

pub mod config;
pub mod output;
pub mod run;

use clap::Parser;

pub use config::{CommandKind, ExperimentConfig, Flags, Format, Lemma};

#[derive(Parser, Debug)]
#[command(name = "tracerecon", version, about = "Trace reconstruction experiments over the deletion channel")]
pub struct Cli {
    #[arg(value_enum)]
    pub command: CommandKind,
    #[command(flatten)]
    pub flags: Flags,
}

pub fn main_with(cli: Cli) -> anyhow::Result<()> {
    let config = ExperimentConfig::resolve(cli.command, cli.flags)?;
    run::run(&config)
}
