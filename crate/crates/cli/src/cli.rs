//! Argument definitions.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "popgame", version, about = "Multi-population game simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Sample a scenario file within the documented parameter ranges.
    Generate(GenerateArgs),
    /// Integrate the mean dynamics and write the trajectory.
    Simulate(SimulateArgs),
    /// Run the event-driven finite-population simulation.
    Agents(AgentsArgs),
    /// Evaluate the direction field over a two-axis slice.
    Field(FieldArgs),
    /// Locate and classify equilibria from a grid of seed states.
    Equilibria(EquilibriaArgs),
    /// Sweep one population's direct-protocol weight and record
    /// convergence times.
    Sweep(SweepArgs),
}

/// Options shared by every command that consumes a scenario file.
#[derive(Args)]
pub struct RunArgs {
    /// Scenario file (JSON).
    #[arg(long)]
    pub scenario: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Override the scenario's master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override any scalar in the scenario file, e.g.
    /// `--set populations.2.smith_alpha=0.7`. Repeatable.
    #[arg(long = "set", value_name = "PATH=VALUE")]
    pub set: Vec<String>,
    /// Exit with code 4 when the run does not converge.
    #[arg(long)]
    pub require_convergence: bool,
}

#[derive(Args)]
pub struct GenerateArgs {
    /// Seed for parameter sampling.
    #[arg(long, default_value_t = popgame_core::generate::DEFAULT_SEED)]
    pub seed: u64,
    /// Number of populations.
    #[arg(long, default_value_t = 3)]
    pub populations: usize,
    /// Number of regions (one per service provider).
    #[arg(long, default_value_t = 3)]
    pub regions: usize,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Args)]
pub struct AgentsArgs {
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Args)]
pub struct FieldArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// First free coordinate, `<population>.<strategy>`. Defaults to `0.0`.
    #[arg(long)]
    pub axis_a: Option<String>,
    /// Second free coordinate. Defaults to the first strategy of the second
    /// population (of the only population when there is just one).
    #[arg(long)]
    pub axis_b: Option<String>,
    /// Grid resolution per axis.
    #[arg(long, default_value_t = 20)]
    pub grid: usize,
}

#[derive(Args)]
pub struct EquilibriaArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// First seed-grid coordinate, `<population>.<strategy>`. Defaults to
    /// the last population's first strategy.
    #[arg(long)]
    pub axis_a: Option<String>,
    /// Second seed-grid coordinate. Defaults to the last population's
    /// second strategy.
    #[arg(long)]
    pub axis_b: Option<String>,
    /// Seed-grid resolution per axis.
    #[arg(long, default_value_t = 10)]
    pub grid: usize,
    /// Hold this population's state fixed during the search. Repeatable.
    #[arg(long = "freeze", value_name = "POPULATION")]
    pub freeze: Vec<usize>,
}

#[derive(Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Population whose direct-protocol weight is swept. Defaults to the
    /// last population.
    #[arg(long)]
    pub population: Option<usize>,
    /// Comma-separated weights in [0, 1]. Defaults to 0,0.1,...,1.
    #[arg(long)]
    pub alphas: Option<String>,
}
