//! Command-line front end for the population-game engine: scenario
//! generation, mean-dynamics and agent-based runs, direction fields,
//! equilibrium searches, and convergence-time sweeps, all with reproducible
//! seeded configuration and plot-ready CSV/JSON outputs.

mod cli;
mod commands;
mod error;
mod manifest;
mod output;
mod schema;
mod status;

use clap::Parser;

fn main() {
    let args = cli::Cli::parse();
    let result = match &args.command {
        cli::Command::Generate(a) => commands::generate(a),
        cli::Command::Simulate(a) => commands::run_simulate(a),
        cli::Command::Agents(a) => commands::run_agents(a),
        cli::Command::Field(a) => commands::run_field(a),
        cli::Command::Equilibria(a) => commands::run_equilibria(a),
        cli::Command::Sweep(a) => commands::run_sweep(a),
    };
    if let Err(err) = result {
        eprintln!("{}", err.to_json());
        std::process::exit(err.exit_code());
    }
}
