//! Subcommand implementations. Every run resolves its configuration first,
//! writes `manifest.json`, then produces its data files with the manifest
//! hash embedded.

use std::path::Path;

use popgame_core::analysis::{
    alpha_sweep, direction_field, find_equilibria, simplex_grid, DirectionFieldSpec,
    EquilibriumSearch,
};
use popgame_core::generate;
use popgame_core::integrator::{converged_at, integrate};
use popgame_core::stochastic::{simulate, AgentPopulationState};

use crate::cli::{AgentsArgs, EquilibriaArgs, FieldArgs, GenerateArgs, RunArgs, SimulateArgs, SweepArgs};
use crate::error::CliError;
use crate::manifest::Manifest;
use crate::schema::{apply_override, ScenarioFile, StochasticEntry};
use crate::status;

fn ensure_out_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::io(format!("creating {}: {e}", dir.display())))
}

/// Loads the scenario file, applies `--set` overrides and the `--seed`
/// shorthand, and resolves it.
fn load_scenario(args: &RunArgs) -> Result<ScenarioFile, CliError> {
    let text = std::fs::read_to_string(&args.scenario)
        .map_err(|e| CliError::io(format!("reading {}: {e}", args.scenario.display())))?;
    let mut value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| CliError::schema(format!("{}: {e}", args.scenario.display())))?;
    for spec in &args.set {
        apply_override(&mut value, spec)?;
    }
    if let Some(seed) = args.seed {
        apply_override(&mut value, &format!("seed={seed}"))?;
    }
    ScenarioFile::from_value(value)
}

/// Parses an axis argument of the form `<population>.<strategy>`.
fn parse_axis(text: &str) -> Result<(usize, usize), CliError> {
    let parse = || -> Option<(usize, usize)> {
        let (p, s) = text.split_once('.')?;
        Some((p.parse().ok()?, s.parse().ok()?))
    };
    parse().ok_or_else(|| {
        CliError::schema(format!(
            "axis '{text}' is not of the form <population>.<strategy>"
        ))
    })
}

pub fn generate(args: &GenerateArgs) -> Result<(), CliError> {
    if args.populations == 0 || args.regions == 0 {
        return Err(CliError::schema("need at least one population and one region"));
    }
    let g = generate::scenario(args.seed, args.populations, args.regions)
        .map_err(CliError::from_core)?;

    let file = ScenarioFile {
        seed: args.seed,
        regions: g
            .scenario
            .regions()
            .iter()
            .map(|r| crate::schema::RegionEntry {
                route_length_m: Some(r.route_length_m),
                route_length_km: None,
                reward_pool: r.reward_pool,
            })
            .collect(),
        populations: g
            .scenario
            .populations()
            .iter()
            .map(|p| crate::schema::PopulationEntry {
                size: p.size,
                strategies: p.strategy_set.clone(),
                traversal_distance_m: Some(p.traversal_distance_m.clone()),
                traversal_distance_km: None,
                unit_energy_cost: p.unit_energy_cost,
                propulsion_power_w: p.propulsion_power_w,
                hover_power_w: p.hover_power_w,
                traversal_speed_mps: p.traversal_speed,
                sensing_speed_mps: p.sensing_speed,
                data_quality: p.data_quality.clone(),
                smith_alpha: p.smith_alpha,
            })
            .collect(),
        protocol: crate::schema::ProtocolEntry::Hybrid,
        initial_state: Some(g.initial_state.blocks().to_vec()),
        integrator: Default::default(),
        // Alarm-clock rate equal to the thinning bound keeps agent-based
        // time aligned with mean-dynamics time.
        stochastic: Some(StochasticEntry {
            seed: None,
            clock_rate: 64.0,
            rate_bound: 64.0,
            horizon: 10.0,
            record_interval: 0.1,
        }),
        denominator_floor: popgame_core::game::Scenario::DEFAULT_FLOOR,
    };

    ensure_out_dir(&args.out)?;
    let manifest = Manifest::new(
        "generate",
        serde_json::json!({
            "populations": args.populations,
            "regions": args.regions,
        }),
        file.clone(),
    );
    let hash = manifest.write(&args.out)?;

    let path = args.out.join("scenario.json");
    let text = serde_json::to_string_pretty(&file).expect("serialization cannot fail");
    std::fs::write(&path, text + "\n")
        .map_err(|e| CliError::io(format!("writing {}: {e}", path.display())))?;
    status::wrote(&args.out.join("manifest.json"), &hash);
    status::wrote(&path, &hash);
    Ok(())
}

pub fn run_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let file = load_scenario(&args.run)?;
    let g = file.to_game()?;
    let protocol = file.to_protocol(&g.scenario)?;
    let config = file.integrator_config();

    ensure_out_dir(&args.run.out)?;
    let manifest = Manifest::new("simulate", serde_json::json!({}), file.clone());
    let hash = manifest.write(&args.run.out)?;

    let trajectory =
        integrate(&g.scenario, &protocol, &g.initial_state, &config).map_err(CliError::from_core)?;
    let path =
        crate::output::write_trajectory_csv(&args.run.out, &g.scenario, &trajectory, &hash)?;
    status::wrote(&args.run.out.join("manifest.json"), &hash);
    status::wrote(&path, &hash);

    match trajectory.convergence_time {
        Some(t) => status::note(&format!(
            "converged at t = {t} (step {})",
            trajectory.convergence_step.expect("step accompanies time")
        )),
        None => {
            status::note("did not converge within the horizon");
            if args.run.require_convergence {
                return Err(CliError::non_convergence(format!(
                    "no convergence within max_time = {}",
                    config.max_time
                )));
            }
        }
    }
    Ok(())
}

pub fn run_agents(args: &AgentsArgs) -> Result<(), CliError> {
    let mut file = load_scenario(&args.run)?;
    let stochastic = file.stochastic_config();
    // Record the effective configuration in the manifest.
    file.stochastic = Some(StochasticEntry {
        seed: Some(stochastic.seed),
        clock_rate: stochastic.clock_rate,
        rate_bound: stochastic.rate_bound,
        horizon: stochastic.horizon,
        record_interval: stochastic.record_interval,
    });
    let g = file.to_game()?;
    let protocol = file.to_protocol(&g.scenario)?;

    ensure_out_dir(&args.run.out)?;
    let manifest = Manifest::new("agents", serde_json::json!({}), file.clone());
    let hash = manifest.write(&args.run.out)?;

    let initial = AgentPopulationState::from_proportions(&g.initial_state, &g.scenario)
        .map_err(CliError::from_core)?;
    let mut trajectory = simulate(&g.scenario, &protocol, &initial, &stochastic)
        .map_err(CliError::from_core)?;
    // Judge empirical convergence with the same payoff-spread criterion the
    // integrator uses, at the recorded sampling granularity.
    let integrator = file.integrator_config();
    if let Some(time) = converged_at(&trajectory, &integrator) {
        trajectory.converged = true;
        trajectory.convergence_time = Some(time);
    }

    let path =
        crate::output::write_trajectory_csv(&args.run.out, &g.scenario, &trajectory, &hash)?;
    status::wrote(&args.run.out.join("manifest.json"), &hash);
    status::wrote(&path, &hash);
    match trajectory.convergence_time {
        Some(t) => status::note(&format!("payoff spreads within tau from t = {t}")),
        None => {
            status::note("payoff spreads never settled within tau");
            if args.run.require_convergence {
                return Err(CliError::non_convergence(
                    "empirical payoff spreads never fell within tau",
                ));
            }
        }
    }
    Ok(())
}

pub fn run_field(args: &FieldArgs) -> Result<(), CliError> {
    let file = load_scenario(&args.run)?;
    let g = file.to_game()?;
    let protocol = file.to_protocol(&g.scenario)?;

    let axis_a = match &args.axis_a {
        Some(text) => parse_axis(text)?,
        None => (0, 0),
    };
    let axis_b = match &args.axis_b {
        Some(text) => parse_axis(text)?,
        None if g.scenario.populations().len() > 1 => (1, 0),
        None => (0, 1.min(g.scenario.populations()[0].strategy_set.len() - 1)),
    };
    let spec = DirectionFieldSpec {
        base: g.initial_state.clone(),
        axes: [axis_a, axis_b],
        resolution: [args.grid, args.grid],
    };

    ensure_out_dir(&args.run.out)?;
    let manifest = Manifest::new(
        "field",
        serde_json::json!({
            "axis_a": [axis_a.0, axis_a.1],
            "axis_b": [axis_b.0, axis_b.1],
            "grid": args.grid,
        }),
        file.clone(),
    );
    let hash = manifest.write(&args.run.out)?;

    let arrows = direction_field(&g.scenario, &protocol, &spec).map_err(CliError::from_core)?;
    let path = crate::output::write_field_csv(&args.run.out, &arrows, &hash)?;
    status::wrote(&args.run.out.join("manifest.json"), &hash);
    status::wrote(&path, &hash);
    let skipped = arrows.iter().filter(|a| a.velocity.is_none()).count();
    status::note(&format!("{} grid points, {skipped} off-simplex", arrows.len()));
    Ok(())
}

pub fn run_equilibria(args: &EquilibriaArgs) -> Result<(), CliError> {
    let file = load_scenario(&args.run)?;
    let g = file.to_game()?;
    let protocol = file.to_protocol(&g.scenario)?;

    let last = g.scenario.populations().len() - 1;
    let axis_a = match &args.axis_a {
        Some(text) => parse_axis(text)?,
        None => (last, 0),
    };
    let axis_b = match &args.axis_b {
        Some(text) => parse_axis(text)?,
        None => (last, 1.min(g.scenario.populations()[last].strategy_set.len() - 1)),
    };
    let spec = DirectionFieldSpec {
        base: g.initial_state.clone(),
        axes: [axis_a, axis_b],
        resolution: [args.grid, args.grid],
    };

    ensure_out_dir(&args.run.out)?;
    let manifest = Manifest::new(
        "equilibria",
        serde_json::json!({
            "axis_a": [axis_a.0, axis_a.1],
            "axis_b": [axis_b.0, axis_b.1],
            "grid": args.grid,
            "freeze": args.freeze,
        }),
        file.clone(),
    );
    let hash = manifest.write(&args.run.out)?;

    let seeds: Vec<_> = simplex_grid(&g.scenario, &spec)
        .map_err(CliError::from_core)?
        .into_iter()
        .filter_map(|p| p.state)
        .collect();
    let search = EquilibriumSearch {
        integrator: file.integrator_config(),
        frozen_populations: args.freeze.clone(),
        ..EquilibriumSearch::default()
    };
    let outcome =
        find_equilibria(&g.scenario, &protocol, &seeds, &search).map_err(CliError::from_core)?;
    let path = crate::output::write_equilibria_json(&args.run.out, &outcome, &hash)?;
    status::wrote(&args.run.out.join("manifest.json"), &hash);
    status::wrote(&path, &hash);
    status::note(&format!(
        "{} equilibria from {} seeds ({} non-converged)",
        outcome.equilibria.len(),
        seeds.len(),
        outcome.non_converged
    ));
    if args.run.require_convergence && outcome.non_converged > 0 {
        return Err(CliError::non_convergence(format!(
            "{} seeds did not settle within max_time",
            outcome.non_converged
        )));
    }
    Ok(())
}

pub fn run_sweep(args: &SweepArgs) -> Result<(), CliError> {
    let file = load_scenario(&args.run)?;
    let g = file.to_game()?;
    let population = args
        .population
        .unwrap_or(g.scenario.populations().len() - 1);
    let alphas: Vec<f64> = match &args.alphas {
        Some(text) => text
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| CliError::schema(format!("alpha '{v}' is not a number")))
            })
            .collect::<Result<_, _>>()?,
        None => (0..=10).map(|k| k as f64 / 10.0).collect(),
    };

    ensure_out_dir(&args.run.out)?;
    let manifest = Manifest::new(
        "sweep",
        serde_json::json!({
            "population": population,
            "alphas": alphas,
        }),
        file.clone(),
    );
    let hash = manifest.write(&args.run.out)?;

    let config = file.integrator_config();
    let entries = alpha_sweep(&g.scenario, population, &alphas, &g.initial_state, &config)
        .map_err(CliError::from_core)?;
    let path = crate::output::write_sweep_csv(&args.run.out, &entries, &hash)?;
    status::wrote(&args.run.out.join("manifest.json"), &hash);
    status::wrote(&path, &hash);

    let unconverged = entries.iter().filter(|e| e.steps.is_none()).count();
    if unconverged > 0 {
        status::note(&format!("{unconverged} sweep entries did not converge"));
        if args.run.require_convergence {
            return Err(CliError::non_convergence(format!(
                "{unconverged} sweep entries did not converge"
            )));
        }
    }
    Ok(())
}
