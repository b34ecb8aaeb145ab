//! Plot-ready output files. Column orders are fixed; every file embeds the
//! run's manifest hash (CSV: a leading comment line; JSON: a top-level
//! field).
//!
//! `trajectory.csv` columns: `step,time`, then `x_p<P>_r<R>` for every
//! population/strategy pair in scenario order, then `pi_p<P>_r<R>` in the
//! same order, then `pibar_p<P>` per population, then (agent runs only)
//! `n_p<P>_r<R>` integer counts.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use popgame_core::analysis::{EquilibriaOutcome, EquilibriumClass, FieldArrow, SweepEntry};
use popgame_core::game::Scenario;
use popgame_core::integrator::Trajectory;

use crate::error::CliError;

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>, CliError> {
    let file = std::fs::File::create(path)
        .map_err(|e| CliError::io(format!("writing {}: {e}", path.display())))?;
    Ok(std::io::BufWriter::new(file))
}

fn finish(mut w: std::io::BufWriter<std::fs::File>, path: &Path) -> Result<(), CliError> {
    w.flush()
        .map_err(|e| CliError::io(format!("writing {}: {e}", path.display())))
}

macro_rules! out {
    ($w:expr, $path:expr, $($arg:tt)*) => {
        writeln!($w, $($arg)*)
            .map_err(|e| CliError::io(format!("writing {}: {e}", $path.display())))?
    };
}

pub fn write_trajectory_csv(
    out_dir: &Path,
    scenario: &Scenario,
    trajectory: &Trajectory,
    manifest_hash: &str,
) -> Result<std::path::PathBuf, CliError> {
    let path = out_dir.join("trajectory.csv");
    let mut w = create(&path)?;
    out!(w, path, "# manifest_sha256 = {manifest_hash}");

    let with_counts = trajectory.samples.first().is_some_and(|s| s.counts.is_some());
    let mut header = String::from("step,time");
    for (p, pop) in scenario.populations().iter().enumerate() {
        for &r in &pop.strategy_set {
            header.push_str(&format!(",x_p{p}_r{r}"));
        }
    }
    for (p, pop) in scenario.populations().iter().enumerate() {
        for &r in &pop.strategy_set {
            header.push_str(&format!(",pi_p{p}_r{r}"));
        }
    }
    for p in 0..scenario.populations().len() {
        header.push_str(&format!(",pibar_p{p}"));
    }
    if with_counts {
        for (p, pop) in scenario.populations().iter().enumerate() {
            for &r in &pop.strategy_set {
                header.push_str(&format!(",n_p{p}_r{r}"));
            }
        }
    }
    out!(w, path, "{header}");

    for sample in &trajectory.samples {
        let mut row = format!("{},{}", sample.step, sample.time);
        for block in sample.state.blocks() {
            for x in block {
                row.push_str(&format!(",{x}"));
            }
        }
        for p in 0..scenario.populations().len() {
            for pi in sample.payoffs.payoffs(p) {
                row.push_str(&format!(",{pi}"));
            }
        }
        for p in 0..scenario.populations().len() {
            row.push_str(&format!(",{}", sample.payoffs.average(p)));
        }
        if with_counts {
            for block in sample.counts.as_ref().expect("checked above") {
                for n in block {
                    row.push_str(&format!(",{n}"));
                }
            }
        }
        out!(w, path, "{row}");
    }
    finish(w, &path)?;
    Ok(path)
}

/// `field.csv` columns: `grid_i,grid_j,x_a,x_b,dx_a,dx_b,skipped`. Velocity
/// cells are empty on skipped (off-simplex) points.
pub fn write_field_csv(
    out_dir: &Path,
    arrows: &[FieldArrow],
    manifest_hash: &str,
) -> Result<std::path::PathBuf, CliError> {
    let path = out_dir.join("field.csv");
    let mut w = create(&path)?;
    out!(w, path, "# manifest_sha256 = {manifest_hash}");
    out!(w, path, "grid_i,grid_j,x_a,x_b,dx_a,dx_b,skipped");
    for arrow in arrows {
        match arrow.velocity {
            Some([da, db]) => out!(
                w,
                path,
                "{},{},{},{},{da},{db},0",
                arrow.grid[0],
                arrow.grid[1],
                arrow.point[0],
                arrow.point[1]
            ),
            None => out!(
                w,
                path,
                "{},{},{},{},,,1",
                arrow.grid[0],
                arrow.grid[1],
                arrow.point[0],
                arrow.point[1]
            ),
        }
    }
    finish(w, &path)?;
    Ok(path)
}

/// `sweep.csv` columns: `alpha,steps,time,converged`. Step/time cells are
/// empty on non-converged entries.
pub fn write_sweep_csv(
    out_dir: &Path,
    entries: &[SweepEntry],
    manifest_hash: &str,
) -> Result<std::path::PathBuf, CliError> {
    let path = out_dir.join("sweep.csv");
    let mut w = create(&path)?;
    out!(w, path, "# manifest_sha256 = {manifest_hash}");
    out!(w, path, "alpha,steps,time,converged");
    for entry in entries {
        match (entry.steps, entry.time) {
            (Some(steps), Some(time)) => {
                out!(w, path, "{},{steps},{time},1", entry.alpha)
            }
            _ => out!(w, path, "{},,,0", entry.alpha),
        }
    }
    finish(w, &path)?;
    Ok(path)
}

#[derive(Serialize)]
struct EquilibriumWire {
    state: Vec<Vec<f64>>,
    residual: f64,
    classification: ClassificationWire,
    basin_samples: usize,
}

#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum ClassificationWire {
    Interior,
    Extinct { strategies: Vec<(usize, usize)> },
}

pub fn write_equilibria_json(
    out_dir: &Path,
    outcome: &EquilibriaOutcome,
    manifest_hash: &str,
) -> Result<std::path::PathBuf, CliError> {
    #[derive(Serialize)]
    struct Wire<'a> {
        manifest_sha256: &'a str,
        equilibria: Vec<EquilibriumWire>,
        non_converged: usize,
    }
    let wire = Wire {
        manifest_sha256: manifest_hash,
        equilibria: outcome
            .equilibria
            .iter()
            .map(|e| EquilibriumWire {
                state: e.state.blocks().to_vec(),
                residual: e.residual,
                classification: match &e.classification {
                    EquilibriumClass::Interior => ClassificationWire::Interior,
                    EquilibriumClass::Extinct(list) => ClassificationWire::Extinct {
                        strategies: list.clone(),
                    },
                },
                basin_samples: e.basin_samples,
            })
            .collect(),
        non_converged: outcome.non_converged,
    };
    let path = out_dir.join("equilibria.json");
    let text = serde_json::to_string_pretty(&wire).expect("serialization cannot fail");
    std::fs::write(&path, text + "\n")
        .map_err(|e| CliError::io(format!("writing {}: {e}", path.display())))?;
    Ok(path)
}
