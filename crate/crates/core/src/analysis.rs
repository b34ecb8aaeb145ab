//! Experiment-level analysis: direction-field grids over two-dimensional
//! slices of the state space, equilibrium location and classification, and
//! convergence-time sweeps over the protocol mixing weight.
//!
//! Grid points, seeds, and sweep entries are independent work items and are
//! evaluated in parallel; results always come back in input order.

use rayon::prelude::*;

use crate::dynamics::{protocol_field, RevisionProtocol};
use crate::game::{PopulationId, Scenario, SocialState, VectorField};
use crate::integrator::{integrate, protocol_step_masked, IntegratorConfig};
use crate::{Error, Result};

/// A two-dimensional slice of the state space for direction-field plots.
///
/// Two coordinates (population, strategy position) vary over a grid; every
/// other coordinate is held at its value in `base`, except that in each
/// varied population the last non-free strategy absorbs the remainder
/// `1 − Σ others` so grid points stay on the simplex. Grid points whose
/// absorber would be negative are skipped and flagged.
#[derive(Debug, Clone)]
pub struct DirectionFieldSpec {
    pub base: SocialState,
    pub axes: [(PopulationId, usize); 2],
    pub resolution: [usize; 2],
}

/// One grid point of a direction field: the two free-coordinate values and
/// the field projection onto the free axes, or `None` for points off the
/// simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldArrow {
    pub grid: [usize; 2],
    pub point: [f64; 2],
    pub velocity: Option<[f64; 2]>,
}

/// One point of a two-axis slice grid: its indices, the free-coordinate
/// values, and the full state, or `None` when the point falls off the
/// simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub grid: [usize; 2],
    pub point: [f64; 2],
    pub state: Option<SocialState>,
}

/// Materializes the slice grid described by `spec`: both free coordinates
/// range over `[0, 1]`, the absorbing coordinate of each varied population
/// soaks up the remainder, and points that cannot lie on the simplex carry
/// no state.
pub fn simplex_grid(scenario: &Scenario, spec: &DirectionFieldSpec) -> Result<Vec<GridPoint>> {
    spec.base.check_shape(scenario)?;
    let [(p0, s0), (p1, s1)] = spec.axes;
    for &(p, s) in &spec.axes {
        let pops = scenario.populations();
        if p >= pops.len() || s >= pops[p].strategy_set.len() {
            return Err(Error::InvalidAnalysisSpec(format!(
                "axis ({p}, {s}) is out of range"
            )));
        }
    }
    if (p0, s0) == (p1, s1) {
        return Err(Error::InvalidAnalysisSpec(
            "the two free axes must be distinct coordinates".into(),
        ));
    }
    if spec.resolution.iter().any(|&r| r < 2) {
        return Err(Error::InvalidAnalysisSpec(
            "grid resolution must be at least 2 per axis".into(),
        ));
    }

    // The absorbing coordinate of each varied population: the last strategy
    // position that is not one of the free axes.
    let varied: Vec<PopulationId> = if p0 == p1 { vec![p0] } else { vec![p0, p1] };
    let mut absorber: Vec<Option<usize>> = vec![None; scenario.populations().len()];
    for &p in &varied {
        let len = scenario.populations()[p].strategy_set.len();
        let free: Vec<usize> = spec
            .axes
            .iter()
            .filter(|(ap, _)| *ap == p)
            .map(|&(_, s)| s)
            .collect();
        let pick = (0..len).rev().find(|s| !free.contains(s));
        match pick {
            Some(s) => absorber[p] = Some(s),
            None => {
                return Err(Error::InvalidAnalysisSpec(format!(
                    "population {p} has no coordinate left to absorb the remainder"
                )))
            }
        }
    }
    // Fixed coordinates of a varied population must leave room for the free
    // ones somewhere on the grid.
    for &p in &varied {
        let fixed_sum: f64 = spec
            .base
            .block(p)
            .iter()
            .enumerate()
            .filter(|(s, _)| !spec.axes.contains(&(p, *s)) && Some(*s) != absorber[p])
            .map(|(_, &x)| x)
            .sum();
        if fixed_sum > 1.0 + 1e-12 {
            return Err(Error::InvalidAnalysisSpec(format!(
                "population {p}: fixed coordinates sum to {fixed_sum}, no grid point can lie on the simplex"
            )));
        }
    }

    let grid_value =
        |axis: usize, idx: usize| -> f64 { idx as f64 / (spec.resolution[axis] - 1) as f64 };

    let mut points = Vec::with_capacity(spec.resolution[0] * spec.resolution[1]);
    for i in 0..spec.resolution[0] {
        for j in 0..spec.resolution[1] {
            let a = grid_value(0, i);
            let b = grid_value(1, j);
            let mut blocks: Vec<Vec<f64>> = spec.base.blocks().to_vec();
            blocks[p0][s0] = a;
            blocks[p1][s1] = b;
            let mut valid = true;
            for &p in &varied {
                let abs = absorber[p].expect("varied populations have absorbers");
                let others: f64 = blocks[p]
                    .iter()
                    .enumerate()
                    .filter(|(s, _)| *s != abs)
                    .map(|(_, &x)| x)
                    .sum();
                let rest = 1.0 - others;
                if rest < -1e-12 {
                    valid = false;
                    break;
                }
                blocks[p][abs] = rest.max(0.0);
            }
            points.push(GridPoint {
                grid: [i, j],
                point: [a, b],
                state: valid.then(|| SocialState::from_blocks_unchecked(blocks)),
            });
        }
    }
    Ok(points)
}

/// Evaluates the mean-dynamics field of `protocol` over the slice described
/// by `spec` and projects it onto the two free axes.
pub fn direction_field(
    scenario: &Scenario,
    protocol: &RevisionProtocol,
    spec: &DirectionFieldSpec,
) -> Result<Vec<FieldArrow>> {
    let [(p0, s0), (p1, s1)] = spec.axes;
    let points = simplex_grid(scenario, spec)?;
    let arrows = points
        .into_par_iter()
        .map(|point| {
            let velocity = point.state.map(|state| {
                let payoffs = scenario.payoff_table(&state);
                let field = protocol_field(scenario, protocol, &state, &payoffs);
                [field.component(p0, s0), field.component(p1, s1)]
            });
            FieldArrow {
                grid: point.grid,
                point: point.point,
                velocity,
            }
        })
        .collect();
    Ok(arrows)
}

/// How a located equilibrium sits relative to the simplex boundary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EquilibriumClass {
    /// Every strategy of every evolving population keeps a share above the
    /// extinction threshold.
    Interior,
    /// Some strategies are extinct; listed as (population, strategy
    /// position) pairs.
    Extinct(Vec<(PopulationId, usize)>),
}

/// A stationary point located by [`find_equilibria`].
#[derive(Debug, Clone)]
pub struct EquilibriumReport {
    pub state: SocialState,
    /// L∞ norm of the (restricted) vector field at `state`.
    pub residual: f64,
    pub classification: EquilibriumClass,
    /// Number of seeds whose trajectory settled into this point.
    pub basin_samples: usize,
}

/// Outcome of an equilibrium search over a set of seeds.
#[derive(Debug, Clone)]
pub struct EquilibriaOutcome {
    pub equilibria: Vec<EquilibriumReport>,
    /// Seeds that failed to reach the residual tolerance within the horizon.
    pub non_converged: usize,
}

/// Configuration of the equilibrium search.
#[derive(Debug, Clone)]
pub struct EquilibriumSearch {
    pub integrator: IntegratorConfig,
    /// A state counts as stationary when the restricted field's L∞ norm
    /// falls below this.
    pub residual_tolerance: f64,
    /// Settled endpoints within this L∞ distance belong to one equilibrium.
    pub cluster_tolerance: f64,
    /// Populations whose state is held fixed: their field components are
    /// forced to zero and they are ignored by residuals and classification.
    pub frozen_populations: Vec<PopulationId>,
    /// Steps between residual evaluations while settling.
    pub residual_check_stride: usize,
}

impl Default for EquilibriumSearch {
    fn default() -> Self {
        Self {
            integrator: IntegratorConfig::default(),
            residual_tolerance: 1e-6,
            cluster_tolerance: 1e-3,
            frozen_populations: Vec::new(),
            residual_check_stride: 10,
        }
    }
}

/// The mean-dynamics field with frozen population blocks zeroed out.
pub fn restricted_field(
    scenario: &Scenario,
    protocol: &RevisionProtocol,
    state: &SocialState,
    frozen: &[bool],
) -> VectorField {
    let payoffs = scenario.payoff_table(state);
    let mut field = protocol_field(scenario, protocol, state, &payoffs);
    for (p, is_frozen) in frozen.iter().enumerate() {
        if *is_frozen {
            for v in &mut field.blocks_mut()[p] {
                *v = 0.0;
            }
        }
    }
    field
}

/// Integrates each seed until the restricted field is stationary, clusters
/// the settled endpoints, and classifies each cluster representative by the
/// extinction threshold. Seeds that do not settle within the horizon are
/// counted but excluded from the clusters.
pub fn find_equilibria(
    scenario: &Scenario,
    protocol: &RevisionProtocol,
    seeds: &[SocialState],
    search: &EquilibriumSearch,
) -> Result<EquilibriaOutcome> {
    search.integrator.validate()?;
    if search.residual_check_stride == 0 {
        return Err(Error::InvalidConfig("residual_check_stride must be >= 1".into()));
    }
    let mut frozen = vec![false; scenario.populations().len()];
    for &p in &search.frozen_populations {
        if p >= frozen.len() {
            return Err(Error::InvalidConfig(format!(
                "frozen population {p} does not exist"
            )));
        }
        frozen[p] = true;
    }
    for seed in seeds {
        seed.check_shape(scenario)?;
    }

    let settled: Vec<Option<(SocialState, f64)>> = seeds
        .par_iter()
        .map(|seed| settle(scenario, protocol, seed, search, &frozen))
        .collect::<Result<Vec<_>>>()?;

    let mut equilibria: Vec<EquilibriumReport> = Vec::new();
    let mut non_converged = 0usize;
    for endpoint in settled {
        let Some((state, residual)) = endpoint else {
            non_converged += 1;
            continue;
        };
        if let Some(report) = equilibria
            .iter_mut()
            .find(|e| e.state.linf_distance(&state) <= search.cluster_tolerance)
        {
            report.basin_samples += 1;
            if residual < report.residual {
                report.residual = residual;
                report.state = state;
            }
            continue;
        }
        let classification = classify(&state, &frozen, search.integrator.extinction_threshold);
        equilibria.push(EquilibriumReport {
            state,
            residual,
            classification,
            basin_samples: 1,
        });
    }
    Ok(EquilibriaOutcome {
        equilibria,
        non_converged,
    })
}

fn classify(state: &SocialState, frozen: &[bool], threshold: f64) -> EquilibriumClass {
    let mut extinct = Vec::new();
    for (p, block) in state.blocks().iter().enumerate() {
        if frozen[p] {
            continue;
        }
        for (s, &x) in block.iter().enumerate() {
            if x <= threshold {
                extinct.push((p, s));
            }
        }
    }
    if extinct.is_empty() {
        EquilibriumClass::Interior
    } else {
        EquilibriumClass::Extinct(extinct)
    }
}

fn settle(
    scenario: &Scenario,
    protocol: &RevisionProtocol,
    seed: &SocialState,
    search: &EquilibriumSearch,
    frozen: &[bool],
) -> Result<Option<(SocialState, f64)>> {
    let h = search.integrator.step_size;
    let total_steps = (search.integrator.max_time / h).ceil() as usize;

    let mut state = seed.clone();
    let mut step_idx = 0usize;
    loop {
        if step_idx.is_multiple_of(search.residual_check_stride) || step_idx >= total_steps {
            let residual = restricted_field(scenario, protocol, &state, frozen).linf_norm();
            if residual <= search.residual_tolerance {
                return Ok(Some((state, residual)));
            }
            if step_idx >= total_steps {
                return Ok(None);
            }
        }
        state = protocol_step_masked(
            scenario,
            protocol,
            &state,
            h,
            step_idx as f64 * h,
            Some(frozen),
        )?
        .state;
        step_idx += 1;
    }
}

/// One entry of a convergence-time sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepEntry {
    pub alpha: f64,
    /// Step count at which the run converged, if it did.
    pub steps: Option<usize>,
    /// Same instant in time units.
    pub time: Option<f64>,
}

/// Integrates the hybrid dynamics once per `alpha_values` entry, overriding
/// `population`'s comparison-protocol weight, and records the convergence
/// step count. Entries that never converge within the horizon report `None`.
pub fn alpha_sweep(
    scenario: &Scenario,
    population: PopulationId,
    alpha_values: &[f64],
    initial: &SocialState,
    config: &IntegratorConfig,
) -> Result<Vec<SweepEntry>> {
    if population >= scenario.populations().len() {
        return Err(Error::InvalidConfig(format!(
            "population {population} does not exist"
        )));
    }
    initial.check_shape(scenario)?;
    let base_alphas: Vec<f64> = scenario
        .populations()
        .iter()
        .map(|p| p.smith_alpha)
        .collect();

    alpha_values
        .par_iter()
        .map(|&alpha| {
            let mut alphas = base_alphas.clone();
            alphas[population] = alpha;
            let protocol = RevisionProtocol::smith_replicator(&alphas)?;
            let trajectory = integrate(scenario, &protocol, initial, config)?;
            Ok(SweepEntry {
                alpha,
                steps: trajectory.convergence_step,
                time: trajectory.convergence_time,
            })
        })
        .collect()
}
