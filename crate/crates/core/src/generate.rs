//! Seeded random scenario generation.
//!
//! Samples every parameter uniformly within the documented experiment
//! ranges, so generated instances are realistic without hand-tuning. All
//! sampling flows through a single ChaCha stream keyed by the caller's seed:
//! the same seed always yields the same scenario, independent of platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::game::{PopulationSpec, RegionSpec, Scenario, SocialState};
use crate::Result;

/// Population size `N^p` range.
pub const SIZE_RANGE: (u64, u64) = (50, 250);
/// Traversal distance `l^p_m` range in meters.
pub const TRAVERSAL_RANGE_M: (f64, f64) = (300.0, 1000.0);
/// Sensing route length `D_m` range in meters.
pub const ROUTE_RANGE_M: (f64, f64) = (1000.0, 1800.0);
/// Reward pool `R_m` range in currency units.
pub const REWARD_RANGE: (f64, f64) = (1000.0, 2000.0);
/// Traversal and sensing speed range in m/s.
pub const SPEED_RANGE: (f64, f64) = (3.0, 5.0);
/// Propulsion and hover power range in Watts.
pub const POWER_RANGE_W: (f64, f64) = (16.0, 20.0);
/// Sensing data quality range.
pub const QUALITY_RANGE: (f64, f64) = (1.0, 5.0);
/// Unit energy cost `ζ` in currency per Joule (fixed, not sampled).
pub const UNIT_ENERGY_COST: f64 = 0.001;
/// Seed of the canonical default scenario used by the command-line tools
/// and the acceptance experiments.
pub const DEFAULT_SEED: u64 = 2;
/// Default probabilities of using the direct protocol, by population index.
/// Populations beyond the third default to pure imitation.
pub const DEFAULT_SMITH_ALPHAS: [f64; 3] = [0.2, 0.3, 0.0];
/// Default initial strategy distributions for the 3-population,
/// 3-region layout.
pub const DEFAULT_INITIAL_3X3: [[f64; 3]; 3] =
    [[0.3, 0.3, 0.4], [0.4, 0.4, 0.2], [0.35, 0.35, 0.3]];

/// A generated game instance together with its default starting point.
#[derive(Debug, Clone)]
pub struct GeneratedScenario {
    pub scenario: Scenario,
    pub initial_state: SocialState,
}

/// Samples a scenario with `populations` populations and `regions` regions.
/// Every population may serve every region. Deterministic per seed.
pub fn scenario(seed: u64, populations: usize, regions: usize) -> Result<GeneratedScenario> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let region_specs: Vec<RegionSpec> = (0..regions)
        .map(|_| RegionSpec {
            route_length_m: rng.gen_range(ROUTE_RANGE_M.0..=ROUTE_RANGE_M.1),
            reward_pool: rng.gen_range(REWARD_RANGE.0..=REWARD_RANGE.1),
        })
        .collect();

    let population_specs: Vec<PopulationSpec> = (0..populations)
        .map(|p| PopulationSpec {
            size: rng.gen_range(SIZE_RANGE.0..=SIZE_RANGE.1),
            strategy_set: (0..regions).collect(),
            traversal_distance_m: (0..regions)
                .map(|_| rng.gen_range(TRAVERSAL_RANGE_M.0..=TRAVERSAL_RANGE_M.1))
                .collect(),
            unit_energy_cost: UNIT_ENERGY_COST,
            propulsion_power_w: rng.gen_range(POWER_RANGE_W.0..=POWER_RANGE_W.1),
            hover_power_w: rng.gen_range(POWER_RANGE_W.0..=POWER_RANGE_W.1),
            traversal_speed: rng.gen_range(SPEED_RANGE.0..=SPEED_RANGE.1),
            sensing_speed: rng.gen_range(SPEED_RANGE.0..=SPEED_RANGE.1),
            data_quality: (0..regions)
                .map(|_| rng.gen_range(QUALITY_RANGE.0..=QUALITY_RANGE.1))
                .collect(),
            smith_alpha: DEFAULT_SMITH_ALPHAS.get(p).copied().unwrap_or(0.0),
        })
        .collect();

    let scenario = Scenario::new(region_specs, population_specs, Scenario::DEFAULT_FLOOR)?;
    let initial_state = default_initial_state(&scenario);
    Ok(GeneratedScenario {
        scenario,
        initial_state,
    })
}

/// Same sampling as [`scenario`], but with every population resized to
/// `population_size` and the reward pools rescaled by the society-size
/// ratio. Reward shares divide by selector masses, so scaling the pools
/// with the society keeps per-device payoffs in the documented range for
/// any population size; useful for finite-size studies against the mean
/// dynamics.
pub fn scenario_scaled(
    seed: u64,
    populations: usize,
    regions: usize,
    population_size: u64,
) -> Result<GeneratedScenario> {
    let base = scenario(seed, populations, regions)?;
    let base_total = base.scenario.total_size();
    let factor = (populations as u64 * population_size) as f64 / base_total;
    let regions: Vec<RegionSpec> = base
        .scenario
        .regions()
        .iter()
        .map(|r| RegionSpec {
            route_length_m: r.route_length_m,
            reward_pool: r.reward_pool * factor,
        })
        .collect();
    let populations: Vec<PopulationSpec> = base
        .scenario
        .populations()
        .iter()
        .map(|p| PopulationSpec {
            size: population_size,
            ..p.clone()
        })
        .collect();
    let scenario = Scenario::new(regions, populations, base.scenario.denominator_floor())?;
    let initial_state = default_initial_state(&scenario);
    Ok(GeneratedScenario {
        scenario,
        initial_state,
    })
}

/// The documented starting point: the standard 3x3 distributions when they
/// fit, the uniform state otherwise.
pub fn default_initial_state(scenario: &Scenario) -> SocialState {
    let fits_default = scenario.populations().len() == 3
        && scenario
            .populations()
            .iter()
            .all(|p| p.strategy_set.len() == 3);
    if fits_default {
        SocialState::new(
            DEFAULT_INITIAL_3X3.iter().map(|b| b.to_vec()).collect(),
            scenario,
        )
        .expect("default initial state is a valid social state")
    } else {
        SocialState::uniform(scenario)
    }
}

/// Uniformly distributed point of the scenario's state space (independent
/// uniform samples on each population's simplex).
pub fn random_state<R: Rng + ?Sized>(scenario: &Scenario, rng: &mut R) -> SocialState {
    let blocks = scenario
        .populations()
        .iter()
        .map(|pop| {
            let mut weights: Vec<f64> = (0..pop.strategy_set.len())
                .map(|_| -(rng.gen::<f64>().max(f64::MIN_POSITIVE)).ln())
                .collect();
            let sum: f64 = weights.iter().sum();
            for w in &mut weights {
                *w /= sum;
            }
            weights
        })
        .collect();
    SocialState::new(blocks, scenario).expect("normalized exponential spacings form a simplex")
}
