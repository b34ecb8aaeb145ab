//! Event-driven finite-population simulation.
//!
//! This is the microfoundation the mean dynamics averages over: every agent
//! carries an exponential alarm clock. Aggregated over the society, ring
//! times arrive at rate `(total agents) · clock_rate` and the ringing agent
//! is uniform. On a ring, an agent playing strategy `m` evaluates its
//! population's switch rates and moves to strategy `i` with probability
//! `ρ^p_{m,i} / rate_bound`, staying put with the remaining probability.
//!
//! The thinning bound must dominate every total switch rate the run can
//! produce; this is validated at every event and violating it is a loud
//! configuration error rather than a silent clip, which would distort the
//! simulated dynamics.
//!
//! With `clock_rate == rate_bound`, one unit of simulated time matches one
//! unit of mean-dynamics time; for other settings the empirical process
//! follows the ODE under the time rescaling `t_ode = t_sim · clock_rate /
//! rate_bound`.
//!
//! Runs are deterministic given the seed. Ensemble members draw from
//! independent ChaCha streams: run `i` uses stream `i` of the cipher keyed
//! by the shared seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;

use crate::dynamics::RevisionProtocol;
use crate::game::{PayoffTable, PopulationId, Scenario, SocialState};
use crate::integrator::{Sample, Trajectory};
use crate::{Error, Result};

/// Integer strategy counts per population; the finite-population analogue of
/// a social state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentPopulationState {
    counts: Vec<Vec<u64>>,
}

impl AgentPopulationState {
    /// Validates that every population's counts sum exactly to its size.
    pub fn new(counts: Vec<Vec<u64>>, scenario: &Scenario) -> Result<Self> {
        if counts.len() != scenario.populations().len() {
            return Err(Error::InvalidState(format!(
                "{} count blocks for {} populations",
                counts.len(),
                scenario.populations().len()
            )));
        }
        for (p, (block, pop)) in counts.iter().zip(scenario.populations()).enumerate() {
            if block.len() != pop.strategy_set.len() {
                return Err(Error::InvalidState(format!(
                    "population {p}: {} counts for {} strategies",
                    block.len(),
                    pop.strategy_set.len()
                )));
            }
            let total: u64 = block.iter().sum();
            if total != pop.size {
                return Err(Error::InvalidState(format!(
                    "population {p}: counts sum to {total}, expected {}",
                    pop.size
                )));
            }
        }
        Ok(Self { counts })
    }

    /// Rounds a strategy distribution to integer counts with a largest
    /// remainder fix-up, so each population sums exactly to its size.
    pub fn from_proportions(state: &SocialState, scenario: &Scenario) -> Result<Self> {
        state.check_shape(scenario)?;
        let counts = state
            .blocks()
            .iter()
            .zip(scenario.populations())
            .map(|(block, pop)| {
                let n = pop.size;
                let mut counts: Vec<u64> =
                    block.iter().map(|x| (x * n as f64).floor() as u64).collect();
                let assigned: u64 = counts.iter().sum();
                let mut remainders: Vec<(usize, f64)> = block
                    .iter()
                    .enumerate()
                    .map(|(i, x)| (i, x * n as f64 - counts[i] as f64))
                    .collect();
                remainders.sort_by(|a, b| {
                    b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0))
                });
                for k in 0..(n - assigned) as usize {
                    counts[remainders[k % remainders.len()].0] += 1;
                }
                counts
            })
            .collect();
        Self::new(counts, scenario)
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    /// The social state these counts realize (`x^p_m = n^p_m / N^p`).
    pub fn proportions(&self, scenario: &Scenario) -> SocialState {
        let blocks = self
            .counts
            .iter()
            .zip(scenario.populations())
            .map(|(block, pop)| {
                let n = pop.size as f64;
                block.iter().map(|&c| c as f64 / n).collect()
            })
            .collect();
        SocialState::from_blocks_unchecked(blocks)
    }
}

/// Parameters of an event-driven run.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticConfig {
    /// Master seed. Identical seeds reproduce the event sequence bit for
    /// bit.
    pub seed: u64,
    /// Alarm-clock rate per agent, in rings per unit time.
    pub clock_rate: f64,
    /// Thinning bound `R_max`; must dominate every total switch rate.
    pub rate_bound: f64,
    /// Simulated time horizon.
    pub horizon: f64,
    /// Time between recorded samples.
    pub record_interval: f64,
}

impl Default for StochasticConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            clock_rate: 1.0,
            rate_bound: 100.0,
            horizon: 10.0,
            record_interval: 0.1,
        }
    }
}

impl StochasticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.clock_rate <= 0.0 || !self.clock_rate.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "clock_rate must be > 0, got {}",
                self.clock_rate
            )));
        }
        if self.rate_bound <= 0.0 || !self.rate_bound.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "rate_bound must be > 0, got {}",
                self.rate_bound
            )));
        }
        if self.horizon < 0.0 || !self.horizon.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "horizon must be >= 0, got {}",
                self.horizon
            )));
        }
        if self.record_interval <= 0.0 || !self.record_interval.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "record_interval must be > 0, got {}",
                self.record_interval
            )));
        }
        Ok(())
    }
}

/// Draws the revision target for an agent of `population` currently playing
/// the strategy at `current`: target `i` with probability `ρ_{current,i} /
/// rate_bound`, no move with the remaining probability. Returns `current`
/// when the agent stays.
pub fn sample_revision<R: Rng + ?Sized>(
    protocol: &RevisionProtocol,
    payoffs: &PayoffTable,
    state: &SocialState,
    population: PopulationId,
    current: usize,
    rate_bound: f64,
    rng: &mut R,
) -> Result<usize> {
    let pi = payoffs.payoffs(population);
    let shares = state.block(population);
    let u: f64 = rng.gen::<f64>() * rate_bound;
    pick_target(protocol, population, pi, shares, current, rate_bound, u)
}

/// Shared thinning rule: walks the cumulative switch rates against a uniform
/// draw `u` in `[0, rate_bound)`.
fn pick_target(
    protocol: &RevisionProtocol,
    population: PopulationId,
    payoffs: &[f64],
    shares: &[f64],
    current: usize,
    rate_bound: f64,
    u: f64,
) -> Result<usize> {
    let mut cumulative = 0.0;
    let mut target = current;
    for i in 0..payoffs.len() {
        if i == current {
            continue;
        }
        let rate = protocol.rate(population, payoffs, shares, current, i);
        let next = cumulative + rate;
        if target == current && u < next {
            target = i;
        }
        cumulative = next;
    }
    if cumulative > rate_bound {
        return Err(Error::RateBoundExceeded {
            observed: cumulative,
            bound: rate_bound,
        });
    }
    Ok(target)
}

/// Runs one event-driven simulation. Equivalent to
/// [`simulate_stream`] with stream 0.
pub fn simulate(
    scenario: &Scenario,
    protocol: &RevisionProtocol,
    initial: &AgentPopulationState,
    config: &StochasticConfig,
) -> Result<Trajectory> {
    simulate_stream(scenario, protocol, initial, config, 0)
}

/// Runs one ensemble member on ChaCha stream `stream` of the master seed.
pub fn simulate_stream(
    scenario: &Scenario,
    protocol: &RevisionProtocol,
    initial: &AgentPopulationState,
    config: &StochasticConfig,
    stream: u64,
) -> Result<Trajectory> {
    config.validate()?;
    let initial = AgentPopulationState::new(initial.counts().to_vec(), scenario)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(stream);

    let populations = scenario.populations();
    let regions = scenario.regions().len();
    let total_agents: u64 = populations.iter().map(|p| p.size).sum();
    let aggregate_rate = total_agents as f64 * config.clock_rate;

    let mut counts = initial.counts().to_vec();
    // Region masses maintained incrementally: selector counts are exact
    // integers, quality mass drifts only by float addition of exact deltas.
    let mut mass: Vec<u64> = vec![0; regions];
    let mut quality_mass: Vec<f64> = vec![0.0; regions];
    for (pop, block) in populations.iter().zip(&counts) {
        for (pos, &m) in pop.strategy_set.iter().enumerate() {
            mass[m] += block[pos];
            quality_mass[m] += block[pos] as f64 * pop.data_quality[pos];
        }
    }

    let mut samples: Vec<Sample> = Vec::new();
    let mut events = 0usize;
    let record = |samples: &mut Vec<Sample>, time: f64, events: usize, counts: &[Vec<u64>]| {
        let state = AgentPopulationState {
            counts: counts.to_vec(),
        }
        .proportions(scenario);
        let payoffs = scenario.payoff_table(&state);
        samples.push(Sample {
            step: events,
            time,
            state,
            payoffs,
            counts: Some(counts.to_vec()),
        });
    };

    let mut time = 0.0f64;
    let mut next_record = 0.0f64;
    loop {
        let wait: f64 = rng.sample::<f64, _>(Exp1) / aggregate_rate;
        let event_time = time + wait;
        while next_record <= event_time.min(config.horizon) {
            record(&mut samples, next_record, events, &counts);
            next_record += config.record_interval;
        }
        if event_time > config.horizon {
            break;
        }
        time = event_time;

        // Uniform agent: locate its population and strategy by count.
        let mut draw = rng.gen_range(0..total_agents);
        let (mut p, mut pos) = (0usize, 0usize);
        'locate: for (pi, block) in counts.iter().enumerate() {
            for (si, &c) in block.iter().enumerate() {
                if draw < c {
                    p = pi;
                    pos = si;
                    break 'locate;
                }
                draw -= c;
            }
        }

        let pop = &populations[p];
        let n = pop.size as f64;
        let shares: Vec<f64> = counts[p].iter().map(|&c| c as f64 / n).collect();
        let mass_f: Vec<f64> = mass.iter().map(|&m| m as f64).collect();
        let payoffs = scenario.population_payoffs_from_masses(p, &mass_f, &quality_mass);

        let u: f64 = rng.gen::<f64>() * config.rate_bound;
        let target = pick_target(protocol, p, &payoffs, &shares, pos, config.rate_bound, u)?;
        if target != pos {
            counts[p][pos] -= 1;
            counts[p][target] += 1;
            let from_region = pop.strategy_set[pos];
            let to_region = pop.strategy_set[target];
            mass[from_region] -= 1;
            mass[to_region] += 1;
            quality_mass[from_region] -= pop.data_quality[pos];
            quality_mass[to_region] += pop.data_quality[target];
        }
        events += 1;
    }

    let last_time = samples.last().map(|s| s.time).unwrap_or(f64::NEG_INFINITY);
    if config.horizon - last_time > 1e-12 || samples.is_empty() {
        record(&mut samples, config.horizon, events, &counts);
    }

    Ok(Trajectory {
        samples,
        converged: false,
        convergence_step: None,
        convergence_time: None,
    })
}

/// Runs `runs` independent ensemble members in parallel. Member `i` uses
/// ChaCha stream `i`, so the ensemble is deterministic no matter how it is
/// scheduled.
pub fn simulate_ensemble(
    scenario: &Scenario,
    protocol: &RevisionProtocol,
    initial: &AgentPopulationState,
    config: &StochasticConfig,
    runs: usize,
) -> Result<Vec<Trajectory>> {
    (0..runs as u64)
        .into_par_iter()
        .map(|stream| simulate_stream(scenario, protocol, initial, config, stream))
        .collect()
}

/// Pointwise mean of the recorded states across ensemble members. All runs
/// must share the same sample grid.
pub fn ensemble_mean_states(runs: &[Trajectory]) -> Vec<SocialState> {
    assert!(!runs.is_empty(), "empty ensemble");
    let len = runs[0].samples.len();
    assert!(
        runs.iter().all(|r| r.samples.len() == len),
        "ensemble members have different sample grids"
    );
    (0..len)
        .map(|k| {
            let mut blocks: Vec<Vec<f64>> = runs[0].samples[k]
                .state
                .blocks()
                .iter()
                .map(|b| vec![0.0; b.len()])
                .collect();
            for run in runs {
                for (acc, block) in blocks.iter_mut().zip(run.samples[k].state.blocks()) {
                    for (a, &x) in acc.iter_mut().zip(block) {
                        *a += x;
                    }
                }
            }
            let scale = 1.0 / runs.len() as f64;
            for block in &mut blocks {
                for a in block.iter_mut() {
                    *a *= scale;
                }
            }
            SocialState::from_blocks_unchecked(blocks)
        })
        .collect()
}
