//! Game instance and payoff evaluation.
//!
//! A scenario couples a set of regions (one per service provider, each with a
//! survey route of length `D_m` meters and a reward pool `R_m`) with a set of
//! device populations. Population `p` has `N^p` anonymously identical members;
//! each member picks one region out of the population's strategy set. The
//! social state collects every population's strategy distribution.
//!
//! Payoffs for a member of population `p` serving region `m`:
//!
//! ```text
//! d_m   = D_m / Σ_q x^q_m N^q                     sensing distance (even split)
//! E     = η1 l^p_m / v^p  +  η2 d_m / u^p          traversal + hover energy
//! R^p_m = b^p_m R_m / Σ_q x^q_m N^q b^q_m          quality-weighted reward share
//! π^p_m = R^p_m − ζ^p E                            net payoff
//! ```
//!
//! Both shared denominators vanish when a region attracts no selectors, so
//! they are clamped from below by a floor proportional to the society size
//! ([`Scenario::denominator_floor`]). The floor keeps the payoff map Lipschitz
//! over the whole state space, which the direct (pairwise comparison) protocol
//! needs when it evaluates strategies nobody currently plays.

use crate::{Error, Result};

/// Index of a population within a scenario.
pub type PopulationId = usize;
/// Index of a region (equivalently, of the service provider that owns it).
pub type RegionId = usize;

/// Absolute tolerance on the unit-sum constraint of each population block.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// One region: a sensing route to be shared and a reward pool to be split.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionSpec {
    /// Total route length `D_m` in meters. Strictly positive.
    pub route_length_m: f64,
    /// Reward pool `R_m` in currency units. Nonnegative.
    pub reward_pool: f64,
}

/// One population of anonymously identical device owners.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationSpec {
    /// Number of owners `N^p`.
    pub size: u64,
    /// Ordered strategy set `S^p`: the regions this population may serve.
    pub strategy_set: Vec<RegionId>,
    /// Two-way base-to-region distance `l^p_m` in meters, one entry per
    /// strategy, aligned with `strategy_set`.
    pub traversal_distance_m: Vec<f64>,
    /// Unit energy cost `ζ^p` in currency per Joule.
    pub unit_energy_cost: f64,
    /// Propulsion power `η^p_1` in Watts (traversal stage).
    pub propulsion_power_w: f64,
    /// Hover power `η^p_2` in Watts (sensing stage).
    pub hover_power_w: f64,
    /// Average traversal speed `v^p` in m/s.
    pub traversal_speed: f64,
    /// Average sensing-stage speed `u^p` in m/s.
    pub sensing_speed: f64,
    /// Sensing data quality `b^p_m`, one entry per strategy, aligned with
    /// `strategy_set`. Strictly positive.
    pub data_quality: Vec<f64>,
    /// Probability `α^{p,1}` that a revising member uses the direct
    /// (pairwise comparison) protocol rather than pairwise imitation.
    pub smith_alpha: f64,
}

/// A full game instance. Immutable once constructed; all payoff operations
/// are pure functions of `(&Scenario, &SocialState)` and safe to evaluate
/// concurrently.
#[derive(Debug, Clone)]
pub struct Scenario {
    regions: Vec<RegionSpec>,
    populations: Vec<PopulationSpec>,
    denominator_floor: f64,
    // Derived caches.
    total_size: f64,
    /// `[p][region] -> position of the region in population p's strategy set`.
    strategy_pos: Vec<Vec<Option<usize>>>,
    /// Minimum data quality among populations that can select each region
    /// (1.0 for regions nobody can select; the value is never used there).
    min_quality: Vec<f64>,
}

impl Scenario {
    /// Default denominator floor `δ`.
    pub const DEFAULT_FLOOR: f64 = 1e-6;

    /// Validates all structural invariants and builds the instance.
    pub fn new(
        regions: Vec<RegionSpec>,
        populations: Vec<PopulationSpec>,
        denominator_floor: f64,
    ) -> Result<Self> {
        if regions.is_empty() {
            return Err(Error::InvalidScenario("no regions".into()));
        }
        if populations.is_empty() {
            return Err(Error::InvalidScenario("no populations".into()));
        }
        if denominator_floor <= 0.0 || !denominator_floor.is_finite() {
            return Err(Error::InvalidScenario(format!(
                "denominator_floor must be a positive finite number, got {denominator_floor}"
            )));
        }
        for (m, r) in regions.iter().enumerate() {
            if r.route_length_m <= 0.0 || !r.route_length_m.is_finite() {
                return Err(Error::InvalidScenario(format!(
                    "region {m}: route_length_m must be > 0, got {}",
                    r.route_length_m
                )));
            }
            if r.reward_pool < 0.0 || !r.reward_pool.is_finite() {
                return Err(Error::InvalidScenario(format!(
                    "region {m}: reward_pool must be >= 0, got {}",
                    r.reward_pool
                )));
            }
        }
        for (p, pop) in populations.iter().enumerate() {
            if pop.size == 0 {
                return Err(Error::InvalidScenario(format!("population {p}: size must be >= 1")));
            }
            if pop.strategy_set.is_empty() {
                return Err(Error::InvalidScenario(format!(
                    "population {p}: empty strategy set"
                )));
            }
            for &m in &pop.strategy_set {
                if m >= regions.len() {
                    return Err(Error::InvalidScenario(format!(
                        "population {p}: strategy set references unknown region {m}"
                    )));
                }
            }
            let mut seen = vec![false; regions.len()];
            for &m in &pop.strategy_set {
                if seen[m] {
                    return Err(Error::InvalidScenario(format!(
                        "population {p}: region {m} appears twice in the strategy set"
                    )));
                }
                seen[m] = true;
            }
            if pop.traversal_distance_m.len() != pop.strategy_set.len() {
                return Err(Error::InvalidScenario(format!(
                    "population {p}: traversal_distance_m has {} entries for {} strategies",
                    pop.traversal_distance_m.len(),
                    pop.strategy_set.len()
                )));
            }
            if pop.data_quality.len() != pop.strategy_set.len() {
                return Err(Error::InvalidScenario(format!(
                    "population {p}: data_quality has {} entries for {} strategies",
                    pop.data_quality.len(),
                    pop.strategy_set.len()
                )));
            }
            if pop.traversal_distance_m.iter().any(|&l| l < 0.0 || !l.is_finite()) {
                return Err(Error::InvalidScenario(format!(
                    "population {p}: traversal distances must be finite and >= 0"
                )));
            }
            if pop.data_quality.iter().any(|&b| b <= 0.0 || !b.is_finite()) {
                return Err(Error::InvalidScenario(format!(
                    "population {p}: data quality scores must be > 0"
                )));
            }
            if pop.traversal_speed <= 0.0
                || pop.sensing_speed <= 0.0
                || !pop.traversal_speed.is_finite()
                || !pop.sensing_speed.is_finite()
            {
                return Err(Error::InvalidScenario(format!(
                    "population {p}: speeds must be > 0"
                )));
            }
            if pop.propulsion_power_w < 0.0
                || pop.hover_power_w < 0.0
                || !pop.propulsion_power_w.is_finite()
                || !pop.hover_power_w.is_finite()
            {
                return Err(Error::InvalidScenario(format!(
                    "population {p}: powers must be >= 0"
                )));
            }
            if pop.unit_energy_cost < 0.0 || !pop.unit_energy_cost.is_finite() {
                return Err(Error::InvalidScenario(format!(
                    "population {p}: unit_energy_cost must be >= 0"
                )));
            }
            if !(0.0..=1.0).contains(&pop.smith_alpha) {
                return Err(Error::InvalidScenario(format!(
                    "population {p}: smith_alpha must lie in [0, 1], got {}",
                    pop.smith_alpha
                )));
            }
        }

        let total_size = populations.iter().map(|p| p.size as f64).sum();
        let strategy_pos: Vec<Vec<Option<usize>>> = populations
            .iter()
            .map(|pop| {
                let mut lut = vec![None; regions.len()];
                for (pos, &m) in pop.strategy_set.iter().enumerate() {
                    lut[m] = Some(pos);
                }
                lut
            })
            .collect();
        let min_quality: Vec<f64> = (0..regions.len())
            .map(|m| {
                populations
                    .iter()
                    .enumerate()
                    .filter_map(|(p, pop)| strategy_pos[p][m].map(|pos| pop.data_quality[pos]))
                    .fold(f64::INFINITY, f64::min)
            })
            .map(|q| if q.is_finite() { q } else { 1.0 })
            .collect();

        Ok(Self {
            regions,
            populations,
            denominator_floor,
            total_size,
            strategy_pos,
            min_quality,
        })
    }

    pub fn regions(&self) -> &[RegionSpec] {
        &self.regions
    }

    pub fn populations(&self) -> &[PopulationSpec] {
        &self.populations
    }

    pub fn denominator_floor(&self) -> f64 {
        self.denominator_floor
    }

    /// Society size `Σ_p N^p`.
    pub fn total_size(&self) -> f64 {
        self.total_size
    }

    /// Total strategy count `S = Σ_p |S^p|`.
    pub fn total_strategies(&self) -> usize {
        self.populations.iter().map(|p| p.strategy_set.len()).sum()
    }

    /// Position of `region` inside population `p`'s strategy set, if present.
    pub fn strategy_position(&self, population: PopulationId, region: RegionId) -> Option<usize> {
        self.strategy_pos.get(population).and_then(|lut| *lut.get(region)?)
    }

    fn require_position(&self, population: PopulationId, region: RegionId) -> Result<usize> {
        if region >= self.regions.len() {
            return Err(Error::UnknownRegion { region });
        }
        self.strategy_position(population, region)
            .ok_or(Error::RegionNotInStrategySet { population, region })
    }

    /// Raw selector mass and quality-weighted selector mass per region,
    /// without the floor applied.
    fn raw_masses(&self, state: &SocialState) -> (Vec<f64>, Vec<f64>) {
        let mut mass = vec![0.0; self.regions.len()];
        let mut quality_mass = vec![0.0; self.regions.len()];
        for (p, pop) in self.populations.iter().enumerate() {
            let n = pop.size as f64;
            let block = state.block(p);
            for (pos, &m) in pop.strategy_set.iter().enumerate() {
                let w = block[pos] * n;
                mass[m] += w;
                quality_mass[m] += w * pop.data_quality[pos];
            }
        }
        (mass, quality_mass)
    }

    /// Weighted number of devices serving `region`, clamped from below by
    /// `δ · Σ_p N^p` so it is strictly positive even when nobody selects the
    /// region.
    pub fn effective_selector_mass(&self, state: &SocialState, region: RegionId) -> Result<f64> {
        if region >= self.regions.len() {
            return Err(Error::UnknownRegion { region });
        }
        state.check_shape(self)?;
        let mut mass = 0.0;
        for (p, pop) in self.populations.iter().enumerate() {
            if let Some(pos) = self.strategy_pos[p][region] {
                mass += state.block(p)[pos] * pop.size as f64;
            }
        }
        Ok(mass.max(self.denominator_floor * self.total_size))
    }

    /// Length of the route segment a single device serving `region` covers,
    /// under even division among all selectors. Identical for every
    /// population that can serve the region.
    pub fn sensing_distance(
        &self,
        state: &SocialState,
        population: PopulationId,
        region: RegionId,
    ) -> Result<f64> {
        self.require_position(population, region)?;
        let mass = self.effective_selector_mass(state, region)?;
        Ok(self.regions[region].route_length_m / mass)
    }

    /// Energy in Joules spent by a `population` member serving `region`:
    /// traversal propulsion plus sensing-stage hover.
    pub fn total_energy(
        &self,
        state: &SocialState,
        population: PopulationId,
        region: RegionId,
    ) -> Result<f64> {
        let pos = self.require_position(population, region)?;
        let pop = &self.populations[population];
        let d = self.sensing_distance(state, population, region)?;
        Ok(pop.propulsion_power_w * pop.traversal_distance_m[pos] / pop.traversal_speed
            + pop.hover_power_w * d / pop.sensing_speed)
    }

    /// Quality-weighted share of `region`'s reward pool received by one
    /// member of `population`.
    pub fn reward_share(
        &self,
        state: &SocialState,
        population: PopulationId,
        region: RegionId,
    ) -> Result<f64> {
        let pos = self.require_position(population, region)?;
        state.check_shape(self)?;
        let mut quality_mass = 0.0;
        for (q, pop) in self.populations.iter().enumerate() {
            if let Some(qpos) = self.strategy_pos[q][region] {
                quality_mass += state.block(q)[qpos] * pop.size as f64 * pop.data_quality[qpos];
            }
        }
        let floor = self.denominator_floor * self.total_size * self.min_quality[region];
        let pop = &self.populations[population];
        Ok(pop.data_quality[pos] * self.regions[region].reward_pool / quality_mass.max(floor))
    }

    /// Net payoff `π^p_m`: reward share minus energy cost. May be negative.
    pub fn payoff(
        &self,
        state: &SocialState,
        population: PopulationId,
        region: RegionId,
    ) -> Result<f64> {
        let reward = self.reward_share(state, population, region)?;
        let energy = self.total_energy(state, population, region)?;
        Ok(reward - self.populations[population].unit_energy_cost * energy)
    }

    /// Payoff vector of one population given raw (unfloored) selector and
    /// quality masses per region. Shared by the payoff table and the
    /// event-driven simulator, which maintains the masses incrementally.
    pub(crate) fn population_payoffs_from_masses(
        &self,
        population: PopulationId,
        mass: &[f64],
        quality_mass: &[f64],
    ) -> Vec<f64> {
        let pop = &self.populations[population];
        let mass_floor = self.denominator_floor * self.total_size;
        pop.strategy_set
            .iter()
            .enumerate()
            .map(|(pos, &m)| {
                let region = &self.regions[m];
                let d = region.route_length_m / mass[m].max(mass_floor);
                let energy = pop.propulsion_power_w * pop.traversal_distance_m[pos]
                    / pop.traversal_speed
                    + pop.hover_power_w * d / pop.sensing_speed;
                let reward = pop.data_quality[pos] * region.reward_pool
                    / quality_mass[m].max(mass_floor * self.min_quality[m]);
                reward - pop.unit_energy_cost * energy
            })
            .collect()
    }

    /// Evaluates the whole payoff map `F` at `state`: one payoff per
    /// population/strategy pair plus each population's average payoff.
    ///
    /// Panics if the state's shape does not match the scenario; states built
    /// through [`SocialState::new`] always match.
    pub fn payoff_table(&self, state: &SocialState) -> PayoffTable {
        debug_assert!(state.check_shape(self).is_ok());
        let (mass, quality_mass) = self.raw_masses(state);
        let mut per_pop = Vec::with_capacity(self.populations.len());
        let mut averages = Vec::with_capacity(self.populations.len());
        for p in 0..self.populations.len() {
            let payoffs = self.population_payoffs_from_masses(p, &mass, &quality_mass);
            let average = payoffs.iter().zip(state.block(p)).map(|(pi, x)| pi * x).sum();
            per_pop.push(payoffs);
            averages.push(average);
        }
        PayoffTable { per_pop, averages }
    }
}

/// A point of the social state space: one strategy distribution per
/// population, each block summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct SocialState {
    blocks: Vec<Vec<f64>>,
}

impl SocialState {
    /// Validates nonnegativity, finiteness, per-block unit sums, and shape
    /// against `scenario`.
    pub fn new(blocks: Vec<Vec<f64>>, scenario: &Scenario) -> Result<Self> {
        let state = Self { blocks };
        state.check_shape(scenario)?;
        state.check_simplex()?;
        Ok(state)
    }

    /// Uniform distribution over each population's strategy set.
    pub fn uniform(scenario: &Scenario) -> Self {
        Self {
            blocks: scenario
                .populations()
                .iter()
                .map(|pop| {
                    let s = pop.strategy_set.len();
                    vec![1.0 / s as f64; s]
                })
                .collect(),
        }
    }

    /// Builds a state without validating; for internal hot paths that
    /// guarantee validity by construction (integrator repair, count ratios).
    pub(crate) fn from_blocks_unchecked(blocks: Vec<Vec<f64>>) -> Self {
        Self { blocks }
    }

    pub fn blocks(&self) -> &[Vec<f64>] {
        &self.blocks
    }

    pub fn block(&self, population: PopulationId) -> &[f64] {
        &self.blocks[population]
    }

    /// Share of `population` on the strategy at `position` in its set.
    pub fn share(&self, population: PopulationId, position: usize) -> f64 {
        self.blocks[population][position]
    }

    pub(crate) fn check_shape(&self, scenario: &Scenario) -> Result<()> {
        if self.blocks.len() != scenario.populations().len() {
            return Err(Error::InvalidState(format!(
                "state has {} population blocks, scenario has {} populations",
                self.blocks.len(),
                scenario.populations().len()
            )));
        }
        for (p, (block, pop)) in self.blocks.iter().zip(scenario.populations()).enumerate() {
            if block.len() != pop.strategy_set.len() {
                return Err(Error::InvalidState(format!(
                    "population {p}: block has {} entries for {} strategies",
                    block.len(),
                    pop.strategy_set.len()
                )));
            }
        }
        Ok(())
    }

    fn check_simplex(&self) -> Result<()> {
        for (p, block) in self.blocks.iter().enumerate() {
            for (i, &x) in block.iter().enumerate() {
                if !x.is_finite() || x < 0.0 {
                    return Err(Error::InvalidState(format!(
                        "population {p}, strategy {i}: share {x} is negative or non-finite"
                    )));
                }
            }
            let sum: f64 = block.iter().sum();
            if (sum - 1.0).abs() > SIMPLEX_TOL {
                return Err(Error::InvalidState(format!(
                    "population {p}: shares sum to {sum}, expected 1 within {SIMPLEX_TOL:e}"
                )));
            }
        }
        Ok(())
    }

    /// L∞ distance to another state of the same shape.
    pub fn linf_distance(&self, other: &Self) -> f64 {
        self.blocks
            .iter()
            .flatten()
            .zip(other.blocks.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Payoffs `π^p_m` for every population/strategy pair at one social state,
/// plus the population averages `π̄^p = Σ_m x^p_m π^p_m`.
#[derive(Debug, Clone, PartialEq)]
pub struct PayoffTable {
    per_pop: Vec<Vec<f64>>,
    averages: Vec<f64>,
}

impl PayoffTable {
    /// Assembles a table from raw payoff vectors, computing the averages
    /// against `state` so the average/payoff consistency invariant holds by
    /// construction. Mostly useful for tests that want synthetic payoffs.
    pub fn from_payoffs(per_pop: Vec<Vec<f64>>, state: &SocialState) -> Self {
        let averages = per_pop
            .iter()
            .zip(state.blocks())
            .map(|(payoffs, block)| payoffs.iter().zip(block).map(|(pi, x)| pi * x).sum())
            .collect();
        Self { per_pop, averages }
    }

    /// Payoff vector of one population, indexed by strategy position.
    pub fn payoffs(&self, population: PopulationId) -> &[f64] {
        &self.per_pop[population]
    }

    /// Average payoff `π̄^p` of one population.
    pub fn average(&self, population: PopulationId) -> f64 {
        self.averages[population]
    }

    pub fn population_count(&self) -> usize {
        self.per_pop.len()
    }

    /// Max-minus-min payoff over the strategies of `population` whose share
    /// in `state` exceeds `threshold`. Zero when at most one strategy
    /// survives the cut.
    pub fn spread_over_active(
        &self,
        state: &SocialState,
        population: PopulationId,
        threshold: f64,
    ) -> f64 {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let block = state.block(population);
        for (pos, &pi) in self.per_pop[population].iter().enumerate() {
            if block[pos] > threshold {
                lo = lo.min(pi);
                hi = hi.max(pi);
            }
        }
        if hi >= lo {
            hi - lo
        } else {
            0.0
        }
    }
}

/// Per-population strategy-share velocities `ẋ^p_m`, in proportion per unit
/// time. Produced by the mean-dynamics fields in [`crate::dynamics`].
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    blocks: Vec<Vec<f64>>,
}

impl VectorField {
    pub fn from_blocks(blocks: Vec<Vec<f64>>) -> Self {
        Self { blocks }
    }

    pub fn zeros_like(state: &SocialState) -> Self {
        Self {
            blocks: state.blocks().iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    pub fn blocks(&self) -> &[Vec<f64>] {
        &self.blocks
    }

    pub fn block(&self, population: PopulationId) -> &[f64] {
        &self.blocks[population]
    }

    pub fn component(&self, population: PopulationId, position: usize) -> f64 {
        self.blocks[population][position]
    }

    pub(crate) fn blocks_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.blocks
    }

    /// Largest absolute component.
    pub fn linf_norm(&self) -> f64 {
        self.blocks
            .iter()
            .flatten()
            .map(|v| v.abs())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.blocks.iter().flatten().all(|v| v.is_finite())
    }
}
