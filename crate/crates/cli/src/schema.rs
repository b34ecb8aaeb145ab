//! Scenario files: a JSON tree with one canonical serialization, schema
//! validation, a `_km` suffix convention for distances, and dotted-path
//! overrides.
//!
//! Files store SI units (meters, m/s, Watts, Joules). Distance fields quoted
//! in kilometers may use the `_km` variant instead; loading normalizes them
//! to meters, so emitted manifests always carry SI values.

use serde::{Deserialize, Serialize};

use popgame_core::dynamics::{ProtocolKind, RevisionProtocol};
use popgame_core::game::{PopulationSpec, RegionSpec, Scenario, SocialState};
use popgame_core::generate::GeneratedScenario;

use crate::error::CliError;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    /// Master seed: every random choice in a run flows from it.
    pub seed: u64,
    pub regions: Vec<RegionEntry>,
    pub populations: Vec<PopulationEntry>,
    pub protocol: ProtocolEntry,
    /// Starting strategy distributions, one block per population. Resolved
    /// to the uniform state when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub integrator: IntegratorEntry,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stochastic: Option<StochasticEntry>,
    #[serde(default = "default_floor")]
    pub denominator_floor: f64,
}

fn default_floor() -> f64 {
    Scenario::DEFAULT_FLOOR
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RegionEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub route_length_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub route_length_km: Option<f64>,
    pub reward_pool: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PopulationEntry {
    pub size: u64,
    /// Region indices this population may serve, in payoff-column order.
    pub strategies: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub traversal_distance_m: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub traversal_distance_km: Option<Vec<f64>>,
    pub unit_energy_cost: f64,
    pub propulsion_power_w: f64,
    pub hover_power_w: f64,
    pub traversal_speed_mps: f64,
    pub sensing_speed_mps: f64,
    pub data_quality: Vec<f64>,
    pub smith_alpha: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum ProtocolEntry {
    /// Pairwise proportional imitation for every population.
    Replicator,
    /// Pairwise comparison for every population.
    Smith,
    /// Per-population mixture weighted by each population's `smith_alpha`.
    Hybrid,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct IntegratorEntry {
    #[serde(default = "d_step_size")]
    pub step_size: f64,
    #[serde(default = "d_max_time")]
    pub max_time: f64,
    #[serde(default = "d_tau")]
    pub convergence_tau: f64,
    #[serde(default = "d_extinction")]
    pub extinction_threshold: f64,
    #[serde(default = "d_stride")]
    pub record_stride: usize,
}

fn d_step_size() -> f64 {
    0.01
}
fn d_max_time() -> f64 {
    200.0
}
fn d_tau() -> f64 {
    0.05
}
fn d_extinction() -> f64 {
    1e-3
}
fn d_stride() -> usize {
    10
}

impl Default for IntegratorEntry {
    fn default() -> Self {
        Self {
            step_size: d_step_size(),
            max_time: d_max_time(),
            convergence_tau: d_tau(),
            extinction_threshold: d_extinction(),
            record_stride: d_stride(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct StochasticEntry {
    /// Defaults to the file's master seed when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default = "d_clock")]
    pub clock_rate: f64,
    #[serde(default = "d_rate_bound")]
    pub rate_bound: f64,
    #[serde(default = "d_horizon")]
    pub horizon: f64,
    #[serde(default = "d_record_interval")]
    pub record_interval: f64,
}

fn d_clock() -> f64 {
    1.0
}
fn d_rate_bound() -> f64 {
    100.0
}
fn d_horizon() -> f64 {
    10.0
}
fn d_record_interval() -> f64 {
    0.1
}

impl Default for StochasticEntry {
    fn default() -> Self {
        Self {
            seed: None,
            clock_rate: d_clock(),
            rate_bound: d_rate_bound(),
            horizon: d_horizon(),
            record_interval: d_record_interval(),
        }
    }
}

impl ScenarioFile {
    /// Parses a file from its JSON tree, after overrides have been applied.
    pub fn from_value(value: serde_json::Value) -> Result<Self, CliError> {
        let mut file: ScenarioFile = serde_json::from_value(value)
            .map_err(|e| CliError::schema(format!("scenario file: {e}")))?;
        file.normalize()?;
        Ok(file)
    }

    /// Folds `_km` fields into meters and fills the initial state, so the
    /// resolved file always carries SI units and a concrete starting point.
    fn normalize(&mut self) -> Result<(), CliError> {
        for (m, region) in self.regions.iter_mut().enumerate() {
            region.route_length_m = Some(match (region.route_length_m, region.route_length_km) {
                (Some(meters), None) => meters,
                (None, Some(km)) => km * 1000.0,
                (Some(_), Some(_)) => {
                    return Err(CliError::schema(format!(
                        "regions.{m}: route_length_m and route_length_km are mutually exclusive"
                    )))
                }
                (None, None) => {
                    return Err(CliError::schema(format!(
                        "regions.{m}: one of route_length_m or route_length_km is required"
                    )))
                }
            });
            region.route_length_km = None;
        }
        for (p, pop) in self.populations.iter_mut().enumerate() {
            pop.traversal_distance_m = Some(
                match (pop.traversal_distance_m.take(), pop.traversal_distance_km.take()) {
                    (Some(meters), None) => meters,
                    (None, Some(km)) => km.iter().map(|v| v * 1000.0).collect(),
                    (Some(_), Some(_)) => {
                        return Err(CliError::schema(format!(
                            "populations.{p}: traversal_distance_m and traversal_distance_km \
                             are mutually exclusive"
                        )))
                    }
                    (None, None) => {
                        return Err(CliError::schema(format!(
                            "populations.{p}: one of traversal_distance_m or \
                             traversal_distance_km is required"
                        )))
                    }
                },
            );
            pop.traversal_distance_km = None;
        }
        if self.initial_state.is_none() {
            self.initial_state = Some(
                self.populations
                    .iter()
                    .map(|p| vec![1.0 / p.strategies.len() as f64; p.strategies.len()])
                    .collect(),
            );
        }
        Ok(())
    }

    /// Builds the validated game instance and starting state. All scenario
    /// invariants are re-checked here with index-bearing messages.
    pub fn to_game(&self) -> Result<GeneratedScenario, CliError> {
        let regions = self
            .regions
            .iter()
            .map(|r| RegionSpec {
                route_length_m: r.route_length_m.expect("normalized"),
                reward_pool: r.reward_pool,
            })
            .collect();
        let populations = self
            .populations
            .iter()
            .map(|p| PopulationSpec {
                size: p.size,
                strategy_set: p.strategies.clone(),
                traversal_distance_m: p.traversal_distance_m.clone().expect("normalized"),
                unit_energy_cost: p.unit_energy_cost,
                propulsion_power_w: p.propulsion_power_w,
                hover_power_w: p.hover_power_w,
                traversal_speed: p.traversal_speed_mps,
                sensing_speed: p.sensing_speed_mps,
                data_quality: p.data_quality.clone(),
                smith_alpha: p.smith_alpha,
            })
            .collect();
        let scenario = Scenario::new(regions, populations, self.denominator_floor)
            .map_err(CliError::from_core)?;
        let initial_state = SocialState::new(
            self.initial_state.clone().expect("normalized"),
            &scenario,
        )
        .map_err(CliError::from_core)?;
        Ok(GeneratedScenario {
            scenario,
            initial_state,
        })
    }

    pub fn to_protocol(&self, scenario: &Scenario) -> Result<RevisionProtocol, CliError> {
        Ok(match self.protocol {
            ProtocolEntry::Replicator => {
                RevisionProtocol::Pure(ProtocolKind::PairwiseProportionalImitation)
            }
            ProtocolEntry::Smith => RevisionProtocol::Pure(ProtocolKind::PairwiseComparison),
            ProtocolEntry::Hybrid => RevisionProtocol::from_scenario(scenario),
        })
    }

    /// The effective stochastic configuration for agent-based runs.
    pub fn stochastic_config(&self) -> popgame_core::stochastic::StochasticConfig {
        let entry = self.stochastic.clone().unwrap_or_default();
        popgame_core::stochastic::StochasticConfig {
            seed: entry.seed.unwrap_or(self.seed),
            clock_rate: entry.clock_rate,
            rate_bound: entry.rate_bound,
            horizon: entry.horizon,
            record_interval: entry.record_interval,
        }
    }

    pub fn integrator_config(&self) -> popgame_core::integrator::IntegratorConfig {
        popgame_core::integrator::IntegratorConfig {
            step_size: self.integrator.step_size,
            max_time: self.integrator.max_time,
            convergence_tau: self.integrator.convergence_tau,
            extinction_threshold: self.integrator.extinction_threshold,
            record_stride: self.integrator.record_stride,
        }
    }
}

/// Applies one `--set path=value` override to the raw JSON tree. Path
/// segments are object keys or array indices; the value is parsed as JSON,
/// falling back to a plain string. Missing object segments are created on
/// the way down (so defaulted sections can be overridden); misspelled keys
/// are still rejected when the tree is deserialized.
pub fn apply_override(root: &mut serde_json::Value, spec: &str) -> Result<(), CliError> {
    let (path, raw_value) = spec
        .split_once('=')
        .ok_or_else(|| CliError::schema(format!("override '{spec}' is not of the form path=value")))?;
    let value: serde_json::Value = serde_json::from_str(raw_value)
        .unwrap_or_else(|_| serde_json::Value::String(raw_value.to_string()));

    let segments: Vec<&str> = path.split('.').collect();
    if segments.is_empty() || segments.iter().any(|s| s.is_empty()) {
        return Err(CliError::schema(format!("override path '{path}' is malformed")));
    }
    let mut cursor = root;
    for (depth, segment) in segments.iter().enumerate() {
        let last = depth + 1 == segments.len();
        let here = || segments[..=depth].join(".");
        match cursor {
            serde_json::Value::Object(map) => {
                if last {
                    map.insert((*segment).to_string(), value);
                    return Ok(());
                }
                cursor = map
                    .entry((*segment).to_string())
                    .or_insert_with(|| serde_json::Value::Object(Default::default()));
            }
            serde_json::Value::Array(items) => {
                let index: usize = segment.parse().map_err(|_| {
                    CliError::schema(format!("override path '{}': expected an array index", here()))
                })?;
                let slot = items.get_mut(index).ok_or_else(|| {
                    CliError::schema(format!("override path '{}' is out of bounds", here()))
                })?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                cursor = slot;
            }
            _ => {
                return Err(CliError::schema(format!(
                    "override path '{}' descends into a scalar",
                    here()
                )))
            }
        }
    }
    unreachable!("loop returns on the last segment");
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_json() -> serde_json::Value {
        serde_json::json!({
            "seed": 7,
            "regions": [
                {"route_length_m": 1500.0, "reward_pool": 1200.0},
                {"route_length_km": 1.2, "reward_pool": 1600.0}
            ],
            "populations": [{
                "size": 100,
                "strategies": [0, 1],
                "traversal_distance_km": [0.5, 0.8],
                "unit_energy_cost": 0.001,
                "propulsion_power_w": 18.0,
                "hover_power_w": 17.0,
                "traversal_speed_mps": 4.0,
                "sensing_speed_mps": 4.0,
                "data_quality": [2.0, 3.0],
                "smith_alpha": 0.2
            }],
            "protocol": "hybrid"
        })
    }

    #[test]
    fn km_fields_normalize_to_meters() {
        let file = ScenarioFile::from_value(minimal_json()).unwrap();
        assert_eq!(file.regions[1].route_length_m, Some(1200.0));
        assert_eq!(file.regions[1].route_length_km, None);
        assert_eq!(
            file.populations[0].traversal_distance_m,
            Some(vec![500.0, 800.0])
        );
        let g = file.to_game().unwrap();
        assert_eq!(g.scenario.regions()[1].route_length_m, 1200.0);
        // Absent initial_state resolves to uniform.
        assert_eq!(file.initial_state, Some(vec![vec![0.5, 0.5]]));
    }

    #[test]
    fn unknown_keys_are_rejected_with_their_name() {
        let mut value = minimal_json();
        value["regions"][0]["route_legnth_m"] = serde_json::json!(1.0);
        let err = ScenarioFile::from_value(value).unwrap_err();
        assert!(err.message().contains("route_legnth_m"), "{}", err.message());
    }

    #[test]
    fn exclusive_distance_fields_are_enforced() {
        let mut value = minimal_json();
        value["regions"][0]["route_length_km"] = serde_json::json!(1.5);
        let err = ScenarioFile::from_value(value).unwrap_err();
        assert!(err.message().contains("regions.0"), "{}", err.message());

        let mut value = minimal_json();
        value["populations"][0]
            .as_object_mut()
            .unwrap()
            .remove("traversal_distance_km");
        let err = ScenarioFile::from_value(value).unwrap_err();
        assert!(err.message().contains("populations.0"), "{}", err.message());
    }

    #[test]
    fn overrides_follow_dotted_paths() {
        let mut value = minimal_json();
        apply_override(&mut value, "populations.0.smith_alpha=0.9").unwrap();
        apply_override(&mut value, "integrator.step_size=0.005").unwrap();
        apply_override(&mut value, "seed=11").unwrap();
        let file = ScenarioFile::from_value(value).unwrap();
        assert_eq!(file.populations[0].smith_alpha, 0.9);
        assert_eq!(file.integrator.step_size, 0.005);
        assert_eq!(file.seed, 11);

        let mut value = minimal_json();
        assert!(apply_override(&mut value, "populations.7.size=3").is_err());
        assert!(apply_override(&mut value, "no_equals_sign").is_err());
        assert!(apply_override(&mut value, "regions.x.reward_pool=1").is_err());
    }

    #[test]
    fn canonical_serialization_round_trips() {
        let file = ScenarioFile::from_value(minimal_json()).unwrap();
        let text = serde_json::to_string_pretty(&file).unwrap();
        let back = ScenarioFile::from_value(serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(file, back);
    }
}
