//! Run manifests: the fully resolved configuration of a run, hashed so every
//! output file can be traced back to its exact inputs.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;
use crate::schema::ScenarioFile;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct ToolInfo {
    pub name: String,
    pub version: String,
}

impl Default for ToolInfo {
    fn default() -> Self {
        Self {
            name: "popgame".into(),
            version: env!("CARGO_PKG_VERSION").into(),
        }
    }
}

/// Everything that determines a run's outputs: tool version, subcommand,
/// resolved command options, and the resolved (post-override) scenario.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Manifest {
    pub tool: ToolInfo,
    pub command: String,
    pub options: serde_json::Value,
    pub scenario: ScenarioFile,
}

impl Manifest {
    pub fn new(command: &str, options: serde_json::Value, scenario: ScenarioFile) -> Self {
        Self {
            tool: ToolInfo::default(),
            command: command.to_string(),
            options,
            scenario,
        }
    }

    /// SHA-256 over the canonical (compact JSON) serialization.
    pub fn sha256(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("manifest serialization cannot fail");
        hex::encode(Sha256::digest(&bytes))
    }

    /// Writes `manifest.json` with the hash alongside the manifest body and
    /// returns the hash.
    pub fn write(&self, out_dir: &std::path::Path) -> Result<String, CliError> {
        let hash = self.sha256();
        #[derive(Serialize)]
        struct Wire<'a> {
            manifest_sha256: &'a str,
            #[serde(flatten)]
            manifest: &'a Manifest,
        }
        let text = serde_json::to_string_pretty(&Wire {
            manifest_sha256: &hash,
            manifest: self,
        })
        .expect("manifest serialization cannot fail");
        let path = out_dir.join("manifest.json");
        std::fs::write(&path, text + "\n")
            .map_err(|e| CliError::io(format!("writing {}: {e}", path.display())))?;
        Ok(hash)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_scenario() -> ScenarioFile {
        ScenarioFile::from_value(serde_json::json!({
            "seed": 3,
            "regions": [{"route_length_m": 1000.0, "reward_pool": 1500.0}],
            "populations": [{
                "size": 60,
                "strategies": [0],
                "traversal_distance_m": [400.0],
                "unit_energy_cost": 0.001,
                "propulsion_power_w": 16.0,
                "hover_power_w": 16.0,
                "traversal_speed_mps": 4.0,
                "sensing_speed_mps": 4.0,
                "data_quality": [1.0],
                "smith_alpha": 0.0
            }],
            "protocol": "replicator"
        }))
        .unwrap()
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let manifest = Manifest::new("simulate", serde_json::json!({}), sample_scenario());
        assert_eq!(manifest.sha256(), manifest.sha256());
        let mut other = manifest.clone();
        other.scenario.seed = 4;
        assert_ne!(manifest.sha256(), other.sha256());
    }

    #[test]
    fn written_manifest_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = Manifest::new("simulate", serde_json::json!({"grid": 20}), sample_scenario());
        let hash = manifest.write(dir.path()).unwrap();

        let text = std::fs::read_to_string(dir.path().join("manifest.json")).unwrap();
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(value["manifest_sha256"].as_str().unwrap(), hash);
        let back: Manifest = serde_json::from_value(
            serde_json::json!({
                "tool": value["tool"],
                "command": value["command"],
                "options": value["options"],
                "scenario": value["scenario"],
            }))
        .unwrap();
        assert_eq!(back, manifest);
        assert_eq!(back.sha256(), hash);
    }
}
