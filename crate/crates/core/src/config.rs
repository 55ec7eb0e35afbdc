//! Experiment configuration: structure, dataset, optimizer, and mollifier
//! settings bundled into one serializable record with a canonical JSON
//! form for hashing and reproducibility manifests.

use crate::error::Result;
use crate::params::StructuralParams;

/// Two-moons dataset settings.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DatasetConfig {
    /// Total number of samples.
    pub n: usize,
    /// Standard deviation of the additive Gaussian jitter.
    pub noise: f64,
    /// Generator seed.
    pub seed: u64,
    /// Stratified split seed.
    pub split_seed: u64,
    /// Train / validation / test fractions, summing to one.
    pub fractions: (f64, f64, f64),
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            n: 252,
            noise: 0.0,
            seed: 1,
            split_seed: 2,
            fractions: (0.7, 0.05, 0.25),
        }
    }
}

/// Gradient-descent settings.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct OptimizerConfig {
    /// Initial step size; halved whenever a step fails to decrease the
    /// objective at the current sharpness.
    pub step: f64,
    /// Number of epochs (one full-batch step each).
    pub epochs: usize,
    /// `l2` penalty weight.
    pub gamma: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig { step: 0.1, epochs: 60, gamma: 1e-4 }
    }
}

/// Sharpness annealing settings: geometric ramp from `zeta0` to `zeta1`
/// across the epochs.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MollifierConfig {
    /// Sharpness at the first epoch.
    pub zeta0: f64,
    /// Sharpness at the last epoch.
    pub zeta1: f64,
}

impl Default for MollifierConfig {
    fn default() -> Self {
        MollifierConfig { zeta0: 3.0, zeta1: 10.0 }
    }
}

/// Complete experiment description.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ExperimentConfig {
    /// Fixed network structure.
    pub structure: StructuralParams,
    /// Integration step used during training and evaluation.
    pub grid_step: f64,
    /// Dataset generation and split.
    pub dataset: DatasetConfig,
    /// Optimizer settings.
    pub optimizer: OptimizerConfig,
    /// Sharpness schedule.
    pub mollifier: MollifierConfig,
    /// Parameter-initialization seed.
    pub init_seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            structure: StructuralParams::uniform(
                60.0, 8.0, 0.8, 6.0, 0.25, 10.0, 0.3, 0.2, 1, 8, 2,
            ),
            grid_step: 0.04,
            dataset: DatasetConfig::default(),
            optimizer: OptimizerConfig::default(),
            mollifier: MollifierConfig::default(),
            init_seed: 7,
        }
    }
}

impl ExperimentConfig {
    /// Canonical JSON: object keys sorted, stable float formatting. Two
    /// configs with equal canonical JSON describe the same experiment.
    pub fn canonical_json(&self) -> Result<String> {
        // serde_json with default features keeps maps ordered (BTreeMap),
        // so a Value round-trip sorts the keys.
        let value = serde_json::to_value(self)?;
        Ok(serde_json::to_string_pretty(&value)?)
    }

    /// Parses a config from JSON, rejecting unknown forms via serde.
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_json_round_trips() {
        let cfg = ExperimentConfig::default();
        let json = cfg.canonical_json().unwrap();
        let back = ExperimentConfig::from_json(&json).unwrap();
        assert_eq!(cfg, back);
        assert_eq!(json, back.canonical_json().unwrap());
    }

    #[test]
    fn canonical_json_sorts_keys() {
        let json = ExperimentConfig::default().canonical_json().unwrap();
        let dataset = json.find("\"dataset\"").unwrap();
        let grid = json.find("\"grid_step\"").unwrap();
        let structure = json.find("\"structure\"").unwrap();
        assert!(dataset < grid && grid < structure);
    }

    #[test]
    fn default_matches_reference_setup() {
        let cfg = ExperimentConfig::default();
        assert_eq!(cfg.structure.layers(), 1);
        assert_eq!(cfg.structure.width(), 8);
        assert_eq!(cfg.dataset.n, 252);
        assert_eq!(cfg.dataset.fractions, (0.7, 0.05, 0.25));
    }
}
