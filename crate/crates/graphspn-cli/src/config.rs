//! The single experiment configuration consumed by every verb.

use crate::CliError;
use graphspn::data::{default_noise_levels, NoiseLevel, NUM_CATEGORIES};
use graphspn::learn::{StructureParams, TrainConfig};
use graphspn::model::InstantiationConfig;
use graphspn::mrf::BpConfig;
use graphspn::templates::{default_template_set, SubGraphTemplate};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    /// Building names; train/test splits are by building.
    pub buildings: Vec<String>,
    /// The held-out building; the others form the training set.
    pub test_building: String,
    pub floors_per_building: usize,
    pub corridor_length_range: (usize, usize),
    pub rooms_per_corridor_range: (usize, usize),
    pub room_size_range: (usize, usize),
    pub category_priors: Vec<f64>,
    pub noise_levels: Vec<NoiseLevel>,
    /// Noisy evidence sets generated per graph and noise level.
    pub evidence_sets_per_graph: usize,
    /// Fraction of nodes demoted to placeholders for the placeholder task.
    pub placeholder_fraction: f64,
    pub templates: Vec<SubGraphTemplate>,
    pub structure_params: StructureParams,
    pub train_config: TrainConfig,
    /// Decompositions per training graph when extracting components.
    pub decomposition_repetitions: usize,
    pub instantiation: InstantiationConfig,
    pub bp_config: BpConfig,
    /// Laplace smoothing on the MRF co-occurrence counts.
    pub mrf_smoothing: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            buildings: vec!["alpha".into(), "beta".into(), "gamma".into()],
            test_building: "gamma".into(),
            floors_per_building: 20,
            corridor_length_range: (8, 13),
            rooms_per_corridor_range: (3, 5),
            room_size_range: (2, 5),
            // Indexed by the category encoding; corridor/doorway mass is
            // structural and redistributed over the room categories.
            category_priors: vec![0.22, 0.14, 0.08, 0.0, 0.0, 0.08, 0.12, 0.12, 0.14, 0.10],
            noise_levels: default_noise_levels(),
            evidence_sets_per_graph: 3,
            placeholder_fraction: 0.1,
            templates: default_template_set(),
            // Ten-category templates need more mixture capacity than the
            // generator's small-scope default.
            structure_params: StructureParams {
                num_sums_per_subscope: 8,
                ..StructureParams::default()
            },
            train_config: TrainConfig { restarts: 4, ..TrainConfig::default() },
            decomposition_repetitions: 10,
            instantiation: InstantiationConfig::default(),
            bp_config: BpConfig::default(),
            mrf_smoothing: 1.0,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let config: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.buildings.is_empty() {
            return Err(CliError::Config("no buildings configured".into()));
        }
        let mut names = self.buildings.clone();
        names.sort();
        names.dedup();
        if names.len() != self.buildings.len() {
            return Err(CliError::Config("building names must be unique".into()));
        }
        if !self.buildings.contains(&self.test_building) {
            return Err(CliError::Config(format!(
                "test building {:?} is not one of the configured buildings",
                self.test_building
            )));
        }
        if self.buildings.len() < 2 {
            return Err(CliError::Config(
                "need at least two buildings for a train/test split".into(),
            ));
        }
        if self.floors_per_building == 0 {
            return Err(CliError::Config("floors_per_building must be positive".into()));
        }
        for (name, (lo, hi)) in [
            ("corridor_length_range", self.corridor_length_range),
            ("rooms_per_corridor_range", self.rooms_per_corridor_range),
            ("room_size_range", self.room_size_range),
        ] {
            if lo > hi {
                return Err(CliError::Config(format!("{name}: {lo} > {hi}")));
            }
        }
        if self.category_priors.len() != NUM_CATEGORIES {
            return Err(CliError::Config(format!(
                "category_priors has {} entries, expected {NUM_CATEGORIES}",
                self.category_priors.len()
            )));
        }
        if self.noise_levels.is_empty() {
            return Err(CliError::Config("no noise levels configured".into()));
        }
        if self.evidence_sets_per_graph == 0 {
            return Err(CliError::Config("evidence_sets_per_graph must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.placeholder_fraction) {
            return Err(CliError::Config("placeholder_fraction must lie in [0, 1]".into()));
        }
        for t in &self.templates {
            t.check().map_err(|e| CliError::Config(e.to_string()))?;
        }
        if !self.templates.iter().any(|t| t.node_count == 1) {
            return Err(CliError::Config(
                "template set needs a single-node template to guarantee coverage".into(),
            ));
        }
        Ok(())
    }

    /// Names of the training buildings (everything but the test building).
    pub fn train_buildings(&self) -> Vec<String> {
        self.buildings
            .iter()
            .filter(|b| **b != self.test_building)
            .cloned()
            .collect()
    }

    /// Digest of the fields the dataset depends on. The train/test split is
    /// deliberately excluded: all building rotations share one dataset.
    pub fn dataset_digest(&self) -> String {
        digest_of(&serde_json::json!({
            "buildings": self.buildings,
            "floors_per_building": self.floors_per_building,
            "corridor_length_range": self.corridor_length_range,
            "rooms_per_corridor_range": self.rooms_per_corridor_range,
            "room_size_range": self.room_size_range,
            "category_priors": self.category_priors,
            "noise_levels": self.noise_levels,
            "evidence_sets_per_graph": self.evidence_sets_per_graph,
            "placeholder_fraction": self.placeholder_fraction,
        }))
    }

    /// Digest of everything training depends on: the dataset plus the split
    /// and the model hyperparameters.
    pub fn training_digest(&self) -> String {
        digest_of(&serde_json::json!({
            "dataset": self.dataset_digest(),
            "test_building": self.test_building,
            "templates": self.templates,
            "structure_params": self.structure_params,
            "train_config": self.train_config,
            "decomposition_repetitions": self.decomposition_repetitions,
            "mrf_smoothing": self.mrf_smoothing,
        }))
    }

    pub fn noise_level(&self, level: u8) -> Result<&NoiseLevel, CliError> {
        self.noise_levels
            .iter()
            .find(|l| l.level == level)
            .ok_or_else(|| CliError::Config(format!("noise level {level} is not configured")))
    }
}

fn digest_of(value: &serde_json::Value) -> String {
    let canonical = serde_json::to_string(value).expect("digest view serializes");
    let mut hasher = Sha256::new();
    hasher.update(canonical.as_bytes());
    hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Which models a verb operates on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ModelKind {
    GraphSpn,
    Mrf2,
    Mrf3,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::GraphSpn, ModelKind::Mrf2, ModelKind::Mrf3];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::GraphSpn => "graphspn",
            ModelKind::Mrf2 => "mrf2",
            ModelKind::Mrf3 => "mrf3",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "graphspn" => Ok(ModelKind::GraphSpn),
            "mrf2" => Ok(ModelKind::Mrf2),
            "mrf3" => Ok(ModelKind::Mrf3),
            other => Err(format!("unknown model {other:?} (expected graphspn, mrf2, mrf3)")),
        }
    }
}

/// Parses `--levels`: either a comma list (`2,5`) or an inclusive range
/// (`1..6`).
pub fn parse_levels(text: &str) -> Result<Vec<u8>, CliError> {
    let bad = |t: &str| CliError::Config(format!("cannot parse noise levels {t:?}"));
    let mut levels = Vec::new();
    if let Some((lo, hi)) = text.split_once("..") {
        let lo: u8 = lo.trim().parse().map_err(|_| bad(text))?;
        let hi: u8 = hi.trim().parse().map_err(|_| bad(text))?;
        if lo > hi {
            return Err(bad(text));
        }
        levels.extend(lo..=hi);
    } else {
        for part in text.split(',') {
            levels.push(part.trim().parse().map_err(|_| bad(text))?);
        }
    }
    levels.sort_unstable();
    levels.dedup();
    Ok(levels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid_and_matches_the_protocol() {
        let config = ExperimentConfig::default();
        config.validate().unwrap();
        assert_eq!(config.buildings.len(), 3);
        assert_eq!(config.floors_per_building, 20);
        assert_eq!(config.evidence_sets_per_graph, 3);
        assert_eq!(config.decomposition_repetitions, 10);
        assert_eq!(config.instantiation.num_decompositions, 5);
        assert_eq!(config.noise_levels.len(), 6);
        let total: f64 = config.category_priors.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn digests_track_their_inputs() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        assert_eq!(a.dataset_digest(), b.dataset_digest());
        assert_eq!(a.training_digest(), b.training_digest());
        // Rotating the split keeps the dataset digest but not the training
        // digest.
        b.test_building = "alpha".into();
        assert_eq!(a.dataset_digest(), b.dataset_digest());
        assert_ne!(a.training_digest(), b.training_digest());
        b.floors_per_building = 7;
        assert_ne!(a.dataset_digest(), b.dataset_digest());
    }

    #[test]
    fn train_buildings_excludes_the_test_building() {
        let config = ExperimentConfig::default();
        assert_eq!(config.train_buildings(), vec!["alpha".to_string(), "beta".to_string()]);
    }

    #[test]
    fn level_parsing() {
        assert_eq!(parse_levels("1..6").unwrap(), vec![1, 2, 3, 4, 5, 6]);
        assert_eq!(parse_levels("2,5").unwrap(), vec![2, 5]);
        assert_eq!(parse_levels("5,2,2").unwrap(), vec![2, 5]);
        assert!(parse_levels("x").is_err());
        assert!(parse_levels("6..2").is_err());
    }

    #[test]
    fn overlapping_test_building_is_rejected() {
        let mut config = ExperimentConfig::default();
        config.test_building = "delta".into();
        assert!(matches!(config.validate(), Err(CliError::Config(_))));
    }
}
