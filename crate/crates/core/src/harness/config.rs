use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::HarnessError;
use crate::agent::TrainConfig;

/// Synthetic dataset parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub n_maps_seen: usize,
    pub n_maps_unseen: usize,
    /// Side length of the square grid, in nodes.
    pub grid_seen: usize,
    pub grid_unseen: usize,
    /// Size of the landmark vocabulary; seen maps draw from the first
    /// `n_landmarks_seen` only.
    pub n_landmarks: usize,
    pub n_landmarks_seen: usize,
    pub episodes_per_map: usize,
    pub min_hop: usize,
    pub max_hop: usize,
    pub spacing_m: f64,
    pub edge_drop_prob: f64,
    pub diagonal_prob: f64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            n_maps_seen: 40,
            n_maps_unseen: 10,
            grid_seen: 4,
            grid_unseen: 5,
            n_landmarks: 16,
            n_landmarks_seen: 12,
            episodes_per_map: 8,
            min_hop: 2,
            max_hop: 5,
            spacing_m: 2.0,
            edge_drop_prob: 0.15,
            diagonal_prob: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AblationConfig {
    pub seeds: Vec<u64>,
    /// Overrides `train.steps` for ablation runs when set.
    pub steps: Option<usize>,
}

impl Default for AblationConfig {
    fn default() -> Self {
        Self {
            seeds: vec![0, 1, 2, 3, 4],
            steps: None,
        }
    }
}

/// Full contents of a run configuration file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    /// Dataset directory; relative paths resolve against the config file.
    pub data_dir: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub data: DataConfig,
    pub train: TrainConfig,
    pub ablation: AblationConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.data_dir, &mut cfg.out_dir].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.train.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        let d = &self.data;
        let bad = |m: &str| Err(HarnessError::Config(m.to_string()));
        if d.grid_seen < 2 || d.grid_unseen < 2 {
            return bad("grids need at least 2 nodes per side");
        }
        if d.n_landmarks_seen == 0 || d.n_landmarks_seen > d.n_landmarks || d.n_landmarks > LANDMARK_NAMES.len() {
            return bad("need 0 < n_landmarks_seen <= n_landmarks <= 16");
        }
        if d.min_hop == 0 || d.min_hop > d.max_hop {
            return bad("need 0 < min_hop <= max_hop");
        }
        if !(d.spacing_m > 0.0) || !(0.0..1.0).contains(&d.edge_drop_prob) || !(0.0..=1.0).contains(&d.diagonal_prob) {
            return bad("spacing must be positive and probabilities in [0, 1)");
        }
        if self.ablation.seeds.is_empty() {
            return bad("ablation needs at least one seed");
        }
        Ok(())
    }

    /// Every field, defaults included, as TOML.
    pub fn resolved_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// Hex SHA-256 of [`resolved_toml`](Self::resolved_toml).
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.resolved_toml().as_bytes()))
    }

    /// Writes `resolved_config.toml` into `dir` and returns the hash.
    pub fn persist(&self, dir: &Path) -> Result<String, HarnessError> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("resolved_config.toml"), self.resolved_toml())?;
        Ok(self.hash())
    }
}

pub const LANDMARK_NAMES: [&str; 16] = [
    "sofa",
    "table",
    "lamp",
    "door",
    "stairs",
    "bed",
    "sink",
    "fridge",
    "desk",
    "plant",
    "window",
    "piano",
    "mirror",
    "fireplace",
    "bathtub",
    "bookshelf",
];
