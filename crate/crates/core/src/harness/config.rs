//! The TOML run configuration shared by the command-line drivers.
//!
//! ```toml
//! seed = 7
//!
//! [forest]
//! n_trees = 100
//! max_depth = 12
//! min_leaf = 5
//! features_per_split = 7
//!
//! [split]
//! train_fraction = 0.05
//! repetitions = 10
//!
//! [tune]
//! max_iters = 20
//! grid_points = 80
//! calibrate = true
//! ```
//!
//! Every key is optional. `seed` feeds the forest and split seeds when
//! those sections are absent.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::split::SplitSpec;
use crate::error::{Error, Result};
use crate::forest::ForestConfig;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuneSection {
    /// Ascent step; the per-target default applies when absent.
    pub step: Option<f64>,
    /// Finite-difference half step; width / 80 when absent.
    pub dtheta: Option<f64>,
    pub max_iters: Option<usize>,
    /// Brute-force oracle resolution.
    pub grid_points: Option<usize>,
    /// θ values sampled per training image for a dedicated model.
    pub train_thetas: Option<usize>,
    /// Held-out images tuned per evaluation.
    pub max_test: Option<usize>,
    /// Pick the tuning-study step from a ladder on held-out training images;
    /// on by default unless `step` is set.
    pub calibrate: Option<bool>,
    pub calibration_images: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub forest: Option<ForestConfig>,
    pub split: Option<SplitSpec>,
    pub tune: TuneSection,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Forest settings; the global seed applies when the section is absent.
    pub fn forest_config(&self, seed: u64) -> ForestConfig {
        match &self.forest {
            Some(f) => f.clone(),
            None => ForestConfig { seed, ..Default::default() },
        }
    }

    pub fn split_spec(&self, seed: u64) -> SplitSpec {
        match &self.split {
            Some(s) => s.clone(),
            None => SplitSpec { seed, ..Default::default() },
        }
    }
}
