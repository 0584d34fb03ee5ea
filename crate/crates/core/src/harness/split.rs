//! Train/test partitions by clean image.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub repetitions: usize,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.05,
            repetitions: 10,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::invalid(format!("train fraction {} outside (0, 1)", self.train_fraction)));
        }
        if self.repetitions == 0 {
            return Err(Error::invalid("at least one repetition is required"));
        }
        Ok(())
    }

    /// Number of training images out of `n`: the rounded fraction, but at
    /// least one image on each side.
    pub fn train_count(&self, n: usize) -> usize {
        ((self.train_fraction * n as f64).round() as usize).clamp(1, n.saturating_sub(1).max(1))
    }

    /// Partitions `ids` for repetition `rep` into (train, test), each sorted.
    pub fn partition(&self, ids: &[String], rep: usize) -> Result<(Vec<String>, Vec<String>)> {
        self.validate()?;
        if ids.len() < 2 {
            return Err(Error::Dataset("a split needs at least two clean images".into()));
        }
        let mut shuffled = ids.to_vec();
        shuffled.sort();
        shuffled.dedup();
        if shuffled.len() < 2 {
            return Err(Error::Dataset("a split needs at least two distinct clean images".into()));
        }
        shuffled.shuffle(&mut stream(derive_seed(self.seed, &[rep as u64])));
        let k = self.train_count(shuffled.len());
        let mut test = shuffled.split_off(k);
        shuffled.sort();
        test.sort();
        Ok((shuffled, test))
    }
}
