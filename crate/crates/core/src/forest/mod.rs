//! Random-forest regression from the feature vector to a quality label.
//!
//! Bootstrap-resampled CART trees, each split choosing among a random subset
//! of the allowed features. Training is deterministic for a fixed seed:
//! every tree draws from its own stream derived from the master seed, and
//! trees are collected in index order regardless of scheduling.

mod tree;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use tree::{Node, Tree};
use tree::{Builder, TreeParams};

use crate::error::{Error, Result};
use crate::features::{extract_features, FeatureVector, FEATURE_COUNT, FEATURE_NAMES};
use crate::image::Image;
use crate::metrics::rank_by_score;
use crate::rng::{derive_seed, stream};
use crate::scalar::Scalar;

pub const MODEL_FORMAT: &str = "dnqa-forest";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Psnr,
    Ssim,
}

impl Target {
    pub fn name(self) -> &'static str {
        match self {
            Target::Psnr => "psnr",
            Target::Ssim => "ssim",
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "psnr" => Ok(Target::Psnr),
            "ssim" => Ok(Target::Ssim),
            _ => Err(Error::invalid(format!("unknown target {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub features_per_split: usize,
    pub seed: u64,
    /// Columns the trees may split on; the rest are ignored. Used for the
    /// single-family and leave-one-family-out studies.
    pub feature_subset: Vec<usize>,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: 12,
            min_leaf: 5,
            features_per_split: FEATURE_COUNT.div_ceil(3),
            seed: 0,
            feature_subset: (0..FEATURE_COUNT).collect(),
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 || self.max_depth == 0 || self.min_leaf == 0 || self.features_per_split == 0 {
            return Err(Error::invalid("forest sizes must be positive"));
        }
        if self.features_per_split > FEATURE_COUNT {
            return Err(Error::invalid("features_per_split exceeds the feature count"));
        }
        if self.feature_subset.is_empty() || self.feature_subset.iter().any(|&f| f >= FEATURE_COUNT) {
            return Err(Error::invalid("feature_subset must name valid columns"));
        }
        Ok(())
    }

    pub fn with_subset(mut self, subset: Vec<usize>) -> Self {
        self.feature_subset = subset;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SampleKeys {
    pub clean_id: String,
    pub noise: String,
    pub denoiser: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub features: FeatureVector,
    pub label: f64,
    pub keys: SampleKeys,
}

impl LabeledSample {
    pub fn new(features: FeatureVector, label: f64) -> Self {
        Self {
            features,
            label,
            keys: SampleKeys::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityModel {
    pub format: String,
    pub version: u32,
    pub target: Target,
    pub config: ForestConfig,
    pub feature_order: Vec<String>,
    pub label_range: (f64, f64),
    pub training_samples: usize,
    pub oob_rmse: Option<f64>,
    pub trees: Vec<Tree>,
}

pub fn train(samples: &[LabeledSample], target: Target, cfg: &ForestConfig) -> Result<QualityModel> {
    let x: Vec<[f64; FEATURE_COUNT]> = samples.iter().map(|s| s.features.0).collect();
    let y: Vec<f64> = samples.iter().map(|s| s.label).collect();
    train_xy(&x, &y, target, cfg)
}

pub fn train_xy(x: &[[f64; FEATURE_COUNT]], y: &[f64], target: Target, cfg: &ForestConfig) -> Result<QualityModel> {
    cfg.validate()?;
    if x.is_empty() || x.len() != y.len() {
        return Err(Error::Dataset(format!("{} feature rows for {} labels", x.len(), y.len())));
    }
    if y.iter().any(|v| !v.is_finite()) || x.iter().any(|r| r.iter().any(|v| !v.is_finite())) {
        return Err(Error::Dataset("non-finite training value".into()));
    }
    let n = x.len();
    let lo = y.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        log::warn!("training on constant labels ({lo}); the model is a constant");
    }
    let params = TreeParams {
        max_depth: cfg.max_depth,
        min_leaf: cfg.min_leaf,
        features_per_split: cfg.features_per_split,
        candidates: &cfg.feature_subset,
    };
    let grown: Vec<(Tree, Vec<bool>)> = (0..cfg.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream(derive_seed(cfg.seed, &[t as u64]));
            let mut rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let mut in_bag = vec![false; n];
            for &r in &rows {
                in_bag[r] = true;
            }
            let tree = Builder::new(x, y, &params, &mut rng).build(&mut rows);
            (tree, in_bag)
        })
        .collect();

    let mut oob_sum = vec![0.0; n];
    let mut oob_count = vec![0u32; n];
    for (tree, in_bag) in &grown {
        for i in 0..n {
            if !in_bag[i] {
                oob_sum[i] += tree.predict(&x[i]);
                oob_count[i] += 1;
            }
        }
    }
    let (mut sse, mut m) = (0.0, 0usize);
    for i in 0..n {
        if oob_count[i] > 0 {
            sse += (oob_sum[i] / oob_count[i] as f64 - y[i]).powi(2);
            m += 1;
        }
    }
    let oob_rmse = (m > 0).then(|| (sse / m as f64).sqrt());

    Ok(QualityModel {
        format: MODEL_FORMAT.to_string(),
        version: MODEL_VERSION,
        target,
        config: cfg.clone(),
        feature_order: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        label_range: (lo, hi),
        training_samples: n,
        oob_rmse,
        trees: grown.into_iter().map(|(t, _)| t).collect(),
    })
}

impl QualityModel {
    pub fn predict(&self, f: &FeatureVector) -> f64 {
        self.predict_slice(&f.0)
    }

    fn predict_slice(&self, x: &[f64; FEATURE_COUNT]) -> f64 {
        let s: f64 = self.trees.iter().map(|t| t.predict(x)).sum();
        // the mean of in-range leaves is in range up to the last ulp
        (s / self.trees.len() as f64).clamp(self.label_range.0, self.label_range.1)
    }

    /// Predicts from a raw slice, checking its length.
    pub fn predict_values(&self, v: &[f64]) -> Result<f64> {
        Ok(self.predict(&FeatureVector::from_slice(v)?))
    }

    /// Total split gain per feature, normalized to sum to 1 (all zeros for a
    /// model without splits).
    pub fn feature_importance(&self) -> [f64; FEATURE_COUNT] {
        let mut imp = [0.0; FEATURE_COUNT];
        for n in self.trees.iter().flat_map(|t| &t.nodes) {
            if !n.is_leaf() {
                imp[n.feature as usize] += n.gain;
            }
        }
        let total: f64 = imp.iter().sum();
        if total > 0.0 {
            imp.iter_mut().for_each(|v| *v /= total);
        }
        imp
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Header {
            format: String,
            version: u32,
        }
        let header: Header =
            serde_json::from_str(text).map_err(|e| Error::Model(format!("unreadable header: {e}")))?;
        if header.format != MODEL_FORMAT {
            return Err(Error::Model(format!("not a {MODEL_FORMAT} file (format {:?})", header.format)));
        }
        if header.version != MODEL_VERSION {
            return Err(Error::Model(format!(
                "version {} is not supported (expected {MODEL_VERSION})",
                header.version
            )));
        }
        let model: QualityModel = serde_json::from_str(text).map_err(|e| Error::Model(e.to_string()))?;
        model.check()?;
        Ok(model)
    }

    fn check(&self) -> Result<()> {
        if self.trees.is_empty() {
            return Err(Error::Model("model has no trees".into()));
        }
        if self.feature_order.len() != FEATURE_COUNT
            || self.feature_order.iter().zip(FEATURE_NAMES).any(|(a, b)| a != b)
        {
            return Err(Error::Model("feature order does not match this build".into()));
        }
        let (lo, hi) = self.label_range;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::Model("invalid label range".into()));
        }
        for t in &self.trees {
            if t.nodes.is_empty() {
                return Err(Error::Model("empty tree".into()));
            }
            for (i, n) in t.nodes.iter().enumerate() {
                // Preorder layout: children follow their parent, so traversal terminates.
                let bad_link = |c: u32| c as usize <= i || c as usize >= t.nodes.len();
                let bad_split = !n.is_leaf()
                    && (n.feature as usize >= FEATURE_COUNT || !n.threshold.is_finite() || bad_link(n.left) || bad_link(n.right));
                if bad_split || !n.value.is_finite() {
                    return Err(Error::Model(format!("corrupt tree node {i}")));
                }
            }
        }
        Ok(())
    }
}

pub fn save_model(model: &QualityModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = model.to_json()?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<QualityModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    QualityModel::from_json(&text)
}

/// One candidate result for ranking.
#[derive(Debug, Clone, Copy)]
pub struct Candidate<'a, T> {
    pub id: &'a str,
    pub noisy: &'a Image<T>,
    pub denoised: &'a Image<T>,
}

/// Ranks candidate results of one noisy image, best predicted quality first
/// (ties by id). Returns `(id, predicted quality)` pairs.
pub fn rank_results<T: Scalar>(model: &QualityModel, pairs: &[Candidate<'_, T>]) -> Result<Vec<(String, f64)>> {
    let Some(first) = pairs.first() else {
        return Err(Error::invalid("nothing to rank"));
    };
    if pairs.iter().any(|p| p.noisy != first.noisy) {
        return Err(Error::invalid("ranked results must share the same noisy image"));
    }
    let scored = pairs
        .par_iter()
        .map(|p| Ok((p.id.to_string(), model.predict(&extract_features(p.noisy, p.denoised)?))))
        .collect::<Result<Vec<_>>>()?;
    let order = rank_by_score(&scored);
    Ok(order
        .into_iter()
        .map(|id| {
            let q = scored.iter().find(|(i, _)| *i == id).map(|(_, q)| *q).unwrap_or(f64::NAN);
            (id, q)
        })
        .collect())
}
