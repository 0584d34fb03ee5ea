//! Feature extraction over a benchmark and the feature CSV format.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;

use super::benchmark::Failure;
use super::manifest::Manifest;
use crate::denoise::DenoiserId;
use crate::error::{Error, Result};
use crate::features::{extract_features, FeatureVector, FEATURE_COUNT, FEATURE_NAMES};
use crate::forest::{LabeledSample, SampleKeys, Target};
use crate::image::Image;
use crate::io::load_image;
use crate::noise::NoiseSpec;

const KEY_COLUMNS: [&str; 6] = ["clean_id", "noise_kind", "noise_level", "noise_seed", "method", "param"];
const LABEL_COLUMNS: [&str; 2] = ["psnr", "ssim"];

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRow {
    pub clean_id: String,
    pub noise: NoiseSpec,
    pub denoiser: DenoiserId,
    pub features: FeatureVector,
    pub psnr: f64,
    pub ssim: f64,
}

impl DatasetRow {
    pub fn label(&self, target: Target) -> f64 {
        match target {
            Target::Psnr => self.psnr,
            Target::Ssim => self.ssim,
        }
    }

    pub fn noisy_key(&self) -> String {
        format!("{}/{}", self.clean_id, self.noise)
    }

    pub fn sample(&self, target: Target) -> LabeledSample {
        LabeledSample {
            features: self.features.clone(),
            label: self.label(target),
            keys: SampleKeys {
                clean_id: self.clean_id.clone(),
                noise: self.noise.to_string(),
                denoiser: self.denoiser.to_string(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub rows: Vec<DatasetRow>,
    pub failures: Vec<Failure>,
}

impl Dataset {
    pub fn samples(&self, target: Target) -> Vec<LabeledSample> {
        self.rows.iter().map(|r| r.sample(target)).collect()
    }

    /// Row indices grouped by noisy image, groups in first-seen order.
    pub fn groups(&self) -> Vec<Vec<usize>> {
        let mut order: Vec<String> = Vec::new();
        let mut map: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, r) in self.rows.iter().enumerate() {
            let k = r.noisy_key();
            let e = map.entry(k.clone()).or_default();
            if e.is_empty() {
                order.push(k);
            }
            e.push(i);
        }
        order.into_iter().map(|k| map.remove(&k).unwrap_or_default()).collect()
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path)?;
        let header: Vec<&str> = KEY_COLUMNS
            .iter()
            .chain(FEATURE_NAMES.iter())
            .chain(LABEL_COLUMNS.iter())
            .copied()
            .collect();
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![
                r.clean_id.clone(),
                r.noise.kind.name().to_string(),
                r.noise.level.to_string(),
                r.noise.seed.to_string(),
                r.denoiser.method.name().to_string(),
                r.denoiser.param_string(),
            ];
            rec.extend(r.features.0.iter().map(|v| v.to_string()));
            rec.push(r.psnr.to_string());
            rec.push(r.ssim.to_string());
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut rd = csv::Reader::from_path(path)?;
        let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
        let expected: Vec<&str> = KEY_COLUMNS
            .iter()
            .chain(FEATURE_NAMES.iter())
            .chain(LABEL_COLUMNS.iter())
            .copied()
            .collect();
        if header != expected {
            return Err(Error::Dataset(format!("{} is not a feature CSV", path.display())));
        }
        let mut rows = Vec::new();
        for (line, rec) in rd.records().enumerate() {
            let rec = rec?;
            let num = |i: usize| {
                rec[i]
                    .parse::<f64>()
                    .map_err(|_| Error::Dataset(format!("{} row {}: bad number {:?}", path.display(), line + 1, &rec[i])))
            };
            let mut f = [0.0; FEATURE_COUNT];
            for (j, v) in f.iter_mut().enumerate() {
                *v = num(KEY_COLUMNS.len() + j)?;
            }
            let base = KEY_COLUMNS.len() + FEATURE_COUNT;
            rows.push(DatasetRow {
                clean_id: rec[0].to_string(),
                noise: NoiseSpec::new(
                    rec[1].parse()?,
                    num(2)?,
                    rec[3]
                        .parse()
                        .map_err(|_| Error::Dataset(format!("bad seed {:?}", &rec[3])))?,
                )?,
                denoiser: DenoiserId::parse_parts(&rec[4], &rec[5])?,
                features: FeatureVector(f),
                psnr: num(base)?,
                ssim: num(base + 1)?,
            });
        }
        Ok(Self {
            rows,
            failures: Vec::new(),
        })
    }
}

/// Computes the feature vector of every manifest row. Rows whose files are
/// missing or unreadable are skipped and reported.
pub fn extract_dataset(manifest: &Manifest) -> Result<Dataset> {
    let mut groups: Vec<(String, Vec<usize>)> = Vec::new();
    for (i, r) in manifest.rows.iter().enumerate() {
        match groups.last_mut() {
            Some((p, v)) if *p == r.noisy_path => v.push(i),
            _ => groups.push((r.noisy_path.clone(), vec![i])),
        }
    }
    let per_group: Vec<Vec<std::result::Result<DatasetRow, Failure>>> = groups
        .par_iter()
        .map(|(noisy_rel, idx)| {
            let noisy: Image = match load_image(manifest.resolve(noisy_rel)) {
                Ok(n) => n,
                Err(e) => {
                    log::error!("{noisy_rel}: {e}");
                    return idx
                        .iter()
                        .map(|&i| {
                            Err(Failure {
                                target: manifest.rows[i].denoised_path.clone(),
                                reason: format!("noisy image: {e}"),
                            })
                        })
                        .collect();
                }
            };
            idx.par_iter()
                .map(|&i| {
                    let r = &manifest.rows[i];
                    load_image(manifest.resolve(&r.denoised_path))
                        .and_then(|d: Image| extract_features(&noisy, &d))
                        .map(|features| DatasetRow {
                            clean_id: r.clean_id.clone(),
                            noise: r.noise,
                            denoiser: r.denoiser,
                            features,
                            psnr: r.psnr,
                            ssim: r.ssim,
                        })
                        .map_err(|e| {
                            log::error!("{}: {e}", r.denoised_path);
                            Failure {
                                target: r.denoised_path.clone(),
                                reason: e.to_string(),
                            }
                        })
                })
                .collect()
        })
        .collect();
    let mut out = Dataset::default();
    for r in per_group.into_iter().flatten() {
        match r {
            Ok(row) => out.rows.push(row),
            Err(f) => out.failures.push(f),
        }
    }
    Ok(out)
}
