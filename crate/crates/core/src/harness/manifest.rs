//! The benchmark manifest: one CSV row per denoised image.
//!
//! Paths are stored relative to the manifest's directory so a benchmark can
//! be moved or compared byte-for-byte against a rebuild elsewhere.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::denoise::DenoiserId;
use crate::error::{Error, Result};
use crate::noise::NoiseSpec;

pub const MANIFEST_FILE: &str = "manifest.csv";
pub const META_FILE: &str = "manifest.toml";
pub const MANIFEST_COLUMNS: [&str; 10] = [
    "clean_id",
    "noise_kind",
    "noise_level",
    "noise_seed",
    "noisy_path",
    "method",
    "param",
    "denoised_path",
    "psnr",
    "ssim",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRow {
    pub clean_id: String,
    pub noise: NoiseSpec,
    pub noisy_path: String,
    pub denoiser: DenoiserId,
    pub denoised_path: String,
    pub psnr: f64,
    pub ssim: f64,
}

impl ManifestRow {
    /// Identifies the noisy image this row was produced from.
    pub fn noisy_key(&self) -> String {
        format!("{}/{}", self.clean_id, self.noise)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestMeta {
    pub tool_version: String,
    pub master_seed: u64,
    pub clean_images: usize,
    pub rows: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    /// Directory the relative paths resolve against.
    pub root: PathBuf,
    pub meta: ManifestMeta,
    pub rows: Vec<ManifestRow>,
}

impl Manifest {
    pub fn resolve(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    /// Path of the stored clean image for `clean_id`.
    pub fn clean_path(&self, clean_id: &str) -> PathBuf {
        self.root.join(clean_rel_path(clean_id))
    }

    /// Distinct clean ids, in manifest order.
    pub fn clean_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = Vec::new();
        for r in &self.rows {
            if ids.last() != Some(&r.clean_id) && !ids.contains(&r.clean_id) {
                ids.push(r.clean_id.clone());
            }
        }
        ids
    }

    /// One representative row per noisy image, in manifest order.
    pub fn noisy_images(&self) -> Vec<&ManifestRow> {
        let mut seen = std::collections::HashSet::new();
        self.rows.iter().filter(|r| seen.insert(r.noisy_key())).collect()
    }

    pub fn write(&self) -> Result<()> {
        fs::create_dir_all(&self.root).map_err(|e| Error::io(&self.root, e))?;
        let path = self.root.join(MANIFEST_FILE);
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(MANIFEST_COLUMNS)?;
        for r in &self.rows {
            w.write_record([
                r.clean_id.clone(),
                r.noise.kind.name().to_string(),
                r.noise.level.to_string(),
                r.noise.seed.to_string(),
                r.noisy_path.clone(),
                r.denoiser.method.name().to_string(),
                r.denoiser.param_string(),
                r.denoised_path.clone(),
                r.psnr.to_string(),
                r.ssim.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        let meta = toml::to_string(&self.meta).map_err(|e| Error::Config(e.to_string()))?;
        let meta_path = self.root.join(META_FILE);
        fs::write(&meta_path, meta).map_err(|e| Error::io(&meta_path, e))
    }

    /// Reads `manifest.csv` (and its metadata when present) from a
    /// benchmark directory or from the CSV path itself.
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let (root, csv_path) = if path.is_dir() {
            (path.to_path_buf(), path.join(MANIFEST_FILE))
        } else {
            (path.parent().unwrap_or(Path::new(".")).to_path_buf(), path.to_path_buf())
        };
        let mut rd = csv::Reader::from_path(&csv_path)?;
        let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
        if header != MANIFEST_COLUMNS {
            return Err(Error::Dataset(format!("{} has an unexpected header", csv_path.display())));
        }
        let mut rows = Vec::new();
        for (line, rec) in rd.records().enumerate() {
            let rec = rec?;
            let bad = |what: &str| Error::Dataset(format!("{} row {}: bad {what}", csv_path.display(), line + 1));
            let num = |i: usize, what: &str| rec[i].parse::<f64>().map_err(|_| bad(what));
            let noise = NoiseSpec::new(
                rec[1].parse()?,
                num(2, "noise_level")?,
                rec[3].parse().map_err(|_| bad("noise_seed"))?,
            )?;
            rows.push(ManifestRow {
                clean_id: rec[0].to_string(),
                noise,
                noisy_path: rec[4].to_string(),
                denoiser: DenoiserId::parse_parts(&rec[5], &rec[6])?,
                denoised_path: rec[7].to_string(),
                psnr: num(8, "psnr")?,
                ssim: num(9, "ssim")?,
            });
        }
        let meta_path = root.join(META_FILE);
        let meta = match fs::read_to_string(&meta_path) {
            Ok(text) => toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", meta_path.display())))?,
            Err(_) => ManifestMeta {
                tool_version: String::new(),
                master_seed: 0,
                clean_images: 0,
                rows: rows.len(),
            },
        };
        Ok(Self { root, meta, rows })
    }
}

pub(crate) fn clean_rel_path(clean_id: &str) -> String {
    format!("clean/{clean_id}.png")
}

pub(crate) fn noisy_rel_path(clean_id: &str, noise: &NoiseSpec) -> String {
    format!("noisy/{clean_id}__{}_{}.png", noise.kind, noise.level)
}

pub(crate) fn denoised_rel_path(clean_id: &str, noise: &NoiseSpec, id: &DenoiserId) -> String {
    format!(
        "denoised/{clean_id}__{}_{}/{}_{}.png",
        noise.kind,
        noise.level,
        id.method,
        id.param_string().replace('=', "-")
    )
}
