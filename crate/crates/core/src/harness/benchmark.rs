//! Deterministic, resumable benchmark construction.
//!
//! Every clean image is corrupted by each of the nine benchmark noise specs
//! and every noisy image is run through the full denoiser pool. Outputs are
//! stored as 8-bit PNG and labels are computed from the stored (quantized)
//! pixels, so recomputing a label from disk reproduces it exactly.
//!
//! A rebuild over an existing directory reuses an output when
//! `checksums.csv` records the same input hash for it and the file on disk
//! still hashes to the recorded output hash.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::manifest::{clean_rel_path, denoised_rel_path, noisy_rel_path, Manifest, ManifestMeta, ManifestRow};
use crate::denoise::{denoise, DenoiserId};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::io::{decode, encode, load_image};
use crate::metrics::{psnr, ssim};
use crate::noise::{NoiseKind, NoiseSpec};
use crate::rng::{derive_seed, str_key};

pub const CHECKSUM_FILE: &str = "checksums.csv";
const IMAGE_EXTENSIONS: [&str; 3] = ["png", "pgm", "ppm"];

/// Which noise levels to generate per kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LevelSet {
    #[default]
    Benchmark,
    Holdout,
    Both,
}

impl LevelSet {
    pub fn levels(self, kind: NoiseKind) -> Vec<f64> {
        match self {
            LevelSet::Benchmark => kind.benchmark_levels().to_vec(),
            LevelSet::Holdout => kind.holdout_levels().to_vec(),
            LevelSet::Both => {
                let mut v = kind.benchmark_levels().to_vec();
                v.extend(kind.holdout_levels());
                v.sort_by(f64::total_cmp);
                v
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BenchmarkOptions {
    pub master_seed: u64,
    pub levels: LevelSet,
    /// Restrict the pool to these denoisers; empty means all 17.
    pub denoisers: Vec<DenoiserId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub target: String,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct BuildReport {
    pub manifest: Manifest,
    pub written: usize,
    pub reused: usize,
    pub failures: Vec<Failure>,
}

/// Seed of the noise realization for one (image, kind, level) triple.
pub fn noise_seed(master: u64, clean_id: &str, kind: NoiseKind, level: f64) -> u64 {
    derive_seed(master, &[str_key(clean_id), str_key(kind.name()), level.to_bits()])
}

/// Readable images directly inside `dir`, sorted by file name.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        })
        .collect();
    out.sort();
    Ok(out)
}

fn sha_hex(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq)]
struct Checksum {
    input: String,
    output: String,
}

fn read_checksums(out_dir: &Path) -> HashMap<String, Checksum> {
    let Ok(mut rd) = csv::Reader::from_path(out_dir.join(CHECKSUM_FILE)) else {
        return HashMap::new();
    };
    rd.records()
        .filter_map(|r| r.ok())
        .filter(|r| r.len() == 3)
        .map(|r| {
            (
                r[0].to_string(),
                Checksum {
                    input: r[1].to_string(),
                    output: r[2].to_string(),
                },
            )
        })
        .collect()
}

fn write_checksums(out_dir: &Path, entries: &[(String, Checksum)]) -> Result<()> {
    let path = out_dir.join(CHECKSUM_FILE);
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["path", "input_sha256", "output_sha256"])?;
    for (p, c) in entries {
        w.write_record([p, &c.input, &c.output])?;
    }
    w.flush().map_err(|e| Error::io(&path, e))
}

struct Store<'a> {
    root: &'a Path,
    previous: &'a HashMap<String, Checksum>,
}

enum Stored {
    Written,
    Reused,
}

impl Store<'_> {
    /// Returns the stored image for `rel`, producing it with `make` unless a
    /// verified copy keyed by `input` already exists.
    fn fetch(
        &self,
        rel: &str,
        input: &str,
        make: impl FnOnce() -> Result<Image>,
    ) -> Result<(Image, Vec<u8>, Checksum, Stored)> {
        let path = self.root.join(rel);
        if let Some(prev) = self.previous.get(rel).filter(|c| c.input == input) {
            if let Ok(bytes) = fs::read(&path) {
                if sha_hex(&[&bytes]) == prev.output {
                    let img = decode(&bytes)?;
                    return Ok((img, bytes, prev.clone(), Stored::Reused));
                }
            }
        }
        let img = make()?;
        let bytes = encode(&img, &path)?;
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        fs::write(&path, &bytes).map_err(|e| Error::io(&path, e))?;
        // the stored pixels are what every later stage sees
        let img = decode(&bytes)?;
        let sum = Checksum {
            input: input.to_string(),
            output: sha_hex(&[&bytes]),
        };
        Ok((img, bytes, sum, Stored::Written))
    }
}

struct JobOutput {
    rows: Vec<ManifestRow>,
    sums: Vec<(String, Checksum)>,
    written: usize,
    reused: usize,
    failures: Vec<Failure>,
}

fn run_job(
    store: &Store<'_>,
    clean_id: &str,
    clean: &Image,
    clean_bytes: &[u8],
    noise: NoiseSpec,
    pool: &[DenoiserId],
) -> JobOutput {
    let mut out = JobOutput {
        rows: Vec::new(),
        sums: Vec::new(),
        written: 0,
        reused: 0,
        failures: Vec::new(),
    };
    let tally = |s: Stored, out: &mut JobOutput| match s {
        Stored::Written => out.written += 1,
        Stored::Reused => out.reused += 1,
    };
    let noisy_rel = noisy_rel_path(clean_id, &noise);
    let noisy_input = sha_hex(&[clean_bytes, noise.to_string().as_bytes()]);
    let (noisy, noisy_bytes) = match store.fetch(&noisy_rel, &noisy_input, || Ok(noise.apply(clean)?.quantized())) {
        Ok((img, bytes, sum, s)) => {
            tally(s, &mut out);
            out.sums.push((noisy_rel.clone(), sum));
            (img, bytes)
        }
        Err(e) => {
            log::error!("{noisy_rel}: {e}");
            out.failures.push(Failure {
                target: noisy_rel,
                reason: e.to_string(),
            });
            return out;
        }
    };
    for id in pool {
        let rel = denoised_rel_path(clean_id, &noise, id);
        let input = sha_hex(&[&noisy_bytes, id.to_string().as_bytes()]);
        let result = store
            .fetch(&rel, &input, || Ok(denoise(&noisy, id)?.quantized()))
            .and_then(|(img, _, sum, s)| Ok((psnr(clean, &img)?, ssim(clean, &img)?, sum, s)));
        match result {
            Ok((p, q, sum, s)) => {
                tally(s, &mut out);
                out.sums.push((rel.clone(), sum));
                out.rows.push(ManifestRow {
                    clean_id: clean_id.to_string(),
                    noise,
                    noisy_path: noisy_rel.clone(),
                    denoiser: *id,
                    denoised_path: rel,
                    psnr: p,
                    ssim: q,
                });
            }
            Err(e) => {
                log::error!("{rel}: {e}");
                out.failures.push(Failure {
                    target: rel,
                    reason: e.to_string(),
                });
            }
        }
    }
    out
}

/// Builds (or resumes) the benchmark for every image in `clean_dir`.
pub fn build_benchmark(clean_dir: &Path, out_dir: &Path, opts: &BenchmarkOptions) -> Result<BuildReport> {
    let sources = list_images(clean_dir)?;
    if sources.is_empty() {
        return Err(Error::Dataset(format!("no images in {}", clean_dir.display())));
    }
    let mut seen = std::collections::HashSet::new();
    for s in &sources {
        let stem = s.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
        if !seen.insert(stem.to_string()) {
            return Err(Error::Dataset(format!("two clean images share the id {stem:?}")));
        }
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let previous = read_checksums(out_dir);
    let store = Store {
        root: out_dir,
        previous: &previous,
    };
    let pool = if opts.denoisers.is_empty() {
        DenoiserId::pool()
    } else {
        opts.denoisers.clone()
    };
    for id in &pool {
        id.validate()?;
    }

    let mut failures = Vec::new();
    let mut cleans = Vec::new();
    let mut sums = Vec::new();
    let (mut written, mut reused) = (0, 0);
    for src in &sources {
        let id = src.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        let rel = clean_rel_path(&id);
        let loaded = fs::read(src)
            .map_err(|e| Error::io(src, e))
            .and_then(|raw| {
                let input = sha_hex(&[&raw]);
                store.fetch(&rel, &input, || Ok(load_image::<f64>(src)?.quantized()))
            });
        match loaded {
            Ok((img, bytes, sum, s)) => {
                match s {
                    Stored::Written => written += 1,
                    Stored::Reused => reused += 1,
                }
                sums.push((rel, sum));
                cleans.push((id, img, bytes));
            }
            Err(e) => {
                log::error!("{}: {e}", src.display());
                failures.push(Failure {
                    target: src.display().to_string(),
                    reason: e.to_string(),
                });
            }
        }
    }
    if cleans.is_empty() {
        return Err(Error::Dataset("no clean image could be read".into()));
    }

    let jobs: Vec<(usize, NoiseSpec)> = cleans
        .iter()
        .enumerate()
        .flat_map(|(i, (id, _, _))| {
            NoiseKind::ALL.into_iter().flat_map(move |kind| {
                opts.levels.levels(kind).into_iter().map(move |level| {
                    let spec = NoiseSpec::new(kind, level, noise_seed(opts.master_seed, id, kind, level))
                        .expect("built-in levels are valid");
                    (i, spec)
                })
            })
        })
        .collect();
    let outputs: Vec<JobOutput> = jobs
        .par_iter()
        .map(|&(i, spec)| {
            let (id, img, bytes) = &cleans[i];
            run_job(&store, id, img, bytes, spec, &pool)
        })
        .collect();

    let mut rows = Vec::new();
    for o in outputs {
        rows.extend(o.rows);
        sums.extend(o.sums);
        written += o.written;
        reused += o.reused;
        failures.extend(o.failures);
    }
    let manifest = Manifest {
        root: out_dir.to_path_buf(),
        meta: ManifestMeta {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            master_seed: opts.master_seed,
            clean_images: cleans.len(),
            rows: rows.len(),
        },
        rows,
    };
    manifest.write()?;
    write_checksums(out_dir, &sums)?;
    log::info!(
        "benchmark: {} rows ({written} written, {reused} reused, {} failed)",
        manifest.rows.len(),
        failures.len()
    );
    Ok(BuildReport {
        manifest,
        written,
        reused,
        failures,
    })
}
