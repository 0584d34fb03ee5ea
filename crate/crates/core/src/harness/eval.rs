//! Ranking and tuning studies over a benchmark.

use std::collections::HashMap;
use std::fmt::{self, Write as _};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::dataset::{Dataset, DatasetRow};
use super::manifest::{Manifest, ManifestRow};
use super::split::SplitSpec;
use crate::denoise::{denoise, DenoiserId, Method};
use crate::error::{Error, Result};
use crate::features::{extract_features, Family, FEATURE_COUNT};
use crate::forest::{train, ForestConfig, LabeledSample, QualityModel, SampleKeys, Target};
use crate::image::Image;
use crate::io::load_image;
use crate::metrics::{kendall_tau, rank_by_score, rmse_rse, RankingPair};
use crate::noise::NoiseSpec;
use crate::rng::{derive_seed, stream};
use crate::tuner::{
    brute_force_optimum, denoise_at, gradient_ascent, quality_of, theta_grid, true_quality, tune, TuneConfig,
};

/// Which feature columns a model may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    All,
    Only(Family),
    Without(Family),
}

impl Variant {
    /// All features, then each family alone, then each family left out.
    pub fn standard() -> Vec<Variant> {
        let mut v = vec![Variant::All];
        v.extend(Family::ALL.map(Variant::Only));
        v.extend(Family::ALL.map(Variant::Without));
        v
    }

    pub fn columns(self) -> Vec<usize> {
        match self {
            Variant::All => (0..FEATURE_COUNT).collect(),
            Variant::Only(f) => f.columns().collect(),
            Variant::Without(f) => (0..FEATURE_COUNT).filter(|c| !f.columns().contains(c)).collect(),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variant::All => f.write_str("all"),
            Variant::Only(fam) => write!(f, "only_{}", fam.name()),
            Variant::Without(fam) => write!(f, "without_{}", fam.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepetitionResult {
    pub rep: usize,
    /// Mean Kendall τ over the test noisy images.
    pub tau: f64,
    pub rmse: f64,
    pub rse: f64,
    pub test_images: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariantSummary {
    pub variant: Variant,
    pub reps: Vec<RepetitionResult>,
}

fn mean_std(v: impl Iterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = v.collect();
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (m, 0.0);
    }
    (m, (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
}

impl VariantSummary {
    pub fn tau(&self) -> (f64, f64) {
        mean_std(self.reps.iter().map(|r| r.tau))
    }

    pub fn rmse(&self) -> (f64, f64) {
        mean_std(self.reps.iter().map(|r| r.rmse))
    }

    pub fn rse(&self) -> (f64, f64) {
        mean_std(self.reps.iter().map(|r| r.rse))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankingReport {
    pub target: Target,
    pub split: SplitSpec,
    pub forest: ForestConfig,
    pub samples: usize,
    pub clean_images: usize,
    pub variants: Vec<VariantSummary>,
}

impl RankingReport {
    pub fn variant(&self, v: Variant) -> Option<&VariantSummary> {
        self.variants.iter().find(|s| s.variant == v)
    }

    fn config_echo(&self) -> String {
        format!(
            "target = {}\nsamples = {}\nclean_images = {}\nsplit = {:?}\nforest = {:?}\n",
            self.target, self.samples, self.clean_images, self.split, self.forest
        )
    }

    pub fn config_hash(&self) -> String {
        Sha256::digest(self.config_echo().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// Summary table as CSV: variant, tau_mean, tau_std, rmse_mean, rmse_std, rse_mean.
    pub fn summary_csv(&self) -> String {
        let mut s = String::from("variant,tau_mean,tau_std,rmse_mean,rmse_std,rse_mean\n");
        for v in &self.variants {
            let ((tm, ts), (rm, rs), (em, _)) = (v.tau(), v.rmse(), v.rse());
            let _ = writeln!(s, "{},{tm},{ts},{rm},{rs},{em}", v.variant);
        }
        s
    }
}

impl fmt::Display for RankingReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "# ranking evaluation")?;
        f.write_str(&self.config_echo())?;
        writeln!(f, "config_hash = {}", self.config_hash())?;
        writeln!(f, "\n## repetitions")?;
        writeln!(f, "{:<16} {:>4} {:>8} {:>9} {:>8} {:>6}", "variant", "rep", "tau", "rmse", "rse", "images")?;
        for v in &self.variants {
            for r in &v.reps {
                writeln!(
                    f,
                    "{:<16} {:>4} {:>8.4} {:>9.4} {:>8.4} {:>6}",
                    v.variant.to_string(),
                    r.rep,
                    r.tau,
                    r.rmse,
                    r.rse,
                    r.test_images
                )?;
            }
        }
        writeln!(f, "\n## summary (mean ± std over repetitions)")?;
        writeln!(f, "{:<16} {:>17} {:>19} {:>8}", "variant", "tau", "rmse", "rse")?;
        for v in &self.variants {
            let ((tm, ts), (rm, rs), (em, _)) = (v.tau(), v.rmse(), v.rse());
            writeln!(
                f,
                "{:<16} {:>8.4} ± {:<6.4} {:>9.4} ± {:<7.4} {:>8.4}",
                v.variant.to_string(),
                tm,
                ts,
                rm,
                rs,
                em
            )?;
        }
        Ok(())
    }
}

/// Mean per-noisy-image Kendall τ between predicted and true orderings.
/// Groups with fewer than two results are skipped.
pub fn mean_group_tau(groups: &[Vec<(String, f64, f64)>]) -> Result<(f64, usize)> {
    let mut taus = Vec::new();
    for g in groups.iter().filter(|g| g.len() >= 2) {
        let pred: Vec<(String, f64)> = g.iter().map(|(id, p, _)| (id.clone(), *p)).collect();
        let truth: Vec<(String, f64)> = g.iter().map(|(id, _, t)| (id.clone(), *t)).collect();
        taus.push(kendall_tau(&RankingPair {
            predicted: rank_by_score(&pred),
            truth: rank_by_score(&truth),
        })?);
    }
    if taus.is_empty() {
        return Err(Error::Dataset("no test image has two or more results".into()));
    }
    Ok((taus.iter().sum::<f64>() / taus.len() as f64, taus.len()))
}

fn evaluate_variant(
    rows: &[DatasetRow],
    train_idx: &[usize],
    test_groups: &[Vec<usize>],
    variant: Variant,
    target: Target,
    cfg: &ForestConfig,
    rep: usize,
) -> Result<RepetitionResult> {
    let samples: Vec<LabeledSample> = train_idx.iter().map(|&i| rows[i].sample(target)).collect();
    let cfg = cfg.clone().with_subset(variant.columns());
    let model = train(&samples, target, &cfg)?;
    let mut groups = Vec::with_capacity(test_groups.len());
    let (mut pred, mut truth) = (Vec::new(), Vec::new());
    for g in test_groups {
        let scored: Vec<(String, f64, f64)> = g
            .iter()
            .map(|&i| {
                let r = &rows[i];
                (r.denoiser.to_string(), model.predict(&r.features), r.label(target))
            })
            .collect();
        for (_, p, t) in &scored {
            pred.push(*p);
            truth.push(*t);
        }
        groups.push(scored);
    }
    let (tau, test_images) = mean_group_tau(&groups)?;
    let (rmse, rse) = rmse_rse(&pred, &truth)?;
    Ok(RepetitionResult {
        rep,
        tau,
        rmse,
        rse,
        test_images,
    })
}

/// Repeated by-clean-image splits; every variant is trained on the same
/// partition in each repetition.
pub fn run_ranking_eval(
    dataset: &Dataset,
    split: &SplitSpec,
    cfg: &ForestConfig,
    target: Target,
    variants: &[Variant],
) -> Result<RankingReport> {
    split.validate()?;
    cfg.validate()?;
    if variants.is_empty() {
        return Err(Error::invalid("no model variants requested"));
    }
    let rows = &dataset.rows;
    let ids: Vec<String> = rows.iter().map(|r| r.clean_id.clone()).collect();
    let groups = dataset.groups();
    let mut per_variant: Vec<Vec<RepetitionResult>> = vec![Vec::new(); variants.len()];
    for rep in 0..split.repetitions {
        let (train_ids, _) = split.partition(&ids, rep)?;
        let in_train = |i: usize| train_ids.binary_search(&rows[i].clean_id).is_ok();
        let train_idx: Vec<usize> = (0..rows.len()).filter(|&i| in_train(i)).collect();
        let test_groups: Vec<Vec<usize>> = groups.iter().filter(|g| !in_train(g[0])).cloned().collect();
        let rep_cfg = ForestConfig {
            seed: derive_seed(cfg.seed, &[rep as u64]),
            ..cfg.clone()
        };
        let results = variants
            .par_iter()
            .map(|&v| evaluate_variant(rows, &train_idx, &test_groups, v, target, &rep_cfg, rep))
            .collect::<Result<Vec<_>>>()?;
        for (acc, r) in per_variant.iter_mut().zip(results) {
            acc.push(r);
        }
        log::info!("ranking eval: repetition {} of {} done", rep + 1, split.repetitions);
    }
    let mut clean: Vec<&String> = ids.iter().collect();
    clean.sort();
    clean.dedup();
    Ok(RankingReport {
        target,
        split: split.clone(),
        forest: cfg.clone(),
        samples: rows.len(),
        clean_images: clean.len(),
        variants: variants
            .iter()
            .zip(per_variant)
            .map(|(&variant, reps)| VariantSummary { variant, reps })
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuningEvalConfig {
    pub method: Method,
    pub target: Target,
    pub tune: TuneConfig,
    pub grid_points: usize,
    pub train_thetas: usize,
    pub max_test: usize,
    /// Candidate ascent steps tried on the calibration images; empty keeps
    /// `tune.step` and `tune.dtheta` and skips calibration.
    pub step_ladder: Vec<f64>,
    /// Candidate finite-difference half steps, crossed with `step_ladder`;
    /// empty keeps `tune.dtheta`.
    pub dtheta_ladder: Vec<f64>,
    /// Training-half images held out of the model to pick the step.
    pub calibration_images: usize,
    pub seed: u64,
    pub forest: ForestConfig,
}

/// Geometric ladder `base · 2^k` for k in -8..=3.
pub fn default_step_ladder(base: f64) -> Vec<f64> {
    (-8..=3).map(|k| base * 2f64.powi(k)).collect()
}

/// `base`, `2·base` and `4·base`. Wider probes average over the forest's
/// piecewise-constant response.
pub fn default_dtheta_ladder(base: f64) -> Vec<f64> {
    vec![base, 2.0 * base, 4.0 * base]
}

impl TuningEvalConfig {
    pub fn new(method: Method, target: Target, seed: u64) -> Result<Self> {
        let tune = TuneConfig::for_method(method, target)?;
        Ok(Self {
            method,
            target,
            tune,
            grid_points: crate::tuner::GRID_POINTS,
            train_thetas: 40,
            max_test: 25,
            step_ladder: default_step_ladder(tune.step),
            dtheta_ladder: default_dtheta_ladder(tune.dtheta),
            calibration_images: 12,
            seed,
            forest: ForestConfig { seed, ..Default::default() },
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuningCase {
    pub clean_id: String,
    pub noise: NoiseSpec,
    pub theta_star: f64,
    pub theta_gt: f64,
    pub quality_star: f64,
    pub quality_gt: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

impl TuningCase {
    /// True-metric shortfall of the tuned result against the oracle.
    pub fn gap(&self) -> f64 {
        self.quality_gt - self.quality_star
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuningReport {
    pub method: Method,
    pub target: Target,
    /// Settings the test images were tuned with, calibrated step included.
    pub tune: TuneConfig,
    pub grid_points: usize,
    pub seed: u64,
    pub train_images: usize,
    pub train_samples: usize,
    pub oob_rmse: Option<f64>,
    /// (step, dθ, mean gap on the calibration images) per ladder rung.
    pub calibration: Vec<(f64, f64, f64)>,
    pub cases: Vec<TuningCase>,
}

impl TuningReport {
    pub fn gap(&self) -> (f64, f64) {
        mean_std(self.cases.iter().map(TuningCase::gap))
    }

    pub fn iterations(&self) -> (f64, f64) {
        mean_std(self.cases.iter().map(|c| c.iterations as f64))
    }
}

impl fmt::Display for TuningReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let metric = match self.target {
            Target::Psnr => "diff_psnr",
            Target::Ssim => "diff_ssim",
        };
        writeln!(f, "# tuning evaluation")?;
        writeln!(f, "method = {}\ntarget = {}\nseed = {}", self.method, self.target, self.seed)?;
        writeln!(
            f,
            "step = {}\ndtheta = {}\nmax_iters = {}\nbounds = [{}, {}]\ngrid_points = {}",
            self.tune.step, self.tune.dtheta, self.tune.max_iters, self.tune.bounds.0, self.tune.bounds.1, self.grid_points
        )?;
        writeln!(f, "train_images = {}\ntrain_samples = {}", self.train_images, self.train_samples)?;
        if let Some(o) = self.oob_rmse {
            writeln!(f, "oob_rmse = {o:.4}")?;
        }
        if !self.calibration.is_empty() {
            writeln!(f, "\n## step calibration")?;
            writeln!(f, "{:>12} {:>9} {:>9}", "step", "dtheta", metric)?;
            for (step, dtheta, gap) in &self.calibration {
                writeln!(f, "{step:>12.6} {dtheta:>9.4} {gap:>9.4}")?;
            }
        }
        writeln!(f, "\n## cases")?;
        writeln!(
            f,
            "{:<28} {:<24} {:>8} {:>8} {:>9} {:>5} {:>5}",
            "clean_id", "noise", "theta*", "theta_gt", metric, "iters", "evals"
        )?;
        for c in &self.cases {
            writeln!(
                f,
                "{:<28} {:<24} {:>8.4} {:>8.4} {:>9.4} {:>5} {:>5}",
                c.clean_id,
                c.noise.to_string(),
                c.theta_star,
                c.theta_gt,
                c.gap(),
                c.iterations,
                c.evaluations
            )?;
        }
        let ((gm, gs), (im, is)) = (self.gap(), self.iterations());
        writeln!(f, "\n## summary")?;
        writeln!(f, "{metric} = {gm:.4} ± {gs:.4}")?;
        writeln!(f, "iterations = {im:.2} ± {is:.2}")
    }
}

/// Samples for a dedicated model: `method` at evenly spaced θ values, each
/// labeled with its true quality.
pub fn theta_samples(
    noisy: &Image,
    clean: &Image,
    method: Method,
    thetas: &[f64],
    target: Target,
    keys: &SampleKeys,
) -> Result<Vec<LabeledSample>> {
    thetas
        .iter()
        .map(|&t| {
            let id = DenoiserId::theta(method, t);
            let d = denoise(noisy, &id)?.quantized();
            Ok(LabeledSample {
                features: extract_features(noisy, &d)?,
                label: true_quality(clean, &d, target)?,
                keys: SampleKeys {
                    denoiser: id.to_string(),
                    ..keys.clone()
                },
            })
        })
        .collect()
}

fn load_pair(manifest: &Manifest, r: &ManifestRow) -> Result<(Image, Image)> {
    Ok((
        load_image(manifest.resolve(&r.noisy_path))?,
        load_image(manifest.clean_path(&r.clean_id))?,
    ))
}

struct Oracle {
    noisy: Image,
    clean: Image,
    optimum: f64,
}

/// Candidate (step, dθ) pairs, step-major.
fn calibration_rungs(cfg: &TuningEvalConfig) -> Vec<(f64, f64)> {
    let dthetas = if cfg.dtheta_ladder.is_empty() { vec![cfg.tune.dtheta] } else { cfg.dtheta_ladder.clone() };
    cfg.step_ladder.iter().flat_map(|&s| dthetas.iter().map(move |&d| (s, d))).collect()
}

/// Mean true-quality gap of tuning every oracle image with each rung.
/// Model predictions are memoized per image since rungs revisit θ.
fn calibrate_step(oracles: &[Oracle], cfg: &TuningEvalConfig, model: &QualityModel) -> Result<Vec<(f64, f64, f64)>> {
    let rungs = calibration_rungs(cfg);
    let gaps = oracles
        .par_iter()
        .map(|o| {
            let mut memo: HashMap<u64, f64> = HashMap::new();
            rungs
                .iter()
                .map(|&(step, dtheta)| {
                    let tc = TuneConfig { step, dtheta, ..cfg.tune };
                    let trace = gradient_ascent(&tc, |t| {
                        if let Some(&q) = memo.get(&t.to_bits()) {
                            return Ok(q);
                        }
                        let q = quality_of(&o.noisy, cfg.method, t, model)?;
                        memo.insert(t.to_bits(), q);
                        Ok(q)
                    })?;
                    let got = true_quality(&o.clean, &denoise_at(&o.noisy, cfg.method, trace.theta)?, cfg.target)?;
                    Ok(o.optimum - got)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(rungs
        .iter()
        .enumerate()
        .map(|(i, &(step, dtheta))| (step, dtheta, gaps.iter().map(|g| g[i]).sum::<f64>() / gaps.len() as f64))
        .collect())
}

/// Trains a dedicated model on a random half of the noisy images and tunes
/// up to `max_test` of the rest, scoring each against the brute-force
/// optimum on a `grid_points` grid.
///
/// When a step ladder is configured, `calibration_images` of the training
/// half are kept out of the model and the (step, dθ) rung with the smallest
/// mean gap on them is used for the test images. Test images never influence
/// the model or the rung.
pub fn run_tuning_eval(manifest: &Manifest, cfg: &TuningEvalConfig) -> Result<(TuningReport, QualityModel)> {
    cfg.tune.validate()?;
    if cfg.step_ladder.iter().chain(&cfg.dtheta_ladder).any(|s| !(*s > 0.0 && s.is_finite())) {
        return Err(Error::invalid("calibration ladder entries must be positive"));
    }
    let bounds = cfg
        .method
        .theta_bounds()
        .ok_or_else(|| Error::invalid(format!("{} has no tunable parameter", cfg.method)))?;
    let mut noisy = manifest.noisy_images();
    if noisy.len() < 2 {
        return Err(Error::Dataset("tuning evaluation needs at least two noisy images".into()));
    }
    noisy.shuffle(&mut stream(derive_seed(cfg.seed, &[0x7475_6e65])));
    let test = noisy.split_off(noisy.len() / 2);
    let mut train_rows = noisy;
    let calib_rows = if cfg.step_ladder.is_empty() {
        Vec::new()
    } else {
        let keep = train_rows.len().saturating_sub(cfg.calibration_images).max(1);
        train_rows.split_off(keep)
    };
    let thetas = theta_grid(bounds, cfg.train_thetas.max(2));

    let per_image = train_rows
        .par_iter()
        .map(|r| {
            let (n, c) = load_pair(manifest, r)?;
            let keys = SampleKeys {
                clean_id: r.clean_id.clone(),
                noise: r.noise.to_string(),
                denoiser: String::new(),
            };
            theta_samples(&n, &c, cfg.method, &thetas, cfg.target, &keys)
        })
        .collect::<Result<Vec<_>>>()?;
    let samples: Vec<LabeledSample> = per_image.into_iter().flatten().collect();
    let model = train(&samples, cfg.target, &cfg.forest)?;
    log::info!("tuning eval: dedicated model on {} samples", samples.len());

    let grid = theta_grid(bounds, cfg.grid_points);
    let oracle = |r: &ManifestRow| -> Result<Oracle> {
        let (noisy, clean) = load_pair(manifest, r)?;
        let optimum = brute_force_optimum(&noisy, &clean, cfg.method, &grid, cfg.target)?.quality;
        Ok(Oracle { noisy, clean, optimum })
    };
    let mut tune_cfg = cfg.tune;
    let mut calibration = Vec::new();
    if !calib_rows.is_empty() {
        let oracles = calib_rows.iter().map(|r| oracle(r)).collect::<Result<Vec<_>>>()?;
        calibration = calibrate_step(&oracles, cfg, &model)?;
        // Ladder order breaks ties.
        let best = calibration
            .iter()
            .fold(None::<(f64, f64, f64)>, |b, &(s, d, g)| match b {
                Some((_, _, bg)) if bg <= g => b,
                _ => Some((s, d, g)),
            })
            .expect("non-empty ladder");
        tune_cfg.step = best.0;
        tune_cfg.dtheta = best.1;
        tune_cfg.validate()?;
        log::info!("tuning eval: calibrated step {} dtheta {} (mean gap {:.4})", best.0, best.1, best.2);
    }

    let cases = test
        .par_iter()
        .take(cfg.max_test)
        .map(|r| {
            let (n, c) = load_pair(manifest, r)?;
            let tuned = tune(&n, cfg.method, &model, &tune_cfg)?;
            let bf = brute_force_optimum(&n, &c, cfg.method, &grid, cfg.target)?;
            Ok(TuningCase {
                clean_id: r.clean_id.clone(),
                noise: r.noise,
                theta_star: tuned.trace.theta,
                theta_gt: bf.theta,
                quality_star: true_quality(&c, &tuned.denoised, cfg.target)?,
                quality_gt: bf.quality,
                iterations: tuned.trace.iterations(),
                evaluations: tuned.trace.evaluations,
                converged: tuned.trace.converged,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let report = TuningReport {
        method: cfg.method,
        target: cfg.target,
        tune: tune_cfg,
        grid_points: cfg.grid_points,
        seed: cfg.seed,
        train_images: train_rows.len(),
        train_samples: samples.len(),
        oob_rmse: model.oob_rmse,
        calibration,
        cases,
    };
    Ok((report, model))
}

/// Per-variant τ means keyed by name, for quick lookups in reports.
pub fn tau_table(report: &RankingReport) -> HashMap<String, f64> {
    report.variants.iter().map(|v| (v.variant.to_string(), v.tau().0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureVector;
    use crate::noise::NoiseKind;

    #[test]
    fn standard_variants() {
        let v = Variant::standard();
        assert_eq!(v.len(), 13);
        assert_eq!(Variant::Only(Family::Vr).columns(), (12..18).collect::<Vec<_>>());
        let without = Variant::Without(Family::Ss).columns();
        assert_eq!(without.len(), 16);
        assert!(!without.contains(&0));
        assert_eq!(Variant::Without(Family::Gh).to_string(), "without_gh");
    }

    #[test]
    fn group_tau_averages_over_images() {
        let g1 = vec![("a".into(), 3.0, 30.0), ("b".into(), 2.0, 20.0), ("c".into(), 1.0, 10.0)];
        let g2 = vec![("a".into(), 1.0, 30.0), ("b".into(), 2.0, 20.0)];
        let single = vec![("z".into(), 1.0, 1.0)];
        let (tau, n) = mean_group_tau(&[g1, g2, single]).unwrap();
        assert_eq!(n, 2);
        assert!((tau - 0.0).abs() < 1e-12);
        assert!(mean_group_tau(&[]).is_err());
    }

    #[test]
    fn mean_std_edges() {
        assert_eq!(mean_std([2.0].into_iter()), (2.0, 0.0));
        let (m, s) = mean_std([1.0, 3.0].into_iter());
        assert_eq!(m, 2.0);
        assert!((s - 2f64.sqrt()).abs() < 1e-12);
    }

    /// A dataset whose label is a function of feature 0 (and feature 13 for
    /// a second family), with ten denoisers per noisy image.
    fn synthetic_dataset() -> Dataset {
        let mut rows = Vec::new();
        let pool = DenoiserId::pool();
        for img in 0..12 {
            let noise = NoiseSpec::new(NoiseKind::Gaussian, 15.0, img).unwrap();
            for (k, d) in pool.iter().enumerate().take(10) {
                let a = ((img * 7 + k as u64 * 3) % 11) as f64;
                let b = ((img * 5 + k as u64 * 2) % 7) as f64;
                let mut f = [0.5; FEATURE_COUNT];
                f[0] = a;
                f[13] = b;
                rows.push(DatasetRow {
                    clean_id: format!("c{img:02}"),
                    noise,
                    denoiser: *d,
                    features: FeatureVector(f),
                    psnr: 20.0 + a + 0.5 * b,
                    ssim: 0.05 * a,
                });
            }
        }
        Dataset { rows, failures: Vec::new() }
    }

    #[test]
    fn ranking_eval_prefers_informative_features() {
        let ds = synthetic_dataset();
        let split = SplitSpec { train_fraction: 0.5, repetitions: 2, seed: 1 };
        let cfg = ForestConfig { n_trees: 20, min_leaf: 2, seed: 1, ..Default::default() };
        let variants = [Variant::All, Variant::Only(Family::Ss), Variant::Only(Family::Sgm)];
        let rep = run_ranking_eval(&ds, &split, &cfg, Target::Psnr, &variants).unwrap();
        let all = rep.variant(Variant::All).unwrap().tau().0;
        let ss = rep.variant(Variant::Only(Family::Ss)).unwrap().tau().0;
        let sgm = rep.variant(Variant::Only(Family::Sgm)).unwrap().tau().0;
        assert!(all > 0.8, "{all}");
        assert!(ss > sgm, "{ss} vs {sgm}");
        assert_eq!(rep.variants[0].reps.len(), 2);
        let text = rep.to_string();
        assert!(text.contains("config_hash = "));
        assert!(rep.summary_csv().lines().count() == 4);
        let again = run_ranking_eval(&ds, &split, &cfg, Target::Psnr, &variants).unwrap();
        assert_eq!(again, rep);
    }

    #[test]
    fn tuning_eval_calibrates_on_training_images_only() {
        use crate::harness::benchmark::{build_benchmark, BenchmarkOptions};
        use crate::harness::corpus::{write_corpus, CorpusSpec};
        let dir = tempfile::tempdir().unwrap();
        let spec = CorpusSpec { count: 3, size: 24, color_every: 0, seed: 2 };
        write_corpus(&spec, &dir.path().join("clean")).unwrap();
        let opts = BenchmarkOptions { denoisers: vec![DenoiserId::grid(Method::Median, 0)], ..Default::default() };
        let rep = build_benchmark(&dir.path().join("clean"), &dir.path().join("bench"), &opts).unwrap();

        let mut cfg = TuningEvalConfig::new(Method::GaussianFilter, Target::Psnr, 3).unwrap();
        cfg.train_thetas = 4;
        cfg.grid_points = 12;
        cfg.max_test = 4;
        cfg.calibration_images = 3;
        cfg.step_ladder = vec![0.01, 0.1, 1.0];
        cfg.dtheta_ladder = vec![cfg.tune.dtheta, 2.0 * cfg.tune.dtheta];
        cfg.forest = ForestConfig { n_trees: 10, min_leaf: 2, seed: 3, ..Default::default() };
        let (report, model) = run_tuning_eval(&rep.manifest, &cfg).unwrap();
        assert_eq!(report.cases.len(), 4);
        // 27 noisy images: 13 train, 3 of them for calibration, 14 test.
        assert_eq!(report.train_images, 10);
        assert_eq!(report.train_samples, 40);
        assert_eq!(model.training_samples, 40);
        assert_eq!(report.calibration.len(), 6);
        assert_eq!((report.calibration[1].0, report.calibration[1].1), (0.01, cfg.dtheta_ladder[1]));
        let best = report.calibration.iter().map(|c| c.2).fold(f64::INFINITY, f64::min);
        let chosen = report.calibration.iter().find(|c| c.2 == best).unwrap();
        assert_eq!((report.tune.step, report.tune.dtheta), (chosen.0, chosen.1));
        for c in &report.cases {
            assert_eq!(c.evaluations, 2 * c.iterations + 1);
            assert!(c.quality_gt.is_finite() && c.quality_star.is_finite());
        }
        assert!(report.to_string().contains("## step calibration"));
        let (again, _) = run_tuning_eval(&rep.manifest, &cfg).unwrap();
        assert_eq!(again, report);

        cfg.step_ladder.clear();
        let (fixed, _) = run_tuning_eval(&rep.manifest, &cfg).unwrap();
        assert_eq!(fixed.tune, cfg.tune);
        assert_eq!(fixed.train_images, 13);
        assert!(fixed.calibration.is_empty());
        cfg.step_ladder = vec![0.0];
        assert!(run_tuning_eval(&rep.manifest, &cfg).is_err());
        cfg.step_ladder = vec![1.0];
        cfg.dtheta_ladder = vec![-1.0];
        assert!(run_tuning_eval(&rep.manifest, &cfg).is_err());
    }
}
