//! Gradient-ascent tuning of a denoiser's strength parameter against a
//! quality model, and the brute-force oracle used to score it.
//!
//! Every candidate is scored as the 8-bit image it would be stored as, the
//! same way benchmark results are labeled.

use std::io::Write;
use std::path::Path;

use crate::denoise::{denoise, DenoiserId, Method};
use crate::error::{Error, Result};
use crate::features::extract_features;
use crate::forest::{QualityModel, Target};
use crate::image::Image;
use crate::metrics::{psnr, ssim};
use crate::scalar::Scalar;

/// Points in the brute-force grid; the default finite-difference step is the
/// bounds width over this count.
pub const GRID_POINTS: usize = 80;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TuneConfig {
    /// Ascent step λ.
    pub step: f64,
    /// Finite-difference half step dθ.
    pub dtheta: f64,
    pub max_iters: usize,
    pub bounds: (f64, f64),
}

impl TuneConfig {
    pub fn new(bounds: (f64, f64), step: f64) -> Self {
        Self {
            step,
            dtheta: (bounds.1 - bounds.0) / GRID_POINTS as f64,
            max_iters: 20,
            bounds,
        }
    }

    /// Defaults for tuning `method` against a `target` model.
    pub fn for_method(method: Method, target: Target) -> Result<Self> {
        let bounds = method
            .theta_bounds()
            .ok_or_else(|| Error::invalid(format!("{method} has no tunable parameter")))?;
        let step = match target {
            Target::Psnr => 2.0,
            Target::Ssim => 20.0,
        };
        Ok(Self::new(bounds, step))
    }

    pub fn tolerance(&self) -> f64 {
        0.5 * self.dtheta
    }

    pub fn start(&self) -> f64 {
        0.5 * (self.bounds.0 + self.bounds.1)
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.bounds;
        if !(self.step > 0.0 && self.dtheta > 0.0 && lo < hi && lo.is_finite() && hi.is_finite()) {
            return Err(Error::invalid("tuning needs step, dtheta > 0 and finite lo < hi"));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be positive"));
        }
        Ok(())
    }

    fn clamp(&self, t: f64) -> f64 {
        t.clamp(self.bounds.0, self.bounds.1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Iterate {
    pub theta: f64,
    /// Mean of the two probe values, a second-order estimate of q(θ).
    pub quality: f64,
    pub gradient: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneTrace {
    pub iterates: Vec<Iterate>,
    pub theta: f64,
    pub quality: f64,
    pub converged: bool,
    /// Calls to the quality function.
    pub evaluations: usize,
}

impl TuneTrace {
    pub fn iterations(&self) -> usize {
        self.iterates.len()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["iter", "theta", "q", "grad"])?;
        for (k, it) in self.iterates.iter().enumerate() {
            out.write_record([
                k.to_string(),
                it.theta.to_string(),
                it.quality.to_string(),
                it.gradient.to_string(),
            ])?;
        }
        out.write_record([
            self.iterates.len().to_string(),
            self.theta.to_string(),
            self.quality.to_string(),
            String::new(),
        ])?;
        out.flush().map_err(|e| Error::io("<csv>", e))
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }
}

/// Gradient ascent on an arbitrary quality function of θ.
///
/// Each iteration probes θ ± dθ (one-sided at a bound) and steps by
/// `step · gradient`, clamped to the bounds; the loop stops once a step is
/// shorter than the tolerance. One final call scores the last iterate.
///
/// θ* is the evaluated point with the highest quality, the last iterate on
/// ties. A fixed step can cycle without converging, and the point where the
/// budget runs out is then arbitrary.
pub fn gradient_ascent(cfg: &TuneConfig, mut q: impl FnMut(f64) -> Result<f64>) -> Result<TuneTrace> {
    cfg.validate()?;
    let mut theta = cfg.start();
    let mut iterates = Vec::new();
    let mut converged = false;
    let mut evaluations = 0;
    let mut probed: Vec<(f64, f64)> = Vec::new();
    while iterates.len() < cfg.max_iters {
        let (a, b) = (cfg.clamp(theta - cfg.dtheta), cfg.clamp(theta + cfg.dtheta));
        let (qa, qb) = (q(a)?, q(b)?);
        evaluations += 2;
        probed.extend([(a, qa), (b, qb)]);
        let gradient = (qb - qa) / (b - a);
        iterates.push(Iterate {
            theta,
            quality: 0.5 * (qa + qb),
            gradient,
        });
        let next = cfg.clamp(theta + cfg.step * gradient);
        let moved = (next - theta).abs();
        theta = next;
        if moved < cfg.tolerance() {
            converged = true;
            break;
        }
    }
    let mut quality = q(theta)?;
    evaluations += 1;
    for (t, v) in probed {
        if v > quality {
            (theta, quality) = (t, v);
        }
    }
    Ok(TuneTrace {
        iterates,
        theta,
        quality,
        converged,
        evaluations,
    })
}

/// `method` at strength θ, quantized to 8 bits.
pub fn denoise_at<T: Scalar>(noisy: &Image<T>, method: Method, theta: f64) -> Result<Image<T>> {
    Ok(denoise(noisy, &DenoiserId::theta(method, theta))?.quantized())
}

/// Predicted quality of `method` at strength θ on `noisy`.
pub fn quality_of<T: Scalar>(noisy: &Image<T>, method: Method, theta: f64, model: &QualityModel) -> Result<f64> {
    model.predict_with(noisy, &denoise_at(noisy, method, theta)?)
}

impl QualityModel {
    pub fn predict_with<T: Scalar>(&self, noisy: &Image<T>, denoised: &Image<T>) -> Result<f64> {
        Ok(self.predict(&extract_features(noisy, denoised)?))
    }
}

#[derive(Debug, Clone)]
pub struct Tuned<T> {
    pub trace: TuneTrace,
    pub denoised: Image<T>,
}

/// Tunes `method` on `noisy` by ascending the model's predicted quality.
pub fn tune<T: Scalar>(noisy: &Image<T>, method: Method, model: &QualityModel, cfg: &TuneConfig) -> Result<Tuned<T>> {
    let mut last = None;
    let trace = gradient_ascent(cfg, |theta| {
        let denoised = denoise_at(noisy, method, theta)?;
        let q = model.predict_with(noisy, &denoised)?;
        last = Some((theta, denoised));
        Ok(q)
    })?;
    let denoised = match last {
        Some((t, img)) if t == trace.theta => img,
        _ => denoise_at(noisy, method, trace.theta)?,
    };
    Ok(Tuned { trace, denoised })
}

/// Full-reference score of `img` against `clean`.
pub fn true_quality<T: Scalar>(clean: &Image<T>, img: &Image<T>, target: Target) -> Result<f64> {
    match target {
        Target::Psnr => psnr(clean, img),
        Target::Ssim => ssim(clean, img),
    }
}

/// `n` evenly spaced values covering `bounds` inclusively.
pub fn theta_grid(bounds: (f64, f64), n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.5 * (bounds.0 + bounds.1)],
        _ => (0..n)
            .map(|i| bounds.0 + (bounds.1 - bounds.0) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BruteForce {
    pub theta: f64,
    pub quality: f64,
    /// (θ, true quality) for every grid point, in grid order.
    pub curve: Vec<(f64, f64)>,
}

/// Exhaustive search for the θ maximizing the true metric; ties go to the
/// smallest θ.
pub fn brute_force_optimum<T: Scalar>(
    noisy: &Image<T>,
    clean: &Image<T>,
    method: Method,
    grid: &[f64],
    target: Target,
) -> Result<BruteForce> {
    if grid.is_empty() {
        return Err(Error::invalid("empty parameter grid"));
    }
    let curve = grid
        .iter()
        .map(|&t| Ok((t, true_quality(clean, &denoise_at(noisy, method, t)?, target)?)))
        .collect::<Result<Vec<_>>>()?;
    let mut best = curve[0];
    for &(t, v) in &curve[1..] {
        if v > best.1 || (v == best.1 && t < best.0) {
            best = (t, v);
        }
    }
    Ok(BruteForce {
        theta: best.0,
        quality: best.1,
        curve,
    })
}

/// True-metric shortfall of θ* relative to θ_gt.
pub fn tune_quality_gap<T: Scalar>(
    noisy: &Image<T>,
    clean: &Image<T>,
    method: Method,
    theta_star: f64,
    theta_gt: f64,
    target: Target,
) -> Result<f64> {
    let at = |t: f64| true_quality(clean, &denoise_at(noisy, method, t)?, target);
    Ok(at(theta_gt)? - at(theta_star)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::add_gaussian;

    fn stub_cfg() -> TuneConfig {
        TuneConfig {
            step: 0.3,
            dtheta: 0.5,
            max_iters: 20,
            bounds: (0.0, 16.0),
        }
    }

    #[test]
    fn quadratic_stub_converges_near_peak() {
        let t = gradient_ascent(&stub_cfg(), |x| Ok(-(x - 7.0) * (x - 7.0))).unwrap();
        assert!(t.converged);
        assert!((t.theta - 7.0).abs() <= 0.5, "{}", t.theta);
        assert!(t.iterations() <= 20);
        assert_eq!(t.evaluations, 2 * t.iterations() + 1);
    }

    #[test]
    fn constant_quality_stops_at_start() {
        let t = gradient_ascent(&stub_cfg(), |_| Ok(3.0)).unwrap();
        assert_eq!(t.iterations(), 1);
        assert_eq!(t.theta, 8.0);
        assert_eq!(t.evaluations, 3);
    }

    #[test]
    fn iterates_stay_in_bounds_with_huge_steps() {
        let cfg = TuneConfig { step: 1e6, ..stub_cfg() };
        let t = gradient_ascent(&cfg, |x| Ok(x)).unwrap();
        assert!(t.iterates.iter().all(|i| (0.0..=16.0).contains(&i.theta)));
        assert_eq!(t.theta, 16.0);
        assert!(t.converged);
    }

    #[test]
    fn non_convergence_is_reported() {
        let cfg = TuneConfig { max_iters: 3, step: 0.5, ..stub_cfg() };
        let t = gradient_ascent(&cfg, |x| Ok(x)).unwrap();
        assert!(!t.converged);
        assert_eq!(t.iterations(), 3);
        assert_eq!(t.evaluations, 7);
    }

    #[test]
    fn cycling_run_returns_best_point_seen() {
        let cfg = TuneConfig { step: 10.0, ..stub_cfg() };
        let t = gradient_ascent(&cfg, |x| Ok(-(x - 7.0).powi(2))).unwrap();
        assert!(!t.converged);
        assert_eq!(t.iterates[1].theta, 0.0);
        assert_eq!(t.iterates[2].theta, 16.0);
        assert_eq!((t.theta, t.quality), (7.5, -0.25));
        assert_eq!(t.evaluations, 2 * t.iterations() + 1);
    }

    #[test]
    fn errors_propagate() {
        let r = gradient_ascent(&stub_cfg(), |_| Err(Error::invalid("boom")));
        assert!(r.is_err());
    }

    #[test]
    fn invalid_configs_rejected() {
        for cfg in [
            TuneConfig { step: 0.0, ..stub_cfg() },
            TuneConfig { dtheta: -1.0, ..stub_cfg() },
            TuneConfig { bounds: (2.0, 2.0), ..stub_cfg() },
            TuneConfig { max_iters: 0, ..stub_cfg() },
        ] {
            assert!(gradient_ascent(&cfg, |_| Ok(0.0)).is_err());
        }
    }

    #[test]
    fn default_step_is_eightieth_of_width() {
        let c = TuneConfig::for_method(Method::Bilateral, Target::Ssim).unwrap();
        assert_eq!(c.step, 20.0);
        assert!((c.dtheta - 95.0 / 80.0).abs() < 1e-12);
        assert_eq!(c.start(), 52.5);
        assert!(TuneConfig::for_method(Method::Median, Target::Psnr).is_err());
    }

    #[test]
    fn grid_spans_bounds() {
        let g = theta_grid((0.2, 3.0), 80);
        assert_eq!(g.len(), 80);
        assert_eq!(g[0], 0.2);
        assert!((g[79] - 3.0).abs() < 1e-12);
        assert_eq!(theta_grid((1.0, 3.0), 1), vec![2.0]);
    }

    fn scene() -> (Image, Image) {
        let clean = Image::from_fn(24, 24, |x, y| if (x / 6 + y / 6) % 2 == 0 { 60.0 } else { 190.0 });
        let noisy = add_gaussian(&clean, 20.0, 5).unwrap();
        (clean, noisy)
    }

    #[test]
    fn brute_force_is_exhaustive_argmax() {
        let (clean, noisy) = scene();
        let grid = theta_grid((0.3, 5.0), 6);
        let bf = brute_force_optimum(&noisy, &clean, Method::GaussianFilter, &grid, Target::Psnr).unwrap();
        for &(t, v) in &bf.curve {
            let direct = psnr(&clean, &gaussian(&noisy, t)).unwrap();
            assert_eq!(v, direct);
            assert!(v <= bf.quality);
        }
        let one = brute_force_optimum(&noisy, &clean, Method::GaussianFilter, &[1.1], Target::Psnr).unwrap();
        assert_eq!(one.theta, 1.1);
    }

    fn gaussian(img: &Image, s: f64) -> Image {
        crate::denoise::gaussian_filter(img, s).unwrap().quantized()
    }

    #[test]
    fn gap_matches_hand_computation() {
        let (clean, noisy) = scene();
        let g = tune_quality_gap(&noisy, &clean, Method::GaussianFilter, 0.5, 1.5, Target::Psnr).unwrap();
        let hand = psnr(&clean, &gaussian(&noisy, 1.5)).unwrap() - psnr(&clean, &gaussian(&noisy, 0.5)).unwrap();
        assert_eq!(g, hand);
        let zero = tune_quality_gap(&noisy, &clean, Method::GaussianFilter, 1.5, 1.5, Target::Ssim).unwrap();
        assert_eq!(zero, 0.0);
    }

    #[test]
    fn trace_csv_has_header_and_final_row() {
        let t = gradient_ascent(&stub_cfg(), |x| Ok(-(x - 7.0).powi(2))).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "iter,theta,q,grad");
        assert_eq!(lines.len(), t.iterations() + 2);
        assert!(lines[1].starts_with("0,8,"));
    }
}
