//! Gradient histogram preservation.
//!
//! The target histogram is estimated from the noisy image alone:
//!
//! 1. estimate σ̂ with the MAD estimator;
//! 2. histogram the noisy horizontal differences (unit bins over ±255);
//! 3. treat that histogram as the clean one blurred by N(0, 2σ̂²) and undo the
//!    blur with 30 Richardson-Lucy (non-negative multiplicative) iterations;
//! 4. push every noisy gradient component through the quantile map from the
//!    noisy difference distribution to the recovered one, and histogram the
//!    resulting magnitudes in the same bins as the result's histogram.
//!
//! With σ̂ = 0 the kernel is a delta, the quantile map is the identity and
//! the target equals the noisy image's own magnitude histogram.

use crate::error::Result;
use crate::image::{gradient_field, GradientField, Image};
use crate::noise::estimate_noise_sigma;
use crate::scalar::Scalar;

pub const GH_BINS: usize = 100;
const DECONV_ITERS: usize = 30;
/// Signed difference bins: integers -255..=255.
const DIFF_BINS: usize = 511;
const DIFF_OFFSET: f64 = 255.5;

fn magnitude_bin(m: f64) -> usize {
    let width = 255.0 * std::f64::consts::SQRT_2 / GH_BINS as f64;
    ((m / width).floor().max(0.0) as usize).min(GH_BINS - 1)
}

/// Mass-normalized histogram of gradient magnitudes, 100 bins over
/// `[0, 255·√2]`.
pub fn gradient_histogram<T: Scalar>(g: &GradientField<T>) -> Vec<f64> {
    let mut h = vec![0.0; GH_BINS];
    for m in &g.magnitude {
        h[magnitude_bin(m.f64())] += 1.0;
    }
    let n = g.magnitude.len() as f64;
    h.iter_mut().for_each(|v| *v /= n);
    h
}

fn diff_bin(d: f64) -> usize {
    ((d + DIFF_OFFSET).floor().max(0.0) as usize).min(DIFF_BINS - 1)
}

fn diff_histogram<T: Scalar>(img: &Image<T>) -> Vec<f64> {
    let w = img.width();
    let mut h = vec![0.0; DIFF_BINS];
    let mut n = 0.0;
    for row in img.data().chunks_exact(w) {
        for pair in row.windows(2) {
            h[diff_bin((pair[1] - pair[0]).f64())] += 1.0;
            n += 1.0;
        }
    }
    if n > 0.0 {
        h.iter_mut().for_each(|v| *v /= n);
    }
    h
}

/// Sampled, normalized N(0, var) on integer offsets, truncated at 4σ.
fn gaussian_taps(var: f64) -> Vec<f64> {
    let sd = var.sqrt();
    let radius = (4.0 * sd).ceil() as isize;
    if radius == 0 {
        return vec![1.0];
    }
    let raw: Vec<f64> = (-radius..=radius)
        .map(|i| (-((i * i) as f64) / (2.0 * var)).exp())
        .collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

fn convolve_same(x: &[f64], taps: &[f64]) -> Vec<f64> {
    let r = (taps.len() / 2) as isize;
    let n = x.len() as isize;
    (0..n)
        .map(|i| {
            taps.iter()
                .enumerate()
                .filter_map(|(k, &t)| {
                    let j = i + k as isize - r;
                    (0..n).contains(&j).then(|| t * x[j as usize])
                })
                .sum()
        })
        .collect()
}

/// Richardson-Lucy deconvolution of a histogram against a symmetric kernel.
fn deconvolve(observed: &[f64], taps: &[f64], iters: usize) -> Vec<f64> {
    let mut u = observed.to_vec();
    if taps.len() == 1 {
        return u;
    }
    for _ in 0..iters {
        let blurred = convolve_same(&u, taps);
        let ratio: Vec<f64> = observed
            .iter()
            .zip(&blurred)
            .map(|(&o, &b)| if b > 0.0 { o / b } else { 0.0 })
            .collect();
        let corr = convolve_same(&ratio, taps);
        for (v, c) in u.iter_mut().zip(corr) {
            *v *= c;
        }
    }
    let s: f64 = u.iter().sum();
    if s > 0.0 {
        u.iter_mut().for_each(|v| *v /= s);
    }
    u
}

struct PiecewiseCdf {
    mass: Vec<f64>,
    /// cum[i] = mass of bins before i; len = bins + 1
    cum: Vec<f64>,
}

impl PiecewiseCdf {
    fn new(mass: Vec<f64>) -> Self {
        let mut cum = Vec::with_capacity(mass.len() + 1);
        let mut acc = 0.0;
        cum.push(0.0);
        for &m in &mass {
            acc += m;
            cum.push(acc);
        }
        Self { mass, cum }
    }

    fn cdf(&self, v: f64) -> f64 {
        let pos = (v + DIFF_OFFSET).clamp(0.0, DIFF_BINS as f64);
        let b = (pos.floor() as usize).min(DIFF_BINS - 1);
        self.cum[b] + (pos - b as f64) * self.mass[b]
    }

    fn quantile(&self, p: f64) -> f64 {
        // first bin whose right edge passes p
        let b = self.cum[1..].partition_point(|&c| c <= p).min(DIFF_BINS - 1);
        let b = if self.mass[b] > 0.0 {
            b
        } else {
            // p sits on a flat stretch; take the last massive bin at or before it
            (0..=b).rev().find(|&i| self.mass[i] > 0.0).unwrap_or(b)
        };
        let frac = if self.mass[b] > 0.0 {
            ((p - self.cum[b]) / self.mass[b]).clamp(0.0, 1.0)
        } else {
            0.5
        };
        b as f64 + frac - DIFF_OFFSET
    }
}

/// Target gradient-magnitude histogram estimated from the noisy image.
pub fn target_gradient_histogram<T: Scalar>(noisy: &Image<T>) -> Result<Vec<f64>> {
    let sigma = estimate_noise_sigma(noisy)?;
    let g = gradient_field(noisy)?;
    let observed = diff_histogram(noisy);
    let taps = gaussian_taps(2.0 * sigma * sigma);
    if taps.len() == 1 {
        return Ok(gradient_histogram(&g));
    }
    let recovered = deconvolve(&observed, &taps, DECONV_ITERS);
    let from = PiecewiseCdf::new(observed);
    let to = PiecewiseCdf::new(recovered);
    let map = |d: f64| to.quantile(from.cdf(d));
    let mut h = vec![0.0; GH_BINS];
    for (&dx, &dy) in g.dx.iter().zip(&g.dy) {
        let (mx, my) = (map(dx.f64()), map(dy.f64()));
        h[magnitude_bin((mx * mx + my * my).sqrt())] += 1.0;
    }
    let n = g.dx.len() as f64;
    h.iter_mut().for_each(|v| *v /= n);
    Ok(h)
}

/// ℓ1 distance between the target histogram and the result's histogram.
pub fn feature_gh<T: Scalar>(noisy: &Image<T>, denoised: &Image<T>) -> Result<f64> {
    noisy.check_same_shape(denoised)?;
    let target = target_gradient_histogram(noisy)?;
    let got = gradient_histogram(&gradient_field(denoised)?);
    Ok(target.iter().zip(&got).map(|(a, b)| (a - b).abs()).sum())
}
