//! Seeded synthetic corruption: additive Gaussian, scaled Poisson and
//! salt & pepper noise, plus a robust noise-level estimator.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::image::Image;
use crate::rng::stream;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NoiseKind {
    Gaussian,
    Poisson,
    SaltPepper,
}

impl NoiseKind {
    pub const ALL: [NoiseKind; 3] = [NoiseKind::Gaussian, NoiseKind::Poisson, NoiseKind::SaltPepper];

    pub fn name(self) -> &'static str {
        match self {
            NoiseKind::Gaussian => "gaussian",
            NoiseKind::Poisson => "poisson",
            NoiseKind::SaltPepper => "salt_pepper",
        }
    }

    /// The three benchmark levels: sigma, Poisson scale k, impulse density d.
    pub fn benchmark_levels(self) -> [f64; 3] {
        match self {
            NoiseKind::Gaussian => [10.0, 20.0, 30.0],
            NoiseKind::Poisson => [0.05, 0.10, 0.15],
            NoiseKind::SaltPepper => [0.1, 0.2, 0.3],
        }
    }

    /// Intermediate levels never seen in training, for the generalization study.
    pub fn holdout_levels(self) -> [f64; 2] {
        match self {
            NoiseKind::Gaussian => [15.0, 25.0],
            NoiseKind::Poisson => [0.075, 0.125],
            NoiseKind::SaltPepper => [0.15, 0.25],
        }
    }
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(NoiseKind::Gaussian),
            "poisson" => Ok(NoiseKind::Poisson),
            "salt_pepper" => Ok(NoiseKind::SaltPepper),
            _ => Err(Error::invalid(format!("unknown noise kind {s:?}"))),
        }
    }
}

/// A fully specified corruption, serialized as `kind:level:seed`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub level: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(kind: NoiseKind, level: f64, seed: u64) -> Result<Self> {
        let ok = match kind {
            NoiseKind::Gaussian | NoiseKind::Poisson => level > 0.0 && level.is_finite(),
            NoiseKind::SaltPepper => level > 0.0 && level < 1.0,
        };
        if !ok {
            return Err(Error::invalid(format!("{kind} level {level} out of range")));
        }
        Ok(Self { kind, level, seed })
    }

    pub fn apply<T: Scalar>(&self, img: &Image<T>) -> Result<Image<T>> {
        match self.kind {
            NoiseKind::Gaussian => add_gaussian(img, self.level, self.seed),
            NoiseKind::Poisson => add_poisson(img, self.level, self.seed),
            NoiseKind::SaltPepper => add_salt_pepper(img, self.level, self.seed),
        }
    }
}

impl fmt::Display for NoiseSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.kind, self.level, self.seed)
    }
}

impl FromStr for NoiseSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut it = s.split(':');
        let (Some(kind), Some(level), Some(seed), None) = (it.next(), it.next(), it.next(), it.next()) else {
            return Err(Error::invalid(format!("noise spec {s:?} is not kind:level:seed")));
        };
        let level = level
            .parse()
            .map_err(|_| Error::invalid(format!("bad noise level {level:?}")))?;
        let seed = seed
            .parse()
            .map_err(|_| Error::invalid(format!("bad noise seed {seed:?}")))?;
        NoiseSpec::new(kind.parse()?, level, seed)
    }
}

pub fn add_gaussian<T: Scalar>(img: &Image<T>, sigma: f64, seed: u64) -> Result<Image<T>> {
    if !(sigma > 0.0) {
        return Err(Error::invalid("gaussian sigma must be > 0"));
    }
    let mut rng = stream(seed);
    let data = img
        .data()
        .iter()
        .map(|&v| {
            let z: f64 = rng.sample(StandardNormal);
            T::of(v.f64() + sigma * z)
        })
        .collect();
    Ok(img.with_data(data).clamped())
}

/// `k * Poisson(x / k)` per sample.
pub fn add_poisson<T: Scalar>(img: &Image<T>, k: f64, seed: u64) -> Result<Image<T>> {
    if !(k > 0.0) {
        return Err(Error::invalid("poisson scale must be > 0"));
    }
    if img.data().iter().any(|v| *v < T::zero()) {
        return Err(Error::invalid("poisson noise needs non-negative samples"));
    }
    let mut rng = stream(seed);
    let data = img
        .data()
        .iter()
        .map(|&v| T::of(k * sample_poisson(&mut rng, v.f64() / k) as f64))
        .collect();
    Ok(img.with_data(data).clamped())
}

/// Each pixel is hit with probability `d`; a hit pixel becomes 0 or 255 in
/// every channel with equal odds.
pub fn add_salt_pepper<T: Scalar>(img: &Image<T>, d: f64, seed: u64) -> Result<Image<T>> {
    if !(d > 0.0 && d < 1.0) {
        return Err(Error::invalid("salt & pepper density must be in (0, 1)"));
    }
    let mut rng = stream(seed);
    let mut out = img.clone();
    let n = img.pixels();
    for i in 0..n {
        if rng.random::<f64>() < d {
            let v = if rng.random::<bool>() { T::of(255.0) } else { T::zero() };
            for c in 0..img.channels() {
                out.data_mut()[c * n + i] = v;
            }
        }
    }
    Ok(out)
}

const INVERSION_LIMIT: f64 = 30.0;

/// Poisson variate: sequential inversion below rate 30, Hörmann's
/// transformed rejection (PTRS) above.
pub fn sample_poisson<R: Rng + ?Sized>(rng: &mut R, lambda: f64) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    if lambda < INVERSION_LIMIT {
        let mut p = (-lambda).exp();
        let mut cdf = p;
        let u: f64 = rng.random();
        let mut x = 0u64;
        while u > cdf {
            x += 1;
            p *= lambda / x as f64;
            cdf += p;
            if p == 0.0 && cdf < u {
                // round-off tail; u is beyond representable mass
                break;
            }
        }
        return x;
    }
    let slam = lambda.sqrt();
    let loglam = lambda.ln();
    let b = 0.931 + 2.53 * slam;
    let a = -0.059 + 0.02483 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let vr = 0.9277 - 3.6224 / (b - 2.0);
    loop {
        let u = rng.random::<f64>() - 0.5;
        let v: f64 = rng.random();
        let us = 0.5 - u.abs();
        let k = ((2.0 * a / us + b) * u + lambda + 0.43).floor();
        if us >= 0.07 && v <= vr {
            return k as u64;
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        if v.ln() + inv_alpha.ln() - (a / (us * us) + b).ln() <= -lambda + k * loglam - ln_factorial(k as u64) {
            return k as u64;
        }
    }
}

fn ln_factorial(k: u64) -> f64 {
    if k < 16 {
        return (2..=k).map(|i| (i as f64).ln()).sum();
    }
    // Stirling series for ln Γ(k + 1)
    let x = k as f64 + 1.0;
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    (x - 0.5) * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI).ln()
        + inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 / 1680.0)))
}

/// MAD estimate of additive noise sigma from horizontal first differences:
/// `median(|dx|) / (0.6745 * sqrt 2)`. Zero for a flat image.
pub fn estimate_noise_sigma<T: Scalar>(img: &Image<T>) -> Result<f64> {
    img.require_gray("estimate_noise_sigma")?;
    if img.width() < 2 {
        return Err(Error::invalid("noise estimation needs at least 2 columns"));
    }
    let w = img.width();
    let p = img.data();
    let mut diffs: Vec<f64> = Vec::with_capacity((w - 1) * img.height());
    for row in p.chunks_exact(w) {
        diffs.extend(row.windows(2).map(|d| (d[1] - d[0]).abs().f64()));
    }
    Ok(median(&mut diffs) / (0.6745 * std::f64::consts::SQRT_2))
}

pub(crate) fn median(v: &mut [f64]) -> f64 {
    let n = v.len();
    if n == 0 {
        return 0.0;
    }
    let mid = n / 2;
    let (_, &mut upper, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    if n % 2 == 1 {
        upper
    } else {
        let lower = v[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moments(v: impl Iterator<Item = f64>) -> (f64, f64) {
        let v: Vec<f64> = v.collect();
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, var)
    }

    #[test]
    fn gaussian_moments_and_determinism() {
        let img = Image::filled(256, 256, 1, 128.0);
        let a = add_gaussian(&img, 10.0, 42).unwrap();
        let b = add_gaussian(&img, 10.0, 42).unwrap();
        assert_eq!(a, b);
        let (mean, var) = moments(a.data().iter().map(|v| v - 128.0));
        assert!(mean.abs() < 0.2);
        assert!((var.sqrt() / 10.0 - 1.0).abs() < 0.02);
        assert!(a.data().iter().all(|&v| (0.0..=255.0).contains(&v)));
        assert!(add_gaussian(&img, 0.0, 1).is_err());
    }

    #[test]
    fn poisson_moments() {
        // x = 100, k = 0.1: mean 100, variance k x = 10
        let img = Image::filled(400, 400, 1, 100.0);
        let out = add_poisson(&img, 0.1, 3).unwrap();
        let (mean, var) = moments(out.data().iter().copied());
        assert!((mean - 100.0).abs() / 100.0 < 0.01, "{mean}");
        assert!((var - 10.0).abs() / 10.0 < 0.05, "{var}");
        let zero = add_poisson(&Image::filled(8, 8, 1, 0.0), 0.05, 1).unwrap();
        assert!(zero.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn poisson_sampler_matches_moments_on_both_branches() {
        for lambda in [0.5f64, 4.0, 29.0, 30.0, 100.0, 2550.0] {
            let mut rng = stream(lambda.to_bits());
            let (mean, var) = moments((0..200_000).map(|_| sample_poisson(&mut rng, lambda) as f64));
            assert!((mean - lambda).abs() / lambda < 0.02, "lambda {lambda}: mean {mean}");
            assert!((var - lambda).abs() / lambda < 0.05, "lambda {lambda}: var {var}");
        }
    }

    #[test]
    fn ln_factorial_branches_agree() {
        let direct: f64 = (2..=40u64).map(|i| (i as f64).ln()).sum();
        assert!((ln_factorial(40) - direct).abs() < 1e-10);
    }

    #[test]
    fn salt_pepper_rate_and_values() {
        let img = Image::filled(512, 512, 1, 128.0);
        let out = add_salt_pepper(&img, 0.2, 9).unwrap();
        let n = out.len() as f64;
        let salt = out.data().iter().filter(|&&v| v == 255.0).count() as f64;
        let pepper = out.data().iter().filter(|&&v| v == 0.0).count() as f64;
        let rest = out.data().iter().filter(|&&v| v == 128.0).count() as f64;
        assert_eq!(salt + pepper + rest, n);
        assert!(((salt + pepper) / n - 0.2).abs() < 0.005);
        // 4-sigma binomial bound on the salt share among hits
        let hits = salt + pepper;
        assert!((salt / hits - 0.5).abs() < 4.0 * (0.25 / hits).sqrt());
        assert!(add_salt_pepper(&img, 1.0, 1).is_err());
    }

    #[test]
    fn salt_pepper_hits_all_channels() {
        let img = Image::filled(64, 64, 3, 100.0);
        let out = add_salt_pepper(&img, 0.3, 5).unwrap();
        for i in 0..img.pixels() {
            let (r, g, b) = (out.plane(0)[i], out.plane(1)[i], out.plane(2)[i]);
            assert!(r == g && g == b);
        }
    }

    #[test]
    fn sigma_estimator() {
        assert_eq!(estimate_noise_sigma(&Image::filled(16, 16, 1, 9.0)).unwrap(), 0.0);
        let mut rng = stream(11);
        let field = Image::from_fn(256, 256, |_, _| 10.0 * rng.sample::<f64, _>(StandardNormal));
        let s = estimate_noise_sigma(&field).unwrap();
        assert!((9.0..=11.0).contains(&s), "{s}");
        assert!(estimate_noise_sigma(&Image::filled(1, 4, 1, 0.0)).is_err());
    }

    #[test]
    fn spec_string_round_trip() {
        let s = NoiseSpec::new(NoiseKind::Poisson, 0.05, 77).unwrap();
        assert_eq!(s.to_string(), "poisson:0.05:77");
        assert_eq!(s.to_string().parse::<NoiseSpec>().unwrap(), s);
        assert!("gaussian:-1:3".parse::<NoiseSpec>().is_err());
        assert!("salt_pepper:0.2".parse::<NoiseSpec>().is_err());
    }
}
