//! The 19-dimensional denoising-quality feature vector.
//!
//! Six families, in canonical order:
//!
//! | family | columns | what it measures |
//! |--------|---------|------------------|
//! | SS  | `ss_97 ss_98 ss_99` | patch self-similarity (singular-value mass) |
//! | SR  | `sr_1 sr_2 sr_3` | structure leaked into the noise map |
//! | SGM | `sgm_40 sgm_50 sgm_60` | spread of the smallest gradient magnitudes |
//! | SC  | `sc_6 sc_8 sc_10` | anti-correlation of two SSIM maps |
//! | VR  | `vr_1 .. vr_6` | variational energy of the result |
//! | GH  | `gh` | distance to an estimated clean gradient histogram |
//!
//! Every feature is a deterministic function of the (noisy, denoised) pair.

mod gh;
mod sc;
mod sgm;
mod sr;
mod ss;
mod vr;

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

pub use gh::{feature_gh, gradient_histogram, target_gradient_histogram, GH_BINS};
pub use sc::{feature_sc, pearson, SC_WINDOWS};
pub use sgm::{feature_sgm, SGM_PERCENTS};
pub use sr::{feature_sr, SrParams, SR_PRESETS};
pub use ss::{feature_ss, SS_ALPHAS, SS_PATCH};
pub use vr::{feature_vr, Norm, VrConfig, VR_PRESETS};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::scalar::Scalar;

pub const FEATURE_COUNT: usize = 19;

pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "ss_97", "ss_98", "ss_99", "sr_1", "sr_2", "sr_3", "sgm_40", "sgm_50", "sgm_60", "sc_6", "sc_8", "sc_10", "vr_1",
    "vr_2", "vr_3", "vr_4", "vr_5", "vr_6", "gh",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    Ss,
    Sr,
    Sgm,
    Sc,
    Vr,
    Gh,
}

impl Family {
    pub const ALL: [Family; 6] = [Family::Ss, Family::Sr, Family::Sgm, Family::Sc, Family::Vr, Family::Gh];

    /// Column range of this family inside the feature vector.
    pub fn columns(self) -> Range<usize> {
        match self {
            Family::Ss => 0..3,
            Family::Sr => 3..6,
            Family::Sgm => 6..9,
            Family::Sc => 9..12,
            Family::Vr => 12..18,
            Family::Gh => 18..19,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::Ss => "ss",
            Family::Sr => "sr",
            Family::Sgm => "sgm",
            Family::Sc => "sc",
            Family::Vr => "vr",
            Family::Gh => "gh",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown feature family {s:?}")))
    }
}

/// Feature values in canonical column order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector(pub [f64; FEATURE_COUNT]);

impl FeatureVector {
    pub fn from_slice(v: &[f64]) -> Result<Self> {
        let arr: [f64; FEATURE_COUNT] = v
            .try_into()
            .map_err(|_| Error::invalid(format!("feature vector needs {FEATURE_COUNT} values, got {}", v.len())))?;
        Ok(Self(arr))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn family(&self, f: Family) -> &[f64] {
        &self.0[f.columns()]
    }

    pub fn ss(&self) -> &[f64] {
        self.family(Family::Ss)
    }

    pub fn sr(&self) -> &[f64] {
        self.family(Family::Sr)
    }

    pub fn sgm(&self) -> &[f64] {
        self.family(Family::Sgm)
    }

    pub fn sc(&self) -> &[f64] {
        self.family(Family::Sc)
    }

    pub fn vr(&self) -> &[f64] {
        self.family(Family::Vr)
    }

    pub fn gh(&self) -> f64 {
        self.0[18]
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

fn gray_features<T: Scalar>(noisy: &Image<T>, denoised: &Image<T>) -> Result<[f64; FEATURE_COUNT]> {
    let mut out = [0.0; FEATURE_COUNT];
    out[Family::Ss.columns()].copy_from_slice(&feature_ss(denoised)?);
    out[Family::Sr.columns()].copy_from_slice(&feature_sr(noisy, denoised)?);
    out[Family::Sgm.columns()].copy_from_slice(&feature_sgm(denoised)?);
    out[Family::Sc.columns()].copy_from_slice(&feature_sc(noisy, denoised)?);
    out[Family::Vr.columns()].copy_from_slice(&feature_vr(noisy, denoised)?);
    out[18] = feature_gh(noisy, denoised)?;
    Ok(out)
}

/// Feature vector of a (noisy, denoised) pair. Color pairs are assessed per
/// channel and the three vectors averaged.
pub fn extract_features<T: Scalar>(noisy: &Image<T>, denoised: &Image<T>) -> Result<FeatureVector> {
    noisy.check_same_shape(denoised)?;
    let channels = noisy.channels();
    let mut acc = [0.0; FEATURE_COUNT];
    for c in 0..channels {
        let v = if channels == 1 {
            gray_features(noisy, denoised)?
        } else {
            gray_features(&noisy.channel(c), &denoised.channel(c))?
        };
        for (a, x) in acc.iter_mut().zip(v) {
            *a += x;
        }
    }
    if channels > 1 {
        for a in &mut acc {
            *a /= channels as f64;
        }
    }
    Ok(FeatureVector(acc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::add_gaussian;

    #[test]
    fn family_columns_tile_the_vector() {
        let mut covered = vec![false; FEATURE_COUNT];
        for f in Family::ALL {
            for i in f.columns() {
                assert!(!covered[i]);
                covered[i] = true;
                assert!(FEATURE_NAMES[i].starts_with(f.name()));
            }
        }
        assert!(covered.iter().all(|&c| c));
    }

    #[test]
    fn identity_pair_zero_pattern() {
        let clean = Image::from_fn(40, 40, |x, y| 100.0 + 50.0 * ((x as f64) / 5.0).sin() + (y as f64));
        let noisy = add_gaussian(&clean, 10.0, 2).unwrap();
        let f = extract_features(&noisy, &noisy).unwrap();
        assert_eq!(f.sr(), &[0.0, 0.0, 0.0]);
        assert_eq!(f.sc(), &[0.0, 0.0, 0.0]);
        let vr = f.vr();
        // data terms vanish: λ=1 is exactly twice λ=0.5 for each norm pair
        for pair in vr.chunks(2) {
            assert!((pair[1] - 2.0 * pair[0]).abs() < 1e-9 * pair[1].abs().max(1.0));
        }
        assert!(f.is_finite());
    }

    #[test]
    fn replicated_gray_matches_gray() {
        let clean = Image::from_fn(32, 32, |x, y| ((x * 9 + y * 5) % 200) as f64 + 20.0);
        let noisy = add_gaussian(&clean, 15.0, 3).unwrap();
        let den = crate::denoise::gaussian_filter(&noisy, 1.0).unwrap();
        let rgb = |g: &Image| Image::from_planes(&[g.clone(), g.clone(), g.clone()]).unwrap();
        let a = extract_features(&noisy, &den).unwrap();
        let b = extract_features(&rgb(&noisy), &rgb(&den)).unwrap();
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
        }
    }

    #[test]
    fn vector_parsing() {
        assert!(FeatureVector::from_slice(&[0.0; 18]).is_err());
        let v = FeatureVector::from_slice(&[1.0; 19]).unwrap();
        assert_eq!(v.gh(), 1.0);
        assert_eq!("sgm".parse::<Family>().unwrap(), Family::Sgm);
    }
}
