//! The denoiser pool and its parameter grids.
//!
//! | method           | grid (3-5 settings, weakest first)          | tunable θ          |
//! |------------------|---------------------------------------------|--------------------|
//! | `gaussian_filter`| σ ∈ {0.8, 1.5, 2.5}                         | σ ∈ [0.3, 5]       |
//! | `bilateral`      | (σs, σr) ∈ {(1.5,20),(2,35),(2.5,50),(3,80)} | σr ∈ [5, 100], σs=2 |
//! | `median`         | r ∈ {1, 2, 3}                               | –                  |
//! | `nlm`            | h ∈ {0.6, 1.0, 1.4, 1.8}·σ̂, patch 2, search 7 | h/σ̂ ∈ [0.2, 3]    |
//! | `dct`            | τ ∈ {2, 3, 4}·σ̂                             | τ/σ̂ ∈ [0.5, 5]    |
//!
//! σ̂ is the MAD noise estimate of the channel being filtered, floored at
//! [`SIGMA_FLOOR`].

mod dct;
mod filters;
mod nlm;

use std::fmt;
use std::str::FromStr;

pub use dct::dct_denoise;
pub use filters::{bilateral_filter, gaussian_filter, gaussian_kernel, median_filter};
pub use nlm::{nlm, nlm_weights, nlm_with, NlmParams};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::noise::estimate_noise_sigma;
use crate::scalar::Scalar;

pub const SIGMA_FLOOR: f64 = 0.5;
pub const NLM_PATCH_RADIUS: usize = 2;
pub const NLM_SEARCH_RADIUS: usize = 7;
pub const BILATERAL_TUNE_SIGMA_S: f64 = 2.0;

const GAUSSIAN_GRID: [f64; 3] = [0.8, 1.5, 2.5];
const BILATERAL_GRID: [(f64, f64); 4] = [(1.5, 20.0), (2.0, 35.0), (2.5, 50.0), (3.0, 80.0)];
const MEDIAN_GRID: [usize; 3] = [1, 2, 3];
const NLM_GRID: [f64; 4] = [0.6, 1.0, 1.4, 1.8];
const DCT_GRID: [f64; 3] = [2.0, 3.0, 4.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    GaussianFilter,
    Bilateral,
    Median,
    Nlm,
    Dct,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::GaussianFilter,
        Method::Bilateral,
        Method::Median,
        Method::Nlm,
        Method::Dct,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::GaussianFilter => "gaussian_filter",
            Method::Bilateral => "bilateral",
            Method::Median => "median",
            Method::Nlm => "nlm",
            Method::Dct => "dct",
        }
    }

    pub fn grid_len(self) -> usize {
        match self {
            Method::GaussianFilter => GAUSSIAN_GRID.len(),
            Method::Bilateral => BILATERAL_GRID.len(),
            Method::Median => MEDIAN_GRID.len(),
            Method::Nlm => NLM_GRID.len(),
            Method::Dct => DCT_GRID.len(),
        }
    }

    /// Bounds of the continuous tuning parameter, if the method has one.
    pub fn theta_bounds(self) -> Option<(f64, f64)> {
        match self {
            Method::GaussianFilter => Some((0.3, 5.0)),
            Method::Bilateral => Some((5.0, 100.0)),
            Method::Median => None,
            Method::Nlm => Some((0.2, 3.0)),
            Method::Dct => Some((0.5, 5.0)),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown denoising method {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Param {
    Index(usize),
    Theta(f64),
}

/// A denoiser plus one parameter setting, serialized as `method:index` or
/// `method:theta=<float>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenoiserId {
    pub method: Method,
    pub param: Param,
}

impl DenoiserId {
    pub fn grid(method: Method, index: usize) -> Self {
        Self {
            method,
            param: Param::Index(index),
        }
    }

    pub fn theta(method: Method, theta: f64) -> Self {
        Self {
            method,
            param: Param::Theta(theta),
        }
    }

    /// The full 17-entry pool, in method then grid order.
    pub fn pool() -> Vec<DenoiserId> {
        Method::ALL
            .into_iter()
            .flat_map(|m| (0..m.grid_len()).map(move |i| DenoiserId::grid(m, i)))
            .collect()
    }

    pub fn param_string(&self) -> String {
        match self.param {
            Param::Index(i) => i.to_string(),
            Param::Theta(t) => format!("theta={t}"),
        }
    }

    pub fn parse_parts(method: &str, param: &str) -> Result<Self> {
        let method: Method = method.parse()?;
        let param = if let Some(t) = param.strip_prefix("theta=") {
            Param::Theta(
                t.parse()
                    .map_err(|_| Error::invalid(format!("bad theta {t:?}")))?,
            )
        } else {
            Param::Index(
                param
                    .parse()
                    .map_err(|_| Error::invalid(format!("bad grid index {param:?}")))?,
            )
        };
        Ok(Self { method, param })
    }

    pub fn validate(&self) -> Result<()> {
        match self.param {
            Param::Index(i) if i >= self.method.grid_len() => Err(Error::invalid(format!(
                "{} has {} grid settings, index {i} requested",
                self.method,
                self.method.grid_len()
            ))),
            Param::Index(_) => Ok(()),
            Param::Theta(t) => match self.method.theta_bounds() {
                None => Err(Error::invalid(format!("{} has no continuous parameter", self.method))),
                Some((lo, hi)) if !(t >= lo && t <= hi) => Err(Error::invalid(format!(
                    "theta {t} outside [{lo}, {hi}] for {}",
                    self.method
                ))),
                Some(_) => Ok(()),
            },
        }
    }
}

impl fmt::Display for DenoiserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.method, self.param_string())
    }
}

impl FromStr for DenoiserId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (m, p) = s
            .split_once(':')
            .ok_or_else(|| Error::invalid(format!("denoiser id {s:?} is not method:param")))?;
        DenoiserId::parse_parts(m, p)
    }
}

fn sigma_hat<T: Scalar>(plane: &Image<T>) -> Result<f64> {
    Ok(estimate_noise_sigma(plane)?.max(SIGMA_FLOOR))
}

fn denoise_plane<T: Scalar>(plane: &Image<T>, id: &DenoiserId) -> Result<Image<T>> {
    use Param::{Index, Theta};
    match (id.method, id.param) {
        (Method::GaussianFilter, Index(i)) => gaussian_filter(plane, GAUSSIAN_GRID[i]),
        (Method::GaussianFilter, Theta(t)) => gaussian_filter(plane, t),
        (Method::Bilateral, Index(i)) => {
            let (s, r) = BILATERAL_GRID[i];
            bilateral_filter(plane, s, r)
        }
        (Method::Bilateral, Theta(t)) => bilateral_filter(plane, BILATERAL_TUNE_SIGMA_S, t),
        (Method::Median, Index(i)) => median_filter(plane, MEDIAN_GRID[i]),
        (Method::Median, Theta(_)) => unreachable!("rejected by validate"),
        (Method::Nlm, p) => {
            let sigma = sigma_hat(plane)?;
            let mult = match p {
                Index(i) => NLM_GRID[i],
                Theta(t) => t,
            };
            nlm_with(
                plane,
                &NlmParams {
                    h: mult * sigma,
                    patch_radius: NLM_PATCH_RADIUS,
                    search_radius: NLM_SEARCH_RADIUS,
                    sigma,
                },
            )
        }
        (Method::Dct, p) => {
            let mult = match p {
                Index(i) => DCT_GRID[i],
                Theta(t) => t,
            };
            dct_denoise(plane, mult * sigma_hat(plane)?)
        }
    }
}

/// Runs the denoiser named by `id`; color images are processed per channel.
pub fn denoise<T: Scalar>(img: &Image<T>, id: &DenoiserId) -> Result<Image<T>> {
    id.validate()?;
    img.per_channel(|plane| denoise_plane(plane, id))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::psnr;
    use crate::noise::add_gaussian;

    #[test]
    fn pool_has_seventeen_settings() {
        let pool = DenoiserId::pool();
        assert_eq!(pool.len(), 17);
        assert_eq!(pool[0].to_string(), "gaussian_filter:0");
        for id in &pool {
            assert_eq!(&id.to_string().parse::<DenoiserId>().unwrap(), id);
        }
        let t: DenoiserId = "nlm:theta=1.25".parse().unwrap();
        assert_eq!(t, DenoiserId::theta(Method::Nlm, 1.25));
    }

    #[test]
    fn dispatch_matches_direct_calls() {
        let img = Image::from_fn(20, 20, |x, y| ((x * 13 + y * 7) % 90) as f64 + 50.0);
        let a = denoise(&img, &DenoiserId::grid(Method::GaussianFilter, 0)).unwrap();
        assert_eq!(a, gaussian_filter(&img, 0.8).unwrap());

        let sigma = estimate_noise_sigma(&img).unwrap().max(SIGMA_FLOOR);
        let b = denoise(&img, &DenoiserId::theta(Method::Nlm, 1.3)).unwrap();
        let direct = nlm_with(
            &img,
            &NlmParams {
                h: 1.3 * sigma,
                patch_radius: 2,
                search_radius: 7,
                sigma,
            },
        )
        .unwrap();
        assert_eq!(b, direct);
    }

    #[test]
    fn invalid_ids_are_rejected() {
        let img = Image::filled(16, 16, 1, 3.0);
        assert!(denoise(&img, &DenoiserId::grid(Method::Median, 3)).is_err());
        assert!(denoise(&img, &DenoiserId::theta(Method::Median, 1.0)).is_err());
        assert!(denoise(&img, &DenoiserId::theta(Method::Nlm, 3.5)).is_err());
        assert!("wiener:0".parse::<DenoiserId>().is_err());
    }

    #[test]
    fn every_setting_fixes_constants_and_stays_in_range() {
        let c: Image = Image::filled(24, 24, 1, 128.0);
        let noisy = add_gaussian(&c, 40.0, 1).unwrap();
        for id in DenoiserId::pool() {
            let out = denoise(&c, &id).unwrap();
            assert!(out.data().iter().all(|&v| (v - 128.0).abs() < 1e-6), "{id}");
            let out = denoise(&noisy, &id).unwrap();
            assert!(out.data().iter().all(|&v| (0.0..=255.0).contains(&v)), "{id}");
        }
    }

    #[test]
    fn color_images_are_filtered_per_channel() {
        let r = Image::from_fn(16, 16, |x, _| (x * 10) as f64);
        let g = Image::from_fn(16, 16, |_, y| (y * 10) as f64);
        let rgb = Image::from_planes(&[r.clone(), g.clone(), r.clone()]).unwrap();
        let id = DenoiserId::grid(Method::Dct, 1);
        let out = denoise(&rgb, &id).unwrap();
        assert_eq!(out.channel(1), denoise(&g, &id).unwrap());
    }

    #[test]
    fn each_method_improves_awgn_for_some_setting() {
        let clean = Image::from_fn(64, 64, |x, y| {
            let base = if (x / 16 + y / 16) % 2 == 0 { 70.0 } else { 180.0 };
            base + 20.0 * ((x as f64) / 9.0).sin()
        });
        let noisy = add_gaussian(&clean, 20.0, 5).unwrap();
        let before = psnr(&noisy, &clean).unwrap();
        for m in Method::ALL {
            let best = (0..m.grid_len())
                .map(|i| psnr(&denoise(&noisy, &DenoiserId::grid(m, i)).unwrap(), &clean).unwrap())
                .fold(f64::MIN, f64::max);
            assert!(best > before, "{m}: {best} <= {before}");
        }
    }
}
