//! Non-local means with the noise-offset weight
//! `exp(-max(d^2 / n - 2 sigma^2, 0) / h^2)`.
//!
//! Distances are accumulated per search offset over the whole image and box
//! summed, so the cost is O(pixels * search window) rather than
//! O(pixels * search window * patch size).

use crate::error::{Error, Result};
use crate::image::{reflect, Image};
use crate::noise::estimate_noise_sigma;
use crate::scalar::Scalar;

/// Parameters of one NLM run. `sigma` is the noise level used in the weight
/// offset; [`nlm`] estimates it from the input.
#[derive(Debug, Clone, Copy)]
pub struct NlmParams {
    pub h: f64,
    pub patch_radius: usize,
    pub search_radius: usize,
    pub sigma: f64,
}

pub fn nlm<T: Scalar>(img: &Image<T>, h: f64, patch_radius: usize, search_radius: usize) -> Result<Image<T>> {
    img.per_channel(|p| {
        let sigma = estimate_noise_sigma(p)?;
        nlm_plane(
            p,
            &NlmParams {
                h,
                patch_radius,
                search_radius,
                sigma,
            },
        )
    })
}

pub fn nlm_with<T: Scalar>(img: &Image<T>, params: &NlmParams) -> Result<Image<T>> {
    img.per_channel(|p| nlm_plane(p, params))
}

struct Padded {
    data: Vec<f64>,
    stride: usize,
    pad: usize,
}

impl Padded {
    fn new<T: Scalar>(img: &Image<T>, pad: usize) -> Self {
        let (w, h) = (img.width(), img.height());
        let stride = w + 2 * pad;
        let mut data = Vec::with_capacity(stride * (h + 2 * pad));
        for y in 0..h + 2 * pad {
            let sy = reflect(y as isize - pad as isize, h);
            for x in 0..stride {
                let sx = reflect(x as isize - pad as isize, w);
                data.push(img.get(sx, sy, 0).f64());
            }
        }
        Self { data, stride, pad }
    }

    /// Sample at image coordinates, which may lie up to `pad` outside.
    #[inline]
    fn at(&self, x: isize, y: isize) -> f64 {
        let p = self.pad as isize;
        self.data[((y + p) as usize) * self.stride + (x + p) as usize]
    }
}

fn nlm_plane<T: Scalar>(img: &Image<T>, params: &NlmParams) -> Result<Image<T>> {
    if !(params.h > 0.0) || params.patch_radius == 0 || params.search_radius == 0 {
        return Err(Error::invalid("nlm needs h > 0 and radii >= 1"));
    }
    let (w, h) = (img.width(), img.height());
    let pr = params.patch_radius as isize;
    let sr = params.search_radius as isize;
    let padded = Padded::new(img, (pr + sr) as usize);
    let n_patch = ((2 * pr + 1) * (2 * pr + 1)) as f64;
    let offset = 2.0 * params.sigma * params.sigma;
    let inv_h2 = 1.0 / (params.h * params.h);

    // squared differences over the patch-extended grid, then box sums
    let ew = w + 2 * pr as usize;
    let eh = h + 2 * pr as usize;
    let mut diff = vec![0.0; ew * eh];
    let mut row_sum = vec![0.0; w * eh];
    let mut sum_w = vec![0.0; w * h];
    let mut sum_wv = vec![0.0; w * h];
    let mut max_w = vec![0.0f64; w * h];

    for oy in -sr..=sr {
        for ox in -sr..=sr {
            if ox == 0 && oy == 0 {
                continue;
            }
            for ey in 0..eh {
                let y = ey as isize - pr;
                for ex in 0..ew {
                    let x = ex as isize - pr;
                    let d = padded.at(x, y) - padded.at(x + ox, y + oy);
                    diff[ey * ew + ex] = d * d;
                }
            }
            let win = (2 * pr + 1) as usize;
            for ey in 0..eh {
                let row = &diff[ey * ew..(ey + 1) * ew];
                let mut acc: f64 = row[..win].iter().sum();
                row_sum[ey * w] = acc;
                for x in 1..w {
                    acc += row[x + win - 1] - row[x - 1];
                    row_sum[ey * w + x] = acc;
                }
            }
            for x in 0..w {
                let mut acc: f64 = (0..win).map(|k| row_sum[k * w + x]).sum();
                for y in 0..h {
                    if y > 0 {
                        acc += row_sum[(y + win - 1) * w + x] - row_sum[(y - 1) * w + x];
                    }
                    let dist = (acc / n_patch - offset).max(0.0);
                    let wgt = (-dist * inv_h2).exp();
                    let i = y * w + x;
                    sum_w[i] += wgt;
                    sum_wv[i] += wgt * padded.at(x as isize + ox, y as isize + oy);
                    if wgt > max_w[i] {
                        max_w[i] = wgt;
                    }
                }
            }
        }
    }

    let src = img.data();
    let mut out = Vec::with_capacity(w * h);
    for i in 0..w * h {
        let self_w = max_w[i];
        let total = sum_w[i] + self_w;
        let v = if total > 0.0 {
            (sum_wv[i] + self_w * src[i].f64()) / total
        } else {
            src[i].f64()
        };
        out.push(T::of(v));
    }
    Ok(img.with_data(out).clamped())
}

/// Normalized weight every search-window pixel gives to the center `(x, y)`,
/// row-major over the window. Exposed for inspection in tests and tooling.
pub fn nlm_weights<T: Scalar>(img: &Image<T>, x: usize, y: usize, params: &NlmParams) -> Vec<f64> {
    let pr = params.patch_radius as isize;
    let sr = params.search_radius as isize;
    let padded = Padded::new(img, (pr + sr) as usize);
    let n_patch = ((2 * pr + 1) * (2 * pr + 1)) as f64;
    let (x, y) = (x as isize, y as isize);
    let mut weights = Vec::new();
    let mut self_index = 0;
    for oy in -sr..=sr {
        for ox in -sr..=sr {
            if ox == 0 && oy == 0 {
                self_index = weights.len();
                weights.push(0.0);
                continue;
            }
            let mut d2 = 0.0;
            for py in -pr..=pr {
                for px in -pr..=pr {
                    let d = padded.at(x + px, y + py) - padded.at(x + ox + px, y + oy + py);
                    d2 += d * d;
                }
            }
            let dist = (d2 / n_patch - 2.0 * params.sigma * params.sigma).max(0.0);
            weights.push((-dist / (params.h * params.h)).exp());
        }
    }
    weights[self_index] = weights.iter().copied().fold(0.0, f64::max);
    let total: f64 = weights.iter().sum();
    weights.iter().map(|w| w / total).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_image_unchanged() {
        let c: Image = Image::filled(17, 12, 1, 42.0);
        let out = nlm(&c, 5.0, 2, 4).unwrap();
        assert!(out.data().iter().all(|&v| (v - 42.0).abs() < 1e-9));
    }

    #[test]
    fn matches_direct_weight_evaluation() {
        let img = Image::from_fn(14, 11, |x, y| ((x * 53 + y * 29) % 97) as f64);
        let params = NlmParams {
            h: 20.0,
            patch_radius: 1,
            search_radius: 3,
            sigma: 4.0,
        };
        let out = nlm_with(&img, &params).unwrap();
        for &(x, y) in &[(0usize, 0usize), (5, 5), (13, 10), (7, 2)] {
            let wts = nlm_weights(&img, x, y, &params);
            let mut k = 0;
            let mut v = 0.0;
            for oy in -3isize..=3 {
                for ox in -3isize..=3 {
                    let sx = reflect(x as isize + ox, 14);
                    let sy = reflect(y as isize + oy, 11);
                    v += wts[k] * img.get(sx, sy, 0);
                    k += 1;
                }
            }
            assert!((out.get(x, y, 0) - v).abs() < 1e-9);
        }
    }

    #[test]
    fn weights_follow_matching_texture() {
        // left and right thirds share a stripe texture; the middle is a
        // different texture; the search window spans all three
        let img = Image::from_fn(30, 12, |x, y| {
            if (10..20).contains(&x) {
                if (x + y) % 2 == 0 { 200.0 } else { 40.0 }
            } else if y % 3 == 0 {
                220.0
            } else {
                30.0
            }
        });
        let params = NlmParams {
            h: 30.0,
            patch_radius: 1,
            search_radius: 12,
            sigma: 0.0,
        };
        let (cx, cy) = (4usize, 6usize);
        let wts = nlm_weights(&img, cx, cy, &params);
        let side = 25;
        let (mut matching, mut other) = (0.0, 0.0);
        for (k, w) in wts.iter().enumerate() {
            let x = cx as isize + (k % side) as isize - 12;
            if (10..20).contains(&x) {
                other += w;
            } else {
                matching += w;
            }
        }
        assert!(matching > 10.0 * other, "{matching} vs {other}");
    }

    #[test]
    fn rejects_bad_parameters() {
        let c = Image::filled(8, 8, 1, 1.0);
        assert!(nlm(&c, 0.0, 2, 4).is_err());
        assert!(nlm(&c, 1.0, 0, 4).is_err());
    }
}
