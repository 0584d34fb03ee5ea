use crate::error::Result;
use crate::image::{noise_map, Image};
use crate::metrics::{ssim_map, SsimConfig, SsimWindow};
use crate::scalar::Scalar;

pub const SC_WINDOWS: [usize; 3] = [6, 8, 10];

/// Noise maps are recentred to mid-gray before SSIM.
const NOISE_OFFSET: f64 = 128.0;
/// Map variances at or below this are treated as constant maps.
const DEGENERATE_VAR: f64 = 1e-18;

/// Pearson correlation; `None` when either side has (numerically) zero variance.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa / n <= DEGENERATE_VAR || sbb / n <= DEGENERATE_VAR {
        return None;
    }
    Some((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Negative correlation between SSIM(denoised, noisy) and
/// SSIM(noise map + 128, noisy), for uniform windows of 6, 8 and 10.
pub fn feature_sc<T: Scalar>(noisy: &Image<T>, denoised: &Image<T>) -> Result<[f64; 3]> {
    noisy.require_gray("feature_sc")?;
    let shifted = noise_map(noisy, denoised)?.map(|v| v + T::of(NOISE_OFFSET)).clamped();
    let mut out = [0.0; 3];
    for (o, &k) in out.iter_mut().zip(&SC_WINDOWS) {
        let cfg = SsimConfig::with_window(SsimWindow::Uniform(k));
        let a: Vec<f64> = ssim_map(denoised, noisy, &cfg)?.values.iter().map(|v| v.f64()).collect();
        let b: Vec<f64> = ssim_map(&shifted, noisy, &cfg)?.values.iter().map(|v| v.f64()).collect();
        *o = pearson(&a, &b).map_or(0.0, |r| -r);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::add_gaussian;

    /// Two-pass sliding-window reference: direct window sums, then Pearson.
    fn sc_oracle(noisy: &Image, denoised: &Image, k: usize) -> f64 {
        let (w, h) = (noisy.width(), noisy.height());
        let c1 = (0.01f64 * 255.0).powi(2);
        let c2 = (0.03f64 * 255.0).powi(2);
        let nm: Vec<f64> = denoised
            .data()
            .iter()
            .zip(noisy.data())
            .map(|(d, n)| (d - n + 128.0).clamp(0.0, 255.0))
            .collect();
        let map = |a: &[f64], b: &[f64]| {
            let mut out = Vec::new();
            for y in 0..=h - k {
                for x in 0..=w - k {
                    let n = (k * k) as f64;
                    let (mut sa, mut sb) = (0.0, 0.0);
                    for j in 0..k {
                        for i in 0..k {
                            sa += a[(y + j) * w + x + i];
                            sb += b[(y + j) * w + x + i];
                        }
                    }
                    let (ma, mb) = (sa / n, sb / n);
                    let (mut vaa, mut vbb, mut vab) = (0.0, 0.0, 0.0);
                    for j in 0..k {
                        for i in 0..k {
                            let da = a[(y + j) * w + x + i] - ma;
                            let db = b[(y + j) * w + x + i] - mb;
                            vaa += da * da;
                            vbb += db * db;
                            vab += da * db;
                        }
                    }
                    let (vaa, vbb, vab) = (vaa / n, vbb / n, vab / n);
                    out.push((2.0 * ma * mb + c1) * (2.0 * vab + c2) / ((ma * ma + mb * mb + c1) * (vaa + vbb + c2)));
                }
            }
            out
        };
        let a = map(denoised.data(), noisy.data());
        let b = map(&nm, noisy.data());
        let n = a.len() as f64;
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / n;
        let cov: f64 = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        -cov / (va.sqrt() * vb.sqrt())
    }

    #[test]
    fn matches_two_pass_oracle() {
        let clean = Image::from_fn(12, 12, |x, y| if x < 6 { 60.0 } else { 150.0 + (y * 4) as f64 });
        let noisy = add_gaussian(&clean, 12.0, 4).unwrap();
        let den = crate::denoise::gaussian_filter(&noisy, 1.0).unwrap();
        let got = feature_sc(&noisy, &den).unwrap();
        for (g, &k) in got.iter().zip(&SC_WINDOWS) {
            let want = sc_oracle(&noisy, &den, k);
            assert!((g - want).abs() < 1e-9, "k={k}: {g} vs {want}");
        }
    }

    #[test]
    fn identity_is_degenerate() {
        let noisy = add_gaussian(&Image::filled(16, 16, 1, 100.0), 10.0, 1).unwrap();
        assert_eq!(feature_sc(&noisy, &noisy).unwrap(), [0.0; 3]);
    }
}
