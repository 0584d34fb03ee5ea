use crate::error::Result;
use crate::image::{gradient_field, noise_map, Image};
use crate::scalar::Scalar;

/// Standard deviations of the three Gaussian factors of the residual weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SrParams {
    /// spatial distance
    pub sigma_d: f64,
    /// gradient-magnitude (structure) difference
    pub sigma_s: f64,
    /// intensity (color) difference
    pub sigma_c: f64,
}

pub const SR_PRESETS: [SrParams; 3] = [
    SrParams { sigma_d: 1.0, sigma_s: 1.0, sigma_c: 4.0 },
    SrParams { sigma_d: 4.0, sigma_s: 4.0, sigma_c: 10.0 },
    SrParams { sigma_d: 10.0, sigma_s: 10.0, sigma_c: 30.0 },
];

/// Exponents beyond this contribute < 1e-15 of the self weight.
const EXP_CUTOFF: f64 = 35.0;

/// Structural residual for each preset: the noise map `denoised - noisy`
/// is smoothed with weights guided by the noisy image (space, intensity and
/// gradient magnitude), then reduced to its RMS.
pub fn feature_sr<T: Scalar>(noisy: &Image<T>, denoised: &Image<T>) -> Result<[f64; 3]> {
    noisy.require_gray("feature_sr")?;
    let residual = noise_map(noisy, denoised)?;
    let res: Vec<f64> = residual.data().iter().map(|v| v.f64()).collect();
    if res.iter().all(|&v| v == 0.0) {
        return Ok([0.0; 3]);
    }
    let guide: Vec<f64> = noisy.data().iter().map(|v| v.f64()).collect();
    let grad: Vec<f64> = gradient_field(noisy)?.magnitude.iter().map(|v| v.f64()).collect();
    let mut out = [0.0; 3];
    for (o, p) in out.iter_mut().zip(&SR_PRESETS) {
        *o = structural_rms(&res, &guide, &grad, noisy.width(), noisy.height(), p);
    }
    Ok(out)
}

fn structural_rms(res: &[f64], guide: &[f64], grad: &[f64], w: usize, h: usize, p: &SrParams) -> f64 {
    let r = (2.0 * p.sigma_d).ceil() as isize;
    let side = (2 * r + 1) as usize;
    let mut spatial = Vec::with_capacity(side * side);
    for dy in -r..=r {
        for dx in -r..=r {
            spatial.push((dx * dx + dy * dy) as f64 / (2.0 * p.sigma_d * p.sigma_d));
        }
    }
    let ic = 1.0 / (2.0 * p.sigma_c * p.sigma_c);
    let is = 1.0 / (2.0 * p.sigma_s * p.sigma_s);
    let mut sum_sq = 0.0;
    for y in 0..h as isize {
        let y0 = (y - r).max(0);
        let y1 = (y + r).min(h as isize - 1);
        for x in 0..w as isize {
            let x0 = (x - r).max(0);
            let x1 = (x + r).min(w as isize - 1);
            let i = (y as usize) * w + x as usize;
            let (gi, si) = (guide[i], grad[i]);
            let (mut acc, mut norm) = (0.0, 0.0);
            for qy in y0..=y1 {
                let row = (qy as usize) * w;
                let krow = ((qy - y + r) as usize) * side;
                for qx in x0..=x1 {
                    let q = row + qx as usize;
                    let di = guide[q] - gi;
                    let ds = grad[q] - si;
                    let e = spatial[krow + (qx - x + r) as usize] + di * di * ic + ds * ds * is;
                    if e < EXP_CUTOFF {
                        let wgt = (-e).exp();
                        acc += wgt * res[q];
                        norm += wgt;
                    }
                }
            }
            let v = acc / norm;
            sum_sq += v * v;
        }
    }
    (sum_sq / (w * h) as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::add_gaussian;

    #[test]
    fn zero_for_identity_and_shift_invariant() {
        let clean = Image::from_fn(24, 24, |x, y| ((x * 11 + y * 3) % 120) as f64 + 30.0);
        let noisy = add_gaussian(&clean, 10.0, 1).unwrap();
        assert_eq!(feature_sr(&noisy, &noisy).unwrap(), [0.0; 3]);
        let den = crate::denoise::gaussian_filter(&noisy, 1.2).unwrap();
        let a = feature_sr(&noisy, &den).unwrap();
        assert!(a.iter().all(|&v| v > 0.0));
        let b = feature_sr(&noisy.map(|v| v + 17.0), &den.map(|v| v + 17.0)).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-9 * x.max(1.0));
        }
    }

    #[test]
    fn uniform_weights_reduce_to_box_mean() {
        // constant guide -> only spatial weights; residual constant c -> SR = |c|
        let noisy = Image::filled(10, 10, 1, 50.0);
        let den = Image::filled(10, 10, 1, 53.0);
        for v in feature_sr(&noisy, &den).unwrap() {
            assert!((v - 3.0).abs() < 1e-12);
        }
    }
}
