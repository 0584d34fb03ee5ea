use crate::error::Result;
use crate::image::{gradient_field, Image};
use crate::scalar::Scalar;

pub const SGM_PERCENTS: [usize; 3] = [40, 50, 60];

/// Magnitudes at or below this count as zero.
const ZERO_GRADIENT: f64 = 1e-9;

/// Standard deviation of the m% smallest non-zero gradient magnitudes,
/// m in {40, 50, 60}. Empty subsets give 0.
pub fn feature_sgm<T: Scalar>(denoised: &Image<T>) -> Result<[f64; 3]> {
    let g = gradient_field(denoised)?;
    let mut mags: Vec<f64> = g
        .magnitude
        .iter()
        .map(|m| m.f64())
        .filter(|&m| m > ZERO_GRADIENT)
        .collect();
    mags.sort_by(f64::total_cmp);
    let mut out = [0.0; 3];
    for (o, &m) in out.iter_mut().zip(&SGM_PERCENTS) {
        let count = mags.len() * m / 100;
        *o = population_std(&mags[..count]);
    }
    Ok(out)
}

fn population_std(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::denoise::gaussian_filter;
    use crate::noise::add_gaussian;

    #[test]
    fn degenerate_inputs_give_zero() {
        assert_eq!(feature_sgm(&Image::filled(12, 12, 1, 4.0)).unwrap(), [0.0; 3]);
        // a ramp has unit magnitude everywhere except the last column
        let ramp = Image::from_fn(12, 12, |x, _| x as f64);
        assert_eq!(feature_sgm(&ramp).unwrap(), [0.0; 3]);
    }

    #[test]
    fn decreases_with_smoothing() {
        let clean = Image::from_fn(96, 96, |x, y| if (x / 32 + y / 32) % 2 == 0 { 60.0 } else { 190.0 });
        let noisy = add_gaussian(&clean, 20.0, 1).unwrap();
        let mut last = f64::INFINITY;
        for sigma in [0.5, 1.0, 1.5, 2.0, 3.0] {
            let v = feature_sgm(&gaussian_filter(&noisy, sigma).unwrap()).unwrap()[1];
            assert!(v < last, "{v} !< {last}");
            last = v;
        }
    }
}
