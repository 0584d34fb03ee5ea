use crate::error::Result;
use crate::image::{extract_patches, Image};
use crate::scalar::Scalar;
use crate::svd::{partial_energy_count, singular_values};

pub const SS_PATCH: usize = 15;
pub const SS_ALPHAS: [f64; 3] = [0.97, 0.98, 0.99];

/// Fraction of leading singular values of the 15x15 patch matrix needed to
/// hold α of the singular-value mass, for each α.
pub fn feature_ss<T: Scalar>(denoised: &Image<T>) -> Result<[f64; 3]> {
    let patches = extract_patches(denoised, SS_PATCH)?;
    let s = singular_values(&patches).values;
    let n = s.len() as f64;
    let mut out = [0.0; 3];
    for (o, &alpha) in out.iter_mut().zip(&SS_ALPHAS) {
        *o = partial_energy_count(&s, alpha)? as f64 / n;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::denoise::gaussian_filter;
    use crate::noise::add_gaussian;

    #[test]
    fn constant_image_is_rank_one() {
        let img = Image::filled(45, 30, 1, 90.0);
        // 3 x 2 tiles -> 6 singular values, one nonzero
        assert_eq!(feature_ss(&img).unwrap(), [1.0 / 6.0; 3]);
    }

    #[test]
    fn orthogonal_equal_columns_need_both() {
        // two tiles whose vectorized patches are orthogonal with equal norm
        let img = Image::from_fn(30, 15, |x, y| {
            let (tile, px) = (x / 15, x % 15);
            let checker = (px + y) % 2 == 0;
            if checker == (tile == 0) { 100.0 } else { 0.0 }
        });
        assert_eq!(feature_ss(&img).unwrap(), [1.0; 3]);
    }

    #[test]
    fn monotone_in_alpha_and_smoothing() {
        let clean = Image::from_fn(60, 60, |x, y| 120.0 + 40.0 * ((x + 2 * y) as f64 / 7.0).sin());
        let noisy = add_gaussian(&clean, 20.0, 8).unwrap();
        let s = feature_ss(&noisy).unwrap();
        assert!(s[0] <= s[1] && s[1] <= s[2]);
        let smooth = gaussian_filter(&noisy, 2.5).unwrap();
        assert!(feature_ss(&smooth).unwrap()[0] < s[0]);
        assert!(feature_ss(&Image::filled(10, 40, 1, 0.0)).is_err());
    }
}
