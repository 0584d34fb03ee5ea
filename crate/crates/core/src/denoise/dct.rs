//! Sliding-window 8x8 DCT hard thresholding.

use crate::error::{Error, Result};
use crate::image::Image;
use crate::scalar::Scalar;

const B: usize = 8;
const STRIDE: usize = 4;

/// Orthonormal DCT-II basis, `basis[k][n]`.
fn dct_basis() -> [[f64; B]; B] {
    let mut c = [[0.0; B]; B];
    for (k, row) in c.iter_mut().enumerate() {
        let scale = if k == 0 { (1.0 / B as f64).sqrt() } else { (2.0 / B as f64).sqrt() };
        for (n, v) in row.iter_mut().enumerate() {
            *v = scale * (std::f64::consts::PI * (2 * n + 1) as f64 * k as f64 / (2 * B) as f64).cos();
        }
    }
    c
}

/// Block origins along one axis: stride 4, with a final block flush to the
/// far edge so every sample is covered.
fn origins(len: usize) -> Vec<usize> {
    let mut v: Vec<usize> = (0..=len - B).step_by(STRIDE).collect();
    if *v.last().expect("len >= B") != len - B {
        v.push(len - B);
    }
    v
}

pub fn dct_denoise<T: Scalar>(img: &Image<T>, threshold: f64) -> Result<Image<T>> {
    if !(threshold >= 0.0) {
        return Err(Error::invalid("dct threshold must be >= 0"));
    }
    if img.width() < B || img.height() < B {
        return Err(Error::invalid("dct denoising needs at least 8x8 pixels"));
    }
    let c = dct_basis();
    img.per_channel(|p| {
        let (w, h) = (p.width(), p.height());
        let src = p.data();
        let mut acc = vec![0.0; w * h];
        let mut count = vec![0u32; w * h];
        let mut block = [[0.0; B]; B];
        let mut tmp = [[0.0; B]; B];
        for &oy in &origins(h) {
            for &ox in &origins(w) {
                for (y, row) in block.iter_mut().enumerate() {
                    for (x, v) in row.iter_mut().enumerate() {
                        *v = src[(oy + y) * w + ox + x].f64();
                    }
                }
                // forward: C X C^T
                for k in 0..B {
                    for x in 0..B {
                        tmp[k][x] = (0..B).map(|n| c[k][n] * block[n][x]).sum();
                    }
                }
                for k in 0..B {
                    for l in 0..B {
                        block[k][l] = (0..B).map(|n| tmp[k][n] * c[l][n]).sum();
                    }
                }
                for (k, row) in block.iter_mut().enumerate() {
                    for (l, v) in row.iter_mut().enumerate() {
                        if (k, l) != (0, 0) && v.abs() < threshold {
                            *v = 0.0;
                        }
                    }
                }
                // inverse: C^T Y C
                for n in 0..B {
                    for l in 0..B {
                        tmp[n][l] = (0..B).map(|k| c[k][n] * block[k][l]).sum();
                    }
                }
                for y in 0..B {
                    for x in 0..B {
                        let v: f64 = (0..B).map(|l| tmp[y][l] * c[l][x]).sum();
                        let i = (oy + y) * w + ox + x;
                        acc[i] += v;
                        count[i] += 1;
                    }
                }
            }
        }
        let out = acc
            .iter()
            .zip(&count)
            .map(|(&a, &n)| T::of(a / n as f64))
            .collect();
        Ok(p.with_data(out).clamped())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_threshold_is_identity() {
        let img = Image::from_fn(27, 19, |x, y| ((x * 31 + y * 17) % 256) as f64);
        let out = dct_denoise(&img, 0.0).unwrap();
        for (a, b) in img.data().iter().zip(out.data()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn constant_image_survives_any_threshold() {
        let img: Image = Image::filled(16, 16, 1, 99.0);
        let out = dct_denoise(&img, 1e4).unwrap();
        assert!(out.data().iter().all(|&v| (v - 99.0).abs() < 1e-6));
    }

    #[test]
    fn basis_is_orthonormal() {
        let c = dct_basis();
        for i in 0..B {
            for j in 0..B {
                let dot: f64 = (0..B).map(|n| c[i][n] * c[j][n]).sum();
                assert!((dot - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn origins_cover_edges() {
        assert_eq!(origins(8), vec![0]);
        assert_eq!(origins(16), vec![0, 4, 8]);
        assert_eq!(origins(18), vec![0, 4, 8, 10]);
    }
}
