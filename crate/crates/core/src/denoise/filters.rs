//! Local smoothing filters: Gaussian, bilateral and median.

use crate::error::{Error, Result};
use crate::image::{reflect, Image};
use crate::scalar::Scalar;

/// Normalized, sampled 1-D Gaussian of radius `ceil(3 sigma)`.
pub fn gaussian_kernel<T: Scalar>(sigma: f64) -> Vec<T> {
    let radius = (3.0 * sigma).ceil() as isize;
    let raw: Vec<f64> = (-radius..=radius)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| T::of(v / total)).collect()
}

fn convolve_rows<T: Scalar>(src: &[T], w: usize, h: usize, kernel: &[T]) -> Vec<T> {
    let r = (kernel.len() / 2) as isize;
    let mut out = vec![T::zero(); w * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = T::zero();
            for (k, &kv) in kernel.iter().enumerate() {
                acc += kv * row[reflect(x as isize + k as isize - r, w)];
            }
            out[y * w + x] = acc;
        }
    }
    out
}

fn convolve_cols<T: Scalar>(src: &[T], w: usize, h: usize, kernel: &[T]) -> Vec<T> {
    let r = (kernel.len() / 2) as isize;
    let mut out = vec![T::zero(); w * h];
    for y in 0..h {
        for (k, &kv) in kernel.iter().enumerate() {
            let sy = reflect(y as isize + k as isize - r, h);
            let src_row = &src[sy * w..(sy + 1) * w];
            let dst = &mut out[y * w..(y + 1) * w];
            for x in 0..w {
                dst[x] += kv * src_row[x];
            }
        }
    }
    out
}

/// Separable Gaussian blur with symmetric boundary reflection.
pub fn gaussian_filter<T: Scalar>(img: &Image<T>, sigma: f64) -> Result<Image<T>> {
    if !(sigma > 0.0) {
        return Err(Error::invalid("gaussian filter sigma must be > 0"));
    }
    let kernel = gaussian_kernel::<T>(sigma);
    img.per_channel(|p| {
        let (w, h) = (p.width(), p.height());
        let tmp = convolve_rows(p.data(), w, h, &kernel);
        Ok(p.with_data(convolve_cols(&tmp, w, h, &kernel)).clamped())
    })
}

/// Classic bilateral filter over a square window of radius `ceil(3 sigma_s)`.
pub fn bilateral_filter<T: Scalar>(img: &Image<T>, sigma_s: f64, sigma_r: f64) -> Result<Image<T>> {
    if !(sigma_s > 0.0 && sigma_r > 0.0) {
        return Err(Error::invalid("bilateral sigmas must be > 0"));
    }
    let radius = (3.0 * sigma_s).ceil() as isize;
    let side = (2 * radius + 1) as usize;
    let mut spatial = Vec::with_capacity(side * side);
    for dy in -radius..=radius {
        for dx in -radius..=radius {
            spatial.push(((dx * dx + dy * dy) as f64) / (2.0 * sigma_s * sigma_s));
        }
    }
    let range_scale = 1.0 / (2.0 * sigma_r * sigma_r);
    img.per_channel(|p| {
        let (w, h) = (p.width(), p.height());
        let src = p.data();
        let mut out = vec![T::zero(); w * h];
        for y in 0..h {
            for x in 0..w {
                let center = src[y * w + x].f64();
                let (mut acc, mut norm) = (0.0, 0.0);
                let mut k = 0;
                for dy in -radius..=radius {
                    let sy = reflect(y as isize + dy, h);
                    for dx in -radius..=radius {
                        let v = src[sy * w + reflect(x as isize + dx, w)].f64();
                        let d = v - center;
                        let wgt = (-(spatial[k] + d * d * range_scale)).exp();
                        acc += wgt * v;
                        norm += wgt;
                        k += 1;
                    }
                }
                out[y * w + x] = T::of(acc / norm);
            }
        }
        Ok(p.with_data(out).clamped())
    })
}

/// Median over a `(2r+1)^2` window with reflected boundaries.
pub fn median_filter<T: Scalar>(img: &Image<T>, radius: usize) -> Result<Image<T>> {
    if radius == 0 {
        return Err(Error::invalid("median radius must be >= 1"));
    }
    let r = radius as isize;
    img.per_channel(|p| {
        let (w, h) = (p.width(), p.height());
        let src = p.data();
        let mut window = Vec::with_capacity((2 * radius + 1).pow(2));
        let mut out = vec![T::zero(); w * h];
        for y in 0..h {
            for x in 0..w {
                window.clear();
                for dy in -r..=r {
                    let sy = reflect(y as isize + dy, h);
                    for dx in -r..=r {
                        window.push(src[sy * w + reflect(x as isize + dx, w)]);
                    }
                }
                let mid = window.len() / 2;
                let (_, m, _) = window.select_nth_unstable_by(mid, |a, b| a.partial_cmp(b).expect("finite samples"));
                out[y * w + x] = *m;
            }
        }
        Ok(p.with_data(out))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::add_salt_pepper;

    fn max_abs_diff(a: &Image, b: &Image) -> f64 {
        a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn constant_images_are_fixed_points() {
        let c = Image::filled(20, 13, 1, 77.0);
        assert!(max_abs_diff(&gaussian_filter(&c, 1.5).unwrap(), &c) < 1e-9);
        assert!(max_abs_diff(&bilateral_filter(&c, 2.0, 10.0).unwrap(), &c) < 1e-9);
        assert!(max_abs_diff(&median_filter(&c, 2).unwrap(), &c) < 1e-9);
    }

    #[test]
    fn gaussian_impulse_response_is_the_kernel() {
        let mut img = Image::filled(21, 21, 1, 0.0);
        img.set(10, 10, 0, 100.0);
        let out = gaussian_filter(&img, 1.0).unwrap();
        // independent evaluation of the sampled 2-D Gaussian
        let g = |i: i32| (-(i * i) as f64 / 2.0).exp();
        let total: f64 = (-3..=3).map(g).sum();
        for y in 0..21i32 {
            for x in 0..21i32 {
                let (dx, dy) = (x - 10, y - 10);
                let expected = if dx.abs() <= 3 && dy.abs() <= 3 {
                    100.0 * g(dx) * g(dy) / (total * total)
                } else {
                    0.0
                };
                assert!((out.get(x as usize, y as usize, 0) - expected).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn bilateral_tends_to_gaussian_for_huge_range_sigma() {
        let img = Image::from_fn(24, 24, |x, y| ((x * 37 + y * 11) % 200) as f64);
        let a = bilateral_filter(&img, 1.5, 1e6).unwrap();
        let b = gaussian_filter(&img, 1.5).unwrap();
        assert!(max_abs_diff(&a, &b) <= 1e-3);
    }

    #[test]
    fn bilateral_preserves_step_edge() {
        let img: Image = Image::from_fn(20, 10, |x, _| if x < 10 { 50.0 } else { 200.0 });
        let out = bilateral_filter(&img, 2.0, 10.0).unwrap();
        for y in 0..10 {
            assert!((out.get(9, y, 0) - 50.0).abs() < 0.05 * 150.0);
            assert!((out.get(10, y, 0) - 200.0).abs() < 0.05 * 150.0);
        }
    }

    #[test]
    fn median_restores_impulses() {
        let mut img = Image::filled(9, 9, 1, 10.0);
        img.set(4, 4, 0, 255.0);
        let out = median_filter(&img, 1).unwrap();
        assert!(out.data().iter().all(|&v| v == 10.0));

        let flat = Image::filled(128, 128, 1, 128.0);
        let noisy = add_salt_pepper(&flat, 0.1, 4).unwrap();
        let out = median_filter(&noisy, 1).unwrap();
        let restored = out.data().iter().filter(|&&v| v == 128.0).count();
        assert!(restored as f64 >= 0.99 * out.len() as f64);
        assert!(median_filter(&img, 0).is_err());
    }
}
