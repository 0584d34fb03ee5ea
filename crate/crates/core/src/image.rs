//! Planar float rasters and the pixel-level primitives built on them.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Largest representable sample of an 8-bit source.
pub const PEAK: f64 = 255.0;

/// Planar raster with 1 or 3 channels, samples nominally in `[0, 255]`.
///
/// Samples are stored plane by plane, each plane row-major. The range is not
/// enforced by the type: operations that may leave it (noise injection,
/// filtering) clamp their own output, and the signed noise map deliberately
/// stays unclamped.
#[derive(Debug, Clone, PartialEq)]
pub struct Image<T = f64> {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<T>,
}

impl<T: Scalar> Image<T> {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<T>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("zero-dimension image"));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::invalid(format!("unsupported channel count {channels}")));
        }
        if data.len() != width * height * channels {
            return Err(Error::mismatch(format!(
                "{} samples for a {width}x{height}x{channels} image",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite sample"));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: T) -> Self {
        assert!(width > 0 && height > 0 && (channels == 1 || channels == 3));
        Self {
            width,
            height,
            channels,
            data: vec![value; width * height * channels],
        }
    }

    /// Single-channel image sampled from `f(x, y)`.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        assert!(width > 0 && height > 0);
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            channels: 1,
            data,
        }
    }

    /// Stacks 1-channel planes (1 or 3 of them) into one image.
    pub fn from_planes(planes: &[Image<T>]) -> Result<Self> {
        let first = planes
            .first()
            .ok_or_else(|| Error::invalid("no planes"))?;
        let mut data = Vec::with_capacity(first.len() * planes.len());
        for p in planes {
            if p.channels != 1 || !p.same_grid(first) {
                return Err(Error::mismatch("planes must be 1-channel and equally sized"));
            }
            data.extend_from_slice(&p.data);
        }
        Image::new(first.width, first.height, planes.len(), data)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Number of pixels in one plane.
    #[inline]
    pub fn pixels(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> T {
        self.data[c * self.pixels() + y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: T) {
        let n = self.pixels();
        self.data[c * n + y * self.width + x] = v;
    }

    pub fn plane(&self, c: usize) -> &[T] {
        let n = self.pixels();
        &self.data[c * n..(c + 1) * n]
    }

    /// Copies channel `c` out as a 1-channel image.
    pub fn channel(&self, c: usize) -> Image<T> {
        Image {
            width: self.width,
            height: self.height,
            channels: 1,
            data: self.plane(c).to_vec(),
        }
    }

    pub fn split_channels(&self) -> Vec<Image<T>> {
        (0..self.channels).map(|c| self.channel(c)).collect()
    }

    pub fn same_grid(&self, other: &Image<T>) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn same_shape(&self, other: &Image<T>) -> bool {
        self.same_grid(other) && self.channels == other.channels
    }

    pub(crate) fn check_same_shape(&self, other: &Image<T>) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::mismatch(format!(
                "{}x{}x{} vs {}x{}x{}",
                self.width, self.height, self.channels, other.width, other.height, other.channels
            )))
        }
    }

    pub(crate) fn require_gray(&self, what: &str) -> Result<()> {
        if self.channels == 1 {
            Ok(())
        } else {
            Err(Error::invalid(format!("{what} expects a 1-channel image")))
        }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Image<T> {
        Image {
            width: self.width,
            height: self.height,
            channels: self.channels,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Same grid and channels, new sample buffer.
    pub(crate) fn with_data(&self, data: Vec<T>) -> Image<T> {
        debug_assert_eq!(data.len(), self.data.len());
        Image {
            width: self.width,
            height: self.height,
            channels: self.channels,
            data,
        }
    }

    pub fn clamped(mut self) -> Image<T> {
        let hi = T::of(PEAK);
        for v in &mut self.data {
            *v = v.max(T::zero()).min(hi);
        }
        self
    }

    /// Clamps to `[0, 255]` and rounds to the nearest integer level, i.e. what
    /// an 8-bit file round trip would produce.
    pub fn quantized(mut self) -> Image<T> {
        let hi = T::of(PEAK);
        for v in &mut self.data {
            *v = v.max(T::zero()).min(hi).round();
        }
        self
    }

    pub fn cast<U: Scalar>(&self) -> Image<U> {
        Image {
            width: self.width,
            height: self.height,
            channels: self.channels,
            data: self.data.iter().map(|v| U::of(v.f64())).collect(),
        }
    }

    /// Applies a 1-channel operation to every plane and restacks the result.
    pub fn per_channel(&self, f: impl Fn(&Image<T>) -> Result<Image<T>>) -> Result<Image<T>> {
        if self.channels == 1 {
            return f(self);
        }
        let planes = self
            .split_channels()
            .iter()
            .map(&f)
            .collect::<Result<Vec<_>>>()?;
        Image::from_planes(&planes)
    }

    pub fn mean(&self) -> T {
        self.data.iter().copied().sum::<T>() / T::of_usize(self.data.len())
    }
}

/// Half-sample symmetric reflection of an index into `0..n`.
#[inline]
pub(crate) fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    if n == 1 {
        return 0;
    }
    let period = 2 * n;
    let mut m = i.rem_euclid(period);
    if m >= n {
        m = period - 1 - m;
    }
    m as usize
}

/// Rec. 601 luma; 1-channel input is returned unchanged.
pub fn to_grayscale<T: Scalar>(img: &Image<T>) -> Image<T> {
    if img.channels() == 1 {
        return img.clone();
    }
    let (wr, wg, wb) = (T::of(0.299), T::of(0.587), T::of(0.114));
    let (r, g, b) = (img.plane(0), img.plane(1), img.plane(2));
    let data = (0..img.pixels())
        .map(|i| wr * r[i] + wg * g[i] + wb * b[i])
        .collect();
    Image {
        width: img.width(),
        height: img.height(),
        channels: 1,
        data,
    }
}

/// Forward-difference gradients of a 1-channel image.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField<T = f64> {
    pub width: usize,
    pub height: usize,
    pub dx: Vec<T>,
    pub dy: Vec<T>,
    pub magnitude: Vec<T>,
}

pub fn gradient_field<T: Scalar>(img: &Image<T>) -> Result<GradientField<T>> {
    img.require_gray("gradient_field")?;
    let (w, h) = (img.width(), img.height());
    let p = img.data();
    let n = w * h;
    let mut dx = vec![T::zero(); n];
    let mut dy = vec![T::zero(); n];
    let mut magnitude = vec![T::zero(); n];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let gx = if x + 1 < w { p[i + 1] - p[i] } else { T::zero() };
            let gy = if y + 1 < h { p[i + w] - p[i] } else { T::zero() };
            dx[i] = gx;
            dy[i] = gy;
            magnitude[i] = (gx * gx + gy * gy).sqrt();
        }
    }
    Ok(GradientField {
        width: w,
        height: h,
        dx,
        dy,
        magnitude,
    })
}

/// Dense matrix stored column by column. Used for vectorized patches
/// (one `k*k` patch per column) and as the general SVD input.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchMatrix<T = f64> {
    rows: usize,
    cols: usize,
    values: Vec<T>,
}

impl<T: Scalar> PatchMatrix<T> {
    pub fn from_columns(rows: usize, cols: usize, values: Vec<T>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid("empty matrix"));
        }
        if values.len() != rows * cols {
            return Err(Error::mismatch(format!(
                "{} values for a {rows}x{cols} matrix",
                values.len()
            )));
        }
        Ok(Self { rows, cols, values })
    }

    /// Builds from a row-major closure; handy in tests.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut values = Vec::with_capacity(rows * cols);
        for c in 0..cols {
            for r in 0..rows {
                values.push(f(r, c));
            }
        }
        Self { rows, cols, values }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> T {
        self.values[c * self.rows + r]
    }

    pub fn column(&self, c: usize) -> &[T] {
        &self.values[c * self.rows..(c + 1) * self.rows]
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn frobenius_sq(&self) -> T {
        self.values.iter().map(|&v| v * v).sum()
    }
}

/// Tiles a 1-channel image into non-overlapping `k x k` patches, left to
/// right then top to bottom, discarding partial tiles at the right and
/// bottom. Each patch is vectorized column-major.
pub fn extract_patches<T: Scalar>(img: &Image<T>, k: usize) -> Result<PatchMatrix<T>> {
    img.require_gray("extract_patches")?;
    if k == 0 || img.width() < k || img.height() < k {
        return Err(Error::invalid(format!(
            "{}x{} image is smaller than one {k}x{k} patch",
            img.width(),
            img.height()
        )));
    }
    let (tx, ty) = (img.width() / k, img.height() / k);
    let mut values = Vec::with_capacity(k * k * tx * ty);
    for by in 0..ty {
        for bx in 0..tx {
            for px in 0..k {
                for py in 0..k {
                    values.push(img.get(bx * k + px, by * k + py, 0));
                }
            }
        }
    }
    PatchMatrix::from_columns(k * k, tx * ty, values)
}

/// Signed difference `denoised - noisy`; not clamped.
pub fn noise_map<T: Scalar>(noisy: &Image<T>, denoised: &Image<T>) -> Result<Image<T>> {
    noisy.check_same_shape(denoised)?;
    let data = denoised
        .data()
        .iter()
        .zip(noisy.data())
        .map(|(&d, &n)| d - n)
        .collect();
    Ok(noisy.with_data(data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gray(w: usize, h: usize, v: &[f64]) -> Image {
        Image::new(w, h, 1, v.to_vec()).unwrap()
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(Image::<f64>::new(0, 2, 1, vec![]).is_err());
        assert!(Image::<f64>::new(2, 2, 2, vec![0.0; 8]).is_err());
        assert!(Image::<f64>::new(2, 2, 1, vec![0.0; 3]).is_err());
        assert!(Image::<f64>::new(1, 1, 1, vec![f64::NAN]).is_err());
    }

    #[test]
    fn reflect_is_half_sample_symmetric() {
        let idx: Vec<usize> = (-3..7).map(|i| reflect(i, 4)).collect();
        assert_eq!(idx, vec![2, 1, 0, 0, 1, 2, 3, 3, 2, 1]);
        assert_eq!(reflect(-5, 1), 0);
    }

    #[test]
    fn grayscale_weights() {
        let g = gray(2, 1, &[3.0, 4.0]);
        assert_eq!(to_grayscale(&g), g);
        let white: Image = Image::filled(1, 1, 3, 255.0);
        assert!((to_grayscale(&white).data()[0] - 255.0).abs() < 1e-9);
        let red: Image = Image::new(1, 1, 3, vec![100.0, 0.0, 0.0]).unwrap();
        assert!((to_grayscale(&red).data()[0] - 29.9).abs() < 1e-12);
    }

    #[test]
    fn gradient_of_constant_and_ramp() {
        let c = Image::filled(5, 4, 1, 17.0);
        let g = gradient_field(&c).unwrap();
        assert!(g.dx.iter().chain(&g.dy).chain(&g.magnitude).all(|&v| v == 0.0));

        let ramp = Image::from_fn(5, 4, |x, _| x as f64);
        let g = gradient_field(&ramp).unwrap();
        for y in 0..4 {
            for x in 0..5 {
                let i = y * 5 + x;
                assert_eq!(g.dx[i], if x == 4 { 0.0 } else { 1.0 });
                assert_eq!(g.dy[i], 0.0);
            }
        }
        assert!(gradient_field(&Image::filled(2, 2, 3, 0.0)).is_err());
    }

    #[test]
    fn gradient_of_center_impulse() {
        let mut img = Image::filled(3, 3, 1, 0.0);
        img.set(1, 1, 0, 255.0);
        let g = gradient_field(&img).unwrap();
        // Hand-evaluated forward differences: (0,1) and (1,0) step up into the
        // impulse, (1,1) steps down in both directions.
        let s2 = 255.0 * 2f64.sqrt();
        let expected_mag = [0.0, 255.0, 0.0, 255.0, s2, 0.0, 0.0, 0.0, 0.0];
        assert_eq!(g.dx, vec![0.0, 0.0, 0.0, 255.0, -255.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(g.dy, vec![0.0, 255.0, 0.0, 0.0, -255.0, 0.0, 0.0, 0.0, 0.0]);
        for (m, e) in g.magnitude.iter().zip(expected_mag) {
            assert!((m - e).abs() < 1e-9);
        }
    }

    #[test]
    fn patch_tiling_counts() {
        let img = Image::from_fn(30, 30, |x, y| (x + y) as f64);
        let m = extract_patches(&img, 15).unwrap();
        assert_eq!((m.rows(), m.cols()), (225, 4));
        let img = Image::from_fn(44, 30, |x, y| (x * y) as f64);
        assert_eq!(extract_patches(&img, 15).unwrap().cols(), 4);
        let img = Image::from_fn(15, 15, |x, y| (x * 15 + y) as f64);
        let m = extract_patches(&img, 15).unwrap();
        assert_eq!(m.cols(), 1);
        // column-major within the patch
        let expected: Vec<f64> = (0..225).map(|v| v as f64).collect();
        assert_eq!(m.column(0), &expected[..]);
        assert!(extract_patches(&Image::filled(14, 30, 1, 0.0), 15).is_err());
    }

    #[test]
    fn noise_map_basics() {
        let a = gray(2, 2, &[10.0, 20.0, 30.0, 40.0]);
        let b = gray(2, 2, &[12.0, 15.0, 30.0, 0.0]);
        assert_eq!(noise_map(&a, &b).unwrap().data(), &[2.0, -5.0, 0.0, -40.0]);
        assert!(noise_map(&a, &a).unwrap().data().iter().all(|&v| v == 0.0));
        assert!(noise_map(&a, &Image::filled(2, 3, 1, 0.0)).is_err());
    }

    #[test]
    fn per_channel_roundtrip() {
        let img = Image::new(2, 1, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let out = img.per_channel(|p| Ok(p.map(|v| v * 2.0))).unwrap();
        assert_eq!(out.data(), &[2.0, 4.0, 6.0, 8.0, 10.0, 12.0]);
    }

    proptest! {
        #[test]
        fn patches_reassemble_covered_region(w in 15usize..40, h in 15usize..40, k in 2usize..8) {
            let img = Image::from_fn(w, h, |x, y| (x * 131 + y * 7) as f64);
            let m = extract_patches(&img, k).unwrap();
            let tx = w / k;
            for c in 0..m.cols() {
                let (bx, by) = (c % tx, c / tx);
                for px in 0..k {
                    for py in 0..k {
                        prop_assert_eq!(m.column(c)[px * k + py], img.get(bx * k + px, by * k + py, 0));
                    }
                }
            }
            prop_assert_eq!(m.cols(), tx * (h / k));
        }

        #[test]
        fn noise_map_antisymmetric(v in proptest::collection::vec(0.0f64..255.0, 12), u in proptest::collection::vec(0.0f64..255.0, 12)) {
            let a = Image::new(4, 3, 1, v).unwrap();
            let b = Image::new(4, 3, 1, u).unwrap();
            let ab = noise_map(&a, &b).unwrap();
            let ba = noise_map(&b, &a).unwrap();
            for (x, y) in ab.data().iter().zip(ba.data()) {
                prop_assert_eq!(*x, -*y);
            }
        }
    }
}
