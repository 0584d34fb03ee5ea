//! Full-reference metrics (PSNR, SSIM) and the evaluation statistics used
//! by the harness (Kendall τ, RMSE/RSE).

use std::collections::HashMap;
use std::hash::Hash;

use crate::error::{Error, Result};
use crate::image::{Image, PEAK};
use crate::scalar::Scalar;

/// PSNR returned for identical images.
pub const PSNR_CAP: f64 = 100.0;

pub fn psnr<T: Scalar>(a: &Image<T>, b: &Image<T>) -> Result<f64> {
    a.check_same_shape(b)?;
    let sse: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| {
            let d = (x - y).f64();
            d * d
        })
        .sum();
    let mse = sse / a.len() as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP);
    }
    Ok((10.0 * (PEAK * PEAK / mse).log10()).min(PSNR_CAP))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SsimWindow {
    /// 11x11 Gaussian, σ = 1.5 (the usual label window).
    Gaussian11,
    /// k x k box window.
    Uniform(usize),
}

impl SsimWindow {
    pub fn size(self) -> usize {
        match self {
            SsimWindow::Gaussian11 => 11,
            SsimWindow::Uniform(k) => k,
        }
    }

    /// 1-D factor of the separable window, summing to 1.
    pub fn taps<T: Scalar>(self) -> Vec<T> {
        match self {
            SsimWindow::Gaussian11 => {
                let raw: Vec<f64> = (-5i32..=5)
                    .map(|i| (-(i * i) as f64 / (2.0 * 1.5 * 1.5)).exp())
                    .collect();
                let s: f64 = raw.iter().sum();
                raw.into_iter().map(|v| T::of(v / s)).collect()
            }
            SsimWindow::Uniform(k) => vec![T::of(1.0 / k as f64); k],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsimConfig {
    pub window: SsimWindow,
    pub c1: f64,
    pub c2: f64,
}

impl SsimConfig {
    pub fn with_window(window: SsimWindow) -> Self {
        Self {
            window,
            c1: (0.01 * PEAK).powi(2),
            c2: (0.03 * PEAK).powi(2),
        }
    }
}

impl Default for SsimConfig {
    fn default() -> Self {
        Self::with_window(SsimWindow::Gaussian11)
    }
}

/// Per-position SSIM over valid window placements.
#[derive(Debug, Clone, PartialEq)]
pub struct SsimMap<T = f64> {
    pub width: usize,
    pub height: usize,
    pub values: Vec<T>,
}

impl<T: Scalar> SsimMap<T> {
    pub fn mean(&self) -> T {
        self.values.iter().copied().sum::<T>() / T::of_usize(self.values.len())
    }
}

/// Valid-mode separable filtering: rows then columns.
fn filter_valid<T: Scalar>(src: &[T], w: usize, h: usize, taps: &[T]) -> Vec<T> {
    let k = taps.len();
    let (ow, oh) = (w - k + 1, h - k + 1);
    let mut rows = vec![T::zero(); ow * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..ow {
            rows[y * ow + x] = taps.iter().zip(&row[x..x + k]).map(|(&t, &v)| t * v).sum();
        }
    }
    let mut out = vec![T::zero(); ow * oh];
    for y in 0..oh {
        for (j, &t) in taps.iter().enumerate() {
            let src_row = &rows[(y + j) * ow..(y + j + 1) * ow];
            for (o, &v) in out[y * ow..(y + 1) * ow].iter_mut().zip(src_row) {
                *o += t * v;
            }
        }
    }
    out
}

pub fn ssim_map<T: Scalar>(a: &Image<T>, b: &Image<T>, cfg: &SsimConfig) -> Result<SsimMap<T>> {
    a.check_same_shape(b)?;
    a.require_gray("ssim_map")?;
    let k = cfg.window.size();
    let (w, h) = (a.width(), a.height());
    if k == 0 || w < k || h < k {
        return Err(Error::invalid(format!("{w}x{h} image is smaller than the {k}x{k} SSIM window")));
    }
    let taps = cfg.window.taps::<T>();
    let (pa, pb) = (a.data(), b.data());
    let aa: Vec<T> = pa.iter().map(|&v| v * v).collect();
    let bb: Vec<T> = pb.iter().map(|&v| v * v).collect();
    let ab: Vec<T> = pa.iter().zip(pb).map(|(&x, &y)| x * y).collect();
    let mu_a = filter_valid(pa, w, h, &taps);
    let mu_b = filter_valid(pb, w, h, &taps);
    let e_aa = filter_valid(&aa, w, h, &taps);
    let e_bb = filter_valid(&bb, w, h, &taps);
    let e_ab = filter_valid(&ab, w, h, &taps);
    let (c1, c2) = (T::of(cfg.c1), T::of(cfg.c2));
    let two = T::of(2.0);
    let values = (0..mu_a.len())
        .map(|i| {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let va = e_aa[i] - ma * ma;
            let vb = e_bb[i] - mb * mb;
            let cov = e_ab[i] - ma * mb;
            ((two * ma * mb + c1) * (two * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2))
        })
        .collect();
    Ok(SsimMap {
        width: w - k + 1,
        height: h - k + 1,
        values,
    })
}

/// Mean SSIM with the 11x11 Gaussian window; color inputs average the
/// per-channel scores.
pub fn ssim<T: Scalar>(a: &Image<T>, b: &Image<T>) -> Result<f64> {
    a.check_same_shape(b)?;
    let cfg = SsimConfig::default();
    let mut total = 0.0;
    for c in 0..a.channels() {
        total += ssim_map(&a.channel(c), &b.channel(c), &cfg)?.mean().f64();
    }
    Ok(total / a.channels() as f64)
}

/// Two orderings of the same id set, best first.
#[derive(Debug, Clone, PartialEq)]
pub struct RankingPair<Id> {
    pub predicted: Vec<Id>,
    pub truth: Vec<Id>,
}

/// Kendall τ-a between two permutations, counting discordant pairs by merge
/// sort.
pub fn kendall_tau<Id: Eq + Hash>(r: &RankingPair<Id>) -> Result<f64> {
    let n = r.truth.len();
    if r.predicted.len() != n {
        return Err(Error::mismatch(format!(
            "ranking lengths {} and {n}",
            r.predicted.len()
        )));
    }
    if n < 2 {
        return Err(Error::invalid("kendall tau needs at least two items"));
    }
    let pos: HashMap<&Id, usize> = r.truth.iter().enumerate().map(|(i, id)| (id, i)).collect();
    if pos.len() != n {
        return Err(Error::invalid("truth ranking has duplicate ids"));
    }
    let mut seen = vec![false; n];
    let mut seq = Vec::with_capacity(n);
    for id in &r.predicted {
        let &p = pos
            .get(id)
            .ok_or_else(|| Error::invalid("rankings are not permutations of the same ids"))?;
        if std::mem::replace(&mut seen[p], true) {
            return Err(Error::invalid("predicted ranking has duplicate ids"));
        }
        seq.push(p);
    }
    let discordant = count_inversions(&mut seq) as f64;
    let pairs = (n * (n - 1) / 2) as f64;
    Ok((pairs - 2.0 * discordant) / pairs)
}

fn count_inversions(v: &mut [usize]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut inv = count_inversions(&mut v[..mid]) + count_inversions(&mut v[mid..]);
    let mut merged = Vec::with_capacity(n);
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if v[i] <= v[j] {
            merged.push(v[i]);
            i += 1;
        } else {
            merged.push(v[j]);
            inv += (mid - i) as u64;
            j += 1;
        }
    }
    merged.extend_from_slice(&v[i..mid]);
    merged.extend_from_slice(&v[j..n]);
    v.copy_from_slice(&merged);
    inv
}

/// Orders ids by descending score; equal scores fall back to ascending id.
pub fn rank_by_score<Id: Ord + Clone>(items: &[(Id, f64)]) -> Vec<Id> {
    let mut v: Vec<&(Id, f64)> = items.iter().collect();
    v.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    v.into_iter().map(|(id, _)| id.clone()).collect()
}

/// `(rmse, rse)`; RSE is undefined for constant truth.
pub fn rmse_rse(predicted: &[f64], truth: &[f64]) -> Result<(f64, f64)> {
    if predicted.len() != truth.len() {
        return Err(Error::mismatch(format!(
            "{} predictions for {} labels",
            predicted.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::invalid("rmse of an empty set"));
    }
    let n = truth.len() as f64;
    let sse: f64 = predicted.iter().zip(truth).map(|(p, t)| (p - t).powi(2)).sum();
    let mean = truth.iter().sum::<f64>() / n;
    let sst: f64 = truth.iter().map(|t| (t - mean).powi(2)).sum();
    if sst == 0.0 {
        return Err(Error::invalid("relative squared error is undefined for constant labels"));
    }
    Ok(((sse / n).sqrt(), sse / sst))
}
