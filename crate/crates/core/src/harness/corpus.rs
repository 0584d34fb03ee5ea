//! Procedural clean images for the desk benchmark.
//!
//! Each image mixes smooth shading, edges, and texture so that the denoisers
//! disagree about it: flat areas reward strong smoothing while stripes and
//! fine texture punish it. Content is a pure function of (seed, index).

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image::Image;
use crate::io::save_image;
use crate::rng::{derive_seed, stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pattern {
    Shapes,
    Grating,
    Checker,
    Rings,
    Texture,
    Gradient,
    Mosaic,
    Chirp,
}

impl Pattern {
    pub const ALL: [Pattern; 8] = [
        Pattern::Shapes,
        Pattern::Grating,
        Pattern::Checker,
        Pattern::Rings,
        Pattern::Texture,
        Pattern::Gradient,
        Pattern::Mosaic,
        Pattern::Chirp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Pattern::Shapes => "shapes",
            Pattern::Grating => "grating",
            Pattern::Checker => "checker",
            Pattern::Rings => "rings",
            Pattern::Texture => "texture",
            Pattern::Gradient => "gradient",
            Pattern::Mosaic => "mosaic",
            Pattern::Chirp => "chirp",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CorpusSpec {
    pub count: usize,
    pub size: usize,
    /// Every n-th image is RGB; 0 keeps the corpus grayscale.
    pub color_every: usize,
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            count: 30,
            size: 64,
            color_every: 5,
            seed: 0,
        }
    }
}

/// Value noise: bilinear interpolation of a random lattice with the given
/// cell size, in [0, 1].
fn value_noise(rng: &mut ChaCha8Rng, size: usize, cell: usize) -> Vec<f64> {
    let n = size / cell + 2;
    let lattice: Vec<f64> = (0..n * n).map(|_| rng.random::<f64>()).collect();
    let mut out = vec![0.0; size * size];
    for y in 0..size {
        for x in 0..size {
            let (fx, fy) = (x as f64 / cell as f64, y as f64 / cell as f64);
            let (ix, iy) = (fx as usize, fy as usize);
            let (tx, ty) = (fx - ix as f64, fy - iy as f64);
            let (sx, sy) = (tx * tx * (3.0 - 2.0 * tx), ty * ty * (3.0 - 2.0 * ty));
            let l = |i: usize, j: usize| lattice[j * n + i];
            let top = l(ix, iy) * (1.0 - sx) + l(ix + 1, iy) * sx;
            let bottom = l(ix, iy + 1) * (1.0 - sx) + l(ix + 1, iy + 1) * sx;
            out[y * size + x] = top * (1.0 - sy) + bottom * sy;
        }
    }
    out
}

fn render(pattern: Pattern, size: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let s = size as f64;
    let base = 40.0 + 60.0 * rng.random::<f64>();
    let span = 100.0 + 80.0 * rng.random::<f64>();
    let angle = PI * rng.random::<f64>();
    let (ca, sa) = (angle.cos(), angle.sin());
    let shade = value_noise(rng, size, size / 2);
    let mut v = vec![0.0; size * size];
    match pattern {
        Pattern::Shapes => {
            v.iter_mut().zip(&shade).for_each(|(p, g)| *p = base + 40.0 * g);
            for _ in 0..rng.random_range(4..9) {
                let (cx, cy) = (rng.random::<f64>() * s, rng.random::<f64>() * s);
                let r = s * (0.08 + 0.2 * rng.random::<f64>());
                let level = 20.0 + 215.0 * rng.random::<f64>();
                let disk = rng.random::<bool>();
                for y in 0..size {
                    for x in 0..size {
                        let (dx, dy) = (x as f64 - cx, y as f64 - cy);
                        let inside = if disk { dx * dx + dy * dy < r * r } else { dx.abs() < r && dy.abs() < 0.6 * r };
                        if inside {
                            v[y * size + x] = level;
                        }
                    }
                }
            }
        }
        Pattern::Grating => {
            let period = 4.0 + 10.0 * rng.random::<f64>();
            for y in 0..size {
                for x in 0..size {
                    let t = (x as f64 * ca + y as f64 * sa) * 2.0 * PI / period;
                    v[y * size + x] = base + 0.5 * span * (1.0 + t.sin()) * (0.5 + 0.5 * shade[y * size + x]);
                }
            }
        }
        Pattern::Checker => {
            let cell = rng.random_range(4..12);
            for y in 0..size {
                for x in 0..size {
                    let on = (x / cell + y / cell) % 2 == 0;
                    v[y * size + x] = base + if on { span } else { 0.0 } + 30.0 * shade[y * size + x];
                }
            }
        }
        Pattern::Rings => {
            let (cx, cy) = (s * rng.random::<f64>(), s * rng.random::<f64>());
            let period = 5.0 + 8.0 * rng.random::<f64>();
            for y in 0..size {
                for x in 0..size {
                    let r = ((x as f64 - cx).powi(2) + (y as f64 - cy).powi(2)).sqrt();
                    v[y * size + x] = base + 0.5 * span * (1.0 + (2.0 * PI * r / period).cos());
                }
            }
        }
        Pattern::Texture => {
            let cell = 2 + rng.random_range(0..3);
            let fine = value_noise(rng, size, cell);
            let mid = value_noise(rng, size, 8);
            for i in 0..size * size {
                v[i] = base + span * (0.45 * fine[i] + 0.35 * mid[i] + 0.2 * shade[i]);
            }
        }
        Pattern::Gradient => {
            let steps = rng.random_range(3..7) as f64;
            for y in 0..size {
                for x in 0..size {
                    let t = (x as f64 * ca + y as f64 * sa) / (s * 1.5) + 0.5;
                    let quant = (t * steps).floor() / steps;
                    v[y * size + x] = base + span * (0.6 * t + 0.4 * quant);
                }
            }
        }
        Pattern::Mosaic => {
            let cell = rng.random_range(8..20);
            let n = size / cell + 1;
            let levels: Vec<f64> = (0..n * n).map(|_| 20.0 + 215.0 * rng.random::<f64>()).collect();
            let fine = value_noise(rng, size, 3);
            for y in 0..size {
                for x in 0..size {
                    v[y * size + x] = 0.8 * levels[(y / cell) * n + x / cell] + 40.0 * fine[y * size + x];
                }
            }
        }
        Pattern::Chirp => {
            let k = 0.02 + 0.05 * rng.random::<f64>();
            for y in 0..size {
                for x in 0..size {
                    let t = x as f64 * ca + y as f64 * sa;
                    v[y * size + x] = base + 0.5 * span * (1.0 + (k * t * t / 4.0).sin());
                }
            }
        }
    }
    v
}

/// Renders image `index` of the corpus: 8-bit values, gray or RGB.
pub fn corpus_image(spec: &CorpusSpec, index: usize) -> (String, Image) {
    let pattern = Pattern::ALL[index % Pattern::ALL.len()];
    let mut rng = stream(derive_seed(spec.seed, &[index as u64]));
    let color = spec.color_every > 0 && index % spec.color_every == spec.color_every - 1;
    let size = spec.size;
    let img = if color {
        let luma = render(pattern, size, &mut rng);
        let planes: Vec<Image> = (0..3)
            .map(|_| {
                let gain = 0.6 + 0.5 * rng.random::<f64>();
                let tint = render(Pattern::Texture, size, &mut rng);
                let data = luma.iter().zip(&tint).map(|(l, t)| gain * l + 0.25 * (t - 128.0)).collect();
                Image::new(size, size, 1, data).expect("finite render")
            })
            .collect();
        Image::from_planes(&planes).expect("planes share a grid")
    } else {
        Image::new(size, size, 1, render(pattern, size, &mut rng)).expect("finite render")
    };
    (format!("{:03}_{}", index, pattern.name()), img.quantized())
}

pub fn corpus(spec: &CorpusSpec) -> Vec<(String, Image)> {
    (0..spec.count).map(|i| corpus_image(spec, i)).collect()
}

/// Writes the corpus as PNG files into `dir`, returning the paths in order.
pub fn write_corpus(spec: &CorpusSpec, dir: &Path) -> Result<Vec<PathBuf>> {
    if spec.count == 0 || spec.size < 16 {
        return Err(Error::invalid("corpus needs at least one image of side >= 16"));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    corpus(spec)
        .into_iter()
        .map(|(id, img)| {
            let path = dir.join(format!("{id}.png"));
            save_image(&img, &path)?;
            Ok(path)
        })
        .collect()
}
