use crate::error::Result;
use crate::image::{gradient_field, Image};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Norm {
    L1,
    /// squared ℓ2
    L2,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VrConfig {
    pub data_norm: Norm,
    pub smooth_norm: Norm,
    pub lambda: f64,
}

pub const VR_PRESETS: [VrConfig; 6] = [
    VrConfig { data_norm: Norm::L1, smooth_norm: Norm::L1, lambda: 0.5 },
    VrConfig { data_norm: Norm::L1, smooth_norm: Norm::L1, lambda: 1.0 },
    VrConfig { data_norm: Norm::L2, smooth_norm: Norm::L1, lambda: 0.5 },
    VrConfig { data_norm: Norm::L2, smooth_norm: Norm::L1, lambda: 1.0 },
    VrConfig { data_norm: Norm::L2, smooth_norm: Norm::L2, lambda: 0.5 },
    VrConfig { data_norm: Norm::L2, smooth_norm: Norm::L2, lambda: 1.0 },
];

/// Variational energy `(|I - Î|_ld + λ |∇Î|_ls) / N` of the result under
/// each preset; ℓ2 terms use the squared norm.
pub fn feature_vr<T: Scalar>(noisy: &Image<T>, denoised: &Image<T>) -> Result<[f64; 6]> {
    noisy.check_same_shape(denoised)?;
    let g = gradient_field(denoised)?;
    let (mut d1, mut d2) = (0.0, 0.0);
    for (&a, &b) in noisy.data().iter().zip(denoised.data()) {
        let d = (a - b).f64();
        d1 += d.abs();
        d2 += d * d;
    }
    let (mut s1, mut s2) = (0.0, 0.0);
    for (&gx, &gy) in g.dx.iter().zip(&g.dy) {
        let (gx, gy) = (gx.f64(), gy.f64());
        s1 += gx.abs() + gy.abs();
        s2 += gx * gx + gy * gy;
    }
    let n = noisy.pixels() as f64;
    let mut out = [0.0; 6];
    for (o, cfg) in out.iter_mut().zip(&VR_PRESETS) {
        let data = match cfg.data_norm {
            Norm::L1 => d1,
            Norm::L2 => d2,
        };
        let smooth = match cfg.smooth_norm {
            Norm::L1 => s1,
            Norm::L2 => s2,
        };
        *o = (data + cfg.lambda * smooth) / n;
    }
    Ok(out)
}
