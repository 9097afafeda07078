use thiserror::Error;

use super::image::{HdrImage, LdrImage, Mask, Raster, CHANNELS};

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("mask selects no pixels")]
    EmptyMask,
    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
}

/// Parameters shared by the tonemapped and linear quality metrics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricConfig {
    pub mu: f32,
    /// Reported PSNR when the two inputs are identical.
    pub psnr_cap: f64,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            mu: 5000.0,
            psnr_cap: 100.0,
        }
    }
}

/// Converts gamma-encoded LDR samples into exposure-normalized linear radiance:
/// `img^gamma / 2^ev`.
pub fn linearize(img: &LdrImage, ev: f32, gamma: f32) -> HdrImage {
    assert!(gamma > 0.0, "gamma must be positive");
    let scale = (-ev).exp2();
    let data = img.samples().iter().map(|v| v.powf(gamma) * scale).collect();
    HdrImage::new(img.width(), img.height(), data).expect("linearized LDR stays finite")
}

/// The mu-law compressive curve `log(1 + mu x) / log(1 + mu)`.
#[inline]
pub fn mu_law(x: f32, mu: f32) -> f32 {
    ((mu as f64 * x as f64).ln_1p() / (mu as f64).ln_1p()) as f32
}

pub fn tonemap_mu(img: &HdrImage, cfg: &MetricConfig) -> HdrImage {
    let data = img.samples().iter().map(|&v| mu_law(v, cfg.mu)).collect();
    HdrImage::new(img.width(), img.height(), data).expect("mu-law of finite input is finite")
}

/// Peak signal-to-noise ratio with peak 1.0. `mask` restricts the error to
/// selected pixels (all channels of a selected pixel count).
pub fn psnr<A: Raster, B: Raster>(
    a: &A,
    b: &B,
    mask: Option<&Mask>,
    cfg: &MetricConfig,
) -> Result<f64, MetricError> {
    let mse = mse(a, b, mask)?;
    Ok(psnr_from_mse(mse, cfg.psnr_cap))
}

pub fn psnr_from_mse(mse: f64, cap: f64) -> f64 {
    if mse <= 0.0 {
        return cap;
    }
    (10.0 * (1.0 / mse).log10()).min(cap)
}

pub fn mse<A: Raster, B: Raster>(a: &A, b: &B, mask: Option<&Mask>) -> Result<f64, MetricError> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(MetricError::DimensionMismatch(
            a.width(),
            a.height(),
            b.width(),
            b.height(),
        ));
    }
    if let Some(m) = mask {
        if m.width != a.width() || m.height != a.height() {
            return Err(MetricError::DimensionMismatch(
                a.width(),
                a.height(),
                m.width,
                m.height,
            ));
        }
    }
    let mut sum = 0.0f64;
    let mut n = 0usize;
    for (i, (pa, pb)) in a
        .samples()
        .chunks_exact(CHANNELS)
        .zip(b.samples().chunks_exact(CHANNELS))
        .enumerate()
    {
        if mask.is_some_and(|m| !m.bits[i]) {
            continue;
        }
        for c in 0..CHANNELS {
            let d = pa[c] as f64 - pb[c] as f64;
            sum += d * d;
        }
        n += CHANNELS;
    }
    if n == 0 {
        return Err(MetricError::EmptyMask);
    }
    Ok(sum / n as f64)
}

/// PSNR in the mu-law domain.
pub fn psnr_mu(a: &HdrImage, b: &HdrImage, cfg: &MetricConfig) -> Result<f64, MetricError> {
    psnr(&tonemap_mu(a, cfg), &tonemap_mu(b, cfg), None, cfg)
}
