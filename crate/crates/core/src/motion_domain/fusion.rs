use thiserror::Error;

use crate::exposure_domain::{reexpose, well_exposed_mask, ExposureThresholds};
use crate::imgcore::{
    psnr, HdrImage, LdrImage, MetricConfig, MetricError, Plane, Raster, CHANNELS, LONG, REFERENCE, SHORT,
};

use super::patch::PatchStack;

#[derive(Debug, Error, PartialEq)]
pub enum FusionError {
    #[error("patch {0} has no warped frames; the scene is not globally alignable")]
    NotAligned(usize),
    #[error("warped frame {frame} of patch {index} has {holes} pixels outside the source")]
    InvalidWarpRegion {
        index: usize,
        frame: usize,
        holes: usize,
    },
}

/// Below this total confidence a pixel falls back to a single frame.
pub const MIN_TOTAL_WEIGHT: f32 = 1e-4;

/// Confidence of LDR value `z` in frame `k`: a hat peaking at mid-gray, with
/// the short frame trusted up to saturation and the long frame trusted down
/// to black.
#[inline]
pub fn triangle_weight(k: usize, z: f32) -> f32 {
    let z = z.clamp(0.0, 1.0);
    match k {
        SHORT => (2.0 * z).min(1.0),
        LONG => (2.0 * (1.0 - z)).min(1.0),
        _ => 2.0 * z.min(1.0 - z),
    }
}

/// Per-frame, per-channel weight maps, normalized to sum to 1 at every
/// sample.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionWeights {
    pub width: usize,
    pub height: usize,
    /// Interleaved RGB weights for short, reference and long.
    pub lambda: [Vec<f32>; 3],
}

impl FusionWeights {
    pub fn from_patches(patches: [&LdrImage; 3]) -> Self {
        let n = patches[0].samples().len();
        let mut lambda = [vec![0f32; n], vec![0f32; n], vec![0f32; n]];
        for i in 0..n {
            let z = [0, 1, 2].map(|k| patches[k].samples()[i]);
            let mut w = [0, 1, 2].map(|k| triangle_weight(k, z[k]));
            let sum: f32 = w.iter().sum();
            if sum < MIN_TOTAL_WEIGHT {
                w = [0.0; 3];
                w[least_clipped(z)] = 1.0;
            } else {
                w.iter_mut().for_each(|v| *v /= sum);
            }
            for (l, wk) in lambda.iter_mut().zip(w) {
                l[i] = wk;
            }
        }
        Self {
            width: patches[0].width(),
            height: patches[0].height(),
            lambda,
        }
    }

    /// Weight of frame `k` averaged over channels.
    pub fn mean_plane(&self, k: usize) -> Plane {
        let data = self.lambda[k]
            .chunks_exact(CHANNELS)
            .map(|c| c.iter().sum::<f32>() / CHANNELS as f32)
            .collect();
        Plane::new(self.width, self.height, data)
    }
}

/// Frame farthest from both clipping ends; ties go to the reference, then
/// to the shorter exposure.
fn least_clipped(z: [f32; 3]) -> usize {
    let margin = z.map(|v| v.min(1.0 - v));
    let mut best = REFERENCE;
    for k in [SHORT, LONG] {
        if margin[k] > margin[best] {
            best = k;
        }
    }
    best
}

/// Merges linearized frames with the given weights:
/// `sum_k lambda_k X_k` where `X_k = z_k^gamma / 2^ev_k`.
pub fn merge_linear(patches: [&LdrImage; 3], weights: &FusionWeights, ev: [f32; 3], gamma: f32) -> HdrImage {
    let scale = ev.map(|e| (-e).exp2());
    let n = patches[0].samples().len();
    let mut out = vec![0f32; n];
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0f32;
        for k in 0..3 {
            let w = weights.lambda[k][i];
            if w > 0.0 {
                acc += w * patches[k].samples()[i].powf(gamma) * scale[k];
            }
        }
        *o = acc;
    }
    HdrImage::new(patches[0].width(), patches[0].height(), out)
        .expect("convex combination of radiances is finite and nonnegative")
}

/// Weighted linear-domain fusion of the aligned triplet. `ev` is relative
/// to the reference, so the result is reference-normalized.
pub fn fuse_static(ps: &PatchStack, ev: [f32; 3], gamma: f32) -> Result<HdrImage, FusionError> {
    let w = ps.warped.as_ref().ok_or(FusionError::NotAligned(ps.index))?;
    for (frame, m) in [(SHORT, &w.short_valid), (LONG, &w.long_valid)] {
        let holes = m.bits.len() - m.count();
        if holes > 0 {
            return Err(FusionError::InvalidWarpRegion {
                index: ps.index,
                frame,
                holes,
            });
        }
    }
    let patches = [&w.short, &ps.raw[REFERENCE], &w.long];
    let weights = FusionWeights::from_patches(patches);
    Ok(merge_linear(patches, &weights, ev, gamma))
}

/// PSNR between the label re-exposed at the reference EV and the reference
/// patch, over the reference's well-exposed pixels.
pub fn consistency_psnr(
    y: &HdrImage,
    ref_patch: &LdrImage,
    ev_ref: f32,
    gamma: f32,
    thresholds: &ExposureThresholds,
    metric: &MetricConfig,
) -> Result<f64, MetricError> {
    let mask = well_exposed_mask(ref_patch, thresholds);
    let rendered = reexpose(y, ev_ref, gamma, None);
    psnr(&rendered, ref_patch, Some(&mask), metric)
}

/// [`consistency_psnr`] against `threshold_db` (inclusive).
pub fn consistency_check(
    y: &HdrImage,
    ref_patch: &LdrImage,
    ev_ref: f32,
    gamma: f32,
    threshold_db: f64,
    thresholds: &ExposureThresholds,
) -> Result<bool, MetricError> {
    let db = consistency_psnr(y, ref_patch, ev_ref, gamma, thresholds, &MetricConfig::default())?;
    Ok(db >= threshold_db)
}
