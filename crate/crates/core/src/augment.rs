//! Global-translation camera motion applied to the non-reference frames.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::exposure_domain::{reexpose, GainMask};
use crate::imgcore::{linearize, LdrImage, Raster, REFERENCE};
use crate::motion_domain::{SubsetTag, SupervisionPair};

#[derive(Debug, Error, PartialEq)]
pub enum AugError {
    #[error("shift {shift:?} of frame {frame} leaves the available context")]
    InsufficientMargin { frame: usize, shift: [i32; 2] },
    #[error("pseudo-static motion applies only to exposure-domain pairs, got {0}")]
    NotExposureDomain(SubsetTag),
    #[error("pair is already augmented ({0})")]
    AlreadyAugmented(SubsetTag),
    #[error("invalid augmentation config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AugMode {
    /// Small zero-mean shake.
    PseudoStatic,
    /// Larger displacement of either sign per axis.
    FreeMoving,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionAugConfig {
    pub pseudo_static_sigma: f64,
    pub free_moving_mean: f64,
    pub free_moving_sigma: f64,
    /// Context kept around each patch for re-cropping, in pixels.
    pub margin: usize,
}

impl Default for MotionAugConfig {
    fn default() -> Self {
        Self {
            pseudo_static_sigma: 4.0,
            free_moving_mean: 20.0,
            free_moving_sigma: 3.0,
            margin: 32,
        }
    }
}

impl MotionAugConfig {
    pub fn validate(&self) -> Result<(), AugError> {
        if !(self.pseudo_static_sigma > 0.0 && self.free_moving_sigma > 0.0) {
            return Err(AugError::Config("standard deviations must be positive".into()));
        }
        if !self.free_moving_mean.is_finite() {
            return Err(AugError::Config("free-moving mean must be finite".into()));
        }
        Ok(())
    }
}

/// One unrounded `(dx, dy)` draw.
pub fn draw_displacement<R: Rng>(rng: &mut R, mode: AugMode, cfg: &MotionAugConfig) -> [f64; 2] {
    match mode {
        AugMode::PseudoStatic => {
            let n = Normal::new(0.0, cfg.pseudo_static_sigma).expect("validated sigma");
            [n.sample(rng), n.sample(rng)]
        }
        AugMode::FreeMoving => {
            let n = Normal::new(cfg.free_moving_mean, cfg.free_moving_sigma).expect("validated sigma");
            let mut axis = || {
                let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                sign * n.sample(rng)
            };
            [axis(), axis()]
        }
    }
}

/// Integer shifts for short, reference and long; the reference never moves.
pub fn draw_shifts<R: Rng>(rng: &mut R, mode: AugMode, cfg: &MotionAugConfig) -> [[i32; 2]; 3] {
    let mut round = || draw_displacement(rng, mode, cfg).map(|v| v.round() as i32);
    let short = round();
    let long = round();
    [short, [0, 0], long]
}

/// Full-resolution neighborhood the displaced crops are taken from.
#[derive(Debug, Clone, PartialEq)]
pub struct AugContext {
    /// Short, reference and long context images, all the same size.
    pub frames: [LdrImage; 3],
    /// Top-left of the pair's patch inside the context.
    pub patch_origin: (usize, usize),
}

impl AugContext {
    /// Context for a motion-domain pair: the original frames themselves.
    pub fn from_frames(frames: [LdrImage; 3], patch_origin: (usize, usize)) -> Self {
        Self { frames, patch_origin }
    }

    /// Up to `margin` pixels of each frame around the patch at `origin`.
    pub fn around(frames: &[LdrImage; 3], origin: (usize, usize), patch: usize, margin: usize) -> Self {
        let (w, h) = (frames[0].width(), frames[0].height());
        let x0 = origin.0.saturating_sub(margin);
        let y0 = origin.1.saturating_sub(margin);
        let x1 = (origin.0 + patch + margin).min(w);
        let y1 = (origin.1 + patch + margin).min(h);
        Self {
            frames: [0, 1, 2].map(|k| {
                frames[k]
                    .crop(x0, y0, x1 - x0, y1 - y0)
                    .expect("region is clamped to the frame")
            }),
            patch_origin: (origin.0 - x0, origin.1 - y0),
        }
    }

    /// Context for an exposure-domain pair: the gain mask is extended over a
    /// neighborhood of up to `margin` pixels around the patch (clamped to the
    /// reference frame) and re-exposed at each EV.
    #[allow(clippy::too_many_arguments)]
    pub fn for_exposure_pair(
        reference: &LdrImage,
        origin: (usize, usize),
        patch: usize,
        margin: usize,
        mask: &GainMask,
        ev: [f32; 3],
        gamma: f32,
    ) -> Self {
        let x0 = origin.0.saturating_sub(margin);
        let y0 = origin.1.saturating_sub(margin);
        let x1 = (origin.0 + patch + margin).min(reference.width());
        let y1 = (origin.1 + patch + margin).min(reference.height());
        let region = reference
            .crop(x0, y0, x1 - x0, y1 - y0)
            .expect("region is clamped to the frame");
        let offset = (x0 as isize - origin.0 as isize, y0 as isize - origin.1 as isize);
        let label = mask.apply(&linearize(&region, 0.0, gamma), offset);
        Self {
            frames: ev.map(|e| reexpose(&label, e, gamma, None)),
            patch_origin: (origin.0 - x0, origin.1 - y0),
        }
    }
}

/// Re-crops the non-reference frames of `pair` at the patch origin plus the
/// given shifts. The reference frame and label are left untouched.
pub fn apply_shifts(
    pair: &SupervisionPair,
    ctx: &AugContext,
    shifts: [[i32; 2]; 3],
    tag: SubsetTag,
) -> Result<SupervisionPair, AugError> {
    let size = pair.ldr[REFERENCE].width();
    let mut out = pair.clone();
    for k in [0, 2] {
        let [dx, dy] = shifts[k];
        let x = ctx.patch_origin.0 as i64 + dx as i64;
        let y = ctx.patch_origin.1 as i64 + dy as i64;
        let img = &ctx.frames[k];
        let fits = x >= 0 && y >= 0 && x as usize + size <= img.width() && y as usize + size <= img.height();
        if !fits {
            return Err(AugError::InsufficientMargin {
                frame: k,
                shift: shifts[k],
            });
        }
        out.ldr[k] = img
            .crop(x as usize, y as usize, size, size)
            .expect("bounds checked above");
    }
    out.shifts = [shifts[0], [0, 0], shifts[2]];
    out.tag = tag;
    Ok(out)
}

/// Tag a pair carries after augmentation in `mode`. Pseudo-static shake
/// belongs to the base exposure subset; free motion moves to the `M`
/// subsets.
pub fn augmented_tag(tag: SubsetTag, mode: AugMode) -> Result<SubsetTag, AugError> {
    match (mode, tag) {
        (AugMode::PseudoStatic, SubsetTag::Ed) => Ok(SubsetTag::Ed),
        (AugMode::PseudoStatic, t) => Err(AugError::NotExposureDomain(t)),
        (AugMode::FreeMoving, t @ (SubsetTag::Ed | SubsetTag::Md)) => Ok(t.with_motion()),
        (AugMode::FreeMoving, t) => Err(AugError::AlreadyAugmented(t)),
    }
}

pub fn augment_pair(
    pair: &SupervisionPair,
    ctx: &AugContext,
    mode: AugMode,
    cfg: &MotionAugConfig,
    seed: u64,
) -> Result<SupervisionPair, AugError> {
    let tag = augmented_tag(pair.tag, mode)?;
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shifts = draw_shifts(&mut rng, mode, cfg);
    apply_shifts(pair, ctx, shifts, tag)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imgcore::HdrImage;
    use crate::motion_domain::LabelSource;

    fn frame(seed: usize) -> LdrImage {
        LdrImage::from_fn(64, 64, |x, y| {
            let v = ((x * 7 + y * 13 + seed * 31) % 97) as f32 / 96.0;
            [v, 1.0 - v, 0.5]
        })
        .unwrap()
    }

    fn pair_at(
        frames: &[LdrImage; 3],
        origin: (usize, usize),
        size: usize,
        tag: SubsetTag,
    ) -> SupervisionPair {
        let ldr = frames
            .clone()
            .map(|f| f.crop(origin.0, origin.1, size, size).unwrap());
        SupervisionPair {
            scene_id: "s".into(),
            dataset: "d".into(),
            index: 0,
            origin,
            tag,
            source: LabelSource::WellExposedReference,
            label: linearize(&ldr[1], 0.0, 2.2),
            ldr,
            ev: [-2.0, 0.0, 2.0],
            gamma: 2.2,
            shifts: [[0, 0]; 3],
            gain: None,
            consistency_db: None,
            seed: 0,
        }
    }

    #[test]
    fn zero_shift_only_retags() {
        let frames = [frame(0), frame(1), frame(2)];
        let p = pair_at(&frames, (20, 20), 16, SubsetTag::Md);
        let ctx = AugContext::from_frames(frames, (20, 20));
        let q = apply_shifts(&p, &ctx, [[0, 0]; 3], SubsetTag::Mdm).unwrap();
        assert_eq!(q.ldr, p.ldr);
        assert_eq!(q.label, p.label);
        assert_eq!(q.tag, SubsetTag::Mdm);
    }

    #[test]
    fn shifted_crop_matches_source() {
        let frames = [frame(0), frame(1), frame(2)];
        let p = pair_at(&frames, (22, 24), 16, SubsetTag::Md);
        let ctx = AugContext::from_frames(frames.clone(), (22, 24));
        let q = apply_shifts(&p, &ctx, [[21, -19], [0, 0], [-3, 4]], SubsetTag::Mdm).unwrap();
        assert_eq!(q.ldr[0], frames[0].crop(43, 5, 16, 16).unwrap());
        assert_eq!(q.ldr[2], frames[2].crop(19, 28, 16, 16).unwrap());
        assert_eq!(q.ldr[1], p.ldr[1]);
        assert_eq!(q.label, p.label);
        assert_eq!(q.shifts, [[21, -19], [0, 0], [-3, 4]]);
    }

    #[test]
    fn cropped_context_matches_full_frames() {
        let frames = [frame(0), frame(1), frame(2)];
        let p = pair_at(&frames, (30, 12), 16, SubsetTag::Md);
        let full = AugContext::from_frames(frames.clone(), (30, 12));
        let near = AugContext::around(&frames, (30, 12), 16, 10);
        assert_eq!(near.patch_origin, (10, 10));
        let shifts = [[-9, 7], [0, 0], [10, -10]];
        assert_eq!(
            apply_shifts(&p, &full, shifts, SubsetTag::Mdm),
            apply_shifts(&p, &near, shifts, SubsetTag::Mdm)
        );
        assert!(apply_shifts(&p, &near, [[11, 0], [0, 0], [0, 0]], SubsetTag::Mdm).is_err());
    }

    #[test]
    fn out_of_context_shift_is_rejected() {
        let frames = [frame(0), frame(1), frame(2)];
        let p = pair_at(&frames, (0, 0), 16, SubsetTag::Md);
        let ctx = AugContext::from_frames(frames, (0, 0));
        assert_eq!(
            apply_shifts(&p, &ctx, [[-1, 0], [0, 0], [0, 0]], SubsetTag::Mdm),
            Err(AugError::InsufficientMargin {
                frame: 0,
                shift: [-1, 0]
            })
        );
    }

    #[test]
    fn pseudo_static_needs_exposure_pair() {
        let frames = [frame(0), frame(1), frame(2)];
        let p = pair_at(&frames, (20, 20), 16, SubsetTag::Md);
        let ctx = AugContext::from_frames(frames, (20, 20));
        let cfg = MotionAugConfig::default();
        assert_eq!(
            augment_pair(&p, &ctx, AugMode::PseudoStatic, &cfg, 3),
            Err(AugError::NotExposureDomain(SubsetTag::Md))
        );
        assert_eq!(
            augmented_tag(SubsetTag::Ed, AugMode::FreeMoving),
            Ok(SubsetTag::Edm)
        );
        assert_eq!(
            augmented_tag(SubsetTag::Md, AugMode::FreeMoving),
            Ok(SubsetTag::Mdm)
        );
        assert!(augmented_tag(SubsetTag::Edm, AugMode::FreeMoving).is_err());
    }

    #[test]
    fn seeded_augmentation_is_reproducible() {
        let frames = [frame(0), frame(1), frame(2)];
        let p = pair_at(&frames, (24, 24), 16, SubsetTag::Ed);
        let ctx = AugContext::from_frames(frames, (24, 24));
        let cfg = MotionAugConfig::default();
        let a = augment_pair(&p, &ctx, AugMode::PseudoStatic, &cfg, 11);
        let b = augment_pair(&p, &ctx, AugMode::PseudoStatic, &cfg, 11);
        assert_eq!(a, b);
        assert_eq!(a.unwrap().shifts[1], [0, 0]);
    }

    #[test]
    fn free_moving_draw_statistics() {
        let cfg = MotionAugConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let n = 10_000;
        let mut folded = [Vec::with_capacity(n), Vec::with_capacity(n)];
        let mut positive = [0usize; 2];
        for _ in 0..n {
            let d = draw_displacement(&mut rng, AugMode::FreeMoving, &cfg);
            for a in 0..2 {
                folded[a].push(d[a].abs());
                positive[a] += (d[a] > 0.0) as usize;
            }
        }
        for a in 0..2 {
            let mean = folded[a].iter().sum::<f64>() / n as f64;
            let var = folded[a].iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let sd = var.sqrt();
            let se_mean = 3.0 / (n as f64).sqrt();
            let se_sd = 3.0 / (2.0 * (n as f64 - 1.0)).sqrt();
            assert!((mean - 20.0).abs() < 3.0 * se_mean, "axis {a} mean {mean}");
            assert!((sd - 3.0).abs() < 3.0 * se_sd, "axis {a} sd {sd}");
            // sign is a fair coin
            let p = positive[a] as f64 / n as f64;
            assert!((p - 0.5).abs() < 3.0 * (0.25 / n as f64).sqrt(), "axis {a} p {p}");
        }
    }

    #[test]
    fn pseudo_static_draws_are_centered() {
        let cfg = MotionAugConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 10_000;
        let xs: Vec<f64> = (0..n)
            .map(|_| draw_displacement(&mut rng, AugMode::PseudoStatic, &cfg)[0])
            .collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let sd = (xs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        assert!(mean.abs() < 3.0 * 4.0 / (n as f64).sqrt());
        assert!((sd - 4.0).abs() < 3.0 * 4.0 / (2.0 * n as f64).sqrt());
    }

    #[test]
    fn exposure_context_continues_the_pair() {
        let reference = frame(3);
        let mask = GainMask::unit(16);
        let ev = [-2.0, 0.0, 2.0];
        let ctx = AugContext::for_exposure_pair(&reference, (8, 40), 16, 32, &mask, ev, 2.2);
        assert_eq!(ctx.patch_origin, (8, 32));
        assert_eq!(ctx.frames[0].width(), 8 + 16 + 32);
        assert_eq!(ctx.frames[0].height(), 64 - 8);
        let patch = reference.crop(8, 40, 16, 16).unwrap();
        let label: HdrImage = linearize(&patch, 0.0, 2.2);
        let short = reexpose(&label, -2.0, 2.2, None);
        assert_eq!(ctx.frames[0].crop(8, 32, 16, 16).unwrap(), short);
    }
}
