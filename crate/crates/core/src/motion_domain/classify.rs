use log::debug;
use rayon::prelude::*;

use crate::align::{fit_homography_ransac, warp, AlignError, HomographyFit, RansacParams};
use crate::dataset::{extract_patch_grid, ImageTooSmall};
use crate::exposure_domain::{is_well_exposed, ExposureThresholds};
use crate::flow::{is_globally_alignable, magnitude_histogram, FlowField};
use crate::imgcore::{linearize, ExposureStack, LdrImage, Mask, MetricConfig, REFERENCE};
use crate::rng::{derive_seed, Stream};

use super::fusion::{consistency_psnr, fuse_static};
use super::pair::{LabelSource, SubsetTag, SupervisionPair};
use super::patch::{is_static, PatchStack};

/// Index of each flow in the four-flow array.
pub const FLOW_REF_TO_SHORT: usize = 0;
pub const FLOW_SHORT_TO_REF: usize = 1;
pub const FLOW_REF_TO_LONG: usize = 2;
pub const FLOW_LONG_TO_REF: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionConfig {
    pub patch_size: usize,
    pub stride: usize,
    /// Dominant flow magnitude, in pixels, below which a scene is aligned.
    pub t_f: f64,
    pub consistency_db: f64,
    pub thresholds: ExposureThresholds,
    pub ransac: RansacParams,
    pub metric: MetricConfig,
    pub seed: u64,
}

impl Default for MotionConfig {
    fn default() -> Self {
        Self {
            patch_size: 128,
            stride: 64,
            t_f: 15.0,
            consistency_db: 45.0,
            thresholds: ExposureThresholds::default(),
            ransac: RansacParams::default(),
            metric: MetricConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatchClass {
    Static,
    Dynamic,
}

/// What happened to a patch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PatchFate {
    Fused {
        consistency_db: f64,
    },
    /// Warped frames do not cover the patch.
    RejectedWarp,
    /// Fused label disagrees with the reference; `None` when the reference
    /// has no well-exposed pixel to compare against.
    RejectedConsistency {
        db: Option<f64>,
    },
    ReferenceLabel,
    Discarded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatchReport {
    pub index: usize,
    pub origin: (usize, usize),
    /// `None` when the scene was not globally alignable.
    pub class: Option<PatchClass>,
    pub reference_well_exposed: bool,
    pub fate: PatchFate,
}

/// Result of the global-motion gate and homography fits.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneAlignment {
    /// Dominant magnitude bin centers of the reference-to-short and
    /// reference-to-long flows.
    pub mode_centers: Option<(f64, f64)>,
    pub short_fit: Option<HomographyFit>,
    pub long_fit: Option<HomographyFit>,
    pub failure: Option<AlignError>,
}

impl SceneAlignment {
    pub fn alignable(&self) -> bool {
        self.short_fit.is_some() && self.long_fit.is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MotionOutcome {
    pub alignment: SceneAlignment,
    pub reports: Vec<PatchReport>,
    /// Ordered by patch index.
    pub pairs: Vec<SupervisionPair>,
}

/// Gate on the dominant flow magnitudes and fit the short and long
/// homographies into the reference frame.
pub fn align_scene(stack: &ExposureStack, flows: &[FlowField; 4], cfg: &MotionConfig) -> SceneAlignment {
    let mut out = SceneAlignment {
        mode_centers: None,
        short_fit: None,
        long_fit: None,
        failure: None,
    };
    let (Ok(h10), Ok(h12)) = (
        magnitude_histogram(&flows[FLOW_REF_TO_SHORT]),
        magnitude_histogram(&flows[FLOW_REF_TO_LONG]),
    ) else {
        return out;
    };
    out.mode_centers = Some((h10.mode_center(), h12.mode_center()));
    if !is_globally_alignable(&h10, &h12, cfg.t_f) {
        return out;
    }
    let fit = |k: usize, idx: u64| -> Result<HomographyFit, AlignError> {
        let hist = magnitude_histogram(&flows[k]).map_err(|_| AlignError::TooFewCorrespondences {
            found: 0,
            needed: cfg.ransac.min_correspondences,
        })?;
        let seed = derive_seed(cfg.seed, &stack.scene_id, idx, Stream::Ransac);
        fit_homography_ransac(&flows[k], &hist, &cfg.ransac, seed)
    };
    match (fit(FLOW_SHORT_TO_REF, 0), fit(FLOW_LONG_TO_REF, 2)) {
        (Ok(s), Ok(l)) => {
            out.short_fit = Some(s);
            out.long_fit = Some(l);
        }
        (Err(e), _) | (_, Err(e)) => out.failure = Some(e),
    }
    out
}

fn reference_pair(ps: &PatchStack, stack: &ExposureStack, dataset: &str, seed: u64) -> SupervisionPair {
    let gamma = stack.gamma();
    SupervisionPair {
        scene_id: stack.scene_id.clone(),
        dataset: dataset.to_string(),
        index: ps.index,
        origin: ps.origin,
        tag: SubsetTag::Md,
        source: LabelSource::WellExposedReference,
        ldr: ps.raw.clone(),
        label: linearize(&ps.raw[REFERENCE], 0.0, gamma),
        ev: stack.relative_ev(),
        gamma,
        shifts: [[0, 0]; 3],
        gain: None,
        consistency_db: None,
        seed,
    }
}

fn label_patch(
    ps: &PatchStack,
    stack: &ExposureStack,
    aligned: bool,
    dataset: &str,
    cfg: &MotionConfig,
) -> (PatchReport, Option<SupervisionPair>) {
    let well_exposed = is_well_exposed(&ps.raw[REFERENCE], &cfg.thresholds);
    let mut report = PatchReport {
        index: ps.index,
        origin: ps.origin,
        class: None,
        reference_well_exposed: well_exposed,
        fate: PatchFate::Discarded,
    };
    if aligned && is_static(ps) {
        report.class = Some(PatchClass::Static);
        let ev = stack.relative_ev();
        let Ok(y) = fuse_static(ps, ev, stack.gamma()) else {
            report.fate = PatchFate::RejectedWarp;
            return (report, None);
        };
        let db = consistency_psnr(
            &y,
            &ps.raw[REFERENCE],
            0.0,
            stack.gamma(),
            &cfg.thresholds,
            &cfg.metric,
        )
        .ok();
        match db {
            Some(db) if db >= cfg.consistency_db => {
                report.fate = PatchFate::Fused { consistency_db: db };
                let pair = SupervisionPair {
                    source: LabelSource::StaticFusion,
                    label: y,
                    consistency_db: Some(db),
                    ..reference_pair(ps, stack, dataset, cfg.seed)
                };
                (report, Some(pair))
            }
            db => {
                report.fate = PatchFate::RejectedConsistency { db };
                (report, None)
            }
        }
    } else {
        if aligned {
            report.class = Some(PatchClass::Dynamic);
        }
        if well_exposed {
            report.fate = PatchFate::ReferenceLabel;
            (report, Some(reference_pair(ps, stack, dataset, cfg.seed)))
        } else {
            (report, None)
        }
    }
}

/// Patch classification and motion-domain labeling for one scene. Flows
/// are ordered as the `FLOW_*` constants and must match the frame size.
pub fn classify_and_label(
    stack: &ExposureStack,
    flows: &[FlowField; 4],
    dataset: &str,
    cfg: &MotionConfig,
) -> Result<MotionOutcome, ImageTooSmall> {
    for f in flows {
        assert_eq!(
            (f.width, f.height),
            (stack.width(), stack.height()),
            "flow size must match the frames"
        );
    }
    let grid = extract_patch_grid(stack.width(), stack.height(), cfg.patch_size, cfg.stride)?;
    let alignment = align_scene(stack, flows, cfg);
    let warped: Option<[(LdrImage, Mask); 2]> = match (&alignment.short_fit, &alignment.long_fit) {
        (Some(s), Some(l)) => Some([
            warp(stack.frame(0), &s.homography),
            warp(stack.frame(2), &l.homography),
        ]),
        _ => None,
    };
    debug!(
        "scene {}: modes {:?}, alignable {}",
        stack.scene_id,
        alignment.mode_centers,
        warped.is_some()
    );
    let results: Vec<_> = grid
        .par_iter()
        .enumerate()
        .map(|(index, &origin)| {
            let w = warped.as_ref().map(|[(s, sm), (l, lm)]| (s, sm, l, lm));
            let ps = PatchStack::extract(index, origin, cfg.patch_size, stack.frames(), w, flows)
                .expect("grid origins lie inside the frame");
            label_patch(&ps, stack, warped.is_some(), dataset, cfg)
        })
        .collect();
    let mut reports = Vec::with_capacity(results.len());
    let mut pairs = Vec::new();
    for (r, p) in results {
        reports.push(r);
        pairs.extend(p);
    }
    Ok(MotionOutcome {
        alignment,
        reports,
        pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exposure_domain::reexpose;
    use crate::imgcore::{HdrImage, Raster};

    fn texture(w: usize, h: usize, dx: f32) -> HdrImage {
        HdrImage::from_fn(w, h, |x, y| {
            let (xf, yf) = (x as f32 - dx, y as f32);
            let v = 0.18 * (1.0 + 0.6 * (0.21 * xf).sin() * (0.17 * yf).cos());
            [v, 0.9 * v, 0.8 * v]
        })
        .unwrap()
    }

    fn stack_from(r: [HdrImage; 3]) -> ExposureStack {
        let ev = [-1.0f32, 0.0, 1.0];
        let frames = [0, 1, 2].map(|k| reexpose(&r[k], ev[k], 2.2, Some(16)));
        ExposureStack::new("s", frames, ev, 2.2).unwrap()
    }

    #[test]
    fn static_scene_fuses_every_patch() {
        let r = texture(256, 192, 0.0);
        let stack = stack_from([r.clone(), r.clone(), r]);
        let flows = [0, 1, 2, 3].map(|_| FlowField::zeros(256, 192));
        let out = classify_and_label(&stack, &flows, "d", &MotionConfig::default()).unwrap();
        assert!(out.alignment.alignable());
        assert_eq!(out.reports.len(), 3 * 2);
        assert_eq!(out.pairs.len(), 6);
        for p in &out.pairs {
            assert_eq!(p.tag, SubsetTag::Md);
            assert_eq!(p.source, LabelSource::StaticFusion);
            assert!(p.consistency_db.unwrap() >= 45.0);
        }
    }

    #[test]
    fn large_global_motion_skips_fusion() {
        let r = texture(256, 128, 0.0);
        let stack = stack_from([r.clone(), r.clone(), r]);
        let flows = [0, 1, 2, 3].map(|_| FlowField::uniform(256, 128, [20.0, 0.0]));
        let out = classify_and_label(&stack, &flows, "d", &MotionConfig::default()).unwrap();
        assert!(!out.alignment.alignable());
        assert!(out.reports.iter().all(|r| r.class.is_none()));
        assert!(out
            .pairs
            .iter()
            .all(|p| p.source == LabelSource::WellExposedReference));
        assert_eq!(out.pairs.len(), 3);
    }

    #[test]
    fn local_motion_routes_to_dynamic_branch() {
        let r = texture(256, 128, 0.0);
        let stack = stack_from([r.clone(), r.clone(), r]);
        let mut flows = [0, 1, 2, 3].map(|_| FlowField::zeros(256, 128));
        flows[FLOW_REF_TO_LONG] = FlowField::from_fn(256, 128, |x, y| {
            if (150..170).contains(&x) && (40..60).contains(&y) {
                [6.0, 0.0]
            } else {
                [0.0, 0.0]
            }
        });
        let out = classify_and_label(&stack, &flows, "d", &MotionConfig::default()).unwrap();
        let classes: Vec<_> = out.reports.iter().map(|r| r.class.unwrap()).collect();
        assert_eq!(
            classes,
            vec![PatchClass::Static, PatchClass::Dynamic, PatchClass::Dynamic]
        );
        assert_eq!(out.pairs[1].source, LabelSource::WellExposedReference);
        assert_eq!(out.pairs[1].label, linearize(&out.pairs[1].ldr[1], 0.0, 2.2));
        assert_eq!(out.pairs[1].ldr[0], stack.frame(0).crop(64, 0, 128, 128).unwrap());
        let first = out.pairs[0].label.width();
        assert_eq!(first, 128);
    }

    #[test]
    fn dark_dynamic_patch_is_discarded() {
        let dark = HdrImage::new(128, 128, vec![0.0005; 128 * 128 * 3]).unwrap();
        let stack = stack_from([dark.clone(), dark.clone(), dark]);
        let flows = [0, 1, 2, 3].map(|_| FlowField::uniform(128, 128, [30.0, 0.0]));
        let out = classify_and_label(&stack, &flows, "d", &MotionConfig::default()).unwrap();
        assert!(out.pairs.is_empty());
        assert_eq!(out.reports[0].fate, PatchFate::Discarded);
    }
}
