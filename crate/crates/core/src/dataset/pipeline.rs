use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::augment::{augment_pair, AugContext, AugError, AugMode};
use crate::exposure_domain::{
    extract_saturation_mask, is_well_exposed, make_exposure_pair, presaturated_fraction, solve_gain,
    synth_line_mask, GainError, GainMask, GainProfile,
};
use crate::flow::{
    equalize_exposure, estimate_flow_planes, load_flo, FloError, FlowError, FlowField, FlowParams,
};
use crate::imgcore::io::{read_ldr, IoError};
use crate::imgcore::{
    linearize, ExposureStack, HdrImage, LdrImage, Mask, Raster, StackError, LONG, REFERENCE, SHORT,
};
use crate::motion_domain::{
    classify_and_label, MotionOutcome, PatchClass, PatchFate, PatchId, SceneAlignment, SupervisionPair,
};
use crate::rng::{derive_seed, rng_for, Stream};

use super::config::PipelineConfig;
use super::grid::{extract_patch_grid, ImageTooSmall};
use super::manifest::{Manifest, ManifestError, SceneManifest};
use super::pairio::{write_pair, PairError};
use super::stats::DatasetStats;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error("reading {path}: {source}")]
    Image { path: PathBuf, source: IoError },
    #[error(transparent)]
    Stack(#[from] StackError),
    #[error("loading flow {path}: {source}")]
    Flo { path: PathBuf, source: FloError },
    #[error(transparent)]
    Grid(#[from] ImageTooSmall),
    #[error("flow estimation: {0}")]
    Flow(#[from] FlowError),
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("output root {path}: {source}")]
    OutputRoot { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Write(#[from] PairError),
    #[error("thread pool: {0}")]
    Pool(String),
}

/// Order of the four flows: `1->0, 0->1, 1->2, 2->1`.
const FLOW_PAIRS: [(usize, usize); 4] = [
    (REFERENCE, SHORT),
    (SHORT, REFERENCE),
    (REFERENCE, LONG),
    (LONG, REFERENCE),
];

pub fn load_stack(sc: &SceneManifest, gamma: f32) -> Result<ExposureStack, SceneError> {
    sc.validate()?;
    let mut frames = Vec::with_capacity(3);
    for p in &sc.frames {
        frames.push(read_ldr(p).map_err(|source| SceneError::Image {
            path: p.clone(),
            source,
        })?);
    }
    let frames: [LdrImage; 3] = frames.try_into().expect("three frames");
    Ok(ExposureStack::new(sc.id.clone(), frames, sc.ev, gamma)?)
}

/// Flow from frame `a` to frame `b` after bringing both to the longer
/// exposure. A textureless source yields an all-invalid field.
pub fn flow_between(
    stack: &ExposureStack,
    a: usize,
    b: usize,
    params: &FlowParams,
) -> Result<FlowField, FlowError> {
    let ev = stack.ev();
    let (pa, pb) = equalize_exposure(stack.frame(a), ev[a], stack.frame(b), ev[b], stack.gamma());
    match estimate_flow_planes(&pa, &pb, params) {
        Err(FlowError::DegenerateImage) => Ok(FlowField::all_invalid(stack.width(), stack.height())),
        r => r,
    }
}

pub fn compute_flows(stack: &ExposureStack, params: &FlowParams) -> Result<[FlowField; 4], FlowError> {
    let flows: Vec<FlowField> = FLOW_PAIRS
        .par_iter()
        .map(|&(a, b)| flow_between(stack, a, b, params))
        .collect::<Result<_, _>>()?;
    Ok(flows.try_into().expect("four flows"))
}

pub fn scene_flows(
    sc: &SceneManifest,
    stack: &ExposureStack,
    cfg: &PipelineConfig,
) -> Result<[FlowField; 4], SceneError> {
    match &sc.flows {
        Some(paths) => {
            let mut out = Vec::with_capacity(4);
            for p in paths {
                let f =
                    load_flo(p, Some((stack.width(), stack.height()))).map_err(|source| SceneError::Flo {
                        path: p.clone(),
                        source,
                    })?;
                out.push(f);
            }
            Ok(out.try_into().expect("four flows"))
        }
        None => Ok(compute_flows(stack, &cfg.flow_params())?),
    }
}

/// Saturation supports of non-well-exposed reference patches, per scene
/// and across all scenes in manifest order.
#[derive(Debug, Clone, Default)]
pub struct DonorPool {
    pub local: BTreeMap<String, Vec<Mask>>,
    pub global: Vec<Mask>,
}

impl DonorPool {
    /// Donor candidates for a scene: its own pool, or every donor when it
    /// has none.
    pub fn for_scene(&self, scene: &str) -> &[Mask] {
        match self.local.get(scene) {
            Some(v) if !v.is_empty() => v,
            _ => &self.global,
        }
    }
}

/// Donor masks from the reference frame of one scene.
pub fn scene_donors(reference: &LdrImage, cfg: &PipelineConfig) -> Result<Vec<Mask>, ImageTooSmall> {
    let th = cfg.thresholds();
    let n = cfg.patch_size;
    let grid = extract_patch_grid(reference.width(), reference.height(), n, cfg.stride)?;
    Ok(grid
        .iter()
        .filter_map(|&(x, y)| {
            let p = reference.crop(x, y, n, n).expect("grid inside frame");
            if is_well_exposed(&p, &th) {
                None
            } else {
                extract_saturation_mask(&p, cfg.sat_level)
            }
        })
        .collect())
}

/// Counters for one scene beyond the emitted pairs.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SceneCounters {
    pub patches: usize,
    pub static_patches: usize,
    pub dynamic_patches: usize,
    pub fused: usize,
    pub rejected_warp: usize,
    pub rejected_consistency: usize,
    pub reference_labels: usize,
    pub exposure_pairs: usize,
    pub gain_unsatisfiable: usize,
    pub aug_skipped: usize,
}

#[derive(Debug, Clone)]
pub struct SceneOutput {
    pub motion: MotionOutcome,
    pub pairs: Vec<SupervisionPair>,
    pub counters: SceneCounters,
}

fn choose_gain_mask(
    stack: &ExposureStack,
    index: usize,
    patch_linear: &HdrImage,
    donors: &[Mask],
    cfg: &PipelineConfig,
) -> Result<(GainMask, f64), GainError> {
    let scene = stack.scene_id.as_str();
    let idx = index as u64;
    let n = cfg.patch_size;
    let ev_long = stack.relative_ev()[LONG];
    let gamma = stack.gamma();
    let use_transfer = !donors.is_empty()
        && rng_for(cfg.seed, scene, idx, Stream::MaskKind).random_bool(cfg.transfer_probability);
    let u = rng_for(cfg.seed, scene, idx, Stream::TargetFraction)
        .random_range(cfg.target_sat_min..=cfg.target_sat_max);
    let solve = |support: &Mask, profile: GainProfile<'_>| {
        let p0 = presaturated_fraction(patch_linear, support, ev_long);
        let target = p0 + (1.0 - p0) * u;
        solve_gain(patch_linear, support, profile, target, ev_long, gamma).map(|m| (m, target))
    };
    if use_transfer {
        let pick = rng_for(cfg.seed, scene, idx, Stream::Donor).random_range(0..donors.len());
        solve(&donors[pick], GainProfile::Transfer)
    } else {
        let line = synth_line_mask(&mut rng_for(cfg.seed, scene, idx, Stream::LineMask), n);
        solve(&line.support, GainProfile::Line(&line))
    }
}

fn record_aug(
    res: Result<SupervisionPair, AugError>,
    out: &mut Vec<SupervisionPair>,
    counters: &mut SceneCounters,
) {
    match res {
        Ok(p) => out.push(p),
        Err(_) => counters.aug_skipped += 1,
    }
}

/// Motion domain, exposure domain and augmentation for one loaded scene.
/// Pairs come out sorted by (tag, index).
pub fn process_scene(
    stack: &ExposureStack,
    flows: &[FlowField; 4],
    dataset: &str,
    donors: &[Mask],
    cfg: &PipelineConfig,
) -> Result<SceneOutput, SceneError> {
    let motion = classify_and_label(stack, flows, dataset, &cfg.motion())?;
    let mut c = SceneCounters {
        patches: motion.reports.len(),
        ..Default::default()
    };
    for r in &motion.reports {
        match r.class {
            Some(PatchClass::Static) => c.static_patches += 1,
            Some(PatchClass::Dynamic) => c.dynamic_patches += 1,
            None => {}
        }
        match r.fate {
            PatchFate::Fused { .. } => c.fused += 1,
            PatchFate::RejectedWarp => c.rejected_warp += 1,
            PatchFate::RejectedConsistency { .. } => c.rejected_consistency += 1,
            PatchFate::ReferenceLabel => c.reference_labels += 1,
            PatchFate::Discarded => {}
        }
    }
    let n = cfg.patch_size;
    let ev = stack.relative_ev();
    let gamma = stack.gamma();
    let aug = cfg.aug();
    let scene = stack.scene_id.as_str();
    let reference = stack.frame(REFERENCE);

    let exposure: Vec<(Vec<SupervisionPair>, SceneCounters)> = motion
        .reports
        .par_iter()
        .filter(|r| r.reference_well_exposed)
        .map(|r| {
            let mut local = SceneCounters::default();
            let mut out = Vec::new();
            let idx = r.index as u64;
            let (x, y) = r.origin;
            let ref_patch = reference.crop(x, y, n, n).expect("grid inside frame");
            let lin = linearize(&ref_patch, 0.0, gamma);
            let (mask, target) = match choose_gain_mask(stack, r.index, &lin, donors, cfg) {
                Ok(m) => m,
                Err(_) => {
                    local.gain_unsatisfiable += 1;
                    return (out, local);
                }
            };
            let id = PatchId {
                scene_id: scene.to_string(),
                dataset: dataset.to_string(),
                index: r.index,
                origin: r.origin,
            };
            let base = make_exposure_pair(&id, &ref_patch, &mask, ev, gamma, target, cfg.seed);
            local.exposure_pairs += 1;
            let needs_ctx = cfg.pseudo_static || cfg.free_moving;
            let ctx = needs_ctx
                .then(|| AugContext::for_exposure_pair(reference, r.origin, n, aug.margin, &mask, ev, gamma));
            let ed = match (&ctx, cfg.pseudo_static) {
                (Some(ctx), true) => {
                    let seed = derive_seed(cfg.seed, scene, idx, Stream::PseudoStatic);
                    augment_pair(&base, ctx, AugMode::PseudoStatic, &aug, seed).unwrap_or_else(|_| {
                        local.aug_skipped += 1;
                        base.clone()
                    })
                }
                _ => base.clone(),
            };
            out.push(ed);
            if let (Some(ctx), true) = (&ctx, cfg.free_moving) {
                let seed = derive_seed(cfg.seed, scene, idx, Stream::FreeMoving);
                record_aug(
                    augment_pair(&base, ctx, AugMode::FreeMoving, &aug, seed),
                    &mut out,
                    &mut local,
                );
            }
            (out, local)
        })
        .collect();

    let mut pairs = motion.pairs.clone();
    if cfg.free_moving {
        let moved: Vec<(Option<SupervisionPair>, bool)> = motion
            .pairs
            .par_iter()
            .map(|p| {
                let ctx = AugContext::around(stack.frames(), p.origin, n, aug.margin);
                let seed = derive_seed(cfg.seed, scene, p.index as u64, Stream::FreeMoving);
                match augment_pair(p, &ctx, AugMode::FreeMoving, &aug, seed) {
                    Ok(q) => (Some(q), false),
                    Err(_) => (None, true),
                }
            })
            .collect();
        for (p, skipped) in moved {
            pairs.extend(p);
            c.aug_skipped += skipped as usize;
        }
    }
    for (ps, local) in exposure {
        pairs.extend(ps);
        c.exposure_pairs += local.exposure_pairs;
        c.gain_unsatisfiable += local.gain_unsatisfiable;
        c.aug_skipped += local.aug_skipped;
    }
    pairs.sort_by_key(|p| (p.tag, p.index));
    Ok(SceneOutput {
        motion,
        pairs,
        counters: c,
    })
}

#[derive(Debug, Clone)]
pub struct SceneSummary {
    pub scene_id: String,
    pub dataset: String,
    pub alignment: SceneAlignment,
    pub counters: SceneCounters,
    pub pairs: usize,
}

#[derive(Debug, Clone, Default)]
pub struct PipelineReport {
    pub stats: DatasetStats,
    pub scenes: Vec<SceneSummary>,
    /// Scenes skipped with the reason.
    pub failures: Vec<(String, String)>,
}

/// A written scene, or the id and reason of a skipped one.
type SceneResult = Result<(SceneSummary, DatasetStats), (String, String)>;

fn run_scene(
    sc: &SceneManifest,
    donors: &DonorPool,
    cfg: &PipelineConfig,
) -> Result<SceneOutput, SceneError> {
    let stack = load_stack(sc, cfg.gamma)?;
    let flows = scene_flows(sc, &stack, cfg)?;
    process_scene(&stack, &flows, &sc.dataset, donors.for_scene(&sc.id), cfg)
}

/// Motion-domain pass alone for one scene: alignment, patch classes and
/// motion-domain labels.
pub fn classify_scene(sc: &SceneManifest, cfg: &PipelineConfig) -> Result<MotionOutcome, SceneError> {
    let stack = load_stack(sc, cfg.gamma)?;
    let flows = scene_flows(sc, &stack, cfg)?;
    Ok(classify_and_label(&stack, &flows, &sc.dataset, &cfg.motion())?)
}

/// Builds the donor pool with a scan over every scene's reference frame.
pub fn scan_donors(manifest: &Manifest, cfg: &PipelineConfig) -> DonorPool {
    let per_scene: Vec<(String, Vec<Mask>)> = manifest
        .scenes
        .par_iter()
        .map(|sc| {
            let masks = sc
                .validate()
                .ok()
                .and_then(|_| read_ldr(&sc.frames[REFERENCE]).ok())
                .and_then(|r| scene_donors(&r, cfg).ok())
                .unwrap_or_default();
            (sc.id.clone(), masks)
        })
        .collect();
    let mut pool = DonorPool::default();
    for (id, masks) in per_scene {
        pool.global.extend(masks.iter().cloned());
        pool.local.insert(id, masks);
    }
    pool
}

/// Generates and writes every pair of the manifest under `out`. Scenes
/// that fail to load are logged and skipped.
pub fn run_pipeline(
    manifest: &Manifest,
    out: &Path,
    cfg: &PipelineConfig,
) -> Result<PipelineReport, PipelineError> {
    std::fs::create_dir_all(out).map_err(|source| PipelineError::OutputRoot {
        path: out.to_path_buf(),
        source,
    })?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| PipelineError::Pool(e.to_string()))?;
    pool.install(|| run_in_pool(manifest, out, cfg))
}

fn run_in_pool(
    manifest: &Manifest,
    out: &Path,
    cfg: &PipelineConfig,
) -> Result<PipelineReport, PipelineError> {
    let mut report = PipelineReport::default();
    for id in manifest.duplicate_ids() {
        report
            .failures
            .push((id.clone(), "duplicate scene id; later entries skipped".into()));
    }
    let mut seen = std::collections::HashSet::new();
    let scenes: Vec<&SceneManifest> = manifest
        .scenes
        .iter()
        .filter(|s| seen.insert(s.id.as_str()))
        .collect();
    let donors = scan_donors(manifest, cfg);
    let results: Vec<Result<SceneResult, PairError>> = scenes
        .par_iter()
        .map(|sc| {
            let output = match run_scene(sc, &donors, cfg) {
                Ok(o) => o,
                Err(e) => {
                    warn!("skipping scene {}: {e}", sc.id);
                    return Ok(Err((sc.id.clone(), e.to_string())));
                }
            };
            let mut stats = DatasetStats::default();
            for p in &output.pairs {
                write_pair(p, out)?;
                stats.add(&p.dataset, p.tag, 1);
            }
            info!(
                "scene {}: {} pairs from {} patches",
                sc.id,
                output.pairs.len(),
                output.counters.patches
            );
            Ok(Ok((
                SceneSummary {
                    scene_id: sc.id.clone(),
                    dataset: sc.dataset.clone(),
                    alignment: output.motion.alignment,
                    counters: output.counters,
                    pairs: output.pairs.len(),
                },
                stats,
            )))
        })
        .collect();
    for r in results {
        match r? {
            Ok((summary, stats)) => {
                report.stats.merge(&stats);
                report.scenes.push(summary);
            }
            Err(failure) => report.failures.push(failure),
        }
    }
    Ok(report)
}
