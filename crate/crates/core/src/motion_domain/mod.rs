//! Static/dynamic patch classification and motion-domain pseudo-labels.

mod classify;
mod fusion;
mod pair;
mod patch;

pub use classify::{
    align_scene, classify_and_label, MotionConfig, MotionOutcome, PatchClass, PatchFate, PatchReport,
    SceneAlignment, FLOW_LONG_TO_REF, FLOW_REF_TO_LONG, FLOW_REF_TO_SHORT, FLOW_SHORT_TO_REF,
};
pub use fusion::{
    consistency_check, consistency_psnr, fuse_static, merge_linear, triangle_weight, FusionError,
    FusionWeights, MIN_TOTAL_WEIGHT,
};
pub use pair::{GainStats, LabelSource, PatchId, SubsetTag, SupervisionPair};
pub use patch::{crop_is_static, is_static, static_threshold, PatchStack, WarpedPatches};
