//! Pseudo-labels from synthetic illumination changes on well-exposed patches.

mod exposure;
mod gain;

pub use exposure::{
    extract_saturation_mask, is_well_exposed, reexpose, well_exposed_mask, ExposureThresholds,
    ThresholdError, MIN_DONOR_COVERAGE,
};
pub use gain::{
    line_mask_from_geometry, make_exposure_pair, presaturated_fraction, saturated_in_support, solve_gain,
    synth_line_mask, synthesize_exposure_triplet, GainError, GainMask, GainProfile, LineGeometry, LineMask,
    MaskKind,
};
