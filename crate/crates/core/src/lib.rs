//! Turns unconstrained bracketed LDR triplets into LDR to HDR supervision
//! pairs without captured ground truth.
//!
//! The pipeline classifies 128x128 patches by optical-flow motion cues,
//! fuses static patches into linear HDR labels, reuses well-exposed
//! reference patches (optionally boosted with synthetic illumination gain
//! masks), and augments everything with global camera shake.

pub mod align;
pub mod augment;
pub mod dataset;
pub mod exposure_domain;
pub mod flow;
pub mod imgcore;
pub mod motion_domain;
pub mod rng;
