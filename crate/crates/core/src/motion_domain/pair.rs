use std::fmt;
use std::str::FromStr;

use crate::imgcore::{HdrImage, LdrImage};

/// Subset a supervision pair is accounted under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SubsetTag {
    /// Exposure domain, pseudo-static.
    Ed,
    /// Exposure domain with larger camera motion.
    Edm,
    /// Motion domain, pseudo-static.
    Md,
    /// Motion domain with larger camera motion.
    Mdm,
}

impl SubsetTag {
    pub const ALL: [SubsetTag; 4] = [SubsetTag::Ed, SubsetTag::Edm, SubsetTag::Md, SubsetTag::Mdm];

    pub fn as_str(&self) -> &'static str {
        match self {
            SubsetTag::Ed => "ED",
            SubsetTag::Edm => "EDM",
            SubsetTag::Md => "MD",
            SubsetTag::Mdm => "MDM",
        }
    }

    /// Tag after free-moving augmentation.
    pub fn with_motion(&self) -> SubsetTag {
        match self {
            SubsetTag::Ed | SubsetTag::Edm => SubsetTag::Edm,
            SubsetTag::Md | SubsetTag::Mdm => SubsetTag::Mdm,
        }
    }

    pub fn is_exposure_domain(&self) -> bool {
        matches!(self, SubsetTag::Ed | SubsetTag::Edm)
    }
}

impl fmt::Display for SubsetTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SubsetTag {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ED" => Ok(SubsetTag::Ed),
            "EDM" => Ok(SubsetTag::Edm),
            "MD" => Ok(SubsetTag::Md),
            "MDM" => Ok(SubsetTag::Mdm),
            other => Err(format!("unknown subset tag {other:?}")),
        }
    }
}

/// How the label of a pair was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelSource {
    StaticFusion,
    WellExposedReference,
    SyntheticExposure,
}

impl LabelSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            LabelSource::StaticFusion => "static_fusion",
            LabelSource::WellExposedReference => "well_exposed_reference",
            LabelSource::SyntheticExposure => "synthetic_exposure",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "static_fusion" => Some(LabelSource::StaticFusion),
            "well_exposed_reference" => Some(LabelSource::WellExposedReference),
            "synthetic_exposure" => Some(LabelSource::SyntheticExposure),
            _ => None,
        }
    }
}

/// Gain-mask statistics recorded for exposure-domain pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainStats {
    pub kind: crate::exposure_domain::MaskKind,
    pub peak_gain: f32,
    pub coverage: f64,
    pub target_fraction: f64,
}

/// One LDR triplet with its HDR pseudo-label.
#[derive(Debug, Clone, PartialEq)]
pub struct SupervisionPair {
    pub scene_id: String,
    pub dataset: String,
    /// Patch index on the scene grid.
    pub index: usize,
    /// Top-left pixel of the patch in the reference frame.
    pub origin: (usize, usize),
    pub tag: SubsetTag,
    pub source: LabelSource,
    /// Short, reference, long.
    pub ldr: [LdrImage; 3],
    /// Linear radiance relative to the reference exposure.
    pub label: HdrImage,
    /// Exposure values of the triplet relative to the reference.
    pub ev: [f32; 3],
    pub gamma: f32,
    /// Integer displacement applied to each frame by augmentation.
    pub shifts: [[i32; 2]; 3],
    pub gain: Option<GainStats>,
    /// Consistency PSNR of fused labels, dB.
    pub consistency_db: Option<f64>,
    pub seed: u64,
}

/// Where a pair came from; shared by every pair built for one patch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatchId {
    pub scene_id: String,
    pub dataset: String,
    pub index: usize,
    pub origin: (usize, usize),
}
