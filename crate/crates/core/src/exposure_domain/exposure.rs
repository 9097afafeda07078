use thiserror::Error;

use crate::imgcore::{HdrImage, LdrImage, Mask, Raster, CHANNELS};

#[derive(Debug, Error, PartialEq)]
pub enum ThresholdError {
    #[error("need 0 <= t_low < t_high <= 1, got t_low={0}, t_high={1}")]
    Range(f32, f32),
    #[error("well-exposed fraction must lie in (0, 1], got {0}")]
    Fraction(f64),
}

/// Pixel-level bounds for under- and over-exposure on gamma-encoded data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExposureThresholds {
    pub t_low: f32,
    pub t_high: f32,
    /// Fraction of in-range pixels a patch needs to count as well-exposed.
    pub well_exposed_fraction: f64,
}

impl Default for ExposureThresholds {
    fn default() -> Self {
        Self {
            t_low: 0.125,
            t_high: 0.75,
            well_exposed_fraction: 0.5,
        }
    }
}

impl ExposureThresholds {
    pub fn validate(&self) -> Result<(), ThresholdError> {
        if !(0.0 <= self.t_low && self.t_low < self.t_high && self.t_high <= 1.0) {
            return Err(ThresholdError::Range(self.t_low, self.t_high));
        }
        if !(self.well_exposed_fraction > 0.0 && self.well_exposed_fraction <= 1.0) {
            return Err(ThresholdError::Fraction(self.well_exposed_fraction));
        }
        Ok(())
    }
}

#[inline]
fn max_channel(p: &[f32]) -> f32 {
    p[0].max(p[1]).max(p[2])
}

/// Pixels whose brightest channel lies in `[t_low, t_high]`.
pub fn well_exposed_mask(patch: &LdrImage, th: &ExposureThresholds) -> Mask {
    let bits = patch
        .samples()
        .chunks_exact(CHANNELS)
        .map(|p| {
            let m = max_channel(p);
            m >= th.t_low && m <= th.t_high
        })
        .collect();
    Mask::new(patch.width(), patch.height(), bits)
}

pub fn is_well_exposed(patch: &LdrImage, th: &ExposureThresholds) -> bool {
    well_exposed_mask(patch, th).coverage() >= th.well_exposed_fraction
}

/// Minimum fraction of saturated pixels for a donor mask to be used.
pub const MIN_DONOR_COVERAGE: f64 = 0.10;

/// Saturated-pixel support of a donor patch (any channel at or above
/// `sat_level`), or `None` when it covers less than 10% of the patch.
pub fn extract_saturation_mask(donor: &LdrImage, sat_level: f32) -> Option<Mask> {
    let bits = donor
        .samples()
        .chunks_exact(CHANNELS)
        .map(|p| max_channel(p) >= sat_level)
        .collect();
    let m = Mask::new(donor.width(), donor.height(), bits);
    (m.coverage() >= MIN_DONOR_COVERAGE).then_some(m)
}

/// Image formation: `clip(label * 2^ev, 0, 1)^(1/gamma)`, optionally quantized
/// to `bit_depth` levels with round-half-up.
pub fn reexpose(label: &HdrImage, ev: f32, gamma: f32, bit_depth: Option<u8>) -> LdrImage {
    let scale = ev.exp2();
    let inv = 1.0 / gamma;
    let levels = bit_depth.map(|b| ((1u64 << b) - 1) as f32);
    let data = label
        .samples()
        .iter()
        .map(|&v| {
            let e = (v * scale).clamp(0.0, 1.0).powf(inv);
            match levels {
                Some(l) => (e * l + 0.5).floor() / l,
                None => e,
            }
        })
        .collect();
    LdrImage::new(label.width(), label.height(), data, bit_depth.unwrap_or(16))
        .expect("re-exposed samples are in [0, 1]")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imgcore::linearize;

    fn patch_with(n_a: usize, a: f32, n_b: usize, b: f32) -> LdrImage {
        let mut data = vec![a; n_a * 3];
        data.extend(vec![b; n_b * 3]);
        LdrImage::new(n_a + n_b, 1, data, 8).unwrap()
    }

    #[test]
    fn constant_patches() {
        let th = ExposureThresholds::default();
        assert!(is_well_exposed(&LdrImage::filled(8, 8, 0.5).unwrap(), &th));
        assert!(!is_well_exposed(&LdrImage::filled(8, 8, 0.9).unwrap(), &th));
        assert!(!is_well_exposed(&LdrImage::filled(8, 8, 0.05).unwrap(), &th));
    }

    #[test]
    fn majority_counting() {
        let th = ExposureThresholds::default();
        assert!(is_well_exposed(&patch_with(51, 0.5, 49, 0.05), &th));
        assert!(!is_well_exposed(&patch_with(49, 0.5, 51, 0.05), &th));
        // exactly half meets the >= rule
        assert!(is_well_exposed(&patch_with(50, 0.5, 50, 0.05), &th));
    }

    #[test]
    fn brightest_channel_decides() {
        let th = ExposureThresholds::default();
        let p = LdrImage::new(1, 1, vec![0.01, 0.3, 0.01], 8).unwrap();
        assert!(is_well_exposed(&p, &th));
        let p = LdrImage::new(1, 1, vec![0.5, 0.9, 0.5], 8).unwrap();
        assert!(!is_well_exposed(&p, &th));
    }

    #[test]
    fn threshold_validation() {
        assert!(ExposureThresholds::default().validate().is_ok());
        let bad = ExposureThresholds {
            t_low: 0.8,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = ExposureThresholds {
            well_exposed_fraction: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn donor_masks() {
        let full = extract_saturation_mask(&LdrImage::filled(10, 10, 1.0).unwrap(), 0.98).unwrap();
        assert_eq!(full.coverage(), 1.0);
        assert!(extract_saturation_mask(&LdrImage::filled(10, 10, 0.5).unwrap(), 0.98).is_none());
        assert!(extract_saturation_mask(&patch_with(9, 1.0, 91, 0.5), 0.98).is_none());
        let m = extract_saturation_mask(&patch_with(10, 1.0, 90, 0.5), 0.98).unwrap();
        assert_eq!(m.count(), 10);
    }

    #[test]
    fn reexpose_values() {
        let l = HdrImage::new(1, 1, vec![0.25, 3.0, 0.0]).unwrap();
        let out = reexpose(&l, 0.0, 2.2, None);
        // 0.25^(1/2.2) at 30 digits
        assert!((out.samples()[0] as f64 - 0.532_520_544_719_981).abs() < 1e-6);
        assert_eq!(out.samples()[1], 1.0);
        assert_eq!(out.samples()[2], 0.0);
        assert_eq!(reexpose(&l, 2.0, 2.2, None).samples()[1], 1.0);
    }

    #[test]
    fn reexpose_quantizes_round_half_up() {
        let l = HdrImage::new(1, 1, vec![0.5, 0.49, 0.75]).unwrap();
        let out = reexpose(&l, 0.0, 1.0, Some(1));
        assert_eq!(out.samples(), &[1.0, 0.0, 1.0]);
        let out = reexpose(&l, 0.0, 1.0, Some(2));
        assert_eq!(out.samples(), &[2.0 / 3.0, 1.0 / 3.0, 2.0 / 3.0]);
    }

    #[test]
    fn reexpose_inverts_linearize() {
        let img = LdrImage::from_fn(16, 16, |x, y| [x as f32 / 16.0, y as f32 / 16.0, 0.3]).unwrap();
        for ev in [-2.0f32, 0.0, 1.5] {
            let back = reexpose(&linearize(&img, ev, 2.2), ev, 2.2, None);
            for (a, b) in img.samples().iter().zip(back.samples()) {
                assert!((a - b).abs() < 1e-6);
            }
        }
    }
}
