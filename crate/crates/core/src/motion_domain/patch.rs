use crate::flow::{median, FlowField};
use crate::imgcore::{ImageError, LdrImage, Mask};

/// Warped short and long patches in reference coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct WarpedPatches {
    pub short: LdrImage,
    pub long: LdrImage,
    pub short_valid: Mask,
    pub long_valid: Mask,
}

/// Everything the per-patch decisions look at for one grid cell.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchStack {
    pub index: usize,
    pub origin: (usize, usize),
    pub size: usize,
    /// Unwarped short, reference, long.
    pub raw: [LdrImage; 3],
    pub warped: Option<WarpedPatches>,
    /// Magnitudes of the valid pixels of each flow crop, in the order
    /// `1->0, 0->1, 1->2, 2->1`.
    pub magnitudes: [Vec<f64>; 4],
}

impl PatchStack {
    /// Crops every input at `origin`. `warped` holds the warped full-size
    /// short and long frames with their validity masks.
    pub fn extract(
        index: usize,
        origin: (usize, usize),
        size: usize,
        frames: &[LdrImage; 3],
        warped: Option<(&LdrImage, &Mask, &LdrImage, &Mask)>,
        flows: &[FlowField; 4],
    ) -> Result<Self, ImageError> {
        let (x, y) = origin;
        let raw = [
            frames[0].crop(x, y, size, size)?,
            frames[1].crop(x, y, size, size)?,
            frames[2].crop(x, y, size, size)?,
        ];
        let warped = match warped {
            Some((s, sm, l, lm)) => Some(WarpedPatches {
                short: s.crop(x, y, size, size)?,
                long: l.crop(x, y, size, size)?,
                short_valid: sm.crop(x, y, size, size),
                long_valid: lm.crop(x, y, size, size),
            }),
            None => None,
        };
        let magnitudes = [0, 1, 2, 3].map(|k| flows[k].magnitudes_in(x, y, size, size));
        Ok(Self {
            index,
            origin,
            size,
            raw,
            warped,
            magnitudes,
        })
    }
}

/// Allowed deviation from the median flow magnitude `m`.
#[inline]
pub fn static_threshold(m: f64) -> f64 {
    m.clamp(0.5, 2.0)
}

/// True when no pixel of `mags` deviates from their median by more than
/// [`static_threshold`] of that median. An empty crop has no evidence and
/// is not static.
pub fn crop_is_static(mags: &[f64]) -> bool {
    let mut work = mags.to_vec();
    let Some(m) = median(&mut work) else {
        return false;
    };
    let t = static_threshold(m);
    mags.iter().all(|v| (v - m).abs() <= t)
}

/// Static iff every one of the four flow crops passes [`crop_is_static`].
pub fn is_static(ps: &PatchStack) -> bool {
    ps.magnitudes.iter().all(|m| crop_is_static(m))
}
