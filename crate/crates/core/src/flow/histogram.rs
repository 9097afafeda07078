use thiserror::Error;

use super::field::FlowField;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("flow field has no valid pixels")]
pub struct NoValidPixels;

/// Histogram of flow magnitudes with 1 px bins: bin `i` holds `[i, i + 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowHistogram {
    pub bin_width: f32,
    pub counts: Vec<u64>,
    pub mode_bin: usize,
}

impl FlowHistogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn bin_of(magnitude: f64) -> usize {
        magnitude.max(0.0).floor() as usize
    }

    /// Center of the dominant bin in pixels.
    pub fn mode_center(&self) -> f64 {
        self.mode_bin as f64 + 0.5
    }
}

pub fn magnitude_histogram(field: &FlowField) -> Result<FlowHistogram, NoValidPixels> {
    let mut counts: Vec<u64> = Vec::new();
    for i in 0..field.uv.len() {
        if !field.valid[i] {
            continue;
        }
        let bin = FlowHistogram::bin_of(field.magnitude_at(i));
        if bin >= counts.len() {
            counts.resize(bin + 1, 0);
        }
        counts[bin] += 1;
    }
    if counts.is_empty() {
        return Err(NoValidPixels);
    }
    // max_by_key returns the last maximum; scan manually so ties go low.
    let mut mode_bin = 0;
    for (i, c) in counts.iter().enumerate() {
        if *c > counts[mode_bin] {
            mode_bin = i;
        }
    }
    Ok(FlowHistogram {
        bin_width: 1.0,
        counts,
        mode_bin,
    })
}

/// Global-motion gate: both reference-to-neighbour flows must have their
/// dominant magnitude bin centered below `t_f` pixels.
pub fn is_globally_alignable(h_short: &FlowHistogram, h_long: &FlowHistogram, t_f: f64) -> bool {
    h_short.mode_center() < t_f && h_long.mode_center() < t_f
}
