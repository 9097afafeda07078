use crate::imgcore::Plane;

/// Dense displacement field: `src(p)` corresponds to `dst(p + uv[p])`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    pub width: usize,
    pub height: usize,
    pub uv: Vec<[f32; 2]>,
    pub valid: Vec<bool>,
}

impl FlowField {
    pub fn new(width: usize, height: usize, uv: Vec<[f32; 2]>, valid: Vec<bool>) -> Self {
        assert_eq!(uv.len(), width * height);
        assert_eq!(valid.len(), width * height);
        Self {
            width,
            height,
            uv,
            valid,
        }
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::uniform(width, height, [0.0, 0.0])
    }

    pub fn uniform(width: usize, height: usize, uv: [f32; 2]) -> Self {
        Self::new(
            width,
            height,
            vec![uv; width * height],
            vec![true; width * height],
        )
    }

    pub fn all_invalid(width: usize, height: usize) -> Self {
        Self::new(
            width,
            height,
            vec![[0.0, 0.0]; width * height],
            vec![false; width * height],
        )
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [f32; 2]) -> Self {
        let mut uv = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                uv.push(f(x, y));
            }
        }
        Self::new(width, height, uv, vec![true; width * height])
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> [f32; 2] {
        self.uv[y * self.width + x]
    }

    #[inline]
    pub fn magnitude_at(&self, i: usize) -> f64 {
        let [u, v] = self.uv[i];
        (u as f64).hypot(v as f64)
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    /// Magnitudes of valid pixels inside a rectangular window.
    pub fn magnitudes_in(&self, x: usize, y: usize, w: usize, h: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(w * h);
        for row in y..(y + h).min(self.height) {
            for col in x..(x + w).min(self.width) {
                let i = row * self.width + col;
                if self.valid[i] {
                    out.push(self.magnitude_at(i));
                }
            }
        }
        out
    }

    pub fn magnitude_plane(&self) -> Plane {
        let data = (0..self.uv.len()).map(|i| self.magnitude_at(i) as f32).collect();
        Plane::new(self.width, self.height, data)
    }

    /// Median of valid u and v components, if any pixel is valid.
    pub fn median_uv(&self) -> Option<[f64; 2]> {
        let mut us: Vec<f64> = Vec::new();
        let mut vs: Vec<f64> = Vec::new();
        for (uv, ok) in self.uv.iter().zip(&self.valid) {
            if *ok {
                us.push(uv[0] as f64);
                vs.push(uv[1] as f64);
            }
        }
        Some([median(&mut us)?, median(&mut vs)?])
    }
}

/// Exact median by selection. For even counts the mean of the two middle
/// order statistics.
pub fn median(values: &mut [f64]) -> Option<f64> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    let mid = n / 2;
    let (_, &mut hi, _) = values.select_nth_unstable_by(mid, f64::total_cmp);
    if n % 2 == 1 {
        Some(hi)
    } else {
        let lo = values[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Some(0.5 * (lo + hi))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_odd_even() {
        assert_eq!(median(&mut []), None);
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&mut [4.0, 1.0, 3.0, 2.0]), Some(2.5));
    }

    #[test]
    fn magnitudes_skip_invalid() {
        let mut f = FlowField::uniform(2, 2, [3.0, 4.0]);
        f.valid[0] = false;
        assert_eq!(f.magnitudes_in(0, 0, 2, 2), vec![5.0; 3]);
    }
}
