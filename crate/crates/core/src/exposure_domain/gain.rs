//! Synthetic illumination gain masks and the solver that sizes them.

use rand::Rng;
use thiserror::Error;

use crate::imgcore::{linearize, HdrImage, LdrImage, Mask, Plane, Raster, CHANNELS};
use crate::motion_domain::{GainStats, LabelSource, PatchId, SubsetTag, SupervisionPair};

use super::exposure::reexpose;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskKind {
    Transfer,
    SyntheticLine,
}

impl MaskKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            MaskKind::Transfer => "transfer",
            MaskKind::SyntheticLine => "synthetic_line",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "transfer" => Some(MaskKind::Transfer),
            "synthetic_line" => Some(MaskKind::SyntheticLine),
            _ => None,
        }
    }
}

/// A line through the patch with a linear ramp on its positive side:
/// `r(p) = clamp(((p - c) . n) / d_max, 0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineGeometry {
    pub cx: f32,
    pub cy: f32,
    pub nx: f32,
    pub ny: f32,
    /// Largest signed distance of any patch pixel on the ramp side.
    pub d_max: f32,
}

impl LineGeometry {
    /// `size` is the patch side; `d_max` is taken over its pixel centers.
    pub fn new(cx: f32, cy: f32, nx: f32, ny: f32, size: usize) -> Self {
        let far = (size - 1) as f32;
        let d_max = [[0.0, 0.0], [far, 0.0], [0.0, far], [far, far]]
            .iter()
            .map(|p: &[f32; 2]| (p[0] - cx) * nx + (p[1] - cy) * ny)
            .fold(f32::NEG_INFINITY, f32::max);
        Self {
            cx,
            cy,
            nx,
            ny,
            d_max,
        }
    }

    /// Ramp value at patch-relative coordinates; defined outside the patch too.
    #[inline]
    pub fn ramp(&self, x: f32, y: f32) -> f32 {
        if self.d_max <= 0.0 {
            return 0.0;
        }
        (((x - self.cx) * self.nx + (y - self.cy) * self.ny) / self.d_max).clamp(0.0, 1.0)
    }
}

/// Support and ramp of a synthetic line mask.
#[derive(Debug, Clone, PartialEq)]
pub struct LineMask {
    pub geometry: LineGeometry,
    pub support: Mask,
    pub ramp: Plane,
}

pub fn line_mask_from_geometry(geometry: LineGeometry, size: usize) -> LineMask {
    let mut ramp = Vec::with_capacity(size * size);
    for y in 0..size {
        for x in 0..size {
            ramp.push(geometry.ramp(x as f32, y as f32));
        }
    }
    let support = Mask::new(size, size, ramp.iter().map(|r| *r > 0.0).collect());
    LineMask {
        geometry,
        support,
        ramp: Plane::new(size, size, ramp),
    }
}

/// Random line through the patch (point uniform over the pixel area, angle
/// uniform in [0, pi)) with the ramp on a randomly chosen side.
pub fn synth_line_mask<R: Rng>(rng: &mut R, size: usize) -> LineMask {
    assert!(size >= 2, "patch too small for a line mask");
    let far = (size - 1) as f32;
    let cx = rng.random_range(0.0..far);
    let cy = rng.random_range(0.0..far);
    let theta = rng.random_range(0.0..std::f32::consts::PI);
    let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    let (nx, ny) = (-theta.sin() * sign, theta.cos() * sign);
    let mut g = LineGeometry::new(cx, cy, nx, ny, size);
    let mut mask = line_mask_from_geometry(g, size);
    if mask.support.count() == 0 {
        g = LineGeometry::new(cx, cy, -nx, -ny, size);
        mask = line_mask_from_geometry(g, size);
    }
    mask
}

#[derive(Debug, Clone, PartialEq)]
enum GainShape {
    Transfer(Mask),
    Line(LineGeometry),
}

/// Multiplicative gain `g(p) = 1 + (peak - 1) r(p)`, with `r` the line ramp or
/// the indicator of a transferred saturation mask.
#[derive(Debug, Clone, PartialEq)]
pub struct GainMask {
    pub size: usize,
    pub kind: MaskKind,
    pub peak_gain: f32,
    /// Fraction of patch pixels the mask acts on.
    pub coverage: f64,
    shape: GainShape,
}

impl GainMask {
    pub fn transfer(support: Mask, peak_gain: f32) -> Self {
        assert_eq!(support.width, support.height, "gain masks are square");
        Self {
            size: support.width,
            kind: MaskKind::Transfer,
            peak_gain,
            coverage: support.coverage(),
            shape: GainShape::Transfer(support),
        }
    }

    pub fn line(geometry: LineGeometry, size: usize, peak_gain: f32) -> Self {
        let support = line_mask_from_geometry(geometry, size).support;
        Self {
            size,
            kind: MaskKind::SyntheticLine,
            peak_gain,
            coverage: support.coverage(),
            shape: GainShape::Line(geometry),
        }
    }

    pub fn unit(size: usize) -> Self {
        Self::transfer(Mask::full(size, size), 1.0)
    }

    #[inline]
    fn ramp_at(&self, x: isize, y: isize) -> f32 {
        match &self.shape {
            GainShape::Transfer(m) => {
                let cx = x.clamp(0, m.width as isize - 1) as usize;
                let cy = y.clamp(0, m.height as isize - 1) as usize;
                m.bits[cy * m.width + cx] as u8 as f32
            }
            GainShape::Line(g) => g.ramp(x as f32, y as f32),
        }
    }

    /// Gain at patch-relative pixel coordinates. Outside the patch a transfer
    /// mask is edge-replicated and a line ramp continues analytically.
    #[inline]
    pub fn gain_at(&self, x: isize, y: isize) -> f32 {
        1.0 + (self.peak_gain - 1.0) * self.ramp_at(x, y)
    }

    pub fn gains(&self) -> Plane {
        let n = self.size;
        let mut data = Vec::with_capacity(n * n);
        for y in 0..n as isize {
            for x in 0..n as isize {
                data.push(self.gain_at(x, y));
            }
        }
        Plane::new(n, n, data)
    }

    /// Applies the gain to a linear image whose top-left pixel sits at
    /// `offset` relative to the patch origin.
    pub fn apply(&self, linear: &HdrImage, offset: (isize, isize)) -> HdrImage {
        let w = linear.width();
        let mut data = linear.samples().to_vec();
        for (i, px) in data.chunks_exact_mut(CHANNELS).enumerate() {
            let x = (i % w) as isize + offset.0;
            let y = (i / w) as isize + offset.1;
            let g = self.gain_at(x, y);
            for v in px {
                *v *= g;
            }
        }
        HdrImage::new(w, linear.height(), data).expect("positive gain keeps radiance valid")
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum GainError {
    #[error("target saturation fraction must lie in (0, 1], got {0}")]
    InvalidTarget(f64),
    #[error("gain mask support is empty")]
    EmptySupport,
    #[error("cannot saturate {needed} of {support} support pixels (reachable range {reachable_min}..={reachable_max})")]
    Unsatisfiable {
        needed: usize,
        support: usize,
        reachable_min: usize,
        reachable_max: usize,
    },
}

/// Gain profile handed to the solver.
#[derive(Debug, Clone, Copy)]
pub enum GainProfile<'a> {
    /// Uniform gain over a transferred saturation support.
    Transfer,
    /// Line ramp; support must be where the ramp is positive.
    Line(&'a LineMask),
}

/// Saturated support pixels of the re-exposed long frame.
pub fn saturated_in_support(long: &LdrImage, support: &Mask) -> usize {
    long.samples()
        .chunks_exact(CHANNELS)
        .zip(&support.bits)
        .filter(|(p, s)| **s && p.iter().any(|v| *v >= 1.0))
        .count()
}

/// Fraction of support pixels already saturated in the long frame before
/// any gain is applied.
pub fn presaturated_fraction(patch_linear: &HdrImage, support: &Mask, ev_long: f32) -> f64 {
    let e = ev_long.exp2();
    let n = support.count();
    if n == 0 {
        return 0.0;
    }
    let sat = patch_linear
        .samples()
        .chunks_exact(CHANNELS)
        .zip(&support.bits)
        .filter(|(p, s)| **s && p.iter().any(|v| v * e >= 1.0))
        .count();
    sat as f64 / n as f64
}

/// Chooses the peak gain so that `round(target * |support|)` support pixels
/// saturate in the long exposure. Per pixel the smallest peak that saturates it
/// is `1 + (1 / (x e) - 1) / r`, with `x` the brightest linear channel and
/// `e = 2^ev_long`; the answer is the k-th smallest of these.
pub fn solve_gain(
    patch_linear: &HdrImage,
    support: &Mask,
    profile: GainProfile<'_>,
    target_fraction: f64,
    ev_long: f32,
    gamma: f32,
) -> Result<GainMask, GainError> {
    if !(target_fraction > 0.0 && target_fraction <= 1.0) {
        return Err(GainError::InvalidTarget(target_fraction));
    }
    let n = support.count();
    if n == 0 {
        return Err(GainError::EmptySupport);
    }
    let size = support.width;
    let e = ev_long.exp2() as f64;
    let k = ((target_fraction * n as f64).round() as usize).clamp(1, n);
    let mut needed = Vec::with_capacity(n);
    for (i, px) in patch_linear.samples().chunks_exact(CHANNELS).enumerate() {
        if !support.bits[i] {
            continue;
        }
        let x = px[0].max(px[1]).max(px[2]) as f64;
        let r = match profile {
            GainProfile::Transfer => 1.0,
            GainProfile::Line(l) => l.ramp.data[i] as f64,
        };
        let t = if x * e >= 1.0 {
            1.0
        } else if x <= 0.0 || r <= 0.0 {
            f64::INFINITY
        } else {
            1.0 + (1.0 / (x * e) - 1.0) / r
        };
        needed.push(t);
    }
    needed.sort_by(f64::total_cmp);
    let already = needed.iter().filter(|t| **t <= 1.0).count();
    let reachable = needed.iter().filter(|t| t.is_finite()).count();
    if already > k || reachable < k {
        return Err(GainError::Unsatisfiable {
            needed: k,
            support: n,
            reachable_min: already,
            reachable_max: reachable,
        });
    }
    let build = |peak: f32| match profile {
        GainProfile::Transfer => GainMask::transfer(support.clone(), peak),
        GainProfile::Line(l) => GainMask::line(l.geometry, size, peak),
    };
    // Realize in f32 exactly as the pair synthesis will and nudge upward until
    // the j-th pixel actually clips.
    let realize = |j: usize| {
        let mut peak = needed[j - 1].max(1.0) as f32;
        let mut step = peak * f32::EPSILON;
        for _ in 0..64 {
            let mask = build(peak);
            let long = reexpose(&mask.apply(patch_linear, (0, 0)), ev_long, gamma, None);
            let count = saturated_in_support(&long, support);
            if count >= j {
                return (mask, count);
            }
            peak += step;
            step *= 2.0;
        }
        (build(peak), j)
    };
    let (mask, count) = realize(k);
    // Pixels tied at the k-th threshold saturate together; the count just
    // below the tie group may land closer to the target.
    let below = needed[..k - 1].partition_point(|t| *t < needed[k - 1]);
    if count > k && below >= already.max(1) {
        let goal = target_fraction * n as f64;
        let (lower, lower_count) = realize(below);
        if lower_count < count && (goal - lower_count as f64).abs() < (count as f64 - goal).abs() {
            return Ok(lower);
        }
    }
    Ok(mask)
}

/// Label `g * linearize(ref)` and the LDR triplet re-exposed at `ev`.
pub fn synthesize_exposure_triplet(
    ref_patch: &LdrImage,
    mask: &GainMask,
    ev: [f32; 3],
    gamma: f32,
) -> (HdrImage, [LdrImage; 3]) {
    let label = mask.apply(&linearize(ref_patch, 0.0, gamma), (0, 0));
    let ldr = ev.map(|e| reexpose(&label, e, gamma, None));
    (label, ldr)
}

/// Exposure-domain supervision pair, tagged ED. `ev` is relative to the
/// reference frame.
pub fn make_exposure_pair(
    id: &PatchId,
    ref_patch: &LdrImage,
    mask: &GainMask,
    ev: [f32; 3],
    gamma: f32,
    target_fraction: f64,
    seed: u64,
) -> SupervisionPair {
    let (label, ldr) = synthesize_exposure_triplet(ref_patch, mask, ev, gamma);
    SupervisionPair {
        scene_id: id.scene_id.clone(),
        dataset: id.dataset.clone(),
        index: id.index,
        origin: id.origin,
        tag: SubsetTag::Ed,
        source: LabelSource::SyntheticExposure,
        ldr,
        label,
        ev,
        gamma,
        shifts: [[0, 0]; 3],
        gain: Some(GainStats {
            kind: mask.kind,
            peak_gain: mask.peak_gain,
            coverage: mask.coverage,
            target_fraction,
        }),
        consistency_db: None,
        seed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn linear_const(size: usize, v: f32) -> HdrImage {
        HdrImage::new(size, size, vec![v; size * size * 3]).unwrap()
    }

    #[test]
    fn vertical_line_ramp_closed_form() {
        let g = LineGeometry::new(64.0, 10.0, 1.0, 0.0, 128);
        assert_eq!(g.d_max, 63.0);
        let m = line_mask_from_geometry(g, 128);
        for x in 0..128 {
            let want = if x < 64 { 0.0 } else { (x as f32 - 64.0) / 63.0 };
            assert!((m.ramp.at(x, 5) - want).abs() < 1e-6, "x={x}");
        }
        assert_eq!(m.ramp.at(127, 127), 1.0);
    }

    #[test]
    fn random_line_always_covers_something_and_is_seeded() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            assert!(synth_line_mask(&mut rng, 128).support.count() > 0);
        }
        let a = synth_line_mask(&mut ChaCha8Rng::seed_from_u64(5), 128);
        let b = synth_line_mask(&mut ChaCha8Rng::seed_from_u64(5), 128);
        assert_eq!(a, b);
    }

    #[test]
    fn constant_support_target_one() {
        // x * 2^ev_long = 0.5 everywhere, so a gain of 2 saturates all.
        let lin = linear_const(8, 0.125);
        let m = solve_gain(&lin, &Mask::full(8, 8), GainProfile::Transfer, 1.0, 2.0, 2.2).unwrap();
        assert!((m.peak_gain - 2.0).abs() < 1e-5, "{}", m.peak_gain);
    }

    #[test]
    fn quantile_construction() {
        // Post-exposure values {0.2, 0.4, 0.6, 0.8}; half must reach 1.
        let vals = [0.2f32, 0.4, 0.6, 0.8];
        let lin = HdrImage::from_fn(2, 2, |x, y| [vals[y * 2 + x]; 3]).unwrap();
        let m = solve_gain(&lin, &Mask::full(2, 2), GainProfile::Transfer, 0.5, 0.0, 2.2).unwrap();
        assert!((m.peak_gain as f64 - 1.0 / 0.6).abs() < 1e-5);
        let long = reexpose(&m.apply(&lin, (0, 0)), 0.0, 2.2, None);
        assert_eq!(saturated_in_support(&long, &Mask::full(2, 2)), 2);
    }

    #[test]
    fn invalid_targets() {
        let lin = linear_const(4, 0.1);
        let full = Mask::full(4, 4);
        assert_eq!(
            solve_gain(&lin, &full, GainProfile::Transfer, 0.0, 0.0, 2.2),
            Err(GainError::InvalidTarget(0.0))
        );
        assert!(solve_gain(&lin, &full, GainProfile::Transfer, 1.5, 0.0, 2.2).is_err());
        let empty = Mask::new(4, 4, vec![false; 16]);
        assert_eq!(
            solve_gain(&lin, &empty, GainProfile::Transfer, 0.5, 0.0, 2.2),
            Err(GainError::EmptySupport)
        );
    }

    #[test]
    fn black_support_is_unsatisfiable() {
        let lin = linear_const(4, 0.0);
        assert!(matches!(
            solve_gain(&lin, &Mask::full(4, 4), GainProfile::Transfer, 0.5, 2.0, 2.2),
            Err(GainError::Unsatisfiable { .. })
        ));
    }

    #[test]
    fn oversaturated_support_is_unsatisfiable() {
        let lin = linear_const(4, 0.5);
        assert!(matches!(
            solve_gain(&lin, &Mask::full(4, 4), GainProfile::Transfer, 0.5, 2.0, 2.2),
            Err(GainError::Unsatisfiable {
                reachable_min: 16,
                ..
            })
        ));
    }

    #[test]
    fn unit_gain_pair_reproduces_reference() {
        let p =
            LdrImage::from_fn(16, 16, |x, y| [0.2 + x as f32 / 40.0, 0.3 + y as f32 / 40.0, 0.4]).unwrap();
        let (label, ldr) = synthesize_exposure_triplet(&p, &GainMask::unit(16), [-2.0, 0.0, 2.0], 2.2);
        assert_eq!(label, linearize(&p, 0.0, 2.2));
        for (a, b) in p.samples().iter().zip(ldr[1].samples()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn line_gain_is_continuous_at_the_line() {
        let g = LineGeometry::new(30.5, 0.0, 1.0, 0.0, 64);
        let m = GainMask::line(g, 64, 3.0);
        assert_eq!(m.gain_at(30, 7), 1.0);
        assert!(m.gain_at(31, 7) - 1.0 < 0.05);
        assert_eq!(m.gain_at(63, 7), 3.0);
    }

    #[test]
    fn transfer_gain_extends_by_edge_replication() {
        let mut bits = vec![false; 16];
        bits[3] = true;
        let m = GainMask::transfer(Mask::new(4, 4, bits), 2.0);
        assert_eq!(m.gain_at(3, 0), 2.0);
        assert_eq!(m.gain_at(9, -5), 2.0);
        assert_eq!(m.gain_at(-1, 0), 1.0);
    }
}
