use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::flow::{FlowField, FlowHistogram};

use super::homography::{fit_dlt, Homography};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum AlignError {
    #[error("only {found} correspondences in the dominant flow bins, need {needed}")]
    TooFewCorrespondences { found: usize, needed: usize },
    #[error("every RANSAC sample was degenerate")]
    DegenerateConfiguration,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RansacParams {
    /// Upper bound on hypotheses.
    pub iterations: usize,
    /// Inlier threshold on forward transfer error, in pixels.
    pub inlier_tol: f64,
    pub max_correspondences: usize,
    pub min_correspondences: usize,
    /// Early-termination confidence; 1.0 disables early exit.
    pub confidence: f64,
}

impl Default for RansacParams {
    fn default() -> Self {
        Self {
            iterations: 2000,
            inlier_tol: 1.5,
            max_correspondences: 20_000,
            min_correspondences: 100,
            confidence: 0.999,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HomographyFit {
    pub homography: Homography,
    pub inliers: usize,
    pub candidates: usize,
    pub inlier_ratio: f64,
    pub iterations_run: usize,
}

/// Pixels whose flow magnitude falls in the dominant bin or one of its two
/// neighbours, as (source, destination) pairs, thinned to at most `max` by a
/// uniform stride.
pub fn dominant_correspondences(
    flow: &FlowField,
    hist: &FlowHistogram,
    max: usize,
) -> (Vec<[f64; 2]>, Vec<[f64; 2]>) {
    let lo = hist.mode_bin.saturating_sub(1);
    let hi = hist.mode_bin + 1;
    let picked: Vec<usize> = (0..flow.uv.len())
        .filter(|&i| {
            flow.valid[i] && {
                let b = FlowHistogram::bin_of(flow.magnitude_at(i));
                (lo..=hi).contains(&b)
            }
        })
        .collect();
    let stride = picked.len().div_ceil(max.max(1)).max(1);
    let mut src = Vec::with_capacity(picked.len() / stride + 1);
    let mut dst = Vec::with_capacity(picked.len() / stride + 1);
    for &i in picked.iter().step_by(stride) {
        let (x, y) = ((i % flow.width) as f64, (i / flow.width) as f64);
        let [u, v] = flow.uv[i];
        src.push([x, y]);
        dst.push([x + u as f64, y + v as f64]);
    }
    (src, dst)
}

fn collinear(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> bool {
    let cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
    cross.abs() < 0.5
}

fn degenerate(p: &[[f64; 2]; 4]) -> bool {
    collinear(p[0], p[1], p[2])
        || collinear(p[0], p[1], p[3])
        || collinear(p[0], p[2], p[3])
        || collinear(p[1], p[2], p[3])
}

fn inlier_mask(h: &Homography, src: &[[f64; 2]], dst: &[[f64; 2]], tol: f64) -> (usize, Vec<bool>) {
    let tol2 = tol * tol;
    let mut n = 0;
    let mask = src
        .iter()
        .zip(dst)
        .map(|(p, q)| {
            let ok = h.apply(*p).is_some_and(|t| {
                let (dx, dy) = (t[0] - q[0], t[1] - q[1]);
                dx * dx + dy * dy < tol2
            });
            n += ok as usize;
            ok
        })
        .collect();
    (n, mask)
}

fn count_inliers(h: &Homography, src: &[[f64; 2]], dst: &[[f64; 2]], tol: f64) -> usize {
    let tol2 = tol * tol;
    src.iter()
        .zip(dst)
        .filter(|(p, q)| {
            h.apply(**p).is_some_and(|t| {
                let (dx, dy) = (t[0] - q[0], t[1] - q[1]);
                dx * dx + dy * dy < tol2
            })
        })
        .count()
}

/// RANSAC over explicit correspondences. Minimal samples of four, normalized
/// DLT hypotheses, least-squares refit on the final inlier set.
pub fn fit_homography_points(
    src: &[[f64; 2]],
    dst: &[[f64; 2]],
    params: &RansacParams,
    seed: u64,
) -> Result<HomographyFit, AlignError> {
    let n = src.len();
    if n < params.min_correspondences.max(4) {
        return Err(AlignError::TooFewCorrespondences {
            found: n,
            needed: params.min_correspondences.max(4),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(usize, Homography)> = None;
    let mut budget = params.iterations.max(1);
    let mut it = 0;
    while it < budget {
        it += 1;
        let mut idx = [0usize; 4];
        let mut k = 0;
        while k < 4 {
            let c = rng.random_range(0..n);
            if !idx[..k].contains(&c) {
                idx[k] = c;
                k += 1;
            }
        }
        let s: [[f64; 2]; 4] = idx.map(|i| src[i]);
        let d: [[f64; 2]; 4] = idx.map(|i| dst[i]);
        if degenerate(&s) || degenerate(&d) {
            continue;
        }
        let Some(h) = fit_dlt(&s, &d) else {
            continue;
        };
        let score = count_inliers(&h, src, dst, params.inlier_tol);
        if best.as_ref().is_none_or(|(b, _)| score > *b) {
            best = Some((score, h));
            if params.confidence < 1.0 {
                let w = score as f64 / n as f64;
                let p_good = w.powi(4);
                let needed = if p_good >= 1.0 - 1e-12 {
                    1
                } else if p_good <= 1e-12 {
                    params.iterations
                } else {
                    ((1.0 - params.confidence).ln() / (1.0 - p_good).ln()).ceil() as usize
                };
                budget = budget.min(needed.max(it));
            }
        }
    }
    let (_, mut model) = best.ok_or(AlignError::DegenerateConfiguration)?;
    let (mut count, mut mask) = inlier_mask(&model, src, dst, params.inlier_tol);
    for pass in 0..3 {
        let (s, d): (Vec<[f64; 2]>, Vec<[f64; 2]>) = src
            .iter()
            .zip(dst)
            .zip(&mask)
            .filter(|(_, m)| **m)
            .map(|((p, q), _)| (*p, *q))
            .unzip();
        let Some(refit) = fit_dlt(&s, &d) else {
            break;
        };
        let (c2, m2) = inlier_mask(&refit, src, dst, params.inlier_tol);
        // The first least-squares refit always replaces the minimal-sample model.
        if pass > 0 && c2 < count {
            break;
        }
        let stable = m2 == mask;
        model = refit;
        count = c2;
        mask = m2;
        if stable {
            break;
        }
    }
    Ok(HomographyFit {
        homography: model,
        inliers: count,
        candidates: n,
        inlier_ratio: count as f64 / n as f64,
        iterations_run: it,
    })
}

/// Fits the source-to-destination homography of `flow` from the pixels in
/// the dominant magnitude bins of `hist`.
pub fn fit_homography_ransac(
    flow: &FlowField,
    hist: &FlowHistogram,
    params: &RansacParams,
    seed: u64,
) -> Result<HomographyFit, AlignError> {
    let (src, dst) = dominant_correspondences(flow, hist, params.max_correspondences);
    fit_homography_points(&src, &dst, params, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::magnitude_histogram;

    fn fit(flow: &FlowField) -> HomographyFit {
        let h = magnitude_histogram(flow).unwrap();
        fit_homography_ransac(flow, &h, &RansacParams::default(), 1).unwrap()
    }

    #[test]
    fn zero_flow_gives_identity() {
        let f = fit(&FlowField::zeros(64, 48));
        assert!(f.homography.corner_error(&Homography::identity(), 64, 48) < 1e-6);
        let m = f.homography.matrix();
        for r in 0..3 {
            for c in 0..3 {
                let e = if r == c { 1.0 } else { 0.0 };
                assert!((m[(r, c)] - e).abs() < 1e-6);
            }
        }
        assert_eq!(f.inlier_ratio, 1.0);
    }

    #[test]
    fn uniform_flow_gives_translation() {
        let f = fit(&FlowField::uniform(64, 48, [5.0, -2.0]));
        assert!(
            f.homography
                .corner_error(&Homography::translation(5.0, -2.0), 64, 48)
                < 1e-3
        );
    }

    #[test]
    fn too_few_correspondences() {
        let flow = FlowField::zeros(9, 9);
        let h = magnitude_histogram(&flow).unwrap();
        assert_eq!(
            fit_homography_ransac(&flow, &h, &RansacParams::default(), 0),
            Err(AlignError::TooFewCorrespondences {
                found: 81,
                needed: 100
            })
        );
    }

    #[test]
    fn all_collinear_is_degenerate() {
        let src: Vec<[f64; 2]> = (0..200).map(|i| [i as f64, 0.0]).collect();
        let r = fit_homography_points(&src, &src, &RansacParams::default(), 3);
        assert_eq!(r, Err(AlignError::DegenerateConfiguration));
    }

    #[test]
    fn reproducible_for_seed() {
        let mut flow = FlowField::from_fn(80, 60, |x, y| [0.8 + 0.004 * x as f32, -0.5 + 0.003 * y as f32]);
        for i in (0..flow.uv.len()).step_by(7) {
            flow.uv[i] = [((i * 13) % 5) as f32 - 2.0, 1.5];
        }
        let h = magnitude_histogram(&flow).unwrap();
        let a = fit_homography_ransac(&flow, &h, &RansacParams::default(), 42).unwrap();
        let b = fit_homography_ransac(&flow, &h, &RansacParams::default(), 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn subsampling_caps_correspondences() {
        let flow = FlowField::zeros(300, 200);
        let h = magnitude_histogram(&flow).unwrap();
        let (s, d) = dominant_correspondences(&flow, &h, 20_000);
        assert!(s.len() <= 20_000 && s.len() >= 15_000);
        assert_eq!(s.len(), d.len());
    }
}
