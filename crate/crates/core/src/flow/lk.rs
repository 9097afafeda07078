//! Dense coarse-to-fine Lucas-Kanade flow on single-channel planes.
//!
//! Every pixel carries its own displacement. Per iteration the destination is
//! warped by the current field, the symmetric gradient and temporal residual
//! are formed, and the 2x2 normal equations are accumulated over a square
//! window with box filters.

use thiserror::Error;

use crate::imgcore::{LdrImage, Plane, Raster, CHANNELS};

use super::field::FlowField;

#[derive(Debug, Error, PartialEq)]
pub enum FlowError {
    #[error("source has no gradient energy; flow is undefined")]
    DegenerateImage,
    #[error("frame sizes differ: {0}x{1} vs {2}x{3}")]
    SizeMismatch(usize, usize, usize, usize),
    #[error("window size must be odd and at least 3, got {0}")]
    BadWindow(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowParams {
    pub levels: usize,
    pub iterations: usize,
    /// Side of the square integration window (odd).
    pub window: usize,
    /// Minimum eigenvalue of the per-pixel mean structure tensor for a pixel
    /// to be considered trackable.
    pub min_eigen: f32,
}

impl Default for FlowParams {
    fn default() -> Self {
        Self {
            levels: 5,
            iterations: 10,
            window: 21,
            min_eigen: 1e-6,
        }
    }
}

/// Mean gradient energy below which a source image is rejected.
const DEGENERATE_ENERGY: f64 = 1e-10;
/// Per-iteration step clamp in pixels at the current level.
const MAX_STEP: f32 = 2.0;
/// Share of a window's weight that must come from usable samples.
const MIN_WINDOW_SUPPORT: f32 = 0.5;
/// Samples at or above this value are treated as clipped and carry no
/// motion information.
const CLIP_LEVEL: f32 = 1.0 - 1e-6;

fn blur_downsample(p: &Plane) -> Plane {
    const K: [f32; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];
    let (w, h) = (p.width, p.height);
    let idx = |i: isize, n: usize| i.clamp(0, n as isize - 1) as usize;
    let mut tmp = vec![0f32; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut s = 0.0;
            for (k, wk) in K.iter().enumerate() {
                s += wk * p.data[y * w + idx(x as isize + k as isize - 2, w)];
            }
            tmp[y * w + x] = s;
        }
    }
    let (nw, nh) = (w.div_ceil(2), h.div_ceil(2));
    let mut out = vec![0f32; nw * nh];
    for y in 0..nh {
        for x in 0..nw {
            let mut s = 0.0;
            for (k, wk) in K.iter().enumerate() {
                s += wk * tmp[idx(2 * y as isize + k as isize - 2, h) * w + 2 * x];
            }
            out[y * nw + x] = s;
        }
    }
    Plane::new(nw, nh, out)
}

fn pyramid(p: &Plane, levels: usize) -> Vec<Plane> {
    let mut out = vec![p.clone()];
    while out.len() < levels {
        let last = out.last().unwrap();
        if last.width < 16 || last.height < 16 {
            break;
        }
        out.push(blur_downsample(last));
    }
    out
}

fn gradients(p: &Plane) -> (Plane, Plane) {
    let (w, h) = (p.width, p.height);
    let mut gx = vec![0f32; w * h];
    let mut gy = vec![0f32; w * h];
    for y in 0..h {
        let ym = y.saturating_sub(1);
        let yp = (y + 1).min(h - 1);
        for x in 0..w {
            let xm = x.saturating_sub(1);
            let xp = (x + 1).min(w - 1);
            gx[y * w + x] = (p.at(xp, y) - p.at(xm, y)) / (xp - xm).max(1) as f32;
            gy[y * w + x] = (p.at(x, yp) - p.at(x, ym)) / (yp - ym).max(1) as f32;
        }
    }
    (Plane::new(w, h, gx), Plane::new(w, h, gy))
}

/// Box sums over a `(2r+1)^2` window clipped to the image, for several
/// planes at once. Running sums are kept in f64.
fn box_sums<const N: usize>(planes: &[Vec<f32>; N], w: usize, h: usize, r: usize) -> [Vec<f32>; N] {
    std::array::from_fn(|k| {
        let src = &planes[k];
        let mut horiz = vec![0f64; w * h];
        for y in 0..h {
            let row = &src[y * w..(y + 1) * w];
            let mut acc = 0f64;
            for v in row.iter().take(r.min(w - 1) + 1) {
                acc += *v as f64;
            }
            for x in 0..w {
                horiz[y * w + x] = acc;
                let add = x + r + 1;
                if add < w {
                    acc += row[add] as f64;
                }
                if x >= r {
                    acc -= row[x - r] as f64;
                }
            }
        }
        let mut out = vec![0f32; w * h];
        for x in 0..w {
            let mut acc = 0f64;
            for y in 0..=r.min(h - 1) {
                acc += horiz[y * w + x];
            }
            for y in 0..h {
                out[y * w + x] = acc as f32;
                let add = y + r + 1;
                if add < h {
                    acc += horiz[add * w + x];
                }
                if y >= r {
                    acc -= horiz[(y - r) * w + x];
                }
            }
        }
        out
    })
}

/// Triangle-weighted window of half-width `r`, built from two box passes.
/// Its frequency response is nonnegative, which keeps the per-pixel
/// iteration from amplifying high-frequency flow errors.
fn window_sums<const N: usize>(planes: &[Vec<f32>; N], w: usize, h: usize, r: usize) -> [Vec<f32>; N] {
    let half = (r / 2).max(1);
    let once = box_sums(planes, w, h, half);
    box_sums(&once, w, h, r - half)
}

fn min_eigen(a: f32, b: f32, c: f32) -> f32 {
    let half_tr = 0.5 * (a + c);
    let d = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    half_tr - d
}

struct LevelResult {
    uv: Vec<[f32; 2]>,
    trackable: Vec<bool>,
}

fn refine_level(src: &Plane, dst: &Plane, init: Vec<[f32; 2]>, params: &FlowParams) -> LevelResult {
    let (w, h) = (src.width, src.height);
    let n = w * h;
    let r = params.window / 2;
    let (sgx, sgy) = gradients(src);
    let (dgx, dgy) = gradients(dst);
    let mut uv = init;
    let mut trackable = vec![false; n];
    let xmax = (w - 1) as f32;
    let ymax = (h - 1) as f32;

    let [full] = window_sums(&[vec![1f32; n]], w, h, r);

    for _ in 0..params.iterations {
        let mut prods: [Vec<f32>; 5] = std::array::from_fn(|_| vec![0f32; n]);
        let mut count = vec![0f32; n];
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                let tx = x as f32 + uv[i][0];
                let ty = y as f32 + uv[i][1];
                if !(0.0..=xmax).contains(&tx) || !(0.0..=ymax).contains(&ty) {
                    continue;
                }
                let d = dst.sample(tx, ty);
                if src.data[i] >= CLIP_LEVEL || d >= CLIP_LEVEL {
                    continue;
                }
                let gx = 0.5 * (sgx.data[i] + dgx.sample(tx, ty));
                let gy = 0.5 * (sgy.data[i] + dgy.sample(tx, ty));
                let it = d - src.data[i];
                prods[0][i] = gx * gx;
                prods[1][i] = gx * gy;
                prods[2][i] = gy * gy;
                prods[3][i] = gx * it;
                prods[4][i] = gy * it;
                count[i] = 1.0;
            }
        }
        let [sxx, sxy, syy, sxt, syt] = window_sums(&prods, w, h, r);
        let [cnt] = window_sums(&[count], w, h, r);
        for i in 0..n {
            if cnt[i] < 1.0 || cnt[i] < MIN_WINDOW_SUPPORT * full[i] {
                trackable[i] = false;
                continue;
            }
            let inv = 1.0 / cnt[i];
            let (a, b, c) = (sxx[i] * inv, sxy[i] * inv, syy[i] * inv);
            let (e, f) = (sxt[i] * inv, syt[i] * inv);
            if min_eigen(a, b, c) < params.min_eigen {
                trackable[i] = false;
                continue;
            }
            trackable[i] = true;
            let det = a * c - b * b;
            let du = -(c * e - b * f) / det;
            let dv = -(a * f - b * e) / det;
            if du.is_finite() && dv.is_finite() {
                uv[i][0] += du.clamp(-MAX_STEP, MAX_STEP);
                uv[i][1] += dv.clamp(-MAX_STEP, MAX_STEP);
            }
        }
    }
    LevelResult { uv, trackable }
}

fn upsample_flow(coarse: &[[f32; 2]], cw: usize, ch: usize, w: usize, h: usize) -> Vec<[f32; 2]> {
    let u = Plane::new(cw, ch, coarse.iter().map(|p| p[0]).collect());
    let v = Plane::new(cw, ch, coarse.iter().map(|p| p[1]).collect());
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let cx = (x as f32 + 0.5) * 0.5 - 0.5;
            let cy = (y as f32 + 0.5) * 0.5 - 0.5;
            out.push([2.0 * u.sample(cx, cy), 2.0 * v.sample(cx, cy)]);
        }
    }
    out
}

/// Dense flow between two single-channel planes of equal size.
pub fn estimate_flow_planes(src: &Plane, dst: &Plane, params: &FlowParams) -> Result<FlowField, FlowError> {
    if src.width != dst.width || src.height != dst.height {
        return Err(FlowError::SizeMismatch(
            src.width, src.height, dst.width, dst.height,
        ));
    }
    if params.window < 3 || params.window.is_multiple_of(2) {
        return Err(FlowError::BadWindow(params.window));
    }
    let (gx, gy) = gradients(src);
    let energy: f64 = gx
        .data
        .iter()
        .zip(&gy.data)
        .map(|(a, b)| (a * a + b * b) as f64)
        .sum::<f64>()
        / gx.data.len() as f64;
    if energy < DEGENERATE_ENERGY {
        return Err(FlowError::DegenerateImage);
    }

    let levels = params.levels.max(1);
    let src_pyr = pyramid(src, levels);
    let dst_pyr = pyramid(dst, levels);
    let top = src_pyr.len() - 1;
    let mut uv = vec![[0f32; 2]; src_pyr[top].width * src_pyr[top].height];
    let mut trackable = Vec::new();
    for level in (0..=top).rev() {
        let (s, d) = (&src_pyr[level], &dst_pyr[level]);
        if level < top {
            let c = &src_pyr[level + 1];
            uv = upsample_flow(&uv, c.width, c.height, s.width, s.height);
        }
        let res = refine_level(s, d, uv, params);
        uv = res.uv;
        trackable = res.trackable;
    }

    let (w, h) = (src.width, src.height);
    let valid = (0..w * h)
        .map(|i| {
            let (x, y) = ((i % w) as f32, (i / w) as f32);
            let [u, v] = uv[i];
            trackable[i]
                && u.is_finite()
                && v.is_finite()
                && (0.0..=(w - 1) as f32).contains(&(x + u))
                && (0.0..=(h - 1) as f32).contains(&(y + v))
        })
        .collect();
    Ok(FlowField::new(w, h, uv, valid))
}

/// Dense flow between two LDR frames using their luma.
pub fn estimate_flow(src: &LdrImage, dst: &LdrImage, params: &FlowParams) -> Result<FlowField, FlowError> {
    estimate_flow_planes(&src.luma(), &dst.luma(), params)
}

fn linear_luma(img: &LdrImage, gamma: f32) -> Vec<f32> {
    img.samples()
        .chunks_exact(CHANNELS)
        .map(|p| 0.2126 * p[0].powf(gamma) + 0.7152 * p[1].powf(gamma) + 0.0722 * p[2].powf(gamma))
        .collect()
}

/// Brings two frames of different exposure to the longer exposure: the
/// shorter frame's linear luma is scaled up and clipped, then both are
/// re-encoded with `gamma`.
pub fn equalize_exposure(a: &LdrImage, ev_a: f32, b: &LdrImage, ev_b: f32, gamma: f32) -> (Plane, Plane) {
    let inv = 1.0 / gamma;
    let encode = |lin: Vec<f32>, scale: f32| -> Vec<f32> {
        lin.into_iter()
            .map(|v| (v * scale).clamp(0.0, 1.0).powf(inv))
            .collect()
    };
    let (la, lb) = (linear_luma(a, gamma), linear_luma(b, gamma));
    let (sa, sb) = if ev_a < ev_b {
        ((ev_b - ev_a).exp2(), 1.0)
    } else {
        (1.0, (ev_a - ev_b).exp2())
    };
    (
        Plane::new(a.width(), a.height(), encode(la, sa)),
        Plane::new(b.width(), b.height(), encode(lb, sb)),
    )
}
