use crate::imgcore::{LdrImage, Mask, Raster, CHANNELS};

use super::homography::Homography;

/// Backward-warps `img` into the reference frame of `h` (which maps source
/// to reference coordinates) with bilinear sampling. A preimage within half
/// a pixel of the border still lies in an edge pixel's footprint and is
/// sampled with edge clamping; farther out the pixel is zero and cleared in
/// the returned mask.
pub fn warp(img: &LdrImage, h: &Homography) -> (LdrImage, Mask) {
    let (w, hgt) = (img.width(), img.height());
    let inv = h
        .inverse()
        .expect("homography invariant guarantees invertibility");
    let src = img.samples();
    let xmax = (w - 1) as f64;
    let ymax = (hgt - 1) as f64;
    const EPS: f64 = 0.5;
    let mut out = vec![0f32; w * hgt * CHANNELS];
    let mut bits = vec![false; w * hgt];
    for y in 0..hgt {
        for x in 0..w {
            let Some([sx, sy]) = inv.apply([x as f64, y as f64]) else {
                continue;
            };
            if !(sx >= -EPS && sx <= xmax + EPS && sy >= -EPS && sy <= ymax + EPS) {
                continue;
            }
            let sx = sx.clamp(0.0, xmax);
            let sy = sy.clamp(0.0, ymax);
            let x0 = sx.floor() as usize;
            let y0 = sy.floor() as usize;
            let x1 = (x0 + 1).min(w - 1);
            let y1 = (y0 + 1).min(hgt - 1);
            let ax = (sx - x0 as f64) as f32;
            let ay = (sy - y0 as f64) as f32;
            let o = (y * w + x) * CHANNELS;
            for c in 0..CHANNELS {
                let at = |xx: usize, yy: usize| src[(yy * w + xx) * CHANNELS + c];
                let top = at(x0, y0) * (1.0 - ax) + at(x1, y0) * ax;
                let bot = at(x0, y1) * (1.0 - ax) + at(x1, y1) * ax;
                out[o + c] = (top * (1.0 - ay) + bot * ay).clamp(0.0, 1.0);
            }
            bits[y * w + x] = true;
        }
    }
    let warped = LdrImage::new(w, hgt, out, img.bit_depth()).expect("bilinear stays in range");
    (warped, Mask::new(w, hgt, bits))
}
