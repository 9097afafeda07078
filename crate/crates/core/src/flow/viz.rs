use crate::imgcore::LdrImage;

use super::field::FlowField;

fn hsv_to_rgb(h: f32, s: f32, v: f32) -> [f32; 3] {
    let h6 = (h.rem_euclid(1.0)) * 6.0;
    let sector = h6.floor() as i32 % 6;
    let f = h6 - h6.floor();
    let p = v * (1.0 - s);
    let q = v * (1.0 - s * f);
    let t = v * (1.0 - s * (1.0 - f));
    match sector {
        0 => [v, t, p],
        1 => [q, v, p],
        2 => [p, v, t],
        3 => [p, q, v],
        4 => [t, p, v],
        _ => [v, p, q],
    }
}

/// HSV coding: direction to hue, magnitude (normalized by `max_magnitude`, or
/// by the field maximum when `None`) to value. Invalid pixels are black.
pub fn flow_to_rgb(field: &FlowField, max_magnitude: Option<f32>) -> LdrImage {
    let max = max_magnitude.unwrap_or_else(|| {
        (0..field.uv.len())
            .filter(|i| field.valid[*i])
            .map(|i| field.magnitude_at(i) as f32)
            .fold(0.0, f32::max)
    });
    let scale = if max > 0.0 { 1.0 / max } else { 0.0 };
    LdrImage::from_fn(field.width, field.height, |x, y| {
        let i = y * field.width + x;
        if !field.valid[i] {
            return [0.0; 3];
        }
        let [u, v] = field.uv[i];
        let hue = (v.atan2(u) / std::f32::consts::TAU).rem_euclid(1.0);
        let val = (u.hypot(v) * scale).min(1.0);
        hsv_to_rgb(hue, 1.0, val)
    })
    .expect("flow dims are nonzero")
    .with_bit_depth(8)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imgcore::Raster;

    #[test]
    fn zero_flow_is_black_and_rightward_is_red() {
        let img = flow_to_rgb(&FlowField::zeros(2, 2), None);
        assert!(img.samples().iter().all(|v| *v == 0.0));
        let img = flow_to_rgb(&FlowField::uniform(1, 1, [3.0, 0.0]), None);
        assert_eq!(img.pixel(0, 0), [1.0, 0.0, 0.0]);
    }
}
