use thiserror::Error;

/// Channels per pixel. Every image in the pipeline is interleaved RGB.
pub const CHANNELS: usize = 3;

#[derive(Debug, Error, PartialEq)]
pub enum ImageError {
    #[error("image dimensions must be nonzero, got {width}x{height}")]
    ZeroSize { width: usize, height: usize },
    #[error("buffer length {len} does not match {width}x{height}x{channels}")]
    BufferLength {
        len: usize,
        width: usize,
        height: usize,
        channels: usize,
    },
    #[error("LDR sample {value} at index {index} outside [0, 1]")]
    LdrOutOfRange { index: usize, value: f32 },
    #[error("HDR sample {value} at index {index} is negative or not finite")]
    HdrInvalid { index: usize, value: f32 },
    #[error("crop {w}x{h} at ({x}, {y}) exceeds {width}x{height}")]
    CropOutOfBounds {
        x: usize,
        y: usize,
        w: usize,
        h: usize,
        width: usize,
        height: usize,
    },
    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
}

/// Read-only view shared by LDR and HDR images so metrics can take either.
pub trait Raster {
    fn width(&self) -> usize;
    fn height(&self) -> usize;
    /// Interleaved RGB samples, row-major.
    fn samples(&self) -> &[f32];

    fn pixel_count(&self) -> usize {
        self.width() * self.height()
    }

    fn pixel(&self, x: usize, y: usize) -> [f32; 3] {
        let i = (y * self.width() + x) * CHANNELS;
        let s = self.samples();
        [s[i], s[i + 1], s[i + 2]]
    }
}

fn check_dims(width: usize, height: usize, len: usize) -> Result<(), ImageError> {
    if width == 0 || height == 0 {
        return Err(ImageError::ZeroSize { width, height });
    }
    if len != width * height * CHANNELS {
        return Err(ImageError::BufferLength {
            len,
            width,
            height,
            channels: CHANNELS,
        });
    }
    Ok(())
}

fn crop_samples(
    src: &[f32],
    width: usize,
    height: usize,
    x: usize,
    y: usize,
    w: usize,
    h: usize,
) -> Result<Vec<f32>, ImageError> {
    if w == 0 || h == 0 || x + w > width || y + h > height {
        return Err(ImageError::CropOutOfBounds {
            x,
            y,
            w,
            h,
            width,
            height,
        });
    }
    let mut out = Vec::with_capacity(w * h * CHANNELS);
    for row in y..y + h {
        let start = (row * width + x) * CHANNELS;
        out.extend_from_slice(&src[start..start + w * CHANNELS]);
    }
    Ok(out)
}

/// Gamma-encoded low dynamic range image with samples normalized to [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct LdrImage {
    width: usize,
    height: usize,
    bit_depth: u8,
    data: Vec<f32>,
}

impl LdrImage {
    pub fn new(width: usize, height: usize, data: Vec<f32>, bit_depth: u8) -> Result<Self, ImageError> {
        check_dims(width, height, data.len())?;
        if let Some((index, &value)) = data.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(ImageError::LdrOutOfRange { index, value });
        }
        Ok(Self {
            width,
            height,
            bit_depth,
            data,
        })
    }

    /// Builds an image from arbitrary samples, clamping them into [0, 1].
    /// NaN maps to 0.
    pub fn from_clamped(
        width: usize,
        height: usize,
        mut data: Vec<f32>,
        bit_depth: u8,
    ) -> Result<Self, ImageError> {
        for v in &mut data {
            *v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
        }
        Self::new(width, height, data, bit_depth)
    }

    pub fn filled(width: usize, height: usize, value: f32) -> Result<Self, ImageError> {
        Self::new(width, height, vec![value; width * height * CHANNELS], 16)
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> [f32; 3],
    ) -> Result<Self, ImageError> {
        let mut data = Vec::with_capacity(width * height * CHANNELS);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self::from_clamped(width, height, data, 16)
    }

    pub fn bit_depth(&self) -> u8 {
        self.bit_depth
    }

    pub fn with_bit_depth(mut self, bit_depth: u8) -> Self {
        self.bit_depth = bit_depth;
        self
    }

    pub fn crop(&self, x: usize, y: usize, w: usize, h: usize) -> Result<Self, ImageError> {
        let data = crop_samples(&self.data, self.width, self.height, x, y, w, h)?;
        Ok(Self {
            width: w,
            height: h,
            bit_depth: self.bit_depth,
            data,
        })
    }

    /// Rec. 709 luma of the gamma-encoded samples.
    pub fn luma(&self) -> Plane {
        let data = self
            .data
            .chunks_exact(CHANNELS)
            .map(|p| 0.2126 * p[0] + 0.7152 * p[1] + 0.0722 * p[2])
            .collect();
        Plane::new(self.width, self.height, data)
    }

    pub fn into_samples(self) -> Vec<f32> {
        self.data
    }
}

impl Raster for LdrImage {
    fn width(&self) -> usize {
        self.width
    }
    fn height(&self) -> usize {
        self.height
    }
    fn samples(&self) -> &[f32] {
        &self.data
    }
}

/// Linear radiance image. Values are nonnegative and finite but unbounded above.
#[derive(Debug, Clone, PartialEq)]
pub struct HdrImage {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl HdrImage {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self, ImageError> {
        check_dims(width, height, data.len())?;
        if let Some((index, &value)) = data
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
        {
            return Err(ImageError::HdrInvalid { index, value });
        }
        Ok(Self { width, height, data })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> [f32; 3],
    ) -> Result<Self, ImageError> {
        let mut data = Vec::with_capacity(width * height * CHANNELS);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    pub fn crop(&self, x: usize, y: usize, w: usize, h: usize) -> Result<Self, ImageError> {
        let data = crop_samples(&self.data, self.width, self.height, x, y, w, h)?;
        Ok(Self {
            width: w,
            height: h,
            data,
        })
    }

    pub fn into_samples(self) -> Vec<f32> {
        self.data
    }
}

impl Raster for HdrImage {
    fn width(&self) -> usize {
        self.width
    }
    fn height(&self) -> usize {
        self.height
    }
    fn samples(&self) -> &[f32] {
        &self.data
    }
}

/// Single-channel f32 raster (luminance, flow magnitude, ramps).
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl Plane {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Self {
        assert_eq!(data.len(), width * height, "plane buffer length");
        Self { width, height, data }
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::new(width, height, vec![0.0; width * height])
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    /// Bilinear sample with coordinates clamped to the border.
    #[inline]
    pub fn sample(&self, x: f32, y: f32) -> f32 {
        let xf = x.clamp(0.0, (self.width - 1) as f32);
        let yf = y.clamp(0.0, (self.height - 1) as f32);
        let x0 = xf.floor() as usize;
        let y0 = yf.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let ax = xf - x0 as f32;
        let ay = yf - y0 as f32;
        let top = self.at(x0, y0) * (1.0 - ax) + self.at(x1, y0) * ax;
        let bottom = self.at(x0, y1) * (1.0 - ax) + self.at(x1, y1) * ax;
        top * (1.0 - ay) + bottom * ay
    }
}

/// Binary per-pixel mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    pub width: usize,
    pub height: usize,
    pub bits: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Self {
        assert_eq!(bits.len(), width * height, "mask buffer length");
        Self { width, height, bits }
    }

    pub fn full(width: usize, height: usize) -> Self {
        Self::new(width, height, vec![true; width * height])
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn all(&self) -> bool {
        self.bits.iter().all(|b| *b)
    }

    pub fn coverage(&self) -> f64 {
        self.count() as f64 / self.bits.len() as f64
    }

    pub fn crop(&self, x: usize, y: usize, w: usize, h: usize) -> Mask {
        let mut bits = Vec::with_capacity(w * h);
        for row in y..y + h {
            let start = row * self.width + x;
            bits.extend_from_slice(&self.bits[start..start + w]);
        }
        Mask::new(w, h, bits)
    }
}

/// Index of the short, reference and long frame inside a stack.
pub const SHORT: usize = 0;
pub const REFERENCE: usize = 1;
pub const LONG: usize = 2;

#[derive(Debug, Error, PartialEq)]
pub enum StackError {
    #[error("exposure values must be strictly increasing, got {0:?}")]
    EvOrder([f32; 3]),
    #[error("frame {index} is {got_w}x{got_h}, reference is {ref_w}x{ref_h}")]
    FrameSize {
        index: usize,
        got_w: usize,
        got_h: usize,
        ref_w: usize,
        ref_h: usize,
    },
    #[error("gamma must be positive, got {0}")]
    Gamma(f32),
}

/// One scene's short/reference/long LDR triplet.
#[derive(Debug, Clone)]
pub struct ExposureStack {
    pub scene_id: String,
    frames: [LdrImage; 3],
    ev: [f32; 3],
    gamma: f32,
}

impl ExposureStack {
    pub fn new(
        scene_id: impl Into<String>,
        frames: [LdrImage; 3],
        ev: [f32; 3],
        gamma: f32,
    ) -> Result<Self, StackError> {
        if !(ev[0] < ev[1] && ev[1] < ev[2]) {
            return Err(StackError::EvOrder(ev));
        }
        if gamma.is_nan() || gamma <= 0.0 {
            return Err(StackError::Gamma(gamma));
        }
        let (rw, rh) = (frames[REFERENCE].width(), frames[REFERENCE].height());
        for (index, f) in frames.iter().enumerate() {
            if f.width() != rw || f.height() != rh {
                return Err(StackError::FrameSize {
                    index,
                    got_w: f.width(),
                    got_h: f.height(),
                    ref_w: rw,
                    ref_h: rh,
                });
            }
        }
        Ok(Self {
            scene_id: scene_id.into(),
            frames,
            ev,
            gamma,
        })
    }

    pub fn frames(&self) -> &[LdrImage; 3] {
        &self.frames
    }

    pub fn frame(&self, k: usize) -> &LdrImage {
        &self.frames[k]
    }

    pub fn ev(&self) -> [f32; 3] {
        self.ev
    }

    /// Exposure values relative to the reference frame, so the reference is at 0.
    pub fn relative_ev(&self) -> [f32; 3] {
        let r = self.ev[REFERENCE];
        [self.ev[0] - r, 0.0, self.ev[2] - r]
    }

    pub fn gamma(&self) -> f32 {
        self.gamma
    }

    pub fn width(&self) -> usize {
        self.frames[REFERENCE].width()
    }

    pub fn height(&self) -> usize {
        self.frames[REFERENCE].height()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ldr_rejects_out_of_range() {
        let err = LdrImage::new(1, 1, vec![0.0, 1.5, 0.2], 8).unwrap_err();
        assert_eq!(err, ImageError::LdrOutOfRange { index: 1, value: 1.5 });
        assert!(LdrImage::new(0, 1, vec![], 8).is_err());
        assert!(LdrImage::new(2, 1, vec![0.0; 3], 8).is_err());
    }

    #[test]
    fn hdr_rejects_nan_and_negative() {
        assert!(HdrImage::new(1, 1, vec![f32::NAN, 0.0, 0.0]).is_err());
        assert!(HdrImage::new(1, 1, vec![-0.1, 0.0, 0.0]).is_err());
        assert!(HdrImage::new(1, 1, vec![7.0, 0.0, 0.0]).is_ok());
    }

    #[test]
    fn crop_picks_expected_pixels() {
        let img = LdrImage::from_fn(4, 3, |x, y| [x as f32 / 4.0, y as f32 / 4.0, 0.0]).unwrap();
        let c = img.crop(1, 1, 2, 2).unwrap();
        assert_eq!(c.pixel(0, 0), [0.25, 0.25, 0.0]);
        assert_eq!(c.pixel(1, 1), [0.5, 0.5, 0.0]);
        assert!(img.crop(3, 0, 2, 1).is_err());
    }

    #[test]
    fn stack_validates_ev_order_and_size() {
        let a = LdrImage::filled(4, 4, 0.5).unwrap();
        let b = LdrImage::filled(4, 5, 0.5).unwrap();
        let frames = [a.clone(), a.clone(), a.clone()];
        assert!(ExposureStack::new("s", frames.clone(), [-2.0, 0.0, 2.0], 2.2).is_ok());
        assert!(matches!(
            ExposureStack::new("s", frames.clone(), [0.0, 0.0, 2.0], 2.2),
            Err(StackError::EvOrder(_))
        ));
        assert!(matches!(
            ExposureStack::new("s", [a.clone(), a, b], [-2.0, 0.0, 2.0], 2.2),
            Err(StackError::FrameSize { index: 2, .. })
        ));
        let s = ExposureStack::new("s", frames, [-1.0, 1.0, 3.0], 2.2).unwrap();
        assert_eq!(s.relative_ev(), [-2.0, 0.0, 2.0]);
    }

    #[test]
    fn plane_bilinear_sample() {
        let p = Plane::new(2, 2, vec![0.0, 1.0, 2.0, 3.0]);
        assert!((p.sample(0.5, 0.5) - 1.5).abs() < 1e-6);
        assert_eq!(p.sample(-3.0, 0.0), 0.0);
        assert_eq!(p.sample(5.0, 5.0), 3.0);
    }
}
