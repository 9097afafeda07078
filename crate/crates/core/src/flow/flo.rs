//! Middlebury `.flo` files: float32 tag 202021.25 ("PIEH"), int32 width,
//! int32 height, then row-major interleaved float32 (u, v), all little-endian.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use super::field::FlowField;

pub const FLO_TAG: f32 = 202021.25;
/// Components above this magnitude mark unknown flow.
pub const UNKNOWN_FLOW_THRESH: f32 = 1e9;
pub const UNKNOWN_FLOW: f32 = 1e10;

#[derive(Debug, Error)]
pub enum FloError {
    #[error("not a .flo file (tag {0:?})")]
    BadMagic([u8; 4]),
    #[error("truncated .flo file: expected {expected} bytes, found {found}")]
    TruncatedFile { expected: usize, found: usize },
    #[error("flow is {got_w}x{got_h}, expected {want_w}x{want_h}")]
    DimensionMismatch {
        got_w: usize,
        got_h: usize,
        want_w: usize,
        want_h: usize,
    },
    #[error("invalid .flo dimensions {0}x{1}")]
    BadDimensions(i32, i32),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn encode_flo(field: &FlowField) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + field.uv.len() * 8);
    out.extend_from_slice(&FLO_TAG.to_le_bytes());
    out.extend_from_slice(&(field.width as i32).to_le_bytes());
    out.extend_from_slice(&(field.height as i32).to_le_bytes());
    for (uv, ok) in field.uv.iter().zip(&field.valid) {
        let [u, v] = if *ok { *uv } else { [UNKNOWN_FLOW, UNKNOWN_FLOW] };
        out.extend_from_slice(&u.to_le_bytes());
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_flo(bytes: &[u8]) -> Result<FlowField, FloError> {
    if bytes.len() < 12 {
        return Err(FloError::TruncatedFile {
            expected: 12,
            found: bytes.len(),
        });
    }
    let tag = [bytes[0], bytes[1], bytes[2], bytes[3]];
    if f32::from_le_bytes(tag) != FLO_TAG {
        return Err(FloError::BadMagic(tag));
    }
    let w = i32::from_le_bytes([bytes[4], bytes[5], bytes[6], bytes[7]]);
    let h = i32::from_le_bytes([bytes[8], bytes[9], bytes[10], bytes[11]]);
    if w <= 0 || h <= 0 {
        return Err(FloError::BadDimensions(w, h));
    }
    let (w, h) = (w as usize, h as usize);
    let expected = 12 + w * h * 8;
    if bytes.len() < expected {
        return Err(FloError::TruncatedFile {
            expected,
            found: bytes.len(),
        });
    }
    let body = &bytes[12..expected];
    let mut uv = Vec::with_capacity(w * h);
    let mut valid = Vec::with_capacity(w * h);
    for px in body.chunks_exact(8) {
        let u = f32::from_le_bytes([px[0], px[1], px[2], px[3]]);
        let v = f32::from_le_bytes([px[4], px[5], px[6], px[7]]);
        valid.push(
            u.is_finite() && v.is_finite() && u.abs() < UNKNOWN_FLOW_THRESH && v.abs() < UNKNOWN_FLOW_THRESH,
        );
        uv.push([u, v]);
    }
    Ok(FlowField::new(w, h, uv, valid))
}

/// Loads a `.flo` file; `expect` checks the dimensions against the frames it
/// will be paired with.
pub fn load_flo(path: impl AsRef<Path>, expect: Option<(usize, usize)>) -> Result<FlowField, FloError> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    let field = decode_flo(&bytes)?;
    if let Some((want_w, want_h)) = expect {
        if field.width != want_w || field.height != want_h {
            return Err(FloError::DimensionMismatch {
                got_w: field.width,
                got_h: field.height,
                want_w,
                want_h,
            });
        }
    }
    Ok(field)
}

pub fn write_flo(field: &FlowField, path: impl AsRef<Path>) -> Result<(), FloError> {
    let mut f = BufWriter::new(File::create(path)?);
    f.write_all(&encode_flo(field))?;
    f.flush()?;
    Ok(())
}
