//! Image file I/O: PNG/TIFF LDR input, 16-bit PNG output, and PFM for HDR.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use image::{DynamicImage, ImageBuffer, Rgb};
use thiserror::Error;

use super::image::{HdrImage, ImageError, LdrImage, Raster, CHANNELS};

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("decode/encode failure: {0}")]
    Codec(#[from] image::ImageError),
    #[error("malformed PFM: {0}")]
    Pfm(String),
    #[error(transparent)]
    Image(#[from] ImageError),
}

/// Reads an 8- or 16-bit PNG or TIFF and normalizes it to [0, 1] RGB.
pub fn read_ldr(path: impl AsRef<Path>) -> Result<LdrImage, IoError> {
    let img = image::open(path.as_ref())?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let (data, depth): (Vec<f32>, u8) = match img {
        DynamicImage::ImageLuma8(_)
        | DynamicImage::ImageLumaA8(_)
        | DynamicImage::ImageRgb8(_)
        | DynamicImage::ImageRgba8(_) => {
            let rgb = img.to_rgb8();
            (rgb.into_raw().iter().map(|&v| v as f32 / 255.0).collect(), 8)
        }
        _ => {
            let rgb = img.to_rgb16();
            (rgb.into_raw().iter().map(|&v| v as f32 / 65535.0).collect(), 16)
        }
    };
    Ok(LdrImage::from_clamped(w, h, data, depth)?)
}

#[inline]
pub fn quantize_u16(v: f32) -> u16 {
    (v.clamp(0.0, 1.0) * 65535.0 + 0.5).floor() as u16
}

/// Writes a 16-bit RGB PNG.
pub fn write_png16(img: &LdrImage, path: impl AsRef<Path>) -> Result<(), IoError> {
    let raw: Vec<u16> = img.samples().iter().map(|&v| quantize_u16(v)).collect();
    let buf: ImageBuffer<Rgb<u16>, Vec<u16>> =
        ImageBuffer::from_raw(img.width() as u32, img.height() as u32, raw).expect("buffer sized from image");
    buf.save_with_format(path, image::ImageFormat::Png)?;
    Ok(())
}

/// Writes an 8-bit RGB PNG (debug visualisations).
pub fn write_png8(img: &LdrImage, path: impl AsRef<Path>) -> Result<(), IoError> {
    let raw: Vec<u8> = img
        .samples()
        .iter()
        .map(|&v| (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8)
        .collect();
    let buf: ImageBuffer<Rgb<u8>, Vec<u8>> =
        ImageBuffer::from_raw(img.width() as u32, img.height() as u32, raw).expect("buffer sized from image");
    buf.save_with_format(path, image::ImageFormat::Png)?;
    Ok(())
}

/// Raw PFM contents before any radiance validation.
#[derive(Debug, Clone, PartialEq)]
pub struct PfmData {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    /// Top-to-bottom rows, interleaved channels.
    pub data: Vec<f32>,
}

/// Serializes a colour PFM: `PF`, dimensions, scale `-1.0` (little-endian),
/// rows stored bottom-to-top.
pub fn encode_pfm(img: &HdrImage) -> Vec<u8> {
    let (w, h) = (img.width(), img.height());
    let header = format!("PF\n{w} {h}\n-1.0\n");
    let mut out = Vec::with_capacity(header.len() + w * h * CHANNELS * 4);
    out.extend_from_slice(header.as_bytes());
    let s = img.samples();
    for row in (0..h).rev() {
        for v in &s[row * w * CHANNELS..(row + 1) * w * CHANNELS] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn write_pfm(img: &HdrImage, path: impl AsRef<Path>) -> Result<(), IoError> {
    let mut f = BufWriter::new(File::create(path)?);
    f.write_all(&encode_pfm(img))?;
    f.flush()?;
    Ok(())
}

fn next_token<R: BufRead>(r: &mut R) -> Result<String, IoError> {
    let mut tok = Vec::new();
    loop {
        let mut b = [0u8; 1];
        if r.read(&mut b)? == 0 {
            break;
        }
        if b[0].is_ascii_whitespace() {
            if tok.is_empty() {
                continue;
            }
            break;
        }
        tok.push(b[0]);
        if tok.len() > 64 {
            return Err(IoError::Pfm("header token too long".into()));
        }
    }
    if tok.is_empty() {
        return Err(IoError::Pfm("truncated header".into()));
    }
    String::from_utf8(tok).map_err(|_| IoError::Pfm("non-ASCII header".into()))
}

pub fn decode_pfm<R: Read>(reader: R) -> Result<PfmData, IoError> {
    let mut r = BufReader::new(reader);
    let channels = match next_token(&mut r)?.as_str() {
        "PF" => 3,
        "Pf" => 1,
        other => return Err(IoError::Pfm(format!("bad magic {other:?}"))),
    };
    let parse_dim = |s: String| {
        s.parse::<usize>()
            .ok()
            .filter(|v| *v > 0)
            .ok_or_else(|| IoError::Pfm(format!("bad dimension {s:?}")))
    };
    let width = parse_dim(next_token(&mut r)?)?;
    let height = parse_dim(next_token(&mut r)?)?;
    let scale_tok = next_token(&mut r)?;
    let scale: f32 = scale_tok
        .parse()
        .map_err(|_| IoError::Pfm(format!("bad scale {scale_tok:?}")))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(IoError::Pfm(format!("bad scale {scale_tok:?}")));
    }
    let little_endian = scale < 0.0;
    let row_len = width * channels;
    let mut bytes = vec![0u8; width * height * channels * 4];
    r.read_exact(&mut bytes)
        .map_err(|_| IoError::Pfm("truncated pixel data".into()))?;
    let mut data = vec![0f32; width * height * channels];
    for (i, chunk) in bytes.chunks_exact(4).enumerate() {
        let b = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little_endian {
            f32::from_le_bytes(b)
        } else {
            f32::from_be_bytes(b)
        };
        let file_row = i / row_len;
        let col = i % row_len;
        data[(height - 1 - file_row) * row_len + col] = v;
    }
    Ok(PfmData {
        width,
        height,
        channels,
        data,
    })
}

/// Reads a PFM as HDR radiance. Greyscale files are replicated to RGB.
pub fn read_pfm(path: impl AsRef<Path>) -> Result<HdrImage, IoError> {
    let raw = decode_pfm(File::open(path)?)?;
    pfm_to_hdr(raw)
}

pub fn pfm_to_hdr(raw: PfmData) -> Result<HdrImage, IoError> {
    let data = if raw.channels == 1 {
        raw.data.iter().flat_map(|&v| [v, v, v]).collect()
    } else {
        raw.data
    };
    Ok(HdrImage::new(raw.width, raw.height, data)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pfm_header_and_row_order() {
        let img = HdrImage::new(1, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let bytes = encode_pfm(&img);
        assert!(bytes.starts_with(b"PF\n1 2\n-1.0\n"));
        let body = &bytes[b"PF\n1 2\n-1.0\n".len()..];
        // bottom row first
        assert_eq!(&body[0..4], &4.0f32.to_le_bytes());
        assert_eq!(&body[12..16], &1.0f32.to_le_bytes());
        let back = pfm_to_hdr(decode_pfm(&bytes[..]).unwrap()).unwrap();
        assert_eq!(back, img);
    }

    #[test]
    fn pfm_big_endian_and_greyscale() {
        let mut bytes = b"Pf\n2 1\n1.0\n".to_vec();
        bytes.extend_from_slice(&0.5f32.to_be_bytes());
        bytes.extend_from_slice(&2.0f32.to_be_bytes());
        let raw = decode_pfm(&bytes[..]).unwrap();
        assert_eq!(raw.channels, 1);
        assert_eq!(raw.data, vec![0.5, 2.0]);
        let hdr = pfm_to_hdr(raw).unwrap();
        assert_eq!(hdr.pixel(1, 0), [2.0; 3]);
    }

    #[test]
    fn pfm_errors() {
        assert!(matches!(decode_pfm(&b"P6\n1 1\n-1\n"[..]), Err(IoError::Pfm(_))));
        assert!(matches!(
            decode_pfm(&b"PF\n2 2\n-1.0\n\0\0\0\0"[..]),
            Err(IoError::Pfm(_))
        ));
        assert!(matches!(
            decode_pfm(&b"PF\n0 2\n-1.0\n"[..]),
            Err(IoError::Pfm(_))
        ));
    }

    #[test]
    fn png16_round_trip_within_quantization() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.png");
        let img = LdrImage::from_fn(5, 3, |x, y| [x as f32 / 7.0, y as f32 / 3.0, 0.123_456]).unwrap();
        write_png16(&img, &path).unwrap();
        let back = read_ldr(&path).unwrap();
        assert_eq!(back.bit_depth(), 16);
        for (a, b) in img.samples().iter().zip(back.samples()) {
            assert!((a - b).abs() <= 0.5 / 65535.0 + 1e-7);
        }
    }

    #[test]
    fn reads_8bit_tiff() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.tif");
        let buf: ImageBuffer<Rgb<u8>, Vec<u8>> =
            ImageBuffer::from_raw(2, 1, vec![0, 128, 255, 10, 20, 30]).unwrap();
        buf.save_with_format(&path, image::ImageFormat::Tiff).unwrap();
        let img = read_ldr(&path).unwrap();
        assert_eq!(img.bit_depth(), 8);
        assert_eq!(img.pixel(0, 0), [0.0, 128.0 / 255.0, 1.0]);
    }
}
