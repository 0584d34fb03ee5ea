//! PGM (P5), PPM (P6) and 8-bit PNG read/write.
//!
//! The netpbm codecs are implemented here; PNG goes through the `image`
//! crate. 16-bit sources are rescaled to `[0, 255]`. On save, samples are
//! clamped and rounded to 8 bits and the format follows the file extension.

use std::fs;
use std::path::Path;

use image::{DynamicImage, ImageBuffer, Luma, Rgb};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Pgm,
    Ppm,
    Png,
}

fn format_of(path: &Path) -> Result<Format> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .unwrap_or_default();
    match ext.as_str() {
        "pgm" => Ok(Format::Pgm),
        "ppm" => Ok(Format::Ppm),
        "png" => Ok(Format::Png),
        _ => Err(Error::UnsupportedFormat(format!(
            "extension {:?} of {}",
            ext,
            path.display()
        ))),
    }
}

pub fn load_image<T: Scalar>(path: impl AsRef<Path>) -> Result<Image<T>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

/// Decodes by content (magic bytes), not by extension.
pub fn decode<T: Scalar>(bytes: &[u8]) -> Result<Image<T>> {
    if bytes.len() >= 2 && bytes[0] == b'P' && (bytes[1] == b'5' || bytes[1] == b'6') {
        decode_pnm(bytes)
    } else if bytes.starts_with(b"\x89PNG") {
        decode_png(bytes)
    } else if bytes.is_empty() {
        Err(Error::UnexpectedEof)
    } else {
        Err(Error::UnsupportedFormat("unrecognized magic bytes".into()))
    }
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_ws_and_comments(&mut self) {
        while self.pos < self.buf.len() {
            match self.buf[self.pos] {
                b'#' => {
                    while self.pos < self.buf.len() && self.buf[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn header_uint(&mut self) -> Result<usize> {
        self.skip_ws_and_comments();
        let start = self.pos;
        while self.pos < self.buf.len() && self.buf[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return if self.pos >= self.buf.len() {
                Err(Error::UnexpectedEof)
            } else {
                Err(Error::Decode("expected an integer in netpbm header".into()))
            };
        }
        std::str::from_utf8(&self.buf[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Decode("header integer out of range".into()))
    }
}

fn decode_pnm<T: Scalar>(bytes: &[u8]) -> Result<Image<T>> {
    let channels = if bytes[1] == b'5' { 1 } else { 3 };
    let mut cur = Cursor { buf: bytes, pos: 2 };
    let width = cur.header_uint()?;
    let height = cur.header_uint()?;
    let maxval = cur.header_uint()?;
    if width == 0 || height == 0 {
        return Err(Error::Decode("zero-dimension image".into()));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Decode(format!("invalid maxval {maxval}")));
    }
    // exactly one whitespace byte separates the header from the raster
    if cur.pos >= bytes.len() {
        return Err(Error::UnexpectedEof);
    }
    cur.pos += 1;
    let bps = if maxval < 256 { 1 } else { 2 };
    let n = width * height;
    let needed = n * channels * bps;
    let raster = &bytes[cur.pos..];
    if raster.len() < needed {
        return Err(Error::UnexpectedEof);
    }
    let scale = 255.0 / maxval as f64;
    let mut data = vec![T::zero(); n * channels];
    for i in 0..n {
        for c in 0..channels {
            let k = (i * channels + c) * bps;
            let raw = if bps == 1 {
                raster[k] as f64
            } else {
                u16::from_be_bytes([raster[k], raster[k + 1]]) as f64
            };
            data[c * n + i] = T::of((raw * scale).min(255.0));
        }
    }
    Image::new(width, height, channels, data)
}

fn decode_png<T: Scalar>(bytes: &[u8]) -> Result<Image<T>> {
    let dyn_img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png).map_err(|e| match e {
        image::ImageError::IoError(io) if io.kind() == std::io::ErrorKind::UnexpectedEof => Error::UnexpectedEof,
        other => Error::Decode(other.to_string()),
    })?;
    let (w, h) = (dyn_img.width() as usize, dyn_img.height() as usize);
    if w == 0 || h == 0 {
        return Err(Error::Decode("zero-dimension image".into()));
    }
    let n = w * h;
    let is_gray = !dyn_img.color().has_color();
    let sixteen = dyn_img.color().bytes_per_pixel() / dyn_img.color().channel_count() > 1;
    let channels = if is_gray { 1 } else { 3 };
    let mut data = vec![T::zero(); n * channels];
    if sixteen {
        let scale = 255.0 / 65535.0;
        if is_gray {
            for (i, p) in dyn_img.to_luma16().pixels().enumerate() {
                data[i] = T::of(p.0[0] as f64 * scale);
            }
        } else {
            for (i, p) in dyn_img.to_rgb16().pixels().enumerate() {
                for c in 0..3 {
                    data[c * n + i] = T::of(p.0[c] as f64 * scale);
                }
            }
        }
    } else if is_gray {
        for (i, p) in dyn_img.to_luma8().pixels().enumerate() {
            data[i] = T::of(p.0[0] as f64);
        }
    } else {
        for (i, p) in dyn_img.to_rgb8().pixels().enumerate() {
            for c in 0..3 {
                data[c * n + i] = T::of(p.0[c] as f64);
            }
        }
    }
    Image::new(w, h, channels, data)
}

fn to_u8<T: Scalar>(v: T) -> u8 {
    v.f64().clamp(0.0, 255.0).round() as u8
}

/// Interleaved 8-bit samples (gray or RGB).
fn interleaved_u8<T: Scalar>(img: &Image<T>, channels: usize) -> Vec<u8> {
    let n = img.pixels();
    let mut out = Vec::with_capacity(n * channels);
    for i in 0..n {
        for c in 0..channels {
            let src = if img.channels() == 1 { 0 } else { c };
            out.push(to_u8(img.plane(src)[i]));
        }
    }
    out
}

/// Encodes to the byte stream that [`save_image`] would write for `path`.
pub fn encode<T: Scalar>(img: &Image<T>, path: &Path) -> Result<Vec<u8>> {
    match format_of(path)? {
        Format::Pgm => {
            if img.channels() != 1 {
                return Err(Error::invalid("PGM output needs a 1-channel image"));
            }
            Ok(pnm_bytes(b"P5", img, 1))
        }
        Format::Ppm => Ok(pnm_bytes(b"P6", img, 3)),
        Format::Png => {
            let (w, h) = (img.width() as u32, img.height() as u32);
            let dyn_img = if img.channels() == 1 {
                DynamicImage::ImageLuma8(
                    ImageBuffer::<Luma<u8>, _>::from_raw(w, h, interleaved_u8(img, 1))
                        .expect("buffer sized from image"),
                )
            } else {
                DynamicImage::ImageRgb8(
                    ImageBuffer::<Rgb<u8>, _>::from_raw(w, h, interleaved_u8(img, 3))
                        .expect("buffer sized from image"),
                )
            };
            let mut out = std::io::Cursor::new(Vec::new());
            dyn_img
                .write_to(&mut out, image::ImageFormat::Png)
                .map_err(|e| Error::Decode(e.to_string()))?;
            Ok(out.into_inner())
        }
    }
}

fn pnm_bytes<T: Scalar>(magic: &[u8], img: &Image<T>, channels: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(32 + img.pixels() * channels);
    out.extend_from_slice(magic);
    out.extend_from_slice(format!("\n{} {}\n255\n", img.width(), img.height()).as_bytes());
    out.extend(interleaved_u8(img, channels));
    out
}

pub fn save_image<T: Scalar>(img: &Image<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode(img, path)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
