//! PFM / PGM / PPM codecs.
//!
//! Depth and other real-valued fields are stored as grayscale `Pf` PFM with
//! a negative scale (little-endian `f32`), scanlines bottom to top. Masks and
//! visualizations use binary 8-bit PGM (`P5`), RGB images binary PPM (`P6`).

use std::fs;
use std::io;
use std::path::Path;

use crate::depth::{BitMask, DepthMap, Grid, RgbImage};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderReader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Result<&'a str> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::MalformedHeader("unexpected end of header".into()));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .map_err(|_| Error::MalformedHeader("non-ascii header token".into()))
    }

    fn number<N: std::str::FromStr>(&mut self, what: &str) -> Result<N> {
        let tok = self.token()?;
        tok.parse()
            .map_err(|_| Error::MalformedHeader(format!("bad {what}: {tok:?}")))
    }

    /// Consumes the single whitespace byte separating header from payload.
    fn payload(mut self) -> Result<&'a [u8]> {
        match self.bytes.get(self.pos) {
            Some(b) if b.is_ascii_whitespace() => {
                self.pos += 1;
                Ok(&self.bytes[self.pos..])
            }
            _ => Err(Error::MalformedHeader("missing header terminator".into())),
        }
    }
}

fn check_payload(payload: &[u8], expected: usize, dims: (usize, usize)) -> Result<()> {
    if payload.len() < expected {
        return Err(Error::Io(io::Error::new(
            io::ErrorKind::UnexpectedEof,
            format!("payload has {} bytes, expected {expected}", payload.len()),
        )));
    }
    if payload.len() > expected {
        let extra_rows = (payload.len() - expected) / (expected / dims.0.max(1)).max(1);
        return Err(Error::dims(dims, (dims.0 + extra_rows, dims.1)));
    }
    Ok(())
}

fn positive_dims(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::MalformedHeader(format!(
            "zero-sized image {width}x{height}"
        )));
    }
    Ok(())
}

pub fn encode_pfm<T: Scalar>(grid: &Grid<T>) -> Vec<u8> {
    let (h, w) = grid.dims();
    let mut out = format!("Pf\n{w} {h}\n-1.0\n").into_bytes();
    out.reserve(h * w * 4);
    for r in (0..h).rev() {
        for c in 0..w {
            let v = grid.get(r, c).to_f32().unwrap_or(f32::NAN);
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode_pfm<T: Scalar>(bytes: &[u8]) -> Result<Grid<T>> {
    let mut hdr = HeaderReader::new(bytes);
    match hdr.token()? {
        "Pf" => {}
        "PF" => {
            return Err(Error::MalformedHeader(
                "color PFM (PF) is not a depth map".into(),
            ))
        }
        other => return Err(Error::MalformedHeader(format!("bad magic {other:?}"))),
    }
    let width: usize = hdr.number("width")?;
    let height: usize = hdr.number("height")?;
    let scale: f32 = hdr.number("scale")?;
    positive_dims(width, height)?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::MalformedHeader(format!("bad scale {scale}")));
    }
    let little = scale < 0.0;
    let payload = hdr.payload()?;
    check_payload(payload, width * height * 4, (height, width))?;
    let mut data = vec![T::zero(); width * height];
    for (i, chunk) in payload.chunks_exact(4).enumerate() {
        let raw = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little {
            f32::from_le_bytes(raw)
        } else {
            f32::from_be_bytes(raw)
        };
        let (r_file, c) = (i / width, i % width);
        let r = height - 1 - r_file;
        data[r * width + c] = T::from_f32(v).unwrap_or(T::nan());
    }
    Grid::from_vec(height, width, data)
}

pub fn write_pfm<T: Scalar>(grid: &Grid<T>, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_pfm(grid))?;
    Ok(())
}

/// Reads any grayscale PFM as a real-valued grid.
pub fn read_pfm_grid<T: Scalar>(path: impl AsRef<Path>) -> Result<Grid<T>> {
    decode_pfm(&fs::read(path)?)
}

/// Reads a grayscale PFM holding depth (finite, non-negative).
pub fn read_pfm<T: Scalar>(path: impl AsRef<Path>) -> Result<DepthMap<T>> {
    DepthMap::new(read_pfm_grid(path)?)
}

pub fn encode_pgm(grid: &Grid<u8>) -> Vec<u8> {
    let (h, w) = grid.dims();
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    out.extend_from_slice(grid.data());
    out
}

pub fn decode_pgm(bytes: &[u8]) -> Result<Grid<u8>> {
    let mut hdr = HeaderReader::new(bytes);
    let magic = hdr.token()?;
    if magic != "P5" {
        return Err(Error::MalformedHeader(format!("bad magic {magic:?}")));
    }
    let width: usize = hdr.number("width")?;
    let height: usize = hdr.number("height")?;
    let maxval: u32 = hdr.number("maxval")?;
    positive_dims(width, height)?;
    if maxval == 0 || maxval > 255 {
        return Err(Error::MalformedHeader(format!(
            "only 8-bit PGM is supported, maxval {maxval}"
        )));
    }
    let payload = hdr.payload()?;
    check_payload(payload, width * height, (height, width))?;
    Grid::from_vec(height, width, payload.to_vec())
}

pub fn write_pgm(grid: &Grid<u8>, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_pgm(grid))?;
    Ok(())
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<Grid<u8>> {
    decode_pgm(&fs::read(path)?)
}

pub fn write_mask_pgm(mask: &BitMask, path: impl AsRef<Path>) -> Result<()> {
    write_pgm(&mask.map(|b| if b { 255 } else { 0 }), path)
}

/// Reads a PGM mask; any nonzero byte is a set pixel.
pub fn read_mask_pgm(path: impl AsRef<Path>) -> Result<BitMask> {
    Ok(read_pgm(path)?.map(|v| v != 0))
}

pub fn encode_ppm<T: Scalar>(image: &RgbImage<T>) -> Vec<u8> {
    let (h, w) = image.dims();
    let mut out = format!("P6\n{w} {h}\n255\n").into_bytes();
    for px in image.grid().data() {
        for &ch in px {
            let v = (ch.as_f64() * 255.0).round().clamp(0.0, 255.0) as u8;
            out.push(v);
        }
    }
    out
}

pub fn decode_ppm<T: Scalar>(bytes: &[u8]) -> Result<RgbImage<T>> {
    let mut hdr = HeaderReader::new(bytes);
    let magic = hdr.token()?;
    if magic != "P6" {
        return Err(Error::MalformedHeader(format!("bad magic {magic:?}")));
    }
    let width: usize = hdr.number("width")?;
    let height: usize = hdr.number("height")?;
    let maxval: u32 = hdr.number("maxval")?;
    positive_dims(width, height)?;
    if maxval == 0 || maxval > 255 {
        return Err(Error::MalformedHeader(format!(
            "only 8-bit PPM is supported, maxval {maxval}"
        )));
    }
    let payload = hdr.payload()?;
    check_payload(payload, width * height * 3, (height, width))?;
    let denom = T::lit(maxval as f64);
    let data = payload
        .chunks_exact(3)
        .map(|px| {
            [0, 1, 2].map(|k| (T::lit(px[k] as f64) / denom).min(T::one()))
        })
        .collect();
    RgbImage::new(Grid::from_vec(height, width, data)?)
}

pub fn write_ppm<T: Scalar>(image: &RgbImage<T>, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_ppm(image))?;
    Ok(())
}

pub fn read_ppm<T: Scalar>(path: impl AsRef<Path>) -> Result<RgbImage<T>> {
    decode_ppm(&fs::read(path)?)
}

/// Maps a real field to 8-bit gray: `range` (or the field's own finite
/// min/max) is stretched linearly to `[0, 255]`, then raised to `1/gamma`.
pub fn to_gray8<T: Scalar>(grid: &Grid<T>, range: Option<(f64, f64)>, gamma: f64) -> Grid<u8> {
    let (lo, hi) = range.unwrap_or_else(|| {
        grid.data()
            .iter()
            .map(|v| v.as_f64())
            .filter(|v| v.is_finite())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            })
    });
    let span = hi - lo;
    let inv_gamma = if gamma > 0.0 { 1.0 / gamma } else { 1.0 };
    grid.map(|v| {
        let v = v.as_f64();
        if !v.is_finite() || !(span > 0.0) {
            return 0;
        }
        let t = ((v - lo) / span).clamp(0.0, 1.0).powf(inv_gamma);
        (t * 255.0).round() as u8
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_pixel_pfm_layout() {
        let g = Grid::from_vec(1, 1, vec![3.5f32]).unwrap();
        let bytes = encode_pfm(&g);
        let header = b"Pf\n1 1\n-1.0\n";
        assert_eq!(&bytes[..header.len()], header);
        assert_eq!(bytes.len(), header.len() + 4);
        assert_eq!(&bytes[header.len()..], &3.5f32.to_le_bytes());
        assert_eq!(decode_pfm::<f32>(&bytes).unwrap(), g);
    }

    #[test]
    fn pfm_rows_are_bottom_to_top() {
        let g = Grid::from_vec(2, 1, vec![1.0f32, 2.0]).unwrap();
        let bytes = encode_pfm(&g);
        let n = bytes.len();
        assert_eq!(&bytes[n - 8..n - 4], &2.0f32.to_le_bytes());
        assert_eq!(&bytes[n - 4..], &1.0f32.to_le_bytes());
    }

    #[test]
    fn big_endian_pfm_is_accepted() {
        let mut bytes = b"Pf\n2 1\n1.0\n".to_vec();
        bytes.extend_from_slice(&1.25f32.to_be_bytes());
        bytes.extend_from_slice(&7.0f32.to_be_bytes());
        let g = decode_pfm::<f64>(&bytes).unwrap();
        assert_eq!(g.data(), &[1.25, 7.0]);
    }

    #[test]
    fn truncated_and_malformed_pfm() {
        let g = Grid::from_vec(2, 2, vec![1.0f32, 2.0, 3.0, 4.0]).unwrap();
        let bytes = encode_pfm(&g);
        assert!(matches!(
            decode_pfm::<f32>(&bytes[..bytes.len() - 3]),
            Err(Error::Io(_))
        ));
        assert!(matches!(
            decode_pfm::<f32>(&bytes[..5]),
            Err(Error::MalformedHeader(_) | Error::Io(_))
        ));
        assert!(matches!(
            decode_pfm::<f32>(b"P6\n1 1\n255\n"),
            Err(Error::MalformedHeader(_))
        ));
        let mut long = bytes.clone();
        long.extend_from_slice(&[0; 8]);
        assert!(matches!(
            decode_pfm::<f32>(&long),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn pgm_and_ppm_round_trip() {
        let g = Grid::from_vec(2, 3, vec![0u8, 1, 2, 3, 254, 255]).unwrap();
        assert_eq!(decode_pgm(&encode_pgm(&g)).unwrap(), g);
        let img = RgbImage::new(
            Grid::from_vec(1, 2, vec![[0.0, 1.0, 128.0 / 255.0], [1.0, 0.0, 0.0]]).unwrap(),
        )
        .unwrap();
        let back: RgbImage<f64> = decode_ppm(&encode_ppm(&img)).unwrap();
        assert_eq!(back, img);
    }

    #[test]
    fn pgm_with_comment() {
        let mut bytes = b"P5\n# made by hand\n2 1\n255\n".to_vec();
        bytes.extend_from_slice(&[9, 10]);
        assert_eq!(decode_pgm(&bytes).unwrap().data(), &[9, 10]);
    }

    #[test]
    fn gray_mapping() {
        let g = Grid::from_vec(1, 3, vec![0.0, 0.5, 1.0]).unwrap();
        assert_eq!(to_gray8(&g, None, 1.0).data(), &[0, 128, 255]);
        assert_eq!(to_gray8(&g, Some((0.0, 0.5)), 1.0).data(), &[0, 255, 255]);
        let flat = Grid::filled(1, 2, 3.0);
        assert_eq!(to_gray8(&flat, None, 1.0).data(), &[0, 0]);
    }
}
