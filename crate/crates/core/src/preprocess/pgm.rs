//! Binary 16-bit PGM (`P5`, maxval 4095) for 12-bit slices.

use std::path::Path;

use crate::error::{Error, Result};

use super::slices::SliceImage;
use super::window::MAX_12BIT;

/// Encode as `P5\n<w> <h>\n4095\n` followed by big-endian samples.
pub fn encode_pgm(width: usize, height: usize, pixels: &[u16]) -> Result<Vec<u8>> {
    if pixels.len() != width * height {
        return Err(Error::Image(format!(
            "{} pixels for a {width}x{height} image",
            pixels.len()
        )));
    }
    if let Some(p) = pixels.iter().find(|&&p| p > MAX_12BIT) {
        return Err(Error::Image(format!("sample {p} exceeds 12 bits")));
    }
    let mut out = format!("P5\n{width} {height}\n{MAX_12BIT}\n").into_bytes();
    out.reserve(2 * pixels.len());
    for p in pixels {
        out.extend_from_slice(&p.to_be_bytes());
    }
    Ok(out)
}

/// A decoded grayscale image.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    pub pixels: Vec<u16>,
}

/// Decode a binary `P5` image (8-bit or 16-bit samples).
pub fn decode_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let bad = |m: &str| Error::Image(m.to_string());
    let mut pos = 0usize;
    let mut token = || -> Result<String> {
        // whitespace and `#` comments between header tokens
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(_) => break,
                None => return Err(bad("truncated PGM header")),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|b| !b.is_ascii_whitespace()) {
            pos += 1;
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    if token()? != "P5" {
        return Err(bad("not a binary PGM (P5)"));
    }
    let num = |s: String| s.parse::<usize>().map_err(|_| bad("bad PGM header number"));
    let width = num(token()?)?;
    let height = num(token()?)?;
    let maxval = num(token()?)?;
    if maxval == 0 || maxval > u16::MAX as usize {
        return Err(bad("PGM maxval out of range"));
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let wide = maxval > 255;
    let sample_bytes = if wide { 2 } else { 1 };
    let raster = bytes.get(pos..).unwrap_or(&[]);
    if raster.len() != width * height * sample_bytes {
        return Err(Error::Image(format!(
            "PGM raster has {} bytes, expected {}",
            raster.len(),
            width * height * sample_bytes
        )));
    }
    let pixels = if wide {
        raster
            .chunks_exact(2)
            .map(|b| u16::from_be_bytes([b[0], b[1]]))
            .collect()
    } else {
        raster.iter().map(|&b| b as u16).collect()
    };
    Ok(GrayImage {
        width,
        height,
        maxval: maxval as u16,
        pixels,
    })
}

pub fn write_slice_pgm(slice: &SliceImage, path: &Path) -> Result<()> {
    let bytes = encode_pgm(slice.width, slice.height, &slice.pixels)?;
    std::fs::write(path, bytes).map_err(|e| Error::from(e).in_file(path))
}

pub fn read_pgm(path: &Path) -> Result<GrayImage> {
    let bytes = std::fs::read(path).map_err(|e| Error::from(e).in_file(path))?;
    decode_pgm(&bytes).map_err(|e| e.in_file(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_max_pixel() {
        let b = encode_pgm(1, 1, &[4095]).unwrap();
        assert_eq!(b, b"P5\n1 1\n4095\n\x0f\xff");
    }

    #[test]
    fn round_trip() {
        let px: Vec<u16> = (0..12).map(|i| i * 341).collect();
        let b = encode_pgm(4, 3, &px).unwrap();
        let img = decode_pgm(&b).unwrap();
        assert_eq!((img.width, img.height, img.maxval), (4, 3, 4095));
        assert_eq!(img.pixels, px);
        assert_eq!(encode_pgm(img.width, img.height, &img.pixels).unwrap(), b);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(encode_pgm(1, 1, &[4096]).is_err());
        assert!(encode_pgm(2, 1, &[1]).is_err());
        assert!(decode_pgm(b"P2\n1 1\n255\n0").is_err());
        assert!(decode_pgm(b"P5\n2 2\n4095\n\x00\x01").is_err());
    }

    #[test]
    fn header_comments_and_8bit() {
        let img = decode_pgm(b"P5\n# made by hand\n2 1\n255\n\x07\x09").unwrap();
        assert_eq!(img.pixels, vec![7, 9]);
    }
}
