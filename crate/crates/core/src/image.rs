//! In-memory image type plus binary Netpbm (PGM/PPM) reading and
//! writing. Pixels are stored row-major as f64 in [0, 1]; files use
//! maxval 255, mapping byte v to v/255 and back with round-half-up.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: u32,
    pub height: u32,
    /// 1 (grayscale) or 3 (RGB).
    pub channels: u32,
    pub pixels: Vec<f64>,
}

impl Image {
    pub fn new(width: u32, height: u32, channels: u32, pixels: Vec<f64>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::DimensionMismatch {
                expected: "1 or 3 channels".into(),
                actual: format!("{channels} channels"),
            });
        }
        let expected = width as usize * height as usize * channels as usize;
        if pixels.len() != expected {
            return Err(Error::DimensionMismatch {
                expected: format!("{expected} pixel values"),
                actual: format!("{}", pixels.len()),
            });
        }
        if pixels.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::DimensionMismatch {
                expected: "pixel values in [0, 1]".into(),
                actual: "out-of-range value".into(),
            });
        }
        Ok(Image { width, height, channels, pixels })
    }

    pub fn constant(width: u32, height: u32, channels: u32, value: f64) -> Result<Self> {
        Image::new(
            width,
            height,
            channels,
            vec![value; width as usize * height as usize * channels as usize],
        )
    }

    #[inline]
    pub fn index(&self, x: u32, y: u32, c: u32) -> usize {
        ((y as usize * self.width as usize) + x as usize) * self.channels as usize + c as usize
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32, c: u32) -> f64 {
        self.pixels[self.index(x, y, c)]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, c: u32, value: f64) {
        let i = self.index(x, y, c);
        self.pixels[i] = value;
    }

    /// Copies the rectangle with top-left (x, y) into a new image.
    pub fn crop(&self, x: u32, y: u32, w: u32, h: u32) -> Result<Image> {
        if x + w > self.width || y + h > self.height {
            return Err(Error::PlacementOutOfBounds { x, y, w, h });
        }
        let mut pixels = Vec::with_capacity(w as usize * h as usize * self.channels as usize);
        for yy in y..y + h {
            for xx in x..x + w {
                for c in 0..self.channels {
                    pixels.push(self.get(xx, yy, c));
                }
            }
        }
        Image::new(w, h, self.channels, pixels)
    }
}

fn quantize(v: f64) -> u8 {
    // Round half up after clamping to [0, 1].
    let clamped = v.clamp(0.0, 1.0);
    let scaled = clamped * 255.0 + 0.5;
    (scaled.floor() as u32).min(255) as u8
}

/// Serializes to binary PGM (P5, single channel) or PPM (P6, three
/// channels) with maxval 255.
pub fn encode_netpbm(image: &Image) -> Vec<u8> {
    let magic = if image.channels == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{} {}\n255\n", image.width, image.height).into_bytes();
    out.extend(image.pixels.iter().map(|&v| quantize(v)));
    out
}

pub fn write_netpbm(path: impl AsRef<Path>, image: &Image) -> Result<()> {
    let bytes = encode_netpbm(image);
    let path = path.as_ref();
    // Atomic write: temp file in the destination directory, then rename.
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let tmp = dir.join(format!(
        ".{}.tmp",
        path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "image".into())
    ));
    let mut file = fs::File::create(&tmp)?;
    file.write_all(&bytes)?;
    file.sync_all()?;
    drop(file);
    fs::rename(&tmp, path)?;
    Ok(())
}

struct Scanner<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Scanner<'a> {
    fn skip_whitespace_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b' ' | b'\t' | b'\r' | b'\n' => self.pos += 1,
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                _ => break,
            }
        }
    }

    fn token(&mut self) -> Option<&'a [u8]> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        (self.pos > start).then(|| &self.bytes[start..self.pos])
    }

    fn number(&mut self, path: &str, what: &str) -> Result<u32> {
        let tok = self.token().ok_or_else(|| Error::Parse {
            path: path.into(),
            message: format!("missing {what}"),
        })?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Parse { path: path.into(), message: format!("invalid {what}") })
    }
}

pub fn decode_netpbm(bytes: &[u8], path: &str) -> Result<Image> {
    let mut scanner = Scanner { bytes, pos: 0 };
    let magic = scanner.token().ok_or_else(|| Error::Parse {
        path: path.into(),
        message: "empty file".into(),
    })?;
    let channels = match magic {
        b"P5" => 1u32,
        b"P6" => 3u32,
        other => {
            return Err(Error::Parse {
                path: path.into(),
                message: format!("unsupported magic {:?}", String::from_utf8_lossy(other)),
            })
        }
    };
    let width = scanner.number(path, "width")?;
    let height = scanner.number(path, "height")?;
    let maxval = scanner.number(path, "maxval")?;
    if maxval != 255 {
        return Err(Error::Parse {
            path: path.into(),
            message: format!("maxval must be 255, got {maxval}"),
        });
    }
    // Exactly one whitespace byte separates the header from the raster.
    if scanner.pos >= bytes.len() || !bytes[scanner.pos].is_ascii_whitespace() {
        return Err(Error::Parse { path: path.into(), message: "missing raster separator".into() });
    }
    scanner.pos += 1;
    let expected = width as usize * height as usize * channels as usize;
    let raster = &bytes[scanner.pos..];
    if raster.len() < expected {
        return Err(Error::Parse {
            path: path.into(),
            message: format!("raster truncated: expected {expected} bytes, got {}", raster.len()),
        });
    }
    let pixels = raster[..expected].iter().map(|&b| b as f64 / 255.0).collect();
    Image::new(width, height, channels, pixels)
}

pub fn read_netpbm(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let bytes = fs::read(path)
        .map_err(|e| Error::FileNotFound { path: path.display().to_string(), source: e })?;
    decode_netpbm(&bytes, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn byte_values_round_trip_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pixels: Vec<f64> =
            (0..4 * 3 * 3).map(|_| rng.random_range(0u32..=255) as f64 / 255.0).collect();
        let image = Image::new(4, 3, 3, pixels).unwrap();
        let decoded = decode_netpbm(&encode_netpbm(&image), "mem").unwrap();
        assert_eq!(decoded, image);
    }

    #[test]
    fn quantization_error_is_at_most_one_level() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let pixels: Vec<f64> = (0..16 * 16).map(|_| rng.random::<f64>()).collect();
        let image = Image::new(16, 16, 1, pixels.clone()).unwrap();
        let decoded = decode_netpbm(&encode_netpbm(&image), "mem").unwrap();
        for (a, b) in pixels.iter().zip(&decoded.pixels) {
            assert!((a - b).abs() * 255.0 <= 1.0, "{a} vs {b}");
        }
    }

    #[test]
    fn parses_comments_in_header() {
        let mut bytes = b"P5\n# a comment\n2 2\n# another\n255\n".to_vec();
        bytes.extend([0u8, 128, 255, 64]);
        let image = decode_netpbm(&bytes, "mem").unwrap();
        assert_eq!(image.width, 2);
        assert_eq!(image.get(1, 0, 0), 128.0 / 255.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(decode_netpbm(b"P4\n1 1\n255\n\x00", "m"), Err(Error::Parse { .. })));
        assert!(matches!(
            decode_netpbm(b"P5\n2 2\n65535\n\x00\x00\x00\x00", "m"),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(decode_netpbm(b"P5\n2 2\n255\n\x00\x00", "m"), Err(Error::Parse { .. })));
        assert!(Image::new(2, 2, 2, vec![0.0; 8]).is_err());
        assert!(Image::new(2, 2, 1, vec![0.0; 3]).is_err());
        assert!(Image::new(1, 1, 1, vec![1.5]).is_err());
    }

    #[test]
    fn crop_extracts_rectangle() {
        let image = Image::new(
            3,
            2,
            1,
            vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5],
        )
        .unwrap();
        let c = image.crop(1, 0, 2, 2).unwrap();
        assert_eq!(c.pixels, vec![0.1, 0.2, 0.4, 0.5]);
        assert!(image.crop(2, 0, 2, 2).is_err());
    }
}
