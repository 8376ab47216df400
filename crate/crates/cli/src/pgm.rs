//! Greymap (PGM) targets for the image experiment.

use std::path::Path;

use crate::error::{CliError, Result};

/// Pixel values mapped from `[0, maxval]` onto `[−1, 1]`, stored row-major
/// with row 0 at the top of the image.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTarget {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

impl ImageTarget {
    pub fn pixel(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    /// Bilinear interpolation at `(x, y) ∈ [0, 1]²`, with `y = 1` at the top row.
    ///
    /// Pixel `(row, col)` sits at `x = (col + ½)/width`, `y = 1 − (row + ½)/height`.
    /// Points outside the pixel-center lattice take the nearest edge value.
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let locate = |t: f64, len: usize| {
            let s = (t * len as f64 - 0.5).clamp(0.0, (len - 1) as f64);
            let i = (s.floor() as usize).min(len - 2);
            (i, s - i as f64)
        };
        let (c, tx) = locate(x, self.width);
        let (r, ty) = locate(1.0 - y, self.height);
        let top = (1.0 - tx) * self.pixel(r, c) + tx * self.pixel(r, c + 1);
        let bottom = (1.0 - tx) * self.pixel(r + 1, c) + tx * self.pixel(r + 1, c + 1);
        (1.0 - ty) * top + ty * bottom
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&b| b != b'\n') {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> std::result::Result<usize, String> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(if self.pos >= self.bytes.len() {
                format!("truncated data: missing {what}")
            } else {
                format!("expected a number for {what}")
            });
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .unwrap()
            .parse()
            .map_err(|e| format!("bad {what}: {e}"))
    }
}

/// Decodes an ASCII (`P2`) or binary (`P5`) greymap.
pub fn decode_pgm(bytes: &[u8]) -> std::result::Result<ImageTarget, String> {
    let binary = match bytes.get(..2) {
        Some(b"P2") => false,
        Some(b"P5") => true,
        _ => return Err("bad magic, expected P2 or P5".into()),
    };
    let mut reader = Reader { bytes, pos: 2 };
    let width = reader.number("width")?;
    let height = reader.number("height")?;
    let maxval = reader.number("maxval")?;
    if width < 2 || height < 2 {
        return Err(format!("image must be at least 2×2, got {width}×{height}"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(format!("maxval must lie in 1..=65535, got {maxval}"));
    }
    let count = width
        .checked_mul(height)
        .ok_or_else(|| format!("image size {width}×{height} overflows"))?;
    let mut raw = Vec::new();
    if binary {
        if !reader.bytes.get(reader.pos).is_some_and(u8::is_ascii_whitespace) {
            return Err("missing separator before pixel data".into());
        }
        let data = &bytes[reader.pos + 1..];
        let depth = if maxval < 256 { 1 } else { 2 };
        if data.len() / depth < count {
            return Err(format!("truncated data: {} bytes for {count} pixels", data.len()));
        }
        for i in 0..count {
            raw.push(match depth {
                1 => data[i] as usize,
                _ => u16::from_be_bytes([data[2 * i], data[2 * i + 1]]) as usize,
            });
        }
    } else {
        for i in 0..count {
            raw.push(reader.number(&format!("pixel {i}"))?);
        }
    }
    if let Some(v) = raw.iter().find(|&&v| v > maxval) {
        return Err(format!("pixel value {v} exceeds maxval {maxval}"));
    }
    let scale = maxval as f64;
    Ok(ImageTarget {
        width,
        height,
        values: raw.into_iter().map(|v| 2.0 * v as f64 / scale - 1.0).collect(),
    })
}

/// Reads a greymap file and maps it to `[−1, 1]`.
pub fn load_pgm_target(path: &Path) -> Result<ImageTarget> {
    let bytes = std::fs::read(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode_pgm(&bytes).map_err(|reason| CliError::Image {
        path: path.to_path_buf(),
        reason,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn binary(width: usize, height: usize, maxval: usize, pixels: &[u8]) -> Vec<u8> {
        let mut bytes = format!("P5\n{width} {height}\n{maxval}\n").into_bytes();
        bytes.extend_from_slice(pixels);
        bytes
    }

    #[test]
    fn endpoints_map_to_the_wells() {
        let black = decode_pgm(&binary(3, 2, 255, &[0; 6])).unwrap();
        assert!(black.values.iter().all(|&v| v == -1.0));
        let white = decode_pgm(&binary(3, 2, 255, &[255; 6])).unwrap();
        assert!(white.values.iter().all(|&v| v == 1.0));
        assert_eq!(white.sample(0.3, 0.9), 1.0);
    }

    #[test]
    fn checkerboard_survives_sampling_at_pixel_centers() {
        let image = decode_pgm(b"P2\n# checkerboard\n2 2\n1\n1 0\n0 1\n").unwrap();
        assert_eq!(image.sample(0.25, 0.75), 1.0);
        assert_eq!(image.sample(0.75, 0.75), -1.0);
        assert_eq!(image.sample(0.25, 0.25), -1.0);
        assert_eq!(image.sample(0.75, 0.25), 1.0);
        assert_eq!(image.sample(0.5, 0.5), 0.0);
        assert_eq!(image.sample(0.0, 1.0), 1.0);
    }

    #[test]
    fn sixteen_bit_binary() {
        let image = decode_pgm(&binary(2, 2, 1000, &[0, 0, 3, 232, 1, 244, 0, 0])).unwrap();
        assert_eq!(image.values, vec![-1.0, 1.0, 0.0, -1.0]);
    }

    #[test]
    fn malformed_files_are_rejected() {
        let cases: [(&[u8], &str); 6] = [
            (b"P6\n2 2\n255\n", "magic"),
            (b"P2\n2 2\n0\n0 0 0 0\n", "maxval"),
            (b"P2\n2 2\n255\n1 2 3\n", "truncated"),
            (b"P2\n1 4\n255\n1 2 3 4\n", "2×2"),
            (b"P2\n2 2\n3\n1 2 3 4\n", "exceeds"),
            (b"P5\n2 2\n255\n\x00\x01", "truncated"),
        ];
        for (bytes, needle) in cases {
            let err = decode_pgm(bytes).unwrap_err();
            assert!(err.contains(needle), "{err} should mention {needle}");
        }
    }

    proptest! {
        #[test]
        fn samples_stay_within_the_pixel_range(
            pixels in proptest::collection::vec(0u8..=255, 12),
            x in 0.0f64..=1.0,
            y in 0.0f64..=1.0,
        ) {
            let image = decode_pgm(&binary(4, 3, 255, &pixels)).unwrap();
            let lo = image.values.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = image.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let v = image.sample(x, y);
            prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
        }

        #[test]
        fn decoding_arbitrary_bytes_never_panics(bytes in proptest::collection::vec(any::<u8>(), 0..64)) {
            let _ = decode_pgm(&bytes);
        }
    }
}
