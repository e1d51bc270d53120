//! Binary PGM (P5) frames and the PSNR metric.

use std::fs;
use std::path::Path;

use crate::error::{HarnessError, TensorError};
use crate::tensor::Tensor3;

/// A grayscale frame, row-major `height x width`.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    pub height: usize,
    pub width: usize,
    pub pixels: Vec<f64>,
}

/// Peak signal-to-noise ratio `10 log10(peak^2 / MSE)` in dB.
///
/// Identical inputs return `f64::INFINITY`.
pub fn psnr(reference: &Tensor3, test: &Tensor3, peak: f64) -> Result<f64, HarnessError> {
    reference.require_same_dims(test, "psnr")?;
    if !(peak > 0.0) {
        return Err(HarnessError::Invalid(format!("psnr peak {peak} must be positive")));
    }
    let mse = reference.sub(test)?.frob_norm_sq() / reference.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

/// Lateral slice `j` of an `l x p x n` stack as an `l x n` image.
pub fn stack_frame(stack: &Tensor3, j: usize) -> Result<Frame, TensorError> {
    let (l, p, n) = stack.dims();
    if j >= p {
        return Err(TensorError::IndexOutOfRange {
            index: (0, j, 0),
            dims: stack.dims(),
        });
    }
    let mut pixels = Vec::with_capacity(l * n);
    for i in 0..l {
        pixels.extend_from_slice(stack.tube(i, j));
    }
    Ok(Frame {
        height: l,
        width: n,
        pixels,
    })
}

/// Stacks equally sized frames along the second mode.
pub fn frames_to_stack(frames: &[Frame]) -> Result<Tensor3, HarnessError> {
    let first = frames.first().ok_or_else(|| HarnessError::Invalid("no frames".into()))?;
    let (l, n) = (first.height, first.width);
    if frames.iter().any(|f| f.height != l || f.width != n) {
        return Err(HarnessError::Invalid("frames differ in size".into()));
    }
    Ok(Tensor3::from_fn(l, frames.len(), n, |i, j, k| frames[j].pixels[i * n + k]))
}

/// Writes a P5 image; values are rounded and clamped to `[0, 255]`.
pub fn write_pgm(path: impl AsRef<Path>, frame: &Frame) -> Result<(), HarnessError> {
    let path = path.as_ref();
    let mut out = format!("P5\n{} {}\n255\n", frame.width, frame.height).into_bytes();
    out.extend(frame.pixels.iter().map(|&v| v.round().clamp(0.0, 255.0) as u8));
    fs::write(path, out).map_err(|e| HarnessError::io(path, e))
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<Frame, HarnessError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| HarnessError::io(path, e))?;
    parse_pgm(&bytes, path)
}

pub fn parse_pgm(bytes: &[u8], path: &Path) -> Result<Frame, HarnessError> {
    let bad = |reason: &str| HarnessError::Image {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    let mut pos = 0;
    let mut tokens = Vec::with_capacity(4);
    while tokens.len() < 4 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        tokens.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("non-ASCII header"))?);
    }
    if tokens[0] != "P5" {
        return Err(bad("not a binary PGM (P5)"));
    }
    let num = |s: &str| s.parse::<usize>().map_err(|_| bad("bad header number"));
    let (width, height, maxval) = (num(tokens[1])?, num(tokens[2])?, num(tokens[3])?);
    if width == 0 || height == 0 {
        return Err(bad("zero image size"));
    }
    if maxval == 0 || maxval > 255 {
        return Err(bad("only 8-bit PGM is supported"));
    }
    // Exactly one whitespace byte separates the header from the raster.
    pos += 1;
    let raster = bytes.get(pos..).unwrap_or(&[]);
    if raster.len() != width * height {
        return Err(bad("raster size does not match header"));
    }
    Ok(Frame {
        height,
        width,
        pixels: raster.iter().map(|&b| f64::from(b)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psnr_cases() {
        let a = Tensor3::filled(4, 2, 3, 10.0);
        assert_eq!(psnr(&a, &a, 255.0).unwrap(), f64::INFINITY);
        let b = a.map(|v| v + 1.0);
        let expect = 10.0 * (255.0f64 * 255.0).log10();
        assert!((psnr(&a, &b, 255.0).unwrap() - expect).abs() < 1e-12);
        assert!((expect - 48.13).abs() < 0.01);
        assert!(psnr(&a, &Tensor3::zeros(4, 2, 2), 255.0).is_err());
        assert!(psnr(&a, &b, 0.0).is_err());
    }

    #[test]
    fn pgm_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.pgm");
        let frame = Frame {
            height: 2,
            width: 3,
            pixels: vec![0.0, 1.0, 254.6, 300.0, -4.0, 128.0],
        };
        write_pgm(&path, &frame).unwrap();
        let back = read_pgm(&path).unwrap();
        assert_eq!(back.pixels, vec![0.0, 1.0, 255.0, 255.0, 0.0, 128.0]);
        assert_eq!((back.height, back.width), (2, 3));
    }

    #[test]
    fn pgm_header_comments_and_errors() {
        let p = Path::new("x.pgm");
        let mut ok = b"P5 # comment\n2 1\n255\n".to_vec();
        ok.extend([7u8, 9]);
        assert_eq!(parse_pgm(&ok, p).unwrap().pixels, vec![7.0, 9.0]);
        assert!(parse_pgm(b"P2\n1 1\n255\n0", p).is_err());
        assert!(parse_pgm(b"P5\n2 2\n255\n\x01", p).is_err());
        assert!(parse_pgm(b"P5\n1 1\n65535\n\x00\x00", p).is_err());
    }

    #[test]
    fn frames_and_stacks() {
        let stack = Tensor3::from_fn(3, 2, 4, |i, j, k| (100 * j + 10 * i + k) as f64);
        let frames: Vec<Frame> = (0..2).map(|j| stack_frame(&stack, j).unwrap()).collect();
        assert_eq!(frames[1].pixels[4 + 2], 112.0);
        assert_eq!(frames_to_stack(&frames).unwrap(), stack);
        assert!(stack_frame(&stack, 2).is_err());
    }
}
