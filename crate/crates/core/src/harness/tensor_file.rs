//! Binary tensor files: `T3D1`, then `m, l, n` as little-endian `u64`, then
//! `m * l * n` little-endian `f64` values in the crate's linear layout.

use std::fs;
use std::path::Path;

use crate::error::HarnessError;
use crate::tensor::Tensor3;

pub const MAGIC: &[u8; 4] = b"T3D1";
const HEADER_LEN: usize = 4 + 3 * 8;

pub fn encode_tensor(t: &Tensor3) -> Vec<u8> {
    let (m, l, n) = t.dims();
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * t.len());
    out.extend_from_slice(MAGIC);
    for d in [m, l, n] {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for v in t.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_tensor(bytes: &[u8], path: &Path) -> Result<Tensor3, HarnessError> {
    let bad = |reason: String| HarnessError::TensorFile {
        path: path.to_path_buf(),
        reason,
    };
    if bytes.len() < HEADER_LEN {
        return Err(bad(format!("{} bytes is shorter than the header", bytes.len())));
    }
    if &bytes[..4] != MAGIC {
        return Err(bad("missing T3D1 magic".into()));
    }
    let dim = |i: usize| {
        let raw: [u8; 8] = bytes[4 + 8 * i..12 + 8 * i].try_into().expect("8 bytes");
        u64::from_le_bytes(raw)
    };
    let (m, l, n) = (dim(0), dim(1), dim(2));
    let count = m
        .checked_mul(l)
        .and_then(|v| v.checked_mul(n))
        .and_then(|v| usize::try_from(v).ok())
        .ok_or_else(|| bad(format!("dims {m}x{l}x{n} overflow")))?;
    let payload = &bytes[HEADER_LEN..];
    if Some(payload.len()) != count.checked_mul(8) {
        return Err(bad(format!(
            "payload has {} bytes, dims {m}x{l}x{n} need {}",
            payload.len(),
            count.saturating_mul(8)
        )));
    }
    let data = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Tensor3::from_vec(m as usize, l as usize, n as usize, data).map_err(|e| bad(e.to_string()))
}

pub fn write_tensor(path: impl AsRef<Path>, t: &Tensor3) -> Result<(), HarnessError> {
    let path = path.as_ref();
    fs::write(path, encode_tensor(t)).map_err(|e| HarnessError::io(path, e))
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<Tensor3, HarnessError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| HarnessError::io(path, e))?;
    decode_tensor(&bytes, path)
}
