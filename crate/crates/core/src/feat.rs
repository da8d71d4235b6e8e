//! The `FEAT` matrix container: magic `FEAT`, u32 rows, u32 cols, then
//! row-major f32 little-endian values.
//!
//! Used for backbone features, content frames, k-means centroids and
//! assembled vocoder inputs.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"FEAT";

pub fn write_feat<W: Write>(mut w: W, m: &Array2<f64>) -> Result<()> {
    let (rows, cols) = m.dim();
    let rows = u32::try_from(rows).map_err(|_| Error::Format("too many rows".into()))?;
    let cols = u32::try_from(cols).map_err(|_| Error::Format("too many columns".into()))?;
    let mut buf = Vec::with_capacity(12 + m.len() * 4);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&rows.to_le_bytes());
    buf.extend_from_slice(&cols.to_le_bytes());
    for &v in m.iter() {
        if !v.is_finite() {
            return Err(Error::NonFinite("feature matrix"));
        }
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_feat<R: Read>(mut r: R) -> Result<Array2<f64>> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    decode_feat(&bytes)
}

pub fn decode_feat(bytes: &[u8]) -> Result<Array2<f64>> {
    if bytes.len() < 12 || &bytes[..4] != MAGIC {
        return Err(Error::Format("missing FEAT magic".into()));
    }
    let rows = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| n.checked_add(12))
        .ok_or_else(|| Error::Format("FEAT header overflows".into()))?;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "FEAT body is {} bytes, header implies {}",
            bytes.len(),
            expected
        )));
    }
    let data: Vec<f64> = bytes[12..]
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
        .collect();
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("FEAT body"));
    }
    Array2::from_shape_vec((rows, cols), data).map_err(|e| Error::Format(e.to_string()))
}

pub fn load_feat(path: impl AsRef<Path>) -> Result<Array2<f64>> {
    decode_feat(&fs::read(path)?)
}

pub fn save_feat(path: impl AsRef<Path>, m: &Array2<f64>) -> Result<()> {
    let mut buf = Vec::new();
    write_feat(&mut buf, m)?;
    fs::write(path, buf)?;
    Ok(())
}
