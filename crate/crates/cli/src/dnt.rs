//! `DNT1` dense tensor files.
//!
//! ```text
//! DNT1\n
//! N I_1 … I_N\n
//! ∏I_n little-endian f64 values, last index fastest
//! ```

use std::path::Path;

use smoothntf_core::{DenseTensor, Shape};

use crate::error::{IoError, IoResult};
use crate::fsutil::{read_all, write_atomic};

const MAGIC: &[u8] = b"DNT1\n";

pub fn encode_tensor(x: &DenseTensor) -> Vec<u8> {
    let dims = x.dims();
    let mut header = format!("{}", dims.len());
    for d in dims {
        header.push(' ');
        header.push_str(&d.to_string());
    }
    header.push('\n');
    let mut out = Vec::with_capacity(MAGIC.len() + header.len() + 8 * x.values().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(header.as_bytes());
    for v in x.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Parses a `DNT1` image; `path` only labels errors.
pub fn decode_tensor(bytes: &[u8], path: &Path) -> IoResult<DenseTensor> {
    if !bytes.starts_with(MAGIC) {
        return Err(IoError::format(path, 0, "bad magic, expected DNT1"));
    }
    let start = MAGIC.len();
    let newline = bytes[start..]
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| IoError::format(path, bytes.len(), "unterminated dimension line"))?;
    let line = std::str::from_utf8(&bytes[start..start + newline])
        .map_err(|_| IoError::format(path, start, "dimension line is not ASCII"))?;
    let fields: Vec<usize> = line
        .split_ascii_whitespace()
        .map(str::parse)
        .collect::<Result<_, _>>()
        .map_err(|_| IoError::format(path, start, format!("malformed dimension line {line:?}")))?;
    let Some((&order, dims)) = fields.split_first() else {
        return Err(IoError::format(path, start, "empty dimension line"));
    };
    if order != dims.len() {
        return Err(IoError::format(path, start, format!("order {order} but {} dimensions", dims.len())));
    }
    let shape = Shape::new(dims.to_vec()).map_err(|e| IoError::format(path, start, e.to_string()))?;
    let payload_start = start + newline + 1;
    let expected = shape
        .num_entries()
        .checked_mul(8)
        .ok_or_else(|| IoError::format(path, start, "payload size overflows"))?;
    let payload = &bytes[payload_start..];
    if payload.len() < expected {
        return Err(IoError::format(
            path,
            bytes.len(),
            format!("truncated payload: {} of {expected} bytes", payload.len()),
        ));
    }
    if payload.len() > expected {
        return Err(IoError::format(path, payload_start + expected, "trailing bytes after payload"));
    }
    let mut values = Vec::with_capacity(shape.num_entries());
    for (k, chunk) in payload.chunks_exact(8).enumerate() {
        let v = f64::from_le_bytes(chunk.try_into().expect("8-byte chunk"));
        if !v.is_finite() {
            return Err(IoError::format(path, payload_start + 8 * k, "non-finite value"));
        }
        values.push(v);
    }
    Ok(DenseTensor::new(shape, values)?)
}

pub fn read_tensor(path: &Path) -> IoResult<DenseTensor> {
    decode_tensor(&read_all(path)?, path)
}

pub fn write_tensor(path: &Path, x: &DenseTensor) -> IoResult<()> {
    write_atomic(path, &encode_tensor(x))
}
