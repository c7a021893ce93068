//! Binary PPM (`P6`) and PGM (`P5`) images with maxval 255.
//!
//! Images map to channel-last tensors: `H×W×3` for PPM, `H×W` for PGM.

use std::path::Path;

use smoothntf_core::{DenseTensor, Shape};

use crate::error::{IoError, IoResult};
use crate::fsutil::{read_all, write_atomic};

struct Header {
    width: usize,
    height: usize,
    data_start: usize,
}

fn parse_header(bytes: &[u8], magic: &[u8; 2], path: &Path) -> IoResult<Header> {
    if bytes.len() < 2 || &bytes[..2] != magic {
        let found = String::from_utf8_lossy(&bytes[..bytes.len().min(2)]).into_owned();
        return Err(IoError::format(
            path,
            0,
            format!("unsupported format {found:?}, expected binary {}", String::from_utf8_lossy(magic)),
        ));
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in &mut fields {
        // whitespace and comments up to the next token
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(_) => break,
                None => return Err(IoError::format(path, pos, "truncated header")),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| IoError::format(path, start, "expected a decimal header field"))?;
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(IoError::format(path, pos, "header must end with one whitespace byte"));
    }
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(IoError::format(path, pos, format!("unsupported maxval {maxval}, expected 255")));
    }
    if width == 0 || height == 0 {
        return Err(IoError::format(path, pos, "image has no pixels"));
    }
    Ok(Header { width, height, data_start: pos + 1 })
}

fn decode(bytes: &[u8], magic: &[u8; 2], channels: usize, path: &Path) -> IoResult<DenseTensor> {
    let h = parse_header(bytes, magic, path)?;
    let expected = h.width * h.height * channels;
    let data = &bytes[h.data_start..];
    if data.len() < expected {
        return Err(IoError::format(path, bytes.len(), format!("truncated pixel data: {} of {expected} bytes", data.len())));
    }
    let dims = if channels == 1 { vec![h.height, h.width] } else { vec![h.height, h.width, channels] };
    let values = data[..expected].iter().map(|&b| f64::from(b)).collect();
    Ok(DenseTensor::new(Shape::new(dims)?, values)?)
}

/// `clamp(v, 0, 255)` rounded half-up.
pub fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 255.0) + 0.5).floor() as u8
}

fn encode(x: &DenseTensor, magic: &str, channels: usize) -> IoResult<Vec<u8>> {
    let dims = x.dims();
    let ok = match channels {
        1 => dims.len() == 2,
        c => dims.len() == 3 && dims[2] == c,
    };
    if !ok {
        return Err(IoError::Invalid(format!("cannot write a {dims:?} tensor as {magic}")));
    }
    let mut out = format!("{magic}\n{} {}\n255\n", dims[1], dims[0]).into_bytes();
    out.extend(x.values().iter().map(|&v| quantize(v)));
    Ok(out)
}

pub fn decode_ppm(bytes: &[u8], path: &Path) -> IoResult<DenseTensor> {
    decode(bytes, b"P6", 3, path)
}

pub fn decode_pgm(bytes: &[u8], path: &Path) -> IoResult<DenseTensor> {
    decode(bytes, b"P5", 1, path)
}

pub fn encode_ppm(x: &DenseTensor) -> IoResult<Vec<u8>> {
    encode(x, "P6", 3)
}

pub fn encode_pgm(x: &DenseTensor) -> IoResult<Vec<u8>> {
    encode(x, "P5", 1)
}

pub fn read_image_ppm(path: &Path) -> IoResult<DenseTensor> {
    decode_ppm(&read_all(path)?, path)
}

pub fn write_image_ppm(path: &Path, x: &DenseTensor) -> IoResult<()> {
    write_atomic(path, &encode_ppm(x)?)
}

pub fn read_pgm(path: &Path) -> IoResult<DenseTensor> {
    decode_pgm(&read_all(path)?, path)
}

pub fn write_pgm(path: &Path, x: &DenseTensor) -> IoResult<()> {
    write_atomic(path, &encode_pgm(x)?)
}
