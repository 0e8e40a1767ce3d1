//! The CVDS binary dataset format.
//!
//! Little-endian layout:
//!
//! ```text
//! "CVDS" | version u32 = 1 | c u32 | h u32 | w u32     (20-byte header)
//! per sample: label u32, then c*h*w (re f32, im f32) pairs
//! trailer: class_count u32
//! ```
//!
//! Total length is `20 + n*(4 + 8*c*h*w) + 4` bytes; the sample count n is
//! recovered from the file length. The f32 payload is written and read
//! bit-for-bit.

use crate::data::Dataset;
use crate::error::{Error, Result};
use std::io::Write;
use std::path::Path;

const MAGIC: &[u8; 4] = b"CVDS";
const VERSION: u32 = 1;
const HEADER_LEN: usize = 20;

/// Serialized byte size of a dataset.
pub fn cvds_len(n: usize, c: usize, h: usize, w: usize) -> usize {
    HEADER_LEN + n * (4 + 8 * c * h * w) + 4
}

pub fn write_cvds(path: impl AsRef<Path>, dataset: &Dataset) -> Result<()> {
    let bytes = to_bytes(dataset);
    let mut f = std::fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

pub fn to_bytes(dataset: &Dataset) -> Vec<u8> {
    let per = dataset.shape().len();
    let mut out = Vec::with_capacity(cvds_len(
        dataset.len(),
        dataset.channels as usize,
        dataset.height as usize,
        dataset.width as usize,
    ));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&dataset.channels.to_le_bytes());
    out.extend_from_slice(&dataset.height.to_le_bytes());
    out.extend_from_slice(&dataset.width.to_le_bytes());
    for i in 0..dataset.len() {
        out.extend_from_slice(&dataset.labels[i].to_le_bytes());
        for v in &dataset.data[i * 2 * per..(i + 1) * 2 * per] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out.extend_from_slice(&dataset.class_count.to_le_bytes());
    out
}

pub fn read_cvds(path: impl AsRef<Path>) -> Result<Dataset> {
    let bytes = std::fs::read(path)?;
    from_bytes(&bytes)
}

pub fn from_bytes(bytes: &[u8]) -> Result<Dataset> {
    if bytes.len() < 4 || &bytes[0..4] != MAGIC {
        return Err(Error::NotCvds);
    }
    if bytes.len() < HEADER_LEN + 4 {
        return Err(Error::Truncated);
    }
    let u32_at = |off: usize| u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap());
    let version = u32_at(4);
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let c = u32_at(8) as usize;
    let h = u32_at(12) as usize;
    let w = u32_at(16) as usize;
    if c == 0 || h == 0 || w == 0 {
        return Err(Error::Invalid("zero-sized sample shape".into()));
    }
    let per = c
        .checked_mul(h)
        .and_then(|v| v.checked_mul(w))
        .filter(|&v| v <= (1 << 28))
        .ok_or(Error::Truncated)?;
    let sample_bytes = 4 + 8 * per;
    let body = bytes.len() - HEADER_LEN - 4;
    if body % sample_bytes != 0 {
        return Err(Error::Truncated);
    }
    let n = body / sample_bytes;

    let mut labels = Vec::with_capacity(n);
    let mut data = Vec::with_capacity(n * 2 * per);
    let mut off = HEADER_LEN;
    for _ in 0..n {
        labels.push(u32_at(off));
        off += 4;
        for _ in 0..2 * per {
            data.push(f32::from_le_bytes(bytes[off..off + 4].try_into().unwrap()));
            off += 4;
        }
    }
    let class_count = u32_at(off);
    Dataset::new(c as u32, h as u32, w as u32, class_count, labels, data)
}
