//! MVCT tensor file format.
//!
//! Layout (all integers little-endian):
//!   magic `4D 56 43 54` ("MVCT"), u32 version = 1, u32 rank (must be 2),
//!   u32 dims[2] (rows, cols), then rows*cols f32 LE values, row-major.
//!
//! Internal compute is f64; payloads are f32, so write/read round-trips are
//! bit-exact on the stored 32-bit values.

use crate::error::{Error, Result};
use crate::numerics::SeqTensor;
use std::io::Write;
use std::path::Path;

pub const MAGIC: [u8; 4] = *b"MVCT";
pub const VERSION: u32 = 1;

pub fn write_tensor(t: &SeqTensor, path: impl AsRef<Path>) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    write_tensor_to(t, &mut f)
}

pub fn write_tensor_to(t: &SeqTensor, w: &mut impl Write) -> Result<()> {
    w.write_all(&MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&2u32.to_le_bytes())?;
    w.write_all(&(t.rows() as u32).to_le_bytes())?;
    w.write_all(&(t.cols() as u32).to_le_bytes())?;
    let mut buf = Vec::with_capacity(t.len() * 4);
    for &v in t.data() {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<SeqTensor> {
    let bytes = std::fs::read(path)?;
    read_tensor_from(&bytes)
}

pub fn read_tensor_from(bytes: &[u8]) -> Result<SeqTensor> {
    if bytes.len() < 4 || bytes[..4] != MAGIC {
        return Err(Error::BadMagic);
    }
    let mut off = 4;
    let u32_at = |o: &mut usize| -> Result<u32> {
        if bytes.len() < *o + 4 {
            return Err(Error::Truncated {
                expected: *o + 4,
                got: bytes.len(),
            });
        }
        let v = u32::from_le_bytes(bytes[*o..*o + 4].try_into().unwrap());
        *o += 4;
        Ok(v)
    };
    let version = u32_at(&mut off)?;
    if version != VERSION {
        return Err(Error::BadVersion(version));
    }
    let rank = u32_at(&mut off)?;
    if rank != 2 {
        return Err(Error::BadRank(rank));
    }
    let rows = u32_at(&mut off)? as usize;
    let cols = u32_at(&mut off)? as usize;
    let need = off + rows * cols * 4;
    if bytes.len() < need {
        return Err(Error::Truncated {
            expected: need,
            got: bytes.len(),
        });
    }
    let mut data = Vec::with_capacity(rows * cols);
    for i in 0..rows * cols {
        let p = off + i * 4;
        data.push(f32::from_le_bytes(bytes[p..p + 4].try_into().unwrap()) as f64);
    }
    Ok(SeqTensor::from_vec(rows, cols, data))
}

/// Reads a stream of whitespace-separated non-negative integers.
pub fn read_token_ids(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    let text = std::fs::read_to_string(path)?;
    let mut ids = Vec::new();
    for (i, tok) in text.split_whitespace().enumerate() {
        let id: usize = tok.parse().map_err(|_| Error::InvalidArg {
            op: "read_token_ids",
            detail: format!("token {i}: {tok:?} is not a non-negative integer"),
        })?;
        ids.push(id);
    }
    Ok(ids)
}
