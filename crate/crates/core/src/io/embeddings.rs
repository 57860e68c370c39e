//! Embedding matrices (`count × dimension`).
//!
//! Binary layout, all little-endian:
//! `b"MGEM"`, `u32` format version, `u64` dimension, `u64` count, then
//! `count · dimension` `f64` values row by row.
//!
//! Text fallback: a first line `MGEM-TEXT <version> <dimension> <count>`
//! followed by one whitespace-separated row per line.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{atomic_write, check_version, FORMAT_VERSION};
use crate::autodiff::Matrix;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"MGEM";
const TEXT_MAGIC: &str = "MGEM-TEXT";
const HEADER_LEN: usize = 4 + 4 + 8 + 8;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingEncoding {
    #[default]
    Binary,
    Text,
}

fn check_finite(m: &Matrix, path: &Path) -> Result<()> {
    match m.indexed_iter().find(|(_, v)| !v.is_finite()) {
        Some(((r, c), v)) => Err(Error::format(path, None, format!("non-finite value {v} at row {r}, column {c}"))),
        None => Ok(()),
    }
}

pub fn encode_embeddings_binary(m: &Matrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * m.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(m.ncols() as u64).to_le_bytes());
    out.extend_from_slice(&(m.nrows() as u64).to_le_bytes());
    for v in m.iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn encode_embeddings_text(m: &Matrix) -> String {
    let mut out = format!("{TEXT_MAGIC} {FORMAT_VERSION} {} {}\n", m.ncols(), m.nrows());
    for row in m.rows() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&cells.join(" "));
        out.push('\n');
    }
    out
}

fn u64_at(bytes: &[u8], at: usize) -> u64 {
    u64::from_le_bytes(bytes[at..at + 8].try_into().expect("8 bytes"))
}

fn decode_binary(bytes: &[u8], path: &Path) -> Result<Matrix> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::format(path, None, "truncated header"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    check_version(path, None, version)?;
    let dim = u64_at(bytes, 8);
    let count = u64_at(bytes, 16);
    let expected = dim
        .checked_mul(count)
        .and_then(|n| n.checked_mul(8))
        .and_then(|n| n.checked_add(HEADER_LEN as u64))
        .ok_or_else(|| Error::format(path, None, "header sizes overflow"))?;
    if (bytes.len() as u64) < expected {
        return Err(Error::format(
            path,
            None,
            format!("truncated payload: {} bytes, header promises {expected}", bytes.len()),
        ));
    }
    if bytes.len() as u64 > expected {
        return Err(Error::format(path, None, format!("{} trailing bytes", bytes.len() as u64 - expected)));
    }
    let values: Vec<f64> = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Matrix::from_shape_vec((count as usize, dim as usize), values).map_err(|e| Error::format(path, None, e.to_string()))
}

fn decode_text(text: &str, path: &Path) -> Result<Matrix> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    let fields: Vec<&str> = header.split_whitespace().collect();
    let parse = |s: &str, what: &str| {
        s.parse::<u64>().map_err(|_| Error::format(path, Some(1), format!("invalid {what} '{s}'")))
    };
    if fields.len() != 4 || fields[0] != TEXT_MAGIC {
        return Err(Error::format(path, Some(1), format!("expected '{TEXT_MAGIC} <version> <dimension> <count>'")));
    }
    check_version(path, Some(1), parse(fields[1], "version")? as u32)?;
    let dim = parse(fields[2], "dimension")? as usize;
    let count = parse(fields[3], "count")? as usize;
    let mut values = Vec::with_capacity(dim * count);
    let mut rows = 0;
    for (i, line) in lines.enumerate() {
        let n = i + 2;
        if rows == count {
            return Err(Error::format(path, Some(n), format!("more than {count} rows")));
        }
        let before = values.len();
        for cell in line.split_whitespace() {
            let v: f64 = cell.parse().map_err(|_| Error::format(path, Some(n), format!("invalid number '{cell}'")))?;
            values.push(v);
        }
        if values.len() - before != dim {
            return Err(Error::format(path, Some(n), format!("row has {} values, expected {dim}", values.len() - before)));
        }
        rows += 1;
    }
    if rows != count {
        return Err(Error::format(path, None, format!("truncated payload: {rows} of {count} rows")));
    }
    Matrix::from_shape_vec((count, dim), values).map_err(|e| Error::format(path, None, e.to_string()))
}

/// Decodes either encoding, detected from the leading bytes.
pub fn decode_embeddings(bytes: &[u8], path: &Path) -> Result<Matrix> {
    let m = if bytes.starts_with(MAGIC) && !bytes.starts_with(TEXT_MAGIC.as_bytes()) {
        decode_binary(bytes, path)?
    } else if bytes.starts_with(TEXT_MAGIC.as_bytes()) {
        let text = std::str::from_utf8(bytes).map_err(|e| Error::format(path, None, e.to_string()))?;
        decode_text(text, path)?
    } else {
        return Err(Error::format(path, None, "not an embedding file (bad magic)"));
    };
    check_finite(&m, path)?;
    Ok(m)
}

/// Reads an embedding file and checks its dimension when one is expected.
pub fn read_embeddings(path: &Path, expected_dim: Option<usize>) -> Result<Matrix> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let m = decode_embeddings(&bytes, path)?;
    if let Some(d) = expected_dim {
        if m.ncols() != d {
            return Err(Error::format(path, None, format!("dimension mismatch: file has {}, expected {d}", m.ncols())));
        }
    }
    Ok(m)
}

pub fn write_embeddings(path: &Path, m: &Matrix, encoding: EmbeddingEncoding) -> Result<()> {
    check_finite(m, path)?;
    match encoding {
        EmbeddingEncoding::Binary => atomic_write(path, &encode_embeddings_binary(m)),
        EmbeddingEncoding::Text => atomic_write(path, encode_embeddings_text(m).as_bytes()),
    }
}
