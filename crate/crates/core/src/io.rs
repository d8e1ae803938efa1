//! File output helpers and the binary model container.
//!
//! Model layout (all integers `u64` and all reals `f64`, little-endian):
//!
//! ```text
//! offset 0   magic  b"EDCNN\0\x01\0"          (format version 1)
//! offset 8   d, s, L, out_rows                 (4 x u64)
//! offset 40  for k in 1..=L:
//!                filter w_k                    (s + 1 reals)
//!                bias b_k                      (d + k s reals)
//!            outer weights, row-major          (out_rows x (d + L s) reals)
//! ```
//!
//! Nothing follows the last outer weight. The filter-length policy is not
//! stored; loading accepts any `s >= 1`.

use std::io::Write;
use std::path::Path;

use crate::conv::Filter;
use crate::error::{EdcnnError, Result};
use crate::network::{Architecture, EdcnnParams, FilterRange, LayerParams};

pub const MODEL_MAGIC: [u8; 8] = *b"EDCNN\0\x01\0";

/// Writes `bytes` to a temporary file next to `path` and renames it into place.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| EdcnnError::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| EdcnnError::io(path, e))?;
    tmp.flush().map_err(|e| EdcnnError::io(path, e))?;
    tmp.persist(path)
        .map_err(|e| EdcnnError::io(path, e.error))?;
    Ok(())
}

pub fn encode_model(p: &EdcnnParams) -> Vec<u8> {
    let arch = p.arch();
    let mut out = Vec::with_capacity(40 + 8 * p.num_params());
    out.extend_from_slice(&MODEL_MAGIC);
    for v in [arch.input_dim, arch.filter_len, arch.depth, arch.out_rows] {
        out.extend_from_slice(&(v as u64).to_le_bytes());
    }
    for block in p.blocks() {
        for v in block {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode_model(bytes: &[u8]) -> Result<EdcnnParams> {
    let fmt = |m: &str| EdcnnError::Format(m.to_string());
    if bytes.len() < 40 || bytes[..8] != MODEL_MAGIC {
        return Err(fmt("missing model header"));
    }
    let header: Vec<usize> = bytes[8..40]
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().expect("8-byte chunk")) as usize)
        .collect();
    let arch = Architecture::new(
        header[0],
        header[1],
        header[2],
        header[3],
        FilterRange::Relaxed,
    )
    .map_err(|e| EdcnnError::Format(e.to_string()))?;
    let expected = 40 + 8 * arch.num_params();
    if bytes.len() != expected {
        return Err(EdcnnError::Format(format!(
            "model body has {} bytes, header implies {expected}",
            bytes.len()
        )));
    }
    let mut values = bytes[40..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")));
    let mut take = |n: usize| -> Vec<f64> { values.by_ref().take(n).collect() };
    let layers = (1..=arch.depth)
        .map(|k| {
            let filter = Filter::new(take(arch.filter_len + 1))
                .map_err(|e| EdcnnError::Format(e.to_string()))?;
            Ok(LayerParams {
                filter,
                bias: take(arch.width(k)),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let out_weights = take(arch.out_rows * arch.output_width());
    EdcnnParams::new(arch, layers, out_weights).map_err(|e| EdcnnError::Format(e.to_string()))
}

pub fn save_model(p: &EdcnnParams, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path, &encode_model(p))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<EdcnnParams> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| EdcnnError::io(path, e))?;
    decode_model(&bytes)
}
