//! Small file-system helpers.

use std::io::Write;
use std::path::Path;

use crate::geometry::HeatmapStack;
use crate::{Error, Result};

/// Writes `bytes` to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn write_json_atomic<T: serde::Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Leading bytes of a heatmap archive.
pub const HEATMAP_MAGIC: [u8; 4] = *b"BHM1";

/// Heatmap archive: the magic, then `K`, `H`, `W` as little-endian `u32`,
/// then `K * H * W` little-endian `f32` values in row-major map order.
pub fn encode_heatmaps(stack: &HeatmapStack) -> Vec<u8> {
    let (k, s) = (stack.maps.len(), stack.side);
    let mut out = Vec::with_capacity(16 + 4 * k * s * s);
    out.extend_from_slice(&HEATMAP_MAGIC);
    for v in [k, s, s] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    for v in stack.maps.iter().flatten() {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out
}

/// Inverse of [`encode_heatmaps`]; returns `(K, H, W, values)`.
pub fn decode_heatmaps(bytes: &[u8]) -> Result<(usize, usize, usize, Vec<f32>)> {
    if bytes.len() < 16 || bytes[..4] != HEATMAP_MAGIC {
        return Err(Error::Data("not a heatmap archive".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().expect("4 bytes")) as usize;
    let (k, h, w) = (word(0), word(1), word(2));
    let n = k.checked_mul(h).and_then(|v| v.checked_mul(w)).ok_or_else(|| Error::Data("archive size overflow".into()))?;
    if bytes.len() != 16 + 4 * n {
        return Err(Error::Data(format!("archive holds {} bytes, header implies {}", bytes.len(), 16 + 4 * n)));
    }
    let values = bytes[16..].chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
    Ok((k, h, w, values))
}
