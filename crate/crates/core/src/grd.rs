//! `GRD1` binary grid files.
//!
//! Layout (little-endian): magic `GRD1`, `u32` channel count, `u32` H, `u32` W,
//! `f64` dx, then per channel a `u32` byte length followed by the UTF-8 name,
//! then `channels * H * W` `f64` values in `(channel, row, col)` order.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::field::GridField;

pub const MAGIC: &[u8; 4] = b"GRD1";

pub fn encode(field: &GridField) -> Vec<u8> {
    let names_len: usize = field.channel_names().iter().map(|n| 4 + n.len()).sum();
    let mut out = Vec::with_capacity(24 + names_len + 8 * field.values().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(field.channel_count() as u32).to_le_bytes());
    out.extend_from_slice(&(field.height() as u32).to_le_bytes());
    out.extend_from_slice(&(field.width() as u32).to_le_bytes());
    out.extend_from_slice(&field.dx().to_le_bytes());
    for name in field.channel_names() {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
    }
    for v in field.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| {
                format!(
                    "truncated payload: need {n} bytes at offset {}, file has {}",
                    self.pos,
                    self.bytes.len()
                )
            })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> std::result::Result<f64, String> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Decodes a `GRD1` payload; `origin` is only used in error messages.
pub fn decode(bytes: &[u8], origin: &Path) -> Result<GridField> {
    let fail = |m: String| Error::format(origin, m);
    let mut cur = Cursor { bytes, pos: 0 };
    let magic = cur.take(4).map_err(fail)?;
    if magic != MAGIC {
        return Err(fail(format!("bad magic {magic:?}, expected GRD1")));
    }
    let channels = cur.u32().map_err(fail)? as usize;
    let height = cur.u32().map_err(fail)? as usize;
    let width = cur.u32().map_err(fail)? as usize;
    let dx = cur.f64().map_err(fail)?;
    let mut names = Vec::with_capacity(channels.min(1024));
    for _ in 0..channels {
        let len = cur.u32().map_err(fail)? as usize;
        let raw = cur.take(len).map_err(fail)?;
        let name = std::str::from_utf8(raw)
            .map_err(|e| fail(format!("channel name is not UTF-8: {e}")))?;
        names.push(name.to_string());
    }
    let count = channels
        .checked_mul(height)
        .and_then(|v| v.checked_mul(width))
        .ok_or_else(|| fail("dimensions overflow".into()))?;
    let body = cur
        .take(count.checked_mul(8).ok_or_else(|| fail("dimensions overflow".into()))?)
        .map_err(fail)?;
    if cur.pos != bytes.len() {
        return Err(fail(format!(
            "{} trailing bytes after payload",
            bytes.len() - cur.pos
        )));
    }
    let values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    GridField::new(values, height, width, dx, names).map_err(|e| fail(e.to_string()))
}

pub fn read(path: impl AsRef<Path>) -> Result<GridField> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, path)
}

pub fn write(path: impl AsRef<Path>, field: &GridField) -> Result<()> {
    write_atomic(path, &encode(field))
}

/// Writes through a temporary file in the target directory, then renames it into place.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}
