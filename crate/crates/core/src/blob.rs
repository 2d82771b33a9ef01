//! Raw weight blobs: little-endian f32 payload followed by a 12-byte trailer
//! (u64 payload byte length, u32 CRC-32 of the payload).

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

const TRAILER_LEN: usize = 12;

pub fn encode(values: &[f32]) -> (Vec<u8>, u32) {
    let mut bytes = Vec::with_capacity(values.len() * 4 + TRAILER_LEN);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    let crc = crc32fast::hash(&bytes);
    bytes.extend_from_slice(&(values.len() as u64 * 4).to_le_bytes());
    bytes.extend_from_slice(&crc.to_le_bytes());
    (bytes, crc)
}

/// Parses a blob, verifying the trailer and, if given, the expected checksum.
pub fn decode(bytes: &[u8], expected_crc: Option<u32>) -> Result<Vec<f32>> {
    if bytes.len() < TRAILER_LEN {
        return Err(Error::Manifest(format!(
            "weight blob is {} bytes, too short for its trailer",
            bytes.len()
        )));
    }
    let (payload, trailer) = bytes.split_at(bytes.len() - TRAILER_LEN);
    let declared = u64::from_le_bytes(trailer[..8].try_into().unwrap());
    let stored_crc = u32::from_le_bytes(trailer[8..].try_into().unwrap());
    if declared != payload.len() as u64 || payload.len() % 4 != 0 {
        return Err(Error::Manifest(format!(
            "weight blob declares {declared} payload bytes but holds {}",
            payload.len()
        )));
    }
    let actual = crc32fast::hash(payload);
    if actual != stored_crc {
        return Err(Error::Checksum {
            expected: stored_crc,
            actual,
        });
    }
    if let Some(expected) = expected_crc {
        if expected != actual {
            return Err(Error::Checksum { expected, actual });
        }
    }
    Ok(payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect())
}

pub fn write(path: &Path, values: &[f32]) -> Result<u32> {
    let (bytes, crc) = encode(values);
    fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    Ok(crc)
}

pub fn read(path: &Path, expected_crc: Option<u32>) -> Result<Vec<f32>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, expected_crc)
}

pub fn format_crc(crc: u32) -> String {
    format!("crc32:{crc:08x}")
}

pub fn parse_crc(s: &str) -> Result<u32> {
    let hex = s.strip_prefix("crc32:").unwrap_or(s);
    u32::from_str_radix(hex, 16).map_err(|_| Error::Manifest(format!("unrecognized checksum `{s}`")))
}

/// Resolves a blob path named in a manifest (relative to the manifest's
/// directory), defaulting to the manifest path with a `.bin` extension.
pub fn resolve_path(manifest: &Path, named: Option<&str>) -> PathBuf {
    match named {
        Some(name) => {
            let p = Path::new(name);
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                manifest.parent().unwrap_or(Path::new(".")).join(p)
            }
        }
        None => manifest.with_extension("bin"),
    }
}

/// Sequential reader over a decoded payload.
pub(crate) struct Cursor<'a> {
    values: &'a [f32],
    pos: usize,
}

impl<'a> Cursor<'a> {
    pub fn new(values: &'a [f32]) -> Self {
        Cursor { values, pos: 0 }
    }

    /// Takes the next `n` values, or `None` if fewer remain.
    pub fn take(&mut self, n: usize) -> Option<&'a [f32]> {
        let end = self.pos.checked_add(n)?;
        let out = self.values.get(self.pos..end)?;
        self.pos = end;
        Some(out)
    }

    pub fn remaining(&self) -> usize {
        self.values.len() - self.pos
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encode_layout() {
        let (bytes, crc) = encode(&[1.0, -2.5]);
        assert_eq!(bytes.len(), 8 + 12);
        assert_eq!(&bytes[..4], &1.0f32.to_le_bytes());
        assert_eq!(u64::from_le_bytes(bytes[8..16].try_into().unwrap()), 8);
        assert_eq!(u32::from_le_bytes(bytes[16..].try_into().unwrap()), crc);
        assert_eq!(decode(&bytes, Some(crc)).unwrap(), vec![1.0, -2.5]);
    }

    #[test]
    fn corruption_is_detected() {
        let (mut bytes, crc) = encode(&[1.0, 2.0, 3.0]);
        assert!(matches!(decode(&bytes, Some(crc ^ 1)), Err(Error::Checksum { .. })));
        bytes[0] ^= 0xff;
        assert!(matches!(decode(&bytes, None), Err(Error::Checksum { .. })));
        let (bytes, _) = encode(&[1.0, 2.0]);
        assert!(decode(&bytes[4..], None).is_err());
        assert!(decode(&bytes[..10], None).is_err());
    }

    #[test]
    fn crc_strings() {
        assert_eq!(format_crc(0xdead_beef), "crc32:deadbeef");
        assert_eq!(parse_crc("crc32:deadbeef").unwrap(), 0xdead_beef);
        assert!(parse_crc("sha:xyz").is_err());
    }
}
