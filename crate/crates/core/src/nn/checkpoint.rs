//! Binary parameter snapshots.
//!
//! Layout, little-endian: magic `DCAE`, `u32` version, `u32` entry count,
//! then per entry `u32` name length, UTF-8 name, `u32` rank, `u32` dims and
//! the `f32` payload. A `u32`-length JSON metadata block follows the
//! entries, and a CRC32 of everything before it closes the file.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"DCAE";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub seed: u64,
    pub epoch: u64,
    /// Hex digest of the training schedule that produced the snapshot.
    pub schedule_hash: String,
    /// Model description, opaque to this module.
    #[serde(default)]
    pub model: serde_json::Value,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Checkpoint {
    pub entries: Vec<CheckpointEntry>,
    pub meta: CheckpointMeta,
}

impl Checkpoint {
    pub fn new(meta: CheckpointMeta) -> Self {
        Self {
            entries: Vec::new(),
            meta,
        }
    }

    pub fn push(&mut self, name: impl Into<String>, shape: &[usize], data: Vec<f32>) -> Result<()> {
        let name = name.into();
        if shape.iter().product::<usize>() != data.len() {
            return Err(Error::Checkpoint(format!(
                "entry {name}: shape {shape:?} does not hold {} values",
                data.len()
            )));
        }
        if self.get(&name).is_some() {
            return Err(Error::Checkpoint(format!("duplicate entry {name}")));
        }
        self.entries.push(CheckpointEntry {
            name,
            shape: shape.to_vec(),
            data,
        });
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&CheckpointEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    /// Entries under `prefix.` with the prefix stripped.
    pub fn group(&self, prefix: &str) -> BTreeMap<String, &CheckpointEntry> {
        let lead = format!("{prefix}.");
        self.entries
            .iter()
            .filter_map(|e| e.name.strip_prefix(&lead).map(|rest| (rest.to_string(), e)))
            .collect()
    }

    /// Distinct name prefixes before the first `.`, in entry order.
    pub fn groups(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for e in &self.entries {
            let head = e.name.split('.').next().unwrap_or_default().to_string();
            if !out.contains(&head) {
                out.push(head);
            }
        }
        out
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        buf.extend_from_slice(&CHECKPOINT_MAGIC);
        put_u32(&mut buf, CHECKPOINT_VERSION);
        put_u32(&mut buf, len_u32(self.entries.len())?);
        for e in &self.entries {
            put_u32(&mut buf, len_u32(e.name.len())?);
            buf.extend_from_slice(e.name.as_bytes());
            put_u32(&mut buf, len_u32(e.shape.len())?);
            for d in &e.shape {
                put_u32(&mut buf, len_u32(*d)?);
            }
            for v in &e.data {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        let meta = serde_json::to_vec(&self.meta)?;
        put_u32(&mut buf, len_u32(meta.len())?);
        buf.extend_from_slice(&meta);
        let crc = crc32fast::hash(&buf);
        put_u32(&mut buf, crc);
        Ok(buf)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        let magic = r.take(4)?;
        if magic != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint(format!(
                "unsupported format version: bad magic bytes {magic:02x?}"
            )));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format version {version} (expected {CHECKPOINT_VERSION})"
            )));
        }
        let count = r.u32()? as usize;
        let mut entries = Vec::with_capacity(count.min(1024));
        for _ in 0..count {
            let name_len = r.u32()? as usize;
            let name = std::str::from_utf8(r.take(name_len)?)
                .map_err(|_| Error::Checkpoint("entry name is not UTF-8".into()))?
                .to_string();
            let rank = r.u32()? as usize;
            let shape = (0..rank)
                .map(|_| r.u32().map(|d| d as usize))
                .collect::<Result<Vec<_>>>()?;
            let numel = shape
                .iter()
                .try_fold(1usize, |acc, d| acc.checked_mul(*d))
                .ok_or_else(|| Error::Checkpoint(format!("entry {name}: shape overflows")))?;
            let raw = r.take(
                numel
                    .checked_mul(4)
                    .ok_or_else(|| Error::Checkpoint("payload overflows".into()))?,
            )?;
            let data = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            entries.push(CheckpointEntry { name, shape, data });
        }
        let meta_len = r.u32()? as usize;
        let meta_raw = r.take(meta_len)?;
        let body_end = r.pos;
        let stored = r.u32()?;
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint(format!(
                "{} trailing bytes after checksum",
                bytes.len() - r.pos
            )));
        }
        let actual = crc32fast::hash(&bytes[..body_end]);
        if stored != actual {
            return Err(Error::Checkpoint(format!(
                "checksum mismatch (stored {stored:08x}, computed {actual:08x}); file is corrupt"
            )));
        }
        let meta = serde_json::from_slice(meta_raw).map_err(|e| Error::Checkpoint(format!("bad metadata: {e}")))?;
        Ok(Self { entries, meta })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
        }
        std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

fn put_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn len_u32(n: usize) -> Result<u32> {
    u32::try_from(n).map_err(|_| Error::Checkpoint(format!("length {n} exceeds u32")))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|e| *e <= self.bytes.len())
            .ok_or_else(|| {
                Error::Checkpoint(format!(
                    "truncated: needed {n} bytes at offset {}, file has {}",
                    self.pos,
                    self.bytes.len()
                ))
            })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Checkpoint {
        let mut ck = Checkpoint::new(CheckpointMeta {
            seed: 7,
            epoch: 3,
            schedule_hash: "abc".into(),
            model: serde_json::json!({"latent_dim": 4}),
        });
        ck.push(
            "enc.0.weight",
            &[2, 3],
            vec![1.5, -0.0, f32::MIN_POSITIVE, 1e-30, -7.25, 3.0],
        )
        .unwrap();
        ck.push("enc.0.bias", &[2], vec![0.1, 0.2]).unwrap();
        ck.push("scalar", &[], vec![42.0]).unwrap();
        ck
    }

    #[test]
    fn roundtrip_is_bit_exact() {
        let ck = sample();
        let back = Checkpoint::from_bytes(&ck.to_bytes().unwrap()).unwrap();
        assert_eq!(back.meta, ck.meta);
        for (a, b) in ck.entries.iter().zip(&back.entries) {
            assert_eq!(a.name, b.name);
            assert_eq!(a.shape, b.shape);
            assert!(a.data.iter().zip(&b.data).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }

    #[test]
    fn wrong_magic_is_a_version_error() {
        let mut bytes = sample().to_bytes().unwrap();
        bytes[0] = b'X';
        let err = Checkpoint::from_bytes(&bytes).unwrap_err().to_string();
        assert!(err.contains("version"), "{err}");
    }

    #[test]
    fn unknown_version_rejected() {
        let mut bytes = sample().to_bytes().unwrap();
        bytes[4] = 9;
        let err = Checkpoint::from_bytes(&bytes).unwrap_err().to_string();
        assert!(err.contains("version 9"), "{err}");
    }

    #[test]
    fn truncation_and_corruption_detected() {
        let bytes = sample().to_bytes().unwrap();
        let err = Checkpoint::from_bytes(&bytes[..bytes.len() - 6])
            .unwrap_err()
            .to_string();
        assert!(err.contains("truncated"), "{err}");
        let mut flipped = bytes.clone();
        flipped[30] ^= 0x10;
        let err = Checkpoint::from_bytes(&flipped).unwrap_err().to_string();
        assert!(err.contains("checksum") || err.contains("truncated"), "{err}");
    }

    #[test]
    fn groups_and_prefix_lookup() {
        let ck = sample();
        assert_eq!(ck.groups(), vec!["enc", "scalar"]);
        let enc = ck.group("enc");
        assert_eq!(enc.keys().cloned().collect::<Vec<_>>(), vec!["0.bias", "0.weight"]);
    }

    #[test]
    fn push_validates_shape_and_duplicates() {
        let mut ck = sample();
        assert!(ck.push("x", &[2, 2], vec![0.0; 3]).is_err());
        assert!(ck.push("scalar", &[], vec![0.0]).is_err());
    }
}
