//! Versioned binary container for models, phraselet books and solver state.
//!
//! ```text
//! magic   8 bytes  "POSEKIT\0"
//! version u32 LE
//! kind    u8
//! length  u64 LE   payload bytes
//! payload          bincode, fixed-width little-endian integers
//! check   u64 LE   FNV-1a of the payload
//! ```

use std::hash::Hasher;
use std::path::Path;

use bincode::Options;
use fnv::FnvHasher;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{PoseError, Result};
use crate::learning::SvmState;
use crate::model::MixtureModel;
use crate::phraselets::PhraseletBook;
use crate::two_trees::TwoTreeModel;

pub const MAGIC: [u8; 8] = *b"POSEKIT\0";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 1 + 8;

/// Types that can be stored in the container.
pub trait Persist: Serialize + DeserializeOwned {
    const KIND: u8;
    const NAME: &'static str;
}

impl Persist for MixtureModel {
    const KIND: u8 = 1;
    const NAME: &'static str = "mixture model";
}

impl Persist for PhraseletBook {
    const KIND: u8 = 2;
    const NAME: &'static str = "phraselet book";
}

impl Persist for TwoTreeModel {
    const KIND: u8 = 3;
    const NAME: &'static str = "two-tree model";
}

impl Persist for SvmState {
    const KIND: u8 = 4;
    const NAME: &'static str = "solver state";
}

fn codec() -> impl Options {
    bincode::DefaultOptions::new()
        .with_fixint_encoding()
        .with_little_endian()
        .reject_trailing_bytes()
}

fn checksum(bytes: &[u8]) -> u64 {
    let mut h = FnvHasher::default();
    h.write(bytes);
    h.finish()
}

pub fn to_bytes<T: Persist>(value: &T) -> Result<Vec<u8>> {
    let payload = codec()
        .serialize(value)
        .map_err(|e| PoseError::InvalidArgument(format!("cannot encode {}: {e}", T::NAME)))?;
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len() + 8);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(T::KIND);
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(&payload);
    out.extend_from_slice(&checksum(&payload).to_le_bytes());
    Ok(out)
}

pub fn from_bytes<T: Persist>(bytes: &[u8]) -> Result<T> {
    if bytes.len() < 8 {
        return Err(PoseError::Truncated(format!("{} bytes, header needs {HEADER_LEN}", bytes.len())));
    }
    if bytes[..8] != MAGIC {
        return Err(PoseError::CorruptHeader("bad magic".into()));
    }
    if bytes.len() < HEADER_LEN {
        return Err(PoseError::Truncated(format!("{} bytes, header needs {HEADER_LEN}", bytes.len())));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != VERSION {
        return Err(PoseError::VersionMismatch {
            found: version,
            expected: VERSION,
        });
    }
    let kind = bytes[12];
    if kind != T::KIND {
        return Err(PoseError::CorruptHeader(format!(
            "file holds kind {kind}, expected {} ({})",
            T::KIND,
            T::NAME
        )));
    }
    let len = u64::from_le_bytes(bytes[13..21].try_into().unwrap());
    let body = &bytes[HEADER_LEN..];
    if (body.len() as u64) < len.saturating_add(8) {
        return Err(PoseError::Truncated(format!(
            "payload of {len} bytes plus checksum, {} present",
            body.len()
        )));
    }
    if body.len() as u64 > len + 8 {
        return Err(PoseError::CorruptHeader(format!(
            "{} bytes after the checksum",
            body.len() as u64 - len - 8
        )));
    }
    let len = len as usize;
    let payload = &body[..len];
    let stored = u64::from_le_bytes(body[len..len + 8].try_into().unwrap());
    if stored != checksum(payload) {
        return Err(PoseError::ChecksumMismatch);
    }
    codec()
        .deserialize(payload)
        .map_err(|e| PoseError::InvalidModel(format!("undecodable {}: {e}", T::NAME)))
}

pub fn save<T: Persist>(value: &T, path: &Path) -> Result<()> {
    let bytes = to_bytes(value)?;
    std::fs::write(path, bytes).map_err(|e| PoseError::io(path, e))
}

pub fn load<T: Persist>(path: &Path) -> Result<T> {
    let bytes = std::fs::read(path).map_err(|e| PoseError::io(path, e))?;
    from_bytes(&bytes)
}
