//! LSCP checkpoint files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "LSCP" | u32 version (=1) | u64 header length H | H bytes JSON header | payload
//! ```
//!
//! The JSON header is
//! `{"meta": {..}, "tensors": {name: {"dtype": "f32", "offset": n, "shape": [..]}}}`
//! with byte offsets relative to the payload start. Tensors are laid out
//! back-to-back in lexicographic name order, so saving the same set twice gives
//! identical bytes.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::tensor::{ParameterSet, Tensor};

pub const MAGIC: &[u8; 4] = b"LSCP";
pub const VERSION: u32 = 1;
const PREAMBLE_LEN: usize = 4 + 4 + 8;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    tensors: BTreeMap<String, TensorEntry>,
    #[serde(default)]
    meta: BTreeMap<String, String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    dtype: String,
    shape: Vec<usize>,
    offset: u64,
}

/// Serializes a parameter set to LSCP bytes.
pub fn to_bytes(ps: &ParameterSet<f32>) -> Vec<u8> {
    let mut offset = 0u64;
    let mut tensors = BTreeMap::new();
    for (name, t) in ps.iter() {
        tensors.insert(
            name.to_string(),
            TensorEntry {
                dtype: "f32".into(),
                shape: t.shape().to_vec(),
                offset,
            },
        );
        offset += 4 * t.numel() as u64;
    }
    let header = Header {
        tensors,
        meta: ps.meta().clone(),
    };
    let header_bytes = serde_json::to_vec(&header).expect("header serialization cannot fail");

    let mut out = Vec::with_capacity(PREAMBLE_LEN + header_bytes.len() + offset as usize);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(header_bytes.len() as u64).to_le_bytes());
    out.extend_from_slice(&header_bytes);
    for (_, t) in ps.iter() {
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

/// Parses LSCP bytes.
pub fn from_bytes(bytes: &[u8]) -> Result<ParameterSet<f32>> {
    if bytes.len() < PREAMBLE_LEN {
        if bytes.len() >= 4 && &bytes[..4] != MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        return Err(Error::Format(format!(
            "file too short for preamble ({} bytes)",
            bytes.len()
        )));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::Format(format!(
            "bad magic {:?}",
            String::from_utf8_lossy(&bytes[..4])
        )));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let header_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let header_end = (PREAMBLE_LEN as u64)
        .checked_add(header_len)
        .filter(|&end| end <= bytes.len() as u64)
        .ok_or_else(|| Error::Corrupt(format!("header length {header_len} exceeds file")))?
        as usize;
    let header: Header = serde_json::from_slice(&bytes[PREAMBLE_LEN..header_end])
        .map_err(|e| Error::Format(format!("invalid header json: {e}")))?;
    let payload = &bytes[header_end..];

    let mut ps = ParameterSet::new();
    let mut cursor = 0u64;
    // BTreeMap iteration gives lexicographic order, which is also the required
    // offset order.
    for (name, entry) in header.tensors {
        if entry.dtype != "f32" {
            return Err(Error::UnsupportedDtype {
                name,
                dtype: entry.dtype,
            });
        }
        if entry.offset < cursor {
            return Err(Error::Corrupt(format!(
                "tensor `{name}` at offset {} overlaps previous data ending at {cursor}",
                entry.offset
            )));
        }
        let numel: usize = entry.shape.iter().product();
        let end = entry
            .offset
            .checked_add(4 * numel as u64)
            .filter(|&e| e <= payload.len() as u64)
            .ok_or_else(|| {
                Error::Corrupt(format!(
                    "tensor `{name}` needs {numel} floats at offset {}, payload has {} bytes",
                    entry.offset,
                    payload.len()
                ))
            })?;
        let data = payload[entry.offset as usize..end as usize]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let tensor = Tensor::new(entry.shape, data)
            .map_err(|e| Error::Corrupt(format!("tensor `{name}`: {e}")))?;
        ps.insert(name, tensor)
            .map_err(|e| Error::Corrupt(e.to_string()))?;
        cursor = end;
    }
    if cursor != payload.len() as u64 {
        return Err(Error::Corrupt(format!(
            "{} trailing payload bytes",
            payload.len() as u64 - cursor
        )));
    }
    *ps.meta_mut() = header.meta;
    Ok(ps)
}

pub fn save_checkpoint(ps: &ParameterSet<f32>, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, to_bytes(ps))?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<ParameterSet<f32>> {
    from_bytes(&fs::read(path)?)
}

/// Hex SHA-256 of the serialized checkpoint; stable identity for caching.
pub fn content_hash(ps: &ParameterSet<f32>) -> String {
    hex::encode(Sha256::digest(to_bytes(ps)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(v: f32) -> ParameterSet<f32> {
        ParameterSet::from_tensors([("w", Tensor::vector(vec![v]).unwrap())]).unwrap()
    }

    fn payload(bytes: &[u8]) -> &[u8] {
        let h = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        &bytes[PREAMBLE_LEN + h..]
    }

    #[test]
    fn single_one_encodes_as_ieee_bytes() {
        let bytes = to_bytes(&one(1.0));
        assert_eq!(payload(&bytes), &[0x00, 0x00, 0x80, 0x3F]);
        assert_eq!(&bytes[..4], b"LSCP");
        assert_eq!(&bytes[4..8], &[1, 0, 0, 0]);
    }

    #[test]
    fn empty_set_round_trips() {
        let ps = ParameterSet::<f32>::new();
        let bytes = to_bytes(&ps);
        assert!(payload(&bytes).is_empty());
        let back = from_bytes(&bytes).unwrap();
        assert!(back.is_empty());
        let header: serde_json::Value = serde_json::from_slice(&bytes[PREAMBLE_LEN..]).unwrap();
        assert_eq!(header["tensors"], serde_json::json!({}));
    }

    #[test]
    fn bad_magic_is_format_error() {
        let mut bytes = to_bytes(&one(1.0));
        bytes[..4].copy_from_slice(b"XXXX");
        assert!(matches!(from_bytes(&bytes), Err(Error::Format(_))));
    }

    #[test]
    fn bad_version_is_format_error() {
        let mut bytes = to_bytes(&one(1.0));
        bytes[4] = 2;
        assert!(matches!(from_bytes(&bytes), Err(Error::Format(_))));
    }

    fn raw_file(header: serde_json::Value, payload: &[u8]) -> Vec<u8> {
        let h = serde_json::to_vec(&header).unwrap();
        let mut out = b"LSCP".to_vec();
        out.extend_from_slice(&1u32.to_le_bytes());
        out.extend_from_slice(&(h.len() as u64).to_le_bytes());
        out.extend_from_slice(&h);
        out.extend_from_slice(payload);
        out
    }

    #[test]
    fn truncated_payload_is_corruption() {
        let header = serde_json::json!({
            "tensors": {"w": {"dtype": "f32", "shape": [8], "offset": 0}},
            "meta": {}
        });
        let bytes = raw_file(header, &[0u8; 16]);
        assert!(matches!(from_bytes(&bytes), Err(Error::Corrupt(_))));
    }

    #[test]
    fn overlapping_offsets_are_corruption() {
        let header = serde_json::json!({
            "tensors": {
                "a": {"dtype": "f32", "shape": [2], "offset": 0},
                "b": {"dtype": "f32", "shape": [2], "offset": 4}
            },
            "meta": {}
        });
        let bytes = raw_file(header, &[0u8; 16]);
        assert!(matches!(from_bytes(&bytes), Err(Error::Corrupt(_))));
    }

    #[test]
    fn non_f32_dtype_rejected() {
        let header = serde_json::json!({
            "tensors": {"w": {"dtype": "f16", "shape": [2], "offset": 0}},
            "meta": {}
        });
        let bytes = raw_file(header, &[0u8; 4]);
        assert!(matches!(
            from_bytes(&bytes),
            Err(Error::UnsupportedDtype { .. })
        ));
    }

    #[test]
    fn header_length_past_eof_is_corruption() {
        let mut bytes = to_bytes(&one(1.0));
        bytes[8..16].copy_from_slice(&10_000u64.to_le_bytes());
        assert!(matches!(from_bytes(&bytes), Err(Error::Corrupt(_))));
    }

    #[test]
    fn saving_twice_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let ps = one(3.5).with_meta("role", "src");
        let (a, b) = (dir.path().join("a.lscp"), dir.path().join("b.lscp"));
        save_checkpoint(&ps, &a).unwrap();
        save_checkpoint(&ps, &b).unwrap();
        assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
        assert_eq!(load_checkpoint(&a).unwrap(), ps);
    }

    #[test]
    fn content_hash_tracks_values() {
        assert_eq!(content_hash(&one(1.0)), content_hash(&one(1.0)));
        assert_ne!(content_hash(&one(1.0)), content_hash(&one(2.0)));
    }
}
