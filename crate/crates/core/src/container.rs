//! Portable tensor container: the on-disk format for depth maps and
//! affordance tensors.
//!
//! Layout: 8-byte magic `GRSPTNSR`, a little-endian u32 header length, a
//! UTF-8 JSON header describing the tensors, then the packed payload.
//! Tensor data is float32, little-endian, row-major; `byte_offset` is
//! relative to the start of the payload. The writer packs tensors in
//! insertion order with no padding, so write/read/write is byte-identical.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const CONTAINER_MAGIC: &[u8; 8] = b"GRSPTNSR";

const MAX_HEADER_LEN: u32 = 16 * 1024 * 1024;

#[derive(Debug, Error)]
pub enum ContainerError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("bad magic: not a tensor container")]
    BadMagic,
    #[error("malformed header: {0}")]
    BadHeader(String),
    #[error("unsupported dtype {0:?} (only \"f32\" in v1)")]
    UnsupportedDtype(String),
    #[error("tensor {name:?}: shape {shape:?} does not match {len} elements")]
    ShapeMismatch {
        name: String,
        shape: Vec<usize>,
        len: usize,
    },
    #[error("tensor {0:?} overlaps another tensor or exceeds the payload")]
    BadLayout(String),
    #[error("container has no tensor named {0:?}")]
    MissingTensor(String),
    #[error("duplicate tensor name {0:?}")]
    DuplicateName(String),
}

#[derive(Serialize, Deserialize)]
struct HeaderTensor {
    name: String,
    dtype: String,
    shape: Vec<usize>,
    byte_offset: u64,
}

#[derive(Serialize, Deserialize)]
struct Header {
    tensors: Vec<HeaderTensor>,
}

/// An ordered set of named f32 tensors.
#[derive(Debug, Clone, Default)]
pub struct TensorContainer {
    tensors: Vec<(String, Vec<usize>, Vec<f32>)>,
}

impl TensorContainer {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a tensor. The shape product must equal the data length and
    /// every dimension must be positive.
    pub fn insert(
        &mut self,
        name: &str,
        shape: Vec<usize>,
        data: Vec<f32>,
    ) -> Result<(), ContainerError> {
        if self.tensors.iter().any(|(n, _, _)| n == name) {
            return Err(ContainerError::DuplicateName(name.into()));
        }
        let count: usize = shape.iter().product();
        if shape.is_empty() || shape.contains(&0) || count != data.len() {
            return Err(ContainerError::ShapeMismatch {
                name: name.into(),
                shape,
                len: data.len(),
            });
        }
        self.tensors.push((name.into(), shape, data));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<(&[usize], &[f32])> {
        self.tensors
            .iter()
            .find(|(n, _, _)| n == name)
            .map(|(_, shape, data)| (shape.as_slice(), data.as_slice()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.iter().map(|(n, _, _)| n.as_str())
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<(), ContainerError> {
        let mut header = Header {
            tensors: Vec::with_capacity(self.tensors.len()),
        };
        let mut offset = 0u64;
        for (name, shape, data) in &self.tensors {
            header.tensors.push(HeaderTensor {
                name: name.clone(),
                dtype: "f32".into(),
                shape: shape.clone(),
                byte_offset: offset,
            });
            offset += (data.len() * 4) as u64;
        }
        let header_json =
            serde_json::to_vec(&header).map_err(|e| ContainerError::BadHeader(e.to_string()))?;
        w.write_all(CONTAINER_MAGIC)?;
        w.write_all(&(header_json.len() as u32).to_le_bytes())?;
        w.write_all(&header_json)?;
        for (_, _, data) in &self.tensors {
            for v in data {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read<R: Read>(mut r: R) -> Result<Self, ContainerError> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != CONTAINER_MAGIC {
            return Err(ContainerError::BadMagic);
        }
        let mut len_bytes = [0u8; 4];
        r.read_exact(&mut len_bytes)?;
        let header_len = u32::from_le_bytes(len_bytes);
        if header_len == 0 || header_len > MAX_HEADER_LEN {
            return Err(ContainerError::BadHeader(format!(
                "header length {header_len} out of range"
            )));
        }
        let mut header_bytes = vec![0u8; header_len as usize];
        r.read_exact(&mut header_bytes)?;
        let header: Header = serde_json::from_slice(&header_bytes)
            .map_err(|e| ContainerError::BadHeader(e.to_string()))?;
        let mut payload = Vec::new();
        r.read_to_end(&mut payload)?;

        // Validate the layout: in-bounds, non-overlapping.
        let mut spans: Vec<(u64, u64, &str)> = Vec::new();
        for t in &header.tensors {
            if t.dtype != "f32" {
                return Err(ContainerError::UnsupportedDtype(t.dtype.clone()));
            }
            if t.shape.is_empty() || t.shape.contains(&0) {
                return Err(ContainerError::ShapeMismatch {
                    name: t.name.clone(),
                    shape: t.shape.clone(),
                    len: 0,
                });
            }
            let count: usize = t.shape.iter().product();
            let bytes = (count * 4) as u64;
            let end = t
                .byte_offset
                .checked_add(bytes)
                .ok_or_else(|| ContainerError::BadLayout(t.name.clone()))?;
            if end > payload.len() as u64 {
                return Err(ContainerError::BadLayout(t.name.clone()));
            }
            spans.push((t.byte_offset, end, &t.name));
        }
        let mut sorted = spans.clone();
        sorted.sort_by_key(|(start, _, _)| *start);
        for pair in sorted.windows(2) {
            if pair[1].0 < pair[0].1 {
                return Err(ContainerError::BadLayout(pair[1].2.into()));
            }
        }

        let mut out = TensorContainer::new();
        for t in &header.tensors {
            let count: usize = t.shape.iter().product();
            let start = t.byte_offset as usize;
            let mut data = Vec::with_capacity(count);
            for i in 0..count {
                let b = &payload[start + i * 4..start + i * 4 + 4];
                data.push(f32::from_le_bytes([b[0], b[1], b[2], b[3]]));
            }
            out.insert(&t.name, t.shape.clone(), data)?;
        }
        Ok(out)
    }

    pub fn write_path(&self, path: &Path) -> Result<(), ContainerError> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn read_path(path: &Path) -> Result<Self, ContainerError> {
        Self::read(BufReader::new(File::open(path)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_byte_identical() {
        let mut c = TensorContainer::new();
        c.insert("depth", vec![2, 3], vec![0.5, 1.0, 1.5, 2.0, 2.5, 3.0])
            .unwrap();
        c.insert("mask", vec![1, 2, 3], vec![0.0, 1.0, 0.0, 1.0, 0.25, -2.5])
            .unwrap();
        let mut bytes = Vec::new();
        c.write(&mut bytes).unwrap();
        let c2 = TensorContainer::read(&bytes[..]).unwrap();
        let mut bytes2 = Vec::new();
        c2.write(&mut bytes2).unwrap();
        assert_eq!(bytes, bytes2);
        assert_eq!(c2.get("depth").unwrap().0, &[2, 3]);
        assert_eq!(c2.get("mask").unwrap().1[5], -2.5);
    }

    #[test]
    fn rejects_bad_magic() {
        let bytes = b"NOTMAGIC\x00\x00\x00\x00".to_vec();
        assert!(matches!(
            TensorContainer::read(&bytes[..]),
            Err(ContainerError::BadMagic)
        ));
    }

    #[test]
    fn rejects_shape_mismatch() {
        let mut c = TensorContainer::new();
        assert!(matches!(
            c.insert("t", vec![2, 2], vec![1.0]),
            Err(ContainerError::ShapeMismatch { .. })
        ));
        assert!(matches!(
            c.insert("t", vec![], vec![]),
            Err(ContainerError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn rejects_overlapping_offsets() {
        // Hand-build a header with two tensors sharing bytes.
        let header = br#"{"tensors":[{"name":"a","dtype":"f32","shape":[2],"byte_offset":0},{"name":"b","dtype":"f32","shape":[2],"byte_offset":4}]}"#;
        let mut bytes = Vec::new();
        bytes.extend_from_slice(CONTAINER_MAGIC);
        bytes.extend_from_slice(&(header.len() as u32).to_le_bytes());
        bytes.extend_from_slice(header);
        bytes.extend_from_slice(&[0u8; 12]);
        assert!(matches!(
            TensorContainer::read(&bytes[..]),
            Err(ContainerError::BadLayout(_))
        ));
    }

    #[test]
    fn rejects_unsupported_dtype() {
        let header = br#"{"tensors":[{"name":"a","dtype":"f64","shape":[1],"byte_offset":0}]}"#;
        let mut bytes = Vec::new();
        bytes.extend_from_slice(CONTAINER_MAGIC);
        bytes.extend_from_slice(&(header.len() as u32).to_le_bytes());
        bytes.extend_from_slice(header);
        bytes.extend_from_slice(&[0u8; 8]);
        assert!(matches!(
            TensorContainer::read(&bytes[..]),
            Err(ContainerError::UnsupportedDtype(_))
        ));
    }

    #[test]
    fn rejects_duplicate_names() {
        let mut c = TensorContainer::new();
        c.insert("t", vec![1], vec![1.0]).unwrap();
        assert!(matches!(
            c.insert("t", vec![1], vec![2.0]),
            Err(ContainerError::DuplicateName(_))
        ));
    }
}
