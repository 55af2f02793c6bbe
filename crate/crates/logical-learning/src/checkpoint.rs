//! Binary model checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic            8 bytes  "LOGLEARN"
//! version          u32      currently 1
//! indicator_width  u32
//! output_count     u32
//! tensor_count     u32      always 10, canonical model order
//! per tensor:      ndim u32, dims u32 x ndim, data f32 x prod(dims)
//! crc32            u32      over every preceding byte
//! ```
//!
//! Only standard-geometry `f32` models are stored; the header's
//! indicator width and output count fully determine every tensor shape,
//! which is validated on load. Writing is deterministic: identical
//! parameters produce identical bytes.

use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::nn::{ModelParams, ModelShape};

pub const MAGIC: [u8; 8] = *b"LOGLEARN";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("bad magic {found:?}, expected {expected:?}")]
    BadMagic { expected: [u8; 8], found: [u8; 8] },
    #[error("unsupported checkpoint version {0}, supported version is {VERSION}")]
    VersionUnsupported(u32),
    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    ChecksumMismatch { stored: u32, computed: u32 },
    #[error("tensor {name}: dims {found:?} do not match expected {expected:?}")]
    ShapeMismatch {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("checkpoint truncated: needed {needed} more bytes, {available} left")]
    Truncated { needed: usize, available: usize },
    #[error("unexpected tensor count {0}, expected 10")]
    BadTensorCount(u32),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Serializes a model to the checkpoint byte format.
pub fn to_bytes(params: &ModelParams<f32>) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + params.parameter_count() * 4);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(params.shape.indicator_width as u32).to_le_bytes());
    out.extend_from_slice(&(params.shape.output_count as u32).to_le_bytes());
    let tensors = params.tensors();
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (_, tensor) in tensors {
        out.extend_from_slice(&(tensor.dims.len() as u32).to_le_bytes());
        for &dim in &tensor.dims {
            out.extend_from_slice(&(dim as u32).to_le_bytes());
        }
        for &value in &tensor.data {
            out.extend_from_slice(&value.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        if self.pos + n > self.bytes.len() {
            return Err(CheckpointError::Truncated {
                needed: self.pos + n - self.bytes.len(),
                available: self.bytes.len() - self.pos,
            });
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        let bytes = self.take(4)?;
        Ok(u32::from_le_bytes(bytes.try_into().expect("four bytes")))
    }
}

/// Deserializes and validates a checkpoint.
pub fn from_bytes(bytes: &[u8]) -> Result<ModelParams<f32>, CheckpointError> {
    if bytes.len() < MAGIC.len() + 4 {
        return Err(CheckpointError::Truncated {
            needed: MAGIC.len() + 4 - bytes.len(),
            available: bytes.len(),
        });
    }
    let found: [u8; 8] = bytes[..8].try_into().expect("eight bytes");
    if found != MAGIC {
        return Err(CheckpointError::BadMagic {
            expected: MAGIC,
            found,
        });
    }

    // Verify the trailing checksum before trusting any field.
    let body_len = bytes.len() - 4;
    let stored = u32::from_le_bytes(bytes[body_len..].try_into().expect("four bytes"));
    let computed = crc32fast::hash(&bytes[..body_len]);
    if stored != computed {
        return Err(CheckpointError::ChecksumMismatch { stored, computed });
    }

    let mut reader = Reader {
        bytes: &bytes[..body_len],
        pos: 8,
    };
    let version = reader.u32()?;
    if version != VERSION {
        return Err(CheckpointError::VersionUnsupported(version));
    }
    let indicator_width = reader.u32()? as usize;
    let output_count = reader.u32()? as usize;
    let tensor_count = reader.u32()?;
    if tensor_count != 10 {
        return Err(CheckpointError::BadTensorCount(tensor_count));
    }

    let shape = ModelShape::standard(indicator_width, output_count);
    let mut params = ModelParams::<f32>::zeros(&shape);
    for (name, tensor) in params.tensors_mut() {
        let ndim = reader.u32()? as usize;
        let mut dims = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            dims.push(reader.u32()? as usize);
        }
        if dims != tensor.dims {
            return Err(CheckpointError::ShapeMismatch {
                name: name.to_string(),
                expected: tensor.dims.clone(),
                found: dims,
            });
        }
        let payload = reader.take(tensor.len() * 4)?;
        for (value, chunk) in tensor.data.iter_mut().zip(payload.chunks_exact(4)) {
            *value = f32::from_le_bytes(chunk.try_into().expect("four bytes"));
        }
    }
    if reader.pos != body_len {
        // Trailing garbage would have broken the checksum unless it was
        // crafted; reject it regardless.
        return Err(CheckpointError::Truncated {
            needed: 0,
            available: body_len - reader.pos,
        });
    }
    Ok(params)
}

pub fn save(params: &ModelParams<f32>, path: &Path) -> Result<(), CheckpointError> {
    fs::write(path, to_bytes(params))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<ModelParams<f32>, CheckpointError> {
    from_bytes(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_params() -> ModelParams<f32> {
        ModelParams::init(&ModelShape::standard(2, 11), 17)
    }

    /// Re-sign a tampered byte buffer so only the tampering is detected.
    fn resign(bytes: &mut [u8]) {
        let body = bytes.len() - 4;
        let crc = crc32fast::hash(&bytes[..body]);
        bytes[body..].copy_from_slice(&crc.to_le_bytes());
    }

    #[test]
    fn round_trip_preserves_every_tensor() {
        let params = sample_params();
        let restored = from_bytes(&to_bytes(&params)).unwrap();
        assert_eq!(params, restored);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        let params = sample_params();
        save(&params, &path).unwrap();
        assert_eq!(load(&path).unwrap(), params);
    }

    #[test]
    fn header_layout_is_stable() {
        let bytes = to_bytes(&sample_params());
        assert_eq!(&bytes[..8], b"LOGLEARN");
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(bytes[16..20].try_into().unwrap()), 11);
        assert_eq!(u32::from_le_bytes(bytes[20..24].try_into().unwrap()), 10);
    }

    #[test]
    fn serialization_is_deterministic() {
        let params = sample_params();
        assert_eq!(to_bytes(&params), to_bytes(&params));
    }

    #[test]
    fn flipped_payload_byte_fails_the_checksum() {
        let mut bytes = to_bytes(&sample_params());
        let middle = bytes.len() / 2;
        bytes[middle] ^= 0x01;
        assert!(matches!(
            from_bytes(&bytes),
            Err(CheckpointError::ChecksumMismatch { .. })
        ));
    }

    #[test]
    fn bad_magic_is_rejected_before_checksum() {
        let mut bytes = to_bytes(&sample_params());
        bytes[0] = b'X';
        assert!(matches!(
            from_bytes(&bytes),
            Err(CheckpointError::BadMagic { .. })
        ));
    }

    #[test]
    fn future_version_is_rejected() {
        let mut bytes = to_bytes(&sample_params());
        bytes[8..12].copy_from_slice(&2u32.to_le_bytes());
        resign(&mut bytes);
        assert!(matches!(
            from_bytes(&bytes),
            Err(CheckpointError::VersionUnsupported(2))
        ));
    }

    #[test]
    fn header_inconsistent_with_tensor_dims_is_rejected() {
        // Claim indicator width 4: fc1.w should then be [592, 200] but
        // the stored dims remain [590, 200].
        let mut bytes = to_bytes(&sample_params());
        bytes[12..16].copy_from_slice(&4u32.to_le_bytes());
        resign(&mut bytes);
        match from_bytes(&bytes) {
            Err(CheckpointError::ShapeMismatch { name, expected, found }) => {
                assert_eq!(name, "fc1.w");
                assert_eq!(expected, vec![592, 200]);
                assert_eq!(found, vec![590, 200]);
            }
            other => panic!("expected shape mismatch, got {other:?}"),
        }
    }

    #[test]
    fn truncation_is_rejected() {
        let bytes = to_bytes(&sample_params());
        let cut = &bytes[..bytes.len() - 9];
        assert!(matches!(
            from_bytes(cut),
            Err(CheckpointError::ChecksumMismatch { .. }) | Err(CheckpointError::Truncated { .. })
        ));
        assert!(matches!(
            from_bytes(&bytes[..6]),
            Err(CheckpointError::Truncated { .. })
        ));
    }

    #[test]
    fn missing_file_surfaces_io_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            load(&dir.path().join("absent.bin")),
            Err(CheckpointError::Io(_))
        ));
    }
}
