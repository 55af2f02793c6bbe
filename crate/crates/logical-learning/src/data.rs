//! MNIST IDX ingest: parsing, validation, and normalized image views.
//!
//! Files are the canonical big-endian IDX containers (images magic
//! `0x00000803`, labels magic `0x00000801`). Gzip-compressed files are
//! decompressed transparently. Ingest never shuffles; ordering is exactly
//! the file order.

use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;
use thiserror::Error;

/// Side length of every image this crate handles.
pub const IMAGE_SIDE: usize = 28;
/// Pixels per image.
pub const IMAGE_PIXELS: usize = IMAGE_SIDE * IMAGE_SIDE;
/// Number of digit classes.
pub const DIGITS: usize = 10;

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("bad magic number {found:#010x}, expected {expected:#010x}")]
    BadMagic { expected: u32, found: u32 },
    #[error("truncated file: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("label {label} at index {index} is outside 0..=9")]
    LabelOutOfRange { index: usize, label: u8 },
    #[error("unsupported image shape {rows}x{cols}; only 28x28 is handled")]
    UnsupportedShape { rows: u32, cols: u32 },
    #[error("{images} images but {labels} labels")]
    CountMismatch { images: usize, labels: usize },
    #[error("missing data file {0} (also tried {0}.gz)")]
    MissingFile(PathBuf),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Which half of the canonical train/test pair a [`Dataset`] holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    /// Canonical MNIST file names for this split, `(images, labels)`.
    pub fn file_names(self) -> (&'static str, &'static str) {
        match self {
            Split::Train => ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
            Split::Test => ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
        }
    }
}

/// One 28x28 grayscale image with pixels normalized to `[0, 1]` and its
/// digit label.
#[derive(Clone, Debug)]
pub struct LabeledImage {
    pub pixels: Vec<f32>,
    pub label: u8,
}

/// A labeled image collection. Raw bytes are kept as the source of truth;
/// normalization happens on access.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    images: Vec<[u8; IMAGE_PIXELS]>,
    labels: Vec<u8>,
    split: Split,
}

impl Dataset {
    /// Pairs parsed images with labels. The counts must match.
    pub fn new(
        images: Vec<[u8; IMAGE_PIXELS]>,
        labels: Vec<u8>,
        split: Split,
    ) -> Result<Self, DataError> {
        if images.len() != labels.len() {
            return Err(DataError::CountMismatch {
                images: images.len(),
                labels: labels.len(),
            });
        }
        if let Some(index) = labels.iter().position(|&l| l >= DIGITS as u8) {
            return Err(DataError::LabelOutOfRange {
                index,
                label: labels[index],
            });
        }
        Ok(Dataset {
            images,
            labels,
            split,
        })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn label(&self, index: usize) -> u8 {
        self.labels[index]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    /// Raw 0-255 pixel matrix in row-major order.
    pub fn image_raw(&self, index: usize) -> &[u8; IMAGE_PIXELS] {
        &self.images[index]
    }

    /// Normalized `[0, 1]` pixel matrix.
    pub fn image_normalized(&self, index: usize) -> [f32; IMAGE_PIXELS] {
        normalize(self.image_raw(index))
    }

    pub fn labeled(&self, index: usize) -> LabeledImage {
        LabeledImage {
            pixels: self.image_normalized(index).to_vec(),
            label: self.label(index),
        }
    }

    /// Re-encodes the raw images and labels as IDX byte streams,
    /// `(images, labels)`. Round-trips bit-exactly through the parsers.
    pub fn to_idx_bytes(&self) -> (Vec<u8>, Vec<u8>) {
        (write_idx_images(&self.images), write_idx_labels(&self.labels))
    }
}

fn read_u32_be(bytes: &[u8], offset: usize) -> Option<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
}

/// Parses an IDX image container into raw 28x28 pixel matrices.
pub fn parse_idx_images(bytes: &[u8]) -> Result<Vec<[u8; IMAGE_PIXELS]>, DataError> {
    let magic = read_u32_be(bytes, 0).ok_or(DataError::Truncated {
        expected: 16,
        found: bytes.len(),
    })?;
    if magic != IMAGES_MAGIC {
        return Err(DataError::BadMagic {
            expected: IMAGES_MAGIC,
            found: magic,
        });
    }
    let count = read_u32_be(bytes, 4).ok_or(DataError::Truncated {
        expected: 16,
        found: bytes.len(),
    })? as usize;
    let rows = read_u32_be(bytes, 8).ok_or(DataError::Truncated {
        expected: 16,
        found: bytes.len(),
    })?;
    let cols = read_u32_be(bytes, 12).ok_or(DataError::Truncated {
        expected: 16,
        found: bytes.len(),
    })?;
    if rows != IMAGE_SIDE as u32 || cols != IMAGE_SIDE as u32 {
        return Err(DataError::UnsupportedShape { rows, cols });
    }
    let expected = 16 + count * IMAGE_PIXELS;
    if bytes.len() != expected {
        return Err(DataError::Truncated {
            expected,
            found: bytes.len(),
        });
    }
    Ok(bytes[16..]
        .chunks_exact(IMAGE_PIXELS)
        .map(|chunk| {
            let mut image = [0u8; IMAGE_PIXELS];
            image.copy_from_slice(chunk);
            image
        })
        .collect())
}

/// Parses an IDX label container into digit labels.
pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>, DataError> {
    let magic = read_u32_be(bytes, 0).ok_or(DataError::Truncated {
        expected: 8,
        found: bytes.len(),
    })?;
    if magic != LABELS_MAGIC {
        return Err(DataError::BadMagic {
            expected: LABELS_MAGIC,
            found: magic,
        });
    }
    let count = read_u32_be(bytes, 4).ok_or(DataError::Truncated {
        expected: 8,
        found: bytes.len(),
    })? as usize;
    let expected = 8 + count;
    if bytes.len() != expected {
        return Err(DataError::Truncated {
            expected,
            found: bytes.len(),
        });
    }
    let labels = bytes[8..].to_vec();
    if let Some(index) = labels.iter().position(|&l| l >= DIGITS as u8) {
        return Err(DataError::LabelOutOfRange {
            index,
            label: labels[index],
        });
    }
    Ok(labels)
}

/// Encodes raw pixel matrices as an IDX image container.
pub fn write_idx_images(images: &[[u8; IMAGE_PIXELS]]) -> Vec<u8> {
    let mut bytes = Vec::with_capacity(16 + images.len() * IMAGE_PIXELS);
    bytes.extend_from_slice(&IMAGES_MAGIC.to_be_bytes());
    bytes.extend_from_slice(&(images.len() as u32).to_be_bytes());
    bytes.extend_from_slice(&(IMAGE_SIDE as u32).to_be_bytes());
    bytes.extend_from_slice(&(IMAGE_SIDE as u32).to_be_bytes());
    for image in images {
        bytes.extend_from_slice(image);
    }
    bytes
}

/// Encodes digit labels as an IDX label container.
pub fn write_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut bytes = Vec::with_capacity(8 + labels.len());
    bytes.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    bytes.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    bytes.extend_from_slice(labels);
    bytes
}

/// Maps raw 0-255 pixels to `[0, 1]` by dividing by 255.
pub fn normalize(raw: &[u8; IMAGE_PIXELS]) -> [f32; IMAGE_PIXELS] {
    let mut out = [0f32; IMAGE_PIXELS];
    for (o, &b) in out.iter_mut().zip(raw.iter()) {
        *o = f32::from(b) / 255.0;
    }
    out
}

/// Reads a file, decompressing gzip content (detected by its magic bytes)
/// transparently.
fn read_maybe_gzipped(path: &Path) -> Result<Vec<u8>, DataError> {
    let mut raw = Vec::new();
    File::open(path)?.read_to_end(&mut raw)?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut decoded = Vec::new();
        GzDecoder::new(raw.as_slice()).read_to_end(&mut decoded)?;
        Ok(decoded)
    } else {
        Ok(raw)
    }
}

fn resolve_file(dir: &Path, name: &str) -> Result<PathBuf, DataError> {
    let plain = dir.join(name);
    if plain.exists() {
        return Ok(plain);
    }
    let gz = dir.join(format!("{name}.gz"));
    if gz.exists() {
        return Ok(gz);
    }
    Err(DataError::MissingFile(plain))
}

/// Loads one split from a directory laid out with the canonical MNIST
/// file names (optionally gzip-compressed).
pub fn load_split(dir: &Path, split: Split) -> Result<Dataset, DataError> {
    let (image_name, label_name) = split.file_names();
    let image_bytes = read_maybe_gzipped(&resolve_file(dir, image_name)?)?;
    let label_bytes = read_maybe_gzipped(&resolve_file(dir, label_name)?)?;
    let images = parse_idx_images(&image_bytes)?;
    let labels = parse_idx_labels(&label_bytes)?;
    Dataset::new(images, labels, split)
}
