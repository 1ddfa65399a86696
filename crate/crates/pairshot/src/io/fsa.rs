//! FSA1 feature archives: precomputed speech feature matrices with class and
//! speaker metadata.
//!
//! Layout (all integers little-endian): magic "FSA1", item count u32, then
//! per item class id u32, speaker id u32, frame count u32, dim u32, followed
//! by frames × dim little-endian f32 values. Values must be finite.

use std::fs;
use std::path::Path;

use crate::data::FeatureSequence;
use crate::error::{Error, Result};

use super::ByteReader;

pub const FSA_MAGIC: &[u8; 4] = b"FSA1";

pub fn read_feature_archive(path: &Path) -> Result<Vec<FeatureSequence>> {
    decode_feature_archive(&fs::read(path)?)
}

pub fn decode_feature_archive(bytes: &[u8]) -> Result<Vec<FeatureSequence>> {
    let mut reader = ByteReader::new(bytes);
    let magic = reader.take(4)?;
    if magic != FSA_MAGIC {
        return Err(Error::Format(format!(
            "bad archive magic {magic:02x?} at byte offset 0 (expected \"FSA1\")"
        )));
    }
    let count = reader.u32_le()? as usize;
    let mut sequences = Vec::with_capacity(count);
    for item in 0..count {
        let class_id = reader.u32_le()?;
        let speaker_id = reader.u32_le()?;
        let frames = reader.u32_le()? as usize;
        let dim = reader.u32_le()? as usize;
        if frames == 0 || dim == 0 {
            return Err(Error::Format(format!(
                "item {item} declares {frames} frames x {dim} dims at byte offset {}",
                reader.offset()
            )));
        }
        let mut flat = Vec::with_capacity(frames * dim);
        for _ in 0..frames * dim {
            let v = reader.f32_le()?;
            if !v.is_finite() {
                return Err(Error::Format(format!(
                    "non-finite feature value in item {item} near byte offset {}",
                    reader.offset()
                )));
            }
            flat.push(f64::from(v));
        }
        sequences.push(FeatureSequence::from_flat(flat, dim, class_id, speaker_id)?);
    }
    reader.expect_end()?;
    Ok(sequences)
}

/// Values are stored as f32; inputs are expected to be f32-representable
/// (the synthetic generator rounds through f32), so write∘read is identity.
pub fn write_feature_archive(path: &Path, sequences: &[FeatureSequence]) -> Result<()> {
    fs::write(path, encode_feature_archive(sequences)?)?;
    Ok(())
}

pub fn encode_feature_archive(sequences: &[FeatureSequence]) -> Result<Vec<u8>> {
    let mut bytes = Vec::new();
    bytes.extend_from_slice(FSA_MAGIC);
    bytes.extend_from_slice(&(sequences.len() as u32).to_le_bytes());
    for (i, seq) in sequences.iter().enumerate() {
        bytes.extend_from_slice(&seq.class_id().to_le_bytes());
        bytes.extend_from_slice(&seq.speaker_id().to_le_bytes());
        bytes.extend_from_slice(&(seq.num_frames() as u32).to_le_bytes());
        bytes.extend_from_slice(&(seq.dim() as u32).to_le_bytes());
        for &v in seq.frames_flat() {
            if !v.is_finite() {
                return Err(Error::invalid(format!("non-finite feature value in item {i}")));
            }
            bytes.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    Ok(bytes)
}
