//! Dataset ingestion and persistence: IDX image containers, FSA1 feature
//! archives, and the split manifest that ties them together.

pub mod fsa;
pub mod idx;
pub mod manifest;

pub use fsa::{read_feature_archive, write_feature_archive};
pub use idx::{
    attach_labels, read_idx_images, read_idx_labels, write_idx_images, write_idx_labels,
};
pub use manifest::{enforce_disjoint_splits, load_split, DatasetManifest, ManifestClass,
    ManifestSplit};

use crate::error::{Error, Result};

/// Byte cursor with offset-carrying errors shared by the binary readers.
pub(crate) struct ByteReader<'a> {
    bytes: &'a [u8],
    offset: usize,
}

impl<'a> ByteReader<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        ByteReader { bytes, offset: 0 }
    }

    pub(crate) fn offset(&self) -> usize {
        self.offset
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.offset + n > self.bytes.len() {
            return Err(Error::Format(format!(
                "truncated payload at byte offset {} (wanted {} more bytes, {} available)",
                self.offset,
                n,
                self.bytes.len() - self.offset
            )));
        }
        let out = &self.bytes[self.offset..self.offset + n];
        self.offset += n;
        Ok(out)
    }

    pub(crate) fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u32_be(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    pub(crate) fn u32_le(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    pub(crate) fn f32_le(&mut self) -> Result<f32> {
        let b = self.take(4)?;
        Ok(f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    pub(crate) fn expect_end(&self) -> Result<()> {
        if self.offset != self.bytes.len() {
            return Err(Error::Format(format!(
                "{} trailing bytes at offset {}",
                self.bytes.len() - self.offset,
                self.offset
            )));
        }
        Ok(())
    }
}
