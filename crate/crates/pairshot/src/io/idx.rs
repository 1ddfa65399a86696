//! IDX image and label containers (the MNIST on-disk format).
//!
//! Big-endian headers as defined by the format's originators: magic, item
//! count, then rows and cols for image files, followed by row-major
//! unsigned bytes. Readers preserve raw byte values; normalization into
//! [0, 1] is a separate step.

use std::fs;
use std::path::Path;

use crate::data::{ClassId, ImageGrid};
use crate::error::{Error, Result};

use super::ByteReader;

pub const IDX_IMAGE_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABEL_MAGIC: u32 = 0x0000_0801;

/// Decode an IDX image file. Grids carry raw pixel bytes (0..=255) as reals
/// and no class label; use [`attach_labels`] to pair them with a label file.
pub fn read_idx_images(path: &Path) -> Result<Vec<ImageGrid>> {
    decode_idx_images(&fs::read(path)?)
}

pub fn decode_idx_images(bytes: &[u8]) -> Result<Vec<ImageGrid>> {
    let mut reader = ByteReader::new(bytes);
    let magic = reader.u32_be()?;
    if magic != IDX_IMAGE_MAGIC {
        return Err(Error::Format(format!(
            "bad image magic 0x{magic:08x} at byte offset 0 (expected 0x{IDX_IMAGE_MAGIC:08x})"
        )));
    }
    let count = reader.u32_be()? as usize;
    let rows = reader.u32_be()? as usize;
    let cols = reader.u32_be()? as usize;
    let per_item = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::Format(format!("image dimensions {rows}x{cols} overflow")))?;
    count
        .checked_mul(per_item)
        .ok_or_else(|| Error::Format(format!("{count} items of {rows}x{cols} overflow")))?;

    let mut images = Vec::with_capacity(count);
    for _ in 0..count {
        let payload = reader.take(per_item)?;
        let pixels: Vec<f64> = payload.iter().map(|&b| f64::from(b)).collect();
        images.push(ImageGrid::new(pixels, rows, cols, 0, None)?);
    }
    reader.expect_end()?;
    Ok(images)
}

pub fn read_idx_labels(path: &Path) -> Result<Vec<ClassId>> {
    decode_idx_labels(&fs::read(path)?)
}

pub fn decode_idx_labels(bytes: &[u8]) -> Result<Vec<ClassId>> {
    let mut reader = ByteReader::new(bytes);
    let magic = reader.u32_be()?;
    if magic != IDX_LABEL_MAGIC {
        return Err(Error::Format(format!(
            "bad label magic 0x{magic:08x} at byte offset 0 (expected 0x{IDX_LABEL_MAGIC:08x})"
        )));
    }
    let count = reader.u32_be()? as usize;
    let mut labels = Vec::with_capacity(count);
    for _ in 0..count {
        labels.push(ClassId::from(reader.u8()?));
    }
    reader.expect_end()?;
    Ok(labels)
}

/// Assign labels to images by index. The counts must agree.
pub fn attach_labels(images: Vec<ImageGrid>, labels: &[ClassId]) -> Result<Vec<ImageGrid>> {
    if images.len() != labels.len() {
        return Err(Error::Format(format!(
            "{} images but {} labels",
            images.len(),
            labels.len()
        )));
    }
    Ok(images
        .into_iter()
        .zip(labels)
        .map(|(img, &label)| img.with_class(label))
        .collect())
}

/// Encode images whose pixels are integral byte values in [0, 255].
pub fn write_idx_images(path: &Path, images: &[ImageGrid]) -> Result<()> {
    let (rows, cols) = match images.first() {
        Some(img) => (img.height(), img.width()),
        None => (0, 0),
    };
    let mut bytes = Vec::new();
    bytes.extend_from_slice(&IDX_IMAGE_MAGIC.to_be_bytes());
    bytes.extend_from_slice(&(images.len() as u32).to_be_bytes());
    bytes.extend_from_slice(&(rows as u32).to_be_bytes());
    bytes.extend_from_slice(&(cols as u32).to_be_bytes());
    for (i, img) in images.iter().enumerate() {
        if img.height() != rows || img.width() != cols {
            return Err(Error::invalid(format!(
                "image {} is {}x{}, expected {}x{}",
                i,
                img.height(),
                img.width(),
                rows,
                cols
            )));
        }
        for &p in img.pixels() {
            if !(0.0..=255.0).contains(&p) || p.fract() != 0.0 {
                return Err(Error::invalid(format!(
                    "image {i} pixel {p} is not an integral byte value"
                )));
            }
            bytes.push(p as u8);
        }
    }
    fs::write(path, bytes)?;
    Ok(())
}

pub fn write_idx_labels(path: &Path, labels: &[ClassId]) -> Result<()> {
    let mut bytes = Vec::new();
    bytes.extend_from_slice(&IDX_LABEL_MAGIC.to_be_bytes());
    bytes.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    for &label in labels {
        let byte = u8::try_from(label).map_err(|_| {
            Error::invalid(format!("label {label} does not fit the IDX byte range"))
        })?;
        bytes.push(byte);
    }
    fs::write(path, bytes)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture(name: &str) -> std::path::PathBuf {
        std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("tests/fixtures")
            .join(name)
    }

    #[test]
    fn minimal_image_fixture_decodes_to_documented_bytes() {
        // Documented contents: one 2x2 image with bytes [0, 255, 128, 7].
        let images = read_idx_images(&fixture("minimal_images.idx")).unwrap();
        assert_eq!(images.len(), 1);
        assert_eq!(images[0].height(), 2);
        assert_eq!(images[0].width(), 2);
        assert_eq!(images[0].pixels(), &[0.0, 255.0, 128.0, 7.0]);
    }

    #[test]
    fn minimal_label_fixture_decodes_to_documented_bytes() {
        // Documented contents: labels [7, 0, 4].
        let labels = read_idx_labels(&fixture("minimal_labels.idx")).unwrap();
        assert_eq!(labels, vec![7, 0, 4]);
    }

    #[test]
    fn empty_image_fixture_is_an_empty_list() {
        let images = read_idx_images(&fixture("empty_images.idx")).unwrap();
        assert!(images.is_empty());
    }

    #[test]
    fn label_magic_passed_to_image_reader_is_a_format_error() {
        let err = read_idx_images(&fixture("wrong_magic.idx")).unwrap_err();
        assert!(matches!(err, Error::Format(_)));
        assert!(err.to_string().contains("0x00000801"), "{err}");
    }

    #[test]
    fn truncated_payload_reports_offset() {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&IDX_IMAGE_MAGIC.to_be_bytes());
        bytes.extend_from_slice(&2u32.to_be_bytes());
        bytes.extend_from_slice(&2u32.to_be_bytes());
        bytes.extend_from_slice(&2u32.to_be_bytes());
        bytes.extend_from_slice(&[1, 2, 3, 4, 5]); // 8 needed
        let err = decode_idx_images(&bytes).unwrap_err();
        assert!(matches!(err, Error::Format(_)));
        assert!(err.to_string().contains("offset"), "{err}");
    }

    #[test]
    fn label_count_mismatch_is_a_consistency_error() {
        let images = vec![
            ImageGrid::new(vec![0.0], 1, 1, 0, None).unwrap(),
            ImageGrid::new(vec![1.0], 1, 1, 0, None).unwrap(),
        ];
        assert!(attach_labels(images.clone(), &[3]).is_err());
        let labelled = attach_labels(images, &[3, 9]).unwrap();
        assert_eq!(labelled[0].class_id(), 3);
        assert_eq!(labelled[1].class_id(), 9);
    }

    #[test]
    fn write_then_read_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let img_path = dir.path().join("imgs.idx");
        let lbl_path = dir.path().join("lbls.idx");
        let images = vec![
            ImageGrid::new(vec![0.0, 1.0, 254.0, 255.0, 9.0, 17.0], 2, 3, 4, None).unwrap(),
            ImageGrid::new(vec![5.0, 6.0, 7.0, 8.0, 9.0, 10.0], 2, 3, 2, None).unwrap(),
        ];
        write_idx_images(&img_path, &images).unwrap();
        write_idx_labels(&lbl_path, &[4, 2]).unwrap();
        let restored = attach_labels(
            read_idx_images(&img_path).unwrap(),
            &read_idx_labels(&lbl_path).unwrap(),
        )
        .unwrap();
        assert_eq!(restored, images);
    }

    #[test]
    fn non_byte_pixels_rejected_on_write() {
        let dir = tempfile::tempdir().unwrap();
        let img = ImageGrid::new(vec![0.5], 1, 1, 0, None).unwrap();
        assert!(write_idx_images(&dir.path().join("x.idx"), &[img]).is_err());
    }
}
