//! Parameter checkpoint files.
//!
//! Versioned binary container: magic bytes, format version, a digest of the
//! network spec, then each parameter tensor as a shape header plus
//! little-endian 32-bit floats. Loading verifies the digest so a checkpoint
//! cannot silently be applied to a different architecture.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

use super::{LayerSpec, NetworkParams, NetworkSpec};

const MAGIC: &[u8; 4] = b"PSCK";
const VERSION: u32 = 1;

/// FNV-1a digest of a canonical rendering of the network spec.
pub fn spec_digest(spec: &NetworkSpec) -> u64 {
    let mut text = format!("in={:?};embed={};", spec.input_shape(), spec.embed_layer());
    for layer in spec.layers() {
        match layer {
            LayerSpec::Affine { units } => text.push_str(&format!("affine({units});")),
            LayerSpec::Relu => text.push_str("relu;"),
            LayerSpec::Conv2d {
                filters,
                kernel_h,
                kernel_w,
            } => text.push_str(&format!("conv2d({filters},{kernel_h},{kernel_w});")),
            LayerSpec::MaxPool2d { pool_h, pool_w } => {
                text.push_str(&format!("maxpool2d({pool_h},{pool_w});"))
            }
            LayerSpec::Flatten => text.push_str("flatten;"),
        }
    }
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in text.as_bytes() {
        hash ^= u64::from(*byte);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

pub fn save_checkpoint(path: &Path, spec: &NetworkSpec, params: &NetworkParams) -> Result<()> {
    let mut bytes = Vec::new();
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&VERSION.to_le_bytes());
    bytes.extend_from_slice(&spec_digest(spec).to_le_bytes());
    let tensors = params.tensors();
    bytes.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for tensor in tensors {
        bytes.extend_from_slice(&(tensor.shape().len() as u32).to_le_bytes());
        for &dim in tensor.shape() {
            bytes.extend_from_slice(&(dim as u32).to_le_bytes());
        }
        for &v in tensor.data() {
            bytes.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    fs::write(path, bytes)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path, spec: &NetworkSpec) -> Result<NetworkParams> {
    let bytes = fs::read(path)?;
    let mut reader = Reader::new(&bytes);
    let magic = reader.take(4)?;
    if magic != MAGIC {
        return Err(Error::Format(format!(
            "checkpoint magic mismatch at offset 0: {:02x?}",
            magic
        )));
    }
    let version = reader.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!(
            "unsupported checkpoint version {version}"
        )));
    }
    let digest = reader.u64()?;
    if digest != spec_digest(spec) {
        return Err(Error::Format(
            "checkpoint spec digest does not match the requested architecture".into(),
        ));
    }
    let count = reader.u32()? as usize;
    let mut params = NetworkParams::zeros(spec);
    {
        let expected = params.tensors_mut();
        if count != expected.len() {
            return Err(Error::Format(format!(
                "checkpoint has {} tensors, spec needs {}",
                count,
                expected.len()
            )));
        }
        for tensor in expected {
            let ndim = reader.u32()? as usize;
            let mut shape = Vec::with_capacity(ndim);
            for _ in 0..ndim {
                shape.push(reader.u32()? as usize);
            }
            if shape != tensor.shape() {
                return Err(Error::Format(format!(
                    "checkpoint tensor shape {:?} does not match spec shape {:?}",
                    shape,
                    tensor.shape()
                )));
            }
            for v in tensor.data_mut() {
                *v = f64::from(reader.f32()?);
            }
        }
    }
    if !reader.at_end() {
        return Err(Error::Format(format!(
            "trailing bytes at offset {}",
            reader.offset
        )));
    }
    Ok(params)
}

struct Reader<'a> {
    bytes: &'a [u8],
    offset: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Reader { bytes, offset: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.offset + n > self.bytes.len() {
            return Err(Error::Format(format!(
                "truncated at offset {} (wanted {} more bytes)",
                self.offset, n
            )));
        }
        let slice = &self.bytes[self.offset..self.offset + n];
        self.offset += n;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn u64(&mut self) -> Result<u64> {
        let b = self.take(8)?;
        Ok(u64::from_le_bytes([
            b[0], b[1], b[2], b[3], b[4], b[5], b[6], b[7],
        ]))
    }

    fn f32(&mut self) -> Result<f32> {
        let b = self.take(4)?;
        Ok(f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn at_end(&self) -> bool {
        self.offset == self.bytes.len()
    }
}

/// Round-trip helper for tests wanting f32 semantics in memory too (a saved
/// checkpoint stores f32, so values round on the way out).
#[cfg(test)]
pub(crate) fn quantize_to_f32(tensor: &mut crate::tensor::Tensor) {
    for v in tensor.data_mut() {
        *v = f64::from(*v as f32);
    }
}

#[cfg(test)]
mod tests {
    use super::super::{init_params, LayerSpec, NetworkSpec};
    use super::*;

    fn spec_a() -> NetworkSpec {
        NetworkSpec::new(
            vec![4],
            vec![
                LayerSpec::Affine { units: 3 },
                LayerSpec::Relu,
                LayerSpec::Affine { units: 2 },
            ],
        )
        .unwrap()
    }

    #[test]
    fn round_trip_preserves_f32_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.psck");
        let spec = spec_a();
        let mut params = init_params(&spec, 17);
        for t in params.tensors_mut() {
            quantize_to_f32(t);
        }
        save_checkpoint(&path, &spec, &params).unwrap();
        let loaded = load_checkpoint(&path, &spec).unwrap();
        assert_eq!(loaded, params);
    }

    #[test]
    fn digest_mismatch_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.psck");
        let spec = spec_a();
        let params = init_params(&spec, 17);
        save_checkpoint(&path, &spec, &params).unwrap();

        let other =
            NetworkSpec::new(vec![4], vec![LayerSpec::Affine { units: 5 }]).unwrap();
        let err = load_checkpoint(&path, &other).unwrap_err();
        assert!(matches!(err, Error::Format(_)), "{err}");
    }

    #[test]
    fn truncation_and_bad_magic_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.psck");
        let spec = spec_a();
        let params = init_params(&spec, 17);
        save_checkpoint(&path, &spec, &params).unwrap();

        let bytes = std::fs::read(&path).unwrap();
        let truncated = &bytes[..bytes.len() - 3];
        std::fs::write(&path, truncated).unwrap();
        assert!(matches!(
            load_checkpoint(&path, &spec).unwrap_err(),
            Error::Format(_)
        ));

        let mut corrupt = bytes.clone();
        corrupt[0] = b'X';
        std::fs::write(&path, corrupt).unwrap();
        assert!(matches!(
            load_checkpoint(&path, &spec).unwrap_err(),
            Error::Format(_)
        ));
    }
}
