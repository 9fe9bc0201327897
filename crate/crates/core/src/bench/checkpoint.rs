//! Model checkpoints.
//!
//! Layout: the 5-byte magic `CLCK1` (the last byte is the format version),
//! the payload length as a little-endian `u64`, the SHA-256 of the payload,
//! then the payload itself: compact JSON of the model spec and parameters.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::models::{Model, ModelRecord};

pub const MAGIC: &[u8; 5] = b"CLCK1";
const HEADER_LEN: usize = MAGIC.len() + 8 + 32;

pub fn encode(model: &Model) -> Result<Vec<u8>> {
    let payload = serde_json::to_vec(&model.to_record())?;
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(&Sha256::digest(&payload));
    out.extend_from_slice(&payload);
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<Model> {
    let magic = &MAGIC[..MAGIC.len() - 1];
    if bytes.len() < MAGIC.len() || !bytes.starts_with(magic) {
        return Err(Error::Checkpoint("not a checkpoint file".into()));
    }
    let version = bytes[MAGIC.len() - 1];
    if version != MAGIC[MAGIC.len() - 1] {
        return Err(Error::Checkpoint(format!(
            "unsupported checkpoint version '{}'",
            char::from(version)
        )));
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Checkpoint(
            "checksum mismatch: header truncated".into(),
        ));
    }
    let mut len = [0u8; 8];
    len.copy_from_slice(&bytes[MAGIC.len()..MAGIC.len() + 8]);
    let len = u64::from_le_bytes(len);
    let digest = &bytes[MAGIC.len() + 8..HEADER_LEN];
    let payload = &bytes[HEADER_LEN..];
    if payload.len() as u64 != len || Sha256::digest(payload).as_slice() != digest {
        return Err(Error::Checkpoint(format!(
            "checksum mismatch: expected {len} payload bytes, found {}",
            payload.len()
        )));
    }
    let record: ModelRecord = serde_json::from_slice(payload)
        .map_err(|e| Error::Checkpoint(format!("bad payload: {e}")))?;
    Model::from_record(record)
}

pub fn save(model: &Model, path: &Path) -> Result<()> {
    fs::write(path, encode(model)?)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Model> {
    decode(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activations::Variant;
    use crate::autodiff::Tensor;
    use crate::models::ModelSpec;
    use crate::rng::SeededRng;

    fn model(variant: Variant) -> Model {
        let spec = ModelSpec {
            width: 5,
            ..ModelSpec::synthetic(3, variant)
        };
        let mut m = Model::build(spec, &mut SeededRng::new(4, 3)).unwrap();
        let mut rng = SeededRng::new(5, 0);
        for p in m.parameters_mut() {
            for v in p.data_mut() {
                *v += rng.normal() * 0.1;
            }
        }
        m
    }

    #[test]
    fn round_trip_is_lossless() {
        for v in [Variant::ClExtrapolate, Variant::PcsCl, Variant::Relu] {
            let m = model(v);
            let bytes = encode(&m).unwrap();
            let back = decode(&bytes).unwrap();
            assert_eq!(back, m);
            assert_eq!(encode(&back).unwrap(), bytes);
            let x = Tensor::new(vec![2, 3], vec![0.1, -0.5, 0.9, 2.0, -3.0, 0.0]).unwrap();
            assert_eq!(back.predict(&x).unwrap(), m.predict(&x).unwrap());
        }
    }

    #[test]
    fn corruption_is_detected() {
        let bytes = encode(&model(Variant::ClExtrapolate)).unwrap();
        let truncated = &bytes[..bytes.len() - 7];
        let err = decode(truncated).unwrap_err().to_string();
        assert!(err.contains("checksum"), "{err}");
        assert!(decode(&bytes[..20])
            .unwrap_err()
            .to_string()
            .contains("checksum"));

        let mut flipped = bytes.clone();
        let last = flipped.len() - 3;
        flipped[last] ^= 1;
        assert!(decode(&flipped)
            .unwrap_err()
            .to_string()
            .contains("checksum"));

        let mut v2 = bytes.clone();
        v2[4] = b'2';
        assert!(decode(&v2).unwrap_err().to_string().contains("version"));
        assert!(decode(b"hello world").is_err());
    }
}
