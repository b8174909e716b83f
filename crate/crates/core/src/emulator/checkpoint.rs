//! Versioned binary checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "DCEM"              4 bytes
//! version             u16
//! config length       u32, then that many bytes of key-sorted `key=value` text
//! scalar count        u64
//! parameters          f64 × scalar count, in declaration order
//! crc32               u32 over every preceding byte
//! ```

use std::path::Path;

use super::{Error, Model, ModelConfig};
use crate::io::write_atomic;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"DCEM";
pub const CHECKPOINT_VERSION: u16 = 1;

pub fn encode_checkpoint(model: &Model) -> Vec<u8> {
    let config = model.config().to_canonical_text();
    let mut out = Vec::with_capacity(32 + config.len() + 8 * model.parameter_count());
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(config.len() as u32).to_le_bytes());
    out.extend_from_slice(config.as_bytes());
    out.extend_from_slice(&(model.parameter_count() as u64).to_le_bytes());
    for (_, p) in model.params().iter() {
        for v in p.value.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Model, Error> {
    let corrupt = |m: &str| Error::Corrupt(m.to_string());
    if bytes.len() < 4 + 2 + 4 + 8 + 4 {
        return Err(corrupt("file too short"));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().unwrap());
    if crc32fast::hash(body) != stored {
        return Err(corrupt("checksum mismatch"));
    }
    if &body[..4] != CHECKPOINT_MAGIC {
        return Err(corrupt("bad magic"));
    }
    let version = u16::from_le_bytes([body[4], body[5]]);
    if version != CHECKPOINT_VERSION {
        return Err(Error::Version {
            found: version,
            expected: CHECKPOINT_VERSION,
        });
    }
    let mut pos = 6;
    let config_len = u32::from_le_bytes(body[pos..pos + 4].try_into().unwrap()) as usize;
    pos += 4;
    let text = body
        .get(pos..pos + config_len)
        .ok_or_else(|| corrupt("config block overruns file"))?;
    let text = std::str::from_utf8(text).map_err(|_| corrupt("config block is not UTF-8"))?;
    pos += config_len;
    let config = ModelConfig::from_canonical_text(text)?;
    let count_bytes = body
        .get(pos..pos + 8)
        .ok_or_else(|| corrupt("missing parameter count"))?;
    let count = u64::from_le_bytes(count_bytes.try_into().unwrap()) as usize;
    pos += 8;

    let mut model = Model::build(config)?;
    if count != model.parameter_count() || body.len() - pos != 8 * count {
        return Err(corrupt(
            "parameter block does not match the configured architecture",
        ));
    }
    let mut floats = body[pos..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    for p in model.params_mut().iter_mut() {
        for v in p.value.data_mut() {
            *v = floats.next().expect("length checked");
        }
    }
    Ok(model)
}

pub fn save_checkpoint(model: &Model, path: &Path) -> Result<(), Error> {
    write_atomic(path, &encode_checkpoint(model))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Model, Error> {
    let bytes = std::fs::read(path)?;
    decode_checkpoint(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::emulator::Architecture;

    fn model() -> Model {
        Model::build(ModelConfig {
            architecture: Architecture::Dccnn,
            hidden_layers: 2,
            hidden_units: 4,
            input_channels: 3,
            output_bands: 2,
            seed: 11,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let m = model();
        let back = decode_checkpoint(&encode_checkpoint(&m)).unwrap();
        assert_eq!(back.config(), m.config());
        for ((_, a), (_, b)) in m.params().iter().zip(back.params().iter()) {
            let (x, y): (Vec<u64>, Vec<u64>) = (
                a.value.data().iter().map(|v| v.to_bits()).collect(),
                b.value.data().iter().map(|v| v.to_bits()).collect(),
            );
            assert_eq!(x, y);
        }
    }

    #[test]
    fn truncation_and_bit_flips_are_detected() {
        let bytes = encode_checkpoint(&model());
        for cut in [0, 10, bytes.len() / 2, bytes.len() - 1] {
            assert!(
                matches!(decode_checkpoint(&bytes[..cut]), Err(Error::Corrupt(_))),
                "cut {cut}"
            );
        }
        let mut flipped = bytes.clone();
        flipped[40] ^= 0x10;
        assert!(matches!(
            decode_checkpoint(&flipped),
            Err(Error::Corrupt(_))
        ));
    }

    #[test]
    fn version_mismatch_is_reported() {
        let mut bytes = encode_checkpoint(&model());
        bytes[4] = 9;
        let n = bytes.len() - 4;
        let crc = crc32fast::hash(&bytes[..n]);
        bytes[n..].copy_from_slice(&crc.to_le_bytes());
        assert!(matches!(
            decode_checkpoint(&bytes),
            Err(Error::Version {
                found: 9,
                expected: 1
            })
        ));
    }
}
