//! Model file: `CODM` u16 version, u64 config hash, u32 JSON length and the
//! network configuration as JSON, u32 tensor count, then per tensor a u16
//! name length, the name, u32 rank, u32 dims and f64 values.

use std::path::Path;

use carryscan_core::error::FormatError;
use carryscan_core::formats::{write_file, ByteReader};

use crate::error::NnError;
use crate::network::{Network, NetworkConfig};

pub const MODEL_MAGIC: [u8; 4] = *b"CODM";
pub const MODEL_VERSION: u16 = 1;

pub fn encode_model(net: &Network, config_hash: u64) -> Result<Vec<u8>, NnError> {
    let json = serde_json::to_vec(&net.config).map_err(|e| NnError::Checkpoint(e.to_string()))?;
    let params = net.params();
    let mut out = Vec::new();
    out.extend_from_slice(&MODEL_MAGIC);
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    out.extend_from_slice(&config_hash.to_le_bytes());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for p in params {
        out.extend_from_slice(&(p.name.len() as u16).to_le_bytes());
        out.extend_from_slice(p.name.as_bytes());
        out.extend_from_slice(&(p.shape.len() as u32).to_le_bytes());
        for &d in &p.shape {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in &p.value {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

/// Rebuilds the network. A hash other than `expected_hash` is refused.
pub fn decode_model(bytes: &[u8], expected_hash: Option<u64>) -> Result<(Network, u64), NnError> {
    let mut r = ByteReader::new(bytes);
    r.magic(MODEL_MAGIC)?;
    r.version(MODEL_VERSION)?;
    let hash = r.u64()?;
    if let Some(e) = expected_hash.filter(|&e| e != hash) {
        return Err(FormatError::HashMismatch { file: hash, expected: e }.into());
    }
    let n = r.u32()? as usize;
    let config: NetworkConfig = serde_json::from_slice(r.take(n)?).map_err(|e| NnError::Checkpoint(format!("config: {e}")))?;
    let mut net = Network::new(config);
    let count = r.u32()? as usize;
    let mut params = net.params_mut();
    if count != params.len() {
        return Err(NnError::Checkpoint(format!("{count} tensors, network has {}", params.len())));
    }
    for p in params.iter_mut() {
        let len = r.u16()? as usize;
        let name = std::str::from_utf8(r.take(len)?).map_err(|_| r.header_error("tensor name is not UTF-8"))?;
        if name != p.name {
            return Err(NnError::Checkpoint(format!("expected tensor {}, found {name}", p.name)));
        }
        let rank = r.u32()? as usize;
        let shape = (0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>, _>>()?;
        if shape != p.shape {
            return Err(NnError::Checkpoint(format!("{name}: shape {shape:?}, expected {:?}", p.shape)));
        }
        p.value = r.f64s(p.len())?;
    }
    r.finish()?;
    Ok((net, hash))
}

pub fn save_model(path: &Path, net: &Network, config_hash: u64) -> Result<(), NnError> {
    Ok(write_file(path, &encode_model(net, config_hash)?)?)
}

pub fn load_model(path: &Path, expected_hash: Option<u64>) -> Result<(Network, u64), NnError> {
    let bytes = std::fs::read(path).map_err(FormatError::Io)?;
    decode_model(&bytes, expected_hash)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Network {
        Network::new(NetworkConfig {
            seed: 5,
            ..NetworkConfig::reduced()
        })
    }

    #[test]
    fn round_trip_is_exact() {
        let mut net = small();
        net.params_mut()[3].value[0] = 0.123456789;
        let bytes = encode_model(&net, 77).unwrap();
        let (back, h) = decode_model(&bytes, Some(77)).unwrap();
        assert_eq!(h, 77);
        assert_eq!(back.config, net.config);
        for (a, b) in back.params().iter().zip(net.params()) {
            assert_eq!(a.value, b.value, "{}", a.name);
        }
    }

    #[test]
    fn refuses_other_hash_and_damage() {
        let bytes = encode_model(&small(), 1).unwrap();
        assert!(matches!(decode_model(&bytes, Some(2)), Err(NnError::Format(FormatError::HashMismatch { .. }))));
        assert!(matches!(decode_model(&bytes[..bytes.len() - 3], None), Err(NnError::Format(FormatError::Truncated { .. }))));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode_model(&bad, None), Err(NnError::Format(FormatError::BadMagic { .. }))));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.codm");
        let net = small();
        save_model(&path, &net, 9).unwrap();
        let (back, _) = load_model(&path, Some(9)).unwrap();
        assert_eq!(back.params()[0].value, net.params()[0].value);
    }
}
