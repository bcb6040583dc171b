//! Policy checkpoint files.
//!
//! Layout (little-endian): magic `UABSPOL\0`, `u32` version, `u32` input
//! dim, `u32` hidden-layer count, one `u32` per hidden width, `u32` output
//! dim, `u64` parameter count, then the parameters as `f64`.

use std::path::Path;

use thiserror::Error;

use uabs_core::policy::PolicyParams;

use crate::codec::{ByteReader, ByteWriter};

pub const MAGIC: &[u8; 8] = b"UABSPOL\0";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("not a policy checkpoint")]
    BadMagic,
    #[error("checkpoint version {found} is not supported (expected {VERSION})")]
    VersionMismatch { found: u32 },
    #[error("checkpoint is truncated")]
    Truncated,
    #[error("checkpoint is malformed: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn encode(p: &PolicyParams) -> Vec<u8> {
    let mut w = ByteWriter::default();
    w.bytes(MAGIC);
    w.u32(VERSION);
    w.policy(p);
    w.buf
}

pub fn decode(bytes: &[u8]) -> Result<PolicyParams, CheckpointError> {
    let mut r = ByteReader::new(bytes);
    let magic = r.take(MAGIC.len()).map_err(|_| CheckpointError::Truncated)?;
    if magic != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = r.u32().map_err(|_| CheckpointError::Truncated)?;
    if version != VERSION {
        return Err(CheckpointError::VersionMismatch { found: version });
    }
    let p = r
        .policy()
        .map_err(|_| CheckpointError::Truncated)?
        .map_err(CheckpointError::Malformed)?;
    if r.remaining() != 0 {
        return Err(CheckpointError::Malformed(format!("{} trailing bytes", r.remaining())));
    }
    Ok(p)
}

pub fn save(p: &PolicyParams, path: &Path) -> Result<(), CheckpointError> {
    std::fs::write(path, encode(p))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<PolicyParams, CheckpointError> {
    decode(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use uabs_core::policy::{init_params, PolicyArch};

    fn sample() -> PolicyParams {
        init_params(&PolicyArch::new(5, vec![7, 3]), &mut ChaCha8Rng::seed_from_u64(1))
    }

    #[test]
    fn file_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.ckpt");
        let mut p = sample();
        p.theta[0] = f64::MIN_POSITIVE / 3.0;
        p.theta[1] = -0.0;
        save(&p, &path).unwrap();
        let q = load(&path).unwrap();
        assert_eq!(q.arch, p.arch);
        let bits = |v: &PolicyParams| v.theta.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&q), bits(&p));
    }

    #[test]
    fn header_layout() {
        let bytes = encode(&sample());
        assert_eq!(&bytes[..8], MAGIC);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 5);
        assert_eq!(bytes.len(), 8 + 4 + 4 + 4 + 2 * 4 + 4 + 8 + 8 * sample().len());
    }

    #[test]
    fn errors_are_distinct() {
        let bytes = encode(&sample());
        assert!(matches!(decode(&bytes[..bytes.len() - 1]), Err(CheckpointError::Truncated)));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode(&bad), Err(CheckpointError::BadMagic)));
        let mut v2 = bytes.clone();
        v2[8] = 2;
        assert!(matches!(decode(&v2), Err(CheckpointError::VersionMismatch { found: 2 })));
        let mut extra = bytes;
        extra.push(0);
        assert!(matches!(decode(&extra), Err(CheckpointError::Malformed(_))));
    }
}
