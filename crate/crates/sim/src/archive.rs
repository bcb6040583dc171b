//! Meta-learner archive files.
//!
//! Layout (little-endian):
//!
//! ```text
//! magic     8 bytes  "UABSARC\0"
//! version   u32
//! length    u64      payload byte count
//! payload
//! checksum  32 bytes SHA-256 of everything before it
//! ```
//!
//! The payload holds the meta-initialization (same encoding as a policy
//! checkpoint body) followed by the task archive:
//!
//! ```text
//! u64 entries
//!   u64 task_index, u64 skilled_index, u64 episodes
//!     u64 steps, u32 feature_len
//!       f64 * feature_len, u8 action, u32 reward, f64 behavior_prob
//! ```

use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

use uabs_core::comps::{MetaState, TaskArchiveEntry};
use uabs_core::env::Action;
use uabs_core::reinforce::{Episode, StepRecord};

use crate::codec::{ByteReader, ByteWriter, Eof};

pub const MAGIC: &[u8; 8] = b"UABSARC\0";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 8;
const CHECKSUM_LEN: usize = 32;

#[derive(Debug, Error)]
pub enum ArchiveError {
    #[error("not an archive file")]
    BadMagic,
    #[error("archive version {found} is not supported (expected {VERSION})")]
    VersionMismatch { found: u32 },
    #[error("archive is truncated")]
    Truncated,
    #[error("archive checksum does not match its contents")]
    ChecksumMismatch,
    #[error("archive is malformed: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<Eof> for ArchiveError {
    fn from(_: Eof) -> Self {
        ArchiveError::Malformed("payload ends early".into())
    }
}

pub fn encode(state: &MetaState) -> Vec<u8> {
    let mut p = ByteWriter::default();
    p.policy(&state.theta0);
    p.u64(state.archive.len() as u64);
    for entry in &state.archive {
        p.u64(entry.task_index as u64);
        p.u64(entry.skilled_index as u64);
        p.u64(entry.full_set.len() as u64);
        for ep in &entry.full_set {
            p.u64(ep.len() as u64);
            let dim = ep.steps().first().map_or(0, |s| s.features.len());
            p.u32(dim as u32);
            for s in ep.steps() {
                debug_assert_eq!(s.features.len(), dim);
                for &f in &s.features {
                    p.f64(f);
                }
                p.u8(s.action.index() as u8);
                p.u32(s.reward);
                p.f64(s.behavior_prob);
            }
        }
    }

    let mut w = ByteWriter::default();
    w.bytes(MAGIC);
    w.u32(VERSION);
    w.u64(p.buf.len() as u64);
    w.bytes(&p.buf);
    let digest = Sha256::digest(&w.buf);
    w.bytes(&digest);
    w.buf
}

pub fn decode(bytes: &[u8]) -> Result<MetaState, ArchiveError> {
    if bytes.len() < MAGIC.len() {
        return Err(ArchiveError::Truncated);
    }
    if &bytes[..MAGIC.len()] != MAGIC {
        return Err(ArchiveError::BadMagic);
    }
    if bytes.len() < HEADER_LEN + CHECKSUM_LEN {
        return Err(ArchiveError::Truncated);
    }
    let mut r = ByteReader::new(&bytes[MAGIC.len()..HEADER_LEN]);
    let version = r.u32()?;
    if version != VERSION {
        return Err(ArchiveError::VersionMismatch { found: version });
    }
    let len = r.u64()?;
    let expected = (HEADER_LEN as u64).saturating_add(len).saturating_add(CHECKSUM_LEN as u64);
    if (bytes.len() as u64) < expected {
        return Err(ArchiveError::Truncated);
    }
    if bytes.len() as u64 > expected {
        return Err(ArchiveError::Malformed(format!("{} trailing bytes", bytes.len() as u64 - expected)));
    }
    let body_end = bytes.len() - CHECKSUM_LEN;
    if Sha256::digest(&bytes[..body_end]).as_slice() != &bytes[body_end..] {
        return Err(ArchiveError::ChecksumMismatch);
    }
    decode_payload(&bytes[HEADER_LEN..body_end])
}

fn decode_payload(payload: &[u8]) -> Result<MetaState, ArchiveError> {
    let mut r = ByteReader::new(payload);
    let theta0 = r.policy()?.map_err(ArchiveError::Malformed)?;
    let n_entries = r.u64()? as usize;
    let mut archive = Vec::new();
    for _ in 0..n_entries {
        let task_index = r.u64()? as usize;
        let skilled_index = r.u64()? as usize;
        let n_eps = r.u64()? as usize;
        let mut full_set = Vec::new();
        for _ in 0..n_eps {
            let n_steps = r.u64()? as usize;
            let dim = r.u32()? as usize;
            let step_len = dim * 8 + 1 + 4 + 8;
            if n_steps.saturating_mul(step_len) > r.remaining() {
                return Err(Eof.into());
            }
            let mut steps = Vec::with_capacity(n_steps);
            for _ in 0..n_steps {
                let features = (0..dim).map(|_| r.f64()).collect::<Result<Vec<_>, _>>()?;
                let a = r.u8()?;
                let action = Action::from_index(a as usize)
                    .ok_or_else(|| ArchiveError::Malformed(format!("action index {a}")))?;
                let reward = r.u32()?;
                let behavior_prob = r.f64()?;
                steps.push(StepRecord { features, action, reward, behavior_prob });
            }
            full_set.push(Episode::new(steps));
        }
        if skilled_index >= full_set.len() {
            return Err(ArchiveError::Malformed(format!(
                "task {task_index}: skilled index {skilled_index} out of {} episodes",
                full_set.len()
            )));
        }
        archive.push(TaskArchiveEntry { task_index, full_set, skilled_index });
    }
    if r.remaining() != 0 {
        return Err(ArchiveError::Malformed(format!("{} unread payload bytes", r.remaining())));
    }
    Ok(MetaState { theta0, archive })
}

pub fn save(state: &MetaState, path: &Path) -> Result<(), ArchiveError> {
    std::fs::write(path, encode(state))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<MetaState, ArchiveError> {
    decode(&std::fs::read(path)?)
}
