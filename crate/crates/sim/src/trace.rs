//! GUE trace CSV.
//!
//! ```text
//! gue_id,t,x,y
//! 0,1,10.0,20.0
//! 0,2,10.5,20.0
//! 1,3,400.0,12.5
//! ```
//!
//! Rows are sorted by `(gue_id, t)`, `t >= 1`, and each GUE's steps are
//! contiguous. A GUE is active exactly on the steps it has rows for.

use std::io::{Read, Write};

use thiserror::Error;

use uabs_core::env::{AreaSpec, GueMotion, GueTrack, TaskConfig, TrafficPattern};
use uabs_core::geom::Vec2;

pub const HEADER: [&str; 4] = ["gue_id", "t", "x", "y"];

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("line {line}: {source}")]
    Csv { line: u64, source: csv::Error },
    #[error("line 1: expected header `gue_id,t,x,y`, found `{found}`")]
    Header { found: String },
    #[error("line {line}: {message}")]
    Malformed { line: u64, message: String },
    #[error("line {line}: rows must be sorted by gue_id")]
    Unsorted { line: u64 },
    #[error("line {line}: GUE {gue_id} jumps from t = {previous} to t = {found}; steps must be contiguous")]
    NonContiguous { line: u64, gue_id: u64, previous: u32, found: u32 },
    #[error("line {line}: position ({x}, {y}) lies outside the area")]
    OutOfArea { line: u64, x: f64, y: f64 },
    #[error("no GUEs")]
    NoGues,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Parses a trace into per-GUE tracks, in `gue_id` order.
pub fn read_tracks<R: Read>(reader: R, area: &AreaSpec) -> Result<Vec<GueTrack>, TraceError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(|source| TraceError::Csv { line: 1, source })?;
    if header.iter().collect::<Vec<_>>() != HEADER {
        return Err(TraceError::Header { found: header.iter().collect::<Vec<_>>().join(",") });
    }

    let mut tracks: Vec<GueTrack> = Vec::new();
    let mut current: Option<(u64, u32)> = None;
    for record in rdr.records() {
        let record = record.map_err(|source| {
            let line = source.position().map_or(0, |p| p.line());
            TraceError::Csv { line, source }
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let malformed = |message: String| TraceError::Malformed { line, message };
        if record.len() != 4 {
            return Err(malformed(format!("expected 4 fields, found {}", record.len())));
        }
        let gue_id: u64 = record[0].parse().map_err(|_| malformed(format!("bad gue_id `{}`", &record[0])))?;
        let t: u32 = record[1].parse().map_err(|_| malformed(format!("bad t `{}`", &record[1])))?;
        if t < 1 {
            return Err(malformed("t must be at least 1".into()));
        }
        let x: f64 = record[2].parse().map_err(|_| malformed(format!("bad x `{}`", &record[2])))?;
        let y: f64 = record[3].parse().map_err(|_| malformed(format!("bad y `{}`", &record[3])))?;
        let p = Vec2::new(x, y);
        if !area.contains(p) {
            return Err(TraceError::OutOfArea { line, x, y });
        }

        match current {
            Some((id, prev)) if id == gue_id => {
                if t != prev + 1 {
                    return Err(TraceError::NonContiguous { line, gue_id, previous: prev, found: t });
                }
                tracks.last_mut().expect("current track").positions.push(p);
            }
            Some((id, _)) if gue_id < id => return Err(TraceError::Unsorted { line }),
            _ => tracks.push(GueTrack { start_time: t, positions: vec![p] }),
        }
        current = Some((gue_id, t));
    }
    if tracks.is_empty() {
        return Err(TraceError::NoGues);
    }
    Ok(tracks)
}

/// Reads a trace file into a playback traffic pattern.
pub fn ingest_trace<R: Read>(reader: R, area: &AreaSpec, p_msg: f64) -> Result<TrafficPattern, TraceError> {
    Ok(TrafficPattern { motion: GueMotion::Trace(read_tracks(reader, area)?), p_msg })
}

/// Writes every active `(gue, t)` position of `task` for `t = 1..=horizon`.
pub fn write_trace<W: Write>(task: &TaskConfig, writer: W) -> Result<(), TraceError> {
    let mut w = csv::Writer::from_writer(writer);
    let to_err = |source: csv::Error| TraceError::Csv { line: 0, source };
    w.write_record(HEADER).map_err(to_err)?;
    for g in 0..task.traffic.gue_count() {
        for t in 1..=task.horizon {
            if let Some(p) = task.traffic.gue_position(g, t, task.horizon) {
                w.write_record([g.to_string(), t.to_string(), p.x.to_string(), p.y.to_string()])
                    .map_err(to_err)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
