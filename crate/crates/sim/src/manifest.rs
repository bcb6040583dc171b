//! Task manifests.
//!
//! A manifest is a TOML file describing one task. GUE motion comes either
//! from a trace CSV next to it or from inline waypoint specs:
//!
//! ```toml
//! area_width = 1500.0
//! area_height = 900.0
//! altitude_m = 100.0
//! uabs_start = [750.0, 450.0]
//! uabs_speed = 20.0
//! p_msg = 1.0
//! horizon = 300
//! trace = "task_000.csv"
//!
//! # or, instead of `trace`:
//! [[gue]]
//! speed = 10.0
//! start_time = 4
//! path = [[0.0, 0.0], [100.0, 50.0]]
//! ```

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use uabs_core::env::{AreaSpec, GueMotion, GueSpec, TaskConfig, TrafficPattern, WaypointPath};
use uabs_core::geom::Vec2;

use crate::trace::{self, TraceError};

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{path}: {message}")]
    Invalid { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Trace { path: PathBuf, source: TraceError },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GueEntry {
    pub speed: f64,
    pub start_time: u32,
    pub path: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub area_width: f64,
    pub area_height: f64,
    pub altitude_m: f64,
    pub uabs_start: [f64; 2],
    pub uabs_speed: f64,
    pub p_msg: f64,
    pub horizon: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<String>,
    #[serde(default, rename = "gue", skip_serializing_if = "Vec::is_empty")]
    pub gues: Vec<GueEntry>,
}

impl Manifest {
    /// Manifest with inline waypoints for a waypoint-driven task.
    pub fn from_task(task: &TaskConfig) -> Option<Manifest> {
        let GueMotion::Waypoints(gues) = &task.traffic.motion else {
            return None;
        };
        let mut m = Manifest::header(task, None);
        m.gues = gues
            .iter()
            .map(|g| GueEntry {
                speed: g.speed,
                start_time: g.start_time,
                path: g.path.points().iter().map(|p| [p.x, p.y]).collect(),
            })
            .collect();
        Some(m)
    }

    /// Manifest pointing at a trace file.
    pub fn header(task: &TaskConfig, trace: Option<String>) -> Manifest {
        Manifest {
            area_width: task.area.width,
            area_height: task.area.height,
            altitude_m: task.area.altitude,
            uabs_start: [task.uabs_start.x, task.uabs_start.y],
            uabs_speed: task.uabs_speed,
            p_msg: task.traffic.p_msg,
            horizon: task.horizon,
            trace,
            gues: Vec::new(),
        }
    }

    /// Builds the task; `base` resolves a relative trace path.
    pub fn to_task(&self, base: &Path) -> Result<TaskConfig, ManifestError> {
        let invalid = |message: String| ManifestError::Invalid { path: base.to_path_buf(), message };
        let area = AreaSpec::new(self.area_width, self.area_height, self.altitude_m)
            .map_err(|e| invalid(e.to_string()))?;
        let motion = match (&self.trace, self.gues.is_empty()) {
            (Some(file), true) => {
                let path = base.join(file);
                let f = File::open(&path).map_err(|source| ManifestError::Io { path: path.clone(), source })?;
                let tracks = trace::read_tracks(BufReader::new(f), &area)
                    .map_err(|source| ManifestError::Trace { path, source })?;
                GueMotion::Trace(tracks)
            }
            (None, false) => GueMotion::Waypoints(
                self.gues
                    .iter()
                    .map(|g| {
                        let pts = g.path.iter().map(|&[x, y]| Vec2::new(x, y)).collect();
                        let path = WaypointPath::new(pts, &area).map_err(|e| invalid(e.to_string()))?;
                        Ok(GueSpec { path, speed: g.speed, start_time: g.start_time })
                    })
                    .collect::<Result<_, ManifestError>>()?,
            ),
            (Some(_), false) => return Err(invalid("give either `trace` or `[[gue]]` entries, not both".into())),
            (None, true) => return Err(invalid("no GUEs: add `trace` or `[[gue]]` entries".into())),
        };
        let task = TaskConfig {
            uabs_start: Vec2::new(self.uabs_start[0], self.uabs_start[1]),
            traffic: TrafficPattern { motion, p_msg: self.p_msg },
            horizon: self.horizon,
            area,
            uabs_speed: self.uabs_speed,
        };
        task.validate().map_err(|e| invalid(e.to_string()))?;
        Ok(task)
    }
}

pub fn load_task(path: &Path) -> Result<TaskConfig, ManifestError> {
    let text = std::fs::read_to_string(path).map_err(|source| ManifestError::Io { path: path.to_path_buf(), source })?;
    let m: Manifest = toml::from_str(&text)
        .map_err(|e| ManifestError::Parse { path: path.to_path_buf(), message: e.to_string() })?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    m.to_task(base).map_err(|e| match e {
        ManifestError::Invalid { message, .. } => ManifestError::Invalid { path: path.to_path_buf(), message },
        other => other,
    })
}

/// Writes `<stem>.csv` (the task sampled as a trace) and `<stem>.toml`
/// pointing at it. Returns the manifest path.
pub fn write_trace_task(dir: &Path, stem: &str, task: &TaskConfig) -> Result<PathBuf, ManifestError> {
    let csv_name = format!("{stem}.csv");
    let csv_path = dir.join(&csv_name);
    let f = File::create(&csv_path).map_err(|source| ManifestError::Io { path: csv_path.clone(), source })?;
    trace::write_trace(task, std::io::BufWriter::new(f))
        .map_err(|source| ManifestError::Trace { path: csv_path.clone(), source })?;
    let manifest = Manifest::header(task, Some(csv_name));
    let path = dir.join(format!("{stem}.toml"));
    let text = toml::to_string(&manifest).expect("manifest serializes");
    std::fs::write(&path, text).map_err(|source| ManifestError::Io { path: path.clone(), source })?;
    Ok(path)
}
