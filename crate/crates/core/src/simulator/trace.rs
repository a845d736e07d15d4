use std::io::Write;

use serde::Serialize;

use super::scene::{SceneState, VehiclePose};
use super::track::TrackGeometry;
use crate::error::Result;

/// One JSON-lines record of a scene trace.
#[derive(Debug, Serialize)]
pub struct TraceRecord {
    pub step: u64,
    pub ego_index: usize,
    pub vehicles: Vec<VehiclePose>,
}

/// Writes one line per scene with the global poses of all vehicles.
pub fn write_trace<W: Write>(track: &TrackGeometry, scenes: &[SceneState], mut out: W) -> Result<()> {
    for scene in scenes {
        let rec = TraceRecord {
            step: scene.time_index,
            ego_index: scene.ego_index,
            vehicles: scene.poses(track),
        };
        serde_json::to_writer(&mut out, &rec)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
