//! Input parsing and the spatial join of point events to block groups.

mod events;
mod geojson;
pub mod geometry;
mod profiles;
pub mod spatial;

pub use events::{parse_crimes, parse_crimes_from, parse_permits, parse_permits_from, EventKind, Location, Parsed, PointEvent, StudyWindow};
pub use geojson::{parse_blockgroups, parse_blockgroups_str};
pub use geometry::{BlockGroup, Point};
pub use profiles::{parse_profiles, parse_profiles_from, LandUse, NeighborhoodProfile, RACE_TOLERANCE};
pub use spatial::{assign_points, assign_points_naive, GridIndex};

use std::path::PathBuf;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: missing required column `{column}`")]
    MissingColumn { path: String, column: String },
    #[error("{path}: {message}, line {line}")]
    Row { path: String, line: u64, message: String },
    #[error("{path}: {message}")]
    File { path: String, message: String },
    #[error("block group `{0}`: ring is not closed")]
    UnclosedRing(String),
    #[error("block group `{0}`: ring has fewer than 4 vertices")]
    ShortRing(String),
    #[error("duplicate block group id `{0}`")]
    DuplicateId(String),
    #[error("block group `{id}`: {message}")]
    InvalidProfile { id: String, message: String },
}

impl IngestError {
    pub(crate) fn row(path: &str, line: u64, message: impl Into<String>) -> Self {
        IngestError::Row { path: path.to_string(), line, message: message.into() }
    }
}

/// Block-group id for each event: the supplied id when present, otherwise
/// the polygon covering its coordinates (ids not among `bgs` map to `None`).
pub fn assign_events(events: &[PointEvent], bgs: &[BlockGroup]) -> Vec<Option<String>> {
    let pts: Vec<Point> = events
        .iter()
        .map(|e| match &e.location {
            Location::Point { lat, lon } => (*lon, *lat),
            Location::BlockGroup(_) => (f64::NAN, f64::NAN),
        })
        .collect();
    let hits = assign_points(&pts, bgs);
    let known: std::collections::HashSet<&str> = bgs.iter().map(|b| b.id.as_str()).collect();
    events
        .iter()
        .zip(hits)
        .map(|(e, h)| match &e.location {
            Location::BlockGroup(id) => known.contains(id.as_str()).then(|| id.clone()),
            Location::Point { .. } => h.map(|k| bgs[k].id.clone()),
        })
        .collect()
}

/// An event after the spatial join; `blockgroup_id` is `None` when the
/// location falls outside every polygon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignedEvent {
    pub kind: EventKind,
    pub date: NaiveDate,
    pub raw_type: String,
    pub blockgroup_id: Option<String>,
}

/// Joins events to block groups, see [`assign_events`].
pub fn assign(events: &[PointEvent], bgs: &[BlockGroup]) -> Vec<AssignedEvent> {
    events
        .iter()
        .zip(assign_events(events, bgs))
        .map(|(e, id)| AssignedEvent { kind: e.kind, date: e.date, raw_type: e.raw_type.clone(), blockgroup_id: id })
        .collect()
}
