//! Seeded synthetic world standing in for real cameras: two-camera rigs,
//! labelled pixel matches with noise and outliers, and pedestrian walks seen
//! from both cameras.

mod matches;
mod observe;
mod rig;
mod walk;

use thiserror::Error;

use crate::geometry::GeometryError;

pub use matches::{covisible_point_cloud, default_point_cloud, project_points, SyntheticMatchSet};
pub use observe::{observe, CameraId, Observation};
pub use rig::{
    make_rig, make_rig_with_direction, random_rig, reference_rig, CameraRig, RigJson, REFERENCE_ESTIMATE_EULER,
    REFERENCE_RIG_EULER, REFERENCE_RIG_TRANSLATION,
};
pub use walk::{
    apply_occlusion, occlusion_mask, read_walk_csv, synth_walk, write_walk_csv, GroundTruthWalk, OcclusionKind,
    WalkKind, WalkModel, WalkSample, DEFAULT_DT_S, DEFAULT_DURATION_S, DEFAULT_FUTURE, DEFAULT_PAST, GROUND_Y,
    INTERMITTENT_WINDOW_S, PARTIAL_END_S, WALK_CSV_HEADER,
};

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("only {valid} points project into both cameras; need at least 8")]
    EmptyScene { valid: usize },
    #[error("{0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("line {line}: {msg}")]
    Parse { line: u64, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
