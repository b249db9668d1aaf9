//! Stage orchestration with file-based artifacts: configuration, run
//! manifests, the per-stage commands and the parameter sweep table.

mod commands;
mod config;
mod manifest;
mod sweep;

use thiserror::Error;

pub use commands::{
    cmd_fit, cmd_pipeline, cmd_rig, cmd_segment, cmd_synth, cmd_track, load_points, FitReport, PipelineReport,
    RigSummary, SegmentReport,
};
pub use config::{PipelineConfig, CONFIG_KEYS};
pub use manifest::{hash_bytes, hash_file, Manifest};
pub use sweep::{run_sweep, target_frames, SweepCell, SweepTable, TABLE_GAMMAS, TABLE_THRESHOLDS};

use crate::linalg::LinalgError;
use crate::mesh::MeshError;
use crate::pose::PoseError;
use crate::rigging::RigError;
use crate::segment::SegmentError;
use crate::skeleton::SkeletonError;
use crate::synth::ScenarioError;
use crate::tracking::TrackingError;

/// Process exit status for a failed command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    Usage = 1,
    Data = 2,
    Numerical = 3,
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{0}")]
    Usage(String),
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
    #[error("{0}")]
    Data(String),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Tracking(#[from] TrackingError),
    #[error(transparent)]
    Segment(#[from] SegmentError),
    #[error(transparent)]
    Skeleton(#[from] SkeletonError),
    #[error(transparent)]
    Rig(#[from] RigError),
    #[error(transparent)]
    Pose(#[from] PoseError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl PipelineError {
    pub fn kind(&self) -> ExitKind {
        use PipelineError as E;
        match self {
            E::Usage(_) | E::Config { .. } => ExitKind::Usage,
            E::Tracking(TrackingError::SolveFailed(_))
            | E::Scenario(ScenarioError::Tracking(TrackingError::SolveFailed(_)))
            | E::Segment(SegmentError::DegenerateAffinity { .. } | SegmentError::Linalg(_))
            | E::Skeleton(SkeletonError::SolveFailed(_))
            | E::Rig(
                RigError::SolveFailed(_)
                | RigError::RefinementDiverged(_)
                | RigError::CyclicSkeleton
                | RigError::DegenerateSkeleton,
            ) => ExitKind::Numerical,
            _ => ExitKind::Data,
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.kind() as i32
    }
}

impl From<LinalgError> for PipelineError {
    fn from(e: LinalgError) -> Self {
        PipelineError::Segment(SegmentError::Linalg(e))
    }
}
