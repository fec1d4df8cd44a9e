//! Synthetic head: rigid landmark model, scripted motion, a simulated
//! landmark detector and the estimators run on its output.

mod detect;
mod model;
mod plane;
mod pose;
mod trajectory;

pub use detect::{face_center_and_width, observe_landmarks, DetectedLandmarks};
pub use model::{
    format_face_points, load_face_model, parse_face_points, procedural_points, FaceModel,
    DEFAULT_REAL_WIDTH, NOSE_TIP, NUM_LANDMARKS,
};
pub use plane::{best_fit_plane, fit_face_plane, FacePlane};
pub use pose::{
    acquire_head_pose, estimate_head_pose, reprojection_rms, PoseEstimate, GN_MAX_HALVINGS,
    GN_MAX_ITERATIONS, GN_STEP_TOL,
};
pub use trajectory::{head_pose_at, HeadTrajectory, TrajectoryKind};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FaceError {
    #[error("invalid face model: {0}")]
    InvalidModel(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("i/o error: {0}")]
    Io(String),
    #[error("detection is not valid")]
    InvalidDetection,
    #[error("pose estimate did not converge in {iterations} iterations (rms {rms} px)")]
    NotConverged { iterations: usize, rms: f64 },
}
