//! Projector-side rendering: canonical landmark mesh, piecewise-affine
//! texture warping through the face plane, and on-face registration error.

mod delaunay;
mod frame;
mod onface;
mod render;
mod template;
mod warp;

pub use delaunay::{incircle, orient2d, triangulate_landmarks, TriangleMesh};
pub use frame::Frame;
pub use onface::{anchor_pixel, onface_error, FrameMapping, OnFaceError};
pub use render::{render_projector_frame, PlaneCaster, Renderer};
pub use template::{
    format_anchors, load_template, parse_anchors, MaskKind, MaskTemplate, TextureLayout,
    BUILTIN_SIZE,
};
pub use warp::{piecewise_affine_map, TriangleLocator, INSIDE_EPS};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MappingError {
    #[error("degenerate points: {0}")]
    DegeneratePoints(&'static str),
    #[error("point lies outside the mesh")]
    OutsideHull,
    #[error("face is behind the projector")]
    FaceBehindProjector,
    #[error("invalid template: {0}")]
    InvalidTemplate(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("bad image: {0}")]
    Format(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for MappingError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}
