//! Pinhole camera and projector models.
//!
//! Pixel coordinates are continuous: pixel `(i, j)` covers `[i, i+1) × [j, j+1)`
//! and its center sits at `(i + 0.5, j + 0.5)`. A projector is treated as an
//! inverse camera with the same intrinsic model.

mod homography;

pub use homography::{
    apply_homography, calibrate_camera_projector, estimate_homography, parse_correspondences,
    read_correspondences, Calibration, Correspondence, Homography,
};

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Pose, Vec3};

pub type Pixel = Vector2<f64>;

/// Points closer than this to the image plane are treated as behind the camera.
pub const MIN_DEPTH: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OpticsError {
    #[error("point is behind the camera (depth {0} m)")]
    BehindCamera(f64),
    #[error("depth must be positive, got {0}")]
    NonPositiveDepth(f64),
    #[error("widths must be positive (real {real} m, pixel {pixel} px)")]
    NonPositiveWidth { real: f64, pixel: f64 },
    #[error("need at least 4 correspondences, got {0}")]
    InsufficientPairs(usize),
    #[error("degenerate point configuration: {0}")]
    DegenerateConfiguration(&'static str),
    #[error("point maps to infinity")]
    PointAtInfinity,
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("i/o error: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraIntrinsics {
    /// Square-pixel intrinsics with the principal point at the image center.
    pub fn centered(width: u32, height: u32, focal: f64) -> Self {
        Self {
            fx: focal,
            fy: focal,
            cx: width as f64 / 2.0,
            cy: height as f64 / 2.0,
            width,
            height,
        }
    }

    /// Default webcam model: 1280×720, f = 1000 px.
    pub fn default_camera() -> Self {
        Self::centered(1280, 720, 1000.0)
    }

    /// Default projector model: 1280×800, f = 1700 px.
    pub fn default_projector() -> Self {
        Self::centered(1280, 800, 1700.0)
    }

    pub fn validate(&self) -> Result<(), OpticsError> {
        let bad = |m: &str| Err(OpticsError::InvalidIntrinsics(m.to_string()));
        if !(self.fx > 0.0 && self.fy > 0.0) || !self.fx.is_finite() || !self.fy.is_finite() {
            return bad("focal lengths must be positive and finite");
        }
        if self.width == 0 || self.height == 0 {
            return bad("image size must be nonzero");
        }
        if !(self.cx >= 0.0 && self.cx < self.width as f64) {
            return bad("cx must lie in [0, width)");
        }
        if !(self.cy >= 0.0 && self.cy < self.height as f64) {
            return bad("cy must lie in [0, height)");
        }
        Ok(())
    }

    pub fn contains(&self, p: &Pixel) -> bool {
        p.x >= 0.0 && p.y >= 0.0 && p.x < self.width as f64 && p.y < self.height as f64
    }

    /// Projects a point already expressed in the camera frame.
    pub fn project_camera_frame(&self, p: &Vec3) -> Result<Pixel, OpticsError> {
        if p.z <= MIN_DEPTH {
            return Err(OpticsError::BehindCamera(p.z));
        }
        Ok(Pixel::new(
            self.fx * p.x / p.z + self.cx,
            self.fy * p.y / p.z + self.cy,
        ))
    }

    /// Ray direction (camera frame, z = 1) through a pixel.
    pub fn ray(&self, p: &Pixel) -> Vec3 {
        Vec3::new((p.x - self.cx) / self.fx, (p.y - self.cy) / self.fy, 1.0)
    }
}

/// Projector intrinsics plus its mount relative to the tool flange.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectorModel {
    pub intrinsics: CameraIntrinsics,
    pub mount: Pose,
}

/// Projects a world point through a camera whose frame-to-world transform is
/// `cam_pose`. The result may fall outside the image.
pub fn project_point(
    k: &CameraIntrinsics,
    cam_pose: &Pose,
    world_point: &Vec3,
) -> Result<Pixel, OpticsError> {
    let p = cam_pose.inverse().transform_point(world_point);
    k.project_camera_frame(&p)
}

/// World point at camera-frame depth `depth` along the ray through `pixel`.
pub fn backproject_pixel(
    k: &CameraIntrinsics,
    cam_pose: &Pose,
    pixel: &Pixel,
    depth: f64,
) -> Result<Vec3, OpticsError> {
    if !(depth > 0.0) {
        return Err(OpticsError::NonPositiveDepth(depth));
    }
    Ok(cam_pose.transform_point(&(k.ray(pixel) * depth)))
}

/// Depth of a fronto-parallel segment of known metric width from its pixel
/// width (similar triangles).
pub fn distance_from_face_width(
    fx: f64,
    real_width: f64,
    pixel_width: f64,
) -> Result<f64, OpticsError> {
    if !(pixel_width > 0.0) || !(real_width > 0.0) {
        return Err(OpticsError::NonPositiveWidth {
            real: real_width,
            pixel: pixel_width,
        });
    }
    Ok(fx * real_width / pixel_width)
}
