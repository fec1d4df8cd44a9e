use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::geometry::Pose;
use crate::optics::{CameraIntrinsics, Pixel};

use super::{FaceError, FaceModel};

/// Minimum number of landmarks inside the image for a detection to count.
pub const MIN_VISIBLE: usize = 60;

#[derive(Debug, Clone, PartialEq)]
pub struct DetectedLandmarks {
    /// 68 pixel positions when valid; may be empty otherwise.
    pub points: Vec<Pixel>,
    pub capture_time: f64,
    pub valid: bool,
}

impl DetectedLandmarks {
    pub fn invalid(capture_time: f64) -> Self {
        Self {
            points: Vec::new(),
            capture_time,
            valid: false,
        }
    }
}

/// Simulated landmark detector: projects every model point through the
/// camera and adds independent N(0, σ²) pixel noise per axis, drawn from a
/// generator seeded with `rng_seed`.
pub fn observe_landmarks(
    face: &FaceModel,
    head: &Pose,
    k: &CameraIntrinsics,
    cam_pose: &Pose,
    noise_sigma: f64,
    rng_seed: u64,
    t: f64,
) -> DetectedLandmarks {
    let world_to_cam = cam_pose.inverse();
    let head_to_cam = world_to_cam.compose(head);
    let mut points = Vec::with_capacity(face.points().len());
    for p in face.points() {
        match k.project_camera_frame(&head_to_cam.transform_point(p)) {
            Ok(px) => points.push(px),
            Err(_) => return DetectedLandmarks::invalid(t),
        }
    }
    if noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        let normal = Normal::new(0.0, noise_sigma).expect("finite positive sigma");
        for px in points.iter_mut() {
            px.x += normal.sample(&mut rng);
            px.y += normal.sample(&mut rng);
        }
    }
    let visible = points.iter().filter(|p| k.contains(p)).count();
    DetectedLandmarks {
        valid: visible >= MIN_VISIBLE,
        points,
        capture_time: t,
    }
}

/// Landmark centroid and the pixel distance between the width pair.
pub fn face_center_and_width(
    det: &DetectedLandmarks,
    pair: (usize, usize),
) -> Result<(Pixel, f64), FaceError> {
    if !det.valid || det.points.is_empty() || pair.0.max(pair.1) >= det.points.len() {
        return Err(FaceError::InvalidDetection);
    }
    let n = det.points.len() as f64;
    let center = det.points.iter().fold(Pixel::zeros(), |a, p| a + p) / n;
    Ok((center, (det.points[pair.0] - det.points[pair.1]).norm()))
}
