//! Where projected content actually lands on the face.

use crate::face::{fit_face_plane, FaceModel};
use crate::geometry::Pose;
use crate::optics::{project_point, CameraIntrinsics, Pixel};

/// Geometry behind one displayed frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameMapping {
    /// Head pose the frame was rendered for.
    pub face_estimate: Pose,
    /// Projector pose assumed while rendering.
    pub render_projector_pose: Pose,
    /// Projector pose when the frame is on screen.
    pub display_projector_pose: Pose,
    pub projector: CameraIntrinsics,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OnFaceError {
    /// NaN when every anchor was missed.
    pub mean_mm: f64,
    pub max_mm: f64,
    /// Anchors whose pixel is off-screen or whose ray misses the face plane.
    pub missed: usize,
}

/// Continuous projector pixel the renderer assigns to anchor `i`: the
/// anchor's plane footprint under the estimated head pose, projected with the
/// render-time projector pose.
pub fn anchor_pixel(mapping: &FrameMapping, face: &FaceModel, i: usize) -> Option<Pixel> {
    let world = mapping.face_estimate.transform_point(&face.footprint(i));
    let px = project_point(&mapping.projector, &mapping.render_projector_pose, &world).ok()?;
    mapping.projector.contains(&px).then_some(px)
}

/// For each anchor, casts its assigned pixel from the display pose onto the
/// true face plane and measures the distance to the anchor's true footprint.
pub fn onface_error(
    mapping: &FrameMapping,
    truth_head: &Pose,
    face: &FaceModel,
    anchors: &[usize],
) -> OnFaceError {
    let plane = fit_face_plane(truth_head, face);
    let display = &mapping.display_projector_pose;
    let mut errors = Vec::with_capacity(anchors.len());
    for &i in anchors {
        let Some(px) = anchor_pixel(mapping, face, i) else {
            continue;
        };
        let dir = display.rotation * mapping.projector.ray(&px);
        let Some(s) = plane.intersect(&display.translation, &dir) else {
            continue;
        };
        if s <= 0.0 {
            continue;
        }
        let hit = display.translation + dir * s;
        let truth = truth_head.transform_point(&face.footprint(i));
        errors.push((hit - truth).norm() * 1000.0);
    }
    let missed = anchors.len() - errors.len();
    if errors.is_empty() {
        return OnFaceError {
            mean_mm: f64::NAN,
            max_mm: f64::NAN,
            missed,
        };
    }
    OnFaceError {
        mean_mm: errors.iter().sum::<f64>() / errors.len() as f64,
        max_mm: errors.iter().copied().fold(0.0, f64::max),
        missed,
    }
}
