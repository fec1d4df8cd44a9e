//! Head pose from landmark reprojection (Gauss–Newton on SE(3)).

use nalgebra::{Matrix2x3, Matrix6, Vector6};

use crate::geometry::{exp_so3, rot_x, rot_y, skew, Pose, Vec3};
use crate::optics::{distance_from_face_width, CameraIntrinsics, Pixel, MIN_DEPTH};

use super::{face_center_and_width, DetectedLandmarks, FaceError, FaceModel};

pub const GN_MAX_ITERATIONS: usize = 50;
pub const GN_MAX_HALVINGS: usize = 8;
pub const GN_STEP_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct PoseEstimate {
    /// Head frame to camera frame.
    pub pose: Pose,
    /// RMS reprojection residual over all points, pixels.
    pub rms: f64,
    pub iterations: usize,
    /// Summed squared residual before the first step and after each accepted
    /// step.
    pub cost_history: Vec<f64>,
}

/// RMS pixel distance between the model projected at `head_in_cam` and the
/// detection; infinite if any point is behind the camera.
pub fn reprojection_rms(
    det: &DetectedLandmarks,
    face: &FaceModel,
    k: &CameraIntrinsics,
    head_in_cam: &Pose,
) -> f64 {
    (cost(&det.points, face.points(), k, head_in_cam) / det.points.len().max(1) as f64).sqrt()
}

fn cost(obs: &[Pixel], model: &[Vec3], k: &CameraIntrinsics, pose: &Pose) -> f64 {
    let mut sum = 0.0;
    for (x, u) in model.iter().zip(obs) {
        let p = pose.transform_point(x);
        if p.z <= MIN_DEPTH {
            return f64::INFINITY;
        }
        let r = Pixel::new(k.fx * p.x / p.z + k.cx - u.x, k.fy * p.y / p.z + k.cy - u.y);
        sum += r.norm_squared();
    }
    sum
}

fn normal_equations(
    obs: &[Pixel],
    model: &[Vec3],
    k: &CameraIntrinsics,
    pose: &Pose,
) -> (Matrix6<f64>, Vector6<f64>) {
    let mut h = Matrix6::zeros();
    let mut g = Vector6::zeros();
    for (x, u) in model.iter().zip(obs) {
        let rx = pose.rotation * x;
        let p = rx + pose.translation;
        let iz = 1.0 / p.z;
        let r = Pixel::new(k.fx * p.x * iz + k.cx - u.x, k.fy * p.y * iz + k.cy - u.y);
        let dproj = Matrix2x3::new(
            k.fx * iz,
            0.0,
            -k.fx * p.x * iz * iz,
            0.0,
            k.fy * iz,
            -k.fy * p.y * iz * iz,
        );
        // Left perturbation: d(p)/dθ = −[R x]×, d(p)/dt = I.
        let jr = dproj * (-skew(&rx));
        let mut j = nalgebra::Matrix2x6::zeros();
        j.fixed_view_mut::<2, 3>(0, 0).copy_from(&jr);
        j.fixed_view_mut::<2, 3>(0, 3).copy_from(&dproj);
        h += j.transpose() * j;
        g += j.transpose() * r;
    }
    (h, g)
}

fn retract(pose: &Pose, delta: &Vector6<f64>) -> Pose {
    let dw = Vec3::new(delta[0], delta[1], delta[2]);
    let dt = Vec3::new(delta[3], delta[4], delta[5]);
    Pose::new(exp_so3(dw) * pose.rotation, pose.translation + dt)
}

/// Minimizes summed squared reprojection error of all landmarks over the six
/// pose parameters, starting from `seed_pose` (head frame to camera frame).
///
/// A step that would increase the cost is halved up to 8 times; if none of
/// the halved steps decreases it the current pose is already at the
/// numerical floor and is returned.
pub fn estimate_head_pose(
    det: &DetectedLandmarks,
    face: &FaceModel,
    k: &CameraIntrinsics,
    seed_pose: &Pose,
) -> Result<PoseEstimate, FaceError> {
    if !det.valid || det.points.len() != face.points().len() {
        return Err(FaceError::InvalidDetection);
    }
    let (obs, model) = (&det.points[..], face.points());
    let n = obs.len() as f64;
    let mut pose = *seed_pose;
    let mut c = cost(obs, model, k, &pose);
    let mut history = vec![c];
    let done = |pose: Pose, c: f64, iterations: usize, history: Vec<f64>| PoseEstimate {
        pose,
        rms: (c / n).sqrt(),
        iterations,
        cost_history: history,
    };
    if !c.is_finite() {
        return Err(FaceError::NotConverged {
            iterations: 0,
            rms: f64::INFINITY,
        });
    }
    for iter in 0..GN_MAX_ITERATIONS {
        let (h, g) = normal_equations(obs, model, k, &pose);
        let delta = match h.cholesky() {
            Some(ch) => -ch.solve(&g),
            None => match h.pseudo_inverse(1e-12) {
                Ok(pinv) => -(pinv * g),
                Err(_) => return Ok(done(pose, c, iter, history)),
            },
        };
        if delta.norm() < GN_STEP_TOL {
            return Ok(done(pose, c, iter, history));
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..=GN_MAX_HALVINGS {
            let cand = retract(&pose, &(delta * step));
            let cc = cost(obs, model, k, &cand);
            if cc < c {
                accepted = Some((cand, cc));
                break;
            }
            step *= 0.5;
        }
        match accepted {
            Some((p, cc)) => {
                pose = p;
                c = cc;
                history.push(c);
            }
            None => return Ok(done(pose, c, iter, history)),
        }
    }
    Err(FaceError::NotConverged {
        iterations: GN_MAX_ITERATIONS,
        rms: (c / n).sqrt(),
    })
}

/// Pose estimate without a prior: distance from the pixel width, position
/// from the back-projected landmark centroid, then Gauss–Newton from a small
/// grid of yaw/pitch guesses. The lowest-cost result wins.
pub fn acquire_head_pose(
    det: &DetectedLandmarks,
    face: &FaceModel,
    k: &CameraIntrinsics,
) -> Result<PoseEstimate, FaceError> {
    let (center, width) = face_center_and_width(det, face.width_pair())?;
    let distance = distance_from_face_width(k.fx, face.real_width(), width)
        .map_err(|_| FaceError::InvalidDetection)?;
    let n = face.points().len() as f64;
    let centroid = face.points().iter().fold(Vec3::zeros(), |a, p| a + p) / n;
    let mut best: Option<PoseEstimate> = None;
    let mut last_err = FaceError::InvalidDetection;
    for yaw in [0.0f64, -0.45, 0.45, -0.9, 0.9] {
        for pitch in [0.0f64, -0.4, 0.4] {
            // Facing the camera: head +Z along camera −Z, head +Y along image up.
            let r = rot_x(std::f64::consts::PI) * rot_y(yaw) * rot_x(pitch);
            let t = k.ray(&center) * distance - r * centroid;
            match estimate_head_pose(det, face, k, &Pose::new(r, t)) {
                Ok(est) => {
                    if best.as_ref().is_none_or(|b| est.rms < b.rms) {
                        best = Some(est);
                    }
                }
                Err(e) => last_err = e,
            }
        }
    }
    best.ok_or(last_err)
}
