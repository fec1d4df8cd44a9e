//! Six-joint serial arm: standard DH forward kinematics, geometric Jacobian,
//! damped-least-squares inverse kinematics and rate-limited joint stepping.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::ops::{Index, IndexMut};

use nalgebra::{Matrix6, Vector6};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{log_so3, Pose, Vec3};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KinematicsError {
    #[error("target at {distance:.3} m exceeds arm reach {reach:.3} m")]
    Unreachable { distance: f64, reach: f64 },
    #[error("IK did not converge (position residual {position:.3e} m, orientation residual {orientation:.3e} rad)")]
    NotConverged { position: f64, orientation: f64 },
}

/// Joint angles in radians.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct JointVector(pub [f64; 6]);

impl JointVector {
    pub fn zeros() -> Self {
        Self([0.0; 6])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        Vector6::from_row_slice(&self.0)
    }

    pub fn from_vector(v: &Vector6<f64>) -> Self {
        Self([v[0], v[1], v[2], v[3], v[4], v[5]])
    }

    pub fn max_abs_diff(&self, other: &JointVector) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl Index<usize> for JointVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for JointVector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

/// Standard Denavit–Hartenberg parameters for six revolute joints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DhParams {
    pub a: [f64; 6],
    pub d: [f64; 6],
    pub alpha: [f64; 6],
    pub theta_offset: [f64; 6],
}

impl DhParams {
    /// Manufacturer-published UR3 parameters.
    pub fn ur3() -> Self {
        Self {
            a: [0.0, -0.24365, -0.21325, 0.0, 0.0, 0.0],
            d: [0.1519, 0.0, 0.0, 0.11235, 0.08535, 0.0819],
            alpha: [FRAC_PI_2, 0.0, 0.0, FRAC_PI_2, -FRAC_PI_2, 0.0],
            theta_offset: [0.0; 6],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.a
            .iter()
            .chain(&self.d)
            .chain(&self.alpha)
            .chain(&self.theta_offset)
            .all(|v| v.is_finite())
    }

    /// Upper bound on the distance from the base origin to the flange.
    pub fn reach(&self) -> f64 {
        self.a
            .iter()
            .zip(&self.d)
            .map(|(a, d)| (a * a + d * d).sqrt())
            .sum()
    }

    /// Transform from frame `i` to frame `i + 1` at joint angle `q`.
    pub fn link_transform(&self, i: usize, q: f64) -> Pose {
        Pose::rot_z(q + self.theta_offset[i])
            * Pose::from_translation(self.a[i], 0.0, self.d[i])
            * Pose::rot_x(self.alpha[i])
    }
}

impl Default for DhParams {
    fn default() -> Self {
        Self::ur3()
    }
}

/// Camera and projector mounts relative to the flange.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToolOffset {
    pub projector_mount: Pose,
    pub camera_mount: Pose,
}

impl Default for ToolOffset {
    /// Side-by-side mount: projector 40 mm along flange +X, camera 40 mm
    /// along −X, both looking down the flange Z axis.
    fn default() -> Self {
        Self {
            projector_mount: Pose::from_translation(0.04, 0.0, 0.0),
            camera_mount: Pose::from_translation(-0.04, 0.0, 0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointLimits {
    pub min: [f64; 6],
    pub max: [f64; 6],
    /// rad/s
    pub max_speed: [f64; 6],
}

impl Default for JointLimits {
    fn default() -> Self {
        Self {
            min: [-TAU; 6],
            max: [TAU; 6],
            max_speed: [PI, PI, PI, TAU, TAU, TAU],
        }
    }
}

impl JointLimits {
    pub fn validate(&self) -> Result<(), String> {
        for i in 0..6 {
            if !(self.min[i] < self.max[i]) {
                return Err(format!("joint {}: min must be < max", i + 1));
            }
            if !(self.max_speed[i] > 0.0) || !self.max_speed[i].is_finite() {
                return Err(format!("joint {}: max speed must be > 0", i + 1));
            }
        }
        Ok(())
    }

    pub fn contains(&self, q: &JointVector) -> bool {
        (0..6).all(|i| q[i] >= self.min[i] && q[i] <= self.max[i])
    }
}

/// Frames 0 (base) through 6 (flange), all relative to the base.
pub fn joint_frames(dh: &DhParams, q: &JointVector) -> [Pose; 7] {
    let mut frames = [Pose::identity(); 7];
    for i in 0..6 {
        frames[i + 1] = frames[i] * dh.link_transform(i, q[i]);
    }
    frames
}

/// Base-frame pose of `tool` mounted on the flange.
pub fn forward_kinematics(dh: &DhParams, q: &JointVector, tool: &Pose) -> Pose {
    joint_frames(dh, q)[6] * *tool
}

/// Geometric Jacobian of the flange origin: linear rows over angular rows.
pub fn jacobian(dh: &DhParams, q: &JointVector) -> Matrix6<f64> {
    jacobian_with_tool(dh, q, &Pose::identity())
}

/// Geometric Jacobian at the origin of `tool`.
pub fn jacobian_with_tool(dh: &DhParams, q: &JointVector, tool: &Pose) -> Matrix6<f64> {
    let frames = joint_frames(dh, q);
    let p_e = (frames[6] * *tool).translation;
    let mut j = Matrix6::zeros();
    for i in 0..6 {
        let z = frames[i].z_axis();
        let lin = z.cross(&(p_e - frames[i].translation));
        j.fixed_view_mut::<3, 1>(0, i).copy_from(&lin);
        j.fixed_view_mut::<3, 1>(3, i).copy_from(&z);
    }
    j
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IkOptions {
    /// Position tolerance in meters.
    pub tol_position: f64,
    /// Orientation tolerance (geodesic angle) in radians.
    pub tol_orientation: f64,
    pub max_iter: usize,
    pub damping: f64,
}

impl Default for IkOptions {
    fn default() -> Self {
        Self {
            tol_position: 1e-9,
            tol_orientation: 1e-9,
            max_iter: 200,
            damping: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IkSolution {
    pub q: JointVector,
    pub iterations: usize,
    pub position_residual: f64,
    pub orientation_residual: f64,
}

fn pose_error(target: &Pose, current: &Pose) -> Vector6<f64> {
    let dp = target.translation - current.translation;
    let dw = log_so3(&(target.rotation * current.rotation.transpose()));
    Vector6::new(dp.x, dp.y, dp.z, dw.x, dw.y, dw.z)
}

fn split_norms(e: &Vector6<f64>) -> (f64, f64) {
    (e.fixed_rows::<3>(0).norm(), e.fixed_rows::<3>(3).norm())
}

/// Damping growth per rejected step, and rejections tolerated per iteration.
const LM_FACTOR: f64 = 4.0;
const LM_ATTEMPTS: usize = 24;
/// Largest joint change per iteration (rad) in the first pass; keeps early
/// steps from jumping across singular postures.
const MAX_JOINT_STEP: f64 = 0.25;

/// Damped least squares from `seed` toward `target` (base frame) for the
/// frame `tool` on the flange.
pub fn inverse_kinematics(
    dh: &DhParams,
    target: &Pose,
    seed: &JointVector,
    tool: &Pose,
    opts: &IkOptions,
) -> Result<IkSolution, KinematicsError> {
    let reach = dh.reach() + tool.translation.norm();
    let distance = target.translation.norm();
    if distance > reach {
        return Err(KinematicsError::Unreachable { distance, reach });
    }
    // A trust-region pass first; if it stalls, an unrestricted pass, which
    // can step across a singular posture the seed sits next to.
    match dls(dh, target, seed, tool, opts, MAX_JOINT_STEP) {
        Err(KinematicsError::NotConverged { .. }) => {
            dls(dh, target, seed, tool, opts, f64::INFINITY)
        }
        r => r,
    }
}

fn dls(
    dh: &DhParams,
    target: &Pose,
    seed: &JointVector,
    tool: &Pose,
    opts: &IkOptions,
    max_step: f64,
) -> Result<IkSolution, KinematicsError> {
    let mut q = seed.to_vector();
    let mut err = pose_error(target, &forward_kinematics(dh, seed, tool));
    let base = opts.damping * opts.damping;
    let mut mu = base;
    for iter in 0..=opts.max_iter {
        let (ep, ew) = split_norms(&err);
        if ep < opts.tol_position && ew < opts.tol_orientation {
            return Ok(IkSolution {
                q: JointVector::from_vector(&q),
                iterations: iter,
                position_residual: ep,
                orientation_residual: ew,
            });
        }
        if iter == opts.max_iter {
            break;
        }
        let jq = JointVector::from_vector(&q);
        let j = jacobian_with_tool(dh, &jq, tool);
        let jjt = j * j.transpose();
        let current = err.norm();
        // Damping fades with the residual so near-singular postures still
        // converge quadratically once close; a rejected step raises it
        // (Levenberg-Marquardt), bending the step toward the gradient.
        let mut accepted = None;
        for _ in 0..LM_ATTEMPTS {
            let lambda2 = mu * current.min(1.0);
            let Some(sol) = (jjt + Matrix6::identity() * lambda2)
                .cholesky()
                .map(|c| c.solve(&err))
            else {
                mu *= LM_FACTOR;
                continue;
            };
            let dq = j.transpose() * sol;
            let q_try = q + dq * (max_step / dq.amax()).min(1.0);
            let e_try = pose_error(
                target,
                &forward_kinematics(dh, &JointVector::from_vector(&q_try), tool),
            );
            if e_try.norm() < current {
                accepted = Some((q_try, e_try));
                mu = (mu / LM_FACTOR).max(base);
                break;
            }
            mu *= LM_FACTOR;
        }
        match accepted {
            Some((q_new, e_new)) => {
                q = q_new;
                err = e_new;
            }
            None => break,
        }
    }
    let (position, orientation) = split_norms(&err);
    Err(KinematicsError::NotConverged {
        position,
        orientation,
    })
}

/// Moves each joint toward `q_desired` by at most `max_speed·dt`, then
/// clamps to the position range.
pub fn clamp_step(
    q: &JointVector,
    q_desired: &JointVector,
    dt: f64,
    limits: &JointLimits,
) -> JointVector {
    let mut out = *q;
    for i in 0..6 {
        let bound = limits.max_speed[i] * dt;
        let step = (q_desired[i] - q[i]).clamp(-bound, bound);
        out[i] = (q[i] + step).clamp(limits.min[i], limits.max[i]);
    }
    out
}

/// Angle-axis of `b · aᵀ` (world-frame rotation taking `a` to `b`).
pub fn rotation_delta(a: &Pose, b: &Pose) -> Vec3 {
    log_so3(&(b.rotation * a.rotation.transpose()))
}
