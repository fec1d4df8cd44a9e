//! Eye-in-hand servo: target pose from the face plane, latency-compensating
//! head predictor, and rate-limited arm stepping.

mod clock;
mod predictor;

pub use clock::{pipeline_tick, PipelineEvent, SimClock, TickOutcome};
pub use predictor::{predictor_step, PredictorConfig, PredictorState};

use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix6, Vector6};
use thiserror::Error;

use crate::face::FacePlane;
use crate::geometry::{exp_so3, look_at_pose, GeometryError, Pose, Vec3};
use crate::kinematics::{
    clamp_step, forward_kinematics, inverse_kinematics, jacobian_with_tool, rotation_delta,
    DhParams, IkOptions, JointLimits, JointVector, KinematicsError,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ServoError {
    #[error("invalid {field}: must be {constraint}")]
    Invalid {
        field: &'static str,
        constraint: &'static str,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServoGains {
    /// Projector-to-face distance along the face normal, meters.
    pub standoff: f64,
    /// Fraction of the remaining position error removed per second.
    pub position_gain: f64,
    pub orientation_gain: f64,
    pub control_period: f64,
}

impl Default for ServoGains {
    fn default() -> Self {
        Self {
            standoff: 0.4,
            position_gain: 8.0,
            orientation_gain: 8.0,
            control_period: 0.033,
        }
    }
}

impl ServoGains {
    pub fn validate(&self) -> Result<(), ServoError> {
        let positive = |v: f64, field| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ServoError::Invalid {
                    field,
                    constraint: "> 0",
                })
            }
        };
        positive(self.standoff, "standoff")?;
        positive(self.position_gain, "position_gain")?;
        positive(self.orientation_gain, "orientation_gain")?;
        positive(self.control_period, "control_period")
    }
}

/// Delays through the capture → detect → plan → project chain, seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub capture_latency: f64,
    pub detect_latency: f64,
    pub plan_latency: f64,
    pub project_latency: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            capture_latency: 0.033,
            detect_latency: 0.020,
            plan_latency: 0.005,
            project_latency: 0.016,
        }
    }
}

impl PipelineConfig {
    pub fn zero() -> Self {
        Self {
            capture_latency: 0.0,
            detect_latency: 0.0,
            plan_latency: 0.0,
            project_latency: 0.0,
        }
    }

    /// Capture to the controller seeing the detection.
    pub fn sensing_delay(&self) -> f64 {
        self.capture_latency + self.detect_latency
    }

    /// Command issue to light leaving the projector.
    pub fn actuation_delay(&self) -> f64 {
        self.plan_latency + self.project_latency
    }

    pub fn total(&self) -> f64 {
        self.sensing_delay() + self.actuation_delay()
    }

    pub fn validate(&self) -> Result<(), ServoError> {
        for (v, field) in [
            (self.capture_latency, "capture_latency"),
            (self.detect_latency, "detect_latency"),
            (self.plan_latency, "plan_latency"),
            (self.project_latency, "project_latency"),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(ServoError::Invalid {
                    field,
                    constraint: ">= 0",
                });
            }
        }
        Ok(())
    }
}

/// Projector pose `standoff` in front of the face along its normal, looking
/// back at the face center. `up_hint` fixes the roll: the projector image +y
/// axis is aligned with it as far as possible.
pub fn compute_target_pose(
    plane: &FacePlane,
    gains: &ServoGains,
    up_hint: &Vec3,
) -> Result<Pose, GeometryError> {
    let eye = plane.center + plane.normal * gains.standoff;
    look_at_pose(&eye, &plane.center, up_hint)
}

/// Waypoint retries after a non-converged IK solve, halving the step each time.
const WAYPOINT_RETRIES: usize = 6;

/// Meters per radian when weighing orientation against position progress.
const ROTATION_WEIGHT: f64 = 0.1;

/// Damped least-squares fallback: iterations per step and damping (m).
const FALLBACK_ITERS: usize = 10;
const FALLBACK_DAMPING: f64 = 0.02;

/// Point a fraction `s` of the way from `a` to `b` along a path that is
/// linear in cylindrical coordinates about the base axis, so long moves
/// arc around the base instead of cutting through the singular column
/// above it.
fn toward(a: &Vec3, b: &Vec3, s: f64) -> Vec3 {
    let (ra, rb) = (a.xy().norm(), b.xy().norm());
    if ra < 1e-9 || rb < 1e-9 {
        return a + (b - a) * s;
    }
    let (pa, pb) = (a.y.atan2(a.x), b.y.atan2(b.x));
    let dphi = (pb - pa + PI).rem_euclid(TAU) - PI;
    let (r, phi) = (ra + (rb - ra) * s, pa + dphi * s);
    Vec3::new(r * phi.cos(), r * phi.sin(), a.z + (b.z - a.z) * s)
}

/// One servo step. The tool pose moves a `gain·dt` fraction of the way to
/// `target` (position and rotation separately) and inverse kinematics is
/// seeded at `q`. The joint step is scaled as a whole to the speed bound, so
/// saturation slows the motion without bending its direction, and
/// [`clamp_step`] then enforces the limits. If the solve does not converge
/// the waypoint fraction is halved and retried.
pub fn control_step(
    q: &JointVector,
    target: &Pose,
    dh: &DhParams,
    tool: &Pose,
    limits: &JointLimits,
    gains: &ServoGains,
) -> Result<JointVector, KinematicsError> {
    let dt = gains.control_period;
    // A far target is rejected up front even if the waypoint is reachable.
    let reach = dh.reach() + tool.translation.norm();
    if target.translation.norm() > reach {
        return Err(KinematicsError::Unreachable {
            distance: target.translation.norm(),
            reach,
        });
    }
    let current = forward_kinematics(dh, q, tool);
    let rot = rotation_delta(&current, target);
    let mut ap = (gains.position_gain * dt).min(1.0);
    let mut ar = (gains.orientation_gain * dt).min(1.0);
    let distance = |p: &Pose| {
        (target.translation - p.translation).norm()
            + ROTATION_WEIGHT * rotation_delta(p, target).norm()
    };
    let step_toward = |goal: &JointVector| {
        let dq = goal.to_vector() - q.to_vector();
        let ratio = (0..6)
            .map(|i| dq[i].abs() / (limits.max_speed[i] * dt))
            .fold(1.0, f64::max);
        let desired = JointVector::from_vector(&(q.to_vector() + dq / ratio));
        clamp_step(q, &desired, dt, limits)
    };
    for _ in 0..=WAYPOINT_RETRIES {
        let waypoint = Pose::new(
            exp_so3(rot * ar) * current.rotation,
            toward(&current.translation, &target.translation, ap),
        );
        match inverse_kinematics(dh, &waypoint, q, tool, &IkOptions::default()) {
            // A solution on another branch can be a valid waypoint pose while
            // the rate-limited step toward it leaves the path; only steps
            // that make progress are taken.
            Ok(sol) => {
                let next = step_toward(&sol.q);
                if distance(&forward_kinematics(dh, &next, tool)) < distance(&current) {
                    return Ok(next);
                }
            }
            Err(KinematicsError::NotConverged { .. }) => {}
            Err(e) => return Err(e),
        }
        ap *= 0.5;
        ar *= 0.5;
    }
    // The exact solve keeps failing near a singular posture: take damped
    // least-squares steps toward the nearest waypoint instead, which slow
    // down rather than jump across branches.
    let waypoint = Pose::new(
        exp_so3(rot * (gains.orientation_gain * dt).min(1.0)) * current.rotation,
        toward(
            &current.translation,
            &target.translation,
            (gains.position_gain * dt).min(1.0),
        ),
    );
    let mut qv = q.to_vector();
    for _ in 0..FALLBACK_ITERS {
        let jq = JointVector::from_vector(&qv);
        let now = forward_kinematics(dh, &jq, tool);
        let dp = waypoint.translation - now.translation;
        let dw = rotation_delta(&now, &waypoint);
        let e = Vector6::new(dp.x, dp.y, dp.z, dw.x, dw.y, dw.z);
        let j = jacobian_with_tool(dh, &jq, tool);
        let m = j * j.transpose() + Matrix6::identity() * (FALLBACK_DAMPING * FALLBACK_DAMPING);
        let Some(sol) = m.cholesky().map(|c| c.solve(&e)) else {
            break;
        };
        qv += j.transpose() * sol;
    }
    Ok(step_toward(&JointVector::from_vector(&qv)))
}
