use std::f64::consts::PI;

use crate::geometry::{rot_x, rot_y, Pose, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrajectoryKind {
    Static,
    SinusoidalYaw,
    SinusoidalPitch,
    LinearTranslation,
    Composite,
}

impl TrajectoryKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Static => "static",
            Self::SinusoidalYaw => "sinusoidal_yaw",
            Self::SinusoidalPitch => "sinusoidal_pitch",
            Self::LinearTranslation => "linear_translation",
            Self::Composite => "composite",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "static" => Self::Static,
            "sinusoidal_yaw" => Self::SinusoidalYaw,
            "sinusoidal_pitch" => Self::SinusoidalPitch,
            "linear_translation" => Self::LinearTranslation,
            "composite" => Self::Composite,
            _ => return None,
        })
    }
}

/// Scripted head motion.
///
/// Yaw and pitch turn the head about a pivot `pivot_depth` behind the face
/// origin (along head −Z), like a neck. Linear translation is a triangle wave
/// of peak `amplitude` meters along the world `direction`, so the speed is
/// constant between turnarounds. Composite mixes yaw (`amplitude`), pitch at
/// half amplitude and half frequency, and a sinusoidal sway of
/// `translation_amplitude` meters along `direction`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeadTrajectory {
    pub kind: TrajectoryKind,
    pub amplitude: f64,
    pub frequency: f64,
    pub base_pose: Pose,
    pub direction: Vec3,
    pub pivot_depth: f64,
    pub translation_amplitude: f64,
}

impl HeadTrajectory {
    pub fn fixed(base_pose: Pose) -> Self {
        Self {
            kind: TrajectoryKind::Static,
            amplitude: 0.0,
            frequency: 0.0,
            base_pose,
            direction: Vec3::y(),
            pivot_depth: 0.1,
            translation_amplitude: 0.0,
        }
    }

    pub fn new(kind: TrajectoryKind, amplitude: f64, frequency: f64, base_pose: Pose) -> Self {
        Self {
            kind,
            amplitude,
            frequency,
            ..Self::fixed(base_pose)
        }
    }
}

/// Head frame to world at time `t`.
pub fn head_pose_at(traj: &HeadTrajectory, t: f64) -> Pose {
    let a = traj.amplitude;
    let phase = 2.0 * PI * traj.frequency * t;
    let dir = if traj.direction.norm() > 0.0 {
        traj.direction.normalize()
    } else {
        Vec3::zeros()
    };
    match traj.kind {
        TrajectoryKind::Static => traj.base_pose,
        TrajectoryKind::SinusoidalYaw => pivoted(traj, Pose::from_rotation(rot_y(a * phase.sin()))),
        TrajectoryKind::SinusoidalPitch => {
            pivoted(traj, Pose::from_rotation(rot_x(a * phase.sin())))
        }
        TrajectoryKind::LinearTranslation => {
            let offset = dir * a * triangle(traj.frequency * t);
            shifted(traj.base_pose, offset)
        }
        TrajectoryKind::Composite => {
            let r = rot_y(a * phase.sin()) * rot_x(0.5 * a * (0.5 * phase).sin());
            let turned = pivoted(traj, Pose::from_rotation(r));
            shifted(turned, dir * traj.translation_amplitude * phase.sin())
        }
    }
}

fn pivoted(traj: &HeadTrajectory, turn: Pose) -> Pose {
    let pivot = Vec3::new(0.0, 0.0, -traj.pivot_depth);
    let to = Pose::from_translation(pivot.x, pivot.y, pivot.z);
    let back = Pose::from_translation(-pivot.x, -pivot.y, -pivot.z);
    traj.base_pose.compose(&to).compose(&turn).compose(&back)
}

fn shifted(pose: Pose, offset: Vec3) -> Pose {
    Pose::new(pose.rotation, pose.translation + offset)
}

/// Unit triangle wave with period 1: 0 at x = 0, peaks ±1 at x = ¼, ¾.
fn triangle(x: f64) -> f64 {
    let f = x - x.floor();
    if f < 0.25 {
        4.0 * f
    } else if f < 0.75 {
        2.0 - 4.0 * f
    } else {
        4.0 * f - 4.0
    }
}
