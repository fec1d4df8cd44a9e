//! Rigid-body transforms.
//!
//! Every frame relation in the simulator (base to flange, flange to tool,
//! world to head, world to camera) is a [`Pose`]. Rotations are plain 3×3
//! matrices; the local +Z axis of a camera or projector frame is its optical
//! axis.

use std::ops::Mul;

use nalgebra::{Matrix3, Rotation3, Vector3};
use thiserror::Error;

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Orthonormality drift above which a composed rotation is re-projected
/// onto SO(3).
const REORTHO_THRESHOLD: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum GeometryError {
    #[error("degenerate aim: eye and target coincide or up hint is parallel to the aim direction")]
    DegenerateAim,
}

/// Rigid transform: `x ↦ rotation·x + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation: Mat3,
    pub translation: Vec3,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            rotation: Mat3::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn new(rotation: Mat3, translation: Vec3) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn from_translation(x: f64, y: f64, z: f64) -> Self {
        Self::new(Mat3::identity(), Vec3::new(x, y, z))
    }

    pub fn from_rotation(rotation: Mat3) -> Self {
        Self::new(rotation, Vec3::zeros())
    }

    pub fn rot_x(angle: f64) -> Self {
        Self::from_rotation(rot_x(angle))
    }

    pub fn rot_y(angle: f64) -> Self {
        Self::from_rotation(rot_y(angle))
    }

    pub fn rot_z(angle: f64) -> Self {
        Self::from_rotation(rot_z(angle))
    }

    /// Pose from a rotation vector (axis·angle) and a translation.
    pub fn from_rotation_vector(rotvec: Vec3, translation: Vec3) -> Self {
        Self::new(exp_so3(rotvec), translation)
    }

    /// `self ∘ other`: applies `other` first, then `self`.
    pub fn compose(&self, other: &Pose) -> Pose {
        let mut rotation = self.rotation * other.rotation;
        if orthonormality_drift(&rotation) > REORTHO_THRESHOLD {
            rotation = reorthonormalize(&rotation);
        }
        Pose {
            rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Pose {
        let rt = self.rotation.transpose();
        Pose {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    pub fn transform_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation * v
    }

    /// Local +Z axis expressed in the parent frame.
    pub fn z_axis(&self) -> Vec3 {
        self.rotation.column(2).into_owned()
    }

    pub fn y_axis(&self) -> Vec3 {
        self.rotation.column(1).into_owned()
    }

    pub fn x_axis(&self) -> Vec3 {
        self.rotation.column(0).into_owned()
    }

    /// Rotation vector of the rotation part.
    pub fn rotation_vector(&self) -> Vec3 {
        log_so3(&self.rotation)
    }

    /// Translation distance and geodesic rotation angle between two poses.
    pub fn distance(&self, other: &Pose) -> (f64, f64) {
        let dp = (self.translation - other.translation).norm();
        let da = rotation_angle(&(self.rotation.transpose() * other.rotation));
        (dp, da)
    }

    /// True when the rotation is orthonormal with determinant +1 within `tol`.
    pub fn is_valid(&self, tol: f64) -> bool {
        orthonormality_drift(&self.rotation) <= tol
            && (self.rotation.determinant() - 1.0).abs() <= tol
            && self.translation.iter().all(|v| v.is_finite())
    }
}

impl Mul for Pose {
    type Output = Pose;
    fn mul(self, rhs: Pose) -> Pose {
        self.compose(&rhs)
    }
}

impl Mul<&Pose> for &Pose {
    type Output = Pose;
    fn mul(self, rhs: &Pose) -> Pose {
        self.compose(rhs)
    }
}

pub fn rot_x(angle: f64) -> Mat3 {
    let (s, c) = angle.sin_cos();
    Mat3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

pub fn rot_y(angle: f64) -> Mat3 {
    let (s, c) = angle.sin_cos();
    Mat3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

pub fn rot_z(angle: f64) -> Mat3 {
    let (s, c) = angle.sin_cos();
    Mat3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Skew-symmetric cross-product matrix.
pub fn skew(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

pub fn exp_so3(rotvec: Vec3) -> Mat3 {
    Rotation3::from_scaled_axis(rotvec).into_inner()
}

/// Rotation vector of `r`, accurate for small angles and near π.
pub fn log_so3(r: &Mat3) -> Vec3 {
    let w = 0.5
        * Vec3::new(
            r[(2, 1)] - r[(1, 2)],
            r[(0, 2)] - r[(2, 0)],
            r[(1, 0)] - r[(0, 1)],
        );
    let s = w.norm();
    let c = (0.5 * (r.trace() - 1.0)).clamp(-1.0, 1.0);
    let theta = s.atan2(c);
    if s == 0.0 && c > 0.0 {
        return Vec3::zeros();
    }
    if theta < 3.0 {
        // θ/sin θ, with the series for tiny angles.
        let k = if s < 1e-8 {
            1.0 + theta * theta / 6.0
        } else {
            theta / s
        };
        return w * k;
    }
    // Near π the skew part vanishes; the symmetric part is c·I + (1 - c)·a·aᵀ.
    let b = ((r + r.transpose()) * 0.5 - Mat3::identity() * c) / (1.0 - c);
    let i = (0..3)
        .max_by(|&i, &j| b[(i, i)].total_cmp(&b[(j, j)]))
        .unwrap();
    let mut axis = b.column(i).into_owned() / b[(i, i)].sqrt();
    axis /= axis.norm();
    if axis.dot(&w) < 0.0 {
        axis = -axis;
    }
    axis * theta
}

/// Geodesic angle of a rotation matrix, in [0, π].
pub fn rotation_angle(r: &Mat3) -> f64 {
    let c = ((r.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    // acos loses precision near 0; use the skew part there.
    let s = 0.5
        * Vec3::new(
            r[(2, 1)] - r[(1, 2)],
            r[(0, 2)] - r[(2, 0)],
            r[(1, 0)] - r[(0, 1)],
        )
        .norm();
    s.atan2(c)
}

/// Max-abs entry of `RᵀR − I`.
pub fn orthonormality_drift(r: &Mat3) -> f64 {
    (r.transpose() * r - Mat3::identity()).abs().max()
}

/// Nearest rotation in the Frobenius sense (polar factor via SVD).
pub fn reorthonormalize(r: &Mat3) -> Mat3 {
    let svd = r.svd(true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut out = u * v_t;
    if out.determinant() < 0.0 {
        let mut u = u;
        let mut col = u.column_mut(2);
        col *= -1.0;
        out = u * v_t;
    }
    out
}

/// Pose at `eye` whose +Z axis points at `target` and whose +Y axis leans
/// toward `up_hint`.
pub fn look_at_pose(eye: &Vec3, target: &Vec3, up_hint: &Vec3) -> Result<Pose, GeometryError> {
    let aim = target - eye;
    let aim_norm = aim.norm();
    let up_norm = up_hint.norm();
    if !(aim_norm > 1e-12) || !(up_norm > 1e-12) {
        return Err(GeometryError::DegenerateAim);
    }
    let z = aim / aim_norm;
    let up = up_hint / up_norm;
    let y_raw = up - z * up.dot(&z);
    let y_norm = y_raw.norm();
    if y_norm < 1e-9 {
        return Err(GeometryError::DegenerateAim);
    }
    let y = y_raw / y_norm;
    let x = y.cross(&z);
    let rotation = Mat3::from_columns(&[x, y, z]);
    Ok(Pose::new(rotation, *eye))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_2;

    fn random_pose(rng: &mut ChaCha8Rng) -> Pose {
        let rv = Vec3::new(
            rng.random_range(-3.0..3.0),
            rng.random_range(-3.0..3.0),
            rng.random_range(-3.0..3.0),
        );
        let t = Vec3::new(
            rng.random_range(-2.0..2.0),
            rng.random_range(-2.0..2.0),
            rng.random_range(-2.0..2.0),
        );
        Pose::from_rotation_vector(rv, t)
    }

    #[test]
    fn identity_composition() {
        let t = Pose::from_translation(1.0, 2.0, 3.0) * Pose::rot_x(0.3);
        let c = Pose::identity() * t;
        assert_eq!(c, t);
    }

    #[test]
    fn commuting_translations() {
        let c = Pose::from_translation(1.0, 0.0, 0.0) * Pose::from_translation(0.0, 1.0, 0.0);
        assert_eq!(c.translation, Vec3::new(1.0, 1.0, 0.0));
    }

    #[test]
    fn quarter_turn() {
        let p = Pose::rot_z(FRAC_PI_2).transform_point(&Vec3::x());
        assert!((p - Vec3::y()).norm() < 1e-15);
    }

    #[test]
    fn invert_simple() {
        assert_eq!(Pose::identity().inverse(), Pose::identity());
        let inv = Pose::from_translation(3.0, 0.0, 0.0).inverse();
        assert_eq!(inv.translation, Vec3::new(-3.0, 0.0, 0.0));
    }

    #[test]
    fn invert_round_trips_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let p = Pose::rot_z(30f64.to_radians()) * Pose::from_translation(0.4, -1.2, 2.0);
        let inv = p.inverse();
        for _ in 0..100 {
            let x = Vec3::new(
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
            );
            let back = inv.transform_point(&p.transform_point(&x));
            assert!((back - x).norm() < 1e-9);
        }
        let (dp, da) = (p * inv).distance(&Pose::identity());
        assert!(dp < 1e-9 && da < 1e-9);
    }

    #[test]
    fn compose_is_associative() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let (a, b, c) = (
                random_pose(&mut rng),
                random_pose(&mut rng),
                random_pose(&mut rng),
            );
            let (dp, da) = ((a * b) * c).distance(&(a * (b * c)));
            assert!(dp < 1e-9 && da < 1e-9);
        }
    }

    #[test]
    fn orthonormality_survives_long_chains() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut acc = Pose::identity();
        for _ in 0..10_000 {
            acc = acc * random_pose(&mut rng);
        }
        assert!(orthonormality_drift(&acc.rotation) < 1e-6);
        assert!((acc.rotation.determinant() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn reorthonormalize_fixes_drift() {
        let mut r = rot_y(0.7);
        r[(0, 1)] += 1e-4;
        let fixed = reorthonormalize(&r);
        assert!(orthonormality_drift(&fixed) < 1e-14);
        assert!((fixed.determinant() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn look_at_axis_aligned() {
        let pose = look_at_pose(&Vec3::new(0.0, 0.0, 1.0), &Vec3::zeros(), &Vec3::y()).unwrap();
        assert!((pose.z_axis() - Vec3::new(0.0, 0.0, -1.0)).norm() < 1e-15);
        assert!(pose.y_axis().dot(&Vec3::y()) >= 0.0);
    }

    #[test]
    fn look_at_parallel_up_is_degenerate() {
        let r = look_at_pose(&Vec3::new(0.0, 0.0, 1.0), &Vec3::zeros(), &Vec3::z());
        assert_eq!(r, Err(GeometryError::DegenerateAim));
        let r = look_at_pose(&Vec3::x(), &Vec3::x(), &Vec3::z());
        assert_eq!(r, Err(GeometryError::DegenerateAim));
    }

    #[test]
    fn log_exp_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for scale in [1e-9, 1e-6, 1e-3, 1.0, 3.1, std::f64::consts::PI - 3e-6] {
            for _ in 0..50 {
                let axis = Vec3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                )
                .normalize();
                let rv = axis * scale;
                let back = log_so3(&exp_so3(rv));
                assert!((back - rv).norm() <= 1e-12 + 1e-9 * (scale > 3.0) as u8 as f64);
            }
        }
        assert_eq!(log_so3(&Mat3::identity()), Vec3::zeros());
    }

    #[test]
    fn rotation_angle_small_and_large() {
        assert!((rotation_angle(&rot_x(1e-9)) - 1e-9).abs() < 1e-20);
        assert!((rotation_angle(&rot_z(3.0)) - 3.0).abs() < 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn vec3(range: f64) -> impl Strategy<Value = Vec3> {
            (-range..range, -range..range, -range..range).prop_map(|(x, y, z)| Vec3::new(x, y, z))
        }

        proptest! {
            #[test]
            fn look_at_points_at_target(eye in vec3(3.0), target in vec3(3.0), up in vec3(1.0)) {
                let aim = target - eye;
                prop_assume!(aim.norm() > 1e-3 && up.norm() > 1e-3);
                prop_assume!(aim.normalize().cross(&up.normalize()).norm() > 1e-3);
                let pose = look_at_pose(&eye, &target, &up).unwrap();
                prop_assert!((pose.z_axis().dot(&aim.normalize()) - 1.0).abs() < 1e-9);
                prop_assert!(pose.y_axis().dot(&up) >= 0.0);
                prop_assert!(pose.is_valid(1e-9));
            }

            #[test]
            fn compose_inverse_is_identity(rv in vec3(3.0), t in vec3(5.0)) {
                let p = Pose::from_rotation_vector(rv, t);
                let (dp, da) = (p * p.inverse()).distance(&Pose::identity());
                prop_assert!(dp < 1e-9 && da < 1e-9);
            }
        }
    }
}
