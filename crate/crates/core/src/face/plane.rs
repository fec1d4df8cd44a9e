use nalgebra::Matrix3;

use crate::geometry::{Pose, Vec3};

use super::FaceModel;

/// Best-fit plane of the face in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FacePlane {
    /// Unit normal pointing out of the face toward the observer.
    pub normal: Vec3,
    pub center: Vec3,
    /// RMS point-to-plane distance of the landmarks, meters.
    pub residual: f64,
}

impl FacePlane {
    /// Ray parameter `s` with `origin + s·dir` on the plane, if the ray is not
    /// parallel to it.
    pub fn intersect(&self, origin: &Vec3, dir: &Vec3) -> Option<f64> {
        let denom = self.normal.dot(dir);
        if denom.abs() < 1e-12 {
            return None;
        }
        Some(self.normal.dot(&(self.center - origin)) / denom)
    }
}

/// Centroid, unit normal (smallest principal direction, sign unspecified)
/// and RMS residual of a point set.
pub fn best_fit_plane(points: &[Vec3]) -> (Vec3, Vec3, f64) {
    let n = points.len().max(1) as f64;
    let centroid = points.iter().fold(Vec3::zeros(), |acc, p| acc + p) / n;
    let mut scatter = Matrix3::zeros();
    for p in points {
        let d = p - centroid;
        scatter += d * d.transpose();
    }
    let eig = scatter.symmetric_eigen();
    let i = eig.eigenvalues.imin();
    let normal = eig.eigenvectors.column(i).normalize();
    let rms = (points
        .iter()
        .map(|p| normal.dot(&(p - centroid)).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    (centroid, normal, rms)
}

/// Face plane for a head at `pose_estimate` (head frame to world). The
/// canonical plane is rigidly carried along, so the fit is exactly
/// equivariant.
pub fn fit_face_plane(pose_estimate: &Pose, face: &FaceModel) -> FacePlane {
    let (c, n) = face.canonical_plane();
    let normal = pose_estimate.rotation * n;
    FacePlane {
        normal: normal / normal.norm(),
        center: pose_estimate.transform_point(&c),
        residual: face.plane_residual(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::face::procedural_points;
    use crate::geometry::exp_so3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Cyclic Jacobi eigen decomposition of a symmetric 3×3 matrix.
    fn jacobi_eigen(mut a: [[f64; 3]; 3]) -> ([f64; 3], [[f64; 3]; 3]) {
        let mut v = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        for _ in 0..100 {
            let off = a[0][1].powi(2) + a[0][2].powi(2) + a[1][2].powi(2);
            if off < 1e-30 {
                break;
            }
            for (p, q) in [(0, 1), (0, 2), (1, 2)] {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..3 {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..3 {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
        ([a[0][0], a[1][1], a[2][2]], v)
    }

    #[test]
    fn planar_variant_has_zero_residual() {
        let flat: Vec<Vec3> = procedural_points()
            .into_iter()
            .map(|p| Vec3::new(p.x, p.y, 0.0))
            .collect();
        let face = FaceModel::new(flat, (0, 16), 0.15).unwrap();
        let plane = fit_face_plane(&Pose::identity(), &face);
        assert!(plane.residual < 1e-15);
        assert!((plane.normal - Vec3::z()).norm() < 1e-12);
    }

    #[test]
    fn identity_pose_matches_jacobi_oracle() {
        let face = FaceModel::canonical();
        let pts = face.points();
        let c = pts.iter().fold(Vec3::zeros(), |a, p| a + p) / pts.len() as f64;
        let mut m = [[0.0; 3]; 3];
        for p in pts {
            let d = p - c;
            for i in 0..3 {
                for j in 0..3 {
                    m[i][j] += d[i] * d[j];
                }
            }
        }
        let (vals, vecs) = jacobi_eigen(m);
        let k = (0..3).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
        let mut oracle = Vec3::new(vecs[0][k], vecs[1][k], vecs[2][k]).normalize();
        if oracle.z < 0.0 {
            oracle = -oracle;
        }
        let plane = fit_face_plane(&Pose::identity(), &face);
        assert!(
            (plane.normal - oracle).norm() < 1e-10,
            "{} vs {}",
            plane.normal,
            oracle
        );
        assert!((plane.center - c).norm() < 1e-15);
        assert!((plane.normal.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn normal_is_rotation_equivariant() {
        let face = FaceModel::canonical();
        let base = fit_face_plane(&Pose::identity(), &face);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let rv = Vec3::new(
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
            );
            let t = Vec3::new(
                rng.random_range(-1.0..1.0),
                0.3,
                rng.random_range(-1.0..1.0),
            );
            let pose = Pose::from_rotation_vector(rv, t);
            let plane = fit_face_plane(&pose, &face);
            assert!((plane.normal - exp_so3(rv) * base.normal).norm() < 1e-12);

            // Refit from scratch on the transformed points.
            let world: Vec<Vec3> = face
                .points()
                .iter()
                .map(|p| pose.transform_point(p))
                .collect();
            let (c, n, r) = best_fit_plane(&world);
            assert!((c - plane.center).norm() < 1e-12);
            assert!(1.0 - n.dot(&plane.normal).abs() < 1e-12);
            assert!((r - plane.residual).abs() < 1e-12);
        }
    }

    #[test]
    fn normal_faces_viewer() {
        let face = FaceModel::canonical();
        let plane = fit_face_plane(&Pose::identity(), &face);
        assert!(plane.normal.z > 0.9);
    }

    #[test]
    fn ray_intersection() {
        let plane = FacePlane {
            normal: Vec3::z(),
            center: Vec3::new(0.0, 0.0, 1.0),
            residual: 0.0,
        };
        let s = plane
            .intersect(&Vec3::zeros(), &Vec3::new(0.1, 0.0, 2.0))
            .unwrap();
        assert!((s - 0.5).abs() < 1e-15);
        assert!(plane.intersect(&Vec3::zeros(), &Vec3::x()).is_none());
    }
}
