//! Planar homographies: normalized DLT estimation and camera–projector
//! calibration on a single plane.

use std::path::Path;

use nalgebra::{DMatrix, Matrix3, Vector3};

use super::{OpticsError, Pixel};

/// 3×3 projective map, stored with unit Frobenius norm and `H[2][2] ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography(Matrix3<f64>);

impl Homography {
    pub fn identity() -> Self {
        Self::new(Matrix3::identity())
    }

    /// Wraps and normalizes a raw matrix.
    pub fn new(m: Matrix3<f64>) -> Self {
        Self(normalize(m))
    }

    /// Pure translation by `(tx, ty)`.
    pub fn translation(tx: f64, ty: f64) -> Self {
        Self::new(Matrix3::new(1.0, 0.0, tx, 0.0, 1.0, ty, 0.0, 0.0, 1.0))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn inverse(&self) -> Option<Self> {
        self.0.try_inverse().map(Self::new)
    }

    /// `‖self − other‖_F / ‖other‖_F` after normalization (both are unit norm).
    pub fn relative_error(&self, other: &Homography) -> f64 {
        (self.0 - other.0).norm() / other.0.norm()
    }
}

/// Scales to unit Frobenius norm and fixes the sign so that `H[2][2] ≥ 0`
/// (or, when it is zero, the first nonzero entry in row-major order is
/// positive). Already-normalized input is returned unchanged.
fn normalize(m: Matrix3<f64>) -> Matrix3<f64> {
    let norm = m.norm();
    if norm == 0.0 || !norm.is_finite() {
        return m;
    }
    let pivot = if m[(2, 2)] != 0.0 {
        m[(2, 2)]
    } else {
        (0..3)
            .flat_map(|r| (0..3).map(move |c| (r, c)))
            .map(|rc| m[rc])
            .find(|v| *v != 0.0)
            .unwrap_or(1.0)
    };
    let sign_ok = pivot > 0.0;
    if sign_ok && (norm - 1.0).abs() <= 4.0 * f64::EPSILON {
        return m;
    }
    let s = if sign_ok { 1.0 / norm } else { -1.0 / norm };
    m * s
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub src: Pixel,
    pub dst: Pixel,
}

impl Correspondence {
    pub fn new(src: Pixel, dst: Pixel) -> Self {
        Self { src, dst }
    }
}

/// Similarity moving the centroid to the origin with mean distance √2.
fn isotropic_normalizer(points: &[Pixel]) -> Result<Matrix3<f64>, OpticsError> {
    let n = points.len() as f64;
    let centroid = points.iter().fold(Pixel::zeros(), |a, p| a + p) / n;
    let mean_dist = points.iter().map(|p| (p - centroid).norm()).sum::<f64>() / n;
    if !(mean_dist > 0.0) || !mean_dist.is_finite() {
        return Err(OpticsError::DegenerateConfiguration("coincident points"));
    }
    let s = std::f64::consts::SQRT_2 / mean_dist;
    Ok(Matrix3::new(
        s,
        0.0,
        -s * centroid.x,
        0.0,
        s,
        -s * centroid.y,
        0.0,
        0.0,
        1.0,
    ))
}

fn apply_affine(t: &Matrix3<f64>, p: &Pixel) -> Pixel {
    Pixel::new(t[(0, 0)] * p.x + t[(0, 2)], t[(1, 1)] * p.y + t[(1, 2)])
}

fn cross2(a: &Pixel, b: &Pixel, c: &Pixel) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

/// Rejects duplicate points, fully collinear sets, and (for minimal sets)
/// any collinear triple. Operates on normalized coordinates.
fn check_configuration(points: &[Pixel]) -> Result<(), OpticsError> {
    const EPS: f64 = 1e-9;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            if (points[i] - points[j]).norm() < EPS {
                return Err(OpticsError::DegenerateConfiguration("duplicate points"));
            }
        }
    }
    let n = points.len();
    if n == 4 {
        for skip in 0..4 {
            let tri: Vec<&Pixel> = (0..4).filter(|&k| k != skip).map(|k| &points[k]).collect();
            if cross2(tri[0], tri[1], tri[2]).abs() < EPS {
                return Err(OpticsError::DegenerateConfiguration("collinear triple"));
            }
        }
    } else {
        let a = &points[0];
        let far = points
            .iter()
            .max_by(|p, q| (*p - a).norm().total_cmp(&(*q - a).norm()))
            .unwrap();
        if points.iter().all(|p| cross2(a, far, p).abs() < EPS) {
            return Err(OpticsError::DegenerateConfiguration("all points collinear"));
        }
    }
    Ok(())
}

/// Normalized DLT estimate of the homography mapping `src` to `dst`.
pub fn estimate_homography(pairs: &[Correspondence]) -> Result<Homography, OpticsError> {
    if pairs.len() < 4 {
        return Err(OpticsError::InsufficientPairs(pairs.len()));
    }
    if pairs
        .iter()
        .any(|c| !(c.src.iter().chain(c.dst.iter()).all(|v| v.is_finite())))
    {
        return Err(OpticsError::DegenerateConfiguration(
            "non-finite coordinates",
        ));
    }
    let src: Vec<Pixel> = pairs.iter().map(|c| c.src).collect();
    let dst: Vec<Pixel> = pairs.iter().map(|c| c.dst).collect();
    let t_src = isotropic_normalizer(&src)?;
    let t_dst = isotropic_normalizer(&dst)?;
    let src_n: Vec<Pixel> = src.iter().map(|p| apply_affine(&t_src, p)).collect();
    let dst_n: Vec<Pixel> = dst.iter().map(|p| apply_affine(&t_dst, p)).collect();
    check_configuration(&src_n)?;
    check_configuration(&dst_n)?;

    // Pad to a square system so the SVD exposes the full right null space.
    let rows = (2 * pairs.len()).max(9);
    let mut a = DMatrix::<f64>::zeros(rows, 9);
    for (i, (s, d)) in src_n.iter().zip(&dst_n).enumerate() {
        let (x, y, u, v) = (s.x, s.y, d.x, d.y);
        let r = 2 * i;
        a.row_mut(r)
            .copy_from_slice(&[-x, -y, -1.0, 0.0, 0.0, 0.0, u * x, u * y, u]);
        a.row_mut(r + 1)
            .copy_from_slice(&[0.0, 0.0, 0.0, -x, -y, -1.0, v * x, v * y, v]);
    }
    let svd = a.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    let smax = svd.singular_values[order[order.len() - 1]];
    if svd.singular_values[order[1]] <= 1e-10 * smax {
        return Err(OpticsError::DegenerateConfiguration(
            "solution space is not one-dimensional",
        ));
    }
    let h = v_t.row(order[0]);
    let hn = Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8]);
    let t_dst_inv = t_dst
        .try_inverse()
        .ok_or(OpticsError::DegenerateConfiguration("normalizer"))?;
    let m = t_dst_inv * hn * t_src;
    let scale = m.norm();
    if m.determinant().abs() <= 1e-12 * scale * scale * scale {
        return Err(OpticsError::DegenerateConfiguration("singular homography"));
    }
    Ok(Homography::new(m))
}

pub fn apply_homography(h: &Homography, p: &Pixel) -> Result<Pixel, OpticsError> {
    let v = h.0 * Vector3::new(p.x, p.y, 1.0);
    if v.z.abs() < 1e-12 {
        return Err(OpticsError::PointAtInfinity);
    }
    Ok(Pixel::new(v.x / v.z, v.y / v.z))
}

/// Camera–projector calibration result. Valid only on the plane the grid
/// was observed on.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    /// Maps projector pixels to camera pixels.
    pub homography: Homography,
    /// Per-correspondence transfer error in camera pixels.
    pub transfer_errors: Vec<f64>,
    pub mean_error: f64,
    pub max_error: f64,
}

/// Fits the projector→camera homography to a projected calibration grid.
pub fn calibrate_camera_projector(pattern: &[Correspondence]) -> Result<Calibration, OpticsError> {
    let homography = estimate_homography(pattern)?;
    let transfer_errors = pattern
        .iter()
        .map(|c| apply_homography(&homography, &c.src).map(|p| (p - c.dst).norm()))
        .collect::<Result<Vec<_>, _>>()?;
    let mean_error = transfer_errors.iter().sum::<f64>() / transfer_errors.len() as f64;
    let max_error = transfer_errors.iter().cloned().fold(0.0, f64::max);
    Ok(Calibration {
        homography,
        transfer_errors,
        mean_error,
        max_error,
    })
}

/// Parses `u_src v_src u_dst v_dst` lines; `#` starts a comment.
pub fn parse_correspondences(text: &str) -> Result<Vec<Correspondence>, OpticsError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let vals = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| OpticsError::Parse {
                line: idx + 1,
                message: e.to_string(),
            })?;
        if vals.len() != 4 || vals.iter().any(|v| !v.is_finite()) {
            return Err(OpticsError::Parse {
                line: idx + 1,
                message: "expected four finite numbers".into(),
            });
        }
        out.push(Correspondence::new(
            Pixel::new(vals[0], vals[1]),
            Pixel::new(vals[2], vals[3]),
        ));
    }
    Ok(out)
}

pub fn read_correspondences(path: &Path) -> Result<Vec<Correspondence>, OpticsError> {
    let text = std::fs::read_to_string(path).map_err(|e| OpticsError::Io(e.to_string()))?;
    parse_correspondences(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{look_at_pose, Pose, Vec3};
    use crate::optics::{project_point, CameraIntrinsics};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn square() -> Vec<Pixel> {
        vec![
            Pixel::new(0.0, 0.0),
            Pixel::new(1.0, 0.0),
            Pixel::new(1.0, 1.0),
            Pixel::new(0.0, 1.0),
        ]
    }

    fn map_all(h: &Matrix3<f64>, pts: &[Pixel]) -> Vec<Correspondence> {
        pts.iter()
            .map(|p| {
                let v = h * Vector3::new(p.x, p.y, 1.0);
                Correspondence::new(*p, Pixel::new(v.x / v.z, v.y / v.z))
            })
            .collect()
    }

    #[test]
    fn unit_square_identity() {
        let pairs: Vec<_> = square()
            .into_iter()
            .map(|p| Correspondence::new(p, p))
            .collect();
        let h = estimate_homography(&pairs).unwrap();
        assert!(h.relative_error(&Homography::identity()) < 1e-12);
    }

    #[test]
    fn translated_square() {
        let pairs: Vec<_> = square()
            .into_iter()
            .map(|p| Correspondence::new(p, p + Pixel::new(5.0, 7.0)))
            .collect();
        let h = estimate_homography(&pairs).unwrap();
        let m = h.matrix() / h.matrix()[(2, 2)];
        assert!((m.column(2) - Vector3::new(5.0, 7.0, 1.0)).norm() < 1e-10);
        assert!(h.relative_error(&Homography::translation(5.0, 7.0)) < 1e-12);
    }

    #[test]
    fn synthesize_and_recover() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..50 {
            let mut m = Matrix3::from_fn(|_, _| rng.random_range(-1.0..1.0));
            m[(2, 2)] = 1.0 + rng.random_range(0.0..1.0);
            m[(2, 0)] *= 1e-3;
            m[(2, 1)] *= 1e-3;
            let pts: Vec<Pixel> = (0..8)
                .map(|_| Pixel::new(rng.random_range(0.0..640.0), rng.random_range(0.0..480.0)))
                .collect();
            let truth = Homography::new(m);
            let est = estimate_homography(&map_all(&m, &pts)).unwrap();
            assert!(
                est.relative_error(&truth) < 1e-9,
                "{}",
                est.relative_error(&truth)
            );
        }
    }

    #[test]
    fn rescaling_invariance() {
        let m = Matrix3::new(1.1, 0.05, 12.0, -0.02, 0.95, -4.0, 1e-4, 2e-4, 1.0);
        let pts: Vec<Pixel> = (0..6)
            .map(|i| Pixel::new(37.0 * i as f64 + 3.0, (i * i) as f64 * 11.0 + 5.0))
            .collect();
        let pairs = map_all(&m, &pts);
        let h1 = estimate_homography(&pairs).unwrap();
        let k = 3.5;
        let scaled: Vec<_> = pairs
            .iter()
            .map(|c| Correspondence::new(c.src * k, c.dst * k))
            .collect();
        let h2 = estimate_homography(&scaled).unwrap();
        // Conjugate back: H1 = S⁻¹ H2 S with S = diag(k, k, 1).
        let s = Matrix3::new(k, 0.0, 0.0, 0.0, k, 0.0, 0.0, 0.0, 1.0);
        let back = Homography::new(s.try_inverse().unwrap() * h2.matrix() * s);
        assert!(back.relative_error(&h1) < 1e-10);
    }

    #[test]
    fn normalization_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let m = Matrix3::from_fn(|_, _| rng.random_range(-10.0..10.0));
            let once = Homography::new(m);
            let twice = Homography::new(*once.matrix());
            assert_eq!(once, twice);
            assert!(once.matrix()[(2, 2)] >= 0.0);
        }
    }

    #[test]
    fn degenerate_inputs() {
        let three: Vec<_> = square()[..3]
            .iter()
            .map(|p| Correspondence::new(*p, *p))
            .collect();
        assert_eq!(
            estimate_homography(&three),
            Err(OpticsError::InsufficientPairs(3))
        );
        let collinear: Vec<_> = (0..5)
            .map(|i| {
                let p = Pixel::new(i as f64, 2.0 * i as f64);
                Correspondence::new(p, p)
            })
            .collect();
        assert!(matches!(
            estimate_homography(&collinear),
            Err(OpticsError::DegenerateConfiguration(_))
        ));
        let mut dup: Vec<_> = square()
            .into_iter()
            .map(|p| Correspondence::new(p, p))
            .collect();
        dup[3] = dup[0];
        assert!(matches!(
            estimate_homography(&dup),
            Err(OpticsError::DegenerateConfiguration(_))
        ));
        let mut tri: Vec<_> = square()
            .into_iter()
            .map(|p| Correspondence::new(p, p))
            .collect();
        tri[2].src = Pixel::new(2.0, 0.0);
        assert!(matches!(
            estimate_homography(&tri),
            Err(OpticsError::DegenerateConfiguration(_))
        ));
    }

    #[test]
    fn apply_cases() {
        let p = Pixel::new(3.0, -4.0);
        assert!((apply_homography(&Homography::identity(), &p).unwrap() - p).norm() < 1e-12);
        let t = apply_homography(&Homography::translation(5.0, 7.0), &Pixel::zeros()).unwrap();
        assert!((t - Pixel::new(5.0, 7.0)).norm() < 1e-12);
        // Third row (1, 0, -2): w vanishes at x = 2.
        let h = Homography::new(Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0, -2.0));
        assert_eq!(
            apply_homography(&h, &Pixel::new(2.0, 5.0)),
            Err(OpticsError::PointAtInfinity)
        );
    }

    /// Renders a projector grid onto a plane and observes it with a camera.
    fn planar_grid() -> Vec<Correspondence> {
        let proj_k = CameraIntrinsics::default_projector();
        let cam_k = CameraIntrinsics::default_camera();
        let plane_point = Vec3::new(0.0, 0.0, 0.8);
        let plane_normal = Vec3::new(0.2, -0.1, -1.0).normalize();
        let proj_pose = Pose::from_translation(0.04, 0.0, 0.0);
        let cam_pose = look_at_pose(
            &Vec3::new(-0.04, 0.01, 0.0),
            &plane_point,
            &Vec3::new(0.0, -1.0, 0.0),
        )
        .unwrap();
        let mut out = Vec::new();
        for i in 0..9 {
            for j in 0..7 {
                let px = Pixel::new(100.0 + 135.0 * i as f64, 80.0 + 105.0 * j as f64);
                let dir = proj_pose.transform_vector(&proj_k.ray(&px));
                let o = proj_pose.translation;
                let s = plane_normal.dot(&(plane_point - o)) / plane_normal.dot(&dir);
                let hit = o + dir * s;
                let cam_px = project_point(&cam_k, &cam_pose, &hit).unwrap();
                out.push(Correspondence::new(px, cam_px));
            }
        }
        out
    }

    #[test]
    fn calibration_noiseless() {
        let cal = calibrate_camera_projector(&planar_grid()).unwrap();
        assert!(cal.max_error < 1e-6, "{}", cal.max_error);
    }

    #[test]
    fn calibration_with_noise() {
        let clean = planar_grid();
        let normal = Normal::new(0.0, 0.5).unwrap();
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let noisy: Vec<_> = clean
                .iter()
                .map(|c| {
                    let n = Pixel::new(normal.sample(&mut rng), normal.sample(&mut rng));
                    Correspondence::new(c.src, c.dst + n)
                })
                .collect();
            let cal = calibrate_camera_projector(&noisy).unwrap();
            assert!(cal.mean_error < 1.0, "seed {seed}: {}", cal.mean_error);
        }
    }

    #[test]
    fn calibration_needs_four() {
        let grid = planar_grid();
        assert_eq!(
            calibrate_camera_projector(&grid[..3]),
            Err(OpticsError::InsufficientPairs(3))
        );
    }

    #[test]
    fn correspondence_file_format() {
        let text = "# proj -> cam\n1 2 3 4\n\n  5.5 6 7 8 # trailing\n";
        let pairs = parse_correspondences(text).unwrap();
        assert_eq!(pairs.len(), 2);
        assert_eq!(pairs[1].src, Pixel::new(5.5, 6.0));
        assert!(matches!(
            parse_correspondences("1 2 3\n"),
            Err(OpticsError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_correspondences("ok\n1 2 x 4"),
            Err(OpticsError::Parse { line: 1, .. })
        ));
    }
}
