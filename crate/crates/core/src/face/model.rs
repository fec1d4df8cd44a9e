//! Canonical 68-point rigid head model.
//!
//! Head frame: +X toward the viewer's right, +Y up, +Z out of the face toward
//! the viewer. Index layout follows the usual 68-point annotation: jaw 0–16
//! (viewer's left to right), brows 17–26, nose 27–35, eyes 36–47, mouth
//! 48–67. Landmarks 0 and 16 sit at z = 0, so the head origin has the same
//! depth as the width endpoints.

use std::f64::consts::PI;
use std::path::Path;

use crate::geometry::Vec3;
use crate::optics::Pixel;

use super::FaceError;

pub const NUM_LANDMARKS: usize = 68;

/// Default distance between landmarks 0 and 16, meters.
pub const DEFAULT_REAL_WIDTH: f64 = 0.15;

pub const NOSE_TIP: usize = 30;

const FIXTURE: &str = include_str!("../../data/face68.txt");

#[derive(Debug, Clone, PartialEq)]
pub struct FaceModel {
    points: Vec<Vec3>,
    real_width: f64,
    width_pair: (usize, usize),
    plane_point: Vec3,
    plane_normal: Vec3,
    plane_residual: f64,
}

impl FaceModel {
    /// The committed canonical fixture at the default width.
    pub fn canonical() -> Self {
        let points = parse_face_points(FIXTURE).expect("bundled face fixture is valid");
        Self::new(points, (0, 16), DEFAULT_REAL_WIDTH).expect("bundled face fixture is valid")
    }

    /// Builds a model, uniformly rescaling `points` so the width pair is
    /// exactly `real_width` apart.
    pub fn new(
        points: Vec<Vec3>,
        width_pair: (usize, usize),
        real_width: f64,
    ) -> Result<Self, FaceError> {
        if points.len() != NUM_LANDMARKS {
            return Err(FaceError::InvalidModel(format!(
                "expected {NUM_LANDMARKS} points, got {}",
                points.len()
            )));
        }
        let (a, b) = width_pair;
        if a >= NUM_LANDMARKS || b >= NUM_LANDMARKS || a == b {
            return Err(FaceError::InvalidModel("bad width pair".into()));
        }
        if !(real_width > 0.0) || !real_width.is_finite() {
            return Err(FaceError::InvalidModel("real width must be > 0".into()));
        }
        if points.iter().any(|p| !p.iter().all(|v| v.is_finite())) {
            return Err(FaceError::InvalidModel("non-finite coordinate".into()));
        }
        let current = (points[a] - points[b]).norm();
        if !(current > 0.0) {
            return Err(FaceError::InvalidModel("width pair points coincide".into()));
        }
        let scale = real_width / current;
        let points: Vec<Vec3> = if scale == 1.0 {
            points
        } else {
            points.into_iter().map(|p| p * scale).collect()
        };
        let (plane_point, plane_normal, plane_residual) = super::plane::best_fit_plane(&points);
        let plane_normal = if plane_normal.z < 0.0 {
            -plane_normal
        } else {
            plane_normal
        };
        Ok(Self {
            points,
            real_width,
            width_pair,
            plane_point,
            plane_normal,
            plane_residual,
        })
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn real_width(&self) -> f64 {
        self.real_width
    }

    pub fn width_pair(&self) -> (usize, usize) {
        self.width_pair
    }

    /// Best-fit plane of the canonical points in the head frame (point,
    /// unit normal with positive z).
    pub fn canonical_plane(&self) -> (Vec3, Vec3) {
        (self.plane_point, self.plane_normal)
    }

    /// RMS distance of the landmarks from the canonical plane, meters.
    pub fn plane_residual(&self) -> f64 {
        self.plane_residual
    }

    /// Orthographic (x, y) layout of the landmarks, meters.
    pub fn layout_2d(&self) -> Vec<Pixel> {
        self.points.iter().map(|p| Pixel::new(p.x, p.y)).collect()
    }

    /// Point on the canonical best-fit plane with head-frame `(x, y)`.
    pub fn plane_point_at(&self, xy: &Pixel) -> Vec3 {
        let (c, n) = (self.plane_point, self.plane_normal);
        let z = c.z - (n.x * (xy.x - c.x) + n.y * (xy.y - c.y)) / n.z;
        Vec3::new(xy.x, xy.y, z)
    }

    /// Landmark `i` dropped onto the canonical plane along head Z.
    pub fn footprint(&self, i: usize) -> Vec3 {
        let p = self.points[i];
        self.plane_point_at(&Pixel::new(p.x, p.y))
    }
}

impl Default for FaceModel {
    fn default() -> Self {
        Self::canonical()
    }
}

/// Parses 68 lines of `x y z` (meters); `#` starts a comment.
pub fn parse_face_points(text: &str) -> Result<Vec<Vec3>, FaceError> {
    let mut out = Vec::with_capacity(NUM_LANDMARKS);
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let vals = line
            .split_whitespace()
            .map(str::parse::<f64>)
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| FaceError::Parse {
                line: idx + 1,
                message: e.to_string(),
            })?;
        if vals.len() != 3 {
            return Err(FaceError::Parse {
                line: idx + 1,
                message: "expected `x y z`".into(),
            });
        }
        out.push(Vec3::new(vals[0], vals[1], vals[2]));
    }
    if out.len() != NUM_LANDMARKS {
        return Err(FaceError::InvalidModel(format!(
            "expected {NUM_LANDMARKS} points, got {}",
            out.len()
        )));
    }
    Ok(out)
}

pub fn load_face_model(
    path: &Path,
    width_pair: (usize, usize),
    real_width: f64,
) -> Result<FaceModel, FaceError> {
    let text = std::fs::read_to_string(path).map_err(|e| FaceError::Io(e.to_string()))?;
    FaceModel::new(parse_face_points(&text)?, width_pair, real_width)
}

pub fn format_face_points(points: &[Vec3]) -> String {
    let mut s = String::new();
    let um = |v: f64| (v * 1e6).round() / 1e6 + 0.0;
    for p in points {
        s.push_str(&format!("{:.6} {:.6} {:.6}\n", um(p.x), um(p.y), um(p.z)));
    }
    s
}

/// Procedural layout from parametric curves; the committed fixture is this
/// output rounded to micrometers. Relief stays within 3 cm.
pub fn procedural_points() -> Vec<Vec3> {
    let mut pts = Vec::with_capacity(NUM_LANDMARKS);

    // Jaw: lower half-ellipse, ends at z = 0, chin pushed forward.
    for i in 0..17 {
        let phi = PI + PI * i as f64 / 16.0;
        let (s, c) = phi.sin_cos();
        pts.push(Vec3::new(0.075 * c, 0.02 + 0.11 * s, -0.02 * s));
    }
    // Brows, outer to inner on the left, inner to outer on the right.
    for k in 0..5 {
        let s = k as f64 / 4.0;
        let arch = (PI * s).sin();
        pts.push(Vec3::new(
            -0.065 + 0.045 * s,
            0.045 + 0.008 * arch,
            0.016 + 0.006 * arch,
        ));
    }
    for k in 0..5 {
        let s = k as f64 / 4.0;
        let arch = (PI * (1.0 - s)).sin();
        pts.push(Vec3::new(
            0.02 + 0.045 * s,
            0.045 + 0.008 * arch,
            0.016 + 0.006 * arch,
        ));
    }
    // Nose bridge down to the tip.
    for k in 0..4 {
        let s = k as f64 / 3.0;
        pts.push(Vec3::new(0.0, 0.035 - 0.035 * s, 0.02 + 0.01 * s));
    }
    // Nose base.
    for k in 0..5 {
        let u = (k as f64 - 2.0) / 2.0;
        let bump = 1.0 - u * u;
        pts.push(Vec3::new(
            0.016 * u,
            -0.010 - 0.003 * bump,
            0.018 + 0.006 * bump,
        ));
    }
    // Eyes: corner, two upper lid points, corner, two lower lid points.
    let eye = |cx: f64| -> Vec<Vec3> {
        let cy = 0.025;
        let corner_z = 0.010;
        let lid_z = 0.013;
        vec![
            Vec3::new(cx - 0.013, cy, corner_z),
            Vec3::new(cx - 0.0045, cy + 0.005, lid_z),
            Vec3::new(cx + 0.0045, cy + 0.005, lid_z),
            Vec3::new(cx + 0.013, cy, corner_z),
            Vec3::new(cx + 0.004, cy - 0.004, lid_z),
            Vec3::new(cx - 0.004, cy - 0.004, lid_z),
        ]
    };
    pts.extend(eye(-0.032));
    pts.extend(eye(0.032));
    // Outer lip contour, clockwise from the left corner (as seen by the viewer).
    let outer = [
        (-0.025, -0.045),
        (-0.016, -0.037),
        (-0.006, -0.034),
        (0.0, -0.035),
        (0.006, -0.034),
        (0.016, -0.037),
        (0.025, -0.045),
        (0.016, -0.053),
        (0.008, -0.056),
        (0.0, -0.057),
        (-0.008, -0.056),
        (-0.016, -0.053),
    ];
    for (x, y) in outer {
        let u: f64 = x / 0.025;
        pts.push(Vec3::new(x, y, 0.016 + 0.006 * (1.0 - u * u)));
    }
    let inner = [
        (-0.018, -0.045),
        (-0.008, -0.041),
        (0.0, -0.041),
        (0.008, -0.041),
        (0.018, -0.045),
        (0.008, -0.048),
        (0.0, -0.048),
        (-0.008, -0.048),
    ];
    for (x, y) in inner {
        let u: f64 = x / 0.018;
        pts.push(Vec3::new(x, y, 0.015 + 0.005 * (1.0 - u * u)));
    }
    debug_assert_eq!(pts.len(), NUM_LANDMARKS);
    pts
}
