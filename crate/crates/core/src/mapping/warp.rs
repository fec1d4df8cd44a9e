//! Piecewise-affine maps over a triangle mesh.

use crate::optics::Pixel;

use super::{MappingError, TriangleMesh};

/// Barycentric weights this far below zero still count as inside, so points
/// on shared edges are claimed by the first triangle in mesh order.
pub const INSIDE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy)]
struct Affine2 {
    origin: Pixel,
    // Inverse of [b - a, c - a].
    inv: [[f64; 2]; 2],
}

/// Mesh over fixed source points with precomputed barycentric solvers.
#[derive(Debug, Clone)]
pub struct TriangleLocator {
    triangles: Vec<[usize; 3]>,
    frames: Vec<Affine2>,
    corners: Vec<[Pixel; 3]>,
}

impl TriangleLocator {
    pub fn new(src: &[Pixel], mesh: &TriangleMesh) -> Self {
        let mut frames = Vec::with_capacity(mesh.triangles.len());
        let mut corners = Vec::with_capacity(mesh.triangles.len());
        for t in &mesh.triangles {
            let (a, b, c) = (src[t[0]], src[t[1]], src[t[2]]);
            let (e1, e2) = (b - a, c - a);
            let det = e1.x * e2.y - e2.x * e1.y;
            frames.push(Affine2 {
                origin: a,
                inv: [[e2.y / det, -e2.x / det], [-e1.y / det, e1.x / det]],
            });
            corners.push([a, b, c]);
        }
        Self {
            triangles: mesh.triangles.clone(),
            frames,
            corners,
        }
    }

    pub fn len(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn triangle(&self, i: usize) -> [usize; 3] {
        self.triangles[i]
    }

    pub fn corners(&self, i: usize) -> [Pixel; 3] {
        self.corners[i]
    }

    /// Barycentric weights of `p` in triangle `i`.
    pub fn barycentric(&self, i: usize, p: &Pixel) -> [f64; 3] {
        let f = &self.frames[i];
        let d = p - f.origin;
        let u = f.inv[0][0] * d.x + f.inv[0][1] * d.y;
        let v = f.inv[1][0] * d.x + f.inv[1][1] * d.y;
        [1.0 - u - v, u, v]
    }

    pub fn inside(w: &[f64; 3]) -> bool {
        w.iter().all(|&x| x >= -INSIDE_EPS)
    }

    /// First triangle (in mesh order) containing `p`, with its weights.
    pub fn locate(&self, p: &Pixel) -> Option<(usize, [f64; 3])> {
        (0..self.len()).find_map(|i| {
            let w = self.barycentric(i, p);
            Self::inside(&w).then_some((i, w))
        })
    }

    /// Blends `dst` values of triangle `i` with weights `w`.
    pub fn apply(&self, i: usize, w: &[f64; 3], dst: &[Pixel]) -> Pixel {
        let t = self.triangles[i];
        dst[t[0]] * w[0] + dst[t[1]] * w[1] + dst[t[2]] * w[2]
    }
}

/// Maps `p` through the affine map of its containing triangle, which takes
/// the triangle's `src` corners to the corresponding `dst` points.
pub fn piecewise_affine_map(
    src: &[Pixel],
    dst: &[Pixel],
    mesh: &TriangleMesh,
    p: &Pixel,
) -> Result<Pixel, MappingError> {
    let loc = TriangleLocator::new(src, mesh);
    let (i, w) = loc.locate(p).ok_or(MappingError::OutsideHull)?;
    Ok(loc.apply(i, &w, dst))
}
