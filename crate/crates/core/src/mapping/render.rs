//! Projector framebuffer rendering through the estimated face plane.

use crate::face::FaceModel;
use crate::geometry::{Mat3, Pose, Vec3};
use crate::optics::{CameraIntrinsics, Pixel, ProjectorModel};

use super::{
    triangulate_landmarks, Frame, MappingError, MaskTemplate, TriangleLocator, TriangleMesh,
};

/// Casts projector pixels onto the face plane, in head-frame coordinates.
#[derive(Debug, Clone, Copy)]
pub struct PlaneCaster {
    k: CameraIntrinsics,
    rot: Mat3,
    origin: Vec3,
    center: Vec3,
    normal: Vec3,
}

impl PlaneCaster {
    /// `head` and `projector` are both frame-to-world poses.
    pub fn new(
        k: &CameraIntrinsics,
        face: &FaceModel,
        head: &Pose,
        projector: &Pose,
    ) -> Result<Self, MappingError> {
        let rel = head.inverse().compose(projector);
        let (center, normal) = face.canonical_plane();
        // The projector must be on the front side of the face, and the face
        // in front of the projector.
        let in_proj = rel.inverse().transform_point(&center);
        if normal.dot(&(rel.translation - center)) <= 0.0 || in_proj.z <= 0.0 {
            return Err(MappingError::FaceBehindProjector);
        }
        Ok(Self {
            k: *k,
            rot: rel.rotation,
            origin: rel.translation,
            center,
            normal,
        })
    }

    /// Head-frame (x, y) where the ray through projector pixel `p` meets the
    /// plane, if it does so in front of the projector.
    pub fn cast(&self, p: &Pixel) -> Option<Pixel> {
        let d = self.rot * self.k.ray(p);
        let denom = self.normal.dot(&d);
        if denom >= 0.0 {
            return None;
        }
        let s = self.normal.dot(&(self.center - self.origin)) / denom;
        if s <= 0.0 {
            return None;
        }
        let x = self.origin + d * s;
        Some(Pixel::new(x.x, x.y))
    }

    /// Projector pixel of a head-frame point (continuous coordinates).
    pub fn project(&self, x: &Vec3) -> Option<Pixel> {
        let p = self.rot.transpose() * (x - self.origin);
        self.k.project_camera_frame(&p).ok()
    }
}

/// Canonical mesh plus its barycentric solvers, built once per face model.
#[derive(Debug, Clone)]
pub struct Renderer {
    layout: Vec<Pixel>,
    mesh: TriangleMesh,
    locator: TriangleLocator,
}

impl Renderer {
    pub fn new(face: &FaceModel) -> Result<Self, MappingError> {
        let layout = face.layout_2d();
        let mesh = triangulate_landmarks(&layout)?;
        let locator = TriangleLocator::new(&layout, &mesh);
        Ok(Self {
            layout,
            mesh,
            locator,
        })
    }

    pub fn mesh(&self) -> &TriangleMesh {
        &self.mesh
    }

    pub fn layout(&self) -> &[Pixel] {
        &self.layout
    }

    /// Renders by walking each triangle's projected bounding box. A pixel
    /// belongs to the first triangle (in mesh order) containing its face
    /// point, so the output matches [`Renderer::render_reference`] byte for
    /// byte.
    pub fn render(
        &self,
        template: &MaskTemplate,
        face_estimate: &Pose,
        face: &FaceModel,
        k: &CameraIntrinsics,
        projector_pose: &Pose,
    ) -> Result<Frame, MappingError> {
        let caster = PlaneCaster::new(k, face, face_estimate, projector_pose)?;
        let (w, h) = (k.width, k.height);
        let mut frame = Frame::new(w, h, template.texture.channels);
        let mut owned = vec![false; w as usize * h as usize];
        for t in 0..self.locator.len() {
            let Some(corners) = self.projected_corners(&caster, face, t) else {
                continue;
            };
            let (lo, hi) = corners
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                    (lo.min(p.y), hi.max(p.y))
                });
            let clip = |v: f64, max: u32| v.clamp(0.0, max as f64) as u32;
            for j in clip(lo.floor() - 1.0, h)..clip(hi.ceil() + 1.0, h) {
                let yc = j as f64 + 0.5;
                let Some((xl, xr)) = row_span(&corners, yc - 1.0, yc + 1.0) else {
                    continue;
                };
                for i in clip(xl.floor() - 1.0, w)..clip(xr.ceil() + 1.0, w) {
                    let idx = j as usize * w as usize + i as usize;
                    if owned[idx] {
                        continue;
                    }
                    let Some(xy) = caster.cast(&Pixel::new(i as f64 + 0.5, j as f64 + 0.5)) else {
                        continue;
                    };
                    let wts = self.locator.barycentric(t, &xy);
                    if !TriangleLocator::inside(&wts) {
                        continue;
                    }
                    owned[idx] = true;
                    let tex = self.locator.apply(t, &wts, &template.anchors);
                    frame.set(i, j, sample_nearest(&template.texture, &tex));
                }
            }
        }
        Ok(frame)
    }

    /// Straightforward per-pixel renderer used as the test reference.
    pub fn render_reference(
        &self,
        template: &MaskTemplate,
        face_estimate: &Pose,
        face: &FaceModel,
        k: &CameraIntrinsics,
        projector_pose: &Pose,
    ) -> Result<Frame, MappingError> {
        let caster = PlaneCaster::new(k, face, face_estimate, projector_pose)?;
        let mut frame = Frame::new(k.width, k.height, template.texture.channels);
        for j in 0..k.height {
            for i in 0..k.width {
                let Some(xy) = caster.cast(&Pixel::new(i as f64 + 0.5, j as f64 + 0.5)) else {
                    continue;
                };
                if let Some((t, wts)) = self.locator.locate(&xy) {
                    let tex = self.locator.apply(t, &wts, &template.anchors);
                    frame.set(i, j, sample_nearest(&template.texture, &tex));
                }
            }
        }
        Ok(frame)
    }

    /// Projector pixels of triangle `t`'s corners on the plane. Projective
    /// maps keep triangles as triangles, so these bound the covered region.
    fn projected_corners(
        &self,
        caster: &PlaneCaster,
        face: &FaceModel,
        t: usize,
    ) -> Option<[Pixel; 3]> {
        let c = self.locator.corners(t);
        Some([
            caster.project(&face.plane_point_at(&c[0]))?,
            caster.project(&face.plane_point_at(&c[1]))?,
            caster.project(&face.plane_point_at(&c[2]))?,
        ])
    }
}

/// Horizontal extent of a triangle clipped to the band `y_lo <= y <= y_hi`.
fn row_span(tri: &[Pixel; 3], y_lo: f64, y_hi: f64) -> Option<(f64, f64)> {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut take = |x: f64| {
        lo = lo.min(x);
        hi = hi.max(x);
    };
    for e in 0..3 {
        let (a, b) = (tri[e], tri[(e + 1) % 3]);
        if a.y >= y_lo && a.y <= y_hi {
            take(a.x);
        }
        if a.y != b.y {
            for y in [y_lo, y_hi] {
                if (a.y - y) * (b.y - y) <= 0.0 {
                    take(a.x + (y - a.y) / (b.y - a.y) * (b.x - a.x));
                }
            }
        }
    }
    (lo <= hi).then_some((lo, hi))
}

fn sample_nearest(texture: &Frame, t: &Pixel) -> [u8; 3] {
    let (u, v) = (t.x.floor(), t.y.floor());
    if u < 0.0 || v < 0.0 || u >= texture.width as f64 || v >= texture.height as f64 {
        return [0, 0, 0];
    }
    texture.get(u as u32, v as u32)
}

/// One-shot render; builds the canonical mesh on every call. Loops should
/// keep a [`Renderer`].
pub fn render_projector_frame(
    template: &MaskTemplate,
    face_pose_estimate: &Pose,
    face: &FaceModel,
    proj: &ProjectorModel,
    proj_pose: &Pose,
) -> Result<Frame, MappingError> {
    Renderer::new(face)?.render(
        template,
        face_pose_estimate,
        face,
        &proj.intrinsics,
        proj_pose,
    )
}
