//! Mask content: a texture plus the texture positions of the 68 landmarks.

use std::path::Path;

use crate::face::FaceModel;
use crate::optics::Pixel;

use super::{Frame, MappingError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskKind {
    Beard,
    Glasses,
    Logo,
    Makeup,
    Custom,
}

impl MaskKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Beard => "beard",
            Self::Glasses => "glasses",
            Self::Logo => "logo",
            Self::Makeup => "makeup",
            Self::Custom => "custom",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "beard" => Self::Beard,
            "glasses" => Self::Glasses,
            "logo" => Self::Logo,
            "makeup" => Self::Makeup,
            "custom" => Self::Custom,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaskTemplate {
    pub texture: Frame,
    pub anchors: Vec<Pixel>,
    pub kind: MaskKind,
}

/// Side length of the built-in textures.
pub const BUILTIN_SIZE: u32 = 512;

impl MaskTemplate {
    pub fn new(texture: Frame, anchors: Vec<Pixel>, kind: MaskKind) -> Result<Self, MappingError> {
        if anchors.len() != 68 {
            return Err(MappingError::InvalidTemplate(format!(
                "expected 68 anchors, got {}",
                anchors.len()
            )));
        }
        let (w, h) = (texture.width as f64, texture.height as f64);
        if let Some(i) = anchors
            .iter()
            .position(|a| !(a.x >= 0.0 && a.y >= 0.0 && a.x < w && a.y < h))
        {
            return Err(MappingError::InvalidTemplate(format!(
                "anchor {i} lies outside the {w}x{h} texture"
            )));
        }
        Ok(Self {
            texture,
            anchors,
            kind,
        })
    }

    /// Procedurally painted mask laid out on the face's canonical landmarks.
    pub fn builtin(kind: MaskKind, face: &FaceModel) -> Self {
        let layout = TextureLayout::new(face, BUILTIN_SIZE);
        let lips: Vec<Pixel> = face.layout_2d()[48..60].to_vec();
        let paint = |x: f64, y: f64| -> [u8; 3] {
            match kind {
                MaskKind::Beard => beard(x, y),
                MaskKind::Glasses => glasses(x, y),
                MaskKind::Logo => logo(x, y),
                MaskKind::Makeup => makeup(x, y, &lips),
                MaskKind::Custom => [255, 255, 255],
            }
        };
        let texture = Frame::from_fn(BUILTIN_SIZE, BUILTIN_SIZE, 3, |i, j| {
            let p = layout.to_face(&Pixel::new(i as f64 + 0.5, j as f64 + 0.5));
            paint(p.x, p.y)
        });
        Self {
            texture,
            anchors: layout.anchors(face),
            kind,
        }
    }

    /// Template whose texture is `texture`, anchored on the canonical layout.
    pub fn from_texture(texture: Frame, face: &FaceModel) -> Result<Self, MappingError> {
        let size = texture.width.min(texture.height);
        let layout = TextureLayout::new(face, size);
        Self::new(texture, layout.anchors(face), MaskKind::Custom)
    }
}

/// Similarity between face-plane meters and texture pixels: the landmark
/// bounding box is centered in a `size` square with a 5 % margin, with
/// texture v pointing down.
#[derive(Debug, Clone, Copy)]
pub struct TextureLayout {
    scale: f64,
    center_face: Pixel,
    center_tex: Pixel,
}

impl TextureLayout {
    pub fn new(face: &FaceModel, size: u32) -> Self {
        let pts = face.layout_2d();
        let (mut lo, mut hi) = (pts[0], pts[0]);
        for p in &pts {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        let span = (hi - lo).max();
        Self {
            scale: 0.9 * size as f64 / span,
            center_face: (lo + hi) / 2.0,
            center_tex: Pixel::new(size as f64 / 2.0, size as f64 / 2.0),
        }
    }

    pub fn to_texture(&self, p: &Pixel) -> Pixel {
        let d = (p - self.center_face) * self.scale;
        self.center_tex + Pixel::new(d.x, -d.y)
    }

    pub fn to_face(&self, t: &Pixel) -> Pixel {
        let d = (t - self.center_tex) / self.scale;
        self.center_face + Pixel::new(d.x, -d.y)
    }

    pub fn anchors(&self, face: &FaceModel) -> Vec<Pixel> {
        face.layout_2d()
            .iter()
            .map(|p| self.to_texture(p))
            .collect()
    }
}

fn in_ellipse(x: f64, y: f64, cx: f64, cy: f64, rx: f64, ry: f64) -> bool {
    ((x - cx) / rx).powi(2) + ((y - cy) / ry).powi(2) <= 1.0
}

fn beard(x: f64, y: f64) -> [u8; 3] {
    let jaw = in_ellipse(x, y, 0.0, 0.02, 0.074, 0.109);
    let mouth = in_ellipse(x, y, 0.0, -0.046, 0.03, 0.015);
    if jaw && y < -0.014 && !mouth {
        [150, 90, 40]
    } else {
        [0, 0, 0]
    }
}

fn glasses(x: f64, y: f64) -> [u8; 3] {
    let rim = |cx: f64| {
        let r = ((x - cx).powi(2) + (y - 0.025f64).powi(2)).sqrt();
        (0.017..=0.021).contains(&r)
    };
    let bridge = x.abs() < 0.012 && (0.030..=0.033).contains(&y);
    let temple = (0.052..=0.075).contains(&x.abs()) && (0.026..=0.029).contains(&y);
    if rim(-0.032) || rim(0.032) || bridge || temple {
        [0, 200, 255]
    } else {
        [0, 0, 0]
    }
}

fn logo(x: f64, y: f64) -> [u8; 3] {
    let (cx, cy) = (-0.045, -0.02);
    let r = ((x - cx).powi(2) + (y - cy).powi(2)).sqrt();
    if r <= 0.006 {
        [255, 255, 255]
    } else if (0.010..=0.015).contains(&r) {
        [230, 40, 40]
    } else {
        [0, 0, 0]
    }
}

fn makeup(x: f64, y: f64, lips: &[Pixel]) -> [u8; 3] {
    if point_in_polygon(&Pixel::new(x, y), lips) {
        [200, 30, 60]
    } else if in_ellipse(x, y, -0.032, 0.034, 0.016, 0.006)
        || in_ellipse(x, y, 0.032, 0.034, 0.016, 0.006)
    {
        [140, 60, 200]
    } else if in_ellipse(x, y, -0.05, -0.015, 0.014, 0.01)
        || in_ellipse(x, y, 0.05, -0.015, 0.014, 0.01)
    {
        [230, 120, 140]
    } else {
        [0, 0, 0]
    }
}

/// Even-odd rule.
fn point_in_polygon(p: &Pixel, poly: &[Pixel]) -> bool {
    let mut inside = false;
    let mut j = poly.len() - 1;
    for i in 0..poly.len() {
        let (a, b) = (poly[i], poly[j]);
        if (a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x {
            inside = !inside;
        }
        j = i;
    }
    inside
}

/// Parses 68 lines of `u v` texture pixels; `#` starts a comment.
pub fn parse_anchors(text: &str) -> Result<Vec<Pixel>, MappingError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|e: std::num::ParseFloatError| MappingError::Parse {
                line: idx + 1,
                message: e.to_string(),
            })?;
        if vals.len() != 2 {
            return Err(MappingError::Parse {
                line: idx + 1,
                message: "expected `u v`".into(),
            });
        }
        out.push(Pixel::new(vals[0], vals[1]));
    }
    Ok(out)
}

pub fn format_anchors(anchors: &[Pixel]) -> String {
    anchors
        .iter()
        .map(|a| format!("{} {}\n", a.x, a.y))
        .collect()
}

/// Custom template from a PPM/PGM texture and an anchor file.
pub fn load_template(texture: &Path, anchors: &Path) -> Result<MaskTemplate, MappingError> {
    let frame = Frame::load(texture)?;
    let text = std::fs::read_to_string(anchors)?;
    MaskTemplate::new(frame, parse_anchors(&text)?, MaskKind::Custom)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_are_valid_and_nonempty() {
        let face = FaceModel::canonical();
        for kind in [
            MaskKind::Beard,
            MaskKind::Glasses,
            MaskKind::Logo,
            MaskKind::Makeup,
        ] {
            let t = MaskTemplate::builtin(kind, &face);
            assert_eq!(t.anchors.len(), 68);
            assert!(t.texture.lit_count() > 1000, "{kind:?}");
            assert!(MaskTemplate::new(t.texture.clone(), t.anchors.clone(), kind).is_ok());
            assert_eq!(MaskKind::parse(kind.name()), Some(kind));
        }
    }

    #[test]
    fn layout_round_trip() {
        let face = FaceModel::canonical();
        let l = TextureLayout::new(&face, 256);
        for p in face.layout_2d() {
            assert!((l.to_face(&l.to_texture(&p)) - p).norm() < 1e-15);
        }
        // Up on the face is up in the image.
        assert!(l.to_texture(&Pixel::new(0.0, 0.05)).y < l.to_texture(&Pixel::new(0.0, -0.05)).y);
    }

    #[test]
    fn anchor_validation() {
        let f = Frame::new(10, 10, 3);
        assert!(
            MaskTemplate::new(f.clone(), vec![Pixel::new(1.0, 1.0); 67], MaskKind::Custom).is_err()
        );
        let mut a = vec![Pixel::new(1.0, 1.0); 68];
        a[5] = Pixel::new(10.0, 3.0);
        assert!(MaskTemplate::new(f, a, MaskKind::Custom).is_err());
    }

    #[test]
    fn anchor_file_round_trip() {
        let face = FaceModel::canonical();
        let a = TextureLayout::new(&face, 300).anchors(&face);
        assert_eq!(parse_anchors(&format_anchors(&a)).unwrap(), a);
        assert!(parse_anchors("1 2 3\n").is_err());
        assert!(parse_anchors("1 x\n").is_err());
    }

    #[test]
    fn polygon_test() {
        let sq = [
            Pixel::new(0.0, 0.0),
            Pixel::new(1.0, 0.0),
            Pixel::new(1.0, 1.0),
            Pixel::new(0.0, 1.0),
        ];
        assert!(point_in_polygon(&Pixel::new(0.5, 0.5), &sq));
        assert!(!point_in_polygon(&Pixel::new(1.5, 0.5), &sq));
    }
}
