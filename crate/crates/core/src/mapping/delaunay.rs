//! Bowyer–Watson Delaunay triangulation.

use crate::optics::Pixel;

use super::MappingError;

/// Triangles as counter-clockwise index triples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TriangleMesh {
    pub triangles: Vec<[usize; 3]>,
}

/// Twice the signed area of (a, b, c); positive when counter-clockwise.
pub fn orient2d(a: &Pixel, b: &Pixel, c: &Pixel) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

/// Positive when `d` lies strictly inside the circumcircle of the
/// counter-clockwise triangle (a, b, c).
pub fn incircle(a: &Pixel, b: &Pixel, c: &Pixel, d: &Pixel) -> f64 {
    let (adx, ady) = (a.x - d.x, a.y - d.y);
    let (bdx, bdy) = (b.x - d.x, b.y - d.y);
    let (cdx, cdy) = (c.x - d.x, c.y - d.y);
    let ad = adx * adx + ady * ady;
    let bd = bdx * bdx + bdy * bdy;
    let cd = cdx * cdx + cdy * cdy;
    adx * (bdy * cd - bd * cdy) - ady * (bdx * cd - bd * cdx) + ad * (bdx * cdy - bdy * cdx)
}

/// Points within this (normalized) incircle value count as cocircular and
/// do not invalidate a triangle, so ties keep the earlier triangulation.
const INCIRCLE_EPS: f64 = 1e-12;

/// In-circle test where super-triangle vertices (index ≥ `n`) sit at
/// infinity: a circle through one of them degenerates to the open half-plane
/// on its side of the finite edge, one through two of them to the half-plane
/// through the finite vertex parallel to their connecting line.
fn in_circumcircle(pts: &[Pixel], n: usize, t: &[usize; 3], p: &Pixel) -> bool {
    let ghosts = t.iter().filter(|&&v| v >= n).count();
    match ghosts {
        0 => incircle(&pts[t[0]], &pts[t[1]], &pts[t[2]], p) > INCIRCLE_EPS,
        1 => {
            let k = t.iter().position(|&v| v >= n).expect("one ghost");
            let (a, b) = (pts[t[(k + 1) % 3]], pts[t[(k + 2) % 3]]);
            let o = orient2d(&a, &b, p);
            if o.abs() > INCIRCLE_EPS {
                return o > 0.0;
            }
            // On the edge line: inside only strictly between its ends.
            (p - a).dot(&(b - a)) > 0.0 && (p - b).dot(&(a - b)) > 0.0
        }
        2 => {
            let k = t.iter().position(|&v| v < n).expect("one finite vertex");
            let (a, si, sj) = (pts[t[k]], pts[t[(k + 1) % 3]], pts[t[(k + 2) % 3]]);
            let d = sj - si;
            d.x * (p.y - a.y) - d.y * (p.x - a.x) < 0.0
        }
        _ => true,
    }
}

/// Delaunay triangulation of distinct 2D points. Points are inserted in
/// lexicographic (x, then y) order, which fixes the diagonal chosen for
/// cocircular ties. Output triangles are counter-clockwise, start at their
/// smallest index and are sorted.
pub fn triangulate_landmarks(points: &[Pixel]) -> Result<TriangleMesh, MappingError> {
    let n = points.len();
    if n < 3 {
        return Err(MappingError::DegeneratePoints("fewer than 3 points"));
    }
    if points.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
        return Err(MappingError::DegeneratePoints("non-finite point"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        (points[i].x, points[i].y)
            .partial_cmp(&(points[j].x, points[j].y))
            .expect("finite")
    });
    for w in order.windows(2) {
        if points[w[0]] == points[w[1]] {
            return Err(MappingError::DegeneratePoints("duplicate point"));
        }
    }

    // Normalize into the unit box for well-scaled predicates.
    let (mut lo, mut hi) = (points[0], points[0]);
    for p in points {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    let scale = (hi - lo).max();
    let mut pts: Vec<Pixel> = points.iter().map(|p| (p - lo) / scale).collect();
    // Super-triangle vertices n, n+1, n+2; only their directions matter to
    // the in-circle test below.
    let big = 1e6;
    pts.push(Pixel::new(-big, -big));
    pts.push(Pixel::new(big, -big));
    pts.push(Pixel::new(0.0, big));

    let mut tris: Vec<[usize; 3]> = vec![[n, n + 1, n + 2]];
    for &pi in &order {
        let p = pts[pi];
        let (bad, good): (Vec<[usize; 3]>, Vec<[usize; 3]>) = tris
            .into_iter()
            .partition(|t| in_circumcircle(&pts, n, t, &p));
        tris = good;
        // Boundary of the cavity: edges used by exactly one bad triangle.
        let mut edges: Vec<(usize, usize)> = Vec::new();
        for t in &bad {
            for k in 0..3 {
                let e = (t[k], t[(k + 1) % 3]);
                if let Some(pos) = edges.iter().position(|&(a, b)| (a, b) == (e.1, e.0)) {
                    edges.remove(pos);
                } else {
                    edges.push(e);
                }
            }
        }
        for (a, b) in edges {
            if orient2d(&pts[a], &pts[b], &p) > 0.0 {
                tris.push([a, b, pi]);
            }
        }
    }

    let mut out: Vec<[usize; 3]> = tris
        .into_iter()
        .filter(|t| t.iter().all(|&v| v < n))
        .map(|t| {
            let k = (0..3).min_by_key(|&k| t[k]).expect("three vertices");
            [t[k], t[(k + 1) % 3], t[(k + 2) % 3]]
        })
        .collect();
    out.sort_unstable();
    if out.is_empty() {
        return Err(MappingError::DegeneratePoints("all points collinear"));
    }
    Ok(TriangleMesh { triangles: out })
}
