//! Landmark-driven face morphing.
//!
//! Landmarks of both faces (plus eight frame points) are blended into an
//! intermediate geometry, which is Delaunay-triangulated. Each face is warped
//! piecewise-affinely onto that geometry by inverse mapping with bilinear
//! sampling, and the two warps are cross-dissolved. `alpha` weights the first
//! face: `alpha = 1` reproduces it exactly, `alpha = 0` the second.

pub mod delaunay;
pub mod landmarks;

use crate::error::{Error, Result};
use crate::raster::{round_u8, RasterImage};

pub use delaunay::triangulate;
pub use landmarks::{sidecar_path, LandmarkSet, Point, BORDER_POINTS};

/// Second identity and landmark sets for a morph manipulation.
#[derive(Clone, Debug)]
pub struct MorphAux {
    pub partner: RasterImage,
    pub landmarks_a: LandmarkSet,
    pub landmarks_b: LandmarkSet,
}

/// Triangulates a landmark set after checking it against the frame bounds.
pub fn triangulate_landmarks(points: &LandmarkSet, width: u32, height: u32) -> Result<Vec<[usize; 3]>> {
    points.validate_bounds(width, height)?;
    triangulate(&points.points)
}

pub fn morph(
    a: &RasterImage,
    b: &RasterImage,
    la: &LandmarkSet,
    lb: &LandmarkSet,
    alpha: f64,
) -> Result<RasterImage> {
    a.ensure_comparable(b)?;
    if la.len() != lb.len() {
        return Err(Error::LandmarkMismatch(format!(
            "landmark counts differ: {} vs {}",
            la.len(),
            lb.len()
        )));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidParameter(format!(
            "blending factor {alpha} outside [0, 1]"
        )));
    }
    let (w, h) = (a.width(), a.height());
    la.validate_bounds(w, h)?;
    lb.validate_bounds(w, h)?;
    let beta = 1.0 - alpha;
    let pa = la.with_border(w, h);
    let pb = lb.with_border(w, h);
    let mid: Vec<Point> = pa
        .points
        .iter()
        .zip(&pb.points)
        .map(|(p, q)| Point::new(alpha * p.x + beta * q.x, alpha * p.y + beta * q.y))
        .collect();
    let tris = triangulate(&mid)?;

    let wa = (alpha != 0.0).then(|| warp(a, &pa.points, &mid, &tris));
    let wb = (beta != 0.0).then(|| warp(b, &pb.points, &mid, &tris));
    let data = match (wa, wb) {
        (Some(wa), Some(wb)) => wa
            .iter()
            .zip(&wb)
            .map(|(&x, &y)| round_u8(alpha * x + beta * y))
            .collect(),
        (Some(wa), None) => wa.into_iter().map(round_u8).collect(),
        (None, Some(wb)) => wb.into_iter().map(round_u8).collect(),
        (None, None) => unreachable!("alpha and 1 - alpha cannot both be zero"),
    };
    a.with_data(data)
}

/// Inverse-maps every destination pixel through its containing triangle onto
/// `src`. Pixels outside every triangle sample the source at their own position.
pub fn warp(src: &RasterImage, src_pts: &[Point], dst_pts: &[Point], tris: &[[usize; 3]]) -> Vec<f64> {
    let (w, h, c) = (
        src.width() as usize,
        src.height() as usize,
        src.channels() as usize,
    );
    let mut coords: Vec<Option<(f64, f64)>> = vec![None; w * h];
    for &[i, j, k] in tris {
        let (d0, d1, d2) = (dst_pts[i], dst_pts[j], dst_pts[k]);
        let (s0, s1, s2) = (src_pts[i], src_pts[j], src_pts[k]);
        let det = (d1.x - d0.x) * (d2.y - d0.y) - (d2.x - d0.x) * (d1.y - d0.y);
        if det.abs() < 1e-12 {
            continue;
        }
        let x_lo = d0.x.min(d1.x).min(d2.x).floor().max(0.0) as usize;
        let x_hi = (d0.x.max(d1.x).max(d2.x).ceil() as usize).min(w - 1);
        let y_lo = d0.y.min(d1.y).min(d2.y).floor().max(0.0) as usize;
        let y_hi = (d0.y.max(d1.y).max(d2.y).ceil() as usize).min(h - 1);
        for y in y_lo..=y_hi {
            for x in x_lo..=x_hi {
                let slot = &mut coords[y * w + x];
                if slot.is_some() {
                    continue;
                }
                let (px, py) = (x as f64 - d0.x, y as f64 - d0.y);
                let l1 = (px * (d2.y - d0.y) - (d2.x - d0.x) * py) / det;
                let l2 = ((d1.x - d0.x) * py - px * (d1.y - d0.y)) / det;
                let l0 = 1.0 - l1 - l2;
                const EPS: f64 = -1e-9;
                if l0 < EPS || l1 < EPS || l2 < EPS {
                    continue;
                }
                let sx = l0 * s0.x + l1 * s1.x + l2 * s2.x;
                let sy = l0 * s0.y + l1 * s1.y + l2 * s2.y;
                *slot = Some((sx, sy));
            }
        }
    }
    let mut out = Vec::with_capacity(w * h * c);
    for y in 0..h {
        for x in 0..w {
            let (sx, sy) = coords[y * w + x].unwrap_or((x as f64, y as f64));
            for ch in 0..c {
                out.push(sample_bilinear(src, sx, sy, ch));
            }
        }
    }
    out
}

#[inline]
fn snap(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() < 1e-9 {
        r
    } else {
        v
    }
}

fn sample_bilinear(img: &RasterImage, x: f64, y: f64, ch: usize) -> f64 {
    let (w, h, c) = (
        img.width() as usize,
        img.height() as usize,
        img.channels() as usize,
    );
    let x = snap(x).clamp(0.0, (w - 1) as f64);
    let y = snap(y).clamp(0.0, (h - 1) as f64);
    let (x0, y0) = (x.floor() as usize, y.floor() as usize);
    let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
    let (fx, fy) = (x - x0 as f64, y - y0 as f64);
    let d = img.data();
    let p = |xx: usize, yy: usize| d[(yy * w + xx) * c + ch] as f64;
    if fx == 0.0 && fy == 0.0 {
        return p(x0, y0);
    }
    let top = p(x0, y0) * (1.0 - fx) + p(x1, y0) * fx;
    let bottom = p(x0, y1) * (1.0 - fx) + p(x1, y1) * fx;
    top * (1.0 - fy) + bottom * fy
}
