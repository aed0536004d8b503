//! Bowyer-Watson Delaunay triangulation.

use super::landmarks::Point;
use crate::error::{Error, Result};

/// Twice the signed area of `abc`; positive when counter-clockwise (y up).
#[inline]
pub fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

/// Positive when `d` lies strictly inside the circumcircle of the
/// counter-clockwise triangle `abc`.
#[inline]
pub fn in_circle(a: Point, b: Point, c: Point, d: Point) -> f64 {
    let (adx, ady) = (a.x - d.x, a.y - d.y);
    let (bdx, bdy) = (b.x - d.x, b.y - d.y);
    let (cdx, cdy) = (c.x - d.x, c.y - d.y);
    let ad = adx * adx + ady * ady;
    let bd = bdx * bdx + bdy * bdy;
    let cd = cdx * cdx + cdy * cdy;
    ad * (bdx * cdy - cdx * bdy) - bd * (adx * cdy - cdx * ady) + cd * (adx * bdy - bdx * ady)
}

#[derive(Clone, Copy)]
struct Tri {
    v: [usize; 3],
}

/// Triangulates `points`; triangles are index triples in counter-clockwise
/// order. Duplicate points are skipped. Fails when all points are collinear.
pub fn triangulate(points: &[Point]) -> Result<Vec<[usize; 3]>> {
    let n = points.len();
    if n < 3 {
        return Err(Error::DegenerateInput(format!(
            "need at least 3 points, got {n}"
        )));
    }
    if points.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
        return Err(Error::DegenerateInput("non-finite coordinate".into()));
    }
    let (mut min_x, mut min_y, mut max_x, mut max_y) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
    for p in points {
        min_x = min_x.min(p.x);
        min_y = min_y.min(p.y);
        max_x = max_x.max(p.x);
        max_y = max_y.max(p.y);
    }
    let span = (max_x - min_x).max(max_y - min_y);
    if span == 0.0 || collinear(points, span) {
        return Err(Error::DegenerateInput("all points are collinear".into()));
    }

    let (cx, cy) = ((min_x + max_x) / 2.0, (min_y + max_y) / 2.0);
    let big = span * 1.0e4;
    let mut verts: Vec<Point> = points.to_vec();
    verts.push(Point::new(cx - 2.0 * big, cy - big));
    verts.push(Point::new(cx + 2.0 * big, cy - big));
    verts.push(Point::new(cx, cy + 2.0 * big));
    let mut tris = vec![Tri { v: [n, n + 1, n + 2] }];

    let mut bad = Vec::new();
    let mut edges: Vec<(usize, usize)> = Vec::new();
    for i in 0..n {
        let p = verts[i];
        bad.clear();
        for (t, tri) in tris.iter().enumerate() {
            let [a, b, c] = tri.v;
            if in_circle(verts[a], verts[b], verts[c], p) > 0.0 {
                bad.push(t);
            }
        }
        if bad.is_empty() {
            continue;
        }
        if bad.iter().any(|&t| tris[t].v.iter().any(|&v| verts[v] == p)) {
            // duplicate of an existing vertex
            continue;
        }
        edges.clear();
        for &t in &bad {
            let [a, b, c] = tris[t].v;
            for (u, v) in [(a, b), (b, c), (c, a)] {
                // interior edges appear twice with opposite orientation
                if let Some(pos) = edges.iter().position(|&(x, y)| x == v && y == u) {
                    edges.swap_remove(pos);
                } else {
                    edges.push((u, v));
                }
            }
        }
        for &t in bad.iter().rev() {
            tris.swap_remove(t);
        }
        for &(u, v) in &edges {
            tris.push(Tri { v: [u, v, i] });
        }
    }

    let out: Vec<[usize; 3]> = tris
        .into_iter()
        .filter(|t| t.v.iter().all(|&v| v < n))
        .map(|t| t.v)
        .filter(|&[a, b, c]| orient(points[a], points[b], points[c]) > 0.0)
        .collect();
    if out.is_empty() {
        return Err(Error::DegenerateInput("no triangles produced".into()));
    }
    Ok(out)
}

fn collinear(points: &[Point], span: f64) -> bool {
    let a = points[0];
    let Some(b) = points.iter().copied().find(|&p| p != a) else {
        return true;
    };
    let tol = 1e-12 * span * span;
    points.iter().all(|&p| orient(a, b, p).abs() <= tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_gives_two_triangles() {
        let pts = [
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(0.0, 1.0),
        ];
        let tris = triangulate(&pts).unwrap();
        assert_eq!(tris.len(), 2);
        let area: f64 = tris
            .iter()
            .map(|&[a, b, c]| orient(pts[a], pts[b], pts[c]) / 2.0)
            .sum();
        assert!((area - 1.0).abs() < 1e-12);
    }

    #[test]
    fn collinear_input_is_rejected() {
        let pts: Vec<Point> = (0..5).map(|i| Point::new(i as f64, 2.0 * i as f64)).collect();
        assert!(matches!(triangulate(&pts), Err(Error::DegenerateInput(_))));
        assert!(triangulate(&pts[..2]).is_err());
    }

    #[test]
    fn duplicates_are_ignored() {
        let pts = [
            Point::new(0.0, 0.0),
            Point::new(4.0, 0.0),
            Point::new(0.0, 3.0),
            Point::new(4.0, 0.0),
        ];
        let tris = triangulate(&pts).unwrap();
        assert_eq!(tris.len(), 1);
    }
}
