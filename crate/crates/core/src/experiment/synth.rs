//! Procedural face-like covers with 68 landmarks, and the default marker.
//!
//! Landmarks follow the common 68-point layout: jaw 0-16, brows 17-26, nose
//! 27-35, eyes 36-47, mouth 48-67.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::morph::{LandmarkSet, Point};
use crate::raster::{round_u8, RasterImage};

pub const FACE_SIZE: u32 = 224;
pub const LANDMARK_COUNT: usize = 68;

#[derive(Clone, Debug)]
struct FaceParams {
    cx: f64,
    cy: f64,
    a: f64,
    b: f64,
    skin: [f64; 3],
    hair: [f64; 3],
    bg_top: [f64; 3],
    bg_bottom: [f64; 3],
    eye_dx: f64,
    eye_y: f64,
    eye_rx: f64,
    eye_ry: f64,
    iris: [f64; 3],
    brow_y: f64,
    nose_y: f64,
    nose_w: f64,
    mouth_y: f64,
    mouth_w: f64,
    mouth_h: f64,
    lip: [f64; 3],
    light: f64,
    noise_seed: u64,
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

impl FaceParams {
    fn sample(seed: u64, w: f64, h: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = &mut rng;
        let a = w * uniform(r, 0.26, 0.31);
        let b = h * uniform(r, 0.34, 0.39);
        let cx = w / 2.0 + uniform(r, -6.0, 6.0);
        let cy = h * 0.54 + uniform(r, -5.0, 5.0);
        let tone = uniform(r, 0.0, 1.0);
        let skin = [
            120.0 + 110.0 * tone + uniform(r, -8.0, 8.0),
            85.0 + 100.0 * tone + uniform(r, -8.0, 8.0),
            60.0 + 95.0 * tone + uniform(r, -8.0, 8.0),
        ];
        let hv = uniform(r, 15.0, 140.0);
        let hair = [hv * uniform(r, 0.8, 1.2), hv * 0.75, hv * 0.5];
        let bg = uniform(r, 150.0, 230.0);
        let bg_top = [bg, bg + uniform(r, -15.0, 15.0), bg + uniform(r, -10.0, 20.0)];
        let bg_bottom = bg_top.map(|v| v - uniform(r, 20.0, 50.0));
        let eye_y = cy - b * uniform(r, 0.16, 0.24);
        Self {
            cx,
            cy,
            a,
            b,
            skin,
            hair,
            bg_top,
            bg_bottom,
            eye_dx: a * uniform(r, 0.36, 0.46),
            eye_y,
            eye_rx: a * uniform(r, 0.16, 0.21),
            eye_ry: b * uniform(r, 0.05, 0.075),
            iris: [uniform(r, 30.0, 110.0), uniform(r, 30.0, 90.0), uniform(r, 20.0, 70.0)],
            brow_y: eye_y - b * uniform(r, 0.12, 0.17),
            nose_y: cy + b * uniform(r, 0.12, 0.2),
            nose_w: a * uniform(r, 0.2, 0.28),
            mouth_y: cy + b * uniform(r, 0.42, 0.5),
            mouth_w: a * uniform(r, 0.36, 0.48),
            mouth_h: b * uniform(r, 0.06, 0.1),
            lip: [uniform(r, 150.0, 200.0), uniform(r, 60.0, 100.0), uniform(r, 60.0, 100.0)],
            light: uniform(r, -0.25, 0.25),
            noise_seed: r.random(),
        }
    }

    fn landmarks(&self) -> LandmarkSet {
        use std::f64::consts::PI;
        let mut pts = Vec::with_capacity(LANDMARK_COUNT);
        let (jaw_cy, jaw_b) = (self.eye_y, self.cy + self.b - self.eye_y);
        for i in 0..17 {
            let t = PI * i as f64 / 16.0;
            pts.push(Point::new(self.cx - self.a * t.cos(), jaw_cy + jaw_b * t.sin()));
        }
        for side in [-1.0, 1.0] {
            for i in 0..5 {
                // outer to inner on the left brow, inner to outer on the right
                let u = if side < 0.0 { i as f64 / 4.0 } else { 1.0 - i as f64 / 4.0 };
                let x = self.cx + side * self.eye_dx + side * self.eye_rx * 1.3 * (1.0 - 2.0 * u);
                let lift = 5.0 * (1.0 - (2.0 * u - 1.0).powi(2));
                pts.push(Point::new(x, self.brow_y - lift));
            }
        }
        for i in 0..4 {
            let y = self.eye_y + (self.nose_y - self.eye_y) * i as f64 / 3.0;
            pts.push(Point::new(self.cx, y));
        }
        for i in 0..5 {
            let x = self.cx - self.nose_w + 2.0 * self.nose_w * i as f64 / 4.0;
            let dip = 3.0 * (1.0 - ((i as f64 - 2.0) / 2.0).powi(2));
            pts.push(Point::new(x, self.nose_y + 4.0 + dip));
        }
        for side in [-1.0, 1.0] {
            let ex = self.cx + side * self.eye_dx;
            for i in 0..6 {
                let t = PI * i as f64 / 3.0;
                // start at the outer corner, go over the top
                let x = ex - side * self.eye_rx * t.cos();
                let y = self.eye_y - self.eye_ry * t.sin();
                pts.push(Point::new(x, y));
            }
        }
        for i in 0..12 {
            let t = 2.0 * PI * i as f64 / 12.0;
            pts.push(Point::new(
                self.cx - self.mouth_w * t.cos(),
                self.mouth_y - self.mouth_h * t.sin(),
            ));
        }
        for i in 0..8 {
            let t = 2.0 * PI * i as f64 / 8.0;
            pts.push(Point::new(
                self.cx - 0.75 * self.mouth_w * t.cos(),
                self.mouth_y - 0.35 * self.mouth_h * t.sin(),
            ));
        }
        LandmarkSet::new(pts)
    }
}

/// Smooth 0..1 ramp across `d = 0` over about `soft` pixels.
#[inline]
fn edge(d: f64, soft: f64) -> f64 {
    (0.5 - d / soft).clamp(0.0, 1.0)
}

#[inline]
fn mix(base: [f64; 3], over: [f64; 3], t: f64) -> [f64; 3] {
    [0, 1, 2].map(|i| base[i] * (1.0 - t) + over[i] * t)
}

/// Signed distance-like value for an ellipse, negative inside, in pixels.
#[inline]
fn ellipse_d(x: f64, y: f64, cx: f64, cy: f64, rx: f64, ry: f64) -> f64 {
    let q = ((x - cx) / rx).powi(2) + ((y - cy) / ry).powi(2);
    (q.sqrt() - 1.0) * rx.min(ry)
}

fn seg_dist(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let t = (((p.x - a.x) * dx + (p.y - a.y) * dy) / (dx * dx + dy * dy)).clamp(0.0, 1.0);
    ((p.x - a.x - t * dx).powi(2) + (p.y - a.y - t * dy).powi(2)).sqrt()
}

fn polyline_dist(p: Point, pts: &[Point]) -> f64 {
    pts.windows(2)
        .map(|w| seg_dist(p, w[0], w[1]))
        .fold(f64::INFINITY, f64::min)
}

/// One synthetic identity: an RGB face of `FACE_SIZE` squared pixels and its
/// landmarks. Deterministic in `seed`.
pub fn generate_face(seed: u64) -> (RasterImage, LandmarkSet) {
    let (w, h) = (FACE_SIZE, FACE_SIZE);
    let p = FaceParams::sample(seed, w as f64, h as f64);
    let marks = p.landmarks();
    let lm = &marks.points;
    let noise = Normal::new(0.0, 2.5).expect("valid std");
    let mut rng = ChaCha8Rng::seed_from_u64(p.noise_seed);
    let mut data = Vec::with_capacity((w * h * 3) as usize);
    for y in 0..h {
        for x in 0..w {
            let (xf, yf) = (x as f64, y as f64);
            let pt = Point::new(xf, yf);
            let t = yf / (h - 1) as f64;
            let mut c = mix(p.bg_top, p.bg_bottom, t);
            // shoulders
            let sh = ellipse_d(xf, yf, p.cx, h as f64 + 30.0, p.a * 2.2, 90.0);
            c = mix(c, p.hair.map(|v| v * 0.6 + 40.0), edge(sh, 2.0));
            let neck = ellipse_d(xf, yf, p.cx, p.cy + p.b, p.a * 0.55, p.b * 0.6);
            c = mix(c, p.skin.map(|v| v * 0.85), edge(neck, 2.0));
            let hair = ellipse_d(xf, yf, p.cx, p.cy - p.b * 0.12, p.a * 1.12, p.b * 1.02);
            c = mix(c, p.hair, edge(hair, 2.0));
            let face = ellipse_d(xf, yf, p.cx, p.cy, p.a, p.b);
            let shade = 1.0 + p.light * (xf - p.cx) / p.a - 0.12 * ((yf - p.cy) / p.b).powi(2);
            let skin = p.skin.map(|v| v * shade);
            let hairline = (p.cy - p.b * 0.72 - yf).max(0.0);
            c = mix(c, skin, edge(face, 2.5) * edge(hairline - 1.0, 4.0));

            let brows = [&lm[17..22], &lm[22..27]];
            for brow in brows {
                let d = polyline_dist(pt, brow) - 2.5;
                c = mix(c, p.hair.map(|v| v * 0.7), edge(d, 1.5));
            }
            for side in [-1.0, 1.0] {
                let ex = p.cx + side * p.eye_dx;
                let d = ellipse_d(xf, yf, ex, p.eye_y, p.eye_rx, p.eye_ry);
                c = mix(c, [235.0, 232.0, 228.0], edge(d, 1.5));
                let ir = ellipse_d(xf, yf, ex, p.eye_y, p.eye_ry * 0.95, p.eye_ry * 0.95);
                c = mix(c, p.iris, edge(ir, 1.5) * edge(d, 1.0));
                let pupil = ellipse_d(xf, yf, ex, p.eye_y, p.eye_ry * 0.4, p.eye_ry * 0.4);
                c = mix(c, [15.0, 12.0, 12.0], edge(pupil, 1.0));
            }
            let bridge = polyline_dist(pt, &lm[27..31]) - 1.2;
            c = mix(c, skin.map(|v| v * 0.82), 0.6 * edge(bridge, 2.0));
            let nostrils = polyline_dist(pt, &lm[31..36]) - 1.5;
            c = mix(c, skin.map(|v| v * 0.7), edge(nostrils, 1.5));
            let mouth = ellipse_d(xf, yf, p.cx, p.mouth_y, p.mouth_w, p.mouth_h);
            c = mix(c, p.lip, edge(mouth, 1.5));
            let inner = ellipse_d(xf, yf, p.cx, p.mouth_y, p.mouth_w * 0.75, p.mouth_h * 0.3);
            c = mix(c, [70.0, 25.0, 30.0], edge(inner, 1.5));

            for v in c {
                data.push(round_u8(v + noise.sample(&mut rng)));
            }
        }
    }
    let img = RasterImage::new(w, h, 3, data).expect("buffer matches dimensions");
    (img, marks)
}

/// Edge width of the bundled marker, in pixels. Both engines carry the marker
/// on a reduced grid (the DCT one at 1.5 samples per 8 pixels), so the emblem
/// is drawn with soft edges that survive that resolution.
pub const MARKER_SOFTNESS: f64 = 16.0;

/// The bundled marker: a high-contrast emblem (ring, globe grid and laurel
/// bars) on a light field. Flat areas sit on multiples of 17.
pub fn default_marker(width: u32, height: u32) -> RasterImage {
    marker_with(width, height, MARKER_SOFTNESS)
}

/// The bundled emblem with edges ramped over `soft` pixels.
pub fn marker_with(width: u32, height: u32, soft: f64) -> RasterImage {
    let (w, h) = (width as f64, height as f64);
    let s = w.min(h);
    let (cx, cy) = (w / 2.0, h / 2.0);
    let (light, dark, mid) = (238.0, 34.0, 119.0);
    let gray: Vec<u8> = (0..height)
        .flat_map(|y| (0..width).map(move |x| (x as f64 + 0.5, y as f64 + 0.5)))
        .map(|(x, y)| {
            let r = ((x - cx).powi(2) + (y - cy).powi(2)).sqrt();
            let mut v = light;
            let ring = (r - 0.42 * s).abs() - 0.035 * s;
            v = v + (dark - v) * edge(ring, soft);
            let globe = r - 0.27 * s;
            v = v + (mid - v) * edge(globe, soft);
            // meridian and parallel bars inside the globe
            let bar = 0.03 * s;
            let dx = (x - cx).abs();
            let dy = (y - cy).abs();
            let lines = [
                dx - bar / 2.0,
                dy - bar / 2.0,
                (dx - 0.14 * s).abs() - bar / 2.0,
                (dy - 0.14 * s).abs() - bar / 2.0,
            ]
            .into_iter()
            .fold(f64::INFINITY, f64::min);
            v = v + (light - v) * edge(lines, soft) * edge(globe, soft);
            // laurel blocks in the corners between ring and globe
            let diag = ((x - cx) + (y - cy)).abs() / std::f64::consts::SQRT_2;
            let leaf = (r - 0.345 * s).abs() - 0.03 * s;
            let on_diag = diag - 0.05 * s;
            v = v + (dark - v) * edge(leaf.max(on_diag), soft);
            round_u8(v)
        })
        .collect();
    RasterImage::new(width, height, 1, gray)
        .expect("buffer matches dimensions")
        .to_rgb()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn faces_are_deterministic_and_distinct() {
        let (a, la) = generate_face(1);
        let (b, lb) = generate_face(1);
        let (c, lc) = generate_face(2);
        assert_eq!(a, b);
        assert_eq!(la, lb);
        assert_ne!(a, c);
        assert_ne!(la, lc);
        assert_eq!(la.len(), LANDMARK_COUNT);
        la.validate_bounds(FACE_SIZE, FACE_SIZE).unwrap();
    }

    #[test]
    fn landmarks_triangulate_with_frame() {
        for seed in 0..10 {
            let (_, lm) = generate_face(seed);
            let framed = lm.with_border(FACE_SIZE, FACE_SIZE);
            assert!(crate::morph::triangulate(&framed.points).unwrap().len() > 100);
        }
    }

    #[test]
    fn marker_is_high_contrast() {
        let m = default_marker(224, 224);
        let g = m.to_grayscale();
        let min = *g.data().iter().min().unwrap();
        let max = *g.data().iter().max().unwrap();
        assert!(max - min > 180);
    }
}
