//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fragilemark::classify::model::{loss_and_gradient, Design};
use fragilemark::morph::Point;
use fragilemark::RasterImage;

pub fn random_image(rng: &mut impl Rng, w: u32, h: u32, c: u8) -> RasterImage {
    let data = (0..w as usize * h as usize * c as usize).map(|_| rng.random()).collect();
    RasterImage::new(w, h, c, data).unwrap()
}

/// Smooth image plus a little noise, closer to natural content than white noise.
pub fn textured_image(rng: &mut impl Rng, w: u32, h: u32, c: u8) -> RasterImage {
    let (fx, fy) = (rng.random_range(3.0..20.0), rng.random_range(3.0..20.0));
    let off: f64 = rng.random_range(40.0..120.0);
    let data = (0..h)
        .flat_map(|y| (0..w).flat_map(move |x| (0..c).map(move |ch| (x, y, ch))))
        .map(|(x, y, ch)| {
            let v = off + 60.0 * ((x as f64 / fx).sin() + (y as f64 / fy).cos()) + 15.0 * ch as f64;
            (v + rng.random_range(-6.0..6.0)).clamp(0.0, 255.0) as u8
        })
        .collect();
    RasterImage::new(w, h, c, data).unwrap()
}

fn luma_u8(img: &RasterImage) -> Vec<f64> {
    let d = img.data();
    if img.channels() == 1 {
        return d.iter().map(|&v| v as f64).collect();
    }
    d.chunks(3)
        .map(|p| (0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64).round())
        .collect()
}

/// Mean SSIM over all 8x8 windows at stride 1, moments by two-pass sums.
pub fn ssim_oracle(x: &RasterImage, y: &RasterImage) -> f64 {
    const WIN: usize = 8;
    let (w, h) = (x.width() as usize, x.height() as usize);
    let (a, b) = (luma_u8(x), luma_u8(y));
    let c1 = (0.01f64 * 255.0).powi(2);
    let c2 = (0.03f64 * 255.0).powi(2);
    let n = (WIN * WIN) as f64;
    let mut total = 0.0;
    let mut count = 0usize;
    for wy in 0..=h - WIN {
        for wx in 0..=w - WIN {
            let idx = |i: usize| (wy + i / WIN) * w + wx + i % WIN;
            let mx = (0..WIN * WIN).map(|i| a[idx(i)]).sum::<f64>() / n;
            let my = (0..WIN * WIN).map(|i| b[idx(i)]).sum::<f64>() / n;
            let (mut vx, mut vy, mut cov) = (0.0, 0.0, 0.0);
            for i in 0..WIN * WIN {
                let (dx, dy) = (a[idx(i)] - mx, b[idx(i)] - my);
                vx += dx * dx;
                vy += dy * dy;
                cov += dx * dy;
            }
            let (vx, vy, cov) = (vx / n, vy / n, cov / n);
            total += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
            count += 1;
        }
    }
    total / count as f64
}

pub fn mse_oracle(x: &RasterImage, y: &RasterImage) -> f64 {
    let d = x.data().iter().zip(y.data()).map(|(&p, &q)| (p as f64 - q as f64).powi(2));
    d.sum::<f64>() / x.data().len() as f64
}

pub fn psnr_oracle(x: &RasterImage, y: &RasterImage) -> f64 {
    let m = mse_oracle(x, y);
    if m == 0.0 {
        f64::INFINITY
    } else {
        20.0 * 255f64.log10() - 10.0 * m.log10()
    }
}

/// Largest relative error between the analytic gradient and central
/// differences, over `probes` random parameters of a random problem.
pub fn gradient_check(seed: u64, probes: usize) -> f64 {
    const K: usize = 7;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, d) = (40, 6);
    let design = Design {
        rows: (0..n)
            .map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect(),
        labels: (0..n).map(|i| i % K).collect(),
        weights: (0..n).map(|_| rng.random_range(0.5..1.5) / n as f64).collect(),
    };
    let theta: Vec<f64> = (0..(d + 1) * K).map(|_| rng.random_range(-0.5..0.5)).collect();
    let l2 = 1e-2;
    let (_, grad) = loss_and_gradient(&theta, &design, l2);
    let h = 1e-5;
    let mut worst = 0.0f64;
    for _ in 0..probes {
        let i = rng.random_range(0..theta.len());
        let mut plus = theta.clone();
        plus[i] += h;
        let mut minus = theta.clone();
        minus[i] -= h;
        let fd = (loss_and_gradient(&plus, &design, l2).0 - loss_and_gradient(&minus, &design, l2).0) / (2.0 * h);
        let rel = (fd - grad[i]).abs() / fd.abs().max(grad[i].abs()).max(1e-8);
        worst = worst.max(rel);
    }
    worst
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Number of vertices on the strict convex hull (monotone chain).
pub fn hull_size(points: &[Point]) -> usize {
    let mut p = points.to_vec();
    p.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    let mut hull: Vec<Point> = Vec::new();
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Point>> = if pass == 0 {
            Box::new(p.iter())
        } else {
            Box::new(p.iter().rev())
        };
        for &q in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], q) <= 0.0 {
                hull.pop();
            }
            hull.push(q);
        }
        hull.pop();
    }
    hull.len()
}

/// True if some point other than the triangle's corners lies strictly inside
/// its circumcircle, beyond `tol` relative to the radius.
pub fn circumcircle_violated(points: &[Point], tri: [usize; 3], tol: f64) -> bool {
    let [a, b, c] = tri.map(|i| points[i]);
    let d = 2.0 * (a.x * (b.y - c.y) + b.x * (c.y - a.y) + c.x * (a.y - b.y));
    let sq = |p: Point| p.x * p.x + p.y * p.y;
    let ux = (sq(a) * (b.y - c.y) + sq(b) * (c.y - a.y) + sq(c) * (a.y - b.y)) / d;
    let uy = (sq(a) * (c.x - b.x) + sq(b) * (a.x - c.x) + sq(c) * (b.x - a.x)) / d;
    let r = ((a.x - ux).powi(2) + (a.y - uy).powi(2)).sqrt();
    points.iter().enumerate().any(|(i, p)| {
        !tri.contains(&i) && ((p.x - ux).powi(2) + (p.y - uy).powi(2)).sqrt() < r * (1.0 - tol)
    })
}

pub fn random_points(rng: &mut impl Rng, n: usize, extent: f64) -> Vec<Point> {
    (0..n)
        .map(|_| Point::new(rng.random_range(0.0..extent), rng.random_range(0.0..extent)))
        .collect()
}
