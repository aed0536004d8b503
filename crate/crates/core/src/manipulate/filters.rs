use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::raster::{round_u8, RasterImage};

/// Sigma used for a Gaussian kernel of size `k` when none is given.
pub fn kernel_sigma(k: usize) -> f64 {
    0.3 * ((k as f64 - 1.0) / 2.0 - 1.0) + 0.8
}

pub fn gaussian_kernel(k: usize) -> Vec<f64> {
    let sigma = kernel_sigma(k);
    let half = (k / 2) as f64;
    let raw: Vec<f64> = (0..k)
        .map(|i| {
            let d = i as f64 - half;
            (-(d * d) / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / sum).collect()
}

#[inline]
fn clamp_index(i: isize, n: usize) -> usize {
    i.clamp(0, n as isize - 1) as usize
}

/// Separable convolution with edge replication; returns unrounded samples.
pub fn convolve_separable(img: &RasterImage, kernel: &[f64]) -> Vec<f64> {
    let (w, h, c) = (
        img.width() as usize,
        img.height() as usize,
        img.channels() as usize,
    );
    let half = (kernel.len() / 2) as isize;
    let src = img.data();
    let mut tmp = vec![0.0f64; src.len()];
    for y in 0..h {
        for x in 0..w {
            for ch in 0..c {
                let mut acc = 0.0;
                for (i, kv) in kernel.iter().enumerate() {
                    let sx = clamp_index(x as isize + i as isize - half, w);
                    acc += kv * src[(y * w + sx) * c + ch] as f64;
                }
                tmp[(y * w + x) * c + ch] = acc;
            }
        }
    }
    let mut out = vec![0.0f64; src.len()];
    for y in 0..h {
        for x in 0..w {
            for ch in 0..c {
                let mut acc = 0.0;
                for (i, kv) in kernel.iter().enumerate() {
                    let sy = clamp_index(y as isize + i as isize - half, h);
                    acc += kv * tmp[(sy * w + x) * c + ch];
                }
                out[(y * w + x) * c + ch] = acc;
            }
        }
    }
    out
}

pub fn gaussian_blur(img: &RasterImage, k: usize) -> Result<RasterImage> {
    let blurred = convolve_separable(img, &gaussian_kernel(k));
    img.with_data(blurred.into_iter().map(round_u8).collect())
}

pub fn median_blur(img: &RasterImage, k: usize) -> Result<RasterImage> {
    let (w, h, c) = (
        img.width() as usize,
        img.height() as usize,
        img.channels() as usize,
    );
    let half = (k / 2) as isize;
    let src = img.data();
    let mut out = vec![0u8; src.len()];
    let mut window = Vec::with_capacity(k * k);
    let mid = k * k / 2;
    for y in 0..h {
        for x in 0..w {
            for ch in 0..c {
                window.clear();
                for dy in -half..=half {
                    let sy = clamp_index(y as isize + dy, h);
                    for dx in -half..=half {
                        let sx = clamp_index(x as isize + dx, w);
                        window.push(src[(sy * w + sx) * c + ch]);
                    }
                }
                let (_, m, _) = window.select_nth_unstable(mid);
                out[(y * w + x) * c + ch] = *m;
            }
        }
    }
    img.with_data(out)
}

/// Bilinear resampling with pixel-centre alignment.
pub fn resize_bilinear(img: &RasterImage, nw: u32, nh: u32) -> Result<RasterImage> {
    if nw == 0 || nh == 0 {
        return Err(Error::InvalidParameter(format!(
            "target size {nw}x{nh} must be positive"
        )));
    }
    let (w, h, c) = (
        img.width() as usize,
        img.height() as usize,
        img.channels() as usize,
    );
    if (w, h) == (nw as usize, nh as usize) {
        return Ok(img.clone());
    }
    let (nwu, nhu) = (nw as usize, nh as usize);
    let axis = |n_out: usize, n_in: usize| -> Vec<(usize, usize, f64)> {
        let scale = n_in as f64 / n_out as f64;
        (0..n_out)
            .map(|d| {
                let s = ((d as f64 + 0.5) * scale - 0.5).clamp(0.0, (n_in - 1) as f64);
                let i0 = s.floor() as usize;
                let i1 = (i0 + 1).min(n_in - 1);
                (i0, i1, s - i0 as f64)
            })
            .collect()
    };
    let xs = axis(nwu, w);
    let ys = axis(nhu, h);
    let src = img.data();
    let mut out = Vec::with_capacity(nwu * nhu * c);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            for ch in 0..c {
                let p = |x: usize, y: usize| src[(y * w + x) * c + ch] as f64;
                let top = p(x0, y0) * (1.0 - fx) + p(x1, y0) * fx;
                let bottom = p(x0, y1) * (1.0 - fx) + p(x1, y1) * fx;
                out.push(round_u8(top * (1.0 - fy) + bottom * fy));
            }
        }
    }
    RasterImage::new(nw, nh, img.channels(), out)
}

pub fn gaussian_noise(img: &RasterImage, sigma: f64, seed: u64) -> Result<RasterImage> {
    if sigma == 0.0 {
        return Ok(img.clone());
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = img
        .data()
        .iter()
        .map(|&v| round_u8(v as f64 + normal.sample(&mut rng)))
        .collect();
    img.with_data(data)
}

/// One uniform draw per pixel: below `salt` turns the pixel white, the next
/// `pepper` of the unit interval turns it black.
pub fn salt_pepper(img: &RasterImage, salt: f64, pepper: f64, seed: u64) -> Result<RasterImage> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = img.channels() as usize;
    let mut data = img.data().to_vec();
    for px in data.chunks_exact_mut(c) {
        let u: f64 = rng.random();
        if u < salt {
            px.fill(255);
        } else if u < salt + pepper {
            px.fill(0);
        }
    }
    img.with_data(data)
}

/// Unsharp mask over a 5x5 Gaussian base blur.
pub fn sharpen(img: &RasterImage, amount: f64) -> Result<RasterImage> {
    if amount == 0.0 {
        return Ok(img.clone());
    }
    let blurred = convolve_separable(img, &gaussian_kernel(5));
    let data = img
        .data()
        .iter()
        .zip(blurred)
        .map(|(&v, b)| {
            let v = v as f64;
            round_u8(v + amount * (v - b))
        })
        .collect();
    img.with_data(data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(w: u32, h: u32, c: u8) -> RasterImage {
        RasterImage::from_fn(w, h, c, |x, y, ch| (x * 9 + y * 5 + ch as u32 * 3) as u8).unwrap()
    }

    #[test]
    fn kernel_sigmas_match_convention() {
        assert!((kernel_sigma(3) - 0.8).abs() < 1e-12);
        assert!((kernel_sigma(5) - 1.1).abs() < 1e-12);
        assert!((kernel_sigma(9) - 1.7).abs() < 1e-12);
        for k in [3, 5, 7, 9] {
            let kern = gaussian_kernel(k);
            assert_eq!(kern.len(), k);
            assert!((kern.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for i in 0..k / 2 {
                assert!((kern[i] - kern[k - 1 - i]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn flat_images_are_fixed_points() {
        let flat = RasterImage::filled(12, 9, 3, 77).unwrap();
        assert_eq!(gaussian_blur(&flat, 9).unwrap(), flat);
        assert_eq!(median_blur(&flat, 7).unwrap(), flat);
        assert_eq!(sharpen(&flat, 1.0).unwrap(), flat);
        assert_eq!(resize_bilinear(&flat, 5, 4).unwrap().data(), &vec![77; 60][..]);
    }

    #[test]
    fn median_removes_isolated_impulse() {
        let mut data = vec![100u8; 81];
        data[40] = 255;
        let img = RasterImage::new(9, 9, 1, data).unwrap();
        assert!(median_blur(&img, 3).unwrap().data().iter().all(|&v| v == 100));
    }

    #[test]
    fn resize_halves_and_restores_shape() {
        let img = ramp(224, 224, 3);
        let half = resize_bilinear(&img, 112, 112).unwrap();
        assert_eq!((half.width(), half.height()), (112, 112));
        let back = resize_bilinear(&half, 224, 224).unwrap();
        assert!(back.is_comparable(&img));
    }

    #[test]
    fn noise_is_seeded() {
        let img = ramp(16, 16, 1);
        let a = gaussian_noise(&img, 8.0, 3).unwrap();
        assert_eq!(a, gaussian_noise(&img, 8.0, 3).unwrap());
        assert_ne!(a, gaussian_noise(&img, 8.0, 4).unwrap());
        assert_eq!(gaussian_noise(&img, 0.0, 3).unwrap(), img);
    }

    #[test]
    fn sharpen_zero_and_tiny_are_identity() {
        let img = ramp(20, 20, 3);
        assert_eq!(sharpen(&img, 0.0).unwrap(), img);
    }
}
