//! Full-reference quality metrics: MSE, PSNR and windowed SSIM.
//!
//! MSE and PSNR run over every sample of every channel with a fixed peak of
//! 255. SSIM runs on BT.601 luma with a uniform square window slid at stride
//! one; the global score is the mean of the per-window map. Window moments
//! come from integer integral images so the flat-window case is exact.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{round_u8, RasterImage};

pub const PEAK: f64 = 255.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SsimParams {
    pub window: usize,
    pub k1: f64,
    pub k2: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self {
            window: 8,
            k1: 0.01,
            k2: 0.03,
        }
    }
}

impl SsimParams {
    pub fn c1(&self) -> f64 {
        (self.k1 * PEAK).powi(2)
    }

    pub fn c2(&self) -> f64 {
        (self.k2 * PEAK).powi(2)
    }

    fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(Error::InvalidParameter("ssim window must be >= 1".into()));
        }
        if !(self.k1 > 0.0 && self.k2 > 0.0) {
            return Err(Error::InvalidParameter(
                "ssim stabilizers must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Tamper thresholds: a pair is flagged when SSIM or PSNR falls below its bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    pub ssim: f64,
    pub psnr: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            ssim: 0.75,
            psnr: 22.0,
        }
    }
}

impl Thresholds {
    pub fn flags(&self, ssim: f64, psnr: f64) -> bool {
        ssim < self.ssim || psnr < self.psnr
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    #[serde(with = "crate::serde_inf")]
    pub psnr: f64,
    pub mse: f64,
    pub ssim: f64,
    pub flagged: bool,
}

pub fn mse(x: &RasterImage, y: &RasterImage) -> Result<f64> {
    x.ensure_comparable(y)?;
    let sum: u64 = x
        .data()
        .iter()
        .zip(y.data())
        .map(|(&a, &b)| {
            let d = a as i64 - b as i64;
            (d * d) as u64
        })
        .sum();
    Ok(sum as f64 / x.data().len() as f64)
}

/// PSNR in dB; `f64::INFINITY` when the images are identical.
pub fn psnr(x: &RasterImage, y: &RasterImage) -> Result<f64> {
    Ok(psnr_from_mse(mse(x, y)?))
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (PEAK * PEAK / mse).log10()
    }
}

/// Per-window SSIM values, row-major over window positions.
#[derive(Clone, Debug, PartialEq)]
pub struct SsimMap {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

impl SsimMap {
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    /// Gray raster with `s -> round(255 * (s + 1) / 2)`.
    pub fn to_raster(&self) -> RasterImage {
        let data = self
            .values
            .iter()
            .map(|&s| round_u8(255.0 * (s + 1.0) / 2.0))
            .collect();
        RasterImage::new(self.width as u32, self.height as u32, 1, data)
            .expect("ssim map has at least one window")
    }
}

struct Integral {
    stride: usize,
    sum: Vec<i64>,
}

impl Integral {
    fn new(w: usize, h: usize, f: impl Fn(usize) -> i64) -> Self {
        let stride = w + 1;
        let mut sum = vec![0i64; stride * (h + 1)];
        for y in 0..h {
            let mut row = 0i64;
            for x in 0..w {
                row += f(y * w + x);
                sum[(y + 1) * stride + x + 1] = sum[y * stride + x + 1] + row;
            }
        }
        Self { stride, sum }
    }

    #[inline]
    fn rect(&self, x: usize, y: usize, win: usize) -> i64 {
        let s = self.stride;
        self.sum[(y + win) * s + x + win] - self.sum[y * s + x + win] - self.sum[(y + win) * s + x]
            + self.sum[y * s + x]
    }
}

/// SSIM of one window from raw moments; `n` samples, integer sums.
#[inline]
fn window_ssim(n: i64, sx: i64, sy: i64, sxx: i64, syy: i64, sxy: i64, c1: f64, c2: f64) -> f64 {
    let nf = n as f64;
    let n2 = nf * nf;
    let mx = sx as f64 / nf;
    let my = sy as f64 / nf;
    let vx = (n * sxx - sx * sx) as f64 / n2;
    let vy = (n * syy - sy * sy) as f64 / n2;
    let cov = (n * sxy - sx * sy) as f64 / n2;
    ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))
}

pub fn ssim_map(x: &RasterImage, y: &RasterImage, p: &SsimParams) -> Result<SsimMap> {
    x.ensure_comparable(y)?;
    p.validate()?;
    let (w, h) = (x.width() as usize, x.height() as usize);
    let win = p.window;
    if w < win || h < win {
        return Err(Error::ImageTooSmall {
            width: x.width(),
            height: x.height(),
            window: win,
        });
    }
    let gx = x.to_grayscale();
    let gy = y.to_grayscale();
    let (a, b) = (gx.data(), gy.data());
    let ix = Integral::new(w, h, |i| a[i] as i64);
    let iy = Integral::new(w, h, |i| b[i] as i64);
    let ixx = Integral::new(w, h, |i| (a[i] as i64).pow(2));
    let iyy = Integral::new(w, h, |i| (b[i] as i64).pow(2));
    let ixy = Integral::new(w, h, |i| a[i] as i64 * b[i] as i64);
    let (mw, mh) = (w - win + 1, h - win + 1);
    let n = (win * win) as i64;
    let (c1, c2) = (p.c1(), p.c2());
    let mut values = Vec::with_capacity(mw * mh);
    for wy in 0..mh {
        for wx in 0..mw {
            values.push(window_ssim(
                n,
                ix.rect(wx, wy, win),
                iy.rect(wx, wy, win),
                ixx.rect(wx, wy, win),
                iyy.rect(wx, wy, win),
                ixy.rect(wx, wy, win),
                c1,
                c2,
            ));
        }
    }
    Ok(SsimMap {
        width: mw,
        height: mh,
        values,
    })
}

pub fn ssim_global(x: &RasterImage, y: &RasterImage, p: &SsimParams) -> Result<f64> {
    Ok(ssim_map(x, y, p)?.mean())
}

pub fn quality(
    reference: &RasterImage,
    other: &RasterImage,
    thresholds: &Thresholds,
    params: &SsimParams,
) -> Result<QualityReport> {
    let mse = mse(reference, other)?;
    let psnr = psnr_from_mse(mse);
    let ssim = ssim_global(reference, other, params)?;
    Ok(QualityReport {
        psnr,
        mse,
        ssim,
        flagged: thresholds.flags(ssim, psnr),
    })
}

/// Compares a revealed marker with its reference and applies the tamper rule.
pub fn verify(
    reference: &RasterImage,
    revealed: &RasterImage,
    thresholds: &Thresholds,
) -> Result<QualityReport> {
    quality(reference, revealed, thresholds, &SsimParams::default())
}
