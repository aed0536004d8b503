//! Degradation features of a revealed marker against its reference.
//!
//! The layout is part of the contract: [`FEATURE_NAMES`] lists every slot in
//! order and trained models index into it.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manipulate::filters::median_blur;
use crate::metrics::{ssim_map, SsimParams};
use crate::raster::RasterImage;

pub const FEATURE_LEN: usize = 72;

pub const FEATURE_NAMES: [&str; FEATURE_LEN] = [
    // residual moments
    "res_mean", "res_std", "res_skew", "res_kurt",
    "res_mean_c0", "res_mean_c1", "res_mean_c2",
    // ssim map
    "ssim_mean", "ssim_std", "ssim_min", "ssim_p05", "ssim_frac_lt_0.5",
    "ssim_b00", "ssim_b01", "ssim_b02", "ssim_b03",
    "ssim_b10", "ssim_b11", "ssim_b12", "ssim_b13",
    "ssim_b20", "ssim_b21", "ssim_b22", "ssim_b23",
    "ssim_b30", "ssim_b31", "ssim_b32", "ssim_b33",
    // radial spectrum of the luma residual
    "fft_band0", "fft_band1", "fft_band2", "fft_band3",
    "fft_band4", "fft_band5", "fft_band6", "fft_band7",
    // |residual| histogram
    "hist_00", "hist_01", "hist_02", "hist_03", "hist_04", "hist_05", "hist_06", "hist_07",
    "hist_08", "hist_09", "hist_10", "hist_11", "hist_12", "hist_13", "hist_14", "hist_15",
    "edge_gt_32", "edge_gt_96", "edge_gt_192",
    "sat_0", "sat_255",
    "lmed_mean", "lmed_std", "lmed_frac_gt_32",
    "bit_err_3", "bit_err_5", "blockiness", "grad_energy_ratio",
    // luma residual autocorrelation at lags 1, 2, 8
    "res_ac1", "res_ac2", "res_ac8",
    "err_tile_disp", "err_ac4", "res_2x2_share", "res_pos_frac", "spread_ratio",
];

/// Upper edges of the |residual| histogram bins.
const HIST_EDGES: [f64; 16] = [
    1.0, 2.0, 3.0, 4.0, 6.0, 8.0, 12.0, 16.0, 24.0, 32.0, 48.0, 64.0, 96.0, 128.0, 192.0, 256.0,
];
const EDGE_THRESHOLDS: [f64; 3] = [32.0, 96.0, 192.0];
const FFT_BANDS: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    /// Index of the first non-finite value, if any.
    pub fn first_non_finite(&self) -> Option<usize> {
        self.0.iter().position(|v| !v.is_finite())
    }
}

pub fn extract_features(reference: &RasterImage, revealed: &RasterImage) -> Result<FeatureVector> {
    reference.ensure_comparable(revealed)?;
    let (w, h) = (reference.width() as usize, reference.height() as usize);
    let c = reference.channels() as usize;
    let mut f = Vec::with_capacity(FEATURE_LEN);

    let (a, b) = (reference.data(), revealed.data());
    let res: Vec<f64> = a.iter().zip(b).map(|(&x, &y)| y as f64 - x as f64).collect();
    f.extend(moments(&res));
    for ch in 0..3 {
        let ch = ch.min(c - 1);
        let vals: Vec<f64> = res.iter().skip(ch).step_by(c).copied().collect();
        f.push(mean(&vals));
    }

    let map = ssim_map(reference, revealed, &SsimParams::default())?;
    let mut sorted = map.values.clone();
    sorted.sort_by(f64::total_cmp);
    let (sm, ss) = mean_std(&map.values);
    f.push(sm);
    f.push(ss);
    f.push(sorted[0]);
    f.push(sorted[(0.05 * (sorted.len() - 1) as f64).floor() as usize]);
    f.push(fraction(&map.values, |v| v < 0.5));
    for by in 0..4 {
        for bx in 0..4 {
            let (x0, x1) = (bx * map.width / 4, ((bx + 1) * map.width / 4).max(bx * map.width / 4 + 1));
            let (y0, y1) = (by * map.height / 4, ((by + 1) * map.height / 4).max(by * map.height / 4 + 1));
            let mut acc = 0.0;
            let mut n = 0usize;
            for y in y0..y1.min(map.height) {
                for x in x0..x1.min(map.width) {
                    acc += map.get(x, y);
                    n += 1;
                }
            }
            f.push(if n == 0 { sm } else { acc / n as f64 });
        }
    }

    let ref_luma = reference.luma_f64();
    let rev_luma = revealed.luma_f64();
    let res_luma: Vec<f64> = ref_luma.iter().zip(&rev_luma).map(|(x, y)| y - x).collect();
    f.extend(radial_bands(&res_luma, w, h));

    let mut hist = [0usize; 16];
    for r in &res {
        let m = r.abs();
        let bin = HIST_EDGES.iter().position(|&e| m < e).unwrap_or(15);
        hist[bin] += 1;
    }
    f.extend(hist.iter().map(|&k| k as f64 / res.len() as f64));

    let gray = revealed.to_grayscale();
    let mag = sobel_magnitude(gray.data(), w, h);
    for t in EDGE_THRESHOLDS {
        f.push(fraction(&mag, |m| m > t));
    }

    f.push(b.iter().filter(|&&v| v == 0).count() as f64 / b.len() as f64);
    f.push(b.iter().filter(|&&v| v == 255).count() as f64 / b.len() as f64);

    let med = median_blur(&gray, 3)?;
    let dev: Vec<f64> = gray
        .data()
        .iter()
        .zip(med.data())
        .map(|(&g, &m)| (g as f64 - m as f64).abs())
        .collect();
    let (dm, ds) = mean_std(&dev);
    f.push(dm);
    f.push(ds);
    f.push(fraction(&dev, |d| d > 32.0));

    for bit in [3, 5] {
        let errs = a.iter().zip(b).filter(|(&x, &y)| ((x ^ y) >> bit) & 1 == 1).count();
        f.push(errs as f64 / a.len() as f64);
    }
    f.push(blockiness(&res_luma, w, h));
    f.push(((grad_energy(&rev_luma, w, h) + 1.0) / (grad_energy(&ref_luma, w, h) + 1.0)).ln());
    for lag in [1, 2, 8] {
        f.push(autocorr(&res_luma, w, h, lag));
    }
    let large: Vec<f64> = res_luma.iter().map(|r| (r.abs() > 24.0) as u8 as f64).collect();
    f.push(tile_dispersion(&large, w, h));
    let small: Vec<f64> = res_luma.iter().map(|r| (r.abs() > 4.0) as u8 as f64).collect();
    f.push(autocorr(&small, w, h, 4));
    f.push(within_2x2_share(&res_luma, w, h));
    f.push(fraction(&res_luma, |r| r > 0.5));
    let (_, s_ref) = mean_std(&ref_luma);
    let (_, s_rev) = mean_std(&rev_luma);
    f.push(((s_rev + 1.0) / (s_ref + 1.0)).ln());

    debug_assert_eq!(f.len(), FEATURE_LEN);
    let fv = FeatureVector(f);
    if let Some(index) = fv.first_non_finite() {
        return Err(Error::NonFiniteFeature { index });
    }
    Ok(fv)
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let m = mean(v);
    let var = mean(&v.iter().map(|x| (x - m).powi(2)).collect::<Vec<_>>());
    (m, var.sqrt())
}

/// Mean, population std, skewness and excess kurtosis. Higher moments are 0
/// for a constant input.
fn moments(v: &[f64]) -> [f64; 4] {
    let n = v.len() as f64;
    let m = mean(v);
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for x in v {
        let d = x - m;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    if m2 <= 1e-12 {
        return [m, m2.max(0.0).sqrt(), 0.0, 0.0];
    }
    [m, m2.sqrt(), m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0]
}

fn fraction(v: &[f64], pred: impl Fn(f64) -> bool) -> f64 {
    v.iter().filter(|&&x| pred(x)).count() as f64 / v.len().max(1) as f64
}

/// `log10(1 + mean power)` of the 2-D spectrum in octave bands of radial
/// frequency, the lowest band also holding DC.
fn radial_bands(res: &[f64], w: usize, h: usize) -> [f64; FFT_BANDS] {
    let mut planner = FftPlanner::<f64>::new();
    let row_fft: Arc<dyn Fft<f64>> = planner.plan_fft_forward(w);
    let col_fft: Arc<dyn Fft<f64>> = planner.plan_fft_forward(h);
    let mut buf: Vec<Complex<f64>> = res.iter().map(|&r| Complex::new(r, 0.0)).collect();
    for row in buf.chunks_exact_mut(w) {
        row_fft.process(row);
    }
    let mut col = vec![Complex::new(0.0, 0.0); h];
    for x in 0..w {
        for y in 0..h {
            col[y] = buf[y * w + x];
        }
        col_fft.process(&mut col);
        for y in 0..h {
            buf[y * w + x] = col[y];
        }
    }
    let r_max = std::f64::consts::FRAC_1_SQRT_2;
    let norm = (w * h) as f64;
    let mut sum = [0.0f64; FFT_BANDS];
    let mut count = [0usize; FFT_BANDS];
    for y in 0..h {
        let fy = signed_freq(y, h);
        for x in 0..w {
            let fx = signed_freq(x, w);
            let r = (fx * fx + fy * fy).sqrt() / r_max;
            let band = if r <= 0.0 {
                0
            } else {
                ((r.log2() + FFT_BANDS as f64).floor().max(0.0) as usize).min(FFT_BANDS - 1)
            };
            sum[band] += buf[y * w + x].norm_sqr() / norm;
            count[band] += 1;
        }
    }
    let mut out = [0.0; FFT_BANDS];
    for i in 0..FFT_BANDS {
        let mp = if count[i] == 0 { 0.0 } else { sum[i] / count[i] as f64 };
        out[i] = (1.0 + mp).log10();
    }
    out
}

#[inline]
fn signed_freq(i: usize, n: usize) -> f64 {
    let k = if i <= n / 2 { i as f64 } else { i as f64 - n as f64 };
    k / n as f64
}

fn sobel_magnitude(g: &[u8], w: usize, h: usize) -> Vec<f64> {
    let at = |x: isize, y: isize| {
        let xx = x.clamp(0, w as isize - 1) as usize;
        let yy = y.clamp(0, h as isize - 1) as usize;
        g[yy * w + xx] as f64
    };
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h as isize {
        for x in 0..w as isize {
            let gx = at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1)
                - at(x - 1, y - 1)
                - 2.0 * at(x - 1, y)
                - at(x - 1, y + 1);
            let gy = at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1)
                - at(x - 1, y - 1)
                - 2.0 * at(x, y - 1)
                - at(x + 1, y - 1);
            out.push((gx * gx + gy * gy).sqrt());
        }
    }
    out
}

/// Log ratio of mean absolute step across 8-pixel grid lines to the mean
/// step elsewhere.
fn blockiness(v: &[f64], w: usize, h: usize) -> f64 {
    let (mut on, mut n_on, mut off, mut n_off) = (0.0, 0usize, 0.0, 0usize);
    for y in 0..h {
        for x in 1..w {
            let d = (v[y * w + x] - v[y * w + x - 1]).abs();
            if x % 8 == 0 {
                on += d;
                n_on += 1;
            } else {
                off += d;
                n_off += 1;
            }
        }
    }
    for y in 1..h {
        for x in 0..w {
            let d = (v[y * w + x] - v[(y - 1) * w + x]).abs();
            if y % 8 == 0 {
                on += d;
                n_on += 1;
            } else {
                off += d;
                n_off += 1;
            }
        }
    }
    let on = on / n_on.max(1) as f64;
    let off = off / n_off.max(1) as f64;
    ((on + 1e-3) / (off + 1e-3)).ln()
}

fn grad_energy(v: &[f64], w: usize, h: usize) -> f64 {
    let mut acc = 0.0;
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let dx = if x + 1 < w { v[i + 1] - v[i] } else { 0.0 };
            let dy = if y + 1 < h { v[i + w] - v[i] } else { 0.0 };
            acc += dx * dx + dy * dy;
        }
    }
    acc / (w * h) as f64
}

/// Mean of the horizontal and vertical autocorrelation at `lag`.
fn autocorr(v: &[f64], w: usize, h: usize, lag: usize) -> f64 {
    let m = mean(v);
    let (mut num, mut den) = (0.0, 0.0);
    for y in 0..h {
        for x in 0..w {
            let d = v[y * w + x] - m;
            den += d * d;
            if x + lag < w {
                num += d * (v[y * w + x + lag] - m);
            }
            if y + lag < h {
                num += d * (v[(y + lag) * w + x] - m);
            }
        }
    }
    if den <= 1e-12 {
        0.0
    } else {
        num / (2.0 * den)
    }
}

/// Spread of a 0/1 map's density over 8x8 tiles, as the log ratio to the
/// spread expected if the ones were scattered independently.
fn tile_dispersion(ind: &[f64], w: usize, h: usize) -> f64 {
    let mut tiles = Vec::with_capacity((w / 8) * (h / 8));
    for ty in 0..h / 8 {
        for tx in 0..w / 8 {
            let mut s = 0.0;
            for y in 0..8 {
                let row = (ty * 8 + y) * w + tx * 8;
                s += ind[row..row + 8].iter().sum::<f64>();
            }
            tiles.push(s / 64.0);
        }
    }
    if tiles.is_empty() {
        return 0.0;
    }
    let (m, sd) = mean_std(&tiles);
    let independent = (m * (1.0 - m) / 64.0).sqrt();
    ((sd + 1e-3) / (independent + 1e-3)).ln()
}

/// Share of the variance of |residual| that lies within 2x2 blocks.
fn within_2x2_share(res: &[f64], w: usize, h: usize) -> f64 {
    let abs: Vec<f64> = res.iter().map(|r| r.abs()).collect();
    let m = mean(&abs);
    let (mut within, mut total) = (0.0, 0.0);
    for by in 0..h / 2 {
        for bx in 0..w / 2 {
            let i = 2 * by * w + 2 * bx;
            let idx = [i, i + 1, i + w, i + w + 1];
            let bm = idx.iter().map(|&k| abs[k]).sum::<f64>() / 4.0;
            for k in idx {
                within += (abs[k] - bm).powi(2);
                total += (abs[k] - m).powi(2);
            }
        }
    }
    if total <= 1e-12 {
        0.0
    } else {
        within / total
    }
}
