//! Transform engine: binary quantization-index modulation of mid-frequency
//! luma DCT coefficients.
//!
//! Each full 8x8 luma block carries nine payload bits, one per coefficient at
//! zig-zag positions 6..=14. The payload is the secret's luma, area-averaged
//! to a `1.5*bw x 1.5*bh` grid (`bw`, `bh` = block counts) and quantized to
//! 4 bits, which fills the nine-bit budget exactly. Every 2x2 group of blocks
//! carries the 3x3 payload cells covering the same area, so cover damage stays
//! local in the revealed marker; the key shuffles bits among the group's 36
//! coefficient slots. Only luma changes: the same offset is added to every
//! channel of a pixel, which leaves Cb and Cr untouched.
//!
//! Decoding is soft: a coefficient within a small dead zone of a lattice
//! point yields a hard bit, and beyond it the bit slides linearly towards
//! one half as the coefficient nears the midpoint between lattices. Small
//! manipulations therefore still show in the revealed marker.

use std::sync::OnceLock;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{downsample_cells, upsample_cells, EmbedKey, EngineId, StegoEngine};
use crate::error::{Error, Result};
use crate::raster::{luma as luma_of, round_u8, RasterImage};

pub const DEFAULT_DCT_STEP: f64 = 12.0;
/// Zig-zag positions carrying payload.
pub const QIM_BAND: std::ops::RangeInclusive<usize> = 6..=14;

const DOMAIN: u64 = 0x4443_545f_5149_4d21; // "DCT_QIM!"
const BITS_PER_SAMPLE: usize = 4;
const LEVEL: f64 = 17.0; // 255 / 15
const REFINE_PASSES: usize = 64;
const DITHER_DOMAIN: u64 = 0x4443_545f_4454_4852; // "DCT_DTHR"
/// Half-width of the hard-decision zone around each lattice point, as a
/// fraction of half a step.
const DEAD_ZONE: f64 = 0.1;

const ZIGZAG: [(usize, usize); 64] = [
    (0, 0), (0, 1), (1, 0), (2, 0), (1, 1), (0, 2), (0, 3), (1, 2),
    (2, 1), (3, 0), (4, 0), (3, 1), (2, 2), (1, 3), (0, 4), (0, 5),
    (1, 4), (2, 3), (3, 2), (4, 1), (5, 0), (6, 0), (5, 1), (4, 2),
    (3, 3), (2, 4), (1, 5), (0, 6), (0, 7), (1, 6), (2, 5), (3, 4),
    (4, 3), (5, 2), (6, 1), (7, 0), (7, 1), (6, 2), (5, 3), (4, 4),
    (3, 5), (2, 6), (1, 7), (2, 7), (3, 6), (4, 5), (5, 4), (6, 3),
    (7, 2), (7, 3), (6, 4), (5, 5), (4, 6), (3, 7), (4, 7), (5, 6),
    (6, 5), (7, 4), (7, 5), (6, 6), (5, 7), (6, 7), (7, 6), (7, 7),
];

const BAND_LEN: usize = 9;

/// Orthonormal 8x8 DCT basis images for the payload band, row-major (y, x).
fn band_basis() -> &'static [[f64; 64]; BAND_LEN] {
    static BASIS: OnceLock<[[f64; 64]; BAND_LEN]> = OnceLock::new();
    BASIS.get_or_init(|| {
        let m = |u: usize, t: usize| {
            let scale = if u == 0 { (1.0f64 / 8.0).sqrt() } else { 0.5 };
            scale * (((2 * t + 1) * u) as f64 * std::f64::consts::PI / 16.0).cos()
        };
        let mut out = [[0.0; 64]; BAND_LEN];
        for (k, zz) in QIM_BAND.enumerate() {
            let (u, v) = ZIGZAG[zz];
            for y in 0..8 {
                for x in 0..8 {
                    out[k][y * 8 + x] = m(u, y) * m(v, x);
                }
            }
        }
        out
    })
}

#[derive(Clone, Copy, Debug)]
pub struct DctQim {
    step: f64,
}

struct Layout {
    blocks_x: usize,
    blocks: usize,
    grid_w: usize,
    grid_h: usize,
    /// Coefficient slot (`block * 9 + band index`) for each payload bit.
    slot: Vec<usize>,
}

impl DctQim {
    pub fn new(step: f64) -> Result<Self> {
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "dct step must be positive, got {step}"
            )));
        }
        Ok(Self { step })
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    fn layout(width: u32, height: u32, key: EmbedKey) -> Result<Layout> {
        let (bx, by) = (width as usize / 8, height as usize / 8);
        if bx == 0 || by == 0 {
            return Err(Error::Capacity(format!(
                "dct engine needs at least one 8x8 block, got {width}x{height}"
            )));
        }
        let (gw, gh) = (bx * 3 / 2, by * 3 / 2);
        let bits = gw * gh * BITS_PER_SAMPLE;
        debug_assert!(bits <= bx * by * BAND_LEN);
        let (tx, ty) = (bx / 2, by / 2);
        let mut rng = ChaCha8Rng::seed_from_u64(key.0 ^ DOMAIN);
        let mut slot = vec![usize::MAX; bits];
        let bits_of = |gx: usize, gy: usize| {
            let cell = gy * gw + gx;
            (cell * BITS_PER_SAMPLE)..((cell + 1) * BITS_PER_SAMPLE)
        };
        let slots_of = |bxi: usize, byi: usize| {
            let b = byi * bx + bxi;
            (b * BAND_LEN)..((b + 1) * BAND_LEN)
        };
        let mut assign = |bit_ids: Vec<usize>, mut slot_ids: Vec<usize>, rng: &mut ChaCha8Rng| {
            slot_ids.shuffle(rng);
            for (b, s) in bit_ids.into_iter().zip(slot_ids) {
                slot[b] = s;
            }
        };
        for ty_i in 0..ty {
            for tx_i in 0..tx {
                let bit_ids: Vec<usize> = (0..9)
                    .flat_map(|i| bits_of(3 * tx_i + i % 3, 3 * ty_i + i / 3))
                    .collect();
                let slot_ids: Vec<usize> = (0..4)
                    .flat_map(|i| slots_of(2 * tx_i + i % 2, 2 * ty_i + i / 2))
                    .collect();
                assign(bit_ids, slot_ids, &mut rng);
            }
        }
        // cells and blocks outside the 2x2 tiling (odd block counts)
        let bit_ids: Vec<usize> = (0..gh)
            .flat_map(|gy| (0..gw).map(move |gx| (gx, gy)))
            .filter(|&(gx, gy)| gx >= 3 * tx || gy >= 3 * ty)
            .flat_map(|(gx, gy)| bits_of(gx, gy))
            .collect();
        let slot_ids: Vec<usize> = (0..by)
            .flat_map(|y| (0..bx).map(move |x| (x, y)))
            .filter(|&(x, y)| x >= 2 * tx || y >= 2 * ty)
            .flat_map(|(x, y)| slots_of(x, y))
            .collect();
        debug_assert!(bit_ids.len() <= slot_ids.len());
        assign(bit_ids, slot_ids, &mut rng);
        debug_assert!(slot.iter().all(|&s| s != usize::MAX));
        Ok(Layout {
            blocks_x: bx,
            blocks: bx * by,
            grid_w: gw,
            grid_h: gh,
            slot,
        })
    }

    /// Nearest lattice point carrying `bit`: multiples of `step` for 0,
    /// offset by half a step for 1.
    fn quantize(&self, c: f64, bit: bool) -> f64 {
        let offset = if bit { self.step / 2.0 } else { 0.0 };
        ((c - offset) / self.step).round() * self.step + offset
    }

    /// Bit value in [0, 1]: hard inside the dead zone, 0.5 halfway between
    /// the two lattices.
    fn soft_bit(&self, c: f64) -> f64 {
        let t = c / (self.step / 2.0);
        let n = t.round();
        let r = (((t - n).abs() - DEAD_ZONE) / (0.5 - DEAD_ZONE)).clamp(0.0, 1.0) * 0.5;
        if (n as i64).rem_euclid(2) == 1 {
            1.0 - r
        } else {
            r
        }
    }
}

fn block_origin(layout: &Layout, b: usize) -> (usize, usize) {
    ((b % layout.blocks_x) * 8, (b / layout.blocks_x) * 8)
}

fn band_coefficients(luma: &[f64], width: usize, ox: usize, oy: usize) -> [f64; BAND_LEN] {
    let basis = band_basis();
    let mut out = [0.0; BAND_LEN];
    for (k, b) in basis.iter().enumerate() {
        let mut acc = 0.0;
        for y in 0..8 {
            let row = (oy + y) * width + ox;
            for x in 0..8 {
                acc += luma[row + x] * b[y * 8 + x];
            }
        }
        out[k] = acc;
    }
    out
}

impl StegoEngine for DctQim {
    fn id(&self) -> EngineId {
        EngineId::DctQim
    }

    fn embed(&self, key: EmbedKey, cover: &RasterImage, secret: &RasterImage) -> Result<RasterImage> {
        cover.ensure_comparable(secret)?;
        let layout = Self::layout(cover.width(), cover.height(), key)?;
        let payload = downsample_cells(&secret.to_grayscale(), layout.grid_w, layout.grid_h);
        let bits: Vec<bool> = payload
            .iter()
            .flat_map(|&v| {
                let q = (v as f64 / LEVEL).round() as u8;
                (0..BITS_PER_SAMPLE).map(move |i| (q >> (BITS_PER_SAMPLE - 1 - i)) & 1 == 1)
            })
            .collect();
        let mut targets: Vec<Option<bool>> = vec![None; layout.blocks * BAND_LEN];
        for (&bit, &slot) in bits.iter().zip(&layout.slot) {
            targets[slot] = Some(bit);
        }

        let w = cover.width() as usize;
        let c = cover.channels() as usize;
        let basis = band_basis();
        let tol = 0.8 * DEAD_ZONE * self.step / 2.0;
        let mut out = cover.data().to_vec();
        let mut px = vec![0.0f64; 64 * c];
        let mut luma = vec![0.0f64; 64];
        let mut dither = ChaCha8Rng::seed_from_u64(key.0 ^ DITHER_DOMAIN);

        for (b, chunk) in targets.chunks(BAND_LEN).enumerate() {
            if chunk.iter().all(Option::is_none) {
                continue;
            }
            let (ox, oy) = block_origin(&layout, b);
            for y in 0..8 {
                let row = ((oy + y) * w + ox) * c;
                for (dst, &v) in px[y * 8 * c..(y + 1) * 8 * c].iter_mut().zip(&out[row..row + 8 * c]) {
                    *dst = v as f64;
                }
            }
            // Rounding back to u8 moves the coefficients a little, so the
            // block is corrected until every used coefficient lands near its
            // lattice point.
            for attempt in 0..REFINE_PASSES {
                for (i, l) in luma.iter_mut().enumerate() {
                    let p = &px[i * c..(i + 1) * c];
                    *l = if c == 1 {
                        round_u8(p[0]) as f64
                    } else {
                        luma_of(round_u8(p[0]), round_u8(p[1]), round_u8(p[2]))
                    };
                }
                let coeffs = band_coefficients(&luma, 8, 0, 0);
                let mut delta = [0.0f64; 64];
                let mut touched = false;
                for (k, bit) in chunk.iter().enumerate() {
                    let Some(bit) = *bit else { continue };
                    let d = self.quantize(coeffs[k], bit) - coeffs[k];
                    if (attempt == 0 || d.abs() > tol) && d != 0.0 {
                        touched = true;
                        for (dst, b) in delta.iter_mut().zip(basis[k].iter()) {
                            *dst += d * b;
                        }
                    }
                }
                if !touched {
                    break;
                }
                // retries dither so a correction smaller than the rounding
                // step cannot round back to the same pixels forever
                let amp = if attempt == 0 { 0.0 } else { 1.0 };
                for (i, d) in delta.iter().enumerate() {
                    for v in &mut px[i * c..(i + 1) * c] {
                        *v = round_u8(*v) as f64 + d + amp * (dither.random::<f64>() - 0.5);
                    }
                }
            }
            for y in 0..8 {
                let row = ((oy + y) * w + ox) * c;
                for (dst, &v) in out[row..row + 8 * c].iter_mut().zip(&px[y * 8 * c..(y + 1) * 8 * c]) {
                    *dst = round_u8(v);
                }
            }
        }
        cover.with_data(out)
    }

    fn reveal(&self, key: EmbedKey, image: &RasterImage) -> Result<RasterImage> {
        let layout = Self::layout(image.width(), image.height(), key)?;
        let luma = image.luma_f64();
        let w = image.width() as usize;
        let decoded: Vec<f64> = (0..layout.blocks)
            .flat_map(|b| {
                let (ox, oy) = block_origin(&layout, b);
                band_coefficients(&luma, w, ox, oy).map(|c| self.soft_bit(c))
            })
            .collect();
        let payload: Vec<u8> = layout
            .slot
            .chunks(BITS_PER_SAMPLE)
            .map(|slots| {
                let q = slots.iter().fold(0.0, |acc, &s| 2.0 * acc + decoded[s]);
                round_u8(q * LEVEL)
            })
            .collect();
        let gray = upsample_cells(
            &payload,
            layout.grid_w,
            layout.grid_h,
            1,
            image.width(),
            image.height(),
        )?;
        gray.to_channels(image.channels())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{psnr, ssim_global, SsimParams};

    fn cover(w: u32, h: u32) -> RasterImage {
        RasterImage::from_fn(w, h, 3, |x, y, c| {
            let base = 60.0 + 80.0 * ((x as f64 / 11.0).sin() * (y as f64 / 17.0).cos()).abs();
            let n = ((x * 31 + y * 17 + c as u32 * 7).wrapping_mul(2654435761) >> 28) as f64;
            (base + n + c as f64 * 20.0) as u8
        })
        .unwrap()
    }

    fn quantized_marker(w: u32, h: u32) -> RasterImage {
        let (gw, gh) = ((w as usize / 8) * 3 / 2, (h as usize / 8) * 3 / 2);
        let payload: Vec<u8> = (0..gw * gh).map(|i| ((i * 7 % 16) * 17) as u8).collect();
        upsample_cells(&payload, gw, gh, 1, w, h).unwrap().to_rgb()
    }

    /// What an undamaged reveal must return for `secret`.
    fn ideal(secret: &RasterImage) -> RasterImage {
        let (w, h) = (secret.width(), secret.height());
        let (gw, gh) = ((w as usize / 8) * 3 / 2, (h as usize / 8) * 3 / 2);
        let payload: Vec<u8> = downsample_cells(&secret.to_grayscale(), gw, gh)
            .into_iter()
            .map(|v| ((v as f64 / LEVEL).round() * LEVEL) as u8)
            .collect();
        upsample_cells(&payload, gw, gh, 1, w, h)
            .unwrap()
            .to_channels(secret.channels())
            .unwrap()
    }

    #[test]
    fn basis_is_orthonormal() {
        let b = band_basis();
        for i in 0..BAND_LEN {
            for j in 0..BAND_LEN {
                let dot: f64 = b[i].iter().zip(b[j].iter()).map(|(p, q)| p * q).sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((dot - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn qim_lattice_round_trip() {
        let e = DctQim::new(12.0).unwrap();
        for c in [-40.3, -6.1, -0.2, 0.0, 2.9, 5.5, 17.0, 100.4] {
            for bit in [false, true] {
                let q = e.quantize(c, bit);
                assert!((q - c).abs() <= 6.0 + 1e-9);
                let hard = bit as u8 as f64;
                assert_eq!(e.soft_bit(q), hard);
                assert_eq!(e.soft_bit(q + 0.59), hard);
                assert_eq!(e.soft_bit(q - 0.59), hard);
                // halfway to the other lattice the bit is undecided
                assert!((e.soft_bit(q + 3.0) - 0.5).abs() < 1e-9);
                assert!(((e.soft_bit(q + 1.8) - hard).abs() - 0.25).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn exact_recovery_and_imperceptibility() {
        let e = DctQim::new(DEFAULT_DCT_STEP).unwrap();
        let (cv, secret) = (cover(64, 48), quantized_marker(64, 48));
        let stego = e.embed(EmbedKey(11), &cv, &secret).unwrap();
        assert_eq!(e.reveal(EmbedKey(11), &stego).unwrap(), ideal(&secret));
        assert!(psnr(&cv, &stego).unwrap() > 38.0);
        assert!(ssim_global(&cv, &stego, &SsimParams::default()).unwrap() > 0.9);
    }

    #[test]
    fn chroma_only_edits_do_not_change_reveal() {
        let e = DctQim::new(DEFAULT_DCT_STEP).unwrap();
        let (cv, secret) = (cover(64, 64), quantized_marker(64, 64));
        let stego = e.embed(EmbedKey(2), &cv, &secret).unwrap();
        let shifted: Vec<u8> = stego
            .data()
            .chunks_exact(3)
            .flat_map(|p| {
                let (r, g, b) = (p[0] as f64, p[1] as f64, p[2] as f64);
                let y = 0.299 * r + 0.587 * g + 0.114 * b;
                let cb = -0.168736 * r - 0.331264 * g + 0.5 * b + 6.0;
                let cr = 0.5 * r - 0.418688 * g - 0.081312 * b - 5.0;
                [
                    round_u8(y + 1.402 * cr),
                    round_u8(y - 0.344136 * cb - 0.714136 * cr),
                    round_u8(y + 1.772 * cb),
                ]
            })
            .collect();
        let edited = stego.with_data(shifted).unwrap();
        assert_ne!(edited, stego);
        assert_eq!(
            e.reveal(EmbedKey(2), &edited).unwrap(),
            e.reveal(EmbedKey(2), &stego).unwrap()
        );
    }

    #[test]
    fn damage_stays_local() {
        let e = DctQim::new(DEFAULT_DCT_STEP).unwrap();
        let (cv, secret) = (cover(64, 64), quantized_marker(64, 64));
        let stego = e.embed(EmbedKey(8), &cv, &secret).unwrap();
        let mut data = stego.into_data();
        // wreck the block group at blocks (2..4, 0..2)
        for y in 0..16 {
            for x in 16..32 {
                for ch in 0..3 {
                    data[(y * 64 + x) * 3 + ch] ^= 0x35;
                }
            }
        }
        let back = e.reveal(EmbedKey(8), &RasterImage::new(64, 64, 3, data).unwrap()).unwrap();
        let clean = ideal(&secret);
        // the group's cells plus one cell of bilinear footprint
        for y in 0..64 {
            for x in 0..64 {
                if back.pixel(x, y) != clean.pixel(x, y) {
                    assert!((10..38).contains(&x) && y < 22, "({x}, {y})");
                }
            }
        }
        assert_ne!(back, clean);
    }

    #[test]
    fn odd_block_counts_round_trip() {
        let e = DctQim::new(DEFAULT_DCT_STEP).unwrap();
        let (cv, secret) = (cover(56, 40), quantized_marker(56, 40));
        let stego = e.embed(EmbedKey(3), &cv, &secret).unwrap();
        assert_eq!(e.reveal(EmbedKey(3), &stego).unwrap(), ideal(&secret));
    }

    #[test]
    fn gray_cover_supported() {
        let e = DctQim::new(10.0).unwrap();
        let cv = cover(40, 40).to_grayscale();
        let secret = quantized_marker(40, 40).to_grayscale();
        let stego = e.embed(EmbedKey(4), &cv, &secret).unwrap();
        assert_eq!(e.reveal(EmbedKey(4), &stego).unwrap(), ideal(&secret));
    }

    #[test]
    fn too_small_is_capacity_error() {
        let e = DctQim::new(12.0).unwrap();
        let img = RasterImage::filled(7, 30, 3, 9).unwrap();
        assert!(matches!(e.embed(EmbedKey(0), &img, &img), Err(Error::Capacity(_))));
        assert!(DctQim::new(0.0).is_err());
    }
}
