//! Spatial engine: the secret's luma, cut to two bits per cover channel (six
//! for RGB covers), is split into 2-bit chunks stored in the two least
//! significant bits of cover samples. Chunks never leave their 2x2 pixel
//! block, so damage to the cover shows up at the same place in the revealed
//! marker; the key shuffles which block sample carries which chunk.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{EmbedKey, EngineId, StegoEngine};
use crate::error::Result;
use crate::raster::RasterImage;

const DOMAIN: u64 = 0x4c53_425f_5350_5244; // "LSB_SPRD"

#[derive(Clone, Copy, Debug, Default)]
pub struct LsbSpread;

impl LsbSpread {
    /// Secret bits kept per pixel.
    fn depth(channels: usize) -> usize {
        2 * channels
    }

    /// Cover sample index of chunk `k` (0 = most significant) of pixel `p`,
    /// at position `p * c + k`.
    fn slots(key: EmbedKey, w: usize, h: usize, c: usize) -> Vec<usize> {
        let mut rng = ChaCha8Rng::seed_from_u64(key.0 ^ DOMAIN);
        let mut out = vec![0; w * h * c];
        let mut samples = Vec::with_capacity(4 * c);
        for by in (0..h).step_by(2) {
            for bx in (0..w).step_by(2) {
                samples.clear();
                for y in by..(by + 2).min(h) {
                    for x in bx..(bx + 2).min(w) {
                        samples.extend((0..c).map(|ch| (y * w + x) * c + ch));
                    }
                }
                // chunks of the block's pixels, in the same order as `samples`
                let chunks = samples.clone();
                samples.shuffle(&mut rng);
                for (&chunk, &s) in chunks.iter().zip(&samples) {
                    out[chunk] = s;
                }
            }
        }
        out
    }
}

impl StegoEngine for LsbSpread {
    fn id(&self) -> EngineId {
        EngineId::LsbSpread
    }

    fn embed(&self, key: EmbedKey, cover: &RasterImage, secret: &RasterImage) -> Result<RasterImage> {
        cover.ensure_comparable(secret)?;
        let (w, h, c) = (
            cover.width() as usize,
            cover.height() as usize,
            cover.channels() as usize,
        );
        let shift = 8 - Self::depth(c);
        let slots = Self::slots(key, w, h, c);
        let mut out = cover.data().to_vec();
        for (p, &v) in secret.to_grayscale().data().iter().enumerate() {
            let q = v >> shift;
            for k in 0..c {
                let chunk = (q >> (2 * (c - 1 - k))) & 0b11;
                let pos = slots[p * c + k];
                out[pos] = (out[pos] & !0b11) | chunk;
            }
        }
        cover.with_data(out)
    }

    fn reveal(&self, key: EmbedKey, image: &RasterImage) -> Result<RasterImage> {
        let (w, h, c) = (
            image.width() as usize,
            image.height() as usize,
            image.channels() as usize,
        );
        let shift = 8 - Self::depth(c);
        let slots = Self::slots(key, w, h, c);
        let data = image.data();
        let gray: Vec<u8> = (0..w * h)
            .map(|p| {
                let q = (0..c).fold(0u8, |acc, k| (acc << 2) | (data[slots[p * c + k]] & 0b11));
                // midpoint of the quantization bin
                (q << shift) | ((1u8 << shift) >> 1)
            })
            .collect();
        RasterImage::new(image.width(), image.height(), 1, gray)?.to_channels(image.channels())
    }
}

impl LsbSpread {
    /// What an undamaged reveal returns for `secret` on a `channels`-channel cover.
    pub fn quantize(secret: &RasterImage, channels: u8) -> Result<RasterImage> {
        let shift = 8 - Self::depth(channels as usize);
        let gray = secret.to_grayscale();
        let data = gray
            .data()
            .iter()
            .map(|&v| ((v >> shift) << shift) | ((1u8 << shift) >> 1))
            .collect();
        gray.with_data(data)?.to_channels(channels)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::metrics::{ssim_global, SsimParams};

    fn textured(w: u32, h: u32, seed: u32) -> RasterImage {
        RasterImage::from_fn(w, h, 3, |x, y, c| {
            let v = (x * 7 + y * 13 + c as u32 * 29 + seed).wrapping_mul(2654435761) >> 24;
            (v as u8) / 2 + 64
        })
        .unwrap()
    }

    fn blocky_marker(w: u32, h: u32) -> RasterImage {
        RasterImage::from_fn(w, h, 3, |x, y, c| {
            if (x / 4 + y / 3 + c as u32) % 2 == 0 {
                250
            } else {
                10
            }
        })
        .unwrap()
    }

    #[test]
    fn payload_is_recovered_exactly() {
        let cover = textured(32, 24, 1);
        let secret = blocky_marker(32, 24);
        let stego = LsbSpread.embed(EmbedKey(9), &cover, &secret).unwrap();
        let back = LsbSpread.reveal(EmbedKey(9), &stego).unwrap();
        assert_eq!(back, LsbSpread::quantize(&secret, 3).unwrap());
        let gray = secret.to_grayscale();
        for (a, b) in gray.data().iter().zip(back.to_grayscale().data()) {
            assert!((*a as i32 - *b as i32).abs() <= 2);
        }
    }

    #[test]
    fn only_two_lsbs_change() {
        let cover = textured(16, 16, 3);
        let secret = blocky_marker(16, 16);
        let stego = LsbSpread.embed(EmbedKey(1), &cover, &secret).unwrap();
        for (a, b) in cover.data().iter().zip(stego.data()) {
            assert_eq!(a & !3, b & !3);
        }
    }

    #[test]
    fn wrong_key_scrambles() {
        let cover = textured(64, 64, 5);
        let secret = blocky_marker(64, 64);
        let stego = LsbSpread.embed(EmbedKey(1), &cover, &secret).unwrap();
        let wrong = LsbSpread.reveal(EmbedKey(2), &stego).unwrap();
        assert!(ssim_global(&secret, &wrong, &SsimParams::default()).unwrap() < 0.5);
    }

    #[test]
    fn rejects_mismatched() {
        let b = RasterImage::filled(4, 4, 1, 0).unwrap();
        let c = RasterImage::filled(4, 4, 3, 0).unwrap();
        assert!(matches!(
            LsbSpread.embed(EmbedKey(0), &b, &c),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn damage_stays_in_its_block() {
        let cover = textured(32, 32, 2);
        let secret = blocky_marker(32, 32);
        let clean = LsbSpread.embed(EmbedKey(4), &cover, &secret).unwrap();
        let mut data = clean.clone().into_data();
        for ch in 0..3 {
            data[(5 * 32 + 9) * 3 + ch] ^= 0b11;
        }
        let back = LsbSpread.reveal(EmbedKey(4), &clean.with_data(data).unwrap()).unwrap();
        let clean = LsbSpread.reveal(EmbedKey(4), &clean).unwrap();
        let mut changed = 0;
        for y in 0..32 {
            for x in 0..32 {
                if back.pixel(x, y) != clean.pixel(x, y) {
                    assert!((8..10).contains(&x) && (4..6).contains(&y), "({x}, {y})");
                    changed += 1;
                }
            }
        }
        assert!(changed > 0);
    }

    #[test]
    fn odd_dimensions_and_gray_covers_work() {
        let cover = RasterImage::from_fn(7, 5, 1, |x, y, _| (x * 30 + y) as u8).unwrap();
        let secret = RasterImage::filled(7, 5, 1, 200).unwrap();
        let stego = LsbSpread.embed(EmbedKey(3), &cover, &secret).unwrap();
        // two bits per pixel: 200 falls in the bin [192, 256)
        assert_eq!(
            LsbSpread.reveal(EmbedKey(3), &stego).unwrap(),
            RasterImage::filled(7, 5, 1, 224).unwrap()
        );
        let rgb = textured(7, 5, 0);
        let secret = blocky_marker(7, 5);
        let stego = LsbSpread.embed(EmbedKey(3), &rgb, &secret).unwrap();
        assert_eq!(
            LsbSpread.reveal(EmbedKey(3), &stego).unwrap(),
            LsbSpread::quantize(&secret, 3).unwrap()
        );
    }
}
