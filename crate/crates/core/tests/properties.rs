mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use fragilemark::classify::model::softmax;
use fragilemark::classify::{Classifier, FeatureVector, LogisticModel, ModelMetadata, Normalizer, Prediction};
use fragilemark::experiment::protocol::split_identities;
use fragilemark::io::{decode, encode, ImageFormat};
use fragilemark::manipulate::{apply, Manipulation, ManipulationSpec};
use fragilemark::metrics::{mse, psnr, ssim_global, SsimParams};
use fragilemark::morph::{morph, triangulate, LandmarkSet, Point};
use fragilemark::stego::{engine, EmbedKey, EngineId, EngineParams};

use common::*;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn landmarks(r: &mut ChaCha8Rng, n: usize, w: u32, h: u32) -> LandmarkSet {
    use rand::Rng;
    LandmarkSet::new(
        (0..n)
            .map(|_| Point::new(r.random_range(2.0..w as f64 - 2.0), r.random_range(2.0..h as f64 - 2.0)))
            .collect(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn png_round_trip(seed in any::<u64>(), w in 1u32..40, h in 1u32..40, rgb in any::<bool>()) {
        let img = random_image(&mut rng(seed), w, h, if rgb { 3 } else { 1 });
        prop_assert_eq!(decode(&encode(&img, ImageFormat::png()).unwrap()).unwrap(), img);
    }

    #[test]
    fn lossy_decode_keeps_dimensions(seed in any::<u64>(), w in 8u32..40, h in 8u32..40, q in 1u8..=100) {
        let img = textured_image(&mut rng(seed), w, h, 3);
        let back = decode(&encode(&img, ImageFormat::jpeg(q).unwrap()).unwrap()).unwrap();
        prop_assert_eq!((back.width(), back.height(), back.channels()), (w, h, 3));
    }

    #[test]
    fn grayscale_is_idempotent(seed in any::<u64>()) {
        let g = random_image(&mut rng(seed), 9, 7, 3).to_grayscale();
        prop_assert_eq!(g.to_grayscale(), g);
    }

    #[test]
    fn delaunay_is_empty_circle(seed in any::<u64>(), n in 3usize..60) {
        let pts = random_points(&mut rng(seed), n, 500.0);
        let tris = triangulate(&pts).unwrap();
        for &t in &tris {
            prop_assert!(!circumcircle_violated(&pts, t, 1e-9), "{:?}", t);
        }
        prop_assert_eq!(tris.len(), 2 * n - 2 - hull_size(&pts));
    }

    #[test]
    fn morph_endpoints_and_self_morph(seed in any::<u64>(), alpha in 0.0f64..=1.0) {
        let mut r = rng(seed);
        let a = textured_image(&mut r, 32, 28, 3);
        let b = textured_image(&mut r, 32, 28, 3);
        let (la, lb) = (landmarks(&mut r, 6, 32, 28), landmarks(&mut r, 6, 32, 28));
        prop_assert_eq!(&morph(&a, &b, &la, &lb, 1.0).unwrap(), &a);
        prop_assert_eq!(&morph(&a, &b, &la, &lb, 0.0).unwrap(), &b);
        prop_assert_eq!(&morph(&a, &a, &la, &la, alpha).unwrap(), &a);
    }

    #[test]
    fn morph_swap_symmetry_at_dyadic_alpha(seed in any::<u64>(), k in 0u32..=8) {
        let alpha = k as f64 / 8.0;
        let mut r = rng(seed);
        let a = textured_image(&mut r, 24, 24, 1);
        let b = textured_image(&mut r, 24, 24, 1);
        let (la, lb) = (landmarks(&mut r, 5, 24, 24), landmarks(&mut r, 5, 24, 24));
        prop_assert_eq!(
            morph(&a, &b, &la, &lb, alpha).unwrap(),
            morph(&b, &a, &lb, &la, 1.0 - alpha).unwrap()
        );
    }

    #[test]
    fn metrics_are_symmetric(seed in any::<u64>()) {
        let mut r = rng(seed);
        let a = textured_image(&mut r, 20, 20, 3);
        let b = random_image(&mut r, 20, 20, 3);
        let p = SsimParams::default();
        prop_assert_eq!(mse(&a, &b).unwrap(), mse(&b, &a).unwrap());
        prop_assert_eq!(psnr(&a, &b).unwrap(), psnr(&b, &a).unwrap());
        prop_assert_eq!(ssim_global(&a, &b, &p).unwrap(), ssim_global(&b, &a, &p).unwrap());
        prop_assert_eq!(ssim_global(&a, &a, &p).unwrap(), 1.0);
    }

    #[test]
    fn manipulations_are_deterministic_and_keep_shape(seed in any::<u64>(), cell in 0usize..48) {
        let spec = fragilemark::manipulate::default_grid()[cell].with_seed(seed);
        if matches!(spec.manipulation, Manipulation::Webp { .. }) && !fragilemark::io::webp_available() {
            return Ok(());
        }
        let img = textured_image(&mut rng(seed), 32, 24, 3);
        let once = apply(&spec, &img, None).unwrap();
        prop_assert_eq!((once.width(), once.height(), once.channels()), (32, 24, 3));
        prop_assert_eq!(apply(&spec, &img, None).unwrap(), once);
    }

    #[test]
    fn zero_strength_is_identity(seed in any::<u64>()) {
        let img = random_image(&mut rng(seed), 17, 13, 3);
        for m in [Manipulation::GaussianNoise { sigma: 0.0 }, Manipulation::Sharpen { amount: 0.0 }] {
            prop_assert_eq!(&apply(&ManipulationSpec::new(m).with_seed(seed), &img, None).unwrap(), &img);
        }
    }

    #[test]
    fn posterior_sums_to_one(scores in proptest::array::uniform7(-50.0f64..50.0)) {
        let p = softmax(&scores);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(p.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn argmax_ignores_positive_scaling(scores in proptest::array::uniform7(-5.0f64..5.0), s in 0.1f64..10.0) {
        let scaled = scores.map(|v| v * s);
        prop_assert_eq!(
            Prediction::from_posterior(softmax(&scores)).label,
            Prediction::from_posterior(softmax(&scaled)).label
        );
    }

    #[test]
    fn normalized_model_ignores_feature_units(seed in any::<u64>(), scale in 0.01f64..100.0) {
        use rand::Rng;
        let mut r = rng(seed);
        let rows: Vec<Vec<f64>> = (0..20).map(|_| (0..4).map(|_| r.random_range(-3.0..3.0)).collect()).collect();
        let weights: Vec<f64> = (0..4 * 7).map(|_| r.random_range(-1.0..1.0)).collect();
        let model = |rows: &[Vec<f64>]| {
            let refs: Vec<&[f64]> = rows.iter().map(|v| v.as_slice()).collect();
            LogisticModel {
                weights: weights.clone(),
                bias: [0.0; 7],
                normalization: Normalizer::fit(&refs),
                metadata: ModelMetadata::default(),
            }
        };
        let scaled: Vec<Vec<f64>> = rows.iter().map(|v| v.iter().map(|x| x * scale).collect()).collect();
        let (m1, m2) = (model(&rows), model(&scaled));
        for (a, b) in rows.iter().zip(&scaled) {
            let p1 = m1.predict(&FeatureVector(a.clone())).unwrap();
            let p2 = m2.predict(&FeatureVector(b.clone())).unwrap();
            for (x, y) in p1.posterior.iter().zip(&p2.posterior) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn split_is_deterministic_and_disjoint(n in 2usize..80, seed in any::<u64>()) {
        let ids: Vec<String> = (0..n).map(|i| format!("id{i:03}")).collect();
        let a = split_identities(&ids, seed, 0.7).unwrap();
        prop_assert_eq!(&a, &split_identities(&ids, seed, 0.7).unwrap());
        prop_assert!(a.train.iter().all(|id| !a.test.contains(id)));
        prop_assert_eq!(a.train.len() + a.test.len(), n);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn engines_are_deterministic(seed in any::<u64>(), key in any::<u64>()) {
        let mut r = rng(seed);
        let cover = textured_image(&mut r, 48, 40, 3);
        let secret = textured_image(&mut r, 48, 40, 3);
        for id in EngineId::ALL {
            let e = engine(id, &EngineParams::default()).unwrap();
            let s1 = e.embed(EmbedKey(key), &cover, &secret).unwrap();
            prop_assert_eq!(&e.embed(EmbedKey(key), &cover, &secret).unwrap(), &s1);
            prop_assert_eq!(e.reveal(EmbedKey(key), &s1).unwrap(), e.reveal(EmbedKey(key), &s1).unwrap());
            prop_assert_eq!((s1.width(), s1.height(), s1.channels()), (48, 40, 3));
        }
    }

    #[test]
    fn lsb_round_trip_is_near_exact(seed in any::<u64>(), key in any::<u64>()) {
        let mut r = rng(seed);
        let cover = textured_image(&mut r, 40, 40, 3);
        let secret = textured_image(&mut r, 40, 40, 3);
        let e = engine(EngineId::LsbSpread, &EngineParams::default()).unwrap();
        let revealed = e.reveal(EmbedKey(key), &e.embed(EmbedKey(key), &cover, &secret).unwrap()).unwrap();
        prop_assert!(ssim_global(&secret, &revealed, &SsimParams::default()).unwrap() > 0.95);
    }
}

#[test]
fn split_hash_tracks_the_partition() {
    let ids: Vec<String> = (0..10).map(|i| format!("id{i}")).collect();
    let a = split_identities(&ids, 1, 0.7).unwrap();
    let b = split_identities(&ids, 2, 0.7).unwrap();
    assert_eq!(a.hash == b.hash, a.train == b.train);
}
