use std::collections::BTreeMap;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use fragilemark::experiment::{build_samples, protocol, LoadedCorpus, Pipeline};
use fragilemark::manipulate::{default_grid, ManipulationClass};
use fragilemark::metrics::{ssim_global, SsimParams};
use fragilemark::par::Parallelism;
use fragilemark::stego::{engine, EmbedKey, EngineId, EngineParams};

/// One cell per class keeps an iteration around a second.
fn small_grid() -> Vec<fragilemark::manipulate::ManipulationSpec> {
    let mut seen = Vec::new();
    default_grid()
        .into_iter()
        .filter(|s| {
            let fresh = !seen.contains(&s.class()) && s.id() != "compression/webp/q100";
            if fresh {
                seen.push(s.class());
            }
            fresh
        })
        .collect()
}

fn samples(c: &mut Criterion) {
    let corpus = LoadedCorpus::synthetic(4, 3);
    let partners: BTreeMap<String, String> = protocol::morph_partners(&corpus.ids(), 1).into_iter().collect();
    let grid = small_grid();
    assert_eq!(grid.len(), ManipulationClass::COUNT);
    let mut group = c.benchmark_group("build_samples");
    group.sample_size(10);
    for id in EngineId::ALL {
        let eng = engine(id, &EngineParams::default()).unwrap();
        for mode in [Parallelism::Sequential, Parallelism::Parallel] {
            let p = Pipeline::new(&corpus, eng.as_ref(), EngineParams::default(), EmbedKey(9), 1, partners.clone())
                .with_parallelism(mode);
            group.bench_with_input(BenchmarkId::new(id.as_str(), format!("{mode:?}")), &grid, |b, g| {
                b.iter(|| black_box(build_samples(&p, g, &Default::default())))
            });
        }
    }
    group.finish();
}

fn kernels(c: &mut Criterion) {
    let corpus = LoadedCorpus::synthetic(1, 3);
    let cover = &corpus.identities[0].cover;
    let marker = corpus.marker_for(cover).unwrap();
    for id in EngineId::ALL {
        let eng = engine(id, &EngineParams::default()).unwrap();
        let stego = eng.embed(EmbedKey(9), cover, &marker).unwrap();
        c.bench_function(&format!("embed/{id}"), |b| {
            b.iter(|| black_box(eng.embed(EmbedKey(9), cover, &marker).unwrap()))
        });
        c.bench_function(&format!("reveal/{id}"), |b| {
            b.iter(|| black_box(eng.reveal(EmbedKey(9), &stego).unwrap()))
        });
    }
    c.bench_function("ssim_224", |b| {
        b.iter(|| black_box(ssim_global(cover, &marker, &SsimParams::default()).unwrap()))
    });
}

criterion_group!(benches, samples, kernels);
criterion_main!(benches);
