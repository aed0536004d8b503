//! End-to-end evaluation: certify a corpus with each engine, run the
//! manipulation grid, train the classifier on one engine's training
//! identities and test it on another's held-out identities.

pub mod config;
pub mod corpus;
pub mod dataset;
pub mod protocol;
pub mod report;
pub mod synth;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

pub use config::{ExperimentConfig, ScenarioConfig};
pub use corpus::{generate_corpus, load_manifest, LoadedCorpus};
pub use dataset::{build_dataset, build_samples, Cache, EngineData, Pipeline};
pub use protocol::{split_identities, Protocol, Split};
pub use report::{summary_text, write_report, ExperimentReport, SampleRow};

use crate::classify::{train, Classifier, LogisticModel, MetricsReport, ModelMetadata, Sample};
use crate::error::{Error, Result};
use crate::manipulate::{default_grid, severe_grid, ManipulationClass, ManipulationSpec};
use crate::metrics::Thresholds;
use crate::stego::{engine, EmbedKey, EngineId};
use report::{CellStat, Confusion, EngineSummary, Gap, QualityRow, ScenarioResult, Stat};

/// A finished run: the report plus every test prediction.
#[derive(Clone, Debug)]
pub struct ExperimentOutcome {
    pub report: ExperimentReport,
    pub samples: Vec<SampleRow>,
    pub models: BTreeMap<(EngineId, Protocol), LogisticModel>,
}

pub fn load_corpus(cfg: &ExperimentConfig) -> Result<LoadedCorpus> {
    match (&cfg.corpus.manifest, &cfg.corpus.synthetic) {
        (Some(m), None) => LoadedCorpus::from_manifest(&load_manifest(m)?, cfg.corpus.marker.as_deref()),
        (None, Some(s)) => {
            let mut c = LoadedCorpus::synthetic(s.n, s.seed);
            if let Some(p) = &cfg.corpus.marker {
                c.marker = crate::io::load_image(p)?.to_rgb();
            }
            Ok(c)
        }
        _ => Err(Error::Config("corpus needs exactly one of `manifest` or `synthetic`".into())),
    }
}

pub fn resolve_grid(cfg: &ExperimentConfig) -> Result<Vec<ManipulationSpec>> {
    match &cfg.grid.cells {
        None => Ok(default_grid()),
        Some(ids) => ids.iter().map(|id| Ok(ManipulationSpec::new(id.parse()?))).collect(),
    }
}

fn rate(flags: impl IntoIterator<Item = bool>) -> f64 {
    let (mut n, mut k) = (0usize, 0usize);
    for f in flags {
        n += 1;
        k += f as usize;
    }
    if n == 0 {
        0.0
    } else {
        k as f64 / n as f64
    }
}

fn summarize_engine(
    id: EngineId,
    data: &EngineData,
    grid: &[ManipulationSpec],
    thresholds: Thresholds,
) -> EngineSummary {
    let baseline_ssim = Stat::of(data.baselines.iter().map(|b| b.recovery.ssim));
    let cell = |spec: &ManipulationSpec| {
        let spec_id = spec.id();
        let rows: Vec<_> = data.samples.iter().filter(|s| s.spec_id == spec_id).collect();
        let ssim = Stat::of(rows.iter().map(|s| s.quality.ssim));
        CellStat {
            class: spec.class(),
            n: rows.len(),
            psnr: Stat::of(rows.iter().map(|s| s.quality.psnr)),
            ssim_drop: baseline_ssim.mean - ssim.mean,
            flag_rate: rate(rows.iter().map(|s| s.quality.flagged)),
            ssim,
            spec_id,
        }
    };
    let grid_ids: BTreeSet<String> = grid.iter().map(|s| s.id()).collect();
    let severe_specs: Vec<ManipulationSpec> = severe_grid()
        .into_iter()
        .filter(|s| grid_ids.contains(&s.id()))
        .collect();
    let severe_ids: BTreeSet<String> = severe_specs.iter().map(|s| s.id()).collect();
    EngineSummary {
        engine: id,
        thresholds,
        samples: data.samples.len(),
        baseline_flag_rate: rate(data.baselines.iter().map(|b| b.recovery.flagged)),
        baseline_ssim,
        severe_flag_rate: rate(
            data.samples
                .iter()
                .filter(|s| severe_ids.contains(&s.spec_id))
                .map(|s| s.quality.flagged),
        ),
        severe: severe_specs.iter().map(cell).collect(),
        cells: grid.iter().map(cell).collect(),
        failures: data.failures.clone(),
    }
}

fn gaps(scenarios: &[ScenarioResult]) -> Vec<Gap> {
    let mut out = Vec::new();
    for cross in scenarios.iter().filter(|s| !s.intra) {
        let intra = scenarios
            .iter()
            .find(|s| s.intra && s.test_engine == cross.test_engine && s.protocol == cross.protocol);
        if let Some(intra) = intra {
            out.push(Gap {
                train_engine: cross.train_engine,
                test_engine: cross.test_engine,
                protocol: cross.protocol,
                intra_accuracy: intra.metrics.accuracy,
                cross_accuracy: cross.metrics.accuracy,
                gap: intra.metrics.accuracy - cross.metrics.accuracy,
            });
        }
    }
    out
}

/// Runs every configured scenario. Deterministic in the config: only the
/// report's timestamp varies between runs.
pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let t0 = Instant::now();
    let corpus = load_corpus(cfg)?;
    let (grid, skipped_cells) = dataset::available_cells(&resolve_grid(cfg)?);
    if !skipped_cells.is_empty() {
        log::warn!("codec unavailable, skipping {}", skipped_cells.join(", "));
    }
    let held_out = cfg
        .grid
        .held_out
        .clone()
        .unwrap_or_else(|| protocol::default_held_out(&grid));
    let split = split_identities(&corpus.ids(), cfg.split.seed, cfg.split.train_fraction)?;
    if split.train.iter().any(|t| split.is_test(t)) {
        return Err(Error::DegenerateData("train and test identities overlap".into()));
    }
    let partners: BTreeMap<String, String> = [&split.train, &split.test]
        .into_iter()
        .flat_map(|group| protocol::morph_partners(group, cfg.split.seed))
        .collect();
    let cache = cfg.cache_dir.as_ref().map(Cache::open).transpose()?;

    let needed: BTreeSet<EngineId> = cfg.scenarios.iter().flat_map(|s| [s.train, s.test]).collect();
    let mut data: BTreeMap<EngineId, EngineData> = BTreeMap::new();
    for &id in &needed {
        let eng = engine(id, &cfg.engines)?;
        let pipeline = Pipeline::new(&corpus, eng.as_ref(), cfg.engines, EmbedKey(cfg.key), cfg.seed, partners.clone())
            .with_cache(cache.as_ref())
            .with_parallelism(cfg.parallelism);
        let t = Instant::now();
        let d = build_samples(&pipeline, &grid, &cfg.thresholds.for_engine(id));
        log::info!(
            "{id}: {} samples, {} failures in {:.1?}",
            d.samples.len(),
            d.failures.len(),
            t.elapsed()
        );
        data.insert(id, d);
    }

    let mut models: BTreeMap<(EngineId, Protocol), (LogisticModel, f64, usize)> = BTreeMap::new();
    for s in &cfg.scenarios {
        if models.contains_key(&(s.train, s.protocol)) {
            continue;
        }
        let cells = protocol::training_cells(&grid, s.protocol, &held_out);
        let rows: Vec<Sample> = data[&s.train]
            .samples
            .iter()
            .filter(|r| split.is_train(&r.identity) && cells.contains(&r.spec_id))
            .map(|r| Sample {
                features: r.features.clone(),
                label: r.class,
            })
            .collect();
        if rows.is_empty() {
            return Err(Error::EmptySplit(format!("no training samples for {} {}", s.train, s.protocol)));
        }
        let t = Instant::now();
        let mut outcome = train(&rows, &cfg.classifier)?;
        log::info!("trained {} {} on {} samples in {:.1?}", s.train, s.protocol, rows.len(), t.elapsed());
        outcome.model.metadata = ModelMetadata {
            engine: Some(s.train),
            protocol: Some(s.protocol.to_string()),
            seed: cfg.classifier.seed,
        };
        let loss = outcome.loss_history.last().copied().unwrap_or(f64::NAN);
        models.insert((s.train, s.protocol), (outcome.model, loss, rows.len()));
    }

    let mut scenarios = Vec::new();
    let mut samples = Vec::new();
    for s in &cfg.scenarios {
        let (model, loss, n_train) = &models[&(s.train, s.protocol)];
        let name = s.name();
        let test: Vec<_> = data[&s.test]
            .samples
            .iter()
            .filter(|r| split.is_test(&r.identity))
            .collect();
        if test.is_empty() {
            return Err(Error::EmptyTestSet);
        }
        let mut truth = Vec::with_capacity(test.len());
        let mut predicted = Vec::with_capacity(test.len());
        for r in &test {
            let p = model.predict(&r.features)?;
            truth.push(r.class);
            predicted.push(p.label);
            samples.push(SampleRow {
                scenario: name.clone(),
                identity: r.identity.clone(),
                spec_id: r.spec_id.clone(),
                truth: r.class,
                predicted: p.label,
                posterior_max: p.confidence(),
                ssim: r.quality.ssim,
                psnr: r.quality.psnr,
                mse: r.quality.mse,
                flagged: r.quality.flagged,
            });
        }
        let metrics = MetricsReport::from_predictions(&truth, &predicted)?;
        let top_confusions = metrics
            .top_confusions(5)
            .into_iter()
            .map(|(truth, predicted, count)| Confusion { truth, predicted, count })
            .collect();
        let held = match s.protocol {
            Protocol::P8_8 => Vec::new(),
            Protocol::P6_8 => held_out.clone(),
        };
        scenarios.push(ScenarioResult {
            name,
            train_engine: s.train,
            test_engine: s.test,
            protocol: s.protocol,
            intra: s.is_intra(),
            n_train: *n_train,
            n_test: test.len(),
            morph_seen_in_training: !held.iter().any(|h| {
                h.parse::<crate::manipulate::Manipulation>()
                    .is_ok_and(|m| m.class() == ManipulationClass::Morph)
            }),
            held_out: held,
            final_train_loss: *loss,
            metrics,
            top_confusions,
        });
    }

    let mut engines = Vec::new();
    let mut quality_summary = Vec::new();
    for (&id, d) in &data {
        engines.push(summarize_engine(id, d, &grid, cfg.thresholds.for_engine(id)));
        let certifying: Vec<_> = d.baselines.iter().map(|b| b.certifying).collect();
        quality_summary.push(QualityRow::new("certifying", id, &certifying));
    }
    for (&id, d) in &data {
        let recovery: Vec<_> = d.baselines.iter().map(|b| b.recovery).collect();
        quality_summary.push(QualityRow::new("recovery", id, &recovery));
    }

    let timestamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let report = ExperimentReport {
        timestamp,
        config: cfg.clone(),
        identities: corpus.identities.len(),
        grid: grid.iter().map(|s| s.id()).collect(),
        skipped_cells,
        held_out,
        split_hash: split.hash.clone(),
        split,
        engines,
        quality_summary,
        gaps: gaps(&scenarios),
        scenarios,
    };
    log::info!("experiment finished in {:.1?}", t0.elapsed());
    Ok(ExperimentOutcome {
        report,
        samples,
        models: models.into_iter().map(|(k, (m, _, _))| (k, m)).collect(),
    })
}

/// [`run`] followed by [`write_report`]; trained models go to `models/`.
pub fn run_to_dir(cfg: &ExperimentConfig, out: &Path) -> Result<ExperimentOutcome> {
    let outcome = run(cfg)?;
    write_report(&outcome.report, &outcome.samples, out)?;
    let dir = out.join("models");
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    for ((engine, protocol), model) in &outcome.models {
        let p = dir.join(format!("{engine}-{protocol}.json"));
        let json = serde_json::to_string_pretty(model).map_err(|e| Error::Serialization(e.to_string()))?;
        std::fs::write(&p, json).map_err(|e| Error::io(&p, e))?;
    }
    Ok(outcome)
}
