//! Certify, manipulate and reveal every (identity, cell) pair.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::corpus::{Identity, LoadedCorpus};
use super::protocol::hex;
use crate::classify::{extract_features, FeatureVector};
use crate::error::{Error, Result};
use crate::io::{self, ImageFormat};
use crate::manipulate::{self, Manipulation, ManipulationClass, ManipulationSpec};
use crate::metrics::{quality, QualityReport, SsimParams, Thresholds};
use crate::morph::MorphAux;
use crate::par::{self, Parallelism};
use crate::raster::RasterImage;
use crate::stego::{EmbedKey, EngineParams, StegoEngine};

/// Bumped whenever a stage changes output for the same inputs.
const CACHE_VERSION: &str = "fragilemark-cache-1";

/// Seed for the stochastic stage of one (identity, cell) pair.
pub fn pair_seed(root: u64, identity: &str, spec_id: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(root.to_le_bytes());
    h.update(identity.as_bytes());
    h.update([0]);
    h.update(spec_id.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

/// Drops cells whose codec is missing at runtime. Returns the kept grid and
/// the ids of the dropped cells.
pub fn available_cells(grid: &[ManipulationSpec]) -> (Vec<ManipulationSpec>, Vec<String>) {
    let webp = io::webp_available();
    let (kept, dropped): (Vec<_>, Vec<_>) = grid
        .iter()
        .partition(|s| webp || !matches!(s.manipulation, Manipulation::Webp { .. }));
    (kept, dropped.iter().map(|s| s.id()).collect())
}

/// On-disk store of revealed images keyed by a digest of every input.
/// Writers go through a temp file and an atomic rename, so concurrent runs
/// sharing a directory never see partial files.
#[derive(Debug)]
pub struct Cache {
    dir: PathBuf,
    counter: AtomicU64,
}

impl Cache {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(Self {
            dir,
            counter: AtomicU64::new(0),
        })
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(&key[..2]).join(format!("{key}.png"))
    }

    pub fn get(&self, key: &str) -> Option<RasterImage> {
        let p = self.path(key);
        if !p.exists() {
            return None;
        }
        match io::load_image(&p) {
            Ok(img) => Some(img),
            Err(e) => {
                log::warn!("ignoring unreadable cache entry {}: {e}", p.display());
                None
            }
        }
    }

    pub fn put(&self, key: &str, img: &RasterImage) -> Result<()> {
        let p = self.path(key);
        let parent = p.parent().expect("cache entries live in a subdirectory");
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        let n = self.counter.fetch_add(1, Ordering::Relaxed);
        let tmp = parent.join(format!(".{key}.{}.{n}.tmp", std::process::id()));
        io::save_image(img, &tmp, ImageFormat::png())?;
        std::fs::rename(&tmp, &p).map_err(|e| Error::io(&p, e))
    }
}

fn digest_image(h: &mut Sha256, img: &RasterImage) {
    h.update(img.width().to_le_bytes());
    h.update(img.height().to_le_bytes());
    h.update([img.channels()]);
    h.update(img.data());
}

/// Per-identity content digest: cover pixels and landmarks.
fn identity_digest(ident: &Identity) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(ident.id.as_bytes());
    h.update([0]);
    digest_image(&mut h, &ident.cover);
    if let Some(lm) = &ident.landmarks {
        h.update(lm.to_sidecar().as_bytes());
    }
    h.finalize().into()
}

/// A stego image ready for manipulation.
#[derive(Clone, Debug)]
pub struct Certified {
    pub stego: RasterImage,
    pub marker: RasterImage,
    pub certifying: QualityReport,
}

/// Everything needed to run one engine over a corpus.
pub struct Pipeline<'a> {
    pub corpus: &'a LoadedCorpus,
    pub engine: &'a dyn StegoEngine,
    pub engine_params: EngineParams,
    pub key: EmbedKey,
    /// Root of the per-pair seeds.
    pub seed: u64,
    /// Morph partner of each identity.
    pub partners: BTreeMap<String, String>,
    pub cache: Option<&'a Cache>,
    pub parallelism: Parallelism,
    digests: BTreeMap<String, [u8; 32]>,
    marker_digest: [u8; 32],
}

impl<'a> Pipeline<'a> {
    pub fn new(
        corpus: &'a LoadedCorpus,
        engine: &'a dyn StegoEngine,
        engine_params: EngineParams,
        key: EmbedKey,
        seed: u64,
        partners: BTreeMap<String, String>,
    ) -> Self {
        let digests = corpus
            .identities
            .iter()
            .map(|i| (i.id.clone(), identity_digest(i)))
            .collect();
        let mut h = Sha256::new();
        digest_image(&mut h, &corpus.marker);
        Self {
            corpus,
            engine,
            engine_params,
            key,
            seed,
            partners,
            cache: None,
            parallelism: Parallelism::default(),
            digests,
            marker_digest: h.finalize().into(),
        }
    }

    pub fn with_cache(mut self, cache: Option<&'a Cache>) -> Self {
        self.cache = cache;
        self
    }

    pub fn with_parallelism(mut self, mode: Parallelism) -> Self {
        self.parallelism = mode;
        self
    }

    /// Stamps the pair seed onto a grid cell.
    pub fn seeded(&self, identity: &str, spec: &ManipulationSpec) -> ManipulationSpec {
        spec.with_seed(pair_seed(self.seed, identity, &spec.id()))
    }

    pub fn certify(&self, ident: &Identity) -> Result<Certified> {
        let marker = self.corpus.marker_for(&ident.cover)?;
        let stego = self.engine.embed(self.key, &ident.cover, &marker)?;
        let certifying = quality(&ident.cover, &stego, &Thresholds::default(), &SsimParams::default())?;
        Ok(Certified {
            stego,
            marker,
            certifying,
        })
    }

    fn cache_key(&self, ident: &Identity, spec: Option<&ManipulationSpec>) -> String {
        let mut h = Sha256::new();
        h.update(CACHE_VERSION.as_bytes());
        h.update(self.engine.id().as_str().as_bytes());
        h.update(serde_json::to_vec(&self.engine_params).unwrap_or_default());
        h.update(self.key.0.to_le_bytes());
        h.update(self.marker_digest);
        h.update(self.digests[&ident.id]);
        if let Some(spec) = spec {
            h.update(spec.id().as_bytes());
            h.update(spec.seed.to_le_bytes());
            if spec.class() == ManipulationClass::Morph {
                if let Some(p) = self.partners.get(&ident.id) {
                    h.update(self.digests.get(p).copied().unwrap_or_default());
                }
            }
        } else {
            h.update(b"baseline");
        }
        hex(&h.finalize())
    }

    fn morph_aux(&self, ident: &Identity) -> Result<MorphAux> {
        let partner_id = self.partners.get(&ident.id).ok_or(Error::MissingAux)?;
        let partner = self.corpus.get(partner_id).ok_or(Error::MissingAux)?;
        let (Some(la), Some(lb)) = (&ident.landmarks, &partner.landmarks) else {
            return Err(Error::MissingAux);
        };
        Ok(MorphAux {
            partner: partner.cover.clone(),
            landmarks_a: la.clone(),
            landmarks_b: lb.clone(),
        })
    }

    /// Manipulates (unless `spec` is `None`) and reveals one certified image.
    /// `spec` must already carry its pair seed.
    pub fn reveal(&self, ident: &Identity, cert: &Certified, spec: Option<&ManipulationSpec>) -> Result<RasterImage> {
        let key = self.cache.map(|_| self.cache_key(ident, spec));
        if let (Some(cache), Some(k)) = (self.cache, &key) {
            if let Some(img) = cache.get(k) {
                return Ok(img);
            }
        }
        let revealed = match spec {
            None => self.engine.reveal(self.key, &cert.stego)?,
            Some(spec) => {
                let aux = match spec.class() {
                    ManipulationClass::Morph => Some(self.morph_aux(ident)?),
                    _ => None,
                };
                let manipulated = manipulate::apply(spec, &cert.stego, aux.as_ref())?;
                self.engine.reveal(self.key, &manipulated)?
            }
        };
        if let (Some(cache), Some(k)) = (self.cache, &key) {
            if let Err(e) = cache.put(k, &revealed) {
                log::warn!("cache write failed: {e}");
            }
        }
        Ok(revealed)
    }

    fn certify_all(&self) -> Vec<Result<Certified>> {
        par::map(&self.corpus.identities, self.parallelism, |i| self.certify(i))
    }

    fn jobs(&self, grid: &[ManipulationSpec]) -> Vec<(usize, Option<ManipulationSpec>)> {
        let mut jobs = Vec::new();
        for (k, ident) in self.corpus.identities.iter().enumerate() {
            jobs.push((k, None));
            jobs.extend(grid.iter().map(|s| (k, Some(self.seeded(&ident.id, s)))));
        }
        jobs
    }
}

/// One revealed marker, or the error that stopped its pipeline.
#[derive(Clone, Debug)]
pub struct DatasetEntry {
    pub identity: String,
    /// `None` for the unmanipulated baseline.
    pub spec: Option<ManipulationSpec>,
    pub revealed: std::result::Result<RasterImage, String>,
}

/// Revealed markers for every identity: one baseline plus one per grid cell.
pub fn build_dataset(p: &Pipeline<'_>, grid: &[ManipulationSpec]) -> Vec<DatasetEntry> {
    let certs = p.certify_all();
    let jobs = p.jobs(grid);
    par::map(&jobs, p.parallelism, |(k, spec)| {
        let ident = &p.corpus.identities[*k];
        let revealed = certs[*k]
            .as_ref()
            .map_err(|e| e.to_string())
            .and_then(|c| p.reveal(ident, c, spec.as_ref()).map_err(|e| e.to_string()));
        DatasetEntry {
            identity: ident.id.clone(),
            spec: *spec,
            revealed,
        }
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub identity: String,
    pub spec_id: String,
    pub class: ManipulationClass,
    pub features: FeatureVector,
    /// Revealed marker against the reference marker.
    pub quality: QualityReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineRecord {
    pub identity: String,
    /// Stego image against its cover.
    pub certifying: QualityReport,
    /// Unmanipulated revealed marker against the reference marker.
    pub recovery: QualityReport,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Failure {
    pub identity: String,
    pub spec_id: String,
    pub error: String,
}

/// Labeled feature rows for one engine, in (identity, grid) order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EngineData {
    pub samples: Vec<SampleRecord>,
    pub baselines: Vec<BaselineRecord>,
    pub failures: Vec<Failure>,
}

enum Outcome {
    Sample(SampleRecord),
    Baseline(BaselineRecord),
    Failed(Failure),
}

/// Like [`build_dataset`] but keeps only features and quality scores, so the
/// revealed images never all sit in memory at once.
pub fn build_samples(p: &Pipeline<'_>, grid: &[ManipulationSpec], thresholds: &Thresholds) -> EngineData {
    let certs = p.certify_all();
    let jobs = p.jobs(grid);
    let ssim = SsimParams::default();
    let outcomes = par::map(&jobs, p.parallelism, |(k, spec)| {
        let ident = &p.corpus.identities[*k];
        let spec_id = spec.map_or_else(|| "baseline".to_string(), |s| s.id());
        let run = || -> std::result::Result<Outcome, String> {
            let cert = certs[*k].as_ref().map_err(|e| e.to_string())?;
            let sample = || -> Result<Outcome> {
            let revealed = p.reveal(ident, cert, spec.as_ref())?;
            let q = quality(&cert.marker, &revealed, thresholds, &ssim)?;
            Ok(match spec {
                None => Outcome::Baseline(BaselineRecord {
                    identity: ident.id.clone(),
                    certifying: cert.certifying,
                    recovery: q,
                }),
                Some(s) => Outcome::Sample(SampleRecord {
                    identity: ident.id.clone(),
                    spec_id: spec_id.clone(),
                    class: s.class(),
                    features: extract_features(&cert.marker, &revealed)?,
                    quality: q,
                }),
            })
            };
            sample().map_err(|e| e.to_string())
        };
        run().unwrap_or_else(|error| {
            Outcome::Failed(Failure {
                identity: ident.id.clone(),
                spec_id: spec_id.clone(),
                error,
            })
        })
    });
    let mut data = EngineData::default();
    for o in outcomes {
        match o {
            Outcome::Sample(s) => data.samples.push(s),
            Outcome::Baseline(b) => data.baselines.push(b),
            Outcome::Failed(f) => {
                log::warn!("{} {}: {}", f.identity, f.spec_id, f.error);
                data.failures.push(f)
            }
        }
    }
    data
}
