//! Corpus manifests and the bundled synthetic corpus.
//!
//! A manifest is a TOML file:
//!
//! ```toml
//! marker = "marker.png"
//!
//! [[entries]]
//! identity = "id000"
//! cover = "id000.png"
//! # optional, defaults to the cover's `.landmarks.txt` sidecar
//! landmarks = "id000.landmarks.txt"
//! ```
//!
//! Relative paths resolve against the manifest's directory.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::synth::{default_marker, generate_face, FACE_SIZE};
use crate::error::{Error, Result};
use crate::io::{load_image, save_image, ImageFormat};
use crate::manipulate::filters::resize_bilinear;
use crate::morph::{sidecar_path, LandmarkSet};
use crate::raster::RasterImage;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub identity: String,
    pub cover: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub landmarks: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub marker: Option<PathBuf>,
    #[serde(default)]
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for e in &self.entries {
            if e.identity.is_empty() {
                return Err(Error::Config("empty identity id in manifest".into()));
            }
            if !seen.insert(e.identity.as_str()) {
                return Err(Error::Config(format!("duplicate identity {:?}", e.identity)));
            }
        }
        Ok(())
    }
}

/// Reads a manifest and makes every path absolute (relative to its directory).
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut m: Manifest = toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    m.validate()?;
    let base = path.parent().unwrap_or(Path::new("."));
    let fix = |p: &mut PathBuf| {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    };
    if let Some(p) = m.marker.as_mut() {
        fix(p);
    }
    for e in &mut m.entries {
        fix(&mut e.cover);
        if let Some(p) = e.landmarks.as_mut() {
            fix(p);
        }
    }
    Ok(m)
}

pub fn write_manifest(m: &Manifest, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = toml::to_string_pretty(m).map_err(|e| Error::Serialization(e.to_string()))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Identity {
    pub id: String,
    pub cover: RasterImage,
    pub landmarks: Option<LandmarkSet>,
}

/// A corpus held in memory, sorted by identity id.
#[derive(Clone, Debug, PartialEq)]
pub struct LoadedCorpus {
    pub identities: Vec<Identity>,
    pub marker: RasterImage,
}

impl LoadedCorpus {
    pub fn synthetic(n: usize, seed: u64) -> Self {
        let identities = (0..n)
            .map(|i| {
                let (cover, lm) = generate_face(identity_seed(seed, i));
                Identity {
                    id: identity_name(i),
                    cover,
                    landmarks: Some(lm),
                }
            })
            .collect();
        Self {
            identities,
            marker: default_marker(FACE_SIZE, FACE_SIZE),
        }
    }

    /// Loads covers, landmark sidecars (if present) and the marker. Without a
    /// marker path the bundled emblem is drawn at the first cover's size.
    pub fn from_manifest(m: &Manifest, marker_override: Option<&Path>) -> Result<Self> {
        m.validate()?;
        let mut identities = Vec::with_capacity(m.entries.len());
        for e in &m.entries {
            let cover = load_image(&e.cover)?.to_rgb();
            let lm_path = e.landmarks.clone().unwrap_or_else(|| sidecar_path(&e.cover));
            let landmarks = if lm_path.exists() {
                let lm = LandmarkSet::load(&lm_path)?;
                lm.validate_bounds(cover.width(), cover.height())?;
                Some(lm)
            } else if e.landmarks.is_some() {
                return Err(Error::io(&lm_path, std::io::ErrorKind::NotFound.into()));
            } else {
                None
            };
            identities.push(Identity {
                id: e.identity.clone(),
                cover,
                landmarks,
            });
        }
        identities.sort_by(|a, b| a.id.cmp(&b.id));
        let first = identities
            .first()
            .ok_or_else(|| Error::Config("manifest lists no entries".into()))?;
        let marker = match marker_override.or(m.marker.as_deref()) {
            Some(p) => load_image(p)?.to_rgb(),
            None => default_marker(first.cover.width(), first.cover.height()),
        };
        Ok(Self { identities, marker })
    }

    pub fn ids(&self) -> Vec<String> {
        self.identities.iter().map(|i| i.id.clone()).collect()
    }

    pub fn get(&self, id: &str) -> Option<&Identity> {
        self.identities
            .binary_search_by(|i| i.id.as_str().cmp(id))
            .ok()
            .map(|k| &self.identities[k])
    }

    /// The marker at the size of `cover`, resampled if the sizes differ.
    pub fn marker_for(&self, cover: &RasterImage) -> Result<RasterImage> {
        if (self.marker.width(), self.marker.height()) == (cover.width(), cover.height()) {
            return self.marker.to_channels(cover.channels());
        }
        resize_bilinear(&self.marker, cover.width(), cover.height())?.to_channels(cover.channels())
    }
}

fn identity_name(i: usize) -> String {
    format!("id{i:03}")
}

fn identity_seed(seed: u64, i: usize) -> u64 {
    seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ i as u64
}

/// Writes `n` synthetic identities (PNG + sidecar), `marker.png` and
/// `manifest.toml` into `out_dir`. Returns the manifest path.
pub fn generate_corpus(n: usize, seed: u64, out_dir: impl AsRef<Path>) -> Result<PathBuf> {
    let out = out_dir.as_ref();
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let corpus = LoadedCorpus::synthetic(n, seed);
    let mut manifest = Manifest {
        marker: Some("marker.png".into()),
        entries: Vec::with_capacity(n),
    };
    for ident in &corpus.identities {
        let file = format!("{}.png", ident.id);
        let path = out.join(&file);
        save_image(&ident.cover, &path, ImageFormat::png())?;
        if let Some(lm) = &ident.landmarks {
            lm.save(sidecar_path(&path))?;
        }
        manifest.entries.push(ManifestEntry {
            identity: ident.id.clone(),
            cover: file.into(),
            landmarks: None,
        });
    }
    save_image(&corpus.marker, out.join("marker.png"), ImageFormat::png())?;
    let mpath = out.join("manifest.toml");
    write_manifest(&manifest, &mpath)?;
    Ok(mpath)
}
