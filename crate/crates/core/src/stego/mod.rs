//! Keyed image-in-image embedding engines.
//!
//! Both engines are stateless and deterministic: `embed` and `reveal` are pure
//! functions of the engine parameters, the key and the input images. Neither
//! engine can carry a full-resolution secret of the cover's size, so each
//! embeds the secret on a reduced payload grid and `reveal` returns it
//! bilinearly upsampled to the input size. A damaged payload cell therefore
//! shows up in the revealed image over roughly one cell in every direction.

mod dct;
mod lsb;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{round_u8, RasterImage};

pub use dct::{DctQim, DEFAULT_DCT_STEP, QIM_BAND};
pub use lsb::LsbSpread;

/// Seed for the engines' pseudorandom sample or block permutation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbedKey(pub u64);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EngineId {
    #[serde(rename = "lsb")]
    LsbSpread,
    #[serde(rename = "dct")]
    DctQim,
}

impl EngineId {
    pub const ALL: [EngineId; 2] = [EngineId::LsbSpread, EngineId::DctQim];

    pub fn as_str(self) -> &'static str {
        match self {
            EngineId::LsbSpread => "lsb",
            EngineId::DctQim => "dct",
        }
    }
}

impl fmt::Display for EngineId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EngineId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lsb" | "lsb_spread" => Ok(EngineId::LsbSpread),
            "dct" | "dct_qim" => Ok(EngineId::DctQim),
            other => Err(Error::InvalidParameter(format!("unknown engine {other:?}"))),
        }
    }
}

pub trait StegoEngine: Send + Sync {
    fn id(&self) -> EngineId;

    /// Hides `secret` inside `cover`. Both must have identical shape.
    fn embed(&self, key: EmbedKey, cover: &RasterImage, secret: &RasterImage) -> Result<RasterImage>;

    /// Extracts the marker from a (possibly manipulated) stego image.
    fn reveal(&self, key: EmbedKey, image: &RasterImage) -> Result<RasterImage>;
}

/// Tunables shared by the built-in engines.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineParams {
    pub dct_step: f64,
}

impl Default for EngineParams {
    fn default() -> Self {
        Self {
            dct_step: DEFAULT_DCT_STEP,
        }
    }
}

pub fn engine(id: EngineId, params: &EngineParams) -> Result<Box<dyn StegoEngine>> {
    Ok(match id {
        EngineId::LsbSpread => Box::new(LsbSpread),
        EngineId::DctQim => Box::new(DctQim::new(params.dct_step)?),
    })
}

/// Name-keyed collection of engines; duplicate registrations are rejected.
#[derive(Default)]
pub struct EngineRegistry {
    engines: BTreeMap<EngineId, Box<dyn StegoEngine>>,
}

impl EngineRegistry {
    pub fn builtin(params: &EngineParams) -> Result<Self> {
        let mut reg = Self::default();
        for id in EngineId::ALL {
            reg.register(engine(id, params)?)?;
        }
        Ok(reg)
    }

    pub fn register(&mut self, engine: Box<dyn StegoEngine>) -> Result<()> {
        let id = engine.id();
        if self.engines.contains_key(&id) {
            return Err(Error::InvalidParameter(format!(
                "engine {id} is already registered"
            )));
        }
        self.engines.insert(id, engine);
        Ok(())
    }

    pub fn get(&self, id: EngineId) -> Result<&dyn StegoEngine> {
        self.engines
            .get(&id)
            .map(|e| e.as_ref())
            .ok_or_else(|| Error::InvalidParameter(format!("engine {id} not registered")))
    }

    pub fn ids(&self) -> impl Iterator<Item = EngineId> + '_ {
        self.engines.keys().copied()
    }
}

/// Pixels averaged into payload cell `g` along one axis.
fn cell_span(g: usize, grid: usize, full: usize) -> (usize, usize) {
    // pixel x belongs to cell floor(x * grid / full)
    let start = (g * full).div_ceil(grid);
    let end = ((g + 1) * full).div_ceil(grid);
    (start, end.min(full))
}

/// Area-averages each payload cell; the cells partition the image.
pub(crate) fn downsample_cells(img: &RasterImage, gw: usize, gh: usize) -> Vec<u8> {
    let (w, h, c) = (
        img.width() as usize,
        img.height() as usize,
        img.channels() as usize,
    );
    let mut out = Vec::with_capacity(gw * gh * c);
    for gy in 0..gh {
        let (y0, y1) = cell_span(gy, gh, h);
        for gx in 0..gw {
            let (x0, x1) = cell_span(gx, gw, w);
            for ch in 0..c {
                let mut sum = 0u32;
                for y in y0..y1 {
                    for x in x0..x1 {
                        sum += img.data()[(y * w + x) * c + ch] as u32;
                    }
                }
                let n = ((y1 - y0) * (x1 - x0)) as u32;
                out.push(((sum + n / 2) / n) as u8);
            }
        }
    }
    out
}

/// Bilinear upsampling of a `gw x gh x c` payload to `w x h`, with cell
/// centres aligned to pixel centres.
pub(crate) fn upsample_cells(
    payload: &[u8],
    gw: usize,
    gh: usize,
    c: usize,
    w: u32,
    h: u32,
) -> Result<RasterImage> {
    let (wu, hu) = (w as usize, h as usize);
    let axis = |n_out: usize, n_in: usize| -> Vec<(usize, usize, f64)> {
        (0..n_out)
            .map(|d| {
                let s = ((d as f64 + 0.5) * n_in as f64 / n_out as f64 - 0.5)
                    .clamp(0.0, (n_in - 1) as f64);
                let i0 = s.floor() as usize;
                (i0, (i0 + 1).min(n_in - 1), s - i0 as f64)
            })
            .collect()
    };
    let xs = axis(wu, gw);
    let ys = axis(hu, gh);
    let mut data = Vec::with_capacity(wu * hu * c);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            for ch in 0..c {
                let p = |x: usize, y: usize| payload[(y * gw + x) * c + ch] as f64;
                let top = p(x0, y0) * (1.0 - fx) + p(x1, y0) * fx;
                let bottom = p(x0, y1) * (1.0 - fx) + p(x1, y1) * fx;
                data.push(round_u8(top * (1.0 - fy) + bottom * fy));
            }
        }
    }
    RasterImage::new(w, h, c as u8, data)
}
