//! The post-issuance manipulation battery.
//!
//! Every [`ManipulationSpec`] is one cell of the parameter grid: a class, a
//! variant and a parameter value, plus an RNG seed that only the two noise
//! classes consume. [`apply`] never changes width, height or channel count.

pub mod filters;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{self, ImageFormat};
use crate::morph::{self, MorphAux};
use crate::raster::RasterImage;

/// The seven manipulation classes, in label order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ManipulationClass {
    Compression,
    Resize,
    Blur,
    GaussianNoise,
    SaltPepper,
    Sharpening,
    Morph,
}

impl ManipulationClass {
    pub const ALL: [ManipulationClass; 7] = [
        ManipulationClass::Compression,
        ManipulationClass::Resize,
        ManipulationClass::Blur,
        ManipulationClass::GaussianNoise,
        ManipulationClass::SaltPepper,
        ManipulationClass::Sharpening,
        ManipulationClass::Morph,
    ];
    pub const COUNT: usize = 7;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ManipulationClass::Compression => "compression",
            ManipulationClass::Resize => "resize",
            ManipulationClass::Blur => "blur",
            ManipulationClass::GaussianNoise => "gaussian_noise",
            ManipulationClass::SaltPepper => "salt_pepper",
            ManipulationClass::Sharpening => "sharpening",
            ManipulationClass::Morph => "morph",
        }
    }
}

impl fmt::Display for ManipulationClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ManipulationClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown class {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Manipulation {
    Jpeg { quality: u8 },
    Webp { quality: u8 },
    /// Downscale to `percent`% of each side, then back to the original size.
    Resize { percent: f64 },
    GaussianNoise { sigma: f64 },
    SaltPepper { salt: f64, pepper: f64 },
    GaussianBlur { kernel: usize },
    MedianBlur { kernel: usize },
    Sharpen { amount: f64 },
    Morph { alpha: f64 },
}

impl Manipulation {
    pub fn class(&self) -> ManipulationClass {
        match self {
            Manipulation::Jpeg { .. } | Manipulation::Webp { .. } => ManipulationClass::Compression,
            Manipulation::Resize { .. } => ManipulationClass::Resize,
            Manipulation::GaussianNoise { .. } => ManipulationClass::GaussianNoise,
            Manipulation::SaltPepper { .. } => ManipulationClass::SaltPepper,
            Manipulation::GaussianBlur { .. } | Manipulation::MedianBlur { .. } => {
                ManipulationClass::Blur
            }
            Manipulation::Sharpen { .. } => ManipulationClass::Sharpening,
            Manipulation::Morph { .. } => ManipulationClass::Morph,
        }
    }

    pub fn is_stochastic(&self) -> bool {
        matches!(
            self,
            Manipulation::GaussianNoise { .. } | Manipulation::SaltPepper { .. }
        )
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        match *self {
            Manipulation::Jpeg { quality } | Manipulation::Webp { quality } => {
                if !(1..=100).contains(&quality) {
                    return bad(format!("quality factor {quality} outside 1..=100"));
                }
            }
            Manipulation::Resize { percent } => {
                if !(percent > 0.0 && percent <= 100.0) {
                    return bad(format!("resize factor {percent}% outside (0, 100]"));
                }
            }
            Manipulation::GaussianNoise { sigma } => {
                if !(sigma >= 0.0 && sigma.is_finite()) {
                    return bad(format!("noise sigma {sigma} must be >= 0"));
                }
            }
            Manipulation::SaltPepper { salt, pepper } => {
                let ok = (0.0..=1.0).contains(&salt)
                    && (0.0..=1.0).contains(&pepper)
                    && salt + pepper <= 1.0;
                if !ok {
                    return bad(format!("salt/pepper probabilities ({salt}, {pepper}) invalid"));
                }
            }
            Manipulation::GaussianBlur { kernel } | Manipulation::MedianBlur { kernel } => {
                if kernel < 3 || kernel % 2 == 0 {
                    return bad(format!("kernel size {kernel} must be odd and >= 3"));
                }
            }
            Manipulation::Sharpen { amount } => {
                if !(0.0..=1.0).contains(&amount) {
                    return bad(format!("sharpening factor {amount} outside [0, 1]"));
                }
            }
            Manipulation::Morph { alpha } => {
                if !(0.0..=1.0).contains(&alpha) {
                    return bad(format!("blending factor {alpha} outside [0, 1]"));
                }
            }
        }
        Ok(())
    }

    /// Canonical id, e.g. `compression/jpeg/q80` or `noise/gauss/s16`.
    pub fn id(&self) -> String {
        match *self {
            Manipulation::Jpeg { quality } => format!("compression/jpeg/q{quality}"),
            Manipulation::Webp { quality } => format!("compression/webp/q{quality}"),
            Manipulation::Resize { percent } => format!("resize/bilinear/r{percent}"),
            Manipulation::GaussianNoise { sigma } => format!("noise/gauss/s{sigma}"),
            Manipulation::SaltPepper { salt, pepper } => {
                format!("noise/saltpepper/p{salt}-{pepper}")
            }
            Manipulation::GaussianBlur { kernel } => format!("blur/gauss/k{kernel}"),
            Manipulation::MedianBlur { kernel } => format!("blur/median/k{kernel}"),
            Manipulation::Sharpen { amount } => format!("sharpen/unsharp/s{amount}"),
            Manipulation::Morph { alpha } => format!("morph/landmark/a{alpha}"),
        }
    }
}

impl fmt::Display for Manipulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

impl FromStr for Manipulation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let err = || Error::InvalidParameter(format!("unrecognised manipulation id {s:?}"));
        let mut parts = s.split('/');
        let (Some(group), Some(variant), Some(param), None) =
            (parts.next(), parts.next(), parts.next(), parts.next())
        else {
            return Err(err());
        };
        let num = |prefix: char| -> Result<f64> {
            param
                .strip_prefix(prefix)
                .and_then(|v| v.parse::<f64>().ok())
                .ok_or_else(err)
        };
        let int = |prefix: char| -> Result<usize> {
            param
                .strip_prefix(prefix)
                .and_then(|v| v.parse::<usize>().ok())
                .ok_or_else(err)
        };
        let m = match (group, variant) {
            ("compression", "jpeg") => Manipulation::Jpeg {
                quality: u8::try_from(int('q')?).map_err(|_| err())?,
            },
            ("compression", "webp") => Manipulation::Webp {
                quality: u8::try_from(int('q')?).map_err(|_| err())?,
            },
            ("resize", "bilinear") => Manipulation::Resize { percent: num('r')? },
            ("noise", "gauss") => Manipulation::GaussianNoise { sigma: num('s')? },
            ("noise", "saltpepper") => {
                let (a, b) = param
                    .strip_prefix('p')
                    .and_then(|v| v.split_once('-'))
                    .ok_or_else(err)?;
                Manipulation::SaltPepper {
                    salt: a.parse().map_err(|_| err())?,
                    pepper: b.parse().map_err(|_| err())?,
                }
            }
            ("blur", "gauss") => Manipulation::GaussianBlur { kernel: int('k')? },
            ("blur", "median") => Manipulation::MedianBlur { kernel: int('k')? },
            ("sharpen", "unsharp") => Manipulation::Sharpen { amount: num('s')? },
            ("morph", "landmark") => Manipulation::Morph { alpha: num('a')? },
            _ => return Err(err()),
        };
        m.validate()?;
        Ok(m)
    }
}

impl Serialize for Manipulation {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.id())
    }
}

impl<'de> Deserialize<'de> for Manipulation {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One grid cell plus the seed used by stochastic classes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManipulationSpec {
    pub manipulation: Manipulation,
    #[serde(default)]
    pub seed: u64,
}

impl ManipulationSpec {
    pub fn new(manipulation: Manipulation) -> Self {
        Self {
            manipulation,
            seed: 0,
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn class(&self) -> ManipulationClass {
        self.manipulation.class()
    }

    pub fn id(&self) -> String {
        self.manipulation.id()
    }
}

impl From<Manipulation> for ManipulationSpec {
    fn from(m: Manipulation) -> Self {
        Self::new(m)
    }
}

/// The full 49-cell default grid, in table order within each class.
pub fn default_grid() -> Vec<ManipulationSpec> {
    use Manipulation::*;
    let mut grid = Vec::with_capacity(49);
    for q in [100, 99, 90, 80] {
        grid.push(Jpeg { quality: q });
    }
    for q in [100, 99, 90, 80] {
        grid.push(Webp { quality: q });
    }
    for p in [99.9, 97.5, 95.0, 90.0, 85.0, 75.0, 65.0, 50.0] {
        grid.push(Resize { percent: p });
    }
    for s in [2.0, 4.0, 6.0, 8.0, 10.0, 16.0, 25.0, 32.0] {
        grid.push(GaussianNoise { sigma: s });
    }
    for (salt, pepper) in [
        (0.01, 0.3),
        (0.03, 0.1),
        (0.1, 0.03),
        (0.3, 0.01),
        (0.01, 0.01),
        (0.03, 0.03),
        (0.1, 0.1),
        (0.3, 0.3),
    ] {
        grid.push(SaltPepper { salt, pepper });
    }
    for k in [3, 5, 7, 9] {
        grid.push(GaussianBlur { kernel: k });
    }
    for k in [3, 5, 7, 9] {
        grid.push(MedianBlur { kernel: k });
    }
    for s in [0.0, 0.001, 0.01, 0.05, 0.1, 0.5, 0.75, 1.0] {
        grid.push(Sharpen { amount: s });
    }
    grid.push(Morph { alpha: 0.9 });
    grid.into_iter().map(ManipulationSpec::new).collect()
}

/// The most severe cell of each class row.
pub fn severe_grid() -> Vec<ManipulationSpec> {
    use Manipulation::*;
    [
        Jpeg { quality: 80 },
        Webp { quality: 80 },
        Resize { percent: 50.0 },
        GaussianNoise { sigma: 32.0 },
        SaltPepper {
            salt: 0.3,
            pepper: 0.3,
        },
        GaussianBlur { kernel: 9 },
        MedianBlur { kernel: 9 },
        Sharpen { amount: 1.0 },
        Morph { alpha: 0.9 },
    ]
    .into_iter()
    .map(ManipulationSpec::new)
    .collect()
}

/// Applies one manipulation. Morphing needs `aux`; WebP needs libwebp.
pub fn apply(spec: &ManipulationSpec, img: &RasterImage, aux: Option<&MorphAux>) -> Result<RasterImage> {
    spec.manipulation.validate()?;
    match spec.manipulation {
        Manipulation::Jpeg { quality } => codec_round_trip(img, ImageFormat::jpeg(quality)?),
        Manipulation::Webp { quality } => codec_round_trip(img, ImageFormat::webp(quality)?),
        Manipulation::Resize { percent } => {
            let scale = |n: u32| ((n as f64 * percent / 100.0).floor() as u32).max(1);
            let small = filters::resize_bilinear(img, scale(img.width()), scale(img.height()))?;
            filters::resize_bilinear(&small, img.width(), img.height())
        }
        Manipulation::GaussianNoise { sigma } => filters::gaussian_noise(img, sigma, spec.seed),
        Manipulation::SaltPepper { salt, pepper } => {
            filters::salt_pepper(img, salt, pepper, spec.seed)
        }
        Manipulation::GaussianBlur { kernel } => filters::gaussian_blur(img, kernel),
        Manipulation::MedianBlur { kernel } => filters::median_blur(img, kernel),
        Manipulation::Sharpen { amount } => filters::sharpen(img, amount),
        Manipulation::Morph { alpha } => {
            let aux = aux.ok_or(Error::MissingAux)?;
            morph::morph(img, &aux.partner, &aux.landmarks_a, &aux.landmarks_b, alpha)
        }
    }
}

fn codec_round_trip(img: &RasterImage, fmt: ImageFormat) -> Result<RasterImage> {
    let decoded = io::decode(&io::encode(img, fmt)?)?;
    if (decoded.width(), decoded.height()) != (img.width(), img.height()) {
        return Err(Error::Decode(format!(
            "{fmt} round trip changed size to {}x{}",
            decoded.width(),
            decoded.height()
        )));
    }
    decoded.to_channels(img.channels())
}
