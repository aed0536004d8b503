//! Codec I/O: PNG, baseline JPEG and lossy WebP.

use std::fmt;
use std::io::Cursor;
use std::path::Path;

use image::{DynamicImage, ExtendedColorType, ImageEncoder, ImageFormat as CodecFormat};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::RasterImage;
use crate::webp;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FormatKind {
    Png,
    Jpeg,
    Webp,
}

impl FormatKind {
    pub fn is_lossy(self) -> bool {
        !matches!(self, FormatKind::Png)
    }
}

/// Output codec plus quality factor. Quality is present exactly for lossy kinds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ImageFormat {
    kind: FormatKind,
    quality: Option<u8>,
}

impl ImageFormat {
    pub fn png() -> Self {
        Self {
            kind: FormatKind::Png,
            quality: None,
        }
    }

    pub fn jpeg(quality: u8) -> Result<Self> {
        Self::new(FormatKind::Jpeg, Some(quality))
    }

    pub fn webp(quality: u8) -> Result<Self> {
        Self::new(FormatKind::Webp, Some(quality))
    }

    pub fn new(kind: FormatKind, quality: Option<u8>) -> Result<Self> {
        match (kind.is_lossy(), quality) {
            (false, None) => {}
            (false, Some(_)) => {
                return Err(Error::InvalidParameter(
                    "lossless formats take no quality factor".into(),
                ))
            }
            (true, None) => {
                return Err(Error::InvalidParameter(
                    "lossy formats require a quality factor".into(),
                ))
            }
            (true, Some(q)) if !(1..=100).contains(&q) => {
                return Err(Error::InvalidParameter(format!(
                    "quality factor {q} outside 1..=100"
                )))
            }
            (true, Some(_)) => {}
        }
        Ok(Self { kind, quality })
    }

    pub fn kind(&self) -> FormatKind {
        self.kind
    }

    pub fn quality(&self) -> Option<u8> {
        self.quality
    }

    /// Picks a format from a path extension; lossy kinds get `default_quality`.
    pub fn from_path(path: &Path, default_quality: u8) -> Result<Self> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .unwrap_or_default();
        match ext.as_str() {
            "png" => Ok(Self::png()),
            "jpg" | "jpeg" => Self::jpeg(default_quality),
            "webp" => Self::webp(default_quality),
            other => Err(Error::InvalidParameter(format!(
                "cannot infer image format from extension {other:?}"
            ))),
        }
    }
}

impl fmt::Display for ImageFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.kind, self.quality) {
            (FormatKind::Png, _) => write!(f, "png"),
            (FormatKind::Jpeg, Some(q)) => write!(f, "jpeg q{q}"),
            (FormatKind::Webp, Some(q)) => write!(f, "webp q{q}"),
            (kind, None) => write!(f, "{kind:?}"),
        }
    }
}

/// Whether lossy WebP encoding is available on this machine.
pub fn webp_available() -> bool {
    webp::is_available()
}

pub fn load_image(path: impl AsRef<Path>) -> Result<RasterImage> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

pub fn save_image(img: &RasterImage, path: impl AsRef<Path>, fmt: ImageFormat) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode(img, fmt)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Encodes an image into an in-memory file of the given format.
pub fn encode(img: &RasterImage, fmt: ImageFormat) -> Result<Vec<u8>> {
    let color = match img.channels() {
        1 => ExtendedColorType::L8,
        _ => ExtendedColorType::Rgb8,
    };
    let mut out = Vec::new();
    match fmt.kind {
        FormatKind::Png => {
            image::codecs::png::PngEncoder::new(&mut out)
                .write_image(img.data(), img.width(), img.height(), color)
                .map_err(|e| Error::Encode(e.to_string()))?;
        }
        FormatKind::Jpeg => {
            let q = fmt.quality.unwrap_or(90);
            image::codecs::jpeg::JpegEncoder::new_with_quality(&mut out, q)
                .write_image(img.data(), img.width(), img.height(), color)
                .map_err(|e| Error::Encode(e.to_string()))?;
        }
        FormatKind::Webp => {
            let rgb = img.to_rgb();
            out = webp::encode_rgb(
                rgb.data(),
                img.width(),
                img.height(),
                fmt.quality.unwrap_or(90),
            )?;
        }
    }
    Ok(out)
}

/// Decodes PNG/JPEG/WebP bytes. Alpha is dropped with a warning; 16-bit and
/// float sources are rejected.
pub fn decode(bytes: &[u8]) -> Result<RasterImage> {
    let format = image::guess_format(bytes).map_err(|e| Error::Decode(e.to_string()))?;
    if !matches!(
        format,
        CodecFormat::Png | CodecFormat::Jpeg | CodecFormat::WebP
    ) {
        return Err(Error::Decode(format!("unsupported format {format:?}")));
    }
    if format == CodecFormat::WebP && webp::is_available() {
        let (w, h, rgb) = webp::decode_rgb(bytes)?;
        return RasterImage::new(w, h, 3, rgb);
    }
    let decoded = image::ImageReader::with_format(Cursor::new(bytes), format)
        .decode()
        .map_err(|e| Error::Decode(e.to_string()))?;
    from_dynamic(decoded)
}

fn from_dynamic(img: DynamicImage) -> Result<RasterImage> {
    let (w, h) = (img.width(), img.height());
    match img {
        DynamicImage::ImageLuma8(buf) => RasterImage::new(w, h, 1, buf.into_raw()),
        DynamicImage::ImageRgb8(buf) => RasterImage::new(w, h, 3, buf.into_raw()),
        DynamicImage::ImageLumaA8(buf) => {
            log::warn!("dropping alpha channel from {w}x{h} image");
            let data = buf.into_raw().chunks_exact(2).map(|p| p[0]).collect();
            RasterImage::new(w, h, 1, data)
        }
        DynamicImage::ImageRgba8(buf) => {
            log::warn!("dropping alpha channel from {w}x{h} image");
            let data = buf
                .into_raw()
                .chunks_exact(4)
                .flat_map(|p| [p[0], p[1], p[2]])
                .collect();
            RasterImage::new(w, h, 3, data)
        }
        other => Err(Error::Decode(format!(
            "unsupported sample layout {:?}; only 8-bit gray/RGB(A) is accepted",
            other.color()
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gradient(w: u32, h: u32, c: u8) -> RasterImage {
        RasterImage::from_fn(w, h, c, |x, y, ch| (x * 13 + y * 7 + ch as u32 * 40) as u8).unwrap()
    }

    #[test]
    fn png_round_trip_is_exact() {
        for c in [1, 3] {
            let img = gradient(17, 9, c);
            let back = decode(&encode(&img, ImageFormat::png()).unwrap()).unwrap();
            assert_eq!(back, img);
        }
    }

    #[test]
    fn single_white_pixel() {
        let img = RasterImage::new(1, 1, 3, vec![255, 255, 255]).unwrap();
        let back = decode(&encode(&img, ImageFormat::png()).unwrap()).unwrap();
        assert_eq!(back.data(), &[255, 255, 255]);
        assert_eq!((back.width(), back.height(), back.channels()), (1, 1, 3));
    }

    #[test]
    fn jpeg_q100_flat_gray_stays_close() {
        let img = RasterImage::filled(32, 32, 3, 128).unwrap();
        let back = decode(&encode(&img, ImageFormat::jpeg(100).unwrap()).unwrap()).unwrap();
        assert!(back.is_comparable(&img));
        assert!(back.data().iter().all(|&v| (v as i32 - 128).abs() <= 2));
    }

    #[test]
    fn webp_preserves_dimensions() {
        if !webp::is_available() {
            eprintln!("libwebp unavailable; skipping");
            return;
        }
        let img = gradient(40, 24, 3);
        let back = decode(&encode(&img, ImageFormat::webp(80).unwrap()).unwrap()).unwrap();
        assert_eq!((back.width(), back.height()), (40, 24));
    }

    #[test]
    fn sixteen_bit_png_is_rejected() {
        let buf: image::ImageBuffer<image::Luma<u16>, Vec<u16>> =
            image::ImageBuffer::from_pixel(4, 4, image::Luma([1000u16]));
        let mut bytes = Vec::new();
        DynamicImage::ImageLuma16(buf)
            .write_to(&mut Cursor::new(&mut bytes), CodecFormat::Png)
            .unwrap();
        assert!(matches!(decode(&bytes), Err(Error::Decode(_))));
    }

    #[test]
    fn rgba_alpha_is_stripped() {
        let buf = image::RgbaImage::from_pixel(3, 2, image::Rgba([10, 20, 30, 40]));
        let mut bytes = Vec::new();
        DynamicImage::ImageRgba8(buf)
            .write_to(&mut Cursor::new(&mut bytes), CodecFormat::Png)
            .unwrap();
        let img = decode(&bytes).unwrap();
        assert_eq!(img.channels(), 3);
        assert_eq!(img.pixel(2, 1), &[10, 20, 30]);
    }

    #[test]
    fn quality_validation() {
        assert!(ImageFormat::jpeg(0).is_err());
        assert!(ImageFormat::jpeg(101).is_err());
        assert!(ImageFormat::new(FormatKind::Png, Some(50)).is_err());
        assert!(ImageFormat::new(FormatKind::Webp, None).is_err());
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            load_image("/nonexistent/nowhere.png"),
            Err(Error::Io { .. })
        ));
    }
}
