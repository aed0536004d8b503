//! Fragile image-in-image watermarking.
//!
//! A marker image is hidden inside a cover with a keyed steganography engine.
//! Later, the marker is revealed and compared against the original: any
//! manipulation of the certified image corrupts the marker. The revealed
//! marker is also rich enough to tell which kind of manipulation happened.

pub mod classify;
pub mod error;
pub mod experiment;
pub mod io;
pub mod manipulate;
pub mod metrics;
pub mod morph;
pub mod par;
pub mod raster;
pub mod serde_inf;
pub mod stego;
mod webp;

pub use error::{Error, Result};
pub use raster::RasterImage;
