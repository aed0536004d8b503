//! Lossy WebP through the system libwebp, resolved at runtime.
//!
//! The shared library is opened with `dlopen` on first use. When it cannot be
//! found every entry point returns [`Error::CodecUnavailable`] and callers are
//! expected to report the affected work as skipped.

use std::ffi::{c_void, CStr};
use std::sync::OnceLock;

use crate::error::{Error, Result};

type EncodeFn = unsafe extern "C" fn(*const u8, i32, i32, i32, f32, *mut *mut u8) -> usize;
type DecodeFn = unsafe extern "C" fn(*const u8, usize, *mut i32, *mut i32) -> *mut u8;
type FreeFn = unsafe extern "C" fn(*mut c_void);

struct LibWebp {
    encode_rgb: EncodeFn,
    decode_rgb: DecodeFn,
    free: FreeFn,
}

const CANDIDATES: &[&CStr] = &[c"libwebp.so.7", c"libwebp.so", c"libwebp.7.dylib", c"libwebp.dylib"];

fn library() -> Option<&'static LibWebp> {
    static LIB: OnceLock<Option<LibWebp>> = OnceLock::new();
    LIB.get_or_init(|| {
        let lib = open();
        if lib.is_none() {
            log::warn!("libwebp not found; WebP manipulations will be skipped");
        }
        lib
    })
    .as_ref()
}

fn open() -> Option<LibWebp> {
    // SAFETY: dlopen/dlsym are called with valid NUL-terminated names; the
    // resolved symbols have the signatures documented in webp/encode.h and
    // webp/decode.h. The handle is intentionally never closed.
    unsafe {
        let handle = CANDIDATES
            .iter()
            .map(|name| libc::dlopen(name.as_ptr(), libc::RTLD_NOW | libc::RTLD_LOCAL))
            .find(|h| !h.is_null())?;
        let sym = |name: &CStr| {
            let p = libc::dlsym(handle, name.as_ptr());
            (!p.is_null()).then_some(p)
        };
        let encode = sym(c"WebPEncodeRGB")?;
        let decode = sym(c"WebPDecodeRGB")?;
        let free = sym(c"WebPFree")?;
        Some(LibWebp {
            encode_rgb: std::mem::transmute::<*mut c_void, EncodeFn>(encode),
            decode_rgb: std::mem::transmute::<*mut c_void, DecodeFn>(decode),
            free: std::mem::transmute::<*mut c_void, FreeFn>(free),
        })
    }
}

pub fn is_available() -> bool {
    library().is_some()
}

fn require() -> Result<&'static LibWebp> {
    library().ok_or_else(|| Error::CodecUnavailable("libwebp shared library not found".into()))
}

/// Encodes interleaved RGB samples as lossy WebP at `quality` (0-100).
pub fn encode_rgb(rgb: &[u8], width: u32, height: u32, quality: u8) -> Result<Vec<u8>> {
    let lib = require()?;
    if rgb.len() != width as usize * height as usize * 3 {
        return Err(Error::Encode("rgb buffer length does not match dimensions".into()));
    }
    let mut out: *mut u8 = std::ptr::null_mut();
    // SAFETY: `rgb` holds width*height*3 bytes with stride width*3; libwebp
    // allocates `out` which we copy and release with WebPFree.
    unsafe {
        let len = (lib.encode_rgb)(
            rgb.as_ptr(),
            width as i32,
            height as i32,
            width as i32 * 3,
            quality as f32,
            &mut out,
        );
        if len == 0 || out.is_null() {
            return Err(Error::Encode("WebPEncodeRGB failed".into()));
        }
        let bytes = std::slice::from_raw_parts(out, len).to_vec();
        (lib.free)(out.cast());
        Ok(bytes)
    }
}

/// Decodes a WebP bitstream into `(width, height, rgb)`.
pub fn decode_rgb(bytes: &[u8]) -> Result<(u32, u32, Vec<u8>)> {
    let lib = require()?;
    let (mut w, mut h) = (0i32, 0i32);
    // SAFETY: libwebp reads `bytes.len()` bytes and returns a buffer of
    // w*h*3 bytes (or null), released with WebPFree after copying.
    unsafe {
        let ptr = (lib.decode_rgb)(bytes.as_ptr(), bytes.len(), &mut w, &mut h);
        if ptr.is_null() || w <= 0 || h <= 0 {
            return Err(Error::Decode("WebPDecodeRGB failed".into()));
        }
        let len = w as usize * h as usize * 3;
        let data = std::slice::from_raw_parts(ptr, len).to_vec();
        (lib.free)(ptr.cast());
        Ok((w as u32, h as u32, data))
    }
}
