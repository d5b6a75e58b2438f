//! Image and flow-field file I/O plus flow color coding.
//!
//! Grayscale images are read from binary PGM (P5) or PNG and normalized to
//! [0, 1]; color PNG is converted with luma weights 0.299 / 0.587 / 0.114.
//! Flow fields use the `.flo` interchange layout: the 4-byte tag "PIEH",
//! 32-bit little-endian width and height, then interleaved (u, v) 32-bit
//! little-endian floats in row-major order.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField2};
use crate::flow::UNKNOWN_FLOW_THRESHOLD;

pub const FLO_MAGIC: [u8; 4] = *b"PIEH";

const MAX_PIXELS: usize = 1 << 28;

/// Reads a grayscale image (PGM or PNG by extension) normalized to [0, 1].
pub fn read_image(path: impl AsRef<Path>) -> Result<ScalarField> {
    let path = path.as_ref();
    match extension(path).as_deref() {
        Some("pgm") => read_pgm(path),
        Some("png") => read_png(path),
        other => Err(Error::UnsupportedFormat(format!(
            "unknown image extension {:?} (supported: pgm, png)",
            other.unwrap_or("<none>")
        ))),
    }
}

/// Writes a field as an 8-bit grayscale image, clamping to [0, 1] and
/// quantizing by rounding to 255 levels.
pub fn write_image(path: impl AsRef<Path>, field: &ScalarField) -> Result<()> {
    let path = path.as_ref();
    match extension(path).as_deref() {
        Some("pgm") => write_pgm(path, field),
        Some("png") => write_png_gray(path, field),
        other => Err(Error::UnsupportedFormat(format!(
            "unknown image extension {:?} (supported: pgm, png)",
            other.unwrap_or("<none>")
        ))),
    }
}

fn extension(path: &Path) -> Option<String> {
    path.extension().map(|e| e.to_string_lossy().to_lowercase())
}

fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

// --- PGM (P5) ---------------------------------------------------------

struct PgmParser<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> PgmParser<'a> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            offset: self.pos,
            message: message.into(),
        }
    }

    /// Skips whitespace and `#` comments between header tokens.
    fn skip_separators(&mut self) {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
    }

    fn read_int(&mut self, what: &str) -> Result<usize> {
        self.skip_separators();
        if self.pos >= self.bytes.len() {
            return Err(self.err(format!("truncated header: missing {what}")));
        }
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(self.err(format!("expected integer for {what}")));
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos]).unwrap();
        text.parse::<usize>()
            .map_err(|_| self.err(format!("{what} out of range")))
    }
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<ScalarField> {
    let bytes = fs::read(path)?;
    let mut p = PgmParser {
        bytes: &bytes,
        pos: 0,
    };
    if bytes.len() < 2 || &bytes[0..2] != b"P5" {
        return Err(Error::UnsupportedFormat(
            "not a binary PGM (P5) file".into(),
        ));
    }
    p.pos = 2;
    let width = p.read_int("width")?;
    let height = p.read_int("height")?;
    let maxval = p.read_int("maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err(Error::UnsupportedFormat(format!(
            "unsupported PGM maxval {maxval} (only 8-bit supported)"
        )));
    }
    if width == 0 || height == 0 {
        return Err(p.err("zero image dimension"));
    }
    let pixels = width
        .checked_mul(height)
        .filter(|&n| n <= MAX_PIXELS)
        .ok_or_else(|| p.err("dimension overflow"))?;
    // single whitespace byte after maxval, then raster data
    if p.pos >= bytes.len() || !bytes[p.pos].is_ascii_whitespace() {
        return Err(p.err("missing whitespace after maxval"));
    }
    p.pos += 1;
    if bytes.len() - p.pos < pixels {
        return Err(Error::Parse {
            offset: bytes.len(),
            message: format!(
                "truncated raster: need {pixels} bytes, found {}",
                bytes.len() - p.pos
            ),
        });
    }
    let scale = 1.0 / maxval as f64;
    let data = bytes[p.pos..p.pos + pixels]
        .iter()
        .map(|&b| b as f64 * scale)
        .collect();
    ScalarField::new(width, height, data)
}

pub fn write_pgm(path: impl AsRef<Path>, field: &ScalarField) -> Result<()> {
    let mut out = Vec::with_capacity(field.len() + 32);
    write!(out, "P5\n{} {}\n255\n", field.width(), field.height())?;
    out.extend(field.data().iter().map(|&v| quantize(v)));
    fs::write(path, out)?;
    Ok(())
}

// --- PNG --------------------------------------------------------------

fn read_png(path: &Path) -> Result<ScalarField> {
    let img = image::open(path)
        .map_err(|e| Error::UnsupportedFormat(format!("png decode failed: {e}")))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    if w == 0 || h == 0 || w * h > MAX_PIXELS {
        return Err(Error::UnsupportedFormat("png dimensions out of range".into()));
    }
    let data: Vec<f64> = match img {
        image::DynamicImage::ImageLuma8(g) => {
            g.into_raw().iter().map(|&b| b as f64 / 255.0).collect()
        }
        other => {
            let rgb = other.to_rgb8();
            rgb.pixels()
                .map(|p| {
                    (0.299 * p.0[0] as f64 + 0.587 * p.0[1] as f64 + 0.114 * p.0[2] as f64) / 255.0
                })
                .collect()
        }
    };
    ScalarField::new(w, h, data)
}

fn write_png_gray(path: &Path, field: &ScalarField) -> Result<()> {
    let buf: Vec<u8> = field.data().iter().map(|&v| quantize(v)).collect();
    let img = image::GrayImage::from_raw(field.width() as u32, field.height() as u32, buf)
        .expect("buffer sized from field");
    img.save(path)
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
}

// --- .flo flow fields --------------------------------------------------

pub fn read_flo(path: impl AsRef<Path>) -> Result<VectorField2> {
    let bytes = fs::read(path)?;
    if bytes.len() < 12 {
        return Err(Error::Parse {
            offset: bytes.len(),
            message: "truncated header: need 12 bytes".into(),
        });
    }
    let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
    if magic != FLO_MAGIC {
        return Err(Error::BadMagic {
            expected: FLO_MAGIC,
            got: magic,
        });
    }
    let width = i32::from_le_bytes(bytes[4..8].try_into().unwrap());
    let height = i32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if width <= 0 || height <= 0 || (width as usize) * (height as usize) > MAX_PIXELS {
        return Err(Error::Parse {
            offset: 4,
            message: format!("bad dimensions {width}x{height}"),
        });
    }
    let (w, h) = (width as usize, height as usize);
    let expected = 12 + w * h * 8;
    if bytes.len() != expected {
        return Err(Error::Parse {
            offset: bytes.len().min(expected),
            message: format!("size mismatch: expected {expected} bytes, got {}", bytes.len()),
        });
    }
    let mut xs = Vec::with_capacity(w * h);
    let mut ys = Vec::with_capacity(w * h);
    for i in 0..w * h {
        let off = 12 + i * 8;
        let u = f32::from_le_bytes(bytes[off..off + 4].try_into().unwrap());
        let v = f32::from_le_bytes(bytes[off + 4..off + 8].try_into().unwrap());
        if !u.is_finite() || !v.is_finite() {
            return Err(Error::Parse {
                offset: off,
                message: "non-finite flow value".into(),
            });
        }
        xs.push(u as f64);
        ys.push(v as f64);
    }
    VectorField2::new(w, h, xs, ys)
}

pub fn write_flo(path: impl AsRef<Path>, flow: &VectorField2) -> Result<()> {
    let mut out = Vec::with_capacity(12 + flow.len() * 8);
    out.extend_from_slice(&FLO_MAGIC);
    out.extend_from_slice(&(flow.width() as i32).to_le_bytes());
    out.extend_from_slice(&(flow.height() as i32).to_le_bytes());
    for i in 0..flow.len() {
        out.extend_from_slice(&(flow.xs()[i] as f32).to_le_bytes());
        out.extend_from_slice(&(flow.ys()[i] as f32).to_le_bytes());
    }
    fs::write(path, out)?;
    Ok(())
}

// --- flow color coding --------------------------------------------------

/// Interleaved 8-bit RGB image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    /// `3 * width * height` bytes, row-major RGB.
    pub data: Vec<u8>,
}

impl RgbImage {
    pub fn at(&self, x: usize, y: usize) -> [u8; 3] {
        let i = 3 * (y * self.width + x);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let img =
            image::RgbImage::from_raw(self.width as u32, self.height as u32, self.data.clone())
                .expect("buffer sized from field");
        img.save(path.as_ref())
            .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
    }
}

/// The 55-entry color wheel: smooth transitions RY-YG-GC-CB-BM-MR.
fn color_wheel() -> Vec<[f64; 3]> {
    const SEGMENTS: [(usize, [f64; 3], [f64; 3]); 6] = [
        (15, [255.0, 0.0, 0.0], [255.0, 255.0, 0.0]),
        (6, [255.0, 255.0, 0.0], [0.0, 255.0, 0.0]),
        (4, [0.0, 255.0, 0.0], [0.0, 255.0, 255.0]),
        (11, [0.0, 255.0, 255.0], [0.0, 0.0, 255.0]),
        (13, [0.0, 0.0, 255.0], [255.0, 0.0, 255.0]),
        (6, [255.0, 0.0, 255.0], [255.0, 0.0, 0.0]),
    ];
    let mut wheel = Vec::with_capacity(55);
    for (count, from, to) in SEGMENTS {
        for i in 0..count {
            let t = i as f64 / count as f64;
            wheel.push([
                from[0] + t * (to[0] - from[0]),
                from[1] + t * (to[1] - from[1]),
                from[2] + t * (to[2] - from[2]),
            ]);
        }
    }
    wheel
}

/// Direction-to-hue, magnitude-to-saturation flow visualization. Zero flow
/// maps to white; magnitudes are normalized by `max_magnitude` or, when
/// absent, the 95th percentile of the field. Unknown values render black.
pub fn flow_to_color(flow: &VectorField2, max_magnitude: Option<f64>) -> RgbImage {
    let wheel = color_wheel();
    let ncols = wheel.len();
    let n = flow.len();

    let max_rad = max_magnitude.unwrap_or_else(|| {
        let mut mags: Vec<f64> = (0..n)
            .filter(|&i| {
                flow.xs()[i].abs() <= UNKNOWN_FLOW_THRESHOLD
                    && flow.ys()[i].abs() <= UNKNOWN_FLOW_THRESHOLD
            })
            .map(|i| (flow.xs()[i].powi(2) + flow.ys()[i].powi(2)).sqrt())
            .collect();
        mags.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if mags.is_empty() {
            0.0
        } else {
            let idx = ((mags.len() as f64 * 0.95).ceil() as usize).clamp(1, mags.len());
            mags[idx - 1]
        }
    });

    let mut data = vec![0u8; 3 * n];
    for i in 0..n {
        let (u, v) = (flow.xs()[i], flow.ys()[i]);
        if u.abs() > UNKNOWN_FLOW_THRESHOLD || v.abs() > UNKNOWN_FLOW_THRESHOLD {
            continue; // unknown stays black
        }
        let rad = (u * u + v * v).sqrt() / max_rad.max(1e-12);
        let angle = (-v).atan2(-u) / std::f64::consts::PI;
        let fk = (angle + 1.0) / 2.0 * (ncols as f64 - 1.0);
        let k0 = (fk.floor() as usize) % ncols;
        let k1 = (k0 + 1) % ncols;
        let f = fk - fk.floor();
        for c in 0..3 {
            let col0 = wheel[k0][c] / 255.0;
            let col1 = wheel[k1][c] / 255.0;
            let mut col = (1.0 - f) * col0 + f * col1;
            if rad <= 1.0 {
                col = 1.0 - rad * (1.0 - col);
            } else {
                col *= 0.75;
            }
            data[3 * i + c] = (255.0 * col).round() as u8;
        }
    }
    RgbImage {
        width: flow.width(),
        height: flow.height(),
        data,
    }
}
