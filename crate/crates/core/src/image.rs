//! Planar images, binary PNM I/O, BT.709 color conversion, replicate
//! padding, PSNR, and per-block statistics.
//!
//! Samples are stored as `f64` but kept integral in `[0, 255]` at module
//! boundaries; conversions round once at the end.

use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

/// BT.709 luma weights (full range).
const KR: f64 = 0.2126;
const KG: f64 = 0.7152;
const KB: f64 = 0.0722;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("plane dimensions {0}x{1} do not match {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("expected {expected:?} image, got {got:?}")]
    WrongColorspace {
        expected: Colorspace,
        got: Colorspace,
    },
    #[error("pnm: {0}")]
    Pnm(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Colorspace {
    Rgb,
    Yuv444,
    Yuv420,
}

/// A single 2-D sample plane, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Plane {
    pub fn new(width: usize, height: usize) -> Self {
        Plane {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Plane {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    pub fn same_dims(&self, other: &Plane) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Crops to the top-left `width` x `height` region.
    pub fn crop(&self, width: usize, height: usize) -> Plane {
        assert!(width <= self.width && height <= self.height);
        Plane::from_fn(width, height, |x, y| self.get(x, y))
    }

    /// Extends to `width` x `height` by replicating the last row/column.
    pub fn pad_replicate_to(&self, width: usize, height: usize) -> Plane {
        assert!(width >= self.width && height >= self.height);
        Plane::from_fn(width, height, |x, y| {
            self.get(x.min(self.width - 1), y.min(self.height - 1))
        })
    }
}

/// An image as a set of planes plus a colorspace tag.
///
/// `width`/`height` are the luma-plane dimensions; for YUV420 the chroma
/// planes are `ceil(w/2)` x `ceil(h/2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarImage {
    pub colorspace: Colorspace,
    pub width: usize,
    pub height: usize,
    pub planes: Vec<Plane>,
}

impl PlanarImage {
    pub fn new_rgb(width: usize, height: usize) -> Self {
        PlanarImage {
            colorspace: Colorspace::Rgb,
            width,
            height,
            planes: vec![
                Plane::new(width, height),
                Plane::new(width, height),
                Plane::new(width, height),
            ],
        }
    }

    fn expect(&self, cs: Colorspace) -> Result<(), ImageError> {
        if self.colorspace != cs {
            return Err(ImageError::WrongColorspace {
                expected: cs,
                got: self.colorspace,
            });
        }
        Ok(())
    }
}

#[inline]
fn clamp_u8(v: f64) -> f64 {
    v.round().clamp(0.0, 255.0)
}

/// Converts full-range RGB to YUV420 per BT.709 with 2x2 box-averaged chroma.
pub fn rgb_to_yuv420(img: &PlanarImage) -> Result<PlanarImage, ImageError> {
    img.expect(Colorspace::Rgb)?;
    let (w, h) = (img.width, img.height);
    let (r, g, b) = (&img.planes[0], &img.planes[1], &img.planes[2]);

    let mut yf = Plane::new(w, h);
    let mut cbf = Plane::new(w, h);
    let mut crf = Plane::new(w, h);
    for yy in 0..h {
        for xx in 0..w {
            let (rv, gv, bv) = (r.get(xx, yy), g.get(xx, yy), b.get(xx, yy));
            let yv = KR * rv + KG * gv + KB * bv;
            yf.set(xx, yy, yv);
            cbf.set(xx, yy, 128.0 + 0.5 * (bv - yv) / (1.0 - KB));
            crf.set(xx, yy, 128.0 + 0.5 * (rv - yv) / (1.0 - KR));
        }
    }

    let cw = w.div_ceil(2);
    let ch = h.div_ceil(2);
    let subsample = |full: &Plane| {
        Plane::from_fn(cw, ch, |cx, cy| {
            let x0 = cx * 2;
            let y0 = cy * 2;
            let mut sum = 0.0;
            let mut n = 0.0;
            for dy in 0..2 {
                for dx in 0..2 {
                    if x0 + dx < w && y0 + dy < h {
                        sum += full.get(x0 + dx, y0 + dy);
                        n += 1.0;
                    }
                }
            }
            clamp_u8(sum / n)
        })
    };

    let y_plane = Plane::from_fn(w, h, |x, y| clamp_u8(yf.get(x, y)));
    Ok(PlanarImage {
        colorspace: Colorspace::Yuv420,
        width: w,
        height: h,
        planes: vec![y_plane, subsample(&cbf), subsample(&crf)],
    })
}

/// Inverse of [`rgb_to_yuv420`]: nearest-neighbor chroma upsampling, inverse
/// BT.709 matrix, clamp to `[0, 255]`.
pub fn yuv420_to_rgb(img: &PlanarImage) -> Result<PlanarImage, ImageError> {
    img.expect(Colorspace::Yuv420)?;
    let (w, h) = (img.width, img.height);
    let (yp, up, vp) = (&img.planes[0], &img.planes[1], &img.planes[2]);

    let mut out = PlanarImage::new_rgb(w, h);
    for yy in 0..h {
        for xx in 0..w {
            let yv = yp.get(xx, yy);
            let cb = up.get(xx / 2, yy / 2) - 128.0;
            let cr = vp.get(xx / 2, yy / 2) - 128.0;
            let rv = yv + 2.0 * (1.0 - KR) * cr;
            let bv = yv + 2.0 * (1.0 - KB) * cb;
            let gv = (yv - KR * rv - KB * bv) / KG;
            out.planes[0].set(xx, yy, clamp_u8(rv));
            out.planes[1].set(xx, yy, clamp_u8(gv));
            out.planes[2].set(xx, yy, clamp_u8(bv));
        }
    }
    Ok(out)
}

/// Pads every plane by edge replication so the luma dimensions become
/// multiples of `multiple`. Chroma planes of YUV420 images are padded to half
/// the padded luma dimensions. Idempotent when the dimensions already comply.
pub fn pad_replicate(img: &PlanarImage, multiple: usize) -> PlanarImage {
    assert!(multiple >= 1);
    let pw = img.width.div_ceil(multiple) * multiple;
    let ph = img.height.div_ceil(multiple) * multiple;
    let planes = img
        .planes
        .iter()
        .enumerate()
        .map(|(i, p)| {
            if img.colorspace == Colorspace::Yuv420 && i > 0 {
                p.pad_replicate_to(pw.div_ceil(2), ph.div_ceil(2))
            } else {
                p.pad_replicate_to(pw, ph)
            }
        })
        .collect();
    PlanarImage {
        colorspace: img.colorspace,
        width: pw,
        height: ph,
        planes,
    }
}

/// Peak signal-to-noise ratio in dB; `f64::INFINITY` when the planes are
/// identical (serialized as the string `"inf"` in reports).
pub fn psnr(reference: &Plane, test: &Plane, peak: f64) -> Result<f64, ImageError> {
    if !reference.same_dims(test) {
        return Err(ImageError::DimensionMismatch(
            reference.width,
            reference.height,
            test.width,
            test.height,
        ));
    }
    let n = reference.data.len() as f64;
    let mse: f64 = reference
        .data
        .iter()
        .zip(&test.data)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

/// Population variance of every non-overlapping `block` x `block` tile.
///
/// The plane must already be padded to a multiple of `block`; the result is a
/// `(h/block)` x `(w/block)` grid stored as a [`Plane`].
pub fn block_variance_map(plane: &Plane, block: usize) -> Plane {
    assert!(block >= 1);
    assert!(
        plane.width % block == 0 && plane.height % block == 0,
        "plane not padded to a multiple of {block}"
    );
    let gw = plane.width / block;
    let gh = plane.height / block;
    Plane::from_fn(gw, gh, |bx, by| {
        let mut sum = 0.0;
        let mut sq = 0.0;
        for y in by * block..(by + 1) * block {
            for x in bx * block..(bx + 1) * block {
                let v = plane.get(x, y);
                sum += v;
                sq += v * v;
            }
        }
        let n = (block * block) as f64;
        let mean = sum / n;
        (sq / n - mean * mean).max(0.0)
    })
}

// --- PNM I/O (binary P5/P6, maxval 255) ---

fn read_pnm_token(data: &[u8], pos: &mut usize) -> Result<Vec<u8>, ImageError> {
    // Skip whitespace and '#' comments.
    loop {
        while *pos < data.len() && data[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < data.len() && data[*pos] == b'#' {
            while *pos < data.len() && data[*pos] != b'\n' {
                *pos += 1;
            }
        } else {
            break;
        }
    }
    let start = *pos;
    while *pos < data.len() && !data[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err(ImageError::Pnm("unexpected end of header".into()));
    }
    Ok(data[start..*pos].to_vec())
}

fn parse_pnm_usize(data: &[u8], pos: &mut usize) -> Result<usize, ImageError> {
    let tok = read_pnm_token(data, pos)?;
    std::str::from_utf8(&tok)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| ImageError::Pnm("bad numeric field".into()))
}

/// Parses a binary PNM image: P6 yields RGB, P5 yields RGB with the gray
/// plane replicated. Only maxval 255 is accepted.
pub fn read_pnm(data: &[u8]) -> Result<PlanarImage, ImageError> {
    let mut pos = 0usize;
    let magic = read_pnm_token(data, &mut pos)?;
    let channels = match magic.as_slice() {
        b"P5" => 1,
        b"P6" => 3,
        _ => return Err(ImageError::Pnm("expected P5 or P6 magic".into())),
    };
    let w = parse_pnm_usize(data, &mut pos)?;
    let h = parse_pnm_usize(data, &mut pos)?;
    let maxval = parse_pnm_usize(data, &mut pos)?;
    if maxval != 255 {
        return Err(ImageError::Pnm(format!("unsupported maxval {maxval}")));
    }
    if w == 0 || h == 0 {
        return Err(ImageError::Pnm("zero dimension".into()));
    }
    // Exactly one whitespace byte separates the header from the raster.
    pos += 1;
    let need = w * h * channels;
    if data.len() < pos + need {
        return Err(ImageError::Pnm("truncated raster".into()));
    }
    let raster = &data[pos..pos + need];

    let mut img = PlanarImage::new_rgb(w, h);
    for y in 0..h {
        for x in 0..w {
            let base = (y * w + x) * channels;
            if channels == 3 {
                for c in 0..3 {
                    img.planes[c].set(x, y, raster[base + c] as f64);
                }
            } else {
                let v = raster[base] as f64;
                for c in 0..3 {
                    img.planes[c].set(x, y, v);
                }
            }
        }
    }
    Ok(img)
}

pub fn read_pnm_file(path: impl AsRef<Path>) -> Result<PlanarImage, ImageError> {
    let mut buf = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut buf)?;
    read_pnm(&buf)
}

/// Reads a P5 file as a single plane (mask / grayscale input).
pub fn read_pgm_plane(data: &[u8]) -> Result<Plane, ImageError> {
    let img = read_pnm(data)?;
    Ok(img.planes[0].clone())
}

/// Serializes an RGB image as binary P6, maxval 255.
pub fn write_ppm(img: &PlanarImage) -> Result<Vec<u8>, ImageError> {
    img.expect(Colorspace::Rgb)?;
    let mut out = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
    for y in 0..img.height {
        for x in 0..img.width {
            for c in 0..3 {
                out.push(img.planes[c].get(x, y).round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    Ok(out)
}

/// Serializes a plane as binary P5, maxval 255, rounding and clamping samples.
pub fn write_pgm(plane: &Plane) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", plane.width, plane.height).into_bytes();
    for v in &plane.data {
        out.push(v.round().clamp(0.0, 255.0) as u8);
    }
    out
}

pub fn write_pnm_file(path: impl AsRef<Path>, bytes: &[u8]) -> Result<(), ImageError> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(bytes)?;
    Ok(())
}
