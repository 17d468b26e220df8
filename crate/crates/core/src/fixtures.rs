//! Deterministic synthetic test images. These back the test suites and the
//! CLI/Python demos; every generator is a pure function of its dimensions.

use crate::codec::{synthesis, synthesize_block, LatentTensor};
use crate::image::{PlanarImage, Plane};

/// Small xorshift generator so fixtures stay dependency-free and stable.
#[derive(Debug, Clone)]
pub struct SplitMix(u64);

impl SplitMix {
    pub fn new(seed: u64) -> Self {
        SplitMix(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in [-1, 1).
    pub fn next_signed(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 52) as f64 * 2.0 - 1.0
    }
}

fn rgb_from(w: usize, h: usize, mut f: impl FnMut(usize, usize) -> (f64, f64, f64)) -> PlanarImage {
    let mut img = PlanarImage::new_rgb(w, h);
    for y in 0..h {
        for x in 0..w {
            let (r, g, b) = f(x, y);
            img.planes[0].set(x, y, r.round().clamp(0.0, 255.0));
            img.planes[1].set(x, y, g.round().clamp(0.0, 255.0));
            img.planes[2].set(x, y, b.round().clamp(0.0, 255.0));
        }
    }
    img
}

/// Mostly-flat content: a gentle two-axis gradient.
pub fn flat(w: usize, h: usize) -> PlanarImage {
    rgb_from(w, h, |x, y| {
        let v = 80.0 + 70.0 * x as f64 / w as f64 + 50.0 * y as f64 / h as f64;
        (v, v + 8.0, v - 6.0)
    })
}

/// Natural-texture synthetic: sinusoids at several scales plus mild noise.
pub fn natural(w: usize, h: usize) -> PlanarImage {
    let mut rng = SplitMix::new(0x5EED_0001);
    let mut noise = vec![0.0f64; w * h];
    for v in &mut noise {
        *v = 3.5 * rng.next_signed();
    }
    rgb_from(w, h, |x, y| {
        let (xf, yf) = (x as f64, y as f64);
        let base = 128.0
            + 22.0 * (xf / 17.3).sin() * (yf / 13.1).cos()
            + 11.0 * ((xf + 2.0 * yf) / 5.9).sin()
            + 9.0 * (yf / 29.0).sin()
            + noise[y * w + x];
        (
            base,
            base - 6.0 * (xf / 23.0).sin(),
            base + 5.0 * (yf / 19.0).cos(),
        )
    })
}

/// High-frequency content: dense pseudo-noise at moderate contrast.
pub fn highfreq(w: usize, h: usize) -> PlanarImage {
    let mut rng = SplitMix::new(0x5EED_0002);
    let mut img = PlanarImage::new_rgb(w, h);
    for y in 0..h {
        for x in 0..w {
            let v = (128.0 + 26.0 * rng.next_signed()).round();
            let u = (128.0 + 26.0 * rng.next_signed()).round();
            img.planes[0].set(x, y, v);
            img.planes[1].set(x, y, (0.7 * v + 0.3 * u).round());
            img.planes[2].set(x, y, u);
        }
    }
    img
}

/// Per-block texture drawn in the first 16 coefficients of the block
/// transform, so the default codec can represent it exactly and distortion
/// responds to quantization rather than basis truncation. Blocks whose
/// synthesized pixels would leave the sample range are rescaled (still
/// in-basis) rather than clipped.
fn block_texture(
    w: usize,
    h: usize,
    seed: u64,
    mut block_params: impl FnMut(usize, usize) -> (f64, f64),
) -> Plane {
    let pw = w.div_ceil(16) * 16;
    let ph = h.div_ceil(16) * 16;
    let (gw, gh) = (pw / 16, ph / 16);
    let mut latent = LatentTensor::new(16, gh, gw);
    let mut cell = LatentTensor::new(16, 1, 1);
    for bi in 0..gh {
        for bj in 0..gw {
            let (dc, amp) = block_params(bi, bj);
            let mut rng = SplitMix::new(seed ^ ((bi as u64) << 24) ^ bj as u64);
            cell.set(0, 0, 0, 16.0 * dc);
            for c in 1..16 {
                cell.set(c, 0, 0, amp * rng.next_signed());
            }
            let pixels = synthesize_block(&cell, 0, 0);
            let dev = pixels
                .iter()
                .flatten()
                .fold(0.0f64, |m, &p| m.max((p - dc).abs()));
            // Leave headroom for the +-14 channel offsets applied later.
            let budget = (dc - 11.0).min(240.0 - dc).max(1.0);
            let scale = if dev > budget { budget / dev } else { 1.0 };
            latent.set(0, bi, bj, 16.0 * dc);
            for c in 1..16 {
                latent.set(c, bi, bj, cell.get(c, 0, 0) * scale);
            }
        }
    }
    let full = synthesis(&latent);
    Plane::from_fn(w, h, |x, y| full.get(x, y))
}

/// Five vertical bands of strictly increasing texture energy.
pub fn textured(w: usize, h: usize) -> PlanarImage {
    let gw = w.div_ceil(16);
    let plane = block_texture(w, h, 0x7E87_0001, |bi, bj| {
        let band = (bj * 5 / gw).min(4);
        let amp = [6.0, 22.0, 48.0, 80.0, 115.0][band];
        let dc = 128.0 + 14.0 * ((bi * 5 + bj) as f64 / 7.0).sin();
        (dc, amp)
    });
    rgb_from(w, h, |x, y| {
        let v = plane.get(x, y);
        (v, v - 10.0, v + 14.0)
    })
}

/// Detailed center on a smooth background, plus the matching centered mask
/// (the center half of each dimension, block-aligned for sizes divisible by
/// 64). Center detail stays within the default coefficient basis so the
/// quality map can actually trade quality there.
pub fn roi(w: usize, h: usize) -> (PlanarImage, Plane) {
    let (x0, x1) = (w / 4, 3 * w / 4);
    let (y0, y1) = (h / 4, 3 * h / 4);
    let inside = move |x: usize, y: usize| x >= x0 && x < x1 && y >= y0 && y < y1;
    let texture = block_texture(w, h, 0x7E87_0002, |_, _| (128.0, 110.0));
    let img = rgb_from(w, h, |x, y| {
        let (xf, yf) = (x as f64, y as f64);
        let v = if inside(x, y) {
            texture.get(x, y)
        } else {
            90.0 + 40.0 * xf / w as f64 + 12.0 * (yf / 41.0).sin()
        };
        (v, v - 8.0, v + 8.0)
    });
    let mask = Plane::from_fn(w, h, |x, y| if inside(x, y) { 255.0 } else { 0.0 });
    (img, mask)
}
