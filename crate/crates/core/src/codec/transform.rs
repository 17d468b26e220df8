//! Block transform: orthonormal 16x16 DCT-II per block, with the lowest
//! zigzag-order coefficients kept as latent channels.

use std::sync::OnceLock;

use super::tensor::LatentTensor;
use crate::image::Plane;

pub const BLOCK: usize = 16;
pub const MAX_CHANNELS: usize = BLOCK * BLOCK;

fn dct_matrix() -> &'static [[f64; BLOCK]; BLOCK] {
    static MATRIX: OnceLock<[[f64; BLOCK]; BLOCK]> = OnceLock::new();
    MATRIX.get_or_init(|| {
        let n = BLOCK as f64;
        let mut t = [[0.0; BLOCK]; BLOCK];
        for (k, row) in t.iter_mut().enumerate() {
            let scale = if k == 0 {
                (1.0 / n).sqrt()
            } else {
                (2.0 / n).sqrt()
            };
            for (m, v) in row.iter_mut().enumerate() {
                *v = scale
                    * (std::f64::consts::PI * (2.0 * m as f64 + 1.0) * k as f64 / (2.0 * n)).cos();
            }
        }
        t
    })
}

/// Diagonal scan of the 16x16 coefficient grid; channel `c` holds the
/// coefficient at `zigzag()[c]`.
pub fn zigzag() -> &'static [(usize, usize); MAX_CHANNELS] {
    static ORDER: OnceLock<[(usize, usize); MAX_CHANNELS]> = OnceLock::new();
    ORDER.get_or_init(|| {
        let mut order = [(0usize, 0usize); MAX_CHANNELS];
        let mut k = 0;
        for d in 0..=2 * (BLOCK - 1) {
            if d % 2 == 0 {
                let mut i = d.min(BLOCK - 1);
                let mut j = d - i;
                loop {
                    order[k] = (i, j);
                    k += 1;
                    if i == 0 || j == BLOCK - 1 {
                        break;
                    }
                    i -= 1;
                    j += 1;
                }
            } else {
                let mut j = d.min(BLOCK - 1);
                let mut i = d - j;
                loop {
                    order[k] = (i, j);
                    k += 1;
                    if j == 0 || i == BLOCK - 1 {
                        break;
                    }
                    j -= 1;
                    i += 1;
                }
            }
        }
        order
    })
}

fn forward_block(x: &[[f64; BLOCK]; BLOCK]) -> [[f64; BLOCK]; BLOCK] {
    let t = dct_matrix();
    // a = x * t^T
    let mut a = [[0.0; BLOCK]; BLOCK];
    for m in 0..BLOCK {
        for v in 0..BLOCK {
            let mut s = 0.0;
            for n in 0..BLOCK {
                s += x[m][n] * t[v][n];
            }
            a[m][v] = s;
        }
    }
    // y = t * a
    let mut y = [[0.0; BLOCK]; BLOCK];
    for u in 0..BLOCK {
        for v in 0..BLOCK {
            let mut s = 0.0;
            for m in 0..BLOCK {
                s += t[u][m] * a[m][v];
            }
            y[u][v] = s;
        }
    }
    y
}

fn inverse_block(y: &[[f64; BLOCK]; BLOCK]) -> [[f64; BLOCK]; BLOCK] {
    let t = dct_matrix();
    // a = t^T * y
    let mut a = [[0.0; BLOCK]; BLOCK];
    for m in 0..BLOCK {
        for v in 0..BLOCK {
            let mut s = 0.0;
            for u in 0..BLOCK {
                s += t[u][m] * y[u][v];
            }
            a[m][v] = s;
        }
    }
    // x = a * t
    let mut x = [[0.0; BLOCK]; BLOCK];
    for m in 0..BLOCK {
        for n in 0..BLOCK {
            let mut s = 0.0;
            for v in 0..BLOCK {
                s += a[m][v] * t[v][n];
            }
            x[m][n] = s;
        }
    }
    x
}

/// Per 16x16 block, the `channels` lowest zigzag-order DCT coefficients
/// become the latent channels at that block's grid cell.
pub fn analysis(plane: &Plane, channels: usize) -> LatentTensor {
    assert!(channels >= 1 && channels <= MAX_CHANNELS);
    assert!(plane.width % BLOCK == 0 && plane.height % BLOCK == 0);
    let gw = plane.width / BLOCK;
    let gh = plane.height / BLOCK;
    let order = zigzag();
    let mut latent = LatentTensor::new(channels, gh, gw);
    let mut x = [[0.0; BLOCK]; BLOCK];
    for bi in 0..gh {
        for bj in 0..gw {
            for (m, row) in x.iter_mut().enumerate() {
                for (n, v) in row.iter_mut().enumerate() {
                    *v = plane.get(bj * BLOCK + n, bi * BLOCK + m);
                }
            }
            let y = forward_block(&x);
            for c in 0..channels {
                let (u, v) = order[c];
                latent.set(c, bi, bj, y[u][v]);
            }
        }
    }
    latent
}

/// Inverse of [`analysis`] with absent coefficients set to zero. The output
/// is raw; clamping to [0, 255] happens at final image assembly.
pub fn synthesis(latent: &LatentTensor) -> Plane {
    let order = zigzag();
    let mut plane = Plane::new(latent.width * BLOCK, latent.height * BLOCK);
    for bi in 0..latent.height {
        for bj in 0..latent.width {
            let mut y = [[0.0; BLOCK]; BLOCK];
            for c in 0..latent.channels {
                let (u, v) = order[c];
                y[u][v] = latent.get(c, bi, bj);
            }
            let x = inverse_block(&y);
            for (m, row) in x.iter().enumerate() {
                for (n, v) in row.iter().enumerate() {
                    plane.set(bj * BLOCK + n, bi * BLOCK + m, *v);
                }
            }
        }
    }
    plane
}

/// Pixel reconstruction of a single block from one grid cell's channels.
pub fn synthesize_block(latent: &LatentTensor, bi: usize, bj: usize) -> [[f64; BLOCK]; BLOCK] {
    let order = zigzag();
    let mut y = [[0.0; BLOCK]; BLOCK];
    for c in 0..latent.channels {
        let (u, v) = order[c];
        y[u][v] = latent.get(c, bi, bj);
    }
    inverse_block(&y)
}
