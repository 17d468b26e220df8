//! The spatial quality index map: one integer index per 16x16 block of the
//! padded picture, mapped to a quantization step of 2^(Q/4). Includes the
//! neighbor predictor, lossless delta coding, application to latent grids,
//! and the four generation paths (ROI, external BDM, luminance variance, and
//! per-block R-D optimization).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bdm::{BdmScale, BitDistributionMap};
use crate::codec::{self, CodecConfig, LatentTensor};
use crate::entropy::{decode_symbols, encode_symbols, AdaptiveModel, CodingError, SymbolCoder};
use crate::image::{block_variance_map, PlanarImage, Plane};

/// Signaled index range; the step table covers [-8, 8].
pub const SIGNAL_MIN: i32 = -8;
pub const SIGNAL_MAX: i32 = 8;
/// Accepted in-memory range so ROI offsets can stack with other maps.
pub const INDEX_MIN: i32 = -16;
pub const INDEX_MAX: i32 = 16;

/// Delta alphabet: Q - pred spans [-32, 32].
const DELTA_ALPHABET: usize = 65;
const DELTA_BIAS: i32 = 32;

#[derive(Debug, Error)]
pub enum QmapError {
    #[error("quality index {0} outside accepted range [{INDEX_MIN}, {INDEX_MAX}]")]
    IndexOutOfRange(i32),
    #[error("map grid {0}x{1} does not match expected {2}x{3}")]
    GridMismatch(usize, usize, usize, usize),
    #[error("plane dimensions {0}x{1} are not multiples of 16")]
    NotBlockAligned(usize, usize),
    #[error("bit-distribution map must be at latent-grid scale")]
    NotLatentScale,
    #[error("empty map")]
    Empty,
    #[error(transparent)]
    Coding(#[from] CodingError),
    #[error(transparent)]
    Codec(#[from] codec::CodecError),
}

/// Quantization step for an index: exactly 2^(index/4). Index 0 is the
/// identity; each +4 doubles the step.
#[inline]
pub fn q_step(index: i32) -> f64 {
    (index as f64 / 4.0).exp2()
}

/// Neighbor predictor selection: half the left/top difference by default,
/// with the conventional neighbor average behind a switch. Losslessness does
/// not depend on the choice, since the decoder replays the same predictor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredMode {
    #[default]
    HalfDiff,
    Average,
}

/// Integer quality indices on the latent grid.
#[derive(Debug, Clone, PartialEq)]
pub struct QualityIndexMap {
    width: usize,
    height: usize,
    q: Vec<i32>,
}

#[derive(Serialize, Deserialize)]
struct QmapRepr {
    w: usize,
    h: usize,
    q: Vec<Vec<i32>>,
}

impl QualityIndexMap {
    pub fn new(width: usize, height: usize, fill: i32) -> Result<Self, QmapError> {
        check_index(fill)?;
        if width == 0 || height == 0 {
            return Err(QmapError::Empty);
        }
        Ok(QualityIndexMap {
            width,
            height,
            q: vec![fill; width * height],
        })
    }

    pub fn from_values(width: usize, height: usize, q: Vec<i32>) -> Result<Self, QmapError> {
        if width == 0 || height == 0 || q.len() != width * height {
            return Err(QmapError::Empty);
        }
        for &v in &q {
            check_index(v)?;
        }
        Ok(QualityIndexMap { width, height, q })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> i32 {
        self.q[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, v: i32) -> Result<(), QmapError> {
        check_index(v)?;
        self.q[row * self.width + col] = v;
        Ok(())
    }

    pub fn values(&self) -> &[i32] {
        &self.q
    }

    /// Lossless JSON form `{"w":..,"h":..,"q":[[..]]}`.
    pub fn to_json(&self) -> String {
        let rows = self
            .q
            .chunks(self.width)
            .map(|r| r.to_vec())
            .collect::<Vec<_>>();
        serde_json::to_string(&QmapRepr {
            w: self.width,
            h: self.height,
            q: rows,
        })
        .unwrap()
    }

    pub fn from_json(text: &str) -> Result<Self, QmapError> {
        let repr: QmapRepr = serde_json::from_str(text).map_err(|_| QmapError::Empty)?;
        if repr.q.len() != repr.h || repr.q.iter().any(|r| r.len() != repr.w) {
            return Err(QmapError::GridMismatch(
                repr.w,
                repr.h,
                repr.q.first().map_or(0, |r| r.len()),
                repr.q.len(),
            ));
        }
        Self::from_values(repr.w, repr.h, repr.q.into_iter().flatten().collect())
    }

    /// Human-inspection PGM with gray value Q + 8 (0..16 for signaled maps).
    pub fn to_pgm(&self) -> Vec<u8> {
        let plane = Plane::from_fn(self.width, self.height, |x, y| {
            (self.get(y, x) + 8).clamp(0, 255) as f64
        });
        crate::image::write_pgm(&plane)
    }
}

fn check_index(v: i32) -> Result<(), QmapError> {
    if !(INDEX_MIN..=INDEX_MAX).contains(&v) {
        return Err(QmapError::IndexOutOfRange(v));
    }
    Ok(())
}

/// Predicts the index at (row, col) from the already-coded left and top
/// neighbors; out-of-grid neighbors read as zero. Integer division truncates
/// toward zero, matching the decoder's recomputation exactly.
pub fn predict(map: &QualityIndexMap, row: usize, col: usize, mode: PredMode) -> i32 {
    let left = if col > 0 { map.get(row, col - 1) } else { 0 };
    let top = if row > 0 { map.get(row - 1, col) } else { 0 };
    match mode {
        PredMode::HalfDiff => (left - top) / 2,
        PredMode::Average => (left + top) / 2,
    }
}

/// Entropy-codes the map as prediction deltas in raster order.
pub fn encode_qmap(map: &QualityIndexMap, mode: PredMode) -> Vec<u8> {
    let mut deltas = Vec::with_capacity(map.q.len());
    for row in 0..map.height {
        for col in 0..map.width {
            let d = map.get(row, col) - predict(map, row, col, mode);
            deltas.push(d + DELTA_BIAS);
        }
    }
    let mut model = AdaptiveModel::new(DELTA_ALPHABET);
    encode_symbols(&deltas, SymbolCoder::Adaptive(&mut model), None)
        .expect("delta symbols are in-alphabet by construction")
}

/// Exact inverse of [`encode_qmap`]; the prediction uses only left and top
/// neighbors, so raster order suffices at the decoder.
pub fn decode_qmap(
    stream: &[u8],
    width: usize,
    height: usize,
    mode: PredMode,
) -> Result<QualityIndexMap, QmapError> {
    let mut model = AdaptiveModel::new(DELTA_ALPHABET);
    let deltas = decode_symbols(stream, width * height, SymbolCoder::Adaptive(&mut model))?;
    let mut map = QualityIndexMap {
        width,
        height,
        q: vec![0; width * height],
    };
    let mut k = 0;
    for row in 0..height {
        for col in 0..width {
            let d = deltas[k] - DELTA_BIAS;
            k += 1;
            let v = predict(&map, row, col, mode) + d;
            check_index(v)?;
            map.q[row * width + col] = v;
        }
    }
    Ok(map)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// Multiplies (forward) or divides (inverse) every channel's element (i, j)
/// by the step of Q[i, j]. Index 0 leaves elements untouched; positive
/// indices enlarge them before rounding, spending more bits on that block.
pub fn apply_qmap(
    latent: &LatentTensor,
    map: &QualityIndexMap,
    direction: Direction,
) -> Result<LatentTensor, QmapError> {
    if latent.height != map.height || latent.width != map.width {
        return Err(QmapError::GridMismatch(
            map.width,
            map.height,
            latent.width,
            latent.height,
        ));
    }
    let mut out = latent.clone();
    for i in 0..map.height {
        for j in 0..map.width {
            let step = q_step(map.get(i, j));
            let m = match direction {
                Direction::Forward => step,
                Direction::Inverse => 1.0 / step,
            };
            for c in 0..latent.channels {
                let k = out.idx(c, i, j);
                out.data[k] *= m;
            }
        }
    }
    Ok(out)
}

/// Thresholds a binary mask at image scale onto the block grid: a block maps
/// to `hi` when at least half of its mask pixels are set (ties go to the
/// ROI), otherwise `lo`.
pub fn qmap_from_roi(mask: &Plane, hi: i32, lo: i32) -> Result<QualityIndexMap, QmapError> {
    check_index(hi)?;
    check_index(lo)?;
    if mask.width % 16 != 0 || mask.height % 16 != 0 {
        return Err(QmapError::NotBlockAligned(mask.width, mask.height));
    }
    let gw = mask.width / 16;
    let gh = mask.height / 16;
    let mut q = Vec::with_capacity(gw * gh);
    for by in 0..gh {
        for bx in 0..gw {
            let mut set = 0usize;
            for y in by * 16..(by + 1) * 16 {
                for x in bx * 16..(bx + 1) * 16 {
                    if mask.get(x, y) > 0.0 {
                        set += 1;
                    }
                }
            }
            q.push(if set * 2 >= 256 { hi } else { lo });
        }
    }
    QualityIndexMap::from_values(gw, gh, q)
}

/// Five-level map from a latent-grid bit-distribution map, thresholded
/// against the map mean m: [0, m) -> -1, [m, 1.5m) -> 0, [1.5m, 2.5m) -> 1,
/// [2.5m, 4m) -> 2, [4m, inf) -> 3. An all-zero map yields all zeros.
pub fn qmap_from_bdm(bdm: &BitDistributionMap) -> Result<QualityIndexMap, QmapError> {
    if bdm.scale != BdmScale::LatentGrid {
        return Err(QmapError::NotLatentScale);
    }
    if bdm.values.is_empty() {
        return Err(QmapError::Empty);
    }
    let m = bdm.mean();
    let q = bdm
        .values
        .iter()
        .map(|&v| {
            if m == 0.0 {
                0
            } else if v < m {
                -1
            } else if v < 1.5 * m {
                0
            } else if v < 2.5 * m {
                1
            } else if v < 4.0 * m {
                2
            } else {
                3
            }
        })
        .collect();
    QualityIndexMap::from_values(bdm.grid_w, bdm.grid_h, q)
}

/// Five equal-count luminance-variance levels mapped to indices -4..0:
/// the flattest quintile of 16x16 blocks gets -4, the busiest gets 0.
pub fn qmap_from_variance(plane: &Plane) -> Result<QualityIndexMap, QmapError> {
    if plane.width % 16 != 0 || plane.height % 16 != 0 {
        return Err(QmapError::NotBlockAligned(plane.width, plane.height));
    }
    let vmap = block_variance_map(plane, 16);
    let mut sorted = vmap.data.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    let thresholds: Vec<f64> = (1..5).map(|k| sorted[(k * n).div_ceil(5) - 1]).collect();
    let q = vmap
        .data
        .iter()
        .map(|&v| {
            let level = thresholds.iter().filter(|&&t| v > t).count() as i32;
            -4 + level
        })
        .collect();
    QualityIndexMap::from_values(vmap.width, vmap.height, q)
}

/// Per-block candidate choice minimizing ideal bits + beta * SSE; ties break
/// toward index 0, then toward smaller |index| (negative before positive).
pub fn rd_choose(candidates: &[i32], costs: &[(f64, f64)], beta: f64) -> i32 {
    assert_eq!(candidates.len(), costs.len());
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by_key(|&i| (candidates[i].abs(), candidates[i]));
    let mut best = order[0];
    let mut best_cost = f64::INFINITY;
    for &i in &order {
        let cost = costs[i].0 + beta * costs[i].1;
        if cost < best_cost {
            best_cost = cost;
            best = i;
        }
    }
    candidates[best]
}

/// Rate-distortion optimized map: each block independently takes the
/// candidate index minimizing ideal residual bits plus beta times the block's
/// reconstruction SSE, with every other block held at index 0.
pub fn qmap_rd_optimize(
    image: &PlanarImage,
    config: &CodecConfig,
    beta: f64,
    candidates: &[i32],
) -> Result<QualityIndexMap, QmapError> {
    assert!(!candidates.is_empty());
    for &c in candidates {
        check_index(c)?;
    }
    let tables = codec::block_rd_tables(image, config, candidates)?;
    let (gh, gw) = (tables.grid_h, tables.grid_w);
    let mut q = Vec::with_capacity(gw * gh);
    for cell in 0..gw * gh {
        q.push(rd_choose(candidates, &tables.costs[cell], beta));
    }
    QualityIndexMap::from_values(gw, gh, q)
}
