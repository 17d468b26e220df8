//! Stream coding for the two bitstreams: the hyper-latent banks under
//! adaptive models (bitstream #1) and the gained, quality-mapped residual
//! under per-cell quantized Laplacians (bitstream #2).

use std::sync::OnceLock;

use super::tensor::{HyperLatent, LatentTensor};
use super::CodecError;
use crate::entropy::{
    sigma_grid_index, AdaptiveModel, BitLedger, LaplacianCoder, RangeDecoder, RangeEncoder,
};
use crate::gain::GainVector;
use crate::qmap::{q_step, QualityIndexMap};

/// The Laplacian tables are frozen per sigma-grid slot, so one shared
/// instance serves every encode and decode.
pub(crate) fn laplacian() -> &'static LaplacianCoder {
    static CODER: OnceLock<LaplacianCoder> = OnceLock::new();
    CODER.get_or_init(LaplacianCoder::new)
}

/// Rounds to nearest with ties away from zero and quantizes the hyper banks
/// with unit step, coding both into one stream: all mean-bank symbols in
/// channel-major raster order, then all scale-bank symbols. Returns the
/// stream, the decoder-visible quantized hyper-latent, and the hyper ledger.
pub(crate) fn code_hyper(z: &HyperLatent) -> (Vec<u8>, HyperLatent, BitLedger) {
    let (gh, gw) = z.grid();
    let channels = z.channels();
    let mut ledger = BitLedger::new(channels, gh, gw);
    let mut enc = RangeEncoder::new();
    let mut quantized = HyperLatent {
        mean_bank: LatentTensor::new(channels, gh, gw),
        scale_bank: LatentTensor::new(channels, gh, gw),
    };

    let mut code_bank = |bank: &LatentTensor, out: &mut LatentTensor, ledger: &mut BitLedger| {
        let mut model = AdaptiveModel::new_signed();
        for c in 0..channels {
            for gi in 0..gh {
                for gj in 0..gw {
                    let q = bank.get(c, gi, gj).round();
                    out.set(c, gi, gj, q);
                    let bits = model.encode_signed(&mut enc, q as i32);
                    ledger.add(c, gi, gj, bits);
                }
            }
        }
    };
    code_bank(&z.mean_bank, &mut quantized.mean_bank, &mut ledger);
    code_bank(&z.scale_bank, &mut quantized.scale_bank, &mut ledger);
    (enc.finish(), quantized, ledger)
}

pub(crate) fn decode_hyper(
    stream: &[u8],
    channels: usize,
    gh: usize,
    gw: usize,
) -> Result<(HyperLatent, BitLedger), CodecError> {
    let mut ledger = BitLedger::new(channels, gh, gw);
    let mut dec = RangeDecoder::new(stream)?;
    let mut zhat = HyperLatent {
        mean_bank: LatentTensor::new(channels, gh, gw),
        scale_bank: LatentTensor::new(channels, gh, gw),
    };
    for bank in [&mut zhat.mean_bank, &mut zhat.scale_bank] {
        let mut model = AdaptiveModel::new_signed();
        for c in 0..channels {
            for gi in 0..gh {
                for gj in 0..gw {
                    let (v, bits) = model.decode_signed(&mut dec)?;
                    bank.set(c, gi, gj, v as f64);
                    ledger.add(c, gi, gj, bits);
                }
            }
        }
    }
    Ok((zhat, ledger))
}

#[inline]
fn cell_step(qmap: Option<&QualityIndexMap>, i: usize, j: usize) -> f64 {
    qmap.map_or(1.0, |m| q_step(m.get(i, j)))
}

/// Quantizes the residual in the gained, quality-mapped domain and codes it
/// with per-cell Laplacians whose sigma tracks the same scaling:
/// `s = round(r * g[c] * qs(i,j))` coded at `sigma * qs(i,j)` (the gain is
/// already inside `sigma` via the sigma-gain unit). Rounding is to nearest
/// with ties away from zero. Returns the stream, the coded symbols in
/// channel-major raster order, and the residual ledger.
pub fn code_residual_stream(
    residual: &LatentTensor,
    sigma: &LatentTensor,
    gain: &GainVector,
    qmap: Option<&QualityIndexMap>,
) -> Result<(Vec<u8>, Vec<i32>, BitLedger), CodecError> {
    let (c_n, h, w) = (residual.channels, residual.height, residual.width);
    if sigma.channels != c_n || sigma.height != h || sigma.width != w {
        return Err(CodecError::Internal("sigma tensor shape mismatch".into()));
    }
    if gain.len() != c_n {
        return Err(CodecError::Internal("gain vector length mismatch".into()));
    }
    if let Some(m) = qmap {
        if m.height() != h || m.width() != w {
            return Err(CodecError::QmapGridMismatch {
                map_w: m.width(),
                map_h: m.height(),
                grid_w: w,
                grid_h: h,
            });
        }
    }
    let lap = laplacian();
    let mut enc = RangeEncoder::new();
    let mut ledger = BitLedger::new(c_n, h, w);
    let mut symbols = Vec::with_capacity(c_n * h * w);
    for c in 0..c_n {
        let g = gain.get(c);
        for i in 0..h {
            for j in 0..w {
                let qs = cell_step(qmap, i, j);
                let s = (residual.get(c, i, j) * g * qs).round();
                debug_assert!(s.abs() < i32::MAX as f64);
                let s = s as i32;
                let idx = sigma_grid_index(sigma.get(c, i, j) * qs);
                let bits = lap.encode_value(&mut enc, s, idx);
                ledger.add(c, i, j, bits);
                symbols.push(s);
            }
        }
    }
    Ok((enc.finish(), symbols, ledger))
}

/// Mirror of [`code_residual_stream`]; sigma, gain, and qmap must be the
/// decoder-side reconstructions, which are bit-identical by construction.
pub fn decode_residual_stream(
    stream: &[u8],
    sigma: &LatentTensor,
    gain: &GainVector,
    qmap: Option<&QualityIndexMap>,
) -> Result<(Vec<i32>, BitLedger), CodecError> {
    let (c_n, h, w) = (sigma.channels, sigma.height, sigma.width);
    if gain.len() != c_n {
        return Err(CodecError::Internal("gain vector length mismatch".into()));
    }
    let lap = laplacian();
    let mut dec = RangeDecoder::new(stream)?;
    let mut ledger = BitLedger::new(c_n, h, w);
    let mut symbols = Vec::with_capacity(c_n * h * w);
    for c in 0..c_n {
        for i in 0..h {
            for j in 0..w {
                let qs = cell_step(qmap, i, j);
                let idx = sigma_grid_index(sigma.get(c, i, j) * qs);
                let (v, bits) = lap.decode_value(&mut dec, idx)?;
                ledger.add(c, i, j, bits);
                symbols.push(v);
            }
        }
    }
    Ok((symbols, ledger))
}

/// Rebuilds the latent from coded symbols: `mu + s / (g[c] * qs(i,j))`.
pub(crate) fn reconstruct_latent(
    mu: &LatentTensor,
    symbols: &[i32],
    gain: &GainVector,
    qmap: Option<&QualityIndexMap>,
) -> LatentTensor {
    let (c_n, h, w) = (mu.channels, mu.height, mu.width);
    assert_eq!(symbols.len(), c_n * h * w);
    let mut out = mu.clone();
    let mut k = 0;
    for c in 0..c_n {
        let g = gain.get(c);
        for i in 0..h {
            for j in 0..w {
                let qs = cell_step(qmap, i, j);
                let idx = out.idx(c, i, j);
                out.data[idx] += symbols[k] as f64 / (g * qs);
                k += 1;
            }
        }
    }
    out
}
