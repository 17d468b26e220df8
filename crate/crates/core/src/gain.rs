//! Gain units for continuous variable rate: per-channel quantization maps
//! keyed by the trade-off parameter beta, extrapolation/interpolation to
//! unseen betas, and the bit-rate matcher.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{self, CodecConfig, LatentTensor};
use crate::image::PlanarImage;

#[derive(Debug, Error)]
pub enum GainError {
    #[error("beta must be positive, got {0}")]
    NonPositiveBeta(f64),
    #[error("gain vector has {0} channels, tensor has {1}")]
    ChannelMismatch(usize, usize),
    #[error("gain unit betas must be strictly increasing and positive")]
    BadUnit,
    #[error("gain values must be positive")]
    NonPositiveGain,
}

#[derive(Debug, Error)]
pub enum RateError {
    #[error("target {target} bpp outside reachable range: beta {lo_beta} -> {lo_bpp:.4} bpp, beta {hi_beta} -> {hi_bpp:.4} bpp")]
    NotReachable {
        target: f64,
        lo_beta: f64,
        lo_bpp: f64,
        hi_beta: f64,
        hi_bpp: f64,
    },
    #[error("tolerance unmet after {iterations} iterations; best beta {best_beta} gives {best_bpp:.4} bpp for target {target}")]
    IterationLimit {
        target: f64,
        iterations: u32,
        best_beta: f64,
        best_bpp: f64,
    },
    #[error(transparent)]
    Codec(#[from] codec::CodecError),
}

/// Per-channel positive scale factors applied to the latent before rounding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GainVector(Vec<f64>);

impl GainVector {
    pub fn new(values: Vec<f64>) -> Result<Self, GainError> {
        if values.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(GainError::NonPositiveGain);
        }
        Ok(GainVector(values))
    }

    pub fn ones(channels: usize) -> Self {
        GainVector(vec![1.0; channels])
    }

    /// Constant vector, the shape used by the analytic unit.
    pub fn uniform(channels: usize, value: f64) -> Result<Self, GainError> {
        Self::new(vec![value; channels])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    #[inline]
    pub fn get(&self, channel: usize) -> f64 {
        self.0[channel]
    }

    /// The paired inverse vector; derived, so m[c] * m_inv[c] == 1 exactly.
    pub fn inverse(&self) -> GainVector {
        GainVector(self.0.iter().map(|&v| 1.0 / v).collect())
    }
}

/// Ordered list of (beta, gain vector) pairs, strictly increasing in beta.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GainUnitRepr", into = "GainUnitRepr")]
pub struct GainUnit {
    betas: Vec<f64>,
    vectors: Vec<GainVector>,
}

#[derive(Serialize, Deserialize)]
struct GainUnitRepr {
    betas: Vec<f64>,
    vectors: Vec<Vec<f64>>,
}

impl TryFrom<GainUnitRepr> for GainUnit {
    type Error = String;
    fn try_from(r: GainUnitRepr) -> Result<Self, String> {
        let vectors = r
            .vectors
            .into_iter()
            .map(GainVector::new)
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| e.to_string())?;
        GainUnit::new(r.betas, vectors).map_err(|e| e.to_string())
    }
}

impl From<GainUnit> for GainUnitRepr {
    fn from(u: GainUnit) -> Self {
        GainUnitRepr {
            betas: u.betas,
            vectors: u.vectors.into_iter().map(|v| v.0).collect(),
        }
    }
}

impl GainUnit {
    pub fn new(betas: Vec<f64>, vectors: Vec<GainVector>) -> Result<Self, GainError> {
        if betas.is_empty() || betas.len() != vectors.len() {
            return Err(GainError::BadUnit);
        }
        if betas[0] <= 0.0 || betas.windows(2).any(|w| w[0] >= w[1]) {
            return Err(GainError::BadUnit);
        }
        let channels = vectors[0].len();
        if vectors.iter().any(|v| v.len() != channels) {
            return Err(GainError::BadUnit);
        }
        Ok(GainUnit { betas, vectors })
    }

    /// The analytic default: four stored betas {1, 2, 4, 8} and constant
    /// vectors m_t[c] = sqrt(beta_t / beta_ref). No training exists here, and
    /// sqrt-of-beta is the classic rate-scaling heuristic, so this yields a
    /// usable monotone rate curve.
    pub fn analytic(channels: usize) -> Self {
        let betas: Vec<f64> = vec![1.0, 2.0, 4.0, 8.0];
        let beta_ref: f64 = betas[0];
        let vectors = betas
            .iter()
            .map(|&b| GainVector::uniform(channels, (b / beta_ref).sqrt()).unwrap())
            .collect();
        GainUnit { betas, vectors }
    }

    pub fn beta_min(&self) -> f64 {
        self.betas[0]
    }

    pub fn beta_max(&self) -> f64 {
        *self.betas.last().unwrap()
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn channels(&self) -> usize {
        self.vectors[0].len()
    }
}

/// How to derive a gain vector between two stored betas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InterpMode {
    /// Interpolate linearly between the bracketing vectors.
    #[default]
    Linear,
    /// Scale the lower vector by the bracket ratio:
    /// m_l * (beta_v - beta_l) / (beta_h - beta_l). Degenerates toward zero
    /// near beta_l, so it is not the default.
    LiteralRatio,
}

/// Derives the gain vector for an arbitrary positive beta.
///
/// Stored betas return their vector unchanged; betas outside the stored range
/// extrapolate from the nearest endpoint as m_t * (beta_v / beta_t); betas
/// inside the range interpolate between the bracketing pair per `mode`.
pub fn gain_for_beta(
    unit: &GainUnit,
    beta_v: f64,
    mode: InterpMode,
) -> Result<GainVector, GainError> {
    if !(beta_v > 0.0) || !beta_v.is_finite() {
        return Err(GainError::NonPositiveBeta(beta_v));
    }
    if let Some(i) = unit.betas.iter().position(|&b| b == beta_v) {
        return Ok(unit.vectors[i].clone());
    }
    if beta_v < unit.beta_min() || beta_v > unit.beta_max() {
        let i = if beta_v < unit.beta_min() {
            0
        } else {
            unit.betas.len() - 1
        };
        let scale = beta_v / unit.betas[i];
        return GainVector::new(
            unit.vectors[i]
                .values()
                .iter()
                .map(|&m| m * scale)
                .collect(),
        );
    }
    // Nearest bracketing stored pair beta_l < beta_v < beta_h.
    let hi = unit.betas.iter().position(|&b| b > beta_v).unwrap();
    let lo = hi - 1;
    let t = (beta_v - unit.betas[lo]) / (unit.betas[hi] - unit.betas[lo]);
    let values = match mode {
        InterpMode::Linear => unit.vectors[lo]
            .values()
            .iter()
            .zip(unit.vectors[hi].values())
            .map(|(&ml, &mh)| ml + (mh - ml) * t)
            .collect(),
        InterpMode::LiteralRatio => unit.vectors[lo].values().iter().map(|&ml| ml * t).collect(),
    };
    GainVector::new(values)
}

/// Multiplies every element of channel `c` by `g[c]`.
pub fn apply_gain(latent: &LatentTensor, g: &GainVector) -> Result<LatentTensor, GainError> {
    if g.len() != latent.channels {
        return Err(GainError::ChannelMismatch(g.len(), latent.channels));
    }
    let mut out = latent.clone();
    for c in 0..latent.channels {
        let m = g.get(c);
        let base = c * latent.cells();
        for v in &mut out.data[base..base + latent.cells()] {
            *v *= m;
        }
    }
    Ok(out)
}

/// The additional gain unit on the sigma tensor so the entropy model scale
/// tracks the latent through every gain step.
pub fn apply_sigma_gain(sigma: &LatentTensor, g: &GainVector) -> Result<LatentTensor, GainError> {
    apply_gain(sigma, g)
}

/// Target operating point for the bit-rate matcher.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RateTarget {
    pub bpp: f64,
    /// Relative tolerance on achieved bpp; default 10%.
    pub tolerance: f64,
    pub max_iterations: u32,
}

impl RateTarget {
    pub fn new(bpp: f64) -> Self {
        RateTarget {
            bpp,
            tolerance: 0.10,
            max_iterations: 20,
        }
    }
}

/// Successful rate match: the chosen beta (already quantized to the header's
/// fixed-point grid), the achieved bpp measured over the full container, and
/// the container itself.
#[derive(Debug)]
pub struct RateMatch {
    pub beta: f64,
    pub bpp: f64,
    pub container: Vec<u8>,
    pub iterations: u32,
}

/// Deterministic bisection on log beta over `[beta_min / 8, beta_max * 8]`,
/// seeded by encoding at both endpoints. Succeeds only when the achieved bpp
/// lands within the relative tolerance.
pub fn match_rate(
    image: &PlanarImage,
    config: &CodecConfig,
    unit: &GainUnit,
    target: &RateTarget,
) -> Result<RateMatch, RateError> {
    assert!(target.bpp > 0.0 && target.tolerance > 0.0 && target.tolerance < 1.0);
    assert!(target.max_iterations >= 1);

    let rel_err = |bpp: f64| (bpp - target.bpp).abs() / target.bpp;
    let trial = |beta: f64| -> Result<(f64, f64, Vec<u8>), RateError> {
        let beta = codec::quantize_beta(beta);
        let mut cfg = config.clone();
        cfg.beta = beta;
        let result = codec::encode(image, &cfg)?;
        let bpp = result.bpp();
        Ok((beta, bpp, result.container))
    };

    let (mut lo_beta, lo_bpp, lo_stream) = trial(unit.beta_min() / 8.0)?;
    if rel_err(lo_bpp) < target.tolerance {
        return Ok(RateMatch {
            beta: lo_beta,
            bpp: lo_bpp,
            container: lo_stream,
            iterations: 0,
        });
    }
    let (mut hi_beta, hi_bpp, hi_stream) = trial(unit.beta_max() * 8.0)?;
    if rel_err(hi_bpp) < target.tolerance {
        return Ok(RateMatch {
            beta: hi_beta,
            bpp: hi_bpp,
            container: hi_stream,
            iterations: 0,
        });
    }
    if target.bpp < lo_bpp.min(hi_bpp) || target.bpp > lo_bpp.max(hi_bpp) {
        return Err(RateError::NotReachable {
            target: target.bpp,
            lo_beta,
            lo_bpp,
            hi_beta,
            hi_bpp,
        });
    }

    let mut best: Option<(f64, f64)> = None;
    let mut iterations = 0;
    while iterations < target.max_iterations {
        iterations += 1;
        let mid = (0.5 * (lo_beta.ln() + hi_beta.ln())).exp();
        let (beta, bpp, stream) = trial(mid)?;
        if rel_err(bpp) < target.tolerance {
            return Ok(RateMatch {
                beta,
                bpp,
                container: stream,
                iterations,
            });
        }
        if best.map_or(true, |(_, b)| rel_err(bpp) < rel_err(b)) {
            best = Some((beta, bpp));
        }
        // R(beta) is non-decreasing for the surrogate, so narrow toward the
        // side of the target.
        if bpp < target.bpp {
            lo_beta = beta;
        } else {
            hi_beta = beta;
        }
    }
    let (best_beta, best_bpp) = best.unwrap();
    Err(RateError::IterationLimit {
        target: target.bpp,
        iterations,
        best_beta,
        best_bpp,
    })
}
