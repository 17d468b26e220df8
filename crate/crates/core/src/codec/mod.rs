//! The surrogate latent codec: conditional color separation (Y primary, UV
//! jointly coded and conditioned on downsampled luma), block-DCT analysis
//! and synthesis at 1/16 scale, a hyper path at 1/32 scale, decoupled
//! two-bitstream coding, and exact per-cell bit accounting.

mod coding;
mod container;
mod hyper;
mod tensor;
mod transform;

pub use coding::{code_residual_stream, decode_residual_stream};
pub use container::{
    Header, FLAG_INTERP_LITERAL, FLAG_QMAP, FLAG_QPRED_AVG, HEADER_LEN, MAGIC, VERSION,
};
pub use hyper::{hyper_encode, predict_mu_sigma};
pub use tensor::{HyperLatent, LatentTensor};
pub use transform::{analysis, synthesis, synthesize_block, zigzag, BLOCK, MAX_CHANNELS};

use thiserror::Error;

use crate::bdm::{BdmScale, BitDistributionMap};
use crate::entropy::{sigma_grid_index, BitLedger};
use crate::gain::{gain_for_beta, GainUnit, GainVector, InterpMode};
use crate::image::{
    pad_replicate, psnr, rgb_to_yuv420, yuv420_to_rgb, Colorspace, ImageError, PlanarImage, Plane,
};
use crate::qmap::{decode_qmap, encode_qmap, q_step, PredMode, QualityIndexMap};

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("bad container magic")]
    BadMagic,
    #[error("unsupported container version {0}")]
    UnsupportedVersion(u8),
    #[error("container truncated: need {need} bytes, have {have}")]
    Truncated { need: usize, have: usize },
    #[error("invalid header: {0}")]
    InvalidHeader(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("quality map grid {map_w}x{map_h} does not match latent grid {grid_w}x{grid_h}")]
    QmapGridMismatch {
        map_w: usize,
        map_h: usize,
        grid_w: usize,
        grid_h: usize,
    },
    #[error("quality map segment: {0}")]
    QmapSegment(String),
    #[error(transparent)]
    Coding(#[from] crate::entropy::CodingError),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error("internal: {0}")]
    Internal(String),
}

/// Encoder configuration. The luma codec keeps more channels than the
/// jointly-coded chroma pair, preserving the primary/secondary asymmetry.
#[derive(Debug, Clone)]
pub struct CodecConfig {
    pub c_y: usize,
    pub c_uv: usize,
    pub beta: f64,
    pub qmap: Option<QualityIndexMap>,
    pub qpred: PredMode,
    pub interp: InterpMode,
}

impl Default for CodecConfig {
    fn default() -> Self {
        CodecConfig {
            c_y: 16,
            c_uv: 8,
            beta: 1.0,
            qmap: None,
            qpred: PredMode::default(),
            interp: InterpMode::default(),
        }
    }
}

impl CodecConfig {
    pub fn with_beta(beta: f64) -> Self {
        CodecConfig {
            beta,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<(), CodecError> {
        if self.c_uv == 0 || self.c_y <= self.c_uv || self.c_y > MAX_CHANNELS {
            return Err(CodecError::Config(format!(
                "channel counts must satisfy 0 < c_uv < c_y <= {MAX_CHANNELS}, got c_y={} c_uv={}",
                self.c_y, self.c_uv
            )));
        }
        if !self.beta.is_finite() || self.beta <= 0.0 || self.beta >= 65536.0 {
            return Err(CodecError::Config(format!(
                "beta must be in (0, 65536), got {}",
                self.beta
            )));
        }
        Ok(())
    }
}

/// Snaps beta to the header's Q16.16 fixed-point grid; encode applies this
/// before deriving gains so the decoder sees the identical value.
pub fn quantize_beta(beta: f64) -> f64 {
    let q = (beta * 65536.0).round().clamp(1.0, u32::MAX as f64) as u32;
    q as f64 / 65536.0
}

/// Byte sizes of the five container segments.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SegmentSizes {
    pub qmap: usize,
    pub y_hyper: usize,
    pub y_residual: usize,
    pub uv_hyper: usize,
    pub uv_residual: usize,
}

impl SegmentSizes {
    pub fn total(&self) -> usize {
        self.qmap + self.y_hyper + self.y_residual + self.uv_hyper + self.uv_residual
    }
}

/// Ideal-bit ledgers and geometry common to encode and decode; the decoder
/// rebuilds identical ledgers because it replays identical model state.
#[derive(Debug, Clone)]
pub struct CodingStats {
    pub y_residual: BitLedger,
    pub y_hyper: BitLedger,
    pub uv_residual: BitLedger,
    pub uv_hyper: BitLedger,
    pub segments: SegmentSizes,
    pub padded: (usize, usize),
    pub orig: (usize, usize),
}

impl CodingStats {
    /// Luma bits per 16x16 block at latent-grid resolution: residual bits per
    /// cell plus each hyper cell's bits split equally over its four cells.
    pub fn y_bits_map(&self) -> BitDistributionMap {
        bits_per_block(
            &self.y_residual,
            &self.y_hyper,
            self.padded.0,
            self.padded.1,
        )
    }

    pub fn y_total_bits(&self) -> f64 {
        self.y_residual.total() + self.y_hyper.total()
    }
}

#[derive(Debug)]
pub struct EncodeResult {
    pub container: Vec<u8>,
    pub stats: CodingStats,
    /// Original (pre-padding) image in YUV420, the distortion reference.
    pub source_yuv: PlanarImage,
    /// Local reconstruction, cropped; identical to what decode produces.
    pub recon_yuv: PlanarImage,
    pub recon_rgb: PlanarImage,
}

impl EncodeResult {
    /// Container bits over original pixels.
    pub fn bpp(&self) -> f64 {
        self.container.len() as f64 * 8.0 / (self.stats.orig.0 * self.stats.orig.1) as f64
    }

    /// PSNR per YUV plane between source and reconstruction.
    pub fn psnr_yuv(&self) -> [f64; 3] {
        let mut out = [0.0; 3];
        for c in 0..3 {
            out[c] = psnr(&self.source_yuv.planes[c], &self.recon_yuv.planes[c], 255.0)
                .expect("same dims by construction");
        }
        out
    }
}

#[derive(Debug)]
pub struct DecodeResult {
    pub header: Header,
    pub qmap: Option<QualityIndexMap>,
    pub yuv: PlanarImage,
    pub rgb: PlanarImage,
    pub stats: CodingStats,
}

struct ComponentEncode {
    hyper_stream: Vec<u8>,
    residual_stream: Vec<u8>,
    hyper_ledger: BitLedger,
    residual_ledger: BitLedger,
    recon_raw: Vec<Plane>,
}

fn analysis_multi(planes: &[&Plane], channels_per_plane: usize) -> LatentTensor {
    let parts: Vec<LatentTensor> = planes
        .iter()
        .map(|p| analysis(p, channels_per_plane))
        .collect();
    let (h, w) = (parts[0].height, parts[0].width);
    let mut out = LatentTensor::new(channels_per_plane * planes.len(), h, w);
    for (p, part) in parts.iter().enumerate() {
        let base = p * channels_per_plane * part.cells();
        out.data[base..base + part.data.len()].copy_from_slice(&part.data);
    }
    out
}

fn synthesis_multi(
    latent: &LatentTensor,
    n_planes: usize,
    channels_per_plane: usize,
) -> Vec<Plane> {
    (0..n_planes)
        .map(|p| {
            let mut part = LatentTensor::new(channels_per_plane, latent.height, latent.width);
            let base = p * channels_per_plane * latent.cells();
            let len = part.data.len();
            part.data.copy_from_slice(&latent.data[base..base + len]);
            synthesis(&part)
        })
        .collect()
}

fn encode_component(
    planes: &[&Plane],
    channels_per_plane: usize,
    gain: &GainVector,
    qmap: Option<&QualityIndexMap>,
) -> Result<ComponentEncode, CodecError> {
    let latent = analysis_multi(planes, channels_per_plane);
    let z = hyper_encode(&latent);
    let (hyper_stream, zhat, hyper_ledger) = coding::code_hyper(&z);
    let (mu, sigma) = predict_mu_sigma(&zhat, gain, latent.height, latent.width);
    let residual = latent.zip_map(&mu, |a, b| a - b);
    let (residual_stream, symbols, residual_ledger) =
        coding::code_residual_stream(&residual, &sigma, gain, qmap)?;
    let latent_hat = coding::reconstruct_latent(&mu, &symbols, gain, qmap);
    let recon_raw = synthesis_multi(&latent_hat, planes.len(), channels_per_plane);
    Ok(ComponentEncode {
        hyper_stream,
        residual_stream,
        hyper_ledger,
        residual_ledger,
        recon_raw,
    })
}

fn decode_component(
    hyper_stream: &[u8],
    residual_stream: &[u8],
    n_planes: usize,
    channels_per_plane: usize,
    grid_h: usize,
    grid_w: usize,
    gain: &GainVector,
    qmap: Option<&QualityIndexMap>,
) -> Result<(Vec<Plane>, BitLedger, BitLedger), CodecError> {
    let channels = n_planes * channels_per_plane;
    let (zhat, hyper_ledger) = coding::decode_hyper(
        hyper_stream,
        channels,
        grid_h.div_ceil(2),
        grid_w.div_ceil(2),
    )?;
    let (mu, sigma) = predict_mu_sigma(&zhat, gain, grid_h, grid_w);
    let (symbols, residual_ledger) = decode_residual_stream(residual_stream, &sigma, gain, qmap)?;
    let latent_hat = coding::reconstruct_latent(&mu, &symbols, gain, qmap);
    Ok((
        synthesis_multi(&latent_hat, n_planes, channels_per_plane),
        hyper_ledger,
        residual_ledger,
    ))
}

/// Final image assembly: round to integer samples and clamp to [0, 255].
fn finalize_plane(raw: &Plane) -> Plane {
    Plane {
        width: raw.width,
        height: raw.height,
        data: raw
            .data
            .iter()
            .map(|v| v.round().clamp(0.0, 255.0))
            .collect(),
    }
}

/// 2x2 box downsample; dimensions must be even.
fn downsample2(plane: &Plane) -> Plane {
    assert!(plane.width % 2 == 0 && plane.height % 2 == 0);
    Plane::from_fn(plane.width / 2, plane.height / 2, |x, y| {
        (plane.get(2 * x, 2 * y)
            + plane.get(2 * x + 1, 2 * y)
            + plane.get(2 * x, 2 * y + 1)
            + plane.get(2 * x + 1, 2 * y + 1))
            / 4.0
    })
}

/// Per-16x16-block mean, expanded back to plane resolution.
fn block_dc_plane(plane: &Plane) -> Plane {
    assert!(plane.width % BLOCK == 0 && plane.height % BLOCK == 0);
    let gw = plane.width / BLOCK;
    let mut means = vec![0.0; gw * (plane.height / BLOCK)];
    for (gy, chunk) in means.chunks_mut(gw).enumerate() {
        for (gx, m) in chunk.iter_mut().enumerate() {
            let mut sum = 0.0;
            for y in gy * BLOCK..(gy + 1) * BLOCK {
                for x in gx * BLOCK..(gx + 1) * BLOCK {
                    sum += plane.get(x, y);
                }
            }
            *m = sum / (BLOCK * BLOCK) as f64;
        }
    }
    Plane::from_fn(plane.width, plane.height, |x, y| {
        means[(y / BLOCK) * gw + x / BLOCK]
    })
}

fn plane_zip(a: &Plane, b: &Plane, f: impl Fn(f64, f64) -> f64) -> Plane {
    assert!(a.same_dims(b));
    Plane {
        width: a.width,
        height: a.height,
        data: a.data.iter().zip(&b.data).map(|(&x, &y)| f(x, y)).collect(),
    }
}

fn crop_yuv(img: &PlanarImage, width: usize, height: usize) -> PlanarImage {
    PlanarImage {
        colorspace: Colorspace::Yuv420,
        width,
        height,
        planes: vec![
            img.planes[0].crop(width, height),
            img.planes[1].crop(width.div_ceil(2), height.div_ceil(2)),
            img.planes[2].crop(width.div_ceil(2), height.div_ceil(2)),
        ],
    }
}

/// The luma auxiliary plane that conditions the UV codec: the decoded Y
/// plane downsampled 2x, reduced to per-block DC values.
fn uv_aux_plane(y_rec: &Plane) -> Plane {
    block_dc_plane(&downsample2(y_rec))
}

fn derive_gains(config: &CodecConfig, beta: f64) -> Result<(GainVector, GainVector), CodecError> {
    let g_y = gain_for_beta(&GainUnit::analytic(config.c_y), beta, config.interp)
        .map_err(|e| CodecError::Internal(e.to_string()))?;
    let g_uv = gain_for_beta(&GainUnit::analytic(2 * config.c_uv), beta, config.interp)
        .map_err(|e| CodecError::Internal(e.to_string()))?;
    Ok((g_y, g_uv))
}

/// Encodes an RGB or YUV420 image into a container. Deterministic: repeated
/// runs produce byte-identical streams, and the embedded local
/// reconstruction equals what [`decode`] returns.
pub fn encode(image: &PlanarImage, config: &CodecConfig) -> Result<EncodeResult, CodecError> {
    config.validate()?;
    let source_yuv = match image.colorspace {
        Colorspace::Rgb => rgb_to_yuv420(image)?,
        Colorspace::Yuv420 => image.clone(),
        Colorspace::Yuv444 => {
            return Err(CodecError::Config(
                "YUV444 input unsupported; provide RGB or YUV420".into(),
            ))
        }
    };
    let (orig_w, orig_h) = (source_yuv.width, source_yuv.height);
    let padded = pad_replicate(&source_yuv, 32);
    let (pw, ph) = (padded.width, padded.height);
    let (grid_h, grid_w) = (ph / BLOCK, pw / BLOCK);
    if let Some(m) = &config.qmap {
        if m.height() != grid_h || m.width() != grid_w {
            return Err(CodecError::QmapGridMismatch {
                map_w: m.width(),
                map_h: m.height(),
                grid_w,
                grid_h,
            });
        }
    }
    let beta = quantize_beta(config.beta);
    let (g_y, g_uv) = derive_gains(config, beta)?;

    // Primary component.
    let y_comp = encode_component(&[&padded.planes[0]], config.c_y, &g_y, config.qmap.as_ref())?;
    let y_rec = finalize_plane(&y_comp.recon_raw[0]);

    // Secondary component, conditioned on the decoded primary.
    let aux = uv_aux_plane(&y_rec);
    let u_in = plane_zip(&padded.planes[1], &aux, |u, d| u - d);
    let v_in = plane_zip(&padded.planes[2], &aux, |v, d| v - d);
    let uv_comp = encode_component(&[&u_in, &v_in], config.c_uv, &g_uv, None)?;
    let u_rec = finalize_plane(&plane_zip(&uv_comp.recon_raw[0], &aux, |u, d| u + d));
    let v_rec = finalize_plane(&plane_zip(&uv_comp.recon_raw[1], &aux, |v, d| v + d));

    // Container assembly.
    let qmap_bytes = config
        .qmap
        .as_ref()
        .map(|m| encode_qmap(m, config.qpred))
        .unwrap_or_default();
    let mut flags = 0u8;
    if config.qmap.is_some() {
        flags |= FLAG_QMAP;
    }
    if config.qpred == PredMode::Average {
        flags |= FLAG_QPRED_AVG;
    }
    if config.interp == InterpMode::LiteralRatio {
        flags |= FLAG_INTERP_LITERAL;
    }
    let header = Header {
        flags,
        width: pw as u32,
        height: ph as u32,
        orig_width: orig_w as u32,
        orig_height: orig_h as u32,
        c_y: config.c_y as u16,
        c_uv: config.c_uv as u16,
        beta_q16: (beta * 65536.0).round() as u32,
    };
    let mut container = Vec::new();
    header.write(&mut container);
    container::write_segment(&mut container, &qmap_bytes);
    container::write_segment(&mut container, &y_comp.hyper_stream);
    container::write_segment(&mut container, &y_comp.residual_stream);
    container::write_segment(&mut container, &uv_comp.hyper_stream);
    container::write_segment(&mut container, &uv_comp.residual_stream);

    let segments = SegmentSizes {
        qmap: qmap_bytes.len(),
        y_hyper: y_comp.hyper_stream.len(),
        y_residual: y_comp.residual_stream.len(),
        uv_hyper: uv_comp.hyper_stream.len(),
        uv_residual: uv_comp.residual_stream.len(),
    };
    let recon_padded = PlanarImage {
        colorspace: Colorspace::Yuv420,
        width: pw,
        height: ph,
        planes: vec![y_rec, u_rec, v_rec],
    };
    let recon_yuv = crop_yuv(&recon_padded, orig_w, orig_h);
    let recon_rgb = yuv420_to_rgb(&recon_yuv)?;
    Ok(EncodeResult {
        container,
        stats: CodingStats {
            y_residual: y_comp.residual_ledger,
            y_hyper: y_comp.hyper_ledger,
            uv_residual: uv_comp.residual_ledger,
            uv_hyper: uv_comp.hyper_ledger,
            segments,
            padded: (pw, ph),
            orig: (orig_w, orig_h),
        },
        source_yuv,
        recon_yuv,
        recon_rgb,
    })
}

/// Upper bound on decoded pixels; headers beyond this are rejected rather
/// than allocating unboundedly.
const MAX_DECODE_PIXELS: usize = 1 << 26;

/// Decodes a container back to an image, rebuilding the bit ledgers along the
/// way (the decoder replays the encoder's exact model state).
pub fn decode(container: &[u8]) -> Result<DecodeResult, CodecError> {
    let header = Header::parse(container)?;
    let (pw, ph) = (header.width as usize, header.height as usize);
    if pw == 0 || ph == 0 || pw % 32 != 0 || ph % 32 != 0 {
        return Err(CodecError::InvalidHeader(format!(
            "padded dimensions {pw}x{ph} must be positive multiples of 32"
        )));
    }
    if pw.saturating_mul(ph) > MAX_DECODE_PIXELS {
        return Err(CodecError::InvalidHeader(format!(
            "padded dimensions {pw}x{ph} exceed the {MAX_DECODE_PIXELS}-pixel limit"
        )));
    }
    let (orig_w, orig_h) = (header.orig_width as usize, header.orig_height as usize);
    if orig_w == 0 || orig_h == 0 || orig_w > pw || orig_h > ph {
        return Err(CodecError::InvalidHeader(format!(
            "original dimensions {orig_w}x{orig_h} inconsistent with padded {pw}x{ph}"
        )));
    }
    let (c_y, c_uv) = (header.c_y as usize, header.c_uv as usize);
    if c_uv == 0 || c_y <= c_uv || c_y > MAX_CHANNELS {
        return Err(CodecError::InvalidHeader(format!(
            "channel counts c_y={c_y} c_uv={c_uv} out of range"
        )));
    }
    if header.beta_q16 == 0 {
        return Err(CodecError::InvalidHeader("beta is zero".into()));
    }

    let mut pos = HEADER_LEN;
    let qmap_seg = container::read_segment(container, &mut pos)?;
    let y_hyper_seg = container::read_segment(container, &mut pos)?;
    let y_residual_seg = container::read_segment(container, &mut pos)?;
    let uv_hyper_seg = container::read_segment(container, &mut pos)?;
    let uv_residual_seg = container::read_segment(container, &mut pos)?;
    if pos != container.len() {
        return Err(CodecError::InvalidHeader(format!(
            "{} trailing bytes after the last segment",
            container.len() - pos
        )));
    }

    let (grid_h, grid_w) = (ph / BLOCK, pw / BLOCK);
    let qpred = if header.flags & FLAG_QPRED_AVG != 0 {
        PredMode::Average
    } else {
        PredMode::HalfDiff
    };
    let qmap = if header.flags & FLAG_QMAP != 0 {
        Some(
            decode_qmap(qmap_seg, grid_w, grid_h, qpred)
                .map_err(|e| CodecError::QmapSegment(e.to_string()))?,
        )
    } else {
        None
    };
    let interp = if header.flags & FLAG_INTERP_LITERAL != 0 {
        InterpMode::LiteralRatio
    } else {
        InterpMode::Linear
    };

    let config = CodecConfig {
        c_y,
        c_uv,
        beta: header.beta(),
        qmap: None,
        qpred,
        interp,
    };
    let (g_y, g_uv) = derive_gains(&config, header.beta())?;

    let (y_planes, y_hyper, y_residual) = decode_component(
        y_hyper_seg,
        y_residual_seg,
        1,
        c_y,
        grid_h,
        grid_w,
        &g_y,
        qmap.as_ref(),
    )?;
    let y_rec = finalize_plane(&y_planes[0]);

    let aux = uv_aux_plane(&y_rec);
    let (uv_planes, uv_hyper, uv_residual) = decode_component(
        uv_hyper_seg,
        uv_residual_seg,
        2,
        c_uv,
        grid_h / 2,
        grid_w / 2,
        &g_uv,
        None,
    )?;
    let u_rec = finalize_plane(&plane_zip(&uv_planes[0], &aux, |u, d| u + d));
    let v_rec = finalize_plane(&plane_zip(&uv_planes[1], &aux, |v, d| v + d));

    let recon_padded = PlanarImage {
        colorspace: Colorspace::Yuv420,
        width: pw,
        height: ph,
        planes: vec![y_rec, u_rec, v_rec],
    };
    let yuv = crop_yuv(&recon_padded, orig_w, orig_h);
    let rgb = yuv420_to_rgb(&yuv)?;
    Ok(DecodeResult {
        header,
        qmap,
        yuv,
        rgb,
        stats: CodingStats {
            y_residual,
            y_hyper,
            uv_residual,
            uv_hyper,
            segments: SegmentSizes {
                qmap: qmap_seg.len(),
                y_hyper: y_hyper_seg.len(),
                y_residual: y_residual_seg.len(),
                uv_hyper: uv_hyper_seg.len(),
                uv_residual: uv_residual_seg.len(),
            },
            padded: (pw, ph),
            orig: (orig_w, orig_h),
        },
    })
}

/// Folds the luma ledgers into a latent-grid bit-distribution map: per cell,
/// the residual bits of all channels plus an equal quarter of the covering
/// hyper cell's bits. Totals are conserved exactly.
pub fn bits_per_block(
    y_residual: &BitLedger,
    y_hyper: &BitLedger,
    padded_w: usize,
    padded_h: usize,
) -> BitDistributionMap {
    let (_, h, w) = y_residual.dims();
    assert!(h % 2 == 0 && w % 2 == 0, "luma latent grid is even");
    let mut values = vec![0.0; w * h];
    for i in 0..h {
        for j in 0..w {
            values[i * w + j] = y_residual.cell_total(i, j);
        }
    }
    let (_, gh, gw) = y_hyper.dims();
    for gi in 0..gh {
        for gj in 0..gw {
            let share = y_hyper.cell_total(gi, gj) / 4.0;
            for i in 2 * gi..2 * gi + 2 {
                for j in 2 * gj..2 * gj + 2 {
                    values[i * w + j] += share;
                }
            }
        }
    }
    BitDistributionMap::from_grid(
        values,
        w,
        h,
        padded_w as u32,
        padded_h as u32,
        BdmScale::LatentGrid,
    )
}

/// Per-block rate/distortion tables for the map optimizer: for each latent
/// cell and candidate index, the ideal residual bits of that cell's symbols
/// and the SSE of that block's reconstruction (clamped, before integer
/// rounding, so distortion stays strictly responsive to the step) against
/// the padded source luma, with all other blocks held at index 0.
pub struct RdTables {
    pub grid_h: usize,
    pub grid_w: usize,
    /// `costs[row * grid_w + col][candidate] = (bits, sse)`.
    pub costs: Vec<Vec<(f64, f64)>>,
}

pub fn block_rd_tables(
    image: &PlanarImage,
    config: &CodecConfig,
    candidates: &[i32],
) -> Result<RdTables, CodecError> {
    config.validate()?;
    let source_yuv = match image.colorspace {
        Colorspace::Rgb => rgb_to_yuv420(image)?,
        _ => image.clone(),
    };
    let padded = pad_replicate(&source_yuv, 32);
    let (grid_h, grid_w) = (padded.height / BLOCK, padded.width / BLOCK);
    let beta = quantize_beta(config.beta);
    let (g_y, _) = derive_gains(config, beta)?;

    let latent = analysis(&padded.planes[0], config.c_y);
    let z = hyper_encode(&latent);
    let (_, zhat, _) = coding::code_hyper(&z);
    let (mu, sigma) = predict_mu_sigma(&zhat, &g_y, grid_h, grid_w);
    let residual = latent.zip_map(&mu, |a, b| a - b);
    let lap = coding::laplacian();

    let mut costs = vec![Vec::with_capacity(candidates.len()); grid_h * grid_w];
    let mut cell_hat = LatentTensor::new(config.c_y, 1, 1);
    for i in 0..grid_h {
        for j in 0..grid_w {
            for &k in candidates {
                let qs = q_step(k);
                let mut bits = 0.0;
                for c in 0..config.c_y {
                    let g = g_y.get(c);
                    let s = (residual.get(c, i, j) * g * qs).round();
                    let idx = sigma_grid_index(sigma.get(c, i, j) * qs);
                    bits += lap.value_bits(s as i32, idx);
                    cell_hat.set(c, 0, 0, mu.get(c, i, j) + s / (g * qs));
                }
                let block = synthesize_block(&cell_hat, 0, 0);
                let mut sse = 0.0;
                for (m, row) in block.iter().enumerate() {
                    for (n, &v) in row.iter().enumerate() {
                        let rec = v.clamp(0.0, 255.0);
                        let orig = padded.planes[0].get(j * BLOCK + n, i * BLOCK + m);
                        sse += (orig - rec) * (orig - rec);
                    }
                }
                costs[i * grid_w + j].push((bits, sse));
            }
        }
    }
    Ok(RdTables {
        grid_h,
        grid_w,
        costs,
    })
}
