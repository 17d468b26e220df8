//! Experiment drivers: ROI coding, external-trace quality maps, and
//! quality-map signaling overhead.

use serde::Serialize;

use qmc_core::bdm::{downsample_16, regroup_16, Trace};
use qmc_core::codec::{encode, CodecConfig, EncodeResult};
use qmc_core::gain::{match_rate, GainUnit, RateTarget};
use qmc_core::image::{pad_replicate, rgb_to_yuv420, Colorspace, PlanarImage, Plane};
use qmc_core::qmap::{qmap_from_bdm, qmap_from_roi, QualityIndexMap};

use crate::report::{config_hash, fmt_psnr, ser_psnr, EncodeReport};
use crate::CliError;

/// PSNR-Y restricted to pixels where the mask is set (or unset).
fn masked_psnr_y(result: &EncodeResult, mask: &Plane, inside: bool) -> f64 {
    let src = &result.source_yuv.planes[0];
    let rec = &result.recon_yuv.planes[0];
    let mut se = 0.0;
    let mut n = 0.0;
    for y in 0..src.height {
        for x in 0..src.width {
            if (mask.get(x, y) > 0.0) == inside {
                let d = src.get(x, y) - rec.get(x, y);
                se += d * d;
                n += 1.0;
            }
        }
    }
    if n == 0.0 || se == 0.0 {
        return f64::INFINITY;
    }
    10.0 * (255.0 * 255.0 / (se / n)).log10()
}

/// Per-block ROI flags on the latent grid: a block counts as ROI when at
/// least half of its mask pixels are set (same rule as the map generator).
fn block_roi_flags(padded_mask: &Plane) -> Vec<bool> {
    let gw = padded_mask.width / 16;
    let gh = padded_mask.height / 16;
    let mut flags = Vec::with_capacity(gw * gh);
    for by in 0..gh {
        for bx in 0..gw {
            let mut set = 0usize;
            for y in by * 16..(by + 1) * 16 {
                for x in bx * 16..(bx + 1) * 16 {
                    if padded_mask.get(x, y) > 0.0 {
                        set += 1;
                    }
                }
            }
            flags.push(set * 2 >= 256);
        }
    }
    flags
}

/// Luma bits per pixel inside / outside the ROI, from the bits map.
fn region_bpp(result: &EncodeResult, flags: &[bool], inside: bool) -> f64 {
    let map = result.stats.y_bits_map();
    let mut bits = 0.0;
    let mut px = 0.0;
    for (cell, &flag) in flags.iter().enumerate() {
        if flag == inside {
            bits += map.values[cell];
            px += 256.0;
        }
    }
    if px == 0.0 {
        return 0.0;
    }
    bits / px
}

#[derive(Debug, Clone, Serialize)]
pub struct RoiRun {
    pub name: String,
    pub total_bpp: f64,
    pub roi_bpp: f64,
    pub background_bpp: f64,
    #[serde(serialize_with = "ser_psnr")]
    pub roi_psnr_y: f64,
    #[serde(serialize_with = "ser_psnr")]
    pub psnr_y: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RoiReport {
    pub experiment: String,
    pub config_hash: String,
    pub hi: i32,
    pub lo: i32,
    pub uniform: RoiRun,
    pub roi: RoiRun,
}

impl RoiReport {
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{:<10} {:>10} {:>10} {:>10} {:>10} {:>10}\n",
            "run", "total-bpp", "roi-bpp", "bg-bpp", "roi-psnr-y", "psnr-y"
        );
        for run in [&self.uniform, &self.roi] {
            out.push_str(&format!(
                "{:<10} {:>10.4} {:>10.4} {:>10.4} {:>10} {:>10}\n",
                run.name,
                run.total_bpp,
                run.roi_bpp,
                run.background_bpp,
                fmt_psnr(run.roi_psnr_y),
                fmt_psnr(run.psnr_y),
            ));
        }
        out
    }
}

/// Encodes with a uniform zero map and with the ROI map built from the mask,
/// reporting per-region bits and quality for both runs.
pub fn roi_experiment(
    image: &PlanarImage,
    mask: &Plane,
    hi: i32,
    lo: i32,
    config: &CodecConfig,
) -> Result<RoiReport, CliError> {
    if mask.width != image.width || mask.height != image.height {
        return Err(CliError::Input(format!(
            "mask {}x{} does not match image {}x{}",
            mask.width, mask.height, image.width, image.height
        )));
    }
    let yuv = match image.colorspace {
        Colorspace::Rgb => rgb_to_yuv420(image)?,
        _ => image.clone(),
    };
    let padded = pad_replicate(&yuv, 32);
    let padded_mask = mask.pad_replicate_to(padded.width, padded.height);
    let flags = block_roi_flags(&padded_mask);
    let roi_map = qmap_from_roi(&padded_mask, hi, lo)?;
    let zero_map = QualityIndexMap::new(roi_map.width(), roi_map.height(), 0)
        .map_err(|e| CliError::Internal(e.to_string()))?;

    let run = |name: &str, map: QualityIndexMap| -> Result<RoiRun, CliError> {
        let cfg = CodecConfig {
            qmap: Some(map),
            ..config.clone()
        };
        let result = encode(image, &cfg)?;
        Ok(RoiRun {
            name: name.into(),
            total_bpp: result.bpp(),
            roi_bpp: region_bpp(&result, &flags, true),
            background_bpp: region_bpp(&result, &flags, false),
            roi_psnr_y: masked_psnr_y(&result, mask, true),
            psnr_y: result.psnr_yuv()[0],
        })
    };
    Ok(RoiReport {
        experiment: "roi".into(),
        config_hash: config_hash(config),
        hi,
        lo,
        uniform: run("uniform", zero_map)?,
        roi: run("roi", roi_map)?,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct VvcQmapReport {
    pub experiment: String,
    pub config_hash: String,
    pub target_bpp: f64,
    pub baseline: EncodeReport,
    pub with_qmap: EncodeReport,
    pub delta_psnr_y: f64,
    pub delta_bpp_percent: f64,
}

impl VvcQmapReport {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<14} {:>10} {:>10} {:>9} {:>9} {:>9} {:>9} {:>9}\n",
            "name", "target", "bpp", "psnr-y", "psnr-u", "psnr-v", "qmap%", "bdm-var"
        ));
        out.push_str(&self.baseline.text_row());
        out.push_str(&self.with_qmap.text_row());
        out.push_str(&format!(
            "delta: {:+.3} dB PSNR-Y, {:+.2}% bpp\n",
            self.delta_psnr_y, self.delta_bpp_percent
        ));
        out
    }
}

/// Builds a quality map from an external encoder trace (regroup to 16x16,
/// re-tag at latent scale, five-level thresholding) and encodes at the
/// matched rate with and without it.
pub fn vvc_qmap_experiment(
    image: &PlanarImage,
    trace: &Trace,
    target_bpp: f64,
    config: &CodecConfig,
) -> Result<VvcQmapReport, CliError> {
    if trace.width as usize != image.width || trace.height as usize != image.height {
        return Err(CliError::Input(format!(
            "trace picture {}x{} does not match image {}x{}",
            trace.width, trace.height, image.width, image.height
        )));
    }
    let map = qmap_from_bdm(&downsample_16(&regroup_16(trace))?)?;

    let unit = GainUnit::analytic(config.c_y);
    let target = RateTarget::new(target_bpp);
    let run = |name: &str, qmap: Option<QualityIndexMap>| -> Result<EncodeReport, CliError> {
        let cfg = CodecConfig {
            qmap,
            ..config.clone()
        };
        let matched = match_rate(image, &cfg, &unit, &target)?;
        let cfg = CodecConfig {
            beta: matched.beta,
            ..cfg
        };
        let result = encode(image, &cfg)?;
        Ok(EncodeReport::new(name, &cfg, Some(target_bpp), &result))
    };
    let baseline = run("baseline", None)?;
    let with_qmap = run("with-qmap", Some(map))?;
    let delta_psnr_y = with_qmap.psnr_y - baseline.psnr_y;
    let delta_bpp_percent =
        (with_qmap.achieved_bpp - baseline.achieved_bpp) / baseline.achieved_bpp * 100.0;
    Ok(VvcQmapReport {
        experiment: "vvc-qmap".into(),
        config_hash: config_hash(config),
        target_bpp,
        baseline,
        with_qmap,
        delta_psnr_y,
        delta_bpp_percent,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct OverheadReport {
    pub experiment: String,
    pub config_hash: String,
    pub qmap_bits: usize,
    pub total_bits: usize,
    pub fraction: f64,
    pub row: EncodeReport,
}

impl OverheadReport {
    pub fn to_text(&self) -> String {
        format!(
            "qmap bits: {}\ntotal bits: {}\nfraction: {:.5} ({:.3}%)\n{}",
            self.qmap_bits,
            self.total_bits,
            self.fraction,
            self.fraction * 100.0,
            self.row.to_text()
        )
    }
}

/// Encodes with the given map (optionally rate-matched first) and reports the
/// share of bits spent signaling the map.
pub fn overhead_report(
    image: &PlanarImage,
    qmap: QualityIndexMap,
    config: &CodecConfig,
    target_bpp: Option<f64>,
) -> Result<OverheadReport, CliError> {
    let mut cfg = CodecConfig {
        qmap: Some(qmap),
        ..config.clone()
    };
    if let Some(target) = target_bpp {
        let unit = GainUnit::analytic(cfg.c_y);
        let matched = match_rate(image, &cfg, &unit, &RateTarget::new(target))?;
        cfg.beta = matched.beta;
    }
    let result = encode(image, &cfg)?;
    let qmap_bits = result.stats.segments.qmap * 8;
    let total_bits = result.container.len() * 8;
    Ok(OverheadReport {
        experiment: "overhead".into(),
        config_hash: config_hash(&cfg),
        qmap_bits,
        total_bits,
        fraction: qmap_bits as f64 / total_bits as f64,
        row: EncodeReport::new("overhead", &cfg, target_bpp, &result),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use qmc_core::fixtures;

    #[test]
    fn saturated_masks_match_constant_maps() {
        // A mask that covers everything is the same operating point as a
        // constant hi map; an empty mask matches the constant lo map.
        let img = fixtures::natural(64, 64);
        for (fill, index) in [(255.0, 6), (0.0, -6)] {
            let mask = Plane::from_fn(64, 64, |_, _| fill);
            let report = roi_experiment(&img, &mask, 6, -6, &CodecConfig::default()).unwrap();
            let cfg = CodecConfig {
                qmap: Some(QualityIndexMap::new(4, 4, index).unwrap()),
                ..Default::default()
            };
            let direct = encode(&img, &cfg).unwrap();
            assert_eq!(report.roi.total_bpp, direct.bpp());
        }
    }

    #[test]
    fn uniform_trace_yields_zero_map_and_matching_runs() {
        // Every regrouped cell of a uniform trace equals the mean, so the
        // derived map is all zeros and both rate-matched runs sit at the
        // same operating point give or take the tiny map segment.
        let img = fixtures::textured(128, 128);
        let trace = Trace {
            width: 128,
            height: 128,
            blocks: vec![qmc_core::bdm::BlockBitRecord {
                x: 0,
                y: 0,
                w: 128,
                h: 128,
                bits: 6400.0,
            }],
        };
        let report = vvc_qmap_experiment(&img, &trace, 0.75, &CodecConfig::default()).unwrap();
        assert!(
            report.delta_psnr_y.abs() < 0.05,
            "delta psnr {}",
            report.delta_psnr_y
        );
        assert!(
            report.delta_bpp_percent.abs() < 1.0,
            "delta bpp {}%",
            report.delta_bpp_percent
        );
        // Both runs honor the rate-match contract.
        for row in [&report.baseline, &report.with_qmap] {
            assert!((row.achieved_bpp - 0.75).abs() / 0.75 < 0.10);
        }
    }

    #[test]
    fn concentrated_trace_reshapes_the_map() {
        let img = fixtures::textured(128, 128);
        // All trace bits on the leftmost quarter.
        let trace = Trace {
            width: 128,
            height: 128,
            blocks: vec![
                qmc_core::bdm::BlockBitRecord {
                    x: 0,
                    y: 0,
                    w: 32,
                    h: 128,
                    bits: 6000.0,
                },
                qmc_core::bdm::BlockBitRecord {
                    x: 32,
                    y: 0,
                    w: 96,
                    h: 128,
                    bits: 400.0,
                },
            ],
        };
        let report = vvc_qmap_experiment(&img, &trace, 0.75, &CodecConfig::default()).unwrap();
        assert!((report.with_qmap.achieved_bpp - 0.75).abs() / 0.75 < 0.10);
        assert!(report.with_qmap.qmap_overhead_fraction > 0.0);
    }

    #[test]
    fn random_map_costs_more_to_signal_than_zero_map() {
        let img = fixtures::natural(64, 64);
        let zero = QualityIndexMap::new(4, 4, 0).unwrap();
        let zero_report = overhead_report(&img, zero, &CodecConfig::default(), None).unwrap();
        let mut state = 0x1234_5678u64;
        let scattered: Vec<i32> = (0..16)
            .map(|_| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
                ((state >> 33) % 17) as i32 - 8
            })
            .collect();
        let scattered = QualityIndexMap::from_values(4, 4, scattered).unwrap();
        let scattered_report =
            overhead_report(&img, scattered, &CodecConfig::default(), None).unwrap();
        assert!(scattered_report.qmap_bits > zero_report.qmap_bits);
    }

    #[test]
    fn overhead_of_zero_map_is_small_at_mid_rates() {
        let img = fixtures::textured(128, 128);
        let zero = QualityIndexMap::new(8, 8, 0).unwrap();
        let report = overhead_report(&img, zero, &CodecConfig::with_beta(4.0), None).unwrap();
        assert!(report.row.achieved_bpp > 0.5);
        assert!(report.fraction < 0.01, "fraction {}", report.fraction);
    }
}
