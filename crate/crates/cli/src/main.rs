use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use qmc_cli::experiments::{overhead_report, roi_experiment, vvc_qmap_experiment};
use qmc_cli::report::EncodeReport;
use qmc_cli::{read_file, read_text, write_file, CliError};
use qmc_core::bdm::{
    bdm_variance, downsample_16, native_map, normalize_pair, parse_trace, regroup_16,
    BitDistributionMap,
};
use qmc_core::codec::{decode, encode, CodecConfig, FLAG_QMAP};
use qmc_core::gain::{match_rate, GainUnit, InterpMode, RateTarget};
use qmc_core::image::{
    pad_replicate, read_pgm_plane, read_pnm, rgb_to_yuv420, write_pgm, write_ppm, Colorspace,
    PlanarImage,
};
use qmc_core::qmap::{qmap_from_bdm, qmap_from_roi, qmap_from_variance, PredMode, QualityIndexMap};

#[derive(Parser)]
#[command(
    name = "qmc",
    version,
    about = "Spatial bit-allocation codec: encode/decode, quality index maps, rate matching, and bit-distribution analytics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
enum Format {
    #[default]
    Json,
    Text,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum QpredArg {
    /// Half-difference of the left and top neighbors.
    HalfDiff,
    /// Neighbor average.
    Avg,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum InterpArg {
    Linear,
    LiteralRatio,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FixtureKind {
    Flat,
    Natural,
    Highfreq,
    Textured,
    Roi,
}

/// Optional JSON config mirroring the codec configuration; explicit flags
/// take precedence over file values.
#[derive(Default, Deserialize)]
struct ConfigFile {
    c_y: Option<usize>,
    c_uv: Option<usize>,
    beta: Option<f64>,
    qpred: Option<PredMode>,
    interp: Option<InterpMode>,
}

#[derive(Args)]
struct BaseFlags {
    /// Quality index map (JSON form) applied to the luma latent.
    #[arg(long)]
    qmap: Option<String>,
    /// Luma latent channels.
    #[arg(long)]
    cy: Option<usize>,
    /// Chroma latent channels per plane.
    #[arg(long)]
    cuv: Option<usize>,
    /// Quality-map delta predictor.
    #[arg(long, value_enum)]
    qpred: Option<QpredArg>,
    /// Gain interpolation between stored betas.
    #[arg(long, value_enum)]
    interp: Option<InterpArg>,
    /// JSON config file mirroring the codec configuration.
    #[arg(long)]
    config: Option<String>,
}

impl BaseFlags {
    fn build(&self, beta: Option<f64>) -> Result<CodecConfig, CliError> {
        let file: ConfigFile = match &self.config {
            Some(path) => serde_json::from_str(&read_text(path)?)
                .map_err(|e| CliError::Input(format!("{path}: {e}")))?,
            None => ConfigFile::default(),
        };
        let mut cfg = CodecConfig::default();
        if let Some(v) = file.c_y {
            cfg.c_y = v;
        }
        if let Some(v) = file.c_uv {
            cfg.c_uv = v;
        }
        if let Some(v) = file.beta {
            cfg.beta = v;
        }
        if let Some(v) = file.qpred {
            cfg.qpred = v;
        }
        if let Some(v) = file.interp {
            cfg.interp = v;
        }
        if let Some(v) = self.cy {
            cfg.c_y = v;
        }
        if let Some(v) = self.cuv {
            cfg.c_uv = v;
        }
        if let Some(v) = beta {
            cfg.beta = v;
        }
        if let Some(q) = self.qpred {
            cfg.qpred = match q {
                QpredArg::HalfDiff => PredMode::HalfDiff,
                QpredArg::Avg => PredMode::Average,
            };
        }
        if let Some(i) = self.interp {
            cfg.interp = match i {
                InterpArg::Linear => InterpMode::Linear,
                InterpArg::LiteralRatio => InterpMode::LiteralRatio,
            };
        }
        if let Some(path) = &self.qmap {
            cfg.qmap = Some(
                QualityIndexMap::from_json(&read_text(path)?)
                    .map_err(|e| CliError::Input(format!("{path}: {e}")))?,
            );
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Encode a PNM image into a qmc container.
    Encode {
        #[arg(long = "in")]
        input: String,
        #[arg(long)]
        out: String,
        /// Rate-distortion trade-off; larger spends more bits.
        #[arg(long)]
        beta: Option<f64>,
        /// Match this bits-per-pixel target instead of fixing beta.
        #[arg(long)]
        target_bpp: Option<f64>,
        #[command(flatten)]
        flags: BaseFlags,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Decode a qmc container back to a PPM image.
    Decode {
        #[arg(long = "in")]
        input: String,
        #[arg(long)]
        out: String,
    },
    /// Print container header, per-segment bits, and quality-map overhead.
    Inspect {
        #[arg(long = "in")]
        input: String,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Search beta so the container lands on a bits-per-pixel target.
    RateMatch {
        #[arg(long = "in")]
        input: String,
        #[arg(long)]
        target_bpp: f64,
        #[arg(long)]
        out: Option<String>,
        #[command(flatten)]
        flags: BaseFlags,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Write a deterministic synthetic test image (and mask, for `roi`).
    Fixture {
        #[arg(long, value_enum)]
        kind: FixtureKind,
        #[arg(long, default_value_t = 256)]
        width: usize,
        #[arg(long, default_value_t = 256)]
        height: usize,
        #[arg(long)]
        out: String,
        /// Where to write the ROI mask (roi fixture only).
        #[arg(long)]
        mask_out: Option<String>,
    },
    /// Bit-distribution-map analytics.
    #[command(subcommand)]
    Bdm(BdmCommand),
    /// Quality index map generation and conversion.
    #[command(subcommand)]
    Qmap(QmapCommand),
    /// Reproduction experiments.
    #[command(subcommand)]
    Experiment(ExperimentCommand),
}

#[derive(Subcommand)]
enum BdmCommand {
    /// Regroup an encoder trace onto the 16x16 grid and render it.
    FromTrace {
        trace: String,
        #[arg(long)]
        out: String,
        /// Render the native variable-block geometry instead of regrouping.
        #[arg(long)]
        native: bool,
    },
    /// Rebuild the luma bits map from a container by decoding it.
    FromEncode {
        container: String,
        #[arg(long)]
        out: Option<String>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Regroup two traces, normalize them to a shared upper bound, and
    /// report both variances.
    Compare {
        a: String,
        b: String,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
}

#[derive(Subcommand)]
enum QmapCommand {
    /// Five-level map from an encoder trace (regrouped and thresholded
    /// against the mean).
    FromBdm {
        trace: String,
        #[arg(long)]
        out: String,
    },
    /// Two-level map from a binary mask.
    FromRoi {
        #[arg(long)]
        mask: String,
        #[arg(long, default_value_t = 6, allow_hyphen_values = true)]
        hi: i32,
        #[arg(long, default_value_t = -6, allow_hyphen_values = true)]
        lo: i32,
        #[arg(long)]
        out: String,
    },
    /// Five-level map from per-block luminance variance.
    FromVariance {
        #[arg(long)]
        image: String,
        #[arg(long)]
        out: String,
    },
    /// Render a JSON map as a PGM (gray value = index + 8).
    ToPgm {
        map: String,
        #[arg(long)]
        out: String,
    },
}

#[derive(Subcommand)]
enum ExperimentCommand {
    /// ROI coding: uniform map vs a two-level ROI map.
    Roi {
        #[arg(long)]
        image: String,
        #[arg(long)]
        mask: String,
        #[arg(long, default_value_t = 6, allow_hyphen_values = true)]
        hi: i32,
        #[arg(long, default_value_t = -6, allow_hyphen_values = true)]
        lo: i32,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Rate-matched encode with and without a trace-derived quality map.
    VvcQmap {
        #[arg(long)]
        image: String,
        #[arg(long)]
        trace: String,
        #[arg(long)]
        target_bpp: f64,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Quality-map signaling overhead at an operating point.
    Overhead {
        #[arg(long)]
        image: String,
        #[arg(long)]
        qmap: String,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        target_bpp: Option<f64>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
}

fn load_image(path: &str) -> Result<PlanarImage, CliError> {
    let bytes = read_file(path)?;
    Ok(read_pnm(&bytes)?)
}

fn emit<T: Serialize>(value: &T, text: String, format: Format) {
    match format {
        Format::Json => println!("{}", serde_json::to_string_pretty(value).unwrap()),
        Format::Text => print!("{text}"),
    }
}

fn luma_plane(image: &PlanarImage) -> Result<qmc_core::image::Plane, CliError> {
    let yuv = match image.colorspace {
        Colorspace::Rgb => rgb_to_yuv420(image)?,
        _ => image.clone(),
    };
    Ok(pad_replicate(&yuv, 32).planes[0].clone())
}

fn self_normalized_variance(map: &BitDistributionMap) -> f64 {
    let upper = map.max();
    if upper == 0.0 {
        return 0.0;
    }
    let normalized = BitDistributionMap {
        values: map.values.iter().map(|v| v / upper).collect(),
        geometry: map.geometry.clone(),
        ..*map
    };
    bdm_variance(&normalized)
}

fn run() -> Result<(), CliError> {
    match Cli::parse().command {
        Command::Encode {
            input,
            out,
            beta,
            target_bpp,
            flags,
            format,
        } => {
            if beta.is_some() && target_bpp.is_some() {
                return Err(CliError::Usage(
                    "--beta and --target-bpp are mutually exclusive".into(),
                ));
            }
            let image = load_image(&input)?;
            let mut cfg = flags.build(beta)?;
            if let Some(bpp) = target_bpp {
                let unit = GainUnit::analytic(cfg.c_y);
                let matched = match_rate(&image, &cfg, &unit, &RateTarget::new(bpp))?;
                cfg.beta = matched.beta;
            }
            let result = encode(&image, &cfg)?;
            write_file(&out, &result.container)?;
            let report = EncodeReport::new(&input, &cfg, target_bpp, &result);
            emit(&report, report.to_text(), format);
        }
        Command::Decode { input, out } => {
            let container = read_file(&input)?;
            let result = decode(&container)?;
            write_file(&out, &write_ppm(&result.rgb)?)?;
        }
        Command::Inspect { input, format } => {
            let container = read_file(&input)?;
            let result = decode(&container)?;
            let h = result.header;
            let s = result.stats.segments;
            let total_bits = container.len() * 8;
            #[derive(Serialize)]
            struct SegmentBits {
                qmap: usize,
                y_hyper: usize,
                y_residual: usize,
                uv_hyper: usize,
                uv_residual: usize,
                header: usize,
            }
            #[derive(Serialize)]
            struct Inspect {
                width: u32,
                height: u32,
                orig_width: u32,
                orig_height: u32,
                c_y: u16,
                c_uv: u16,
                beta: f64,
                qmap_present: bool,
                total_bytes: usize,
                bpp: f64,
                segment_bits: SegmentBits,
                qmap_overhead_fraction: f64,
            }
            let info = Inspect {
                width: h.width,
                height: h.height,
                orig_width: h.orig_width,
                orig_height: h.orig_height,
                c_y: h.c_y,
                c_uv: h.c_uv,
                beta: h.beta(),
                qmap_present: h.flags & FLAG_QMAP != 0,
                total_bytes: container.len(),
                bpp: total_bits as f64 / (h.orig_width as f64 * h.orig_height as f64),
                segment_bits: SegmentBits {
                    qmap: s.qmap * 8,
                    y_hyper: s.y_hyper * 8,
                    y_residual: s.y_residual * 8,
                    uv_hyper: s.uv_hyper * 8,
                    uv_residual: s.uv_residual * 8,
                    header: (container.len() - s.total()) * 8,
                },
                qmap_overhead_fraction: s.qmap as f64 * 8.0 / total_bits as f64,
            };
            let text = format!(
                "container {}x{} (orig {}x{}), c_y {}, c_uv {}, beta {}\n\
                 bytes {} ({:.4} bpp)\n\
                 bits: qmap {} | y-hyper {} | y-residual {} | uv-hyper {} | uv-residual {}\n\
                 qmap overhead: {:.4}%\n",
                info.width,
                info.height,
                info.orig_width,
                info.orig_height,
                info.c_y,
                info.c_uv,
                info.beta,
                info.total_bytes,
                info.bpp,
                info.segment_bits.qmap,
                info.segment_bits.y_hyper,
                info.segment_bits.y_residual,
                info.segment_bits.uv_hyper,
                info.segment_bits.uv_residual,
                info.qmap_overhead_fraction * 100.0,
            );
            emit(&info, text, format);
        }
        Command::RateMatch {
            input,
            target_bpp,
            out,
            flags,
            format,
        } => {
            let image = load_image(&input)?;
            let cfg = flags.build(None)?;
            let unit = GainUnit::analytic(cfg.c_y);
            let matched = match_rate(&image, &cfg, &unit, &RateTarget::new(target_bpp))?;
            if let Some(path) = out {
                write_file(&path, &matched.container)?;
            }
            let cfg = CodecConfig {
                beta: matched.beta,
                ..cfg
            };
            let result = encode(&image, &cfg)?;
            let report = EncodeReport::new(&input, &cfg, Some(target_bpp), &result);
            emit(&report, report.to_text(), format);
        }
        Command::Fixture {
            kind,
            width,
            height,
            out,
            mask_out,
        } => {
            use qmc_core::fixtures;
            let image = match kind {
                FixtureKind::Flat => fixtures::flat(width, height),
                FixtureKind::Natural => fixtures::natural(width, height),
                FixtureKind::Highfreq => fixtures::highfreq(width, height),
                FixtureKind::Textured => fixtures::textured(width, height),
                FixtureKind::Roi => {
                    let (img, mask) = fixtures::roi(width, height);
                    if let Some(path) = mask_out {
                        write_file(&path, &write_pgm(&mask))?;
                    }
                    img
                }
            };
            write_file(&out, &write_ppm(&image)?)?;
        }
        Command::Bdm(cmd) => run_bdm(cmd)?,
        Command::Qmap(cmd) => run_qmap(cmd)?,
        Command::Experiment(cmd) => run_experiment(cmd)?,
    }
    Ok(())
}

fn run_bdm(cmd: BdmCommand) -> Result<(), CliError> {
    match cmd {
        BdmCommand::FromTrace { trace, out, native } => {
            let trace = parse_trace(&read_text(&trace)?)?;
            let map = if native {
                native_map(&trace)
            } else {
                regroup_16(&trace)
            };
            let upper = map.max();
            if upper == 0.0 {
                return Err(CliError::Input("trace carries zero bits".into()));
            }
            let plane = qmc_core::bdm::render_pgm(&map, upper);
            write_file(&out, &write_pgm(&plane))?;
        }
        BdmCommand::FromEncode {
            container,
            out,
            format,
        } => {
            let result = decode(&read_file(&container)?)?;
            let map = result.stats.y_bits_map();
            if let Some(path) = out {
                let upper = map.max();
                if upper > 0.0 {
                    let plane = qmc_core::bdm::render_pgm(&map, upper);
                    write_file(&path, &write_pgm(&plane))?;
                }
            }
            #[derive(Serialize)]
            struct FromEncode {
                grid_w: usize,
                grid_h: usize,
                total_bits: f64,
                max_bits: f64,
                variance: f64,
            }
            let info = FromEncode {
                grid_w: map.grid_w,
                grid_h: map.grid_h,
                total_bits: map.total(),
                max_bits: map.max(),
                variance: self_normalized_variance(&map),
            };
            let text = format!(
                "{}x{} cells, {:.1} luma bits total, max {:.1}, normalized variance {:.5}\n",
                info.grid_w, info.grid_h, info.total_bits, info.max_bits, info.variance
            );
            emit(&info, text, format);
        }
        BdmCommand::Compare { a, b, format } => {
            let ta = parse_trace(&read_text(&a)?)?;
            let tb = parse_trace(&read_text(&b)?)?;
            let (na, nb, upper) = normalize_pair(&regroup_16(&ta), &regroup_16(&tb))?;
            #[derive(Serialize)]
            struct Compare {
                upper: f64,
                variance_a: f64,
                variance_b: f64,
            }
            let info = Compare {
                upper,
                variance_a: bdm_variance(&na),
                variance_b: bdm_variance(&nb),
            };
            let text = format!(
                "upper {:.3}\nvariance a {:.6}\nvariance b {:.6}\n",
                info.upper, info.variance_a, info.variance_b
            );
            emit(&info, text, format);
        }
    }
    Ok(())
}

fn run_qmap(cmd: QmapCommand) -> Result<(), CliError> {
    match cmd {
        QmapCommand::FromBdm { trace, out } => {
            let trace = parse_trace(&read_text(&trace)?)?;
            let map = qmap_from_bdm(&downsample_16(&regroup_16(&trace))?)?;
            write_file(&out, map.to_json().as_bytes())?;
        }
        QmapCommand::FromRoi { mask, hi, lo, out } => {
            let plane = read_pgm_plane(&read_file(&mask)?)?;
            let padded = plane.pad_replicate_to(
                plane.width.div_ceil(32) * 32,
                plane.height.div_ceil(32) * 32,
            );
            let map = qmap_from_roi(&padded, hi, lo)?;
            write_file(&out, map.to_json().as_bytes())?;
        }
        QmapCommand::FromVariance { image, out } => {
            let img = load_image(&image)?;
            let map = qmap_from_variance(&luma_plane(&img)?)?;
            write_file(&out, map.to_json().as_bytes())?;
        }
        QmapCommand::ToPgm { map, out } => {
            let map = QualityIndexMap::from_json(&read_text(&map)?)?;
            write_file(&out, &map.to_pgm())?;
        }
    }
    Ok(())
}

fn run_experiment(cmd: ExperimentCommand) -> Result<(), CliError> {
    match cmd {
        ExperimentCommand::Roi {
            image,
            mask,
            hi,
            lo,
            beta,
            format,
        } => {
            let img = load_image(&image)?;
            let mask = read_pgm_plane(&read_file(&mask)?)?;
            let cfg = CodecConfig::with_beta(beta);
            let report = roi_experiment(&img, &mask, hi, lo, &cfg)?;
            emit(&report, report.to_text(), format);
        }
        ExperimentCommand::VvcQmap {
            image,
            trace,
            target_bpp,
            format,
        } => {
            let img = load_image(&image)?;
            let trace = parse_trace(&read_text(&trace)?)?;
            let report = vvc_qmap_experiment(&img, &trace, target_bpp, &CodecConfig::default())?;
            emit(&report, report.to_text(), format);
        }
        ExperimentCommand::Overhead {
            image,
            qmap,
            beta,
            target_bpp,
            format,
        } => {
            if beta.is_some() && target_bpp.is_some() {
                return Err(CliError::Usage(
                    "--beta and --target-bpp are mutually exclusive".into(),
                ));
            }
            let img = load_image(&image)?;
            let map = QualityIndexMap::from_json(&read_text(&qmap)?)?;
            let cfg = CodecConfig::with_beta(beta.unwrap_or(1.0));
            let report = overhead_report(&img, map, &cfg, target_bpp)?;
            emit(&report, report.to_text(), format);
        }
    }
    Ok(())
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
