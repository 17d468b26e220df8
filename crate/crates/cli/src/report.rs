//! Report types shared by the CLI commands: JSON-first, with an aligned text
//! rendering. Infinite PSNR (identical planes) serializes as the string
//! "inf".

use serde::ser::Serializer;
use serde::Serialize;

use qmc_core::bdm::bdm_variance;
use qmc_core::codec::{CodecConfig, EncodeResult};

/// FNV-1a over the canonical config string; reports carry it so identical
/// runs are recognizable.
pub fn config_hash(config: &CodecConfig) -> String {
    let canon = format!(
        "cy={};cuv={};beta={};qpred={:?};interp={:?};qmap={}",
        config.c_y,
        config.c_uv,
        qmc_core::codec::quantize_beta(config.beta),
        config.qpred,
        config.interp,
        config
            .qmap
            .as_ref()
            .map(|m| m.to_json())
            .unwrap_or_default(),
    );
    let mut hash = 0xcbf29ce484222325u64;
    for b in canon.as_bytes() {
        hash ^= *b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    format!("{hash:016x}")
}

pub fn ser_psnr<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_infinite() {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*v)
    }
}

pub fn fmt_psnr(v: f64) -> String {
    if v.is_infinite() {
        "inf".into()
    } else {
        format!("{v:.3}")
    }
}

/// One encode operating point, the row shape shared by encode, rate-match,
/// and the experiment tables.
#[derive(Debug, Clone, Serialize)]
pub struct EncodeReport {
    pub name: String,
    pub config_hash: String,
    pub beta: f64,
    pub target_bpp: Option<f64>,
    pub achieved_bpp: f64,
    #[serde(serialize_with = "ser_psnr")]
    pub psnr_y: f64,
    #[serde(serialize_with = "ser_psnr")]
    pub psnr_u: f64,
    #[serde(serialize_with = "ser_psnr")]
    pub psnr_v: f64,
    pub qmap_overhead_fraction: f64,
    pub bdm_variance: f64,
    pub container_bytes: usize,
    pub width: usize,
    pub height: usize,
}

impl EncodeReport {
    pub fn new(
        name: impl Into<String>,
        config: &CodecConfig,
        target_bpp: Option<f64>,
        result: &EncodeResult,
    ) -> Self {
        let [psnr_y, psnr_u, psnr_v] = result.psnr_yuv();
        EncodeReport {
            name: name.into(),
            config_hash: config_hash(config),
            beta: qmc_core::codec::quantize_beta(config.beta),
            target_bpp,
            achieved_bpp: result.bpp(),
            psnr_y,
            psnr_u,
            psnr_v,
            qmap_overhead_fraction: qmap_overhead_fraction(result),
            bdm_variance: normalized_bits_variance(result),
            container_bytes: result.container.len(),
            width: result.stats.orig.0,
            height: result.stats.orig.1,
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<14} {:>10} {:>10} {:>9} {:>9} {:>9} {:>9} {:>9}\n",
            "name", "target", "bpp", "psnr-y", "psnr-u", "psnr-v", "qmap%", "bdm-var"
        ));
        out.push_str(&self.text_row());
        out
    }

    pub fn text_row(&self) -> String {
        format!(
            "{:<14} {:>10} {:>10.4} {:>9} {:>9} {:>9} {:>9.3} {:>9.5}\n",
            self.name,
            self.target_bpp
                .map(|t| format!("{t:.4}"))
                .unwrap_or_else(|| "-".into()),
            self.achieved_bpp,
            fmt_psnr(self.psnr_y),
            fmt_psnr(self.psnr_u),
            fmt_psnr(self.psnr_v),
            self.qmap_overhead_fraction * 100.0,
            self.bdm_variance,
        )
    }
}

/// Quality-map segment bits over total container bits.
pub fn qmap_overhead_fraction(result: &EncodeResult) -> f64 {
    result.stats.segments.qmap as f64 * 8.0 / (result.container.len() as f64 * 8.0)
}

/// Variance of the luma bits map normalized to its own maximum, the
/// single-codec analogue of the pairwise-normalized map variance.
pub fn normalized_bits_variance(result: &EncodeResult) -> f64 {
    let map = result.stats.y_bits_map();
    let upper = map.max();
    if upper == 0.0 {
        return 0.0;
    }
    let normalized = qmc_core::bdm::BitDistributionMap {
        values: map.values.iter().map(|v| v / upper).collect(),
        geometry: map.geometry.clone(),
        ..map
    };
    bdm_variance(&normalized)
}
