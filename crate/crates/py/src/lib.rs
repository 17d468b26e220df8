//! Python bindings: encode/decode over PNM byte buffers, quality-map
//! generation, rate matching, and bit-distribution analytics. Images travel
//! as PPM/PGM bytes, maps and reports as JSON strings.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde_json::json;

use qmc_core::bdm;
use qmc_core::codec::{self, CodecConfig};
use qmc_core::fixtures;
use qmc_core::gain::{match_rate, GainUnit, RateTarget};
use qmc_core::image::{
    pad_replicate, psnr, read_pgm_plane, read_pnm, rgb_to_yuv420, write_ppm, PlanarImage,
};
use qmc_core::qmap::{self, QualityIndexMap};

fn input_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn run_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn parse_ppm(data: &[u8]) -> PyResult<PlanarImage> {
    read_pnm(data).map_err(input_err)
}

fn build_config(
    beta: Option<f64>,
    qmap_json: Option<&str>,
    c_y: usize,
    c_uv: usize,
) -> PyResult<CodecConfig> {
    let qmap = match qmap_json {
        Some(text) => Some(QualityIndexMap::from_json(text).map_err(input_err)?),
        None => None,
    };
    Ok(CodecConfig {
        c_y,
        c_uv,
        beta: beta.unwrap_or(1.0),
        qmap,
        ..Default::default()
    })
}

fn encode_report(
    config: &CodecConfig,
    target: Option<f64>,
    result: &codec::EncodeResult,
) -> String {
    let [py_, pu, pv] = result.psnr_yuv();
    let fmt = |v: f64| {
        if v.is_infinite() {
            json!("inf")
        } else {
            json!(v)
        }
    };
    json!({
        "beta": codec::quantize_beta(config.beta),
        "target_bpp": target,
        "achieved_bpp": result.bpp(),
        "psnr_y": fmt(py_),
        "psnr_u": fmt(pu),
        "psnr_v": fmt(pv),
        "qmap_overhead_fraction":
            result.stats.segments.qmap as f64 / result.container.len() as f64,
        "container_bytes": result.container.len(),
        "width": result.stats.orig.0,
        "height": result.stats.orig.1,
    })
    .to_string()
}

/// Encode a PPM/PGM image. Returns `(container_bytes, report_json)`.
/// Exactly one of `beta` / `target_bpp` selects the operating point
/// (default beta 1.0).
#[pyfunction]
#[pyo3(signature = (ppm, beta=None, target_bpp=None, qmap_json=None, c_y=16, c_uv=8))]
fn encode(
    ppm: &[u8],
    beta: Option<f64>,
    target_bpp: Option<f64>,
    qmap_json: Option<&str>,
    c_y: usize,
    c_uv: usize,
) -> PyResult<(Vec<u8>, String)> {
    if beta.is_some() && target_bpp.is_some() {
        return Err(PyValueError::new_err(
            "beta and target_bpp are mutually exclusive",
        ));
    }
    let image = parse_ppm(ppm)?;
    let mut config = build_config(beta, qmap_json, c_y, c_uv)?;
    if let Some(target) = target_bpp {
        let unit = GainUnit::analytic(config.c_y);
        let matched =
            match_rate(&image, &config, &unit, &RateTarget::new(target)).map_err(run_err)?;
        config.beta = matched.beta;
    }
    let result = codec::encode(&image, &config).map_err(input_err)?;
    let report = encode_report(&config, target_bpp, &result);
    Ok((result.container, report))
}

/// Decode a container back to PPM bytes.
#[pyfunction]
fn decode(container: &[u8]) -> PyResult<Vec<u8>> {
    let result = codec::decode(container).map_err(input_err)?;
    write_ppm(&result.rgb).map_err(run_err)
}

/// Container header and per-segment bit layout as JSON.
#[pyfunction]
fn inspect(container: &[u8]) -> PyResult<String> {
    let result = codec::decode(container).map_err(input_err)?;
    let h = result.header;
    let s = result.stats.segments;
    Ok(json!({
        "width": h.width,
        "height": h.height,
        "orig_width": h.orig_width,
        "orig_height": h.orig_height,
        "c_y": h.c_y,
        "c_uv": h.c_uv,
        "beta": h.beta(),
        "qmap_present": h.flags & codec::FLAG_QMAP != 0,
        "segment_bits": {
            "qmap": s.qmap * 8,
            "y_hyper": s.y_hyper * 8,
            "y_residual": s.y_residual * 8,
            "uv_hyper": s.uv_hyper * 8,
            "uv_residual": s.uv_residual * 8,
        },
        "qmap_overhead_fraction": s.qmap as f64 / container.len() as f64,
    })
    .to_string())
}

/// Quantization step for an index: 2^(index/4).
#[pyfunction]
fn q_step(index: i32) -> PyResult<f64> {
    if !(qmap::INDEX_MIN..=qmap::INDEX_MAX).contains(&index) {
        return Err(PyValueError::new_err(format!(
            "index {index} outside [{}, {}]",
            qmap::INDEX_MIN,
            qmap::INDEX_MAX
        )));
    }
    Ok(qmap::q_step(index))
}

/// Per-plane PSNR in dB between two same-size PPM images, in YUV420 space.
/// Infinite values come back as `inf`.
#[pyfunction]
fn psnr_yuv(reference: &[u8], test: &[u8]) -> PyResult<(f64, f64, f64)> {
    let a = rgb_to_yuv420(&parse_ppm(reference)?).map_err(input_err)?;
    let b = rgb_to_yuv420(&parse_ppm(test)?).map_err(input_err)?;
    let mut out = [0.0; 3];
    for c in 0..3 {
        out[c] = psnr(&a.planes[c], &b.planes[c], 255.0).map_err(input_err)?;
    }
    Ok((out[0], out[1], out[2]))
}

/// Two-level ROI map from a PGM mask (nonzero = region of interest),
/// as JSON.
#[pyfunction]
#[pyo3(signature = (mask_pgm, hi=6, lo=-6))]
fn qmap_from_roi(mask_pgm: &[u8], hi: i32, lo: i32) -> PyResult<String> {
    let mask = read_pgm_plane(mask_pgm).map_err(input_err)?;
    let padded = mask.pad_replicate_to(mask.width.div_ceil(32) * 32, mask.height.div_ceil(32) * 32);
    Ok(qmap::qmap_from_roi(&padded, hi, lo)
        .map_err(input_err)?
        .to_json())
}

/// Five-level luminance-variance map (indices -4..0) for an image, as JSON.
#[pyfunction]
fn qmap_from_variance(ppm: &[u8]) -> PyResult<String> {
    let image = parse_ppm(ppm)?;
    let yuv = rgb_to_yuv420(&image).map_err(input_err)?;
    let padded = pad_replicate(&yuv, 32);
    Ok(qmap::qmap_from_variance(&padded.planes[0])
        .map_err(input_err)?
        .to_json())
}

/// Per-block rate-distortion optimized map, as JSON.
#[pyfunction]
#[pyo3(signature = (ppm, beta, candidates, c_y=16, c_uv=8))]
fn qmap_rd_optimize(
    ppm: &[u8],
    beta: f64,
    candidates: Vec<i32>,
    c_y: usize,
    c_uv: usize,
) -> PyResult<String> {
    let image = parse_ppm(ppm)?;
    let config = build_config(None, None, c_y, c_uv)?;
    Ok(qmap::qmap_rd_optimize(&image, &config, beta, &candidates)
        .map_err(input_err)?
        .to_json())
}

/// Regroup a JSON block-bit trace onto the 16x16 grid. Returns
/// `(pgm_bytes, normalized_variance, total_bits)`.
#[pyfunction]
fn bdm_from_trace(trace_json: &str) -> PyResult<(Vec<u8>, f64, f64)> {
    let trace = bdm::parse_trace(trace_json).map_err(input_err)?;
    let map = bdm::regroup_16(&trace);
    let upper = map.max();
    if upper == 0.0 {
        return Err(PyValueError::new_err("trace carries zero bits"));
    }
    let plane = bdm::render_pgm(&map, upper);
    let total = map.total();
    let normalized = bdm::BitDistributionMap {
        values: map.values.iter().map(|v| v / upper).collect(),
        geometry: map.geometry.clone(),
        ..map
    };
    Ok((
        qmc_core::image::write_pgm(&plane),
        bdm::bdm_variance(&normalized),
        total,
    ))
}

/// Normalize two traces to a shared upper bound; returns
/// `(upper, variance_a, variance_b)`.
#[pyfunction]
fn bdm_compare(trace_a: &str, trace_b: &str) -> PyResult<(f64, f64, f64)> {
    let a = bdm::regroup_16(&bdm::parse_trace(trace_a).map_err(input_err)?);
    let b = bdm::regroup_16(&bdm::parse_trace(trace_b).map_err(input_err)?);
    let (na, nb, upper) = bdm::normalize_pair(&a, &b).map_err(input_err)?;
    Ok((upper, bdm::bdm_variance(&na), bdm::bdm_variance(&nb)))
}

/// Quality map from a trace: regrouped, retagged at latent scale, and
/// thresholded into five levels against the mean. JSON map out.
#[pyfunction]
fn qmap_from_trace(trace_json: &str) -> PyResult<String> {
    let trace = bdm::parse_trace(trace_json).map_err(input_err)?;
    let down = bdm::downsample_16(&bdm::regroup_16(&trace)).map_err(input_err)?;
    Ok(qmap::qmap_from_bdm(&down).map_err(input_err)?.to_json())
}

/// Deterministic synthetic test image as PPM bytes. Kinds: flat, natural,
/// highfreq, textured.
#[pyfunction]
fn fixture(kind: &str, width: usize, height: usize) -> PyResult<Vec<u8>> {
    let image = match kind {
        "flat" => fixtures::flat(width, height),
        "natural" => fixtures::natural(width, height),
        "highfreq" => fixtures::highfreq(width, height),
        "textured" => fixtures::textured(width, height),
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown fixture kind {other:?}"
            )))
        }
    };
    write_ppm(&image).map_err(run_err)
}

/// The centered-ROI fixture: `(image_ppm, mask_pgm)`.
#[pyfunction]
fn fixture_roi(width: usize, height: usize) -> PyResult<(Vec<u8>, Vec<u8>)> {
    let (image, mask) = fixtures::roi(width, height);
    Ok((
        write_ppm(&image).map_err(run_err)?,
        qmc_core::image::write_pgm(&mask),
    ))
}

#[pymodule]
fn qmc(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(encode, m)?)?;
    m.add_function(wrap_pyfunction!(decode, m)?)?;
    m.add_function(wrap_pyfunction!(inspect, m)?)?;
    m.add_function(wrap_pyfunction!(q_step, m)?)?;
    m.add_function(wrap_pyfunction!(psnr_yuv, m)?)?;
    m.add_function(wrap_pyfunction!(qmap_from_roi, m)?)?;
    m.add_function(wrap_pyfunction!(qmap_from_variance, m)?)?;
    m.add_function(wrap_pyfunction!(qmap_rd_optimize, m)?)?;
    m.add_function(wrap_pyfunction!(qmap_from_trace, m)?)?;
    m.add_function(wrap_pyfunction!(bdm_from_trace, m)?)?;
    m.add_function(wrap_pyfunction!(bdm_compare, m)?)?;
    m.add_function(wrap_pyfunction!(fixture, m)?)?;
    m.add_function(wrap_pyfunction!(fixture_roi, m)?)?;
    Ok(())
}
