//! End-to-end codec properties over the synthetic fixtures.

use qmc_core::codec::{self, decode, encode, CodecConfig};
use qmc_core::fixtures;
use qmc_core::gain::{match_rate, GainUnit, RateError, RateTarget};
use qmc_core::image::{psnr, rgb_to_yuv420};
use qmc_core::qmap::{self, QualityIndexMap};

fn y_sse(result: &codec::EncodeResult) -> f64 {
    result.source_yuv.planes[0]
        .data
        .iter()
        .zip(&result.recon_yuv.planes[0].data)
        .map(|(a, b)| (a - b) * (a - b))
        .sum()
}

#[test]
fn rate_is_monotone_in_gain_scale() {
    // Ten-point geometric sweep over the extrapolated beta range; the gain
    // vector scales globally with beta, and latent bits must not decrease.
    let img = fixtures::natural(128, 128);
    let mut prev = -1.0;
    for k in 0..10 {
        let beta = 0.125 * 512.0f64.powf(k as f64 / 9.0);
        let r = encode(&img, &CodecConfig::with_beta(beta)).unwrap();
        let latent_bits = r.stats.y_residual.total() + r.stats.uv_residual.total();
        assert!(latent_bits >= prev, "beta {beta}: {latent_bits} < {prev}");
        prev = latent_bits;
    }
}

#[test]
fn near_transparent_with_full_basis() {
    // All 256 coefficients kept, quality index 8 everywhere, largest stored
    // beta: the surrogate must exceed 45 dB PSNR-Y on every fixture.
    for img in [
        fixtures::flat(128, 128),
        fixtures::natural(128, 128),
        fixtures::highfreq(128, 128),
        fixtures::textured(128, 128),
    ] {
        let cfg = CodecConfig {
            c_y: 256,
            c_uv: 128,
            beta: 8.0,
            qmap: Some(QualityIndexMap::new(8, 8, 8).unwrap()),
            ..Default::default()
        };
        let r = encode(&img, &cfg).unwrap();
        let py = r.psnr_yuv()[0];
        assert!(py > 45.0, "PSNR-Y {py}");
    }
}

#[test]
fn constant_image_bits_are_near_uniform() {
    let mut img = qmc_core::image::PlanarImage::new_rgb(128, 128);
    for p in &mut img.planes {
        p.data.fill(97.0);
    }
    let r = encode(&img, &CodecConfig::default()).unwrap();
    let map = r.stats.y_bits_map();
    let mean = map.mean();
    let variance = qmc_core::bdm::bdm_variance(&map);
    assert!(
        variance < 0.1 * mean * mean,
        "variance {variance} vs mean^2 {}",
        mean * mean
    );
}

#[test]
fn lone_textured_block_dominates_bits_map() {
    let mut img = qmc_core::image::PlanarImage::new_rgb(128, 128);
    for p in &mut img.planes {
        p.data.fill(128.0);
    }
    // One busy 16x16 block at grid cell (3, 5).
    for dy in 0..16 {
        for dx in 0..16 {
            let v = if (dx + dy) % 2 == 0 { 68.0 } else { 188.0 };
            img.planes[0].set(5 * 16 + dx, 3 * 16 + dy, v);
        }
    }
    let r = encode(&img, &CodecConfig::default()).unwrap();
    let map = r.stats.y_bits_map();
    let mut best = (0, 0);
    let mut best_v = -1.0;
    for i in 0..map.grid_h {
        for j in 0..map.grid_w {
            if map.get(j, i) > best_v {
                best_v = map.get(j, i);
                best = (i, j);
            }
        }
    }
    assert_eq!(best, (3, 5));
}

#[test]
fn decode_reproduces_encoder_view_exactly() {
    for img in [fixtures::natural(96, 80), fixtures::textured(64, 64)] {
        let r = encode(&img, &CodecConfig::with_beta(2.0)).unwrap();
        let d = decode(&r.container).unwrap();
        assert_eq!(d.yuv, r.recon_yuv);
        // The PSNR a caller computes after decode matches the encode report.
        let source = rgb_to_yuv420(&img).unwrap();
        let reported = r.psnr_yuv();
        for c in 0..3 {
            let measured = psnr(&source.planes[c], &d.yuv.planes[c], 255.0).unwrap();
            assert_eq!(measured, reported[c]);
        }
        // The decoder's ledger view gives the identical bits map.
        assert_eq!(d.stats.y_bits_map().values, r.stats.y_bits_map().values);
    }
}

#[test]
fn match_rate_hits_existing_operating_point() {
    let img = fixtures::natural(128, 128);
    let cfg = CodecConfig::default();
    let probe = encode(&img, &CodecConfig::with_beta(2.0)).unwrap();
    let target = RateTarget::new(probe.bpp());
    let unit = GainUnit::analytic(cfg.c_y);
    let m = match_rate(&img, &cfg, &unit, &target).unwrap();
    assert!((m.bpp - target.bpp).abs() / target.bpp < target.tolerance);
    // The reported beta re-encodes to the identical container.
    let re = encode(&img, &CodecConfig::with_beta(m.beta)).unwrap();
    assert_eq!(re.container, m.container);
}

#[test]
fn match_rate_unreachable_reports_brackets() {
    let img = fixtures::flat(96, 96);
    let cfg = CodecConfig::default();
    let unit = GainUnit::analytic(cfg.c_y);
    let hi = encode(&img, &CodecConfig::with_beta(64.0)).unwrap();
    let target = RateTarget::new(hi.bpp() * 10.0);
    match match_rate(&img, &cfg, &unit, &target) {
        Err(RateError::NotReachable {
            lo_bpp,
            hi_bpp,
            lo_beta,
            hi_beta,
            ..
        }) => {
            assert!(lo_bpp < hi_bpp);
            assert_eq!(lo_beta, 0.125);
            assert_eq!(hi_beta, 64.0);
            assert!(target.bpp > hi_bpp);
        }
        other => panic!("expected NotReachable, got {other:?}"),
    }
}

#[test]
fn rd_optimizer_limits() {
    // Texture held inside the coded basis, so every block's distortion
    // strictly improves with the index and its rate strictly grows.
    let img = fixtures::textured(64, 64);
    let cfg = CodecConfig::default();
    let candidates = [-4, 0, 4];
    let max_map = qmap::qmap_rd_optimize(&img, &cfg, 1e9, &candidates).unwrap();
    assert!(max_map.values().iter().all(|&v| v == 4), "{max_map:?}");
    let min_map = qmap::qmap_rd_optimize(&img, &cfg, 1e-12, &candidates).unwrap();
    assert!(min_map.values().iter().all(|&v| v == -4), "{min_map:?}");
}

#[test]
fn per_block_rate_distortion_tables_are_monotone() {
    // The invariant behind the constant-map sweep, at block granularity:
    // every cell's bits grow and its reconstruction SSE shrinks with the
    // index.
    let img = fixtures::textured(128, 128);
    let tables = codec::block_rd_tables(&img, &CodecConfig::default(), &[-8, -4, 0, 4, 8]).unwrap();
    for (cell, costs) in tables.costs.iter().enumerate() {
        for pair in costs.windows(2) {
            assert!(
                pair[1].0 >= pair[0].0,
                "cell {cell}: bits fell {} -> {}",
                pair[0].0,
                pair[1].0
            );
            assert!(
                pair[1].1 <= pair[0].1,
                "cell {cell}: sse rose {} -> {}",
                pair[0].1,
                pair[1].1
            );
        }
    }
}

#[test]
fn constant_quality_maps_trade_bits_for_distortion() {
    let img = fixtures::textured(128, 128);
    let mut bits_prev = -1.0f64;
    let mut sse_prev = f64::INFINITY;
    for k in [-8, 0, 8] {
        let cfg = CodecConfig {
            qmap: Some(QualityIndexMap::new(8, 8, k).unwrap()),
            ..Default::default()
        };
        let r = encode(&img, &cfg).unwrap();
        let bits = r.container.len() as f64 * 8.0;
        let sse = y_sse(&r);
        assert!(bits >= bits_prev, "k {k}");
        assert!(sse <= sse_prev, "k {k}");
        bits_prev = bits;
        sse_prev = sse;
    }
}
