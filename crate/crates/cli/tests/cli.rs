//! End-to-end tests of the `qmc` binary: round trips, reports, analytics
//! subcommands, and exit codes.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qmc_core::image::{psnr, read_pnm, rgb_to_yuv420};

fn qmc(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qmc"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn qmc")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = qmc(dir, args);
    assert!(
        out.status.success(),
        "qmc {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn tempdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("qmc-cli-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn encode_decode_round_trip_and_report_psnr() {
    let dir = tempdir("roundtrip");
    ok(
        &dir,
        &[
            "fixture", "--kind", "textured", "--width", "128", "--height", "96", "--out", "t.ppm",
        ],
    );
    let report = ok(
        &dir,
        &["encode", "--in", "t.ppm", "--out", "t.qmc", "--beta", "2"],
    );
    let report: serde_json::Value = serde_json::from_str(&report).unwrap();
    ok(&dir, &["decode", "--in", "t.qmc", "--out", "back.ppm"]);

    // The PSNR in the encode report matches a PSNR computed after decode
    // exactly.
    let src = read_pnm(&std::fs::read(dir.join("t.ppm")).unwrap()).unwrap();
    let dec = read_pnm(&std::fs::read(dir.join("back.ppm")).unwrap()).unwrap();
    let sy = rgb_to_yuv420(&src).unwrap();
    let dy = rgb_to_yuv420(&dec).unwrap();
    let got = psnr(&sy.planes[0], &dy.planes[0], 255.0).unwrap();
    let reported = report["psnr_y"].as_f64().unwrap();
    assert_eq!(got, reported);
    assert_eq!(
        report["container_bytes"].as_u64().unwrap() as usize,
        std::fs::metadata(dir.join("t.qmc")).unwrap().len() as usize
    );
}

#[test]
fn encode_is_deterministic_across_runs() {
    let dir = tempdir("determinism");
    ok(
        &dir,
        &[
            "fixture", "--kind", "natural", "--width", "96", "--height", "64", "--out", "n.ppm",
        ],
    );
    let r1 = ok(
        &dir,
        &["encode", "--in", "n.ppm", "--out", "a.qmc", "--beta", "1.5"],
    );
    let r2 = ok(
        &dir,
        &["encode", "--in", "n.ppm", "--out", "b.qmc", "--beta", "1.5"],
    );
    assert_eq!(r1, r2);
    assert_eq!(
        std::fs::read(dir.join("a.qmc")).unwrap(),
        std::fs::read(dir.join("b.qmc")).unwrap()
    );
    let v: serde_json::Value = serde_json::from_str(&r1).unwrap();
    assert!(v["config_hash"].as_str().unwrap().len() == 16);
}

#[test]
fn inspect_reports_segments() {
    let dir = tempdir("inspect");
    ok(
        &dir,
        &[
            "fixture", "--kind", "flat", "--width", "64", "--height", "64", "--out", "f.ppm",
        ],
    );
    ok(&dir, &["encode", "--in", "f.ppm", "--out", "f.qmc"]);
    let out = ok(&dir, &["inspect", "--in", "f.qmc"]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["width"], 64);
    assert_eq!(v["qmap_present"], false);
    assert!(v["segment_bits"]["y_residual"].as_u64().unwrap() > 0);
}

#[test]
fn qmap_workflows() {
    let dir = tempdir("qmap");
    ok(
        &dir,
        &[
            "fixture",
            "--kind",
            "roi",
            "--width",
            "64",
            "--height",
            "64",
            "--out",
            "r.ppm",
            "--mask-out",
            "m.pgm",
        ],
    );
    ok(
        &dir,
        &[
            "qmap", "from-roi", "--mask", "m.pgm", "--hi", "6", "--lo", "-6", "--out", "q.json",
        ],
    );
    let q: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("q.json")).unwrap()).unwrap();
    assert_eq!(q["w"], 4);
    assert_eq!(q["h"], 4);
    ok(&dir, &["qmap", "to-pgm", "q.json", "--out", "q.pgm"]);
    assert!(dir.join("q.pgm").exists());

    // Encoding with the map embeds a qmap segment and decodes cleanly.
    ok(
        &dir,
        &[
            "encode", "--in", "r.ppm", "--out", "r.qmc", "--qmap", "q.json",
        ],
    );
    let out = ok(&dir, &["inspect", "--in", "r.qmc"]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["qmap_present"], true);
    assert!(v["qmap_overhead_fraction"].as_f64().unwrap() > 0.0);
    ok(&dir, &["decode", "--in", "r.qmc", "--out", "r_dec.ppm"]);

    ok(
        &dir,
        &[
            "qmap",
            "from-variance",
            "--image",
            "r.ppm",
            "--out",
            "qv.json",
        ],
    );
    let qv: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("qv.json")).unwrap()).unwrap();
    for row in qv["q"].as_array().unwrap() {
        for v in row.as_array().unwrap() {
            let v = v.as_i64().unwrap();
            assert!((-4..=0).contains(&v));
        }
    }
}

#[test]
fn bdm_workflows() {
    let dir = tempdir("bdm");
    let trace = serde_json::json!({
        "width": 64, "height": 64,
        "blocks": [
            {"x": 0, "y": 0, "w": 32, "h": 64, "bits": 900.0},
            {"x": 32, "y": 0, "w": 32, "h": 64, "bits": 100.0},
        ]
    });
    std::fs::write(dir.join("a.json"), trace.to_string()).unwrap();
    let uniform = serde_json::json!({
        "width": 64, "height": 64,
        "blocks": [{"x": 0, "y": 0, "w": 64, "h": 64, "bits": 1000.0}]
    });
    std::fs::write(dir.join("b.json"), uniform.to_string()).unwrap();

    ok(&dir, &["bdm", "from-trace", "a.json", "--out", "a.pgm"]);
    assert!(dir.join("a.pgm").exists());

    let out = ok(&dir, &["bdm", "compare", "a.json", "b.json"]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!(v["variance_a"].as_f64().unwrap() > v["variance_b"].as_f64().unwrap());

    ok(&dir, &["qmap", "from-bdm", "a.json", "--out", "q.json"]);
    let q: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("q.json")).unwrap()).unwrap();
    // Left half above the mean, right half below.
    assert!(q["q"][0][0].as_i64().unwrap() > q["q"][0][3].as_i64().unwrap());

    ok(
        &dir,
        &[
            "fixture", "--kind", "textured", "--width", "64", "--height", "64", "--out", "t.ppm",
        ],
    );
    ok(&dir, &["encode", "--in", "t.ppm", "--out", "t.qmc"]);
    let out = ok(&dir, &["bdm", "from-encode", "t.qmc", "--out", "t.pgm"]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!(v["total_bits"].as_f64().unwrap() > 0.0);
    assert!(dir.join("t.pgm").exists());
}

#[test]
fn exit_codes_follow_error_classes() {
    let dir = tempdir("exitcodes");
    // 2: usage (mutually exclusive flags).
    ok(
        &dir,
        &[
            "fixture", "--kind", "flat", "--width", "64", "--height", "64", "--out", "f.ppm",
        ],
    );
    let out = qmc(
        &dir,
        &[
            "encode",
            "--in",
            "f.ppm",
            "--out",
            "f.qmc",
            "--beta",
            "1",
            "--target-bpp",
            "0.5",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    // 2: clap usage error.
    let out = qmc(&dir, &["encode"]);
    assert_eq!(out.status.code(), Some(2));
    // 3: missing input file.
    let out = qmc(&dir, &["encode", "--in", "missing.ppm", "--out", "x.qmc"]);
    assert_eq!(out.status.code(), Some(3));
    // 3: not a container.
    std::fs::write(dir.join("junk.qmc"), b"not a container").unwrap();
    let out = qmc(&dir, &["decode", "--in", "junk.qmc", "--out", "y.ppm"]);
    assert_eq!(out.status.code(), Some(3));
    // 3: malformed trace (overlap) reports the offending blocks.
    let bad = serde_json::json!({
        "width": 32, "height": 16,
        "blocks": [
            {"x": 0, "y": 0, "w": 17, "h": 16, "bits": 1.0},
            {"x": 16, "y": 0, "w": 16, "h": 16, "bits": 1.0},
        ]
    });
    std::fs::write(dir.join("bad.json"), bad.to_string()).unwrap();
    let out = qmc(&dir, &["bdm", "from-trace", "bad.json", "--out", "x.pgm"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("overlap"));
    // 4: unreachable rate target.
    let out = qmc(&dir, &["rate-match", "--in", "f.ppm", "--target-bpp", "30"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(
        String::from_utf8_lossy(&out.stderr).contains("not reachable")
            || String::from_utf8_lossy(&out.stderr).contains("outside reachable")
    );
}

#[test]
fn rate_match_writes_matching_container() {
    let dir = tempdir("ratematch");
    ok(
        &dir,
        &[
            "fixture", "--kind", "natural", "--width", "128", "--height", "128", "--out", "n.ppm",
        ],
    );
    let out = ok(
        &dir,
        &[
            "rate-match",
            "--in",
            "n.ppm",
            "--target-bpp",
            "0.7",
            "--out",
            "n.qmc",
        ],
    );
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    let bpp = v["achieved_bpp"].as_f64().unwrap();
    assert!((bpp - 0.7).abs() / 0.7 < 0.10, "bpp {bpp}");
    let bytes = std::fs::metadata(dir.join("n.qmc")).unwrap().len() as f64;
    assert!((bytes * 8.0 / (128.0 * 128.0) - bpp).abs() < 1e-9);
}

#[test]
fn experiment_reports_are_json() {
    let dir = tempdir("experiments");
    ok(
        &dir,
        &[
            "fixture",
            "--kind",
            "roi",
            "--width",
            "128",
            "--height",
            "128",
            "--out",
            "r.ppm",
            "--mask-out",
            "m.pgm",
        ],
    );
    let out = ok(
        &dir,
        &["experiment", "roi", "--image", "r.ppm", "--mask", "m.pgm"],
    );
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!(
        v["roi"]["roi_psnr_y"].as_f64().unwrap() > v["uniform"]["roi_psnr_y"].as_f64().unwrap()
    );

    // hi == lo == 0 makes both runs identical.
    let out = ok(
        &dir,
        &[
            "experiment",
            "roi",
            "--image",
            "r.ppm",
            "--mask",
            "m.pgm",
            "--hi",
            "0",
            "--lo",
            "0",
        ],
    );
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["uniform"]["total_bpp"], v["roi"]["total_bpp"]);
    assert_eq!(v["uniform"]["roi_psnr_y"], v["roi"]["roi_psnr_y"]);
}
