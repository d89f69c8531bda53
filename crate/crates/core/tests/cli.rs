use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nsgrf::container::ContainerReader;
use nsgrf::dataset::read_dataset;
use serde_json::{json, Value};
use tempfile::tempdir;

fn nsgrf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nsgrf"))
        .args(args)
        .env_remove("NSGRF_THREADS")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = nsgrf(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn small_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/configs/small.toml")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gen_dataset_small_config() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("small.h5");
    let stdout = ok(&["gen-dataset", "--config", s(&small_config()), "-o", s(&out)]);
    assert!(stdout.starts_with("# nsgrf "), "{stdout}");
    assert!(stdout.contains("config_hash="));
    assert!(stdout.contains("train 3, validation 0, test 1"));
    let reader = read_dataset(&out).unwrap();
    assert_eq!(reader.len(), 4);
    let sample = reader.sample(0).unwrap();
    assert_eq!(
        (
            sample.fields.replicates(),
            sample.fields.height(),
            sample.fields.width()
        ),
        (5, 48, 48)
    );
}

#[test]
fn gen_dataset_rerun_is_byte_identical_across_thread_counts() {
    let dir = tempdir().unwrap();
    let (a, b) = (dir.path().join("a.h5"), dir.path().join("b.h5"));
    let cfg = small_config();
    ok(&[
        "gen-dataset",
        "--config",
        s(&cfg),
        "-o",
        s(&a),
        "--n-samples",
        "3",
        "--threads",
        "1",
    ]);
    ok(&[
        "gen-dataset",
        "--config",
        s(&cfg),
        "-o",
        s(&b),
        "--n-samples",
        "3",
        "--threads",
        "4",
    ]);
    let (ra, rb) = (
        ContainerReader::open(&a).unwrap(),
        ContainerReader::open(&b).unwrap(),
    );
    assert_eq!(ra.header(), rb.header());
    for k in 0..3 {
        for name in ["fields", "params"] {
            let (x, y) = (ra.raw_f32(k, name).unwrap(), rb.raw_f32(k, name).unwrap());
            let bits = |v: Option<(Vec<usize>, Vec<f32>)>| {
                v.map(|(s, d)| (s, d.iter().map(|f| f.to_bits()).collect::<Vec<_>>()))
            };
            assert_eq!(bits(x), bits(y));
        }
    }
}

#[test]
fn flags_override_config_values() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("o.h5");
    ok(&[
        "gen-dataset",
        "--config",
        s(&small_config()),
        "-o",
        s(&out),
        "--n-samples",
        "2",
        "--replicates",
        "3",
        "--seed",
        "5",
    ]);
    let reader = read_dataset(&out).unwrap();
    assert_eq!(reader.len(), 2);
    assert_eq!(reader.config().replicates, 3);
    assert_eq!(reader.header().seed, 5);
}

#[test]
fn missing_config_exits_2_and_names_path() {
    let out = nsgrf(&["gen-dataset", "--config", "/no/such/dir/cfg.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/no/such/dir/cfg.toml"));
}

#[test]
fn bad_config_exits_2() {
    let dir = tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(
        &cfg,
        "n_samples = 4\nreplicates = 5\nheight = 8\nwidth = 8\nseed = 1\nbogus = 3\n",
    )
    .unwrap();
    let out = nsgrf(&[
        "gen-dataset",
        "--config",
        s(&cfg),
        "-o",
        s(&dir.path().join("x.h5")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(nsgrf(&[]).status.code(), Some(2));
    assert_eq!(nsgrf(&["simulate", "-o", "x.h5"]).status.code(), Some(2));
    assert_eq!(
        nsgrf(&[
            "simulate",
            "--stationary",
            "0.5,2",
            "--shape",
            "8x8",
            "-o",
            "x.h5"
        ])
        .status
        .code(),
        Some(2)
    );
    assert_eq!(
        nsgrf(&[
            "simulate",
            "--stationary",
            "-1,2,0",
            "--shape",
            "8x8",
            "-o",
            "x.h5"
        ])
        .status
        .code(),
        Some(2)
    );
    assert_eq!(
        nsgrf(&[
            "estimate",
            "--ensemble",
            "x.h5",
            "--window",
            "8",
            "-o",
            "y.h5"
        ])
        .status
        .code(),
        Some(2)
    );
}

#[test]
fn unreadable_inputs_exit_1_and_name_path() {
    let dir = tempdir().unwrap();
    let missing = dir.path().join("absent.h5");
    let out = nsgrf(&[
        "estimate",
        "--ensemble",
        s(&missing),
        "-o",
        s(&dir.path().join("e.h5")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent.h5"));
}

#[test]
fn config_schema_is_json() {
    let schema: Value = serde_json::from_str(&ok(&["config-schema"])).unwrap();
    let props = &schema["properties"];
    for key in [
        "n_samples",
        "replicates",
        "height",
        "width",
        "seed",
        "patterns",
        "split",
    ] {
        assert!(props.get(key).is_some(), "schema lacks {key}");
    }
}

#[test]
fn metrics_on_identical_inputs_are_perfect() {
    let dir = tempdir().unwrap();
    let ds = dir.path().join("d.h5");
    ok(&[
        "gen-dataset",
        "--config",
        s(&small_config()),
        "-o",
        s(&ds),
        "--n-samples",
        "2",
        "--replicates",
        "3",
    ]);
    let report = dir.path().join("m.json");
    let stdout = ok(&[
        "metrics",
        "--estimate",
        s(&ds),
        "--truth",
        s(&ds),
        "--json",
        s(&report),
    ]);
    assert!(stdout.starts_with("# nsgrf "));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["report"]["samples"], 2);
    for c in v["report"]["channels"].as_array().unwrap() {
        assert_eq!(c["rmse"], 0.0);
        assert_eq!(c["psnr"], 100.0);
    }
    assert!(v["config_hash"].as_str().unwrap().len() == 64);
}

#[test]
fn eval_cov_on_identical_ensembles_is_zero() {
    let dir = tempdir().unwrap();
    let e = dir.path().join("e.h5");
    ok(&[
        "simulate",
        "--stationary",
        "0.5,3,0.3",
        "--shape",
        "10x12",
        "-m",
        "20",
        "--seed",
        "2",
        "-o",
        s(&e),
    ]);
    let report = dir.path().join("c.json");
    ok(&[
        "eval-cov",
        "--truth",
        s(&e),
        "--sim",
        s(&e),
        "--anchors",
        "5",
        "--json",
        s(&report),
    ]);
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["report"]["mean_rmse"], 0.0);
    assert!(v["report"]["ttest"].is_null());
}

#[test]
fn shape_mismatches_fail() {
    let dir = tempdir().unwrap();
    let (a, b) = (dir.path().join("a.h5"), dir.path().join("b.h5"));
    ok(&[
        "simulate",
        "--stationary",
        "0.5,3,0.3",
        "--shape",
        "10x12",
        "-m",
        "5",
        "-o",
        s(&a),
    ]);
    ok(&[
        "simulate",
        "--stationary",
        "0.5,3,0.3",
        "--shape",
        "12x10",
        "-m",
        "5",
        "-o",
        s(&b),
    ]);
    let out = nsgrf(&[
        "eval-cov",
        "--truth",
        s(&a),
        "--sim",
        s(&b),
        "--anchors",
        "3",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("different grids"));

    let (pa, pb) = (dir.path().join("pa.h5"), dir.path().join("pb.h5"));
    ok(&[
        "estimate",
        "--ensemble",
        s(&a),
        "--window",
        "5",
        "--stride",
        "6",
        "-o",
        s(&pa),
    ]);
    ok(&[
        "estimate",
        "--ensemble",
        s(&b),
        "--window",
        "5",
        "--stride",
        "6",
        "-o",
        s(&pb),
    ]);
    let out = nsgrf(&["metrics", "--estimate", s(&pa), "--truth", s(&pb)]);
    assert_ne!(out.status.code(), Some(0));

    // An ensemble file has no parameter images to simulate from.
    let out = nsgrf(&[
        "simulate",
        "--params",
        s(&a),
        "-o",
        s(&dir.path().join("x.h5")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/samples/0/params"));
}

fn round(v: f64) -> f64 {
    if v.abs() < 1e-9 || !v.is_finite() {
        return if v.is_finite() { 0.0 } else { v };
    }
    let scale = 10f64.powi(5 - v.abs().log10().floor() as i32);
    (v * scale).round() / scale
}

fn summary(values: &[f64]) -> Value {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    json!({ "mean": round(mean), "sd": round(sd), "min": round(min), "max": round(max) })
}

/// Seeded end-to-end run reduced to rounded summary statistics. Set
/// `NSGRF_BLESS=1` to rewrite the snapshot.
#[test]
fn pipeline_snapshot() {
    let dir = tempdir().unwrap();
    let p = |n: &str| dir.path().join(n);
    ok(&[
        "gen-dataset",
        "--config",
        s(&small_config()),
        "-o",
        s(&p("d.h5")),
        "--n-samples",
        "1",
        "--replicates",
        "8",
    ]);
    ok(&[
        "simulate",
        "--params",
        s(&p("d.h5")),
        "-m",
        "8",
        "--seed",
        "3",
        "-o",
        s(&p("e.h5")),
    ]);
    ok(&[
        "estimate",
        "--ensemble",
        s(&p("e.h5")),
        "--window",
        "9",
        "--stride",
        "8",
        "-o",
        s(&p("est.h5")),
    ]);
    ok(&[
        "metrics",
        "--estimate",
        s(&p("est.h5")),
        "--truth",
        s(&p("d.h5")),
        "--json",
        s(&p("m.json")),
    ]);
    ok(&[
        "eval-cov",
        "--truth",
        s(&p("d.h5")),
        "--sim",
        s(&p("e.h5")),
        "--anchors",
        "10",
        "--seed",
        "1",
        "--json",
        s(&p("c.json")),
    ]);

    let ds = read_dataset(p("d.h5")).unwrap();
    let sample = ds.sample(0).unwrap();
    let ens = ContainerReader::open(p("e.h5")).unwrap().fields(0).unwrap();
    let est = ContainerReader::open(p("est.h5"))
        .unwrap()
        .params(0)
        .unwrap();
    let metrics: Value =
        serde_json::from_str(&std::fs::read_to_string(p("m.json")).unwrap()).unwrap();
    let cov: Value = serde_json::from_str(&std::fs::read_to_string(p("c.json")).unwrap()).unwrap();
    let channel_rmse: Vec<f64> = metrics["report"]["channels"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| round(c["rmse"].as_f64().unwrap()))
        .collect();
    let snapshot = json!({
        "dataset_params": summary(&sample.params.to_channels()),
        "dataset_fields": summary(sample.fields.as_slice()),
        "ensemble": summary(ens.as_slice()),
        "estimate": summary(&est.to_channels()),
        "rmse": channel_rmse,
        "cov_mean_rmse": round(cov["report"]["mean_rmse"].as_f64().unwrap()),
    });

    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/pipeline.json");
    let text = serde_json::to_string_pretty(&snapshot).unwrap() + "\n";
    if std::env::var_os("NSGRF_BLESS").is_some() {
        std::fs::create_dir_all(golden.parent().unwrap()).unwrap();
        std::fs::write(&golden, &text).unwrap();
    }
    let expected: Value = serde_json::from_str(&std::fs::read_to_string(&golden).unwrap()).unwrap();
    assert_eq!(snapshot, expected, "snapshot drifted:\n{text}");
}
