use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hetq::config::system_config_toml;
use hetq::format::load_qmq;
use hetq::manifest::{manifest_path, RunManifest};
use hetq_core::SystemConfig;
use serde_json::Value;

fn hetq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hetq"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = hetq(args);
    assert!(
        out.status.success(),
        "{:?} failed: {}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    hetq(args).status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Work {
    dir: tempfile::TempDir,
}

impl Work {
    fn new() -> Self {
        Self {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn sample(&self) -> PathBuf {
        let p = self.path("sample.qmt");
        ok(&["gen-sample", "--out", s(&p), "--seed", "3"]);
        p
    }

    fn config(&self, name: &str, cfg: &SystemConfig) -> PathBuf {
        let p = self.path(name);
        std::fs::write(&p, system_config_toml(cfg)).unwrap();
        p
    }
}

#[test]
fn quantize_reports_expected_compression() {
    let w = Work::new();
    let input = w.sample();
    let out = w.path("q.qmq");
    let text = ok(&[
        "quantize", "--input", s(&input), "--out", s(&out), "--rho", "0.3", "--inlier-bits", "3",
        "--outlier-bits", "5",
    ]);
    let v: Value = serde_json::from_str(&text).unwrap();
    assert!((v["compression"].as_f64().unwrap() - 4.444).abs() < 1e-3);
    for t in v["tensors"].as_array().unwrap() {
        assert!((t["compression"].as_f64().unwrap() - 4.444).abs() < 1e-3);
        assert!(t["mse"].as_f64().unwrap() > 0.0);
    }
    assert_eq!(load_qmq(&out).unwrap().len(), 4);
    assert!(manifest_path(&out).exists());
}

#[test]
fn rho_zero_leaves_outlier_payload_empty() {
    let w = Work::new();
    let input = w.sample();
    let out = w.path("q.qmq");
    ok(&["quantize", "--input", s(&input), "--out", s(&out), "--rho", "0"]);
    for q in load_qmq(&out).unwrap() {
        assert!(q.outlier_indices.is_empty());
        assert!(q.outlier_codes.is_empty());
    }
}

#[test]
fn exit_codes() {
    let w = Work::new();
    let input = w.sample();
    let out = w.path("q.qmq");
    assert_eq!(code(&["quantize", "--input", s(&input), "--out", s(&out), "--rho", "1.5"]), 2);
    assert_eq!(code(&["quantize", "--input", s(&input), "--out", s(&out), "--inlier-bits", "1"]), 2);
    assert_eq!(code(&["quantize", "--input", s(&input)]), 2);
    assert_eq!(code(&["no-such-command"]), 2);
    assert_eq!(code(&["quantize", "--input", s(&w.path("missing.qmt")), "--out", s(&out)]), 3);

    let junk = w.path("junk.qmt");
    std::fs::write(&junk, b"XXXX\x01\0\0\0\0\0\0\0").unwrap();
    assert_eq!(code(&["quantize", "--input", s(&junk), "--out", s(&out)]), 3);

    assert_eq!(code(&["dse", "--power-budget-mw", "0"]), 4);
    let broke = w.config("broke.toml", &SystemConfig { power_budget_mw: 0.0, ..SystemConfig::default() });
    assert_eq!(code(&["dse", "--config", s(&broke)]), 4);
}

#[test]
fn report_ratios() {
    let w = Work::new();
    let v: Value = serde_json::from_str(&ok(&["report"])).unwrap();
    assert_eq!(
        (v["external_transfer_reduction"].as_f64().unwrap() * 100.0).round() / 100.0,
        7.62
    );
    assert_eq!(v["bottleneck"], "reram");

    let fp16 = w.config("fp16.toml", &SystemConfig::fp16_reference());
    let v: Value = serde_json::from_str(&ok(&["report", "--config", s(&fp16)])).unwrap();
    for key in [
        "compression_ratio",
        "cell_reduction",
        "external_transfer_reduction",
        "energy_reduction",
        "latency_reduction",
    ] {
        assert!((v[key].as_f64().unwrap() - 1.0).abs() < 1e-12, "{key} = {}", v[key]);
    }

    let two = w.config("two.toml", &SystemConfig { mlc_bits: 2, ..SystemConfig::default() });
    let v: Value = serde_json::from_str(&ok(&["report", "--config", s(&two)])).unwrap();
    assert_eq!((v["cell_reduction"].as_f64().unwrap() * 100.0).floor() / 100.0, 6.27);
}

#[test]
fn report_key_order_is_fixed() {
    let text = ok(&["report"]);
    let keys: Vec<&str> = text
        .lines()
        .filter_map(|l| l.trim().strip_prefix('"'))
        .map(|l| l.split('"').next().unwrap())
        .collect();
    assert_eq!(keys.first(), Some(&"bits_per_weight"));
    assert_eq!(keys.last(), Some(&"power_feasible"));
    assert_eq!(keys.len(), 22);
}

#[test]
fn report_missing_field_exits_2() {
    let w = Work::new();
    let text: String = system_config_toml(&SystemConfig::default())
        .lines()
        .filter(|l| !l.starts_with("rho"))
        .map(|l| format!("{l}\n"))
        .collect();
    let p = w.path("cut.toml");
    std::fs::write(&p, text).unwrap();
    let out = hetq(&["report", "--config", s(&p)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("rho"));
}

#[test]
fn default_config_feeds_report() {
    let w = Work::new();
    let p = w.path("default.toml");
    ok(&["default-config", "--out", s(&p)]);
    assert_eq!(ok(&["report", "--config", s(&p)]), ok(&["report"]));
}

#[test]
fn sweep_has_u_shaped_latency() {
    let w = Work::new();
    let out = w.path("sweep.csv");
    ok(&["sweep", "--rho", "0.1,0.2,0.3,0.4,0.5", "--out", s(&out)]);
    let mut r = csv::Reader::from_path(&out).unwrap();
    let headers = r.headers().unwrap().clone();
    assert_eq!(
        headers.iter().collect::<Vec<_>>(),
        vec!["rho", "mse", "normalized_energy", "normalized_latency", "mram_channels", "reram_arrays", "bottleneck"]
    );
    let lat: Vec<f64> = r.records().map(|rec| rec.unwrap()[3].parse().unwrap()).collect();
    assert_eq!(lat.len(), 5);
    let min = lat.iter().cloned().fold(f64::INFINITY, f64::min);
    assert_eq!(lat[2], min);
    assert!(lat[0] > min && lat[4] > min);
}

#[test]
fn dse_writes_best_and_pareto() {
    let w = Work::new();
    let out = w.path("dse.json");
    ok(&["dse", "--out", s(&out)]);
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["best"]["point"]["mram_channels"], 4);
    assert_eq!(v["best"]["point"]["reram_arrays"], 93);
    assert_eq!(v["pareto"][0], v["best"]);
    assert_eq!(v["candidates"], 5 * 97);
}

#[test]
fn inject_is_deterministic_per_seed() {
    let w = Work::new();
    let input = w.sample();
    let q = w.path("q.qmq");
    ok(&["quantize", "--input", s(&input), "--out", s(&q)]);
    let a = w.path("a.qmq");
    let b = w.path("b.qmq");
    let c = w.path("c.qmq");
    ok(&["inject", "--input", s(&q), "--out", s(&a), "--seed", "7"]);
    ok(&["inject", "--input", s(&q), "--out", s(&b), "--seed", "7"]);
    ok(&["inject", "--input", s(&q), "--out", s(&c), "--seed", "8"]);
    let (ba, bb, bc) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap(), std::fs::read(&c).unwrap());
    assert_eq!(ba, bb);
    assert_ne!(ba, bc);
    assert_ne!(ba, std::fs::read(&q).unwrap());

    // Outliers live in MRAM and are untouched.
    let clean = load_qmq(&q).unwrap();
    let noisy = load_qmq(&a).unwrap();
    for (x, y) in clean.iter().zip(&noisy) {
        assert_eq!(x.outlier_codes, y.outlier_codes);
        assert_eq!(x.inlier_scales, y.inlier_scales);
    }

    let cell = w.path("cell.qmq");
    ok(&["inject", "--input", s(&q), "--out", s(&cell), "--mode", "cell", "--seed", "7"]);
    assert_eq!(
        code(&["inject", "--input", s(&q), "--out", s(&cell), "--mode", "cell", "--mlc-bits", "3"]),
        2
    );
}

#[test]
fn noise_file_and_seed_precedence() {
    let w = Work::new();
    let input = w.sample();
    let q = w.path("q.qmq");
    ok(&["quantize", "--input", s(&input), "--out", s(&q)]);
    let noise = w.path("noise.toml");
    std::fs::write(&noise, "mlc_bits = 3\np_minus = 0.2\np_plus = 0.2\nseed = 5\n").unwrap();
    let a = w.path("a.qmq");
    let b = w.path("b.qmq");
    ok(&["inject", "--input", s(&q), "--out", s(&a), "--noise", s(&noise)]);
    ok(&["inject", "--input", s(&q), "--out", s(&b), "--noise", s(&noise), "--seed", "5"]);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let m = RunManifest::load(manifest_path(&a)).unwrap();
    assert_eq!(m.seed, Some(5));
    assert_eq!(m.inputs, vec![q.clone(), noise.clone()]);

    std::fs::write(&noise, "mlc_bits = 3\np_minus = 0.2\n").unwrap();
    assert_eq!(code(&["inject", "--input", s(&q), "--out", s(&a), "--noise", s(&noise)]), 2);
}

#[test]
fn replay_reproduces_outputs_byte_for_byte() {
    let w = Work::new();
    let input = w.sample();
    let q = w.path("q.qmq");
    let n = w.path("n.qmq");
    let csv = w.path("s.csv");
    let dse = w.path("d.json");
    ok(&["quantize", "--input", s(&input), "--out", s(&q), "--rho", "0.25"]);
    ok(&["inject", "--input", s(&q), "--out", s(&n), "--seed", "11"]);
    ok(&["sweep", "--input", s(&input), "--rho", "0.2,0.4", "--out", s(&csv)]);
    ok(&["dse", "--out", s(&dse)]);

    for out in [&input, &q, &n, &csv, &dse] {
        let before = std::fs::read(out).unwrap();
        let manifest_before = std::fs::read(manifest_path(out)).unwrap();
        std::fs::remove_file(out).unwrap();
        ok(&["replay", "--manifest", s(&manifest_path(out))]);
        assert_eq!(std::fs::read(out).unwrap(), before, "{}", out.display());
        assert_eq!(std::fs::read(manifest_path(out)).unwrap(), manifest_before);
    }
}
