use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn dtqw(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dtqw"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn ok(args: &[&str], out: &Path) {
    let o = dtqw(args, out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect()
}

/// step -> probabilities by site.
fn distributions(path: &Path) -> BTreeMap<usize, Vec<f64>> {
    let mut by_step: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for row in rows(path) {
        let step: usize = row[0].parse().unwrap();
        let site: usize = row[1].parse().unwrap();
        let probs = by_step.entry(step).or_default();
        assert_eq!(probs.len(), site);
        probs.push(row[3].parse().unwrap());
    }
    by_step
}

#[test]
fn simulate_is_byte_identical_across_runs() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let cfg = configs().join("d31.ini");
    let args = [
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--optimize-first",
        "--restarts",
        "4",
        "--seed",
        "9",
    ];
    ok(&args, a.path());
    ok(&args, b.path());
    for name in [
        "distributions_exact.csv",
        "distributions_standard.csv",
        "metrics.csv",
        "summary.json",
        "snapshot.svg",
    ] {
        assert_eq!(
            fs::read(a.path().join(name)).unwrap(),
            fs::read(b.path().join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn single_restart_optimization_is_reproducible() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let args = ["optimize", "--restarts", "1", "--seed", "123"];
    ok(&args, a.path());
    ok(&args, b.path());
    let (x, y) = (
        json(&a.path().join("optimization.json")),
        json(&b.path().join("optimization.json")),
    );
    assert_eq!(x, y);
    assert_eq!(x["best_restart_seed"], 123);
    assert_eq!(x["trace"].as_array().unwrap().len(), 1);
}

#[test]
fn drift_only_step_rotates_the_initial_distribution() {
    let out = TempDir::new().unwrap();
    ok(
        &["simulate", "--steps", "1", "--set", "omega_tau=0"],
        out.path(),
    );
    let dists = distributions(&out.path().join("distributions_exact.csv"));
    let (p0, p1) = (&dists[&0], &dists[&1]);
    let d = p0.len();
    for m in 0..d {
        assert!((p1[(m + 1) % d] - p0[m]).abs() < 1e-12);
    }
}

#[test]
fn csv_rows_match_step_count_and_sum_to_one() {
    let out = TempDir::new().unwrap();
    ok(
        &[
            "simulate",
            "--steps",
            "7",
            "--set",
            "d=40",
            "--set",
            "alpha_re=-3",
        ],
        out.path(),
    );
    for name in ["distributions_exact.csv", "distributions_standard.csv"] {
        let dists = distributions(&out.path().join(name));
        assert_eq!(dists.len(), 8);
        for probs in dists.values() {
            assert_eq!(probs.len(), 40);
            assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
    assert_eq!(rows(&out.path().join("metrics.csv")).len(), 8);
}

#[test]
fn manifest_lists_every_emitted_file() {
    let out = TempDir::new().unwrap();
    ok(&["compare", "--steps", "10"], out.path());
    let manifest = json(&out.path().join("manifest.json"));
    assert_eq!(manifest["command"], "compare");
    let mut listed: Vec<String> = manifest["emitted_files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f["path"].as_str().unwrap().to_string())
        .collect();
    let mut present: Vec<String> = fs::read_dir(out.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    listed.sort();
    present.sort();
    assert_eq!(listed, present);
    assert_eq!(manifest["config"]["d"], 31);
}

#[test]
fn noiseless_compare_agrees_with_simulate() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let cfg = configs().join("d31_optimized.ini");
    let cfg = cfg.to_str().unwrap();
    ok(&["simulate", "--config", cfg, "--steps", "20"], a.path());
    ok(&["compare", "--config", cfg, "--steps", "20"], b.path());
    assert_eq!(
        fs::read(a.path().join("metrics.csv")).unwrap(),
        fs::read(b.path().join("metrics.csv")).unwrap()
    );
}

#[test]
fn long_compare_run_keeps_hellinger_bounded() {
    let out = TempDir::new().unwrap();
    let cfg = configs().join("d31_optimized.ini");
    ok(&["compare", "--config", cfg.to_str().unwrap()], out.path());
    let summary = json(&out.path().join("compare.json"));
    let steps = summary["steps"].as_u64().unwrap();
    assert!(steps >= 4 * summary["pi_horizon"].as_u64().unwrap());
    assert!(summary["max_hellinger"].as_f64().unwrap() <= 0.5);
    assert!(summary["mean_negativity_gap"].as_f64().unwrap() <= 0.1);
    for panel in ["hellinger.csv", "std.csv", "negativity.csv"] {
        assert_eq!(rows(&out.path().join(panel)).len() as u64, steps + 1);
    }
}

#[test]
fn decohere_reports_ballistic_and_diffusive_fits() {
    let out = TempDir::new().unwrap();
    let cfg = configs().join("d31_optimized.ini");
    ok(
        &[
            "decohere",
            "--config",
            cfg.to_str().unwrap(),
            "--p-list",
            "0,1",
            "--steps",
            "40",
        ],
        out.path(),
    );
    let summary = json(&out.path().join("decohere.json"));
    let points = summary["points"].as_array().unwrap();
    assert_eq!(points.len(), 2);
    assert!(
        points[0]["pre_wrap_linear_approx"]["r_squared"]
            .as_f64()
            .unwrap()
            >= 0.98
    );
    assert!(points[1]["hellinger_spearman"].as_f64().unwrap() < 0.0);
    assert_eq!(rows(&out.path().join("decohere_std.csv")).len(), 2 * 41);
}

#[test]
fn r_sweep_objectives_do_not_increase_for_the_small_setup() {
    let out = TempDir::new().unwrap();
    let cfg = configs().join("d31.ini");
    ok(
        &[
            "optimize",
            "--config",
            cfg.to_str().unwrap(),
            "--r-sweep",
            "--jobs",
            "2",
        ],
        out.path(),
    );
    let sweep = json(&out.path().join("sweep.json"));
    let objectives: Vec<f64> = sweep
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p["objective"].as_f64().unwrap())
        .collect();
    assert_eq!(objectives.len(), 5);
    assert!(
        objectives.windows(2).all(|w| w[1] <= w[0]),
        "{objectives:?}"
    );
    assert!(out.path().join("errors_r10.csv").exists());
}

#[test]
fn config_errors_exit_with_code_2() {
    let out = TempDir::new().unwrap();
    let bad = out.path().join("bad.ini");
    fs::write(&bad, "d = 31\nsites = 4\n").unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["simulate", "--config", bad.to_str().unwrap()],
        vec!["simulate", "--set", "d=1"],
        vec!["decohere", "--p-list", "0,2"],
        vec!["simulate", "--config", "/nonexistent/config.ini"],
        vec![
            "simulate",
            "--set",
            "window_start=5",
            "--set",
            "window_end=2",
        ],
    ];
    for args in cases {
        let o = dtqw(&args, &out.path().join("x"));
        assert_eq!(
            o.status.code(),
            Some(2),
            "{args:?}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        assert!(!o.stderr.is_empty());
    }
}
