//! End-to-end runs of the `al-lab` binary: exit codes, output files and
//! determinism.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_al-lab"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("al-lab-it-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    dir
}

fn run(args: &[&str], out: &Path) -> Output {
    bin().args(args).arg("--out").arg(out).output().unwrap()
}

fn data_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn spectrum_writes_outputs_and_is_deterministic() {
    let (d1, d2) = (scratch("spec1"), scratch("spec2"));
    for d in [&d1, &d2] {
        let o = run(&["spectrum", "--n", "6", "--a", "5", "--grid", "64"], d);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["spectrum.csv", "points.json"] {
        assert_eq!(fs::read(d1.join(f)).unwrap(), fs::read(d2.join(f)).unwrap(), "{f} differs");
    }
    let rows = data_rows(&d1.join("spectrum.csv"));
    assert_eq!(rows.len(), 128);
    let points = json(&d1.join("points.json"));
    assert_eq!(points["catalog"].as_array().unwrap().len(), 13);
}

#[test]
fn zero_state_discriminant_is_two_cos() {
    let d = scratch("zero");
    let o = run(&["spectrum", "--zero-state", "--grid", "32"], &d);
    assert_eq!(o.status.code(), Some(0));
    for row in data_rows(&d.join("spectrum.csv")).iter().filter(|r| r[0] == "circle") {
        let th: f64 = row[1].parse().unwrap();
        let re: f64 = row[4].parse().unwrap();
        let im: f64 = row[5].parse().unwrap();
        let expect = 2.0 * (6.0 * th).cos();
        assert!((re - expect).abs() < 1e-12 && im.abs() < 1e-12, "θ = {th}: {re} {im}");
    }
}

#[test]
fn config_errors_exit_two() {
    let d = scratch("cfg");
    let o = run(&["spectrum", "--a", "1", "--require-window"], &d);
    assert_eq!(o.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["kind"], "config");
    assert!(err["message"].as_str().unwrap().contains("N tan(π/N)"));

    assert_eq!(run(&["orbit", "--n", "2"], &d).status.code(), Some(2));
    assert_eq!(run(&["evolve", "--field", "nope"], &d).status.code(), Some(2));
    assert_eq!(run(&["spectrum", "--set", "nonsense=1"], &d).status.code(), Some(2));
    assert_eq!(bin().arg("frobnicate").output().unwrap().status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_three() {
    let d = scratch("num");
    let o = run(
        &["evolve", "--field", "perturbed", "--epsilon", "0.01", "--a", "6.93", "--t-end", "1"],
        &d,
    );
    assert_eq!(o.status.code(), Some(3));
    let err: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["kind"], "numerical");
}

#[test]
fn config_file_is_overridden_by_flags() {
    let d = scratch("file");
    fs::create_dir_all(&d).unwrap();
    let cfg = d.join("job.cfg");
    fs::write(&cfg, "n = 4\nalpha1 = 8\nalpha2 = 1\n").unwrap();
    let o = bin()
        .args(["resonance", "--config"])
        .arg(&cfg)
        .args(["--alpha1", "1", "--nxi", "64", "--ny", "32"])
        .arg("--out")
        .arg(&d)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let fp = json(&d.join("fixed_points.json"));
    assert_eq!(fp["meta"]["config"]["n"], "4");
    assert_eq!(fp["meta"]["config"]["alpha1"], "1");
}

#[test]
fn resonance_fixed_point_counts() {
    for (alpha1, count) in [("1", 4), ("8", 2)] {
        let d = scratch(&format!("res{alpha1}"));
        let o = run(&["resonance", "--alpha1", alpha1, "--alpha2", "1", "--omega", "1"], &d);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        let fp = json(&d.join("fixed_points.json"));
        assert_eq!(fp["count"], count);
        let saddles = fp["refined"].as_array().unwrap().iter().filter(|p| p["kind"] == "saddle").count();
        let polylines: std::collections::BTreeSet<String> =
            data_rows(&d.join("separatrix.csv")).into_iter().map(|r| r[0].clone()).collect();
        assert_eq!(polylines.len(), saddles);
    }
}

#[test]
fn orbit_single_sample_and_asymptotics() {
    let d = scratch("orbit");
    let o = run(&["orbit", "--n", "6", "--t-range", "0", "0"], &d);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(data_rows(&d.join("orbit.csv")).len(), 6);
    let a = json(&d.join("asymptotics.json"));
    let (rate, two_mu) = (a["decay_fit"]["rate"].as_f64().unwrap(), a["two_mu"].as_f64().unwrap());
    assert!((rate - two_mu).abs() / two_mu < 1e-2);
}

#[test]
fn melnikov_and_evolve_runs() {
    let d = scratch("mel");
    let o = run(&["melnikov", "--a-samples", "3", "--gamma-samples", "3"], &d);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(data_rows(&d.join("melnikov_grid.csv")).len(), 9);
    assert_eq!(json(&d.join("transversality.json"))["failed_cells"], 0);

    let d = scratch("evo");
    let o = run(&["evolve", "--field", "annulus", "--t-end", "5", "--samples", "11"], &d);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rep = json(&d.join("drift_report.json"));
    assert!(rep["drift"]["invariants"][0]["max_drift"].as_f64().unwrap() < 1e-8);
    assert_eq!(data_rows(&d.join("trajectory.csv")).len(), 11);
}
