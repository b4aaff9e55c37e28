use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn neohook(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_neohook"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path).unwrap().records().map(Result::unwrap).collect()
}

fn column(path: &Path, name: &str) -> Vec<String> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().clone();
    let i = header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name} in {header:?}"));
    rows(path).iter().map(|r| r[i].to_owned()).collect()
}

#[test]
fn identity_energy_total() {
    let tmp = tempfile::tempdir().unwrap();
    let o = neohook(&["energy", "--map", "identity", "--p", "2", "--q", "1", "--area", "1"], tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let total: f64 = column(&tmp.path().join("energy.csv"), "total")[0].parse().unwrap();
    assert!((total - 3.0).abs() < 1e-12, "{total}");
}

#[test]
fn feasible_pinch_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let o = neohook(&["pinch", "--a", "-0.3", "--b", "0.75", "--p", "3", "--q", "2"], tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(tmp.path().join("pinch.svg").exists());
    let nh = tmp.path().join("nh");
    let o = neohook(&["verify", "--check", "nh", "--map", "pinch:a=-0.3,b=0.75", "--p", "3", "--q", "2", "--samples", "256", "--target-cells", "32"], &nh);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(column(&nh.join("nh.csv"), "map"), ["pinch:a=-0.3,b=0.75"]);
    assert_eq!(column(&tmp.path().join("pinch.csv"), "status"), ["converged"]);
}

#[test]
fn infeasible_pinch_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = neohook(&["pinch", "--a", "-0.5", "--b", "0.75", "--p", "3", "--q", "2"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("a = -0.5 ⩽ −1/p"), "{err}");
}

#[test]
fn cantor_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let o = neohook(&["cantor", "--depth", "3"], tmp.path());
    assert!(o.status.success());
    let gens = rows(&tmp.path().join("generations.csv"));
    let counts: Vec<&str> = gens.iter().map(|r| &r[1]).collect();
    assert_eq!(counts, ["1", "4", "16", "64"]);
    let svg = fs::read_to_string(tmp.path().join("cantor.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.matches("<rect").count() > 64);
}

#[test]
fn threshold_column() {
    let tmp = tempfile::tempdir().unwrap();
    let o = neohook(&["verify", "--check", "threshold", "--p", "3", "--q", "2,3,4"], tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(column(&tmp.path().join("threshold.csv"), "feasible"), ["true", "false", "false"]);
}

#[test]
fn unknown_config_key_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.cfg");
    fs::write(&cfg, "# comment\np = 2\nfoo = 1\n").unwrap();
    let o = neohook(&["energy", "--config", cfg.to_str().unwrap()], &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("foo"));
}

#[test]
fn flags_override_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.cfg");
    fs::write(&cfg, "p = 4\nq = 1\narea = 2\n").unwrap();
    let out = tmp.path().join("out");
    let o = neohook(&["energy", "--config", cfg.to_str().unwrap(), "--p", "2"], &out);
    assert!(o.status.success());
    let total: f64 = column(&out.join("energy.csv"), "total")[0].parse().unwrap();
    assert!((total - 6.0).abs() < 1e-12, "{total}");
}

#[test]
fn runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let args = ["verify", "--check", "modulus", "--map", "mobius:ak=0.5", "--pairs", "5000", "--seed", "7"];
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert!(neohook(&args, &a).status.success());
    assert!(neohook(&args, &b).status.success());
    for f in ["modulus.csv", "modulus_fit.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn manifest_covers_every_file() {
    let tmp = tempfile::tempdir().unwrap();
    let o = neohook(
        &["minimize", "--nx", "4", "--ny", "4", "--init", "perturb:0.02,1", "--snapshot-every", "5", "--max-iters", "20"],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["exit_code"], 0);
    assert_eq!(m["command"], "minimize");
    assert!(m["config"].as_str().unwrap().contains("snapshot_every = 5"));
    let listed: Vec<&str> = m["files"].as_array().unwrap().iter().map(|f| f["path"].as_str().unwrap()).collect();
    for f in ["iterations.csv", "summary.csv", "final.svg", "deformed.mesh", "snapshots/iter_000000.svg", "snapshots/iter_000005.svg"] {
        assert!(listed.contains(&f), "{f} missing from {listed:?}");
    }
    assert!(!listed.contains(&"manifest.json"));
}

#[test]
fn bad_flag_value_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = neohook(&["cantor", "--depth", "three"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
}
