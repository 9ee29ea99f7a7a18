use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn sdalab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sdalab"))
        .args(args)
        .env_remove("SDALAB_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = sdalab(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn scratch_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("sdalab-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

/// Data rows of a CSV document, after the config line and the header.
fn rows(csv: &str) -> Vec<Vec<String>> {
    assert!(csv.starts_with("# config={"));
    let body = csv.split_once("\r\n").unwrap().1;
    let mut r = csv::Reader::from_reader(body.as_bytes());
    r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect()
}

/// Distinct convergent denominators of `p/q` from its continued fraction.
fn cf_denominators(mut p: u64, mut q: u64) -> Vec<u64> {
    let (mut k0, mut k1) = (1u64, 0u64);
    let mut out = Vec::new();
    while q != 0 {
        let a = p / q;
        (p, q) = (q, p - a * q);
        (k0, k1) = (k1, a * k1 + k0);
        if k1 > 0 && out.last() != Some(&k1) {
            out.push(k1);
        }
    }
    out
}

#[test]
fn fibonacci_records_match_convergents() {
    let csv = ok(&["bestapprox", "--d", "1", "--c", "1", "--theta", "832040/1346269", "--qmax", "1400000"]);
    let qs: Vec<u64> = rows(&csv).iter().map(|r| r[1].parse().unwrap()).collect();
    assert_eq!(qs, cf_denominators(832040, 1346269));
    // 832040 ties with 514229 at distance 1/1346269, so it is not a record
    assert_eq!(qs.len(), 29);
    assert_eq!(*qs.last().unwrap(), 1346269);
    assert!(!qs.contains(&832040));
    let last = rows(&csv).pop().unwrap();
    assert_eq!(last[4], "0/1");
}

#[test]
fn scan_and_chain_agree_on_the_cli() {
    let base = ["bestapprox", "--d", "1", "--c", "1", "--theta", "832040/1346269", "--qmax", "1400000"];
    let chain = ok(&base);
    let scan = ok(&[&base[..], &["--engine", "scan"]].concat());
    assert_eq!(rows(&chain), rows(&scan));
}

#[test]
fn half_third_has_three_records() {
    let csv = ok(&["bestapprox", "--d", "2", "--c", "1", "--theta", "1/2,1/3", "--qmax", "6"]);
    let r = rows(&csv);
    let got: Vec<(&str, &str)> = r.iter().map(|r| (r[1].as_str(), r[5].as_str())).collect();
    assert_eq!(got, vec![("1", "13/36"), ("2", "1/9"), ("6", "0/1")]);
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(sdalab(&["bestapprox", "--qmax", "10"]).status.code(), Some(2));
    assert_eq!(sdalab(&["bestapprox", "--theta", "1/0", "--qmax", "10"]).status.code(), Some(2));
    assert_eq!(sdalab(&["bestapprox", "--theta", "1/3"]).status.code(), Some(2));
    assert_eq!(sdalab(&["levy", "--d", "0"]).status.code(), Some(2));
    assert_eq!(sdalab(&["nonsense"]).status.code(), Some(2));
}

#[test]
fn scan_budget_exits_3() {
    let out = sdalab(&["bestapprox", "--theta", "1/7", "--qmax", "1000000000", "--engine", "scan"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn levy_summary_reports_target() {
    let out = ok(&["levy", "--trials", "8", "--depth", "30", "--seed", "3"]);
    let v: Value = serde_json::from_str(&out).unwrap();
    let target = v["target"].as_f64().unwrap();
    assert!((target - 1.1865691104156254).abs() < 1e-12);
    let err = v["abs_error"].as_f64().unwrap();
    assert!((err - (v["l_hat"].as_f64().unwrap() - target).abs()).abs() < 1e-15);
    assert_eq!(v["config"]["seed"], 3);

    let out = ok(&["levy", "--d", "2", "--c", "1", "--trials", "4", "--depth", "20", "--bits", "128", "--seed", "3"]);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["target"].as_f64().unwrap(), 1.135256974);
}

#[test]
fn same_seed_same_bytes() {
    let args = ["levy", "--trials", "6", "--depth", "24", "--seed", "11"];
    assert_eq!(ok(&args), ok(&args));
    let args = ["returnmap", "--n", "50", "--seed", "5"];
    assert_eq!(ok(&args), ok(&args));
}

#[test]
fn missing_seed_is_generated_and_printed() {
    let out = sdalab(&["returnmap", "--n", "5"]);
    assert!(out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    let seed: u64 = err.trim().strip_prefix("seed=").unwrap().parse().unwrap();
    let csv = String::from_utf8(out.stdout).unwrap();
    assert!(csv.lines().next().unwrap().contains(&format!("\"seed\":{seed}")));
}

#[test]
fn surface_prints_closed_form_and_quadrature() {
    let v: Value = serde_json::from_str(&ok(&["surface", "--d", "1"])).unwrap();
    let exact = v["mu_s_exact"].as_f64().unwrap();
    assert_eq!(exact, 2.0 * std::f64::consts::LN_2);
    assert!((v["mu_s_quadrature"].as_f64().unwrap() - exact).abs() < 1e-6);
}

#[test]
fn surface_mc_runs_in_two_dimensions() {
    let v: Value = serde_json::from_str(&ok(&["surface", "--d", "2", "--samples", "2000", "--seed", "1"])).unwrap();
    assert!(v["mu_s_hat"].as_f64().unwrap() > 0.0);
    assert!(v["accept_rate"].as_f64().unwrap() > 0.0);
}

#[test]
fn returnmap_deltas_are_tiny() {
    let csv = ok(&["returnmap", "--n", "1000", "--seed", "7"]);
    let r = rows(&csv);
    assert_eq!(r.len(), 1000);
    for row in &r {
        assert!(row[11].parse::<f64>().unwrap() < 1e-9, "delta {}", row[11]);
        assert_eq!(row[6], row[9], "ε disagrees");
    }
}

#[test]
fn dist_table_has_oracle_column() {
    let dir = scratch_dir("dist");
    let out = ok(&["dist", "--trials", "20", "--depth", "40", "--seed", "2", "--out-dir", dir.to_str().unwrap()]);
    let r = rows(&out);
    assert_eq!(r.len(), 201);
    assert_eq!(r[0][2].parse::<f64>().unwrap(), 0.0);
    assert_eq!(r[200][2].parse::<f64>().unwrap(), 1.0);
    let summary: Value = serde_json::from_str(&std::fs::read_to_string(dir.join("dist_summary.json")).unwrap()).unwrap();
    assert!(summary["ks"].as_f64().unwrap() < 0.2);
    assert_eq!(summary["support_violations"], 0);
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn badk_certificate_is_complete() {
    let v: Value = serde_json::from_str(&ok(&["badk", "--steps", "10"])).unwrap();
    let cert = &v["certificate"];
    let steps = cert["steps"].as_array().unwrap();
    assert_eq!(steps.len(), 11);
    for s in &steps[1..] {
        let ids: Vec<u64> = s["conditions"].as_array().unwrap().iter().map(|c| c["id"].as_u64().unwrap()).collect();
        assert_eq!(ids, (1..=7).collect::<Vec<_>>());
    }
    assert_eq!(cert["drop_holds"], true);
    assert_eq!(cert["floor_holds"], true);
}

#[test]
fn outputs_replay_byte_identically() {
    let dir = scratch_dir("replay");
    let d = dir.to_str().unwrap();
    ok(&["levy", "--trials", "5", "--depth", "20", "--seed", "9", "--out-dir", d]);
    ok(&["bestapprox", "--seed", "4", "--count", "12", "--out-dir", d]);
    for name in ["levy_summary.json", "levy_trials.csv", "bestapprox.csv"] {
        let path = dir.join(name);
        let original = std::fs::read_to_string(&path).unwrap();
        let again = dir.join("again");
        ok(&["replay", path.to_str().unwrap(), "--out-dir", again.to_str().unwrap()]);
        assert_eq!(std::fs::read_to_string(again.join(name)).unwrap(), original, "{name}");
    }
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn env_var_sets_the_output_directory() {
    let dir = scratch_dir("env");
    let out = Command::new(env!("CARGO_BIN_EXE_sdalab"))
        .args(["bestapprox", "--theta", "1/3", "--qmax", "5"])
        .env("SDALAB_OUT_DIR", &dir)
        .output()
        .unwrap();
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.join("bestapprox.csv")).unwrap();
    assert_eq!(csv, String::from_utf8(out.stdout).unwrap());
    let qs: Vec<String> = rows(&csv).into_iter().map(|r| r[1].clone()).collect();
    assert_eq!(qs, ["1", "3"]);
    let _ = std::fs::remove_dir_all(&dir);
}
