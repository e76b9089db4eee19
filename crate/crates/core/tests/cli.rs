use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn szego(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_szego")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stderr)))
}

/// Drops the timing block, the only part allowed to differ between runs.
fn without_timing(mut v: Value) -> Value {
    v["provenance"].as_object_mut().unwrap().remove("timing");
    v
}

#[test]
fn pseudoconvexity_exit_codes() {
    let o = szego(&["pseudoconvexity", "--A", "0", "--B", "1", "--alpha", "1"]);
    assert_eq!(code(&o), 0);
    assert_eq!(json(&o)["result"]["verdict"], "PASS");
    assert_eq!(code(&szego(&["pseudoconvexity", "--A", "2", "--B", "3", "--alpha", "1"])), 0);
    let bad = szego(&["pseudoconvexity", "--B", "-1"]);
    assert_eq!(code(&bad), 2);
    assert!(String::from_utf8_lossy(&bad.stderr).contains("B must be"));
    assert_eq!(code(&szego(&["pseudoconvexity", "--precision-bits", "32"])), 2);
    assert_eq!(code(&szego(&["no-such-command"])), 2);
}

#[test]
fn dz_certificates() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cert.json");
    let o = szego(&["dz-certify", "--order", "8", "--out", path.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let cert: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(cert["result"]["valid"], true);
    assert_eq!(cert["result"]["orders"].as_array().unwrap().len(), 9);
    assert_eq!(cert["result"]["orders"][1]["tail"]["threshold"], serde_json::json!({"num": "1", "den": "1"}));

    let o = szego(&["dz-certify", "--A", "1", "--B", "2", "--alpha", "1", "--order", "4"]);
    assert_eq!(code(&o), 0);
    assert_eq!(json(&o)["result"]["valid"], true);

    let o = szego(&["dz-certify", "--A", "0.5", "--B", "1", "--alpha", "1.5"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("integer alpha"));
}

#[test]
fn irregularity_modes() {
    let o = szego(&["irregularity"]);
    assert_eq!(code(&o), 0);
    let v = json(&o);
    let verdicts: Vec<&str> = v["result"]["scans"].as_array().unwrap().iter().map(|s| s["verdict"].as_str().unwrap()).collect();
    assert_eq!(verdicts, ["UNBOUNDED_TREND", "BOUNDED_PLATEAU", "UNBOUNDED_TREND"]);

    let o = szego(&["irregularity", "--p", "2", "--n", "1,4,16", "--format", "csv"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    let mut rows = csv::Reader::from_reader(text.as_bytes());
    assert_eq!(rows.headers().unwrap().iter().collect::<Vec<_>>(), ["p", "n", "R_n", "log R_n", "sqrt n"]);
    for r in rows.records() {
        let r = r.unwrap();
        assert!((r[2].parse::<f64>().unwrap() - 1.0).abs() < 1e-15, "{r:?}");
    }

    let o = szego(&["irregularity", "--weight", "poly2", "--p", "4"]);
    assert_eq!(code(&o), 0);
    let v = json(&o);
    assert_eq!(v["result"]["contrast"], true);
    assert_eq!(v["result"]["scans"][0]["verdict"], "BOUNDED_PLATEAU");

    // three points stop below the growth threshold: inconclusive, exit 1
    assert_eq!(code(&szego(&["irregularity", "--p", "4", "--n", "16,64,256"])), 1);
}

#[test]
fn identity_checks_and_cache() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("fresh/cache");
    let cache_s = cache.to_str().unwrap();
    let o = szego(&["identity-checks", "--precision-bits", "128", "--cache-dir", cache_s]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(cache.is_dir());
    assert_eq!(code(&szego(&["identity-checks", "--precision-bits", "128", "--cache-dir", cache_s, "--tol", "1e-2"])), 0);

    let entry = std::fs::read_dir(&cache).unwrap().map(|e| e.unwrap().path()).find(|p| p.extension().is_some_and(|e| e == "json")).unwrap();
    let text = std::fs::read_to_string(&entry).unwrap();
    std::fs::write(&entry, text.replacen("\"n\": 1,", "\"n\": 7,", 1)).unwrap();
    let o = szego(&["identity-checks", "--precision-bits", "128", "--cache-dir", cache_s]);
    assert_ne!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stderr).contains("integrity"));
}

#[test]
fn moments_and_kernel_eval() {
    let o = szego(&["moments", "--n", "4", "--format", "csv", "--precision-bits", "128"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).lines().count(), 6);
    let o = szego(&["kernel-eval", "--z", "0.3,0.1", "--t", "0.2,-0.4", "--n", "120", "--precision-bits", "128"]);
    assert_eq!(code(&o), 0);
    assert_eq!(json(&o)["result"]["kernel"], "bergman");
    let o = szego(&["kernel-eval", "--z", "0.1;0.01", "--t", "0.2,0.1;0,0.02", "--j", "12", "--n", "60", "--precision-bits", "128", "--tol", "1e-20"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(json(&o)["result"]["kernel"], "szego");
    assert_eq!(code(&szego(&["kernel-eval", "--z", "0.1"])), 2);
}

fn write_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("run.conf");
    std::fs::write(&path, "# scan settings\nA = 0\nB = 1\nalpha = 1\np = 4\nn = 16,64\nformat = csv\n").unwrap();
    path
}

#[test]
fn config_file_and_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let conf = write_config(dir.path());
    let o = szego(&["irregularity", "--config", conf.to_str().unwrap()]);
    assert!(stdout(&o).starts_with("p,n,R_n"));
    let o = szego(&["irregularity", "--config", conf.to_str().unwrap(), "--format", "json"]);
    let v = json(&o);
    assert_eq!(v["config"]["options"]["n"], serde_json::json!([16, 64]));
    std::fs::write(&conf, "colour = red\n").unwrap();
    assert_eq!(code(&szego(&["irregularity", "--config", conf.to_str().unwrap()])), 2);
}

#[test]
fn report_is_deterministic_and_csv_is_tables_only() {
    let args = ["report", "--precision-bits", "128", "--order", "4", "--samples", "100", "--grid", "2000"];
    let a = szego(&args);
    assert_eq!(code(&a), 0, "{}", String::from_utf8_lossy(&a.stderr));
    let b = szego(&args);
    assert_eq!(without_timing(json(&a)), without_timing(json(&b)));
    assert_eq!(json(&a)["result"]["verdict"], "PASS");

    let mut csv_args = args.to_vec();
    csv_args.extend(["--format", "csv"]);
    let text = stdout(&szego(&csv_args));
    assert!(text.starts_with("n,j,boundary,table,rel_err,verdict\n"));
    assert!(text.contains("\np,n,R_n,log R_n,sqrt n\n"));
    assert!(!text.contains("provenance"));

    let mut md_args = args.to_vec();
    md_args.extend(["--format", "markdown"]);
    let md = stdout(&szego(&md_args));
    let order: Vec<usize> =
        ["Pseudoconvexity", "Inflation consistency", "sign certificate", "Lower bounds", "Verdict"].iter().map(|h| md.find(h).unwrap()).collect();
    assert!(order.windows(2).all(|w| w[0] < w[1]));
}
