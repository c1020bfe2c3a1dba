use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_coordpath");

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("COORDPATH_THREADS")
        .env_remove("COORDPATH_CONFIG")
        .env_remove("COORDPATH_OUT")
        .output()
        .expect("spawn coordpath")
}

fn circle6() -> String {
    configs().join("circle6.cfg").display().to_string()
}

/// circle6 with the given UAV block substituted for the original ones.
fn write_variant(dir: &Path, uavs: &str, limits: Option<&str>) -> String {
    let base = std::fs::read_to_string(configs().join("circle6.cfg")).unwrap();
    let head = &base[..base.find("[[uavs]]").unwrap()];
    let tail = &base[base.find("[output]").unwrap()..];
    let mut text = format!("{head}{uavs}\n{tail}");
    if let Some(l) = limits {
        let start = text.find("[limits]").unwrap();
        let end = text.find("[chi]").unwrap();
        text.replace_range(start..end, l);
    }
    let path = dir.join("variant.cfg");
    std::fs::write(&path, text).unwrap();
    path.display().to_string()
}

#[test]
fn design_params_writes_fragment() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    let o = run(&["design-params", "--config", &circle6(), "--out", out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("a*R1"));
    let frag = std::fs::read_to_string(tmp.path().join("params.toml")).unwrap();
    let headers: Vec<&str> = frag.lines().filter(|l| l.starts_with('[')).collect();
    assert_eq!(headers, ["[limits]", "[params]"]);
}

#[test]
fn zero_margin_rejected() {
    let o = run(&["design-params", "--config", &circle6(), "--c", "0"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn infeasible_limits_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    let limits = "[limits]\nv_min = 10.0\nv_max = 25.0\nomega_max = 0.2\nkappa0 = 0.01\n\n";
    let base = std::fs::read_to_string(configs().join("circle6.cfg")).unwrap();
    let uavs = &base[base.find("[[uavs]]").unwrap()..base.find("[output]").unwrap()];
    let cfg = write_variant(tmp.path(), uavs, Some(limits));
    let o = run(&["design-params", "--config", &cfg, "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn missing_config_exit_one() {
    let o = run(&["simulate", "--config", "/nonexistent/coordpath.cfg"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn unknown_suite_exit_one() {
    let o = run(&["verify", "--config", &circle6(), "--suite", "bogus"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn start_outside_universe_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_variant(tmp.path(), "[[uavs]]\nid = 1\nx = 0.0\ny = 0.0\ntheta = 0.0\n", None);
    let o = run(&["simulate", "--config", &cfg, "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn zero_duration_writes_header_only_trace() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    let o = run(&["simulate", "--config", &circle6(), "--out", out, "--duration", "0"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let trace = std::fs::read_to_string(tmp.path().join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 1);
    assert!(trace.starts_with("t,"));
    assert!(tmp.path().join("metrics.json").exists());
}

#[test]
fn trace_independent_of_thread_count() {
    let tmp = tempfile::tempdir().unwrap();
    let mut traces = Vec::new();
    for threads in ["1", "2", "4"] {
        let dir = tmp.path().join(threads);
        let o = run(&[
            "simulate",
            "--threads",
            threads,
            "--config",
            &circle6(),
            "--out",
            dir.to_str().unwrap(),
            "--duration",
            "40",
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        traces.push(std::fs::read(dir.join("trace.csv")).unwrap());
    }
    assert!(traces[0].len() > 1000);
    assert_eq!(traces[0], traces[1]);
    assert_eq!(traces[0], traces[2]);
}

#[test]
fn zero_threads_rejected() {
    let o = run(&["verify", "--threads", "0", "--config", &circle6(), "--suite", "sliding"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn single_suite_runs_alone() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    let o = run(&[
        "verify", "--config", &circle6(), "--out", out, "--suite", "lemma6", "--samples", "2000",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let reports: serde_json::Value =
        serde_json::from_slice(&std::fs::read(tmp.path().join("verify.json")).unwrap()).unwrap();
    let reports = reports.as_array().unwrap();
    assert_eq!(reports.len(), 1);
    assert_eq!(reports[0]["suite"], "lemma6");
    assert_eq!(reports[0]["passed"], true);
}
