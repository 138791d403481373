use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn qrepsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qrepsim")).args(args).env("RUST_LOG", "warn").output().unwrap()
}

fn run_cfg(cfg: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["--config", cfg.to_str().unwrap(), "--out-dir", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    qrepsim(&args)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Shipped config with its annual span shortened to `days`.
fn short_annual(name: &str, days: f64, dir: &Path) -> PathBuf {
    let src = std::fs::read_to_string(configs().join(name)).unwrap();
    let text = src.replace("duration_days = 365.0", &format!("duration_days = {days}"));
    assert_ne!(src, text);
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn read_csv(p: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(p).unwrap();
    let h = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|x| x.unwrap().iter().map(String::from).collect()).collect();
    (h, rows)
}

#[test]
fn empty_config_lists_required_keys() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("empty.toml");
    std::fs::write(&cfg, "").unwrap();
    let o = run_cfg(&cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(1));
    let e = stderr(&o);
    for key in ["architecture", "stations.alice", "stations.bob", "constellation.kind"] {
        assert!(e.contains(key), "{e}");
    }
}

#[test]
fn out_of_range_value_names_field_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let src = std::fs::read_to_string(configs().join("annual_sso.toml")).unwrap();
    let bad = src.replacen("e = 0.0\n", "e = 1.5\n", 1);
    assert_ne!(src, bad);
    let line = bad.lines().position(|l| l == "e = 1.5").unwrap() + 1;
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, bad).unwrap();
    let o = run_cfg(&cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(1));
    let e = stderr(&o);
    assert!(e.contains(&format!("line {line}")) && e.contains(".e"), "{e}");
}

#[test]
fn unknown_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let src = std::fs::read_to_string(configs().join("ic_downlink_zenith.toml")).unwrap();
    let cfg = dir.path().join("typo.toml");
    std::fs::write(&cfg, src.replace("theta_min_deg", "theta_minimum_deg")).unwrap();
    let o = run_cfg(&cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("theta_minimum_deg"), "{}", stderr(&o));
}

#[test]
fn runtime_failure_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "").unwrap();
    let o = run_cfg(&configs().join("ic_downlink_zenith.toml"), &blocker, &[]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));

    let src = std::fs::read_to_string(configs().join("ic_downlink_zenith.toml")).unwrap();
    let same = src.replace("lat_deg = 52.52, lon_deg = 13.405", "lat_deg = 40.7128, lon_deg = -74.0060");
    let cfg = dir.path().join("same.toml");
    std::fs::write(&cfg, same).unwrap();
    let o = run_cfg(&cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("ic_uplink_zenith.toml");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(run_cfg(&cfg, &a, &[]).status.success());
    assert!(run_cfg(&cfg, &b, &[]).status.success());
    for f in ["timeseries.csv", "report.toml"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn pass_timeseries_has_the_documented_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    assert!(run_cfg(&configs().join("ic_downlink_zenith.toml"), &out, &[]).status.success());
    let (h, rows) = read_csv(&out.join("timeseries.csv"));
    assert_eq!(h, qrepsim::output::TIMESERIES_COLUMNS);
    assert_eq!(rows.len(), 2000);
    let linked: Vec<_> = rows.iter().filter(|r| !r[7].is_empty()).collect();
    assert!((linked.len() as i64 - 311).abs() <= 5);
    for r in &rows {
        assert_eq!(r[7].is_empty(), r[9].is_empty());
        if r[7].is_empty() {
            assert_eq!(r[19].parse::<f64>().unwrap(), 0.0);
        }
    }
    let report: toml::Value = toml::from_str(&std::fs::read_to_string(out.join("report.toml")).unwrap()).unwrap();
    let secure = report["passes"][0]["totals"]["secure"].as_float().unwrap();
    let sum: f64 = rows.iter().map(|r| r[19].parse::<f64>().unwrap()).sum();
    assert!((sum - secure).abs() <= 1e-9 * secure);
}

#[test]
fn campaign_csv_sums_to_report_totals() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_annual("annual_sso.toml", 4.0, dir.path());
    let out = dir.path().join("o");
    let o = run_cfg(&cfg, &out, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (_, passes) = read_csv(&out.join("passes.csv"));
    assert!(!passes.is_empty());
    let report: toml::Value = toml::from_str(&std::fs::read_to_string(out.join("report.toml")).unwrap()).unwrap();
    let c = &report["campaign"];
    let mut total = 0.0;
    let mut night = 0.0;
    for p in &passes {
        let x: f64 = p[10].parse().unwrap();
        total += x;
        if p[11] == "1" {
            night += x;
        }
    }
    assert_eq!(total, c["total"]["secure"].as_float().unwrap());
    assert_eq!(night, c["night"]["secure"].as_float().unwrap());
    assert_eq!(c["passes"].as_integer().unwrap() as usize, passes.len());
    let (_, cum) = read_csv(&out.join("cumulative.csv"));
    assert_eq!(cum.last().unwrap()[2].parse::<f64>().unwrap(), total);
}

#[test]
fn empty_campaign_writes_headers_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_annual("annual_constsep.toml", 0.001, dir.path());
    let out = dir.path().join("o");
    let o = run_cfg(&cfg, &out, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["timeseries.csv", "passes.csv", "cumulative.csv"] {
        let text = std::fs::read_to_string(out.join(f)).unwrap();
        assert_eq!(text.lines().count(), 1, "{f}: {text}");
    }
}

#[test]
fn every_shipped_config_runs() {
    let dir = tempfile::tempdir().unwrap();
    let mut names: Vec<_> = std::fs::read_dir(configs())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".toml"))
        .collect();
    names.sort();
    assert!(names.len() >= 7);
    for n in names {
        let text = std::fs::read_to_string(configs().join(&n)).unwrap();
        let cfg = if text.contains("duration_days = 365.0") { short_annual(&n, 2.0, dir.path()) } else { configs().join(&n) };
        // coarser steps keep the sweeps quick; the values are not checked here
        let extra: &[&str] = if text.contains("mode = \"sweep\"") { &["--step-s", "5"] } else { &[] };
        let out = dir.path().join(n.trim_end_matches(".toml"));
        let o = run_cfg(&cfg, &out, extra);
        assert!(o.status.success(), "{n}: {}", stderr(&o));
        assert!(out.join("report.toml").exists(), "{n}");
    }
}

#[test]
fn overrides_are_echoed_in_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = run_cfg(&configs().join("ic_downlink_zenith.toml"), &out, &["--step-s", "2", "--night-only"]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(out.join("report.toml")).unwrap();
    assert!(text.contains("command line"));
    let (_, rows) = read_csv(&out.join("timeseries.csv"));
    assert_eq!(rows.len(), 1000);
    let o = run_cfg(&configs().join("ic_downlink_zenith.toml"), &out, &["--step-s=-1"]);
    assert_eq!(o.status.code(), Some(1));
}
