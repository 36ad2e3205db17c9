use std::path::Path;
use std::process::{Command, Output};

use chrono::NaiveDate;
use nalgebra::DMatrix;
use varlab::TimeSeriesFrame;
use varlab_cli::pipeline::{fill_test, prepare};
use varlab_cli::{write_dataset, PipelineConfig, SyntheticSpec};

fn varlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_varlab")).args(args).output().unwrap()
}

fn dataset(dir: &Path) -> PipelineConfig {
    let start = NaiveDate::from_ymd_opt(2018, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap();
    let spec = SyntheticSpec { start, hours: 24 * 40, stations: 2, weather: 3, seed: 5, missing: true };
    write_dataset(&spec, dir).unwrap()
}

#[test]
fn verbs_chain_through_a_saved_model() {
    let tmp = tempfile::tempdir().unwrap();
    dataset(tmp.path());
    let cfg = tmp.path().join("config.json");
    let cfg = cfg.to_str().unwrap();
    let out = tmp.path().join("steps");
    let out_s = out.to_str().unwrap();

    let fit = varlab(&["fit", "--config", cfg, "--output", out_s, "--lag", "2", "--trend", "c"]);
    assert!(fit.status.success(), "{}", String::from_utf8_lossy(&fit.stderr));
    let model = out.join("model.json");
    assert!(out.join("residual_diagnostics.json").exists());

    let fc = varlab(&["forecast", "--model", model.to_str().unwrap(), "--steps", "24", "--output", out_s]);
    assert!(fc.status.success(), "{}", String::from_utf8_lossy(&fc.stderr));
    let forecast = TimeSeriesFrame::from_csv_path(&out.join("forecast.csv")).unwrap();
    assert_eq!(forecast.len(), 24);

    let ingest = varlab(&["ingest", "--config", cfg, "--output", out_s]);
    assert!(ingest.status.success());
    let ev = varlab(&[
        "evaluate",
        "--actual",
        out.join("clean.csv").to_str().unwrap(),
        "--forecast",
        out.join("forecast.csv").to_str().unwrap(),
        "--output",
        out_s,
    ]);
    assert!(ev.status.success(), "{}", String::from_utf8_lossy(&ev.stderr));
    assert!(out.join("metrics.json").exists());

    let fevd = varlab(&["fevd", "--model", model.to_str().unwrap(), "--horizon", "6", "--output", out_s]);
    assert!(fevd.status.success(), "{}", String::from_utf8_lossy(&fevd.stderr));
    let csv = std::fs::read_to_string(out.join("fevd.csv")).unwrap();
    // header + 6 horizons x 5 variables x 5 shocks
    assert_eq!(csv.lines().count(), 1 + 6 * 25);

    let bad = varlab(&["fevd", "--model", model.to_str().unwrap(), "--order", "rain,station0", "--output", out_s]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn gridsearch_and_diagnose_write_their_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let config = dataset(tmp.path());
    let cfg = tmp.path().join("config.json");
    let cfg = cfg.to_str().unwrap();
    let g = varlab(&["gridsearch", "--config", cfg, "--grid_lags", "1,2", "--grid-trends", "c,n"]);
    assert!(g.status.success(), "{}", String::from_utf8_lossy(&g.stderr));
    assert!(String::from_utf8_lossy(&g.stdout).contains("best: p = "));
    let d = varlab(&["diagnose", "--config", cfg, "--granger_lag", "2"]);
    assert!(d.status.success(), "{}", String::from_utf8_lossy(&d.stderr));
    for f in ["grid_search.csv", "grid_search.json", "adf.json", "granger_pvalues.csv", "diagnostics.json"] {
        assert!(config.output_dir.join(f).exists(), "{f}");
    }
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    dataset(tmp.path());
    let cfg = tmp.path().join("config.json");
    let cfg = cfg.to_str().unwrap();

    assert_eq!(varlab(&["run"]).status.code(), Some(2));
    assert_eq!(varlab(&["run", "--config", cfg, "--grid_lags", "0"]).status.code(), Some(2));
    assert_eq!(varlab(&["bogus"]).status.code(), Some(2));
    assert_eq!(varlab(&["run", "--config", "/nonexistent/config.json"]).status.code(), Some(2));

    let outside = varlab(&["run", "--config", cfg, "--test_start", "2030-01-01 00:00:00"]);
    assert_eq!(outside.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&outside.stderr).starts_with("error:"));
}

#[test]
fn test_rows_never_feed_training_imputation() {
    let tmp = tempfile::tempdir().unwrap();
    let config = dataset(tmp.path());
    let before = prepare(&config).unwrap();
    assert!(!before.raw_test.is_empty());

    // rewrite every held-out traffic row
    let path = tmp.path().join("traffic.csv");
    let text = std::fs::read_to_string(&path).unwrap();
    let cut = varlab::frame::format_timestamp(&config.test_start);
    let rewritten: String = text
        .lines()
        .map(|l| {
            if l.split(',').next().is_some_and(|ts| ts >= cut.as_str() && !ts.starts_with("timestamp")) {
                let mut parts: Vec<String> = l.split(',').map(String::from).collect();
                for p in parts.iter_mut().skip(1) {
                    if !p.is_empty() {
                        *p = "99999".into();
                    }
                }
                parts.join(",")
            } else {
                l.to_string()
            }
        })
        .map(|l| l + "\n")
        .collect();
    std::fs::write(&path, rewritten).unwrap();
    let after = prepare(&config).unwrap();
    assert_eq!(before.train, after.train);
    assert_eq!(before.log, after.log);
    assert_ne!(before.raw_test, after.raw_test);
}

#[test]
fn held_out_gaps_are_filled_from_training_context() {
    let start = NaiveDate::from_ymd_opt(2018, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap();
    let n = 24 * 21;
    let full = DMatrix::from_fn(n, 1, |i, _| (i % 24) as f64);
    let train = TimeSeriesFrame::hourly(start, vec!["a".into()], full.rows(0, n - 24).into_owned()).unwrap();
    let mut test_values = full.rows(n - 24, 24).into_owned();
    test_values[(5, 0)] = f64::NAN;
    let test_start = start + chrono::Duration::hours((n - 24) as i64);
    let raw_test = TimeSeriesFrame::hourly(test_start, vec!["a".into()], test_values).unwrap();

    let mut config: PipelineConfig = serde_json::from_str(&format!(
        r#"{{"sources": [], "test_start": "{}"}}"#,
        varlab::frame::format_timestamp(&test_start)
    ))
    .unwrap();
    config.imputation.max_gap_interpolate = 3;
    let (filled, log) = fill_test(&config, &train, &raw_test).unwrap();
    assert_eq!(filled.len(), 24);
    assert_eq!(filled.index(), raw_test.index());
    assert_eq!(filled.values()[(5, 0)], 5.0);
    assert_eq!(log.entries.len(), 1);
}
