//! End-to-end tests driving the `sqzsim` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn sqzsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sqzsim"))
        .args(args)
        .env("SQZSIM_LOG", "quiet")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, extra: &str) -> String {
    let path = dir.join("scenario.cfg");
    fs::write(&path, extra).unwrap();
    path.to_string_lossy().into_owned()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .unwrap()
        .split(',')
        .map(|s| s.to_string())
        .collect();
    let rows = lines
        .map(|l| {
            l.split(',')
                .map(|v| v.parse::<f64>().unwrap_or(f64::NAN))
                .collect()
        })
        .collect();
    (header, rows)
}

#[test]
fn spectrum_defaults_hit_quoted_levels() {
    let dir = tempfile::tempdir().unwrap();
    let out = sqzsim(&["spectrum", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    let (header, rows) = read_csv(&dir.path().join("spectrum.csv"));
    assert_eq!(header, ["freq_hz", "squeezed_db", "antisqueezed_db"]);
    let at = |f: f64| {
        rows.iter()
            .min_by(|a, b| {
                (a[0] - f).abs().partial_cmp(&(b[0] - f).abs()).unwrap()
            })
            .unwrap()
            .clone()
    };
    let plateau = at(10.0);
    assert!((plateau[1] + 5.0).abs() < 0.3, "plateau {plateau:?}");
    let rolloff = at(35e6);
    assert!((rolloff[1] + 1.1).abs() < 0.3, "35 MHz {rolloff:?}");
    // antisqueezing stays above shot noise
    assert!(rows.iter().all(|r| r[2] >= 0.0));
}

#[test]
fn spectrum_without_pump_is_flat() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[pump]\npump_ratio = 0\n");
    let out = sqzsim(&[
        "spectrum",
        "--config",
        &cfg,
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let (_, rows) = read_csv(&dir.path().join("spectrum.csv"));
    for r in rows {
        assert!(r[1].abs() < 1e-9 && r[2].abs() < 1e-9, "{r:?}");
    }
}

#[test]
fn spectrum_window_preset_emits_rbw_bins() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[cavity]\ngrid = audio-band-windows\n");
    let out = sqzsim(&[
        "spectrum",
        "--config",
        &cfg,
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let (header, rows) = read_csv(&dir.path().join("spectrum.csv"));
    assert_eq!(
        header,
        ["freq_hz", "squeezed_db", "antisqueezed_db", "rbw_hz", "n_avg"]
    );
    assert_eq!(rows.len(), 160 + 150 + 300 + 600 + 425);
    let mut rbws: Vec<f64> = rows.iter().map(|r| r[3]).collect();
    rbws.dedup();
    assert_eq!(rbws, vec![0.25, 1.0, 2.0, 4.0, 16.0]);
    let mut avgs: Vec<f64> = rows.iter().map(|r| r[4]).collect();
    avgs.dedup();
    assert_eq!(avgs, vec![100.0, 400.0, 800.0]);
    // per-window averaging counts: 100, 100, 400, 400, 800
    let count = |n: f64| rows.iter().filter(|r| r[4] == n).count();
    assert_eq!(count(100.0), 160 + 150);
    assert_eq!(count(400.0), 300 + 600);
    assert_eq!(count(800.0), 425);
}

#[test]
fn error_signals_pipeline_matches_closed_forms() {
    let dir = tempfile::tempdir().unwrap();
    let out = sqzsim(&["error-signals", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    let (header, rows) = read_csv(&dir.path().join("error_signals.csv"));
    assert_eq!(
        header,
        [
            "phi_rad",
            "Phi_rad",
            "err_pump_closed",
            "err_pump_pipeline",
            "err_lo_closed",
            "err_lo_pipeline"
        ]
    );
    for (closed_col, pipe_col) in [(2, 3), (4, 5)] {
        let num: f64 = rows.iter().map(|r| r[pipe_col] * r[closed_col]).sum();
        let den: f64 = rows.iter().map(|r| r[pipe_col] * r[pipe_col]).sum();
        let scale = num / den;
        let reference = rows
            .iter()
            .map(|r| r[closed_col].abs())
            .fold(0.0f64, f64::max);
        for r in &rows {
            assert!(
                (scale * r[pipe_col] - r[closed_col]).abs() < 1e-6 * reference,
                "column {closed_col} mismatch in {r:?}"
            );
        }
    }
    // amplitude of the sinusoidal pump error at gain 10 and unit amplitude
    let max_pump = rows.iter().map(|r| r[2].abs()).fold(0.0f64, f64::max);
    assert!((max_pump - 99.0 / 40.0).abs() < 1e-2, "{max_pump}");
}

#[test]
fn error_signals_vanish_without_pump() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[qcf]\nsingle_pass_gain = 1\n");
    let out = sqzsim(&[
        "error-signals",
        "--config",
        &cfg,
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let (_, rows) = read_csv(&dir.path().join("error_signals.csv"));
    for r in rows {
        for v in &r[2..] {
            assert!(v.abs() < 1e-9, "{r:?}");
        }
    }
}

#[test]
fn lock_with_default_seed_acquires_and_is_deterministic() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    for dir in [&dir_a, &dir_b] {
        let out = sqzsim(&[
            "lock",
            "--seed",
            "42",
            "--out",
            dir.path().to_str().unwrap(),
        ]);
        assert!(out.status.success());
        let stdout = String::from_utf8_lossy(&out.stdout).into_owned();
        assert!(stdout.contains("acquired = true"), "{stdout}");
    }
    let report = fs::read_to_string(dir_a.path().join("lock_report.txt")).unwrap();
    assert!(report.contains("out_of_lock_events = 0"));
    let trace_a = fs::read(dir_a.path().join("lock_trace.csv")).unwrap();
    let trace_b = fs::read(dir_b.path().join("lock_trace.csv")).unwrap();
    assert_eq!(trace_a, trace_b);
    let header = String::from_utf8_lossy(&trace_a)
        .lines()
        .next()
        .unwrap()
        .to_string();
    assert_eq!(header, "t_s,phi_rad,Phi_rad,detuning_hz,err_pump,err_lo,err_pdh");
}

#[test]
fn lock_without_pump_never_acquires() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[qcf]\nsingle_pass_gain = 1\n");
    let out = sqzsim(&[
        "lock",
        "--config",
        &cfg,
        "--seed",
        "7",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    // a run that does not acquire is still a valid result
    assert!(out.status.success());
    let report = fs::read_to_string(dir.path().join("lock_report.txt")).unwrap();
    assert!(report.contains("acquired = false"), "{report}");
}

#[test]
fn budget_reproduces_reference_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let out = sqzsim(&["budget", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    let (header, rows) = read_csv(&dir.path().join("budget.csv"));
    assert_eq!(
        header,
        ["band", "r_power", "route", "eta_total", "sqz_in_db", "sqz_out_db"]
    );
    assert_eq!(rows.len(), 2);
    // high band: 96 % power reflectivity degrades 6 dB to about 5.5 dB
    assert!((rows[1][1] - 0.96).abs() < 1e-12);
    assert!((rows[1][5] - 5.51).abs() < 0.05, "{rows:?}");
    assert!(rows[0][5] > 5.9);

    let chain = fs::read_to_string(dir.path().join("chain.csv")).unwrap();
    let last = chain.lines().last().unwrap();
    let cumulative: f64 = last.split(',').last().unwrap().parse().unwrap();
    assert!((cumulative - 0.8959).abs() < 5e-4, "{chain}");
}

#[test]
fn config_errors_exit_with_code_2_and_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[cavity]\nfinesse = 100\n");
    let out = sqzsim(&["spectrum", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr).into_owned();
    assert!(stderr.contains("line 2"), "{stderr}");

    let cfg = write_config(dir.path(), "[qcf]\noffset = 40\n");
    let out = sqzsim(&["spectrum", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr).into_owned();
    assert!(stderr.contains("missing a unit"), "{stderr}");

    let out = sqzsim(&["spectrum", "--config", "/nonexistent/path.cfg"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulation_failures_exit_with_code_3() {
    let dir = tempfile::tempdir().unwrap();
    // dt passes parsing but violates the servo stability guard at run time
    let cfg = write_config(dir.path(), "[loops]\ndt = 1 s\n");
    let out = sqzsim(&[
        "lock",
        "--config",
        &cfg,
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&out.stderr).into_owned();
    assert!(stderr.contains("unstable"), "{stderr}");
}

#[test]
fn log_env_var_controls_stderr() {
    let dir = tempfile::tempdir().unwrap();
    let loud = Command::new(env!("CARGO_BIN_EXE_sqzsim"))
        .args(["budget", "--out", dir.path().to_str().unwrap()])
        .env("SQZSIM_LOG", "info")
        .output()
        .unwrap();
    assert!(String::from_utf8_lossy(&loud.stderr).contains("wrote"));
    let quiet = Command::new(env!("CARGO_BIN_EXE_sqzsim"))
        .args(["budget", "--out", dir.path().to_str().unwrap()])
        .env("SQZSIM_LOG", "quiet")
        .output()
        .unwrap();
    assert!(quiet.stderr.is_empty());
}

#[test]
fn runs_are_deterministic_given_config_and_seed() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    for dir in [&dir_a, &dir_b] {
        assert!(sqzsim(&["spectrum", "--out", dir.path().to_str().unwrap()])
            .status
            .success());
        assert!(sqzsim(&["budget", "--out", dir.path().to_str().unwrap()])
            .status
            .success());
    }
    for name in ["spectrum.csv", "budget.csv", "chain.csv"] {
        let a = fs::read(dir_a.path().join(name)).unwrap();
        let b = fs::read(dir_b.path().join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
}
