use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn noonpol(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_noonpol"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const CONFIG: &str = r#"duration_s = 1800

[reaction]
completion_fraction = 0.95
completion_time_s = 1800

[probe]
seed = 5

[drift]
kind = "linear"
v0 = 0.85
v_end = 0.80

[grid]
n_phi = 256
n_vis = 128
"#;

const STALLED: &str = r#"duration_s = 1800

[reaction]
rate_constant = 1e-12

[probe]
seed = 9

[drift]
kind = "constant"
v0 = 0.9

[grid]
n_phi = 512
n_vis = 256
"#;

fn setup(config: &str) -> (TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    std::fs::write(&path, config).unwrap();
    (dir, path)
}

fn rows(path: &Path) -> Vec<Vec<f64>> {
    let text = std::fs::read_to_string(path).unwrap();
    text.lines()
        .skip(1)
        .map(|l| l.split(',').map(|f| f.parse().unwrap_or(f64::NAN)).collect())
        .collect()
}

#[test]
fn simulate_writes_records_and_truth_reproducibly() {
    let (dir, _) = setup(CONFIG);
    let d = dir.path();
    let o = noonpol(&["simulate", "run.toml", "-o", "a"], d);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let records = std::fs::read_to_string(d.join("a/records.csv")).unwrap();
    assert!(records.starts_with("t_s,setting_rad,window_s,counts\n"));
    assert_eq!(records.lines().count() - 1, 240);
    let truth = std::fs::read_to_string(d.join("a/truth.csv")).unwrap();
    assert!(truth.starts_with("t_s,phi_true_rad,vis_true\n"));
    assert_eq!(truth.lines().count() - 1, 60);

    noonpol(&["simulate", "run.toml", "-o", "b"], d);
    assert_eq!(records, std::fs::read_to_string(d.join("b/records.csv")).unwrap());
    assert_eq!(truth, std::fs::read_to_string(d.join("b/truth.csv")).unwrap());

    noonpol(&["--seed", "6", "simulate", "run.toml", "-o", "c"], d);
    assert_ne!(records, std::fs::read_to_string(d.join("c/records.csv")).unwrap());
}

#[test]
fn unknown_config_key_exits_2_naming_it() {
    let (dir, _) = setup(&CONFIG.replace("v0 = 0.85", "visibilty = 0.85"));
    let o = noonpol(&["simulate", "run.toml"], dir.path());
    assert_eq!(code(&o), 2);
    let msg = stderr(&o);
    assert!(msg.contains("visibilty"), "{msg}");
    assert!(msg.contains("line 12"), "{msg}");
}

#[test]
fn io_failures_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let o = noonpol(&["simulate", "missing.toml"], dir.path());
    assert_eq!(code(&o), 3);
    let o = noonpol(&["estimate", "missing.csv", "--calibration", "0", "-o", "e.csv"], dir.path());
    assert_eq!(code(&o), 3);
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&noonpol(&["bogus"], dir.path())), 2);
    assert_eq!(code(&noonpol(&["crb", "--v-min", "0.5"], dir.path())), 2);
    let o = noonpol(&["--version"], dir.path());
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("noonpol "));
}

#[test]
fn estimate_drops_truncated_cycle_with_one_warning() {
    let (dir, _) = setup(CONFIG);
    let d = dir.path();
    noonpol(&["simulate", "run.toml"], d);
    let full = std::fs::read_to_string(d.join("records.csv")).unwrap();
    let lines: Vec<&str> = full.lines().collect();
    let truncated = lines[..lines.len() - 1].join("\n") + "\n";
    std::fs::write(d.join("trunc.csv"), truncated).unwrap();

    let o = noonpol(
        &["estimate", "trunc.csv", "--calibration", "0", "--config", "run.toml", "-o", "est.csv"],
        d,
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let est = std::fs::read_to_string(d.join("est.csv")).unwrap();
    assert!(est.starts_with("t_s,phi_rad,phi_std_rad,vis,vis_std,total_counts,flags\n"));
    assert_eq!(est.lines().count() - 1, 59);
    assert_eq!(stderr(&o).lines().filter(|l| l.starts_with("warning:")).count(), 1);
}

#[test]
fn estimate_rejects_empty_input() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("empty.csv"), "t_s,setting_rad,window_s,counts\n").unwrap();
    let o = noonpol(&["estimate", "empty.csv", "--calibration", "0", "-o", "e.csv"], dir.path());
    assert_eq!(code(&o), 2);
}

#[test]
fn round_trip_at_constant_truth() {
    let (dir, _) = setup(STALLED);
    let d = dir.path();
    assert_eq!(code(&noonpol(&["simulate", "run.toml"], d)), 0);
    let o = noonpol(
        &["estimate", "records.csv", "--calibration", "0", "--config", "run.toml", "-o", "est.csv"],
        d,
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let est = rows(&d.join("est.csv"));
    let truth = rows(&d.join("truth.csv"));
    assert_eq!(est.len(), truth.len());
    let n = est.len() as f64;
    let mean_abs = est.iter().zip(&truth).map(|(e, t)| (e[1] - t[1]).abs()).sum::<f64>() / n;
    let sigma = est.iter().map(|e| e[2]).sum::<f64>() / n;
    assert!(mean_abs < 3.0 * sigma, "mean |error| {mean_abs}, σ̄ {sigma}");
}

#[test]
fn water_self_calibration_centres_on_zero() {
    let (dir, _) = setup(&STALLED.replace("seed = 9", "seed = 9\ninstrument_phase = 0.4"));
    let d = dir.path();
    assert_eq!(code(&noonpol(&["pipeline", "run.toml", "-o", "p"], d)), 0);
    let o = noonpol(
        &["estimate", "p/water.csv", "--calibration", "p/water.csv", "--config", "run.toml", "-o", "w.csv"],
        d,
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let est = rows(&d.join("w.csv"));
    let n = est.len() as f64;
    let mean = est.iter().map(|e| e[1]).sum::<f64>() / n;
    let sigma = est.iter().map(|e| e[2]).sum::<f64>() / n;
    assert!(mean.abs() < 3.0 * sigma, "mean {mean}, σ̄ {sigma}");
}

#[test]
fn crb_table() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = noonpol(&["crb", "--v-min", "0.9", "--v-max", "0.9", "--grid", "64", "-o", "b.csv"], d);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = std::fs::read_to_string(d.join("b.csv")).unwrap();
    assert!(text.starts_with(
        "phi_rad,var_phi_q_vmin,var_phi_q_vmax,var_phi_classical,var_vis_q_vmin,var_vis_q_vmax,cov_q_vmin,cov_q_vmax\n"
    ));
    let table = rows(&d.join("b.csv"));
    assert_eq!(table.len(), 64);
    for r in &table {
        assert_eq!(r[1], r[2]);
        assert_eq!(r[4], r[5]);
        assert_eq!(r[6], r[7]);
    }
    let zero = table.iter().find(|r| r[0] == 0.0).unwrap();
    assert_eq!(zero[6], 0.0);
    assert!((zero[1] - 0.617284).abs() < 1e-6);

    let o = noonpol(&["crb", "--v-min", "0.9", "--v-max", "0.5", "-o", "bad.csv"], d);
    assert_eq!(code(&o), 2);
    assert!(!d.join("bad.csv").exists());
}

#[test]
fn kinetics_table() {
    let long = CONFIG.replace("duration_s = 1800", "duration_s = 36000");
    let (dir, _) = setup(&long);
    let d = dir.path();
    let o = noonpol(&["kinetics", "run.toml", "-o", "k.csv"], d);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = std::fs::read_to_string(d.join("k.csv")).unwrap();
    assert!(text.starts_with("t_s,sucrose,glucose,fructose,rotation_deg,phase_rad\n"));
    let table = rows(&d.join("k.csv"));
    assert!((table[0][4] - 3.984).abs() < 1e-9);
    // 9 significant digits resolve the decay for the first few hours only
    assert!(table.windows(2).all(|w| w[1][4] <= w[0][4]));
    assert!((table.last().unwrap()[4] + 1.2506).abs() < 1e-3);

    let (dir, _) = setup(CONFIG);
    let d = dir.path();
    assert_eq!(code(&noonpol(&["kinetics", "run.toml", "-o", "k.csv"], d)), 0);
    let table = rows(&d.join("k.csv"));
    assert_eq!(table.len(), 61);
    assert!(table.windows(2).all(|w| w[1][4] < w[0][4]));

    let (dir, _) = setup(&CONFIG.replace("completion_fraction = 0.95", "completion_fraction = 1.5"));
    assert_eq!(code(&noonpol(&["kinetics", "run.toml", "-o", "k.csv"], dir.path())), 2);
}

#[test]
fn pipeline_reruns_are_byte_identical() {
    let (dir, _) = setup(CONFIG);
    let d = dir.path();
    let o = noonpol(&["pipeline", "run.toml", "-o", "a", "--json-summary"], d);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let summary: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(summary["cycles"], 60);
    assert_eq!(summary["seed"], 5);
    assert!(summary["true_crossing_s"].as_f64().unwrap() > 860.0);

    assert_eq!(code(&noonpol(&["pipeline", "run.toml", "-o", "b"], d)), 0);
    for name in ["water.csv", "records.csv", "truth.csv", "estimates.csv", "kinetics.csv", "report.json"] {
        let a = std::fs::read(d.join("a").join(name)).unwrap();
        let b = std::fs::read(d.join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs");
    }
}

#[test]
fn pipeline_rejects_zero_duration() {
    let (dir, _) = setup(&CONFIG.replace("duration_s = 1800", "duration_s = 0"));
    let o = noonpol(&["pipeline", "run.toml", "-o", "out"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("duration_s"));
}
