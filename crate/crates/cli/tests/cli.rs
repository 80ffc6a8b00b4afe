use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn seiard(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_seiard"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn simulate_writes_every_day() {
    let tmp = tempfile::tempdir().unwrap();
    let o = seiard(&["simulate"], tmp.path());
    assert!(o.status.success());
    let observed = std::fs::read_to_string(tmp.path().join("observed.csv")).unwrap();
    let lines: Vec<&str> = observed.lines().collect();
    assert_eq!(lines[0], "t,active,recovered,deceased,total");
    assert_eq!(lines.len(), 402);
    assert!(lines[1].starts_with("0,5,0,0,5"));
    let traj = std::fs::read_to_string(tmp.path().join("trajectory.csv")).unwrap();
    assert!(traj.starts_with("t,S,E,I,A_recov,A_fatal,R,D\n"));
    assert_eq!(traj.lines().count(), 402);
    assert_eq!(read_json(&tmp.path().join("dataset.json"))["rows"], 401);
}

#[test]
fn simulate_repeats_byte_for_byte() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(seiard(&["simulate", "--set", "dataset.noise={\"kind\":\"log_normal\",\"sigma\":0.1}", "--set", "dataset.seed=9"], &a).status.success());
    assert!(seiard(&["simulate", "--set", "dataset.noise={\"kind\":\"log_normal\",\"sigma\":0.1}", "--set", "dataset.seed=9"], &b).status.success());
    for f in ["observed.csv", "trajectory.csv", "dataset.json", "manifest.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn usage_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cases: &[&[&str]] = &[
        &["simulate", "--set", "dataset.horizon=0"],
        &["profile", "--params", "gamma"],
        &["forecast-eval", "--horizons", ""],
        &["fit", "--set", "no_such_field=1"],
        &["fit", "--set", "variant=both"],
        &["fit", "--threads", "0"],
        &["frobnicate"],
    ];
    for args in cases {
        let o = seiard(args, tmp.path());
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn missing_config_file_is_not_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = seiard(&["fit", "--config", "/nonexistent/run.json"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn reparam_fit_is_accurate_and_echoes_pins() {
    let tmp = tempfile::tempdir().unwrap();
    let o = seiard(&["fit", "--set", "variant=reparam", "--threads", "2"], tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let fit = read_json(&tmp.path().join("fit.json"));
    assert!(fit["best_loss"].as_f64().unwrap() < 0.5);
    assert_eq!(fit["pinned"]["t_inc"], 5.1);
    assert_eq!(fit["pinned"]["t_inf"], 6.6);
    assert_eq!(fit["pinned"]["t_fatal"], 10.0);
    assert_eq!(fit["best_params"]["t_inc"], 5.1);
    assert_eq!(fit["free"].as_array().unwrap().len(), 5);
    let trace = std::fs::read_to_string(tmp.path().join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 501);
}

#[test]
fn original_fit_frees_all_eight() {
    let tmp = tempfile::tempdir().unwrap();
    let o = seiard(&["fit", "--set", "fit.budget=300"], tmp.path());
    assert!(o.status.success());
    let fit = read_json(&tmp.path().join("fit.json"));
    assert_eq!(fit["free"].as_array().unwrap().len(), 8);
    assert_eq!(fit["budget"], 300);
}

#[test]
fn profile_writes_one_curve_per_window_and_parameter() {
    let tmp = tempfile::tempdir().unwrap();
    let o = seiard(
        &[
            "profile",
            "--set",
            "variant=reparam",
            "--set",
            "profile.threshold=chi2",
            "--set",
            "profile.points=9",
            "--params",
            "beta",
        ],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let curve = std::fs::read_to_string(tmp.path().join("profile_beta_d28.csv")).unwrap();
    assert!(curve.starts_with("theta,profiled_loss\n"));
    assert_eq!(curve.lines().count(), 10);
    let summary = read_json(&tmp.path().join("profile_beta_d28.json"));
    assert_eq!(summary["verdict"], "identifiable");
    let hull = summary["hull"].as_array().unwrap();
    assert!(hull[0].as_f64().unwrap() < 0.25 && hull[1].as_f64().unwrap() > 0.25);
    assert!(!tmp.path().join("posterior_d28.json").exists());
}

#[test]
fn pinned_parameter_cannot_be_profiled() {
    let tmp = tempfile::tempdir().unwrap();
    let o = seiard(&["profile", "--set", "variant=reparam", "--params", "t_inc"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn mcmc_reports_diagnostics_for_the_original_variant() {
    let tmp = tempfile::tempdir().unwrap();
    let o = seiard(&["mcmc", "--set", "mcmc.n_samples=2000", "--set", "mcmc.n_burn=500"], tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let corr = std::fs::read_to_string(tmp.path().join("correlation.csv")).unwrap();
    assert_eq!(corr.lines().count(), 9);
    assert_eq!(corr.lines().next().unwrap().split(',').count(), 9);
    let chains = read_json(&tmp.path().join("chains.json"));
    assert_eq!(chains["rhat"].as_object().unwrap().len(), 8);
    assert_eq!(chains["chains"].as_array().unwrap().len(), 4);
    for p in ["beta", "t_inc", "t_inf", "t_recov", "t_fatal", "p_fatal", "e0", "i0"] {
        assert!(tmp.path().join(format!("hpdi_{p}.json")).exists(), "{p}");
    }
}

#[test]
fn forecast_at_the_window_end_is_in_sample() {
    let tmp = tempfile::tempdir().unwrap();
    let o = seiard(&["forecast-eval", "--horizons", "0,25", "--set", "forecast.repeats=2"], tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let t = read_json(&tmp.path().join("forecast.json"));
    for v in ["original", "reparam"] {
        assert!(t["median"][v][0].as_f64().unwrap() < 0.5, "{v}");
    }
    let rows = std::fs::read_to_string(tmp.path().join("forecast.csv")).unwrap();
    assert_eq!(rows.lines().count(), 1 + 2 * 2 * 2);
}

#[test]
fn forecast_beyond_the_dataset_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let o = seiard(&["forecast-eval", "--horizons", "500"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn report_screens_the_reparam_variant() {
    let tmp = tempfile::tempdir().unwrap();
    let o = seiard(&["report", "--set", "variant=reparam"], tmp.path());
    assert!(o.status.success());
    let r = read_json(&tmp.path().join("structural.json"));
    assert_eq!(r["numeric_rank"], 5);
    assert_eq!(r["full_rank"], true);
    let m = std::fs::read_to_string(tmp.path().join("sensitivity.csv")).unwrap();
    assert_eq!(m.lines().count(), 1 + 3 * 28);
}

#[test]
fn manifest_replays_exactly() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(seiard(&["fit", "--set", "variant=reparam", "--set", "seed=17"], &a).status.success());
    let manifest = a.join("manifest.json");
    assert_eq!(read_json(&manifest)["seed"], 17);
    assert!(seiard(&["fit", "--config", manifest.to_str().unwrap()], &b).status.success());
    for f in ["fit.json", "trace.csv", "manifest.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}
