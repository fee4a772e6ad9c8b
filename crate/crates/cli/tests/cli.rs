use std::fs;
use std::path::Path;
use std::process::Command;

use arena_cli::{run_from_args, verify_truthfulness_command, ExitCode};
use arena_core::io::{parse_float, SWEEP_COLUMNS, TRACE_COLUMNS, WEIGHT_COLUMNS};
use arena_core::presets::{fig1_config, fig2_config};
use arena_core::strategy::expected_weight_objective;
use arena_core::{build_lemma1_scenario, ScenarioConfig, StepSize};

fn run(args: &[&str]) -> (ExitCode, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut argv = vec!["arena"];
    argv.extend_from_slice(args);
    let code = run_from_args(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn write_scenario(dir: &Path, name: &str, config: &ScenarioConfig) -> String {
    let path = dir.join(name);
    fs::write(&path, config.to_json()).unwrap();
    path.to_str().unwrap().to_string()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn simulate_fig1_preset_writes_five_weight_series() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path(), "fig1.json", &fig1_config(7));
    let out = dir.path().join("run");
    let (code, stdout, _) = run(&["simulate", "--scenario", &scenario, "--out", out.to_str().unwrap()]);
    assert_eq!(code, ExitCode::Success);
    assert!(stdout.contains("regret=") && stdout.contains("bound_margin="));

    let rows = csv_rows(&out.join("trace.csv"));
    assert_eq!(rows[0], TRACE_COLUMNS);
    assert_eq!(rows.len(), 1 + 5 * 100);
    for row in &rows[1..] {
        let labeler: usize = row[1].parse().unwrap();
        assert!((1..=5).contains(&labeler));
        parse_float(&row[2]).unwrap();
    }
    assert_eq!(csv_rows(&out.join("summary.csv")).len(), 101);
    assert!(out.join("report.json").exists());
}

#[test]
fn simulate_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let mut bad = fig1_config(1);
    bad.labeler_count = 1;
    bad.labelers.truncate(1);
    let scenario = write_scenario(dir.path(), "bad.json", &bad);
    let (code, _, err) = run(&["simulate", "--scenario", &scenario, "--out", dir.path().join("a").to_str().unwrap()]);
    assert_eq!(code, ExitCode::ConfigError);
    assert!(err.contains("labeler_count"));

    // A lemma1 adversary at c = 1 with N = 2 needs a report below 0.
    let mut infeasible = build_lemma1_scenario(2, 5, 1, 0.25).unwrap();
    infeasible.labelers[1].strategy = "lemma1:1".into();
    let scenario = write_scenario(dir.path(), "inf.json", &infeasible);
    let (code, _, _) = run(&["simulate", "--scenario", &scenario, "--out", dir.path().join("b").to_str().unwrap()]);
    assert_eq!(code, ExitCode::Infeasible);

    let (code, _, _) = run(&["simulate", "--scenario", "/nonexistent/x.json", "--out", dir.path().join("c").to_str().unwrap()]);
    assert_eq!(code, ExitCode::IoError);

    fs::write(dir.path().join("garbage.json"), "{not json").unwrap();
    let garbage = dir.path().join("garbage.json");
    let (code, _, _) = run(&["simulate", "--scenario", garbage.to_str().unwrap(), "--out", dir.path().join("d").to_str().unwrap()]);
    assert_eq!(code, ExitCode::ConfigError);

    let (code, _, _) = run(&["simulate", "--scenario", &scenario, "--bogus"]);
    assert_eq!(code, ExitCode::ConfigError);
    let (code, _, _) = run(&[]);
    assert_eq!(code, ExitCode::ConfigError);
}

#[test]
fn simulate_is_append_only_unless_overwrite() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path(), "s.json", &build_lemma1_scenario(2, 10, 3, 0.25).unwrap());
    let out = dir.path().join("run");
    let out = out.to_str().unwrap();
    assert_eq!(run(&["simulate", "--scenario", &scenario, "--out", out]).0, ExitCode::Success);
    assert_eq!(run(&["simulate", "--scenario", &scenario, "--out", out]).0, ExitCode::IoError);
    assert_eq!(
        run(&["simulate", "--scenario", &scenario, "--out", out, "--overwrite"]).0,
        ExitCode::Success
    );
}

#[test]
fn simulate_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path(), "s.json", &fig1_config(3));
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let (code, _, _) = run(&["simulate", "--scenario", &scenario, "--seed", "42", "--trace-json", "--out", out.to_str().unwrap()]);
        assert_eq!(code, ExitCode::Success);
    }
    for file in ["trace.csv", "summary.csv", "report.json", "trace.json"] {
        assert_eq!(fs::read(a.join(file)).unwrap(), fs::read(b.join(file)).unwrap(), "{file}");
    }
}

#[test]
fn seed_flag_beats_env_which_beats_file() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path(), "s.json", &fig1_config(3));
    let exe = env!("CARGO_BIN_EXE_arena");
    let summary = |name: &str, env: Option<&str>, flag: Option<&str>| {
        let out = dir.path().join(name);
        let mut cmd = Command::new(exe);
        cmd.args(["simulate", "--scenario", &scenario, "--out", out.to_str().unwrap()]);
        if let Some(seed) = flag {
            cmd.args(["--seed", seed]);
        }
        cmd.env_remove("ARENA_SEED");
        if let Some(seed) = env {
            cmd.env("ARENA_SEED", seed);
        }
        let status = cmd.status().unwrap();
        assert!(status.success());
        fs::read(out.join("summary.csv")).unwrap()
    };
    let file_seed = summary("file", None, None);
    let env_seed = summary("env", Some("9"), None);
    let flag_seed = summary("flag", Some("9"), Some("3"));
    let flag_nine = summary("flag9", None, Some("9"));
    assert_ne!(file_seed, env_seed);
    assert_eq!(env_seed, flag_nine);
    assert_eq!(flag_seed, file_seed);

    let status = Command::new(exe)
        .args(["simulate", "--scenario", &scenario, "--out", dir.path().join("x").to_str().unwrap()])
        .env("ARENA_SEED", "minus one")
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn sweep_writes_one_row_per_mechanism_and_horizon() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path(), "fig2.json", &fig2_config(100, "online-weighted", 5));
    let out = dir.path().join("sweep");
    let (code, _, err) = run(&["sweep", "--scenario", &scenario, "--T", "100,1000,10000", "--out", out.to_str().unwrap()]);
    assert_eq!(code, ExitCode::Success, "{err}");
    let rows = csv_rows(&out.join("sweep.csv"));
    assert_eq!(rows[0], SWEEP_COLUMNS);
    assert_eq!(rows.len(), 1 + 9);
    let online: Vec<f64> = rows[1..]
        .iter()
        .filter(|r| r[0] == "online-weighted")
        .map(|r| parse_float(&r[3]).unwrap())
        .collect();
    assert!(online.windows(2).all(|w| w[1] < w[0]), "{online:?}");
    for mechanism in ["average", "median"] {
        let bench: Vec<f64> = rows[1..]
            .iter()
            .filter(|r| r[0] == mechanism)
            .map(|r| parse_float(&r[3]).unwrap())
            .collect();
        let (lo, hi) = bench.iter().fold((f64::INFINITY, 0.0_f64), |(l, h), &v| (l.min(v), h.max(v)));
        assert!(lo > 0.1 && hi - lo < 0.02, "{mechanism}: {bench:?}");
    }
    assert!(out.join("runs/T1000_median/summary.csv").exists());

    let (code, _, _) = run(&["sweep", "--scenario", &scenario, "--T", "1000,100", "--out", dir.path().join("s2").to_str().unwrap()]);
    assert_eq!(code, ExitCode::ConfigError);
}

#[test]
fn sweep_on_lemma_preset_keeps_benchmark_constant() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path(), "l1.json", &build_lemma1_scenario(2, 10, 5, 0.25).unwrap());
    let out = dir.path().join("sweep");
    let (code, _, _) = run(&["sweep", "--scenario", &scenario, "--T", "10,100,1000", "--out", out.to_str().unwrap()]);
    assert_eq!(code, ExitCode::Success);
    for row in &csv_rows(&out.join("sweep.csv"))[1..] {
        if row[0] == "average" {
            assert!((parse_float(&row[3]).unwrap() - 0.25).abs() < 1e-9);
        }
    }
}

#[test]
fn verify_truthfulness_exit_codes() {
    let (code, stdout, _) = run(&["verify-truthfulness"]);
    assert_eq!(code, ExitCode::Success);
    assert_eq!(stdout.lines().filter(|l| l.contains("verdict=pass")).count(), 2);

    let (code, _, _) = run(&["verify-truthfulness", "--samples", "0"]);
    assert_eq!(code, ExitCode::ConfigError);
    let (code, _, _) = run(&["verify-truthfulness", "--grid", "10"]);
    assert_eq!(code, ExitCode::ConfigError);

    fn flipped(w: f64, belief: &[f64], report: &[f64], a: StepSize) -> f64 {
        2.0 * w - expected_weight_objective(w, belief, report, a)
    }
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = verify_truthfulness_command(flipped, 101, 1000, 0, &mut out, &mut err);
    assert_eq!(code, ExitCode::VerificationFailed);
    let out = String::from_utf8(out).unwrap();
    let line = out.lines().find(|l| l.contains("verdict=fail")).unwrap();
    for field in ["sample=", "belief=", "step_size=", "weight=", "best_report="] {
        assert!(line.contains(field), "{line}");
    }
}

#[test]
fn verify_bound_exit_codes() {
    let (code, stdout, _) = run(&["verify-bound", "--N", "3,5", "--T", "100", "--seeds", "3"]);
    assert_eq!(code, ExitCode::Success);
    assert_eq!(stdout.lines().count(), 1 + 6);

    let (code, _, err) = run(&["verify-bound", "--N", "100", "--T", "4", "--seeds", "1"]);
    assert_eq!(code, ExitCode::ConfigError);
    assert!(err.contains("1/2"), "{err}");
    let (code, _, _) = run(&["verify-bound", "--N", "5", "--T", "100", "--seeds", "0"]);
    assert_eq!(code, ExitCode::ConfigError);
}

#[test]
fn emit_figures_schema() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("figs");
    let (code, _, _) = run(&["emit-figures", "--out", out.to_str().unwrap()]);
    assert_eq!(code, ExitCode::Success);

    let fig1 = csv_rows(&out.join("fig1_weights.csv"));
    assert_eq!(fig1[0], WEIGHT_COLUMNS);
    assert_eq!(fig1.len(), 1 + 5 * 101);
    let last: Vec<f64> = fig1[fig1.len() - 5..].iter().map(|r| parse_float(&r[3]).unwrap()).collect();
    assert!(last.windows(2).all(|w| w[0] > w[1]), "{last:?}");
    assert!((last.iter().sum::<f64>() - 1.0).abs() < 1e-12);

    let fig2 = csv_rows(&out.join("fig2_regret.csv"));
    assert_eq!(fig2[0], SWEEP_COLUMNS);
    let series = |m: &str| -> Vec<f64> {
        fig2[1..].iter().filter(|r| r[0] == m).map(|r| parse_float(&r[3]).unwrap()).collect()
    };
    let online = series("online-weighted");
    assert!(online.windows(2).all(|w| w[1] < w[0]));
    assert!(online.last().unwrap() < &0.02);
    for m in ["average", "median"] {
        assert!(series(m).iter().all(|&v| v > 0.1), "{m}");
    }

    let (code, _, _) = run(&["emit-figures", "--out", out.to_str().unwrap()]);
    assert_eq!(code, ExitCode::IoError);
}

#[test]
fn bench_compare_ranks_online_below_the_broken_benchmark() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path(), "l1.json", &build_lemma1_scenario(2, 500, 10, 0.25).unwrap());
    let (code, stdout, err) = run(&["bench-compare", "--scenario", &scenario]);
    assert_eq!(code, ExitCode::Success, "{err}");
    let rows: Vec<Vec<&str>> = stdout.lines().map(|l| l.split(',').collect()).collect();
    assert_eq!(rows[0], ["mechanism", "regret", "time_average_regret", "bound_margin"]);
    assert_eq!(rows.len(), 4);
    let avg = |m: &str| parse_float(rows.iter().find(|r| r[0] == m).unwrap()[2]).unwrap();
    assert!((avg("average") - 0.25).abs() < 1e-9);
    assert!(avg("online-weighted") < 0.05);
    assert!(rows.iter().all(|r| r[3].is_empty() == (r[0] != "online-weighted" && r[0] != "mechanism")));

    let (code, _, _) = run(&["bench-compare", "--scenario", "/nonexistent.json"]);
    assert_eq!(code, ExitCode::IoError);
}
