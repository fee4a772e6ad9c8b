//! Command layer of the `arena` binary.
//!
//! Every command returns an [`ExitCode`] instead of exiting, so the same code
//! paths are driven directly from tests.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use arena_core::harness::{compute_regret, run_simulation_with, TraceDetail};
use arena_core::io::{
    create_output, format_float, write_json, write_summary_csv, write_sweep_csv, write_trace_csv,
    write_weight_csv,
};
use arena_core::presets::{fig1_config, fig2_config, run_sweep, sweep_config, SweepRow, FIG1_SEED, FIG2_HORIZONS, FIG2_SEED};
use arena_core::strategy::{expected_weight_objective, find_median_deviation_witness, WeightObjective};
use arena_core::verify::{verify_bound, verify_truthfulness};
use arena_core::{check_regret_bound, ArenaError, MechanismKind, ScenarioConfig};
use clap::{Parser, Subcommand};
use rayon::prelude::*;

/// Environment variable overriding a scenario's seed when `--seed` is absent.
pub const SEED_ENV: &str = "ARENA_SEED";
/// Grid size of the median deviation search run by `verify-truthfulness`.
pub const WITNESS_GRID: usize = 21;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCode {
    Success = 0,
    VerificationFailed = 1,
    ConfigError = 2,
    Infeasible = 3,
    IoError = 4,
}

impl ExitCode {
    pub fn code(self) -> i32 {
        self as i32
    }
}

impl From<&ArenaError> for ExitCode {
    fn from(err: &ArenaError) -> Self {
        match err {
            ArenaError::Infeasible(_) => ExitCode::Infeasible,
            ArenaError::Io(_) => ExitCode::IoError,
            _ => ExitCode::ConfigError,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "arena", about = "Simulate and verify online weighted aggregation of strategic feedback")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one scenario and write its trace, per-slot summary and regret report.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        overwrite: bool,
        /// Also write the full trace as JSON.
        #[arg(long)]
        trace_json: bool,
    },
    /// Run a scenario under all three mechanisms over a list of horizons.
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long = "T", value_delimiter = ',', required = true)]
        horizons: Vec<usize>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        overwrite: bool,
    },
    /// Run one scenario under all three mechanisms on the same seed and print their regrets.
    BenchCompare {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Check that truthful reporting maximizes expected weight and that the median scheme is manipulable.
    VerifyTruthfulness {
        #[arg(long, default_value_t = 101)]
        grid: usize,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Check the regret bound over (N, T, seed) grids with truthful labelers.
    VerifyBound {
        #[arg(long = "N", value_delimiter = ',', required = true)]
        labeler_counts: Vec<usize>,
        #[arg(long = "T", value_delimiter = ',', required = true)]
        horizons: Vec<usize>,
        #[arg(long)]
        seeds: usize,
    },
    /// Write the weight-evolution and regret-versus-horizon data files.
    EmitFigures {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        overwrite: bool,
    },
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_from_args<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(cli.command, stdout, stderr),
        Err(err) => {
            let _ = write!(stderr, "{err}");
            if err.use_stderr() {
                ExitCode::ConfigError
            } else {
                ExitCode::Success
            }
        }
    }
}

pub fn run(command: Command, stdout: &mut dyn Write, stderr: &mut dyn Write) -> ExitCode {
    let env_seed = std::env::var(SEED_ENV).ok();
    let result = match command {
        Command::Simulate {
            scenario,
            seed,
            out,
            overwrite,
            trace_json,
        } => {
            let seed = match resolve_seed(seed, env_seed.as_deref()) {
                Ok(seed) => seed,
                Err(err) => return report_error(&err, stderr),
            };
            simulate(&scenario, seed, &out, overwrite, trace_json, stdout)
        }
        Command::Sweep {
            scenario,
            horizons,
            out,
            overwrite,
        } => sweep(&scenario, &horizons, &out, overwrite, stdout),
        Command::BenchCompare { scenario, seed } => match resolve_seed(seed, env_seed.as_deref()) {
            Ok(seed) => bench_compare(&scenario, seed, stdout),
            Err(err) => Err(err),
        },
        Command::VerifyTruthfulness { grid, samples, seed } => {
            return verify_truthfulness_command(expected_weight_objective, grid, samples, seed, stdout, stderr)
        }
        Command::VerifyBound {
            labeler_counts,
            horizons,
            seeds,
        } => return verify_bound_command(&labeler_counts, &horizons, seeds, stdout, stderr),
        Command::EmitFigures { out, overwrite } => emit_figures(&out, overwrite),
    };
    match result {
        Ok(()) => ExitCode::Success,
        Err(err) => report_error(&err, stderr),
    }
}

fn report_error(err: &ArenaError, stderr: &mut dyn Write) -> ExitCode {
    let _ = writeln!(stderr, "error: {err}");
    ExitCode::from(err)
}

fn resolve_seed(flag: Option<u64>, env: Option<&str>) -> Result<Option<u64>, ArenaError> {
    match (flag, env) {
        (Some(seed), _) => Ok(Some(seed)),
        (None, Some(text)) => text.trim().parse().map(Some).map_err(|_| ArenaError::Config {
            field: SEED_ENV.into(),
            reason: format!("not a 64-bit unsigned integer: {text:?}"),
        }),
        (None, None) => Ok(None),
    }
}

pub fn load_scenario(path: &Path) -> Result<ScenarioConfig, ArenaError> {
    let text = fs::read_to_string(path).map_err(|e| ArenaError::Io(format!("{}: {e}", path.display())))?;
    ScenarioConfig::from_json(&text)
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> ArenaError {
    ArenaError::Io(format!("{}: {e}", path.display()))
}

fn ensure_dir(dir: &Path) -> Result<(), ArenaError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn flush(path: &Path, mut file: fs::File) -> Result<(), ArenaError> {
    file.flush().map_err(|e| io_err(path, e))
}

/// Writes `trace.csv`, `summary.csv` and `report.json` (plus `trace.json` on request) into `out`.
pub fn simulate(
    scenario_path: &Path,
    seed: Option<u64>,
    out: &Path,
    overwrite: bool,
    trace_json: bool,
    stdout: &mut dyn Write,
) -> Result<(), ArenaError> {
    let mut config = load_scenario(scenario_path)?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    let scenario = config.validate()?;
    let detail = if trace_json {
        TraceDetail::Full
    } else {
        TraceDetail::Summary
    };
    let trace = run_simulation_with(&scenario, detail)?;
    let report = compute_regret(&trace)?;

    ensure_dir(out)?;
    let path = out.join("trace.csv");
    let file = create_output(&path, overwrite)?;
    write_trace_csv(&trace, &file)?;
    flush(&path, file)?;
    let path = out.join("summary.csv");
    let file = create_output(&path, overwrite)?;
    write_summary_csv(&report, &file)?;
    flush(&path, file)?;
    let path = out.join("report.json");
    write_json(&report, create_output(&path, overwrite)?)?;
    if trace_json {
        let path = out.join("trace.json");
        let mut file = create_output(&path, overwrite)?;
        file.write_all(trace.to_json().as_bytes()).map_err(|e| io_err(&path, e))?;
    }

    let _ = writeln!(stdout, "mechanism={}", report.mechanism);
    let _ = writeln!(stdout, "regret={:.16e}", report.regret);
    let _ = writeln!(stdout, "time_average_regret={:.16e}", report.time_average_regret);
    if matches!(scenario.mechanism, MechanismKind::OnlineWeighted { .. }) {
        let margin = check_regret_bound(&report, scenario.labeler_count, scenario.slot_count);
        let _ = writeln!(stdout, "bound_margin={margin:.16e}");
    }
    Ok(())
}

/// Runs every (horizon, mechanism) pair in parallel. Each run writes its per-slot
/// summary to its own `runs/T<T>_<mechanism>/` directory; `sweep.csv` is written
/// once at the end.
pub fn sweep(
    scenario_path: &Path,
    horizons: &[usize],
    out: &Path,
    overwrite: bool,
    stdout: &mut dyn Write,
) -> Result<(), ArenaError> {
    if horizons.is_empty() {
        return Err(ArenaError::Config {
            field: "T".into(),
            reason: "empty horizon list".into(),
        });
    }
    if horizons.windows(2).any(|w| w[0] >= w[1]) || horizons[0] == 0 {
        return Err(ArenaError::Config {
            field: "T".into(),
            reason: "horizons must be positive and strictly ascending".into(),
        });
    }
    let base = load_scenario(scenario_path)?;
    let mut jobs = Vec::new();
    for &t in horizons {
        for mechanism in MechanismKind::IDS {
            let scenario = sweep_config(&base, t, mechanism).validate()?;
            jobs.push((t, mechanism, scenario));
        }
    }
    ensure_dir(out)?;
    let rows: Vec<SweepRow> = jobs
        .par_iter()
        .map(|(t, mechanism, scenario)| {
            let report = compute_regret(&run_simulation_with(scenario, TraceDetail::Summary)?)?;
            let dir = out.join("runs").join(format!("T{t}_{mechanism}"));
            ensure_dir(&dir)?;
            let path = dir.join("summary.csv");
            let file = create_output(&path, overwrite)?;
            write_summary_csv(&report, &file)?;
            flush(&path, file)?;
            Ok(SweepRow {
                mechanism: mechanism.to_string(),
                slot_count: *t,
                regret: report.regret,
                time_average_regret: report.time_average_regret,
            })
        })
        .collect::<Result<_, ArenaError>>()?;

    let path = out.join("sweep.csv");
    let file = create_output(&path, overwrite)?;
    write_sweep_csv(&rows, &file)?;
    flush(&path, file)?;
    for row in &rows {
        let _ = writeln!(
            stdout,
            "mechanism={} T={} time_average_regret={:.16e}",
            row.mechanism, row.slot_count, row.time_average_regret
        );
    }
    Ok(())
}

/// Prints `mechanism,regret,time_average_regret,bound_margin` for each mechanism on
/// the scenario's own horizon and seed. The margin is empty for the benchmarks.
pub fn bench_compare(scenario_path: &Path, seed: Option<u64>, stdout: &mut dyn Write) -> Result<(), ArenaError> {
    let mut base = load_scenario(scenario_path)?;
    if let Some(seed) = seed {
        base.seed = seed;
    }
    let scenarios = MechanismKind::IDS
        .iter()
        .map(|&mechanism| {
            let mut config = base.clone();
            config.mechanism = mechanism.to_string();
            config.validate()
        })
        .collect::<Result<Vec<_>, _>>()?;
    let reports = scenarios
        .par_iter()
        .map(|scenario| compute_regret(&run_simulation_with(scenario, TraceDetail::Summary)?))
        .collect::<Result<Vec<_>, ArenaError>>()?;

    let _ = writeln!(stdout, "mechanism,regret,time_average_regret,bound_margin");
    for (scenario, report) in scenarios.iter().zip(&reports) {
        let margin = match scenario.mechanism {
            MechanismKind::OnlineWeighted { .. } => format_float(check_regret_bound(
                report,
                scenario.labeler_count,
                scenario.slot_count,
            )),
            _ => String::new(),
        };
        let _ = writeln!(
            stdout,
            "{},{},{},{margin}",
            report.mechanism,
            format_float(report.regret),
            format_float(report.time_average_regret)
        );
    }
    Ok(())
}

/// Runs both truthfulness checks against `objective`, printing one verdict line each.
pub fn verify_truthfulness_command(
    objective: WeightObjective,
    grid: usize,
    samples: usize,
    seed: u64,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> ExitCode {
    let verdict = match verify_truthfulness(objective, grid, samples, seed) {
        Ok(verdict) => verdict,
        Err(err) => return report_error(&err, stderr),
    };
    let mut status = ExitCode::Success;
    match verdict {
        Ok(n) => {
            let _ = writeln!(stdout, "check=truthful_argmax verdict=pass samples={n} grid={grid}");
        }
        Err(cx) => {
            let _ = writeln!(
                stdout,
                "check=truthful_argmax verdict=fail sample={} belief={:.16e} step_size={:.16e} weight={:.16e} best_report={:.16e}",
                cx.sample, cx.belief, cx.step_size, cx.weight, cx.best_report
            );
            status = ExitCode::VerificationFailed;
        }
    }
    match find_median_deviation_witness(WITNESS_GRID) {
        Some(w) => {
            let _ = writeln!(
                stdout,
                "check=median_manipulable verdict=pass preferences={:?} labeler={} deviation={} truthful_probability={} deviating_probability={}",
                w.preferences,
                w.labeler + 1,
                w.deviation,
                w.truthful_probability,
                w.deviating_probability
            );
        }
        None => {
            let _ = writeln!(stdout, "check=median_manipulable verdict=fail grid={WITNESS_GRID}");
            status = ExitCode::VerificationFailed;
        }
    }
    status
}

/// Runs seeds `1..=seeds` for every `(N, T)` and prints a CSV table of margins.
pub fn verify_bound_command(
    labeler_counts: &[usize],
    horizons: &[usize],
    seeds: usize,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> ExitCode {
    let seed_list: Vec<u64> = (1..=seeds as u64).collect();
    let rows = match verify_bound(labeler_counts, horizons, &seed_list) {
        Ok(rows) => rows,
        Err(err) => return report_error(&ArenaError::Config {
            field: "N/T/seeds".into(),
            reason: err.to_string(),
        }, stderr),
    };
    let _ = writeln!(stdout, "N,T,seed,regret,bound,margin");
    for r in &rows {
        let _ = writeln!(
            stdout,
            "{},{},{},{:.16e},{:.16e},{:.16e}",
            r.labeler_count, r.slot_count, r.seed, r.regret, r.bound, r.margin
        );
    }
    let violations: Vec<_> = rows.iter().filter(|r| r.margin < 0.0).collect();
    if violations.is_empty() {
        ExitCode::Success
    } else {
        for r in violations {
            let _ = writeln!(
                stderr,
                "violation: N={} T={} seed={} regret={} bound={}",
                r.labeler_count, r.slot_count, r.seed, r.regret, r.bound
            );
        }
        ExitCode::VerificationFailed
    }
}

/// Writes `fig1_weights.csv` (slot, labeler, weight, share) and `fig2_regret.csv`
/// (mechanism, T, regret, time_average_regret) from the fixed-seed presets.
pub fn emit_figures(out: &Path, overwrite: bool) -> Result<(), ArenaError> {
    ensure_dir(out)?;
    let fig1 = fig1_config(FIG1_SEED).validate()?;
    let trace = run_simulation_with(&fig1, TraceDetail::Summary)?;
    let path = out.join("fig1_weights.csv");
    let file = create_output(&path, overwrite)?;
    write_weight_csv(&trace, &file)?;
    flush(&path, file)?;

    let rows = run_sweep(&fig2_config(FIG2_HORIZONS[0], "online-weighted", FIG2_SEED), &FIG2_HORIZONS)?;
    let path = out.join("fig2_regret.csv");
    let file = create_output(&path, overwrite)?;
    write_sweep_csv(&rows, &file)?;
    flush(&path, file)?;
    Ok(())
}
