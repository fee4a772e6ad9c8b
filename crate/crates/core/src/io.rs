//! CSV and JSON emission.
//!
//! Floats are written in scientific notation with 17 significant digits so
//! parsing a file reproduces the in-memory values exactly. Labeler columns are
//! 1-based.

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::Path;

use crate::error::{ArenaError, Result};
use crate::harness::{RegretReport, SimulationTrace};
use crate::presets::SweepRow;

pub const TRACE_COLUMNS: [&str; 5] = ["slot", "labeler", "weight_before", "mean_report", "slot_loss"];
pub const SUMMARY_COLUMNS: [&str; 5] = [
    "slot",
    "aggregation_loss",
    "best_labeler_loss",
    "cumulative_regret",
    "time_average_regret",
];
pub const SWEEP_COLUMNS: [&str; 4] = ["mechanism", "T", "regret", "time_average_regret"];
pub const WEIGHT_COLUMNS: [&str; 4] = ["slot", "labeler", "weight", "share"];

pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn parse_float(s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| ArenaError::Parse(format!("not a number: {s:?}")))
}

/// Opens `path` for writing. Existing files are only replaced when `overwrite` is set.
pub fn create_output(path: &Path, overwrite: bool) -> Result<File> {
    let mut options = OpenOptions::new();
    options.write(true);
    if overwrite {
        options.create(true).truncate(true);
    } else {
        options.create_new(true);
    }
    options.open(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::AlreadyExists {
            ArenaError::Io(format!(
                "{} already exists; pass --overwrite to replace it",
                path.display()
            ))
        } else {
            ArenaError::Io(format!("{}: {e}", path.display()))
        }
    })
}

/// One row per (slot, labeler): normalized weight used in the slot, mean report, report MSE.
pub fn write_trace_csv<W: Write>(trace: &SimulationTrace, out: W) -> Result<()> {
    let mut csv = csv::Writer::from_writer(out);
    csv.write_record(TRACE_COLUMNS)?;
    for record in &trace.records {
        for i in 0..trace.labeler_count {
            csv.write_record([
                record.slot.to_string(),
                (i + 1).to_string(),
                format_float(record.weights.as_slice()[i]),
                format_float(record.mean_report[i]),
                format_float(record.report_loss[i]),
            ])?;
        }
    }
    csv.flush()?;
    Ok(())
}

/// One row per slot. `best_labeler_loss` is the hindsight-best cumulative loss through
/// that slot; `cumulative_regret` is the regret at that horizon.
pub fn write_summary_csv<W: Write>(report: &RegretReport, out: W) -> Result<()> {
    let mut csv = csv::Writer::from_writer(out);
    csv.write_record(SUMMARY_COLUMNS)?;
    for (t, ((agg, best), regret)) in report
        .aggregation_loss_series
        .iter()
        .zip(&report.hindsight_loss_series)
        .zip(&report.cumulative_regret_series)
        .enumerate()
    {
        let slot = t + 1;
        csv.write_record([
            slot.to_string(),
            format_float(*agg),
            format_float(*best),
            format_float(*regret),
            format_float(regret / slot as f64),
        ])?;
    }
    csv.flush()?;
    Ok(())
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut csv = csv::Writer::from_writer(out);
    csv.write_record(SWEEP_COLUMNS)?;
    for row in rows {
        csv.write_record([
            row.mechanism.clone(),
            row.slot_count.to_string(),
            format_float(row.regret),
            format_float(row.time_average_regret),
        ])?;
    }
    csv.flush()?;
    Ok(())
}

/// Weight evolution: raw weight `w_i^t` and its share of the slot total, for
/// `t = 1..=T+1` (the last row holds the weights after the final update).
pub fn write_weight_csv<W: Write>(trace: &SimulationTrace, out: W) -> Result<()> {
    let mut csv = csv::Writer::from_writer(out);
    csv.write_record(WEIGHT_COLUMNS)?;
    let final_raw: Vec<f64> = trace
        .final_weights
        .as_slice()
        .iter()
        .map(|w| w * trace.final_log_scale.exp())
        .collect();
    let rows = trace
        .records
        .iter()
        .map(|r| (r.slot, r.raw_weights(), r.weights.as_slice().to_vec()))
        .chain(std::iter::once((
            trace.slot_count() + 1,
            final_raw,
            trace.final_weights.as_slice().to_vec(),
        )));
    for (slot, raw, normalized) in rows {
        let total: f64 = normalized.iter().sum();
        for (i, (w, n)) in raw.iter().zip(&normalized).enumerate() {
            csv.write_record([
                slot.to_string(),
                (i + 1).to_string(),
                format_float(*w),
                format_float(n / total),
            ])?;
        }
    }
    csv.flush()?;
    Ok(())
}

pub fn write_json<T: serde::Serialize, W: Write>(value: &T, mut out: W) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| ArenaError::Parse(e.to_string()))?;
    out.write_all(text.as_bytes())?;
    out.write_all(b"\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn refuses_to_clobber_without_overwrite() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        create_output(&path, false).unwrap().write_all(b"a").unwrap();
        let err = create_output(&path, false).unwrap_err();
        assert!(err.to_string().contains("--overwrite"));
        create_output(&path, true).unwrap().write_all(b"b").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"b");
    }

    proptest! {
        #[test]
        fn floats_round_trip(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
            let s = format_float(x);
            prop_assert_eq!(parse_float(&s).unwrap().to_bits(), x.to_bits());
        }
    }
}
