//! Fixed experiment presets and the horizon sweep.
//!
//! Preset seeds are fixed so emitted data files are reproducible. Exact curve
//! values depend on this generator; only the ordinal shape is meaningful.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::harness::{compute_regret, run_simulation_with, TraceDetail};
use crate::mechanism::MechanismKind;
use crate::model::{LabelerSpec, PromptsPerSlot, ScenarioConfig, StepSizeSpec};

pub const FIG1_SEED: u64 = 20_240_901;
pub const FIG2_SEED: u64 = 20_240_902;
pub const FIG2_HORIZONS: [usize; 5] = [100, 300, 1_000, 3_000, 10_000];
pub const PRESET_PROMPTS_PER_SLOT: usize = 50;

fn labelers_with_noise(noise: impl Iterator<Item = f64>) -> Vec<LabelerSpec> {
    noise.map(|s| LabelerSpec::new(s, "truthful")).collect()
}

/// Five truthful labelers with noise 0.1, 0.2, ..., 0.5 (labeler 1 most accurate),
/// online-weighted, `T = 100`, `m_t = 50`.
pub fn fig1_config(seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        labeler_count: 5,
        slot_count: 100,
        prompts_per_slot: PromptsPerSlot::Constant(PRESET_PROMPTS_PER_SLOT),
        labelers: labelers_with_noise((1..=5).map(|i| 0.1 * i as f64)),
        mechanism: "online-weighted".into(),
        step_size: StepSizeSpec::Auto,
        seed,
        oracle_labeler: None,
    }
}

/// `N = 100`, `m_t = 50`: labeler 1 holds the realized outcome, the other 99 are
/// truthful with noise spread evenly over [0.1, 0.5].
pub fn fig2_config(slot_count: usize, mechanism: &str, seed: u64) -> ScenarioConfig {
    let n = 100;
    let noise = (0..n).map(|i| {
        if i == 0 {
            0.0
        } else {
            0.1 + 0.4 * (i - 1) as f64 / (n - 2) as f64
        }
    });
    ScenarioConfig {
        labeler_count: n,
        slot_count,
        prompts_per_slot: PromptsPerSlot::Constant(PRESET_PROMPTS_PER_SLOT),
        labelers: labelers_with_noise(noise),
        mechanism: mechanism.into(),
        step_size: StepSizeSpec::Auto,
        seed,
        oracle_labeler: Some(0),
    }
}

/// Truthful labelers with noise spread evenly over [0.05, 0.5], online-weighted with the
/// default step size. Used for regret-bound checks.
pub fn bound_config(labeler_count: usize, slot_count: usize, seed: u64) -> ScenarioConfig {
    let span = (labeler_count - 1).max(1) as f64;
    ScenarioConfig {
        labeler_count,
        slot_count,
        prompts_per_slot: PromptsPerSlot::Constant(PRESET_PROMPTS_PER_SLOT),
        labelers: labelers_with_noise((0..labeler_count).map(|i| 0.05 + 0.45 * i as f64 / span)),
        mechanism: "online-weighted".into(),
        step_size: StepSizeSpec::Auto,
        seed,
        oracle_labeler: None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub mechanism: String,
    pub slot_count: usize,
    pub regret: f64,
    pub time_average_regret: f64,
}

/// Runs `base` under every mechanism at every horizon, re-resolving the step size per horizon.
///
/// Runs are independent and evaluated in parallel; rows come back ordered by
/// horizon, then mechanism in [`MechanismKind::IDS`] order.
pub fn run_sweep(base: &ScenarioConfig, horizons: &[usize]) -> Result<Vec<SweepRow>> {
    let jobs: Vec<(usize, &str)> = horizons
        .iter()
        .flat_map(|&t| MechanismKind::IDS.iter().map(move |&m| (t, m)))
        .collect();
    jobs.par_iter()
        .map(|&(t, mechanism)| {
            let config = sweep_config(base, t, mechanism);
            let scenario = config.validate()?;
            let report = compute_regret(&run_simulation_with(&scenario, TraceDetail::Summary)?)?;
            Ok(SweepRow {
                mechanism: mechanism.to_string(),
                slot_count: t,
                regret: report.regret,
                time_average_regret: report.time_average_regret,
            })
        })
        .collect()
}

/// `base` with the given horizon and mechanism and an `"auto"` step size.
pub fn sweep_config(base: &ScenarioConfig, slot_count: usize, mechanism: &str) -> ScenarioConfig {
    let mut config = base.clone();
    config.slot_count = slot_count;
    config.mechanism = mechanism.to_string();
    config.step_size = StepSizeSpec::Auto;
    if let PromptsPerSlot::PerSlot(ms) = &config.prompts_per_slot {
        // Per-slot counts cannot follow a horizon change; keep the first slot's count.
        config.prompts_per_slot = PromptsPerSlot::Constant(ms.first().copied().unwrap_or(1));
    }
    config
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        let s = fig1_config(FIG1_SEED).validate().unwrap();
        assert_eq!(s.labeler_count, 5);
        assert!(s.labelers.windows(2).all(|w| w[0].noise < w[1].noise));
        for t in FIG2_HORIZONS {
            for m in MechanismKind::IDS {
                fig2_config(t, m, FIG2_SEED).validate().unwrap();
            }
        }
        bound_config(100, 100, 1).validate().unwrap();
        assert!(bound_config(100, 4, 1).validate().is_err());
    }

    #[test]
    fn sweep_rows_are_ordered() {
        let rows = run_sweep(&fig1_config(3), &[20, 40]).unwrap();
        let keys: Vec<(usize, &str)> = rows.iter().map(|r| (r.slot_count, r.mechanism.as_str())).collect();
        assert_eq!(
            keys,
            vec![
                (20, "average"),
                (20, "median"),
                (20, "online-weighted"),
                (40, "average"),
                (40, "median"),
                (40, "online-weighted"),
            ]
        );
    }
}
