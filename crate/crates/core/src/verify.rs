//! Sampled verification routines behind the `verify-*` commands.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{ArenaError, Result};
use crate::harness::{check_regret_bound, compute_regret, regret_bound, run_simulation_with, TraceDetail};
use crate::mechanism::default_step_size;
use crate::model::StepSize;
use crate::presets::bound_config;
use crate::strategy::{best_grid_report, grid_point, WeightObjective, MIN_GRID_RESOLUTION};

/// A sampled `(P, α, w)` tuple whose grid argmax is not the truthful report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruthfulnessCounterexample {
    pub sample: usize,
    pub belief: f64,
    pub step_size: f64,
    pub weight: f64,
    pub best_report: f64,
}

/// Samples `samples` tuples with `P` on the grid, `α ∈ (0, 1/2)` and `w ∈ [e^-5, e^5]`,
/// and checks that the grid argmax of `objective` is `P` every time.
///
/// The outer `Result` carries argument errors; the inner one the first counterexample.
pub fn verify_truthfulness(
    objective: WeightObjective,
    grid_resolution: usize,
    samples: usize,
    seed: u64,
) -> Result<std::result::Result<usize, TruthfulnessCounterexample>> {
    if grid_resolution < MIN_GRID_RESOLUTION {
        return Err(ArenaError::Domain(format!(
            "grid resolution {grid_resolution} below {MIN_GRID_RESOLUTION}"
        )));
    }
    if samples == 0 {
        return Err(ArenaError::Domain("sample count must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for sample in 0..samples {
        let belief = grid_point(rng.random_range(0..grid_resolution), grid_resolution);
        let alpha = loop {
            if let Ok(a) = StepSize::new(0.5 * rng.random::<f64>()) {
                break a;
            }
        };
        let weight = rng.random_range(-5.0..5.0_f64).exp();
        let best = best_grid_report(objective, weight, belief, alpha, grid_resolution);
        if best != belief {
            return Ok(Err(TruthfulnessCounterexample {
                sample,
                belief,
                step_size: alpha.get(),
                weight,
                best_report: best,
            }));
        }
    }
    Ok(Ok(samples))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundRow {
    pub labeler_count: usize,
    pub slot_count: usize,
    pub seed: u64,
    pub regret: f64,
    pub bound: f64,
    pub margin: f64,
}

/// Runs [`bound_config`] for every `(N, T, seed)` and reports the margin to `3 √(T ln N / 2)`.
///
/// Fails up front if any `(N, T)` pair has a default step size of 1/2 or more.
/// Rows are ordered by `N`, then `T`, then seed.
pub fn verify_bound(labeler_counts: &[usize], horizons: &[usize], seeds: &[u64]) -> Result<Vec<BoundRow>> {
    if labeler_counts.is_empty() || horizons.is_empty() || seeds.is_empty() {
        return Err(ArenaError::Domain("N, T and seed lists must be nonempty".into()));
    }
    for &n in labeler_counts {
        for &t in horizons {
            default_step_size(n, t)?;
        }
    }
    let jobs: Vec<(usize, usize, u64)> = labeler_counts
        .iter()
        .flat_map(|&n| horizons.iter().flat_map(move |&t| seeds.iter().map(move |&s| (n, t, s))))
        .collect();
    jobs.par_iter()
        .map(|&(n, t, seed)| {
            let scenario = bound_config(n, t, seed).validate()?;
            let report = compute_regret(&run_simulation_with(&scenario, TraceDetail::Summary)?)?;
            Ok(BoundRow {
                labeler_count: n,
                slot_count: t,
                seed,
                regret: report.regret,
                bound: regret_bound(n, t),
                margin: check_regret_bound(&report, n, t),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strategy::expected_weight_objective;

    fn flipped(w: f64, belief: &[f64], report: &[f64], a: StepSize) -> f64 {
        2.0 * w - expected_weight_objective(w, belief, report, a)
    }

    #[test]
    fn truthful_objective_passes() {
        assert_eq!(verify_truthfulness(expected_weight_objective, 101, 500, 1).unwrap(), Ok(500));
    }

    #[test]
    fn flipped_penalty_yields_counterexample() {
        let cx = verify_truthfulness(flipped, 101, 500, 1).unwrap().unwrap_err();
        assert_ne!(cx.best_report, cx.belief);
    }

    #[test]
    fn argument_errors() {
        assert!(verify_truthfulness(expected_weight_objective, 101, 0, 1).is_err());
        assert!(verify_truthfulness(expected_weight_objective, 7, 10, 1).is_err());
        assert!(verify_bound(&[100], &[4], &[1]).is_err());
        assert!(verify_bound(&[5], &[100], &[]).is_err());
    }

    #[test]
    fn small_bound_run() {
        let rows = verify_bound(&[3], &[50], &[1, 2]).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.margin >= 0.0));
    }
}
