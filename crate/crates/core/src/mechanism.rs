//! Aggregation rules and the online weight dynamics.
//!
//! Three rules are provided: the weighted mean of reports, its uniform-weight
//! special case, and the per-prompt median commitment. Only the online
//! mechanism moves weights; it applies the linear penalty
//! `w' = w (1 - α · slot_mse)` after each slot.

use std::cmp::Ordering;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ArenaError, Result};
use crate::model::{in_unit_interval, FeedbackMatrix, SlotBatch, StepSize, WeightVector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MechanismKind {
    /// Uniform mean of reports; weights never move.
    Average,
    /// Per-prompt median commitment; weights never move.
    Median,
    /// Weighted mean with the linear-penalty update.
    OnlineWeighted { step_size: StepSize },
}

impl MechanismKind {
    pub const IDS: [&'static str; 3] = ["average", "median", "online-weighted"];

    pub fn from_id(id: &str, step_size: StepSize) -> Result<Self> {
        match id {
            "average" => Ok(MechanismKind::Average),
            "median" => Ok(MechanismKind::Median),
            "online-weighted" => Ok(MechanismKind::OnlineWeighted { step_size }),
            other => Err(ArenaError::Domain(format!(
                "unknown mechanism {other:?}, expected one of {:?}",
                Self::IDS
            ))),
        }
    }

    pub fn id(&self) -> &'static str {
        match self {
            MechanismKind::Average => "average",
            MechanismKind::Median => "median",
            MechanismKind::OnlineWeighted { .. } => "online-weighted",
        }
    }
}

/// Per-prompt aggregated preferences for one slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregationResult {
    pub values: Vec<f64>,
    /// Median mechanism only: the labeler credited with each prompt's commitment.
    pub committed: Option<Vec<usize>>,
}

fn check_column(column: &[f64]) -> Result<()> {
    if column.is_empty() {
        return Err(ArenaError::Domain("empty feedback column".into()));
    }
    if let Some(v) = column.iter().find(|v| !in_unit_interval(**v)) {
        return Err(ArenaError::Domain(format!("feedback {v} outside [0, 1]")));
    }
    Ok(())
}

fn bounds(column: &[f64]) -> (f64, f64) {
    column
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        })
}

/// Weighted mean `Σ w_i f_i / Σ w_i`, a convex combination of the column.
pub fn aggregate_weighted(weights: &WeightVector, column: &[f64]) -> Result<f64> {
    if weights.len() != column.len() {
        return Err(ArenaError::Shape {
            expected: weights.len(),
            actual: column.len(),
        });
    }
    check_column(column)?;
    Ok(weighted_mean(weights.as_slice(), column))
}

// Clamped to the column's range so rounding can never leave the convex hull.
pub(crate) fn weighted_mean(weights: &[f64], column: &[f64]) -> f64 {
    let (num, den) = weights
        .iter()
        .zip(column)
        .fold((0.0, 0.0), |(num, den), (w, f)| (num + w * f, den + w));
    let (lo, hi) = bounds(column);
    (num / den).clamp(lo, hi)
}

/// Uniform mean of the column.
pub fn aggregate_average(column: &[f64]) -> Result<f64> {
    check_column(column)?;
    let sum: f64 = column.iter().sum();
    let (lo, hi) = bounds(column);
    Ok((sum / column.len() as f64).clamp(lo, hi))
}

/// 1-based position of the median in the sorted column: `N/2` for even `N`, `(N+1)/2` for odd.
pub fn median_position(n: usize) -> usize {
    n.div_ceil(2)
}

/// Sorts the column ascending (ties by labeler index) and returns the value and
/// 0-based labeler index at [`median_position`].
pub fn select_median(column: &[f64]) -> Result<(f64, usize)> {
    check_column(column)?;
    let mut order: Vec<usize> = (0..column.len()).collect();
    order.sort_by(|&a, &b| column[a].total_cmp(&column[b]).then(a.cmp(&b)));
    let k = order[median_position(column.len()) - 1];
    Ok((column[k], k))
}

/// Credits the commitment uniformly at random among labelers whose report equals
/// the committed median value.
pub fn credit_median_commitment<R: Rng + ?Sized>(column: &[f64], value: f64, rng: &mut R) -> usize {
    let tied: Vec<usize> = column
        .iter()
        .enumerate()
        .filter(|(_, v)| v.total_cmp(&value) == Ordering::Equal)
        .map(|(i, _)| i)
        .collect();
    debug_assert!(!tied.is_empty());
    tied[rng.random_range(0..tied.len())]
}

/// Aggregates every prompt of a slot under `kind`.
///
/// `tie_rng` is only consulted by the median mechanism, to credit ties.
pub fn aggregate_slot<R: Rng + ?Sized>(
    kind: &MechanismKind,
    weights: &WeightVector,
    feedback: &FeedbackMatrix,
    tie_rng: &mut R,
) -> Result<AggregationResult> {
    if feedback.labeler_count() != weights.len() {
        return Err(ArenaError::Shape {
            expected: weights.len(),
            actual: feedback.labeler_count(),
        });
    }
    let m = feedback.prompt_count();
    let mut column = Vec::with_capacity(weights.len());
    let mut values = Vec::with_capacity(m);
    let mut committed = matches!(kind, MechanismKind::Median).then(|| Vec::with_capacity(m));
    for j in 0..m {
        feedback.column_into(j, &mut column);
        let value = match kind {
            MechanismKind::Average => aggregate_average(&column)?,
            MechanismKind::OnlineWeighted { .. } => aggregate_weighted(weights, &column)?,
            MechanismKind::Median => {
                let (value, _) = select_median(&column)?;
                if let Some(committed) = committed.as_mut() {
                    committed.push(credit_median_commitment(&column, value, tie_rng));
                }
                value
            }
        };
        values.push(value);
    }
    Ok(AggregationResult { values, committed })
}

/// Mean squared error of `row` against the slot's realized outcomes.
pub fn slot_loss(row: &[f64], outcomes: &SlotBatch) -> f64 {
    let m = row.len() as f64;
    row.iter()
        .zip(outcomes.outcome_values())
        .map(|(r, p)| (r - p) * (r - p))
        .sum::<f64>()
        / m
}

/// `w_i' = w_i (1 - α (1/m) Σ_j (P̂_ij - p_j)²)`.
///
/// With `α < 1/2` every factor exceeds `1/2`, so outputs stay strictly positive
/// and never exceed the inputs.
pub fn update_weights_online(
    weights: &WeightVector,
    feedback: &FeedbackMatrix,
    outcomes: &SlotBatch,
    step_size: StepSize,
) -> Result<WeightVector> {
    if feedback.labeler_count() != weights.len() {
        return Err(ArenaError::Shape {
            expected: weights.len(),
            actual: feedback.labeler_count(),
        });
    }
    if feedback.prompt_count() != outcomes.len() {
        return Err(ArenaError::Shape {
            expected: outcomes.len(),
            actual: feedback.prompt_count(),
        });
    }
    let alpha = step_size.get();
    let updated = weights
        .as_slice()
        .iter()
        .zip(feedback.rows())
        .map(|(w, row)| w * (1.0 - alpha * slot_loss(row, outcomes)))
        .collect();
    WeightVector::new(updated)
}

/// `α = (2/3) √(2 ln N / T)`; errors instead of clamping when the value reaches 1/2.
pub fn default_step_size(labeler_count: usize, slot_count: usize) -> Result<StepSize> {
    if labeler_count < 2 || slot_count < 1 {
        return Err(ArenaError::Domain(format!(
            "default step size needs N >= 2 and T >= 1, got N={labeler_count}, T={slot_count}"
        )));
    }
    let alpha = (2.0 / 3.0) * (2.0 * (labeler_count as f64).ln() / slot_count as f64).sqrt();
    if alpha >= 0.5 {
        return Err(ArenaError::Domain(format!(
            "default step size {alpha:.5} for N={labeler_count}, T={slot_count} is not below 1/2; \
             raise T or set the step size explicitly"
        )));
    }
    StepSize::new(alpha)
}

/// Rescales so the weights sum to `N`, keeping their ratios.
pub fn normalize_weights(weights: &WeightVector) -> WeightVector {
    let n = weights.len() as f64;
    let scale = n / weights.sum();
    WeightVector::new(weights.as_slice().iter().map(|w| w * scale).collect())
        .expect("rescaled positive weights stay positive")
}
