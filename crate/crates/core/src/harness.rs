//! The online simulation loop and its regret and utility accounting.
//!
//! Each slot runs three stages: labelers report (Stage I), the mechanism
//! aggregates and the result is recorded (Stage II, no policy is trained),
//! then outcomes are revealed and weights are updated (Stage III).
//!
//! Weights are renormalized to sum `N` after every update. The trace keeps the
//! running log of the discarded scale so raw weights can be recovered for
//! utility accounting.

use serde::{Deserialize, Serialize};

use crate::error::{ArenaError, Result};
use crate::mechanism::{
    aggregate_slot, normalize_weights, slot_loss, update_weights_online, AggregationResult,
    MechanismKind,
};
use crate::model::{
    generate_slot, in_unit_interval, tie_rng, FeedbackMatrix, LabelerMatrix, LabelerSpec,
    PreferenceProfile, PromptsPerSlot, ScenarioConfig, SlotBatch, StepSizeSpec, Scenario,
    WeightVector,
};
use crate::strategy::{lemma1_adversary_reports, lemma2_adversary_reports, ReportContext};

/// How much of each slot a trace retains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TraceDetail {
    /// Keep outcomes, private preferences, reports and aggregates for every slot.
    #[default]
    Full,
    /// Keep per-labeler and system losses only. Needed for long, wide runs.
    Summary,
}

/// Raw matrices of one slot, kept under [`TraceDetail::Full`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotDetail {
    pub batch: SlotBatch,
    pub profile: PreferenceProfile,
    pub feedback: FeedbackMatrix,
    pub aggregation: AggregationResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotRecord {
    pub slot: usize,
    /// Normalized weights used for this slot's aggregation (before the update).
    pub weights: WeightVector,
    /// Raw weights are `weights * exp(log_scale)`.
    pub log_scale: f64,
    pub mean_report: Vec<f64>,
    /// Slot MSE of each labeler's reports against the outcomes.
    pub report_loss: Vec<f64>,
    /// Slot MSE of each labeler's private preferences against the outcomes.
    pub preference_loss: Vec<f64>,
    /// Slot MSE of the aggregated preferences.
    pub aggregation_loss: f64,
    pub detail: Option<SlotDetail>,
}

impl SlotRecord {
    pub fn raw_weights(&self) -> Vec<f64> {
        let scale = self.log_scale.exp();
        self.weights.as_slice().iter().map(|w| w * scale).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationTrace {
    pub mechanism: MechanismKind,
    pub labeler_count: usize,
    pub seed: u64,
    pub records: Vec<SlotRecord>,
    /// Normalized weights after the last update.
    pub final_weights: WeightVector,
    pub final_log_scale: f64,
}

impl SimulationTrace {
    pub fn slot_count(&self) -> usize {
        self.records.len()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("trace serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| ArenaError::Parse(e.to_string()))
    }
}

/// Runs the scenario keeping full per-slot detail.
pub fn run_simulation(scenario: &Scenario) -> Result<SimulationTrace> {
    run_simulation_with(scenario, TraceDetail::Full)
}

pub fn run_simulation_with(scenario: &Scenario, detail: TraceDetail) -> Result<SimulationTrace> {
    let n = scenario.labeler_count;
    let mut weights = WeightVector::uniform(n);
    let mut log_scale = 0.0_f64;
    let mut records = Vec::with_capacity(scenario.slot_count);

    for t in 1..=scenario.slot_count {
        let invariant = |e: ArenaError| match e {
            ArenaError::Infeasible(_) => e,
            other => ArenaError::Invariant {
                slot: t,
                reason: other.to_string(),
            },
        };

        // Stage I: private preferences and reports.
        let (batch, profile) = generate_slot(scenario, t)?;
        let m = batch.len();
        let mut reports = Vec::with_capacity(n * m);
        for (i, labeler) in scenario.labelers.iter().enumerate() {
            let ctx = ReportContext {
                belief: profile.row(i),
                outcomes: &batch,
                labeler_count: n,
                weight: weights.as_slice()[i],
                step_size: scenario.step_size,
            };
            let row = labeler.strategy.report(&ctx).map_err(invariant)?;
            if row.len() != m {
                return Err(ArenaError::Invariant {
                    slot: t,
                    reason: format!("labeler {i} reported {} values for {m} prompts", row.len()),
                });
            }
            reports.extend(row);
        }
        let feedback = LabelerMatrix::new(n, m, reports).map_err(invariant)?;

        // Stage II: aggregate and record.
        let mut ties = tie_rng(scenario.seed, t);
        let aggregation =
            aggregate_slot(&scenario.mechanism, &weights, &feedback, &mut ties).map_err(invariant)?;
        if let Some(v) = aggregation.values.iter().find(|v| !in_unit_interval(**v)) {
            return Err(ArenaError::Invariant {
                slot: t,
                reason: format!("aggregated preference {v} outside [0, 1]"),
            });
        }
        let aggregation_loss = slot_loss(&aggregation.values, &batch);
        let report_loss: Vec<f64> = feedback.rows().map(|row| slot_loss(row, &batch)).collect();
        let preference_loss: Vec<f64> = profile.rows().map(|row| slot_loss(row, &batch)).collect();
        let mean_report: Vec<f64> = feedback
            .rows()
            .map(|row| row.iter().sum::<f64>() / m as f64)
            .collect();

        // Stage III: reveal outcomes and update.
        let next = match scenario.mechanism {
            MechanismKind::OnlineWeighted { step_size } => {
                let updated =
                    update_weights_online(&weights, &feedback, &batch, step_size).map_err(invariant)?;
                let total = updated.sum();
                let next_log_scale = log_scale + (total / n as f64).ln();
                Some((normalize_weights(&updated), next_log_scale))
            }
            MechanismKind::Average | MechanismKind::Median => None,
        };

        let detail = match detail {
            TraceDetail::Full => Some(SlotDetail {
                batch,
                profile,
                feedback,
                aggregation,
            }),
            TraceDetail::Summary => None,
        };
        let record = SlotRecord {
            slot: t,
            weights: weights.clone(),
            log_scale,
            mean_report,
            report_loss,
            preference_loss,
            aggregation_loss,
            detail,
        };
        records.push(record);
        if let Some((w, s)) = next {
            weights = w;
            log_scale = s;
        }
    }

    Ok(SimulationTrace {
        mechanism: scenario.mechanism,
        labeler_count: n,
        seed: scenario.seed,
        records,
        final_weights: weights,
        final_log_scale: log_scale,
    })
}

/// `3 √(T ln N / 2)`.
pub fn regret_bound(labeler_count: usize, slot_count: usize) -> f64 {
    3.0 * (slot_count as f64 * (labeler_count as f64).ln() / 2.0).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretReport {
    pub mechanism: String,
    pub labeler_count: usize,
    pub slot_count: usize,
    /// `Σ_t (1/m_t) Σ_j (aggregate_j - p_j)²`.
    pub cumulative_aggregation_loss: f64,
    pub hindsight_best_index: usize,
    /// `min_i Σ_t (1/m_t) Σ_j (P_ij - p_j)²`, scored on private preferences.
    pub hindsight_best_loss: f64,
    pub regret: f64,
    pub time_average_regret: f64,
    /// `3 √(T ln N / 2)`; online-weighted runs only.
    pub bound: Option<f64>,
    pub aggregation_loss_series: Vec<f64>,
    /// Hindsight-best cumulative loss over slots `1..=t`.
    pub hindsight_loss_series: Vec<f64>,
    /// Regret at horizon `t`, each against its own hindsight-best labeler.
    pub cumulative_regret_series: Vec<f64>,
}

fn argmin_lowest(values: &[f64]) -> (usize, f64) {
    values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |(bi, bv), (i, &v)| if v < bv { (i, v) } else { (bi, bv) })
}

/// Regret of the aggregation against the best fixed labeler in hindsight.
pub fn compute_regret(trace: &SimulationTrace) -> Result<RegretReport> {
    let n = trace.labeler_count;
    let t_max = trace.slot_count();
    if t_max == 0 {
        return Err(ArenaError::Domain("empty trace".into()));
    }
    let mut cumulative_labeler = vec![0.0; n];
    let mut cumulative_aggregation = 0.0;
    let mut aggregation_loss_series = Vec::with_capacity(t_max);
    let mut hindsight_loss_series = Vec::with_capacity(t_max);
    let mut cumulative_regret_series = Vec::with_capacity(t_max);

    for (t, record) in trace.records.iter().enumerate() {
        if record.slot != t + 1 || record.preference_loss.len() != n {
            return Err(ArenaError::Invariant {
                slot: t + 1,
                reason: "trace record misaligned".into(),
            });
        }
        cumulative_aggregation += record.aggregation_loss;
        for (acc, loss) in cumulative_labeler.iter_mut().zip(&record.preference_loss) {
            *acc += loss;
        }
        let (_, best) = argmin_lowest(&cumulative_labeler);
        aggregation_loss_series.push(record.aggregation_loss);
        hindsight_loss_series.push(best);
        cumulative_regret_series.push(cumulative_aggregation - best);
    }

    let (hindsight_best_index, hindsight_best_loss) = argmin_lowest(&cumulative_labeler);
    let regret = cumulative_aggregation - hindsight_best_loss;
    let bound = matches!(trace.mechanism, MechanismKind::OnlineWeighted { .. })
        .then(|| regret_bound(n, t_max));
    Ok(RegretReport {
        mechanism: trace.mechanism.id().to_string(),
        labeler_count: n,
        slot_count: t_max,
        cumulative_aggregation_loss: cumulative_aggregation,
        hindsight_best_index,
        hindsight_best_loss,
        regret,
        time_average_regret: regret / t_max as f64,
        bound,
        aggregation_loss_series,
        hindsight_loss_series,
        cumulative_regret_series,
    })
}

/// Bound minus realized regret; nonnegative when the run respects the bound.
pub fn check_regret_bound(report: &RegretReport, labeler_count: usize, slot_count: usize) -> f64 {
    regret_bound(labeler_count, slot_count) - report.regret
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityReport {
    /// `Σ_t w_i^t` over the horizon, in raw (unnormalized) weight units.
    pub cumulative_weight: Vec<f64>,
}

/// Each labeler's cumulative raw weight over the horizon.
pub fn cumulative_utility(trace: &SimulationTrace) -> Result<UtilityReport> {
    if !matches!(trace.mechanism, MechanismKind::OnlineWeighted { .. }) {
        return Err(ArenaError::WrongMechanism {
            expected: "online-weighted",
            actual: trace.mechanism.id(),
        });
    }
    let mut cumulative_weight = vec![0.0; trace.labeler_count];
    for record in &trace.records {
        for (acc, w) in cumulative_weight.iter_mut().zip(record.raw_weights()) {
            *acc += w;
        }
    }
    Ok(UtilityReport { cumulative_weight })
}

/// Seed used by the adversarial scenario builders.
pub const CONSTRUCTION_SEED: u64 = 0x5EED_0001;

fn adversarial_config(
    labeler_count: usize,
    slot_count: usize,
    prompts: usize,
    strategy: String,
    mechanism: &str,
) -> ScenarioConfig {
    let mut labelers = vec![LabelerSpec::new(0.0, "truthful")];
    labelers.extend((1..labeler_count).map(|_| LabelerSpec::new(0.0, strategy.clone())));
    ScenarioConfig {
        labeler_count,
        slot_count,
        prompts_per_slot: PromptsPerSlot::Constant(prompts),
        labelers,
        mechanism: mechanism.to_string(),
        step_size: StepSizeSpec::Auto,
        seed: CONSTRUCTION_SEED,
        oracle_labeler: Some(0),
    }
}

/// Oracle labeler 0 plus `N - 1` colluders pinning the average mechanism's per-prompt loss at `c`.
pub fn build_lemma1_scenario(
    labeler_count: usize,
    slot_count: usize,
    prompts: usize,
    target_loss: f64,
) -> Result<ScenarioConfig> {
    for p in [false, true] {
        lemma1_adversary_reports(labeler_count, p, 0, target_loss)?;
    }
    Ok(adversarial_config(
        labeler_count,
        slot_count,
        prompts,
        format!("lemma1:{target_loss}"),
        "average",
    ))
}

/// Oracle labeler 0 plus `N - 1` colluders pinning the median mechanism's committed loss at `c`.
pub fn build_lemma2_scenario(
    labeler_count: usize,
    slot_count: usize,
    prompts: usize,
    target_loss: f64,
) -> Result<ScenarioConfig> {
    for p in [false, true] {
        lemma2_adversary_reports(labeler_count, p, 0, target_loss)?;
    }
    Ok(adversarial_config(
        labeler_count,
        slot_count,
        prompts,
        format!("lemma2:{target_loss}"),
        "median",
    ))
}
