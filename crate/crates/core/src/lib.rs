//! Online weighted aggregation of strategic preference feedback.
//!
//! Labelers report continuous pairwise preferences each slot; the system
//! aggregates them, observes binary outcomes and (for the online mechanism)
//! shrinks each labeler's weight in proportion to its squared error. The crate
//! simulates that loop with synthetic labelers and measures regret against the
//! best labeler in hindsight, alongside the uniform-average and median
//! benchmarks and the adversarial constructions that defeat them.

pub mod error;
pub mod harness;
pub mod io;
pub mod mechanism;
pub mod model;
pub mod presets;
pub mod strategy;
pub mod verify;

pub use error::{ArenaError, Result};
pub use harness::{
    build_lemma1_scenario, build_lemma2_scenario, check_regret_bound, compute_regret,
    cumulative_utility, regret_bound, run_simulation, run_simulation_with, RegretReport,
    SimulationTrace, SlotRecord, TraceDetail, UtilityReport,
};
pub use mechanism::{
    aggregate_average, aggregate_weighted, default_step_size, normalize_weights, select_median,
    update_weights_online, AggregationResult, MechanismKind,
};
pub use model::{
    generate_slot, validate_scenario, FeedbackMatrix, LabelerMatrix, LabelerSpec,
    PreferenceProfile, PromptsPerSlot, Scenario, ScenarioConfig, SlotBatch, StepSize,
    StepSizeSpec, WeightVector,
};
pub use strategy::StrategyKind;
