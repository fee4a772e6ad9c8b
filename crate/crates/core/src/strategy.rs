//! Labeler reporting strategies and the expected-weight oracle.
//!
//! A labeler who believes `p_j ~ Bernoulli(P_j)` and reports `P̂_j` expects
//! its next weight to be
//!
//! ```text
//! E[w'] = w (1 - (α/m) Σ_j [ P_j (P̂_j - 1)² + (1 - P_j) P̂_j² ])
//!       = w (1 - (α/m) Σ_j [ (P̂_j - P_j)² + P_j - P_j² ])
//! ```
//!
//! The sum separates across prompts, so a one-slot best response can be
//! searched coordinate by coordinate.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};

use crate::error::{ArenaError, Result};
use crate::mechanism::select_median;
use crate::model::{in_unit_interval, SlotBatch, StepSize};

/// Shared report of the median equilibrium when a scenario names no point.
pub const DEFAULT_COMMON_POINT: f64 = 0.5;
/// Coarsest grid accepted by the best-response search.
pub const MIN_GRID_RESOLUTION: usize = 11;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StrategyKind {
    Truthful,
    MedianEquilibrium { common_point: f64 },
    MyopicBestResponse { grid_resolution: usize },
    FixedReport { value: f64 },
    /// Colludes against the average mechanism so its per-prompt loss is `target_loss`.
    Lemma1Adversary { target_loss: f64 },
    /// Colludes against the median mechanism so the committed loss is `target_loss`.
    Lemma2Adversary { target_loss: f64 },
}

impl StrategyKind {
    pub fn is_adversary(&self) -> bool {
        matches!(
            self,
            StrategyKind::Lemma1Adversary { .. } | StrategyKind::Lemma2Adversary { .. }
        )
    }

    /// Produces this labeler's reports for one slot.
    pub fn report(&self, ctx: &ReportContext<'_>) -> Result<Vec<f64>> {
        let m = ctx.belief.len();
        match *self {
            StrategyKind::Truthful => Ok(report_truthful(ctx.belief)),
            StrategyKind::MedianEquilibrium { common_point } => {
                Ok(report_median_equilibrium(common_point, m))
            }
            StrategyKind::FixedReport { value } => Ok(vec![value; m]),
            StrategyKind::MyopicBestResponse { grid_resolution } => {
                myopic_best_response(ctx.weight, ctx.belief, ctx.step_size, grid_resolution)
            }
            StrategyKind::Lemma1Adversary { target_loss } => ctx
                .outcomes
                .outcomes
                .iter()
                .map(|&p| lemma1_collusion_value(ctx.labeler_count, p, target_loss))
                .collect(),
            StrategyKind::Lemma2Adversary { target_loss } => ctx
                .outcomes
                .outcomes
                .iter()
                .map(|&p| lemma2_collusion_value(p, target_loss))
                .collect(),
        }
    }
}

fn parse_unit(param: &str, what: &str) -> Result<f64> {
    let v: f64 = param
        .parse()
        .map_err(|_| ArenaError::Parse(format!("{what} must be a number, got {param:?}")))?;
    if !in_unit_interval(v) {
        return Err(ArenaError::Domain(format!("{what} {v} outside [0, 1]")));
    }
    Ok(v)
}

impl FromStr for StrategyKind {
    type Err = ArenaError;

    fn from_str(s: &str) -> Result<Self> {
        let (name, param) = match s.split_once(':') {
            Some((name, param)) => (name, Some(param)),
            None => (s, None),
        };
        let need = |what: &str| {
            param.ok_or_else(|| ArenaError::Parse(format!("strategy {name:?} needs a {what} parameter")))
        };
        let kind = match name {
            "truthful" if param.is_none() => StrategyKind::Truthful,
            "median_equilibrium" => StrategyKind::MedianEquilibrium {
                common_point: match param {
                    Some(p) => parse_unit(p, "common point")?,
                    None => DEFAULT_COMMON_POINT,
                },
            },
            "myopic_best_response" => {
                let p = need("grid")?;
                let grid_resolution: usize = p
                    .parse()
                    .map_err(|_| ArenaError::Parse(format!("grid must be an integer, got {p:?}")))?;
                if grid_resolution < MIN_GRID_RESOLUTION {
                    return Err(ArenaError::Domain(format!(
                        "grid resolution {grid_resolution} below {MIN_GRID_RESOLUTION}"
                    )));
                }
                StrategyKind::MyopicBestResponse { grid_resolution }
            }
            "fixed" => StrategyKind::FixedReport {
                value: parse_unit(need("value")?, "fixed report")?,
            },
            "lemma1" => StrategyKind::Lemma1Adversary {
                target_loss: parse_unit(need("target loss")?, "target loss")?,
            },
            "lemma2" => StrategyKind::Lemma2Adversary {
                target_loss: parse_unit(need("target loss")?, "target loss")?,
            },
            _ => return Err(ArenaError::Parse(format!("unknown strategy {s:?}"))),
        };
        Ok(kind)
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StrategyKind::Truthful => write!(f, "truthful"),
            StrategyKind::MedianEquilibrium { common_point } => {
                write!(f, "median_equilibrium:{common_point}")
            }
            StrategyKind::MyopicBestResponse { grid_resolution } => {
                write!(f, "myopic_best_response:{grid_resolution}")
            }
            StrategyKind::FixedReport { value } => write!(f, "fixed:{value}"),
            StrategyKind::Lemma1Adversary { target_loss } => write!(f, "lemma1:{target_loss}"),
            StrategyKind::Lemma2Adversary { target_loss } => write!(f, "lemma2:{target_loss}"),
        }
    }
}

impl Serialize for StrategyKind {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

/// What a labeler sees when choosing its reports for a slot.
#[derive(Debug, Clone, Copy)]
pub struct ReportContext<'a> {
    /// The labeler's private preferences for this slot's prompts.
    pub belief: &'a [f64],
    /// Realized outcomes; only the adversarial constructions look at them.
    pub outcomes: &'a SlotBatch,
    pub labeler_count: usize,
    /// The labeler's current (normalized) weight.
    pub weight: f64,
    pub step_size: StepSize,
}

pub fn report_truthful(profile_row: &[f64]) -> Vec<f64> {
    profile_row.to_vec()
}

pub fn report_median_equilibrium(common_point: f64, prompts: usize) -> Vec<f64> {
    vec![common_point; prompts]
}

fn check_rows(belief: &[f64], report: &[f64]) -> Result<()> {
    if belief.len() != report.len() {
        return Err(ArenaError::Shape {
            expected: belief.len(),
            actual: report.len(),
        });
    }
    if belief.is_empty() {
        return Err(ArenaError::Domain("empty preference row".into()));
    }
    if let Some(v) = belief.iter().chain(report).find(|v| !in_unit_interval(**v)) {
        return Err(ArenaError::Domain(format!("preference {v} outside [0, 1]")));
    }
    Ok(())
}

/// Expected next weight when reporting `report` while believing `belief`.
pub fn expected_next_weight(w: f64, belief: &[f64], report: &[f64], step_size: StepSize) -> Result<f64> {
    if !(w.is_finite() && w > 0.0) {
        return Err(ArenaError::Domain(format!("weight must be positive, got {w}")));
    }
    check_rows(belief, report)?;
    Ok(expected_weight_unchecked(w, belief, report, step_size))
}

fn expected_weight_unchecked(w: f64, belief: &[f64], report: &[f64], step_size: StepSize) -> f64 {
    let m = belief.len() as f64;
    let penalty: f64 = belief
        .iter()
        .zip(report)
        .map(|(&b, &r)| b * (r - 1.0) * (r - 1.0) + (1.0 - b) * r * r)
        .sum();
    w * (1.0 - step_size.get() / m * penalty)
}

/// Signature of an expected-weight objective `(w, belief, report, α) -> value`.
pub type WeightObjective = fn(f64, &[f64], &[f64], StepSize) -> f64;

/// The objective the online mechanism induces.
pub fn expected_weight_objective(w: f64, belief: &[f64], report: &[f64], step_size: StepSize) -> f64 {
    expected_weight_unchecked(w, belief, report, step_size)
}

/// `k`-th point of the uniform grid `{0, 1/(g-1), ..., 1}`.
pub fn grid_point(k: usize, grid_resolution: usize) -> f64 {
    k as f64 / (grid_resolution - 1) as f64
}

/// Grid search for the report maximizing `objective` on one prompt.
///
/// Ties go to the truthful value if it is on the grid, then to the smaller report.
pub fn best_grid_report(
    objective: WeightObjective,
    w: f64,
    belief: f64,
    step_size: StepSize,
    grid_resolution: usize,
) -> f64 {
    let mut best = f64::NAN;
    let mut best_value = f64::NEG_INFINITY;
    for k in 0..grid_resolution {
        let r = grid_point(k, grid_resolution);
        let value = objective(w, &[belief], &[r], step_size);
        let better = match value.partial_cmp(&best_value) {
            Some(Ordering::Greater) => true,
            Some(Ordering::Equal) => r == belief,
            _ => false,
        };
        if better {
            best = r;
            best_value = value;
        }
    }
    best
}

/// One-slot best response over a uniform grid, searched independently per prompt.
pub fn myopic_best_response(
    w: f64,
    belief: &[f64],
    step_size: StepSize,
    grid_resolution: usize,
) -> Result<Vec<f64>> {
    if grid_resolution < MIN_GRID_RESOLUTION {
        return Err(ArenaError::Domain(format!(
            "grid resolution {grid_resolution} below {MIN_GRID_RESOLUTION}"
        )));
    }
    best_response_by(expected_weight_objective, w, belief, step_size, grid_resolution)
}

/// [`myopic_best_response`] against an arbitrary objective. Accepts any grid with at least two points.
pub fn best_response_by(
    objective: WeightObjective,
    w: f64,
    belief: &[f64],
    step_size: StepSize,
    grid_resolution: usize,
) -> Result<Vec<f64>> {
    if grid_resolution < 2 {
        return Err(ArenaError::Domain("grid needs at least two points".into()));
    }
    if !(w.is_finite() && w > 0.0) {
        return Err(ArenaError::Domain(format!("weight must be positive, got {w}")));
    }
    check_rows(belief, belief)?;
    Ok(belief
        .iter()
        .map(|&b| best_grid_report(objective, w, b, step_size, grid_resolution))
        .collect())
}

fn outcome_value(p: bool) -> f64 {
    if p {
        1.0
    } else {
        0.0
    }
}

// Moves away from p: down when p = 1, up when p = 0.
fn away_from(p: bool, distance: f64) -> f64 {
    if p {
        1.0 - distance
    } else {
        distance
    }
}

fn check_target_loss(c: f64) -> Result<()> {
    if !in_unit_interval(c) {
        return Err(ArenaError::Domain(format!("target loss {c} outside [0, 1]")));
    }
    Ok(())
}

/// Common report of the non-oracle labelers in the average-mechanism construction.
pub fn lemma1_collusion_value(labeler_count: usize, p: bool, target_loss: f64) -> Result<f64> {
    check_target_loss(target_loss)?;
    if labeler_count < 2 {
        return Err(ArenaError::Domain("construction needs N >= 2".into()));
    }
    let n = labeler_count as f64;
    let r = away_from(p, n / (n - 1.0) * target_loss.sqrt());
    if !in_unit_interval(r) {
        return Err(ArenaError::Infeasible(format!(
            "average-mechanism collusion needs report {r} outside [0, 1] (N={labeler_count}, c={target_loss})"
        )));
    }
    Ok(r)
}

/// Common report of the colluding labelers in the median-mechanism construction.
pub fn lemma2_collusion_value(p: bool, target_loss: f64) -> Result<f64> {
    check_target_loss(target_loss)?;
    Ok(away_from(p, target_loss.sqrt()))
}

/// One prompt's reports forcing the uniform average to squared loss `c` while labeler `k` reports `p`.
pub fn lemma1_adversary_reports(labeler_count: usize, p: bool, k: usize, c: f64) -> Result<Vec<f64>> {
    if k >= labeler_count {
        return Err(ArenaError::Domain(format!("oracle index {k} out of range")));
    }
    let r = lemma1_collusion_value(labeler_count, p, c)?;
    Ok((0..labeler_count)
        .map(|i| if i == k { outcome_value(p) } else { r })
        .collect())
}

/// One prompt's reports pinning the median at squared loss `c` while labeler `k` reports `p`.
///
/// Every labeler other than `k` colludes on the same value, a strict majority for `N >= 3`.
pub fn lemma2_adversary_reports(labeler_count: usize, p: bool, k: usize, c: f64) -> Result<Vec<f64>> {
    if k >= labeler_count {
        return Err(ArenaError::Domain(format!("oracle index {k} out of range")));
    }
    let r = lemma2_collusion_value(p, c)?;
    let column: Vec<f64> = (0..labeler_count)
        .map(|i| if i == k { outcome_value(p) } else { r })
        .collect();
    let (median, idx) = select_median(&column)?;
    let loss = (median - outcome_value(p)).powi(2);
    if (loss - c).abs() > 1e-12 || (c > 0.0 && idx == k) {
        return Err(ArenaError::Infeasible(format!(
            "median of the colluding column has loss {loss}, not {c} (N={labeler_count}, p={})",
            outcome_value(p)
        )));
    }
    Ok(column)
}

/// Probability that `labeler` is credited with the median commitment: `1/|ties|`
/// when its report equals the median value, else 0.
pub fn median_commitment_probability(reports: &[f64], labeler: usize) -> Result<f64> {
    let (median, _) = select_median(reports)?;
    if reports[labeler] != median {
        return Ok(0.0);
    }
    let ties = reports.iter().filter(|&&v| v == median).count();
    Ok(1.0 / ties as f64)
}

/// A profile where one labeler raises its commitment probability by misreporting.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MedianDeviationWitness {
    pub preferences: Vec<f64>,
    pub labeler: usize,
    pub deviation: f64,
    pub truthful_probability: f64,
    pub deviating_probability: f64,
}

/// Exhaustive search over a 3-labeler, 1-prompt game on a `grid_points` grid for a
/// profile in which some labeler strictly gains commitment probability by deviating
/// from its private preference while the others report truthfully.
pub fn find_median_deviation_witness(grid_points: usize) -> Option<MedianDeviationWitness> {
    if grid_points < 2 {
        return None;
    }
    let grid: Vec<f64> = (0..grid_points).map(|k| grid_point(k, grid_points)).collect();
    for &a in &grid {
        for &b in &grid {
            for &c in &grid {
                let prefs = [a, b, c];
                for labeler in 0..3 {
                    let truthful = median_commitment_probability(&prefs, labeler).ok()?;
                    for &d in grid.iter().filter(|&&d| d != prefs[labeler]) {
                        let mut reports = prefs;
                        reports[labeler] = d;
                        let deviating = median_commitment_probability(&reports, labeler).ok()?;
                        if deviating > truthful {
                            return Some(MedianDeviationWitness {
                                preferences: prefs.to_vec(),
                                labeler,
                                deviation: d,
                                truthful_probability: truthful,
                                deviating_probability: deviating,
                            });
                        }
                    }
                }
            }
        }
    }
    None
}

/// Checks the common-point equilibrium of the median scheme for `labeler_count`
/// labelers on a grid: with everyone else at the common point, conforming earns
/// `1/N` and every other report earns 0. Returns the first violation as
/// `(common_point, deviating_labeler, deviation)`.
pub fn median_equilibrium_violation(labeler_count: usize, grid_points: usize) -> Option<(f64, usize, f64)> {
    let grid: Vec<f64> = (0..grid_points).map(|k| grid_point(k, grid_points)).collect();
    let conform = 1.0 / labeler_count as f64;
    for &common in &grid {
        for labeler in 0..labeler_count {
            for &d in &grid {
                let mut reports = vec![common; labeler_count];
                reports[labeler] = d;
                let prob = median_commitment_probability(&reports, labeler).ok()?;
                let expected = if d == common { conform } else { 0.0 };
                if prob != expected {
                    return Some((common, labeler, d));
                }
            }
        }
    }
    None
}
