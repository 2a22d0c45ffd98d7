//! Area control error, production cost and the reliability score.

use serde::{Deserialize, Serialize};

use super::violations::ViolationSet;

/// `ACE = (export − scheduled) − 10·B·Δf`, MW, with `B` in MW/0.1 Hz.
pub fn compute_ace(export_mw: f64, scheduled_export_mw: f64, bias_mw_per_01hz: f64, delta_f_hz: f64) -> f64 {
    (export_mw - scheduled_export_mw) - 10.0 * bias_mw_per_01hz * delta_f_hz
}

/// Uniform-frequency proxy: the slack absorbing more than its schedule
/// reads as a frequency drop in proportion to the system stiffness
/// `beta_sys` (MW/Hz).
pub fn frequency_deviation(slack_p_mw: f64, slack_scheduled_mw: f64, beta_sys_mw_per_hz: f64) -> f64 {
    -(slack_p_mw - slack_scheduled_mw) / beta_sys_mw_per_hz
}

/// `Σ a + b·P + c·P²` over online units, $/h.
pub fn compute_cost_rate<'a>(units: impl IntoIterator<Item = (&'a crate::grid::CostCoefficients, f64)>) -> f64 {
    units.into_iter().map(|(c, p)| c.rate(p)).sum()
}

/// Cost accrued over one step of `dt_sim` seconds at `rate` $/h.
pub fn cost_accrual(rate_per_hour: f64, dt_sim: f64) -> f64 {
    rate_per_hour * dt_sim / 3600.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreWeights {
    /// Points per bus-voltage violation per minute.
    pub voltage: f64,
    /// Points per branch overload per minute.
    pub branch: f64,
}

impl Default for ScoreWeights {
    fn default() -> Self {
        ScoreWeights { voltage: 0.5, branch: 0.5 }
    }
}

/// `max(0, score − (w_v·N_v + w_b·N_b)·Δt/60)`.
pub fn update_reliability(score: f64, violations: &ViolationSet, dt_sim: f64, weights: &ScoreWeights) -> f64 {
    (score - penalty_point_seconds(violations, dt_sim, weights) / 60.0).max(0.0)
}

/// Penalty of one step in point-seconds, `(w_v·N_v + w_b·N_b)·Δt`.
///
/// Sessions accumulate this and derive the score with [`score_from_penalty`]
/// instead of subtracting per step: with the usual weights and step sizes
/// the running sum stays exact, so a one-minute single violation costs
/// exactly half a point no matter how the minute is sliced.
pub fn penalty_point_seconds(violations: &ViolationSet, dt_sim: f64, weights: &ScoreWeights) -> f64 {
    (weights.voltage * violations.n_v() as f64 + weights.branch * violations.n_b() as f64) * dt_sim
}

pub const FULL_SCORE: f64 = 100.0;

/// Score after `penalty` accumulated point-seconds.
pub fn score_from_penalty(penalty: f64) -> f64 {
    (FULL_SCORE - penalty / 60.0).max(0.0)
}
