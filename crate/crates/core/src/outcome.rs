use serde::{Deserialize, Serialize};

use crate::pulse::Pulse;

/// One record of an optimization run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    /// Bang-bang iteration or dCRAB super-iteration.
    pub iteration: usize,
    /// Cumulative objective evaluations when this entry was recorded.
    pub evaluations: usize,
    pub f: f64,
    /// Detected photon-number maximum (bang-bang only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub switch_time: Option<f64>,
    /// The inner search stopped on its evaluation budget.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub budget_exhausted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub best_pulse: Pulse,
    pub best_f: f64,
    pub history: Vec<HistoryEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}
