//! Result record shared by the direct and phase models.

use serde::{Deserialize, Serialize};

use crate::prc::PrcMethod;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Phase,
    Direct,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationRecord {
    pub model: Model,
    /// PRC source of a phase-model run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<PrcMethod>,
    pub n: usize,
    pub epsilon: f64,
    pub lambda: Vec<f64>,
    pub include_self: bool,
    pub frequencies: Vec<f64>,
    pub locked: bool,
    /// Absent when the initial state was given explicitly.
    pub seed: Option<u64>,
    pub dt: f64,
    pub t_end: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}
