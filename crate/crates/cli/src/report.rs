//! Machine-readable run report written next to the predicted labels.
//!
//! Non-finite floats serialize as `null`.

use std::path::PathBuf;

use magc::solver::{IterationRecord, LossBreakdown};
use magc::{Evaluation, SolverConfig};
use serde::{Deserialize, Serialize};

pub const REPORT_FORMAT: &str = "magc-run-report/1";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetEcho {
    pub name: String,
    pub edges: PathBuf,
    pub features: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub num_nodes: usize,
    pub num_edges: usize,
    pub feature_dim: usize,
    /// `file` or `degree-onehot`.
    pub feature_source: String,
}

/// One grid point and how its run ended.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridCandidate {
    pub index: usize,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub start: usize,
    pub seed: u64,
    pub init: String,
    pub final_total: Option<f64>,
    pub iterations: Option<usize>,
    pub converged: Option<bool>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridReport {
    /// The grid expression as given.
    pub expression: String,
    /// Always `min-objective`: lowest final total, ties to the lowest index.
    pub selection: String,
    pub selected: usize,
    pub candidates: Vec<GridCandidate>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub format: String,
    pub version: String,
    pub dataset: DatasetEcho,
    /// Configuration of the reported run (the selected point under a grid).
    pub config: SolverConfig,
    pub seed: u64,
    pub iterations: usize,
    pub converged: bool,
    pub final_loss: LossBreakdown,
    pub kkt_residual: f64,
    pub wall_time_secs: f64,
    pub evaluation: Option<Evaluation>,
    pub grid: Option<GridReport>,
    pub loss_trace: Vec<IterationRecord>,
}
