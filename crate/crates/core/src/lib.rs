//! Attributed graph clustering by coarsening and modularity maximization.
//!
//! A soft assignment `C` (p×k) and coarsened features `X_C` (k×n) are found
//! by alternating a projected gradient step on `C` with a closed-form update
//! of `X_C`. The objective combines Laplacian smoothness of the coarsened
//! features, a feature reconstruction term, negated modularity, a log-det
//! barrier that keeps clusters connected, and an optional row sparsity term.

pub mod graph;
pub mod io;
pub mod metrics;
pub mod sbm;
pub mod solver;

pub use graph::{build_derived, coarsened_laplacian, AttributedGraph, DerivedMatrices, GraphError, SparseMatrix};
pub use metrics::{evaluate, Evaluation, MetricError};
pub use sbm::{SbmConfig, SbmError};
pub use solver::{solve, SolveOutcome, SolverConfig, SolverError, SolverState};
