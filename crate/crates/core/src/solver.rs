//! Block majorization-minimization solver for the clustering objective
//!
//! ```text
//! tr(X_C^T C^T Θ C X_C) + (α/2)‖X − C X_C‖² − (β/2e) tr(C^T B C)
//!     − γ log det(C^T Θ C + J) + (λ/2) Σ_i ‖C_i‖₁²
//! ```
//!
//! over nonnegative `C` with rows of Euclidean norm at most one. Each
//! iteration takes one projected-gradient step on `C` (the minimizer of a
//! quadratic upper bound of the objective around the current point) and then
//! solves for `X_C` in closed form.

use nalgebra::{Cholesky, DMatrix, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{build_derived, symmetrize, AttributedGraph, DerivedMatrices, GraphError};

/// Diagonal jitter tried, in order, before a coarse system is declared singular.
const JITTER_LADDER: [f64; 5] = [1e-10, 1e-9, 1e-8, 1e-7, 1e-6];
/// Upper limit on step-size doublings within one C-update.
const MAX_BACKTRACKS: usize = 60;
/// Relative slack allowed when comparing objective values for descent.
pub const DESCENT_SLACK: f64 = 1e-8;
/// Relative tolerance of the X_C stationarity check.
pub const XC_STATIONARITY_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("C^T Θ C + J is not positive definite")]
    SingularCoarseLaplacian,
    #[error("X_C system is singular (empty cluster column {column:?})")]
    SingularSystem { column: Option<usize> },
    #[error("non-finite iterate at iteration {iteration}")]
    NonFinite { iteration: usize },
    #[error("graph has no node features; supply substitute features first")]
    MissingFeatures,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepPolicy {
    /// Step `1/L` with `L` the Lipschitz bound at the current point.
    AnalyticBound,
    /// Start at a fraction of the bound and grow `L` until the quadratic
    /// surrogate dominates the objective at the candidate point.
    Backtracking,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitStrategy {
    RandomUniform,
    DegreeSeeded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProjectionMode {
    /// Exact Euclidean projection of each row onto `{x ≥ 0, ‖x‖₂ ≤ 1}`.
    RowWise,
    /// Clip negatives, then divide the whole matrix by the sum of its row norms.
    GlobalNormalization,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Weight of the `X ≈ C X_C` relaxation term.
    pub alpha: f64,
    /// Modularity weight.
    pub beta: f64,
    /// Log-determinant weight.
    pub gamma: f64,
    /// Row-sparsity weight.
    pub lambda: f64,
    /// Number of clusters.
    pub k: usize,
    pub max_iters: usize,
    pub rel_tol: f64,
    pub step_policy: StepPolicy,
    /// Step shrink factor per backtrack (`L` is divided by it).
    pub backtracking_shrink: f64,
    pub init: InitStrategy,
    pub projection: ProjectionMode,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 1.0,
            gamma: 1.0,
            lambda: 0.0,
            k: 2,
            max_iters: 1000,
            rel_tol: 1e-7,
            step_policy: StepPolicy::Backtracking,
            backtracking_shrink: 0.5,
            init: InitStrategy::RandomUniform,
            projection: ProjectionMode::RowWise,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self, num_nodes: usize) -> Result<(), SolverError> {
        let weights = [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("lambda", self.lambda),
        ];
        for (name, w) in weights {
            if !w.is_finite() || w < 0.0 {
                return Err(SolverError::InvalidConfig(format!(
                    "{name} must be finite and nonnegative, got {w}"
                )));
            }
        }
        if self.alpha <= 0.0 {
            return Err(SolverError::InvalidConfig("alpha must be positive".into()));
        }
        if self.k == 0 || self.k > num_nodes {
            return Err(SolverError::InvalidConfig(format!(
                "k must be in [1, {num_nodes}], got {}",
                self.k
            )));
        }
        if self.max_iters == 0 {
            return Err(SolverError::InvalidConfig("max_iters must be positive".into()));
        }
        if !(self.rel_tol > 0.0) {
            return Err(SolverError::InvalidConfig("rel_tol must be positive".into()));
        }
        if !(self.backtracking_shrink > 0.0 && self.backtracking_shrink < 1.0) {
            return Err(SolverError::InvalidConfig(
                "backtracking_shrink must lie in (0, 1)".into(),
            ));
        }
        Ok(())
    }
}

/// Unweighted objective terms and the weighted total.
///
/// `relaxation` is `½‖X − C X_C‖²` and `sparsity` is `½ Σ_i (Σ_j |C_ij|)²`,
/// so `total = smoothness + α·relaxation − (β/2e)·modularity − γ·logdet + λ·sparsity`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub smoothness: f64,
    pub modularity: f64,
    pub logdet: f64,
    pub relaxation: f64,
    pub sparsity: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    #[serde(flatten)]
    pub loss: LossBreakdown,
    /// Lipschitz estimate used for the C-step (0 for the initial record).
    pub lipschitz: f64,
    /// `‖2 C^TΘC X_C + α C^T(C X_C − X)‖_F / (1 + ‖C^T X‖_F)` after the X_C update.
    pub xc_residual: f64,
}

#[derive(Debug, Clone)]
pub struct SolverState {
    pub c: DMatrix<f64>,
    pub xc: DMatrix<f64>,
    pub t: usize,
    pub loss_trace: Vec<IterationRecord>,
    pub step_l: f64,
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub state: SolverState,
    pub labels: Vec<usize>,
    /// True when the relative loss change dropped below `rel_tol`.
    pub converged: bool,
    pub kkt_residual: f64,
}

/// Quantities that depend on `C` only.
struct CTerms {
    theta_c: DMatrix<f64>,
    bc: DMatrix<f64>,
    coarse: DMatrix<f64>,
    ctc: DMatrix<f64>,
    /// `(C^TΘC + J)^{-1}` and its log-determinant; `None` when not positive definite.
    m_inv: Option<DMatrix<f64>>,
    logdet: f64,
    modularity: f64,
    row_l1: Vec<f64>,
}

/// Quantities that depend on `X_C` only.
struct XcTerms {
    gram: DMatrix<f64>,
    x_xct: DMatrix<f64>,
}

struct Problem<'a> {
    derived: &'a DerivedMatrices,
    x: &'a DMatrix<f64>,
    cfg: &'a SolverConfig,
    x_norm2: f64,
}

impl<'a> Problem<'a> {
    fn new(
        derived: &'a DerivedMatrices,
        x: &'a DMatrix<f64>,
        cfg: &'a SolverConfig,
    ) -> Result<Self, SolverError> {
        let p = derived.num_nodes();
        if x.nrows() != p {
            return Err(SolverError::DimensionMismatch {
                what: "feature rows",
                expected: p,
                found: x.nrows(),
            });
        }
        Ok(Self {
            derived,
            x,
            cfg,
            x_norm2: x.norm_squared(),
        })
    }

    fn check_c(&self, c: &DMatrix<f64>) -> Result<(), SolverError> {
        if c.nrows() != self.derived.num_nodes() {
            return Err(SolverError::DimensionMismatch {
                what: "assignment rows",
                expected: self.derived.num_nodes(),
                found: c.nrows(),
            });
        }
        if c.ncols() != self.cfg.k {
            return Err(SolverError::DimensionMismatch {
                what: "assignment columns",
                expected: self.cfg.k,
                found: c.ncols(),
            });
        }
        Ok(())
    }

    fn check_xc(&self, xc: &DMatrix<f64>) -> Result<(), SolverError> {
        if xc.shape() != (self.cfg.k, self.x.ncols()) {
            return Err(SolverError::DimensionMismatch {
                what: "coarse feature rows",
                expected: self.cfg.k,
                found: xc.nrows(),
            });
        }
        Ok(())
    }

    fn xc_terms(&self, xc: &DMatrix<f64>) -> XcTerms {
        XcTerms {
            gram: xc * xc.transpose(),
            x_xct: self.x * xc.transpose(),
        }
    }

    fn c_terms(&self, c: &DMatrix<f64>) -> Result<CTerms, SolverError> {
        let k = c.ncols();
        let theta_c = self.derived.laplacian.mul_dense(c);
        let bc = self.derived.modularity.apply(c);
        let mut coarse = c.tr_mul(&theta_c);
        symmetrize(&mut coarse);
        let ctc = c.tr_mul(c);
        let modularity = c.dot(&bc);
        let row_l1 = c.row_iter().map(|r| r.iter().map(|v| v.abs()).sum()).collect();

        let m = coarse.add_scalar(1.0 / k as f64);
        let (m_inv, logdet) = match spd_factor(&m) {
            Some(chol) => {
                let logdet = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
                (Some(chol.inverse()), logdet)
            }
            None if self.cfg.gamma > 0.0 => return Err(SolverError::SingularCoarseLaplacian),
            None => (None, f64::NAN),
        };
        Ok(CTerms {
            theta_c,
            bc,
            coarse,
            ctc,
            m_inv,
            logdet,
            modularity,
            row_l1,
        })
    }

    fn loss(&self, c: &DMatrix<f64>, ct: &CTerms, xt: &XcTerms) -> LossBreakdown {
        let cfg = self.cfg;
        let smoothness = ct.coarse.dot(&xt.gram);
        let relaxation = 0.5 * (self.x_norm2 - 2.0 * c.dot(&xt.x_xct) + ct.ctc.dot(&xt.gram));
        let sparsity = 0.5 * ct.row_l1.iter().map(|s| s * s).sum::<f64>();
        let logdet_term = if cfg.gamma > 0.0 { -cfg.gamma * ct.logdet } else { 0.0 };
        let total = smoothness + cfg.alpha * relaxation
            - cfg.beta / self.derived.two_e * ct.modularity
            + logdet_term
            + cfg.lambda * sparsity;
        LossBreakdown {
            smoothness,
            modularity: ct.modularity,
            logdet: ct.logdet,
            relaxation,
            sparsity,
            total,
        }
    }

    fn gradient(&self, c: &DMatrix<f64>, ct: &CTerms, xt: &XcTerms) -> DMatrix<f64> {
        let cfg = self.cfg;
        let mut g = &ct.theta_c * &xt.gram * 2.0;
        if cfg.alpha != 0.0 {
            g += (c * &xt.gram - &xt.x_xct) * cfg.alpha;
        }
        if cfg.beta != 0.0 {
            g -= &ct.bc * (2.0 * cfg.beta / self.derived.two_e);
        }
        if cfg.gamma != 0.0 {
            let m_inv = ct.m_inv.as_ref().expect("positive definite when gamma > 0");
            g -= &ct.theta_c * m_inv * (2.0 * cfg.gamma);
        }
        if cfg.lambda != 0.0 {
            // d/dC_ij of ½ Σ_i (Σ_j |C_ij|)²; equals λ C 1_{k×k} on C ≥ 0
            for j in 0..c.ncols() {
                for i in 0..c.nrows() {
                    let cij = c[(i, j)];
                    if cij != 0.0 {
                        g[(i, j)] += cfg.lambda * cij.signum() * ct.row_l1[i];
                    }
                }
            }
        }
        g
    }

    fn lipschitz(&self, ct: &CTerms, xt: &XcTerms) -> f64 {
        let cfg = self.cfg;
        let theta_norm = self.derived.laplacian_norm();
        let gram_norm = sym_max_abs_eig(&xt.gram);
        let mut l = 2.0 * theta_norm * gram_norm + cfg.alpha * gram_norm;
        if cfg.beta > 0.0 {
            l += 2.0 * cfg.beta / self.derived.two_e * self.derived.modularity_norm();
        }
        if cfg.gamma > 0.0 {
            l += cfg.gamma * logdet_curvature_bound(ct, theta_norm);
        }
        if cfg.lambda > 0.0 {
            l += cfg.lambda * ct.ctc.ncols() as f64;
        }
        if l.is_finite() {
            l.max(1e-12)
        } else {
            f64::MAX.sqrt()
        }
    }

    /// One C-update from `c`; returns the new point, its terms, the accepted `L`
    /// and the new loss.
    fn c_step(
        &self,
        c: &DMatrix<f64>,
        ct: &CTerms,
        xt: &XcTerms,
        f_c: f64,
    ) -> Result<(DMatrix<f64>, CTerms, f64, LossBreakdown), SolverError> {
        let cfg = self.cfg;
        let g = self.gradient(c, ct, xt);
        let bound = self.lipschitz(ct, xt);
        match cfg.step_policy {
            StepPolicy::AnalyticBound => {
                let cand = project(&(c - &g / bound), cfg.projection);
                let cand_terms = self.c_terms(&cand)?;
                let loss = self.loss(&cand, &cand_terms, xt);
                Ok((cand, cand_terms, bound, loss))
            }
            StepPolicy::Backtracking => {
                let mut l = bound / 16.0;
                for _ in 0..MAX_BACKTRACKS {
                    let cand = project(&(c - &g / l), cfg.projection);
                    if let Ok(cand_terms) = self.c_terms(&cand) {
                        let loss = self.loss(&cand, &cand_terms, xt);
                        let diff = &cand - c;
                        let surrogate = f_c + g.dot(&diff) + 0.5 * l * diff.norm_squared();
                        let slack = 4.0 * f64::EPSILON * f_c.abs().max(1.0);
                        if loss.total.is_finite() && loss.total <= surrogate + slack {
                            return Ok((cand, cand_terms, l, loss));
                        }
                    }
                    l /= cfg.backtracking_shrink;
                }
                // No acceptable step: stay put.
                let terms = self.c_terms(c)?;
                let loss = self.loss(c, &terms, xt);
                Ok((c.clone(), terms, l, loss))
            }
        }
    }

    /// Closed-form X_C minimizer for fixed C.
    fn solve_xc(&self, c: &DMatrix<f64>, coarse: &DMatrix<f64>, ctc: &DMatrix<f64>) -> Result<DMatrix<f64>, SolverError> {
        let alpha = self.cfg.alpha;
        if !(alpha > 0.0) {
            return Err(SolverError::InvalidConfig("X_C update requires alpha > 0".into()));
        }
        if let Some(col) = (0..c.ncols()).find(|&j| c.column(j).norm() <= 1e-12) {
            return Err(SolverError::SingularSystem { column: Some(col) });
        }
        let system = coarse * (2.0 / alpha) + ctc;
        let rhs = c.tr_mul(self.x);
        let chol = Cholesky::new(system.clone()).ok_or(SolverError::SingularSystem { column: None })?;
        let mut xc = chol.solve(&rhs);
        // one step of iterative refinement
        let residual = &rhs - &system * &xc;
        xc += chol.solve(&residual);
        if xc.iter().any(|v| !v.is_finite()) {
            return Err(SolverError::SingularSystem { column: None });
        }
        let scale = 1.0 + rhs.norm();
        let stationarity = (&system * &xc - &rhs).norm() * alpha / scale;
        if stationarity > XC_STATIONARITY_TOL {
            return Err(SolverError::SingularSystem { column: None });
        }
        Ok(xc)
    }

    /// X_C solve restricted to the nonzero columns of C; rows of empty columns are zero.
    fn solve_xc_reduced(&self, c: &DMatrix<f64>, coarse: &DMatrix<f64>, ctc: &DMatrix<f64>) -> Result<DMatrix<f64>, SolverError> {
        let keep: Vec<usize> = (0..c.ncols()).filter(|&j| c.column(j).norm() > 1e-12).collect();
        let mut xc = DMatrix::zeros(c.ncols(), self.x.ncols());
        if keep.is_empty() {
            return Ok(xc);
        }
        let sub_c = c.select_columns(&keep);
        let sub_coarse = coarse.select_rows(&keep).select_columns(&keep);
        let sub_ctc = ctc.select_rows(&keep).select_columns(&keep);
        let sub = self.solve_xc(&sub_c, &sub_coarse, &sub_ctc)?;
        for (r, &j) in keep.iter().enumerate() {
            xc.row_mut(j).copy_from(&sub.row(r));
        }
        Ok(xc)
    }

    fn xc_residual(&self, c: &DMatrix<f64>, ct: &CTerms, xc: &DMatrix<f64>) -> f64 {
        let ctx = c.tr_mul(self.x);
        let g = &ct.coarse * xc * 2.0 + (&ct.ctc * xc - &ctx) * self.cfg.alpha;
        g.norm() / (1.0 + ctx.norm())
    }
}

/// Cholesky factor with diagonal jitter escalation.
fn spd_factor(m: &DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    if m.iter().any(|v| !v.is_finite()) {
        return None;
    }
    if let Some(ch) = Cholesky::new(m.clone()) {
        return Some(ch);
    }
    let n = m.nrows();
    JITTER_LADDER
        .iter()
        .find_map(|&eps| Cholesky::new(m + DMatrix::identity(n, n) * eps))
}

fn sym_max_abs_eig(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .symmetric_eigenvalues()
        .iter()
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
}

/// Curvature bound of `−log det(C^TΘC + J)` at the current point:
/// `2‖Θ‖/μ + 4‖ΘC‖²/μ²` with `μ` the smallest eigenvalue of `C^TΘC + J`.
fn logdet_curvature_bound(ct: &CTerms, theta_norm: f64) -> f64 {
    let k = ct.coarse.ncols();
    let m = ct.coarse.add_scalar(1.0 / k as f64);
    let mu = m
        .symmetric_eigenvalues()
        .iter()
        .fold(f64::INFINITY, |acc, &v| acc.min(v));
    if !(mu > 0.0) {
        return f64::MAX.sqrt();
    }
    let tc_norm2 = sym_max_abs_eig(&ct.theta_c.tr_mul(&ct.theta_c));
    2.0 * theta_norm / mu + 4.0 * tc_norm2 / (mu * mu)
}

fn project(m: &DMatrix<f64>, mode: ProjectionMode) -> DMatrix<f64> {
    match mode {
        ProjectionMode::RowWise => project_feasible(m),
        ProjectionMode::GlobalNormalization => {
            let clipped = m.map(|v| v.max(0.0));
            let total: f64 = clipped.row_iter().map(|r| r.norm()).sum();
            if total > 0.0 {
                clipped / total
            } else {
                clipped
            }
        }
    }
}

/// Projects each row onto `{x ≥ 0, ‖x‖₂ ≤ 1}`: clip negatives, then rescale
/// rows whose norm exceeds one.
pub fn project_feasible(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = m.map(|v| v.max(0.0));
    for mut row in out.row_iter_mut() {
        let norm = row.norm();
        if norm > 1.0 {
            row /= norm;
        }
    }
    out
}

fn problem<'a>(
    derived: &'a DerivedMatrices,
    x: &'a DMatrix<f64>,
    cfg: &'a SolverConfig,
    c: &DMatrix<f64>,
) -> Result<Problem<'a>, SolverError> {
    let pr = Problem::new(derived, x, cfg)?;
    pr.check_c(c)?;
    Ok(pr)
}

/// Evaluates every objective term at `(C, X_C)`.
pub fn loss(
    c: &DMatrix<f64>,
    xc: &DMatrix<f64>,
    derived: &DerivedMatrices,
    x: &DMatrix<f64>,
    cfg: &SolverConfig,
) -> Result<LossBreakdown, SolverError> {
    let pr = problem(derived, x, cfg, c)?;
    pr.check_xc(xc)?;
    let ct = pr.c_terms(c)?;
    Ok(pr.loss(c, &ct, &pr.xc_terms(xc)))
}

/// Gradient of the objective with respect to `C` (X_C fixed).
pub fn gradient_c(
    c: &DMatrix<f64>,
    xc: &DMatrix<f64>,
    derived: &DerivedMatrices,
    x: &DMatrix<f64>,
    cfg: &SolverConfig,
) -> Result<DMatrix<f64>, SolverError> {
    let pr = problem(derived, x, cfg, c)?;
    pr.check_xc(xc)?;
    let ct = pr.c_terms(c)?;
    Ok(pr.gradient(c, &ct, &pr.xc_terms(xc)))
}

/// Upper bound on the local Lipschitz constant of the C-gradient.
///
/// Sum of the per-term bounds: `2‖Θ‖‖X_C X_C^T‖` (smoothness),
/// `α‖X_C X_C^T‖` (relaxation), `(β/e)‖B‖` (modularity), the log-det
/// curvature bound at `C`, and `λk` (sparsity). Degenerate points yield a
/// very large value instead of an error.
pub fn lipschitz_bound(
    c: &DMatrix<f64>,
    xc: &DMatrix<f64>,
    derived: &DerivedMatrices,
    x: &DMatrix<f64>,
    cfg: &SolverConfig,
) -> f64 {
    let Ok(pr) = problem(derived, x, cfg, c) else {
        return f64::MAX.sqrt();
    };
    if pr.check_xc(xc).is_err() {
        return f64::MAX.sqrt();
    }
    match pr.c_terms(c) {
        Ok(ct) => pr.lipschitz(&ct, &pr.xc_terms(xc)),
        Err(_) => f64::MAX.sqrt(),
    }
}

/// Result of one C-update.
#[derive(Debug, Clone)]
pub struct CUpdate {
    pub c: DMatrix<f64>,
    pub lipschitz: f64,
    pub loss: LossBreakdown,
}

/// One majorization-minimization step on `C` with `X_C` held fixed.
pub fn update_c(
    state: &SolverState,
    derived: &DerivedMatrices,
    x: &DMatrix<f64>,
    cfg: &SolverConfig,
) -> Result<CUpdate, SolverError> {
    let pr = problem(derived, x, cfg, &state.c)?;
    pr.check_xc(&state.xc)?;
    let ct = pr.c_terms(&state.c)?;
    let xt = pr.xc_terms(&state.xc);
    let f_c = pr.loss(&state.c, &ct, &xt).total;
    let (c, _, lipschitz, loss) = pr.c_step(&state.c, &ct, &xt, f_c)?;
    Ok(CUpdate { c, lipschitz, loss })
}

/// Closed-form `X_C = ((2/α) C^TΘC + C^TC)^{-1} C^T X`.
pub fn update_xc(
    c: &DMatrix<f64>,
    derived: &DerivedMatrices,
    x: &DMatrix<f64>,
    cfg: &SolverConfig,
) -> Result<DMatrix<f64>, SolverError> {
    let pr = problem(derived, x, cfg, c)?;
    let theta_c = derived.laplacian.mul_dense(c);
    let mut coarse = c.tr_mul(&theta_c);
    symmetrize(&mut coarse);
    pr.solve_xc(c, &coarse, &c.tr_mul(c))
}

/// Row-wise argmax; ties go to the lowest column.
pub fn hard_assignments(c: &DMatrix<f64>) -> Vec<usize> {
    c.row_iter()
        .map(|row| {
            let mut best = 0;
            for j in 1..row.len() {
                if row[j] > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

/// Projected-gradient stationarity residual `‖C − P(C − ∇f/L)‖_F / ‖C‖_F`.
///
/// Uses the state's step constant, or the Lipschitz bound when none is set.
pub fn kkt_residual(
    state: &SolverState,
    derived: &DerivedMatrices,
    x: &DMatrix<f64>,
    cfg: &SolverConfig,
) -> f64 {
    let Ok(g) = gradient_c(&state.c, &state.xc, derived, x, cfg) else {
        return f64::INFINITY;
    };
    let l = if state.step_l > 0.0 {
        state.step_l
    } else {
        lipschitz_bound(&state.c, &state.xc, derived, x, cfg)
    };
    let c_norm = state.c.norm();
    if c_norm == 0.0 {
        return if g.iter().all(|&v| v >= 0.0) { 0.0 } else { f64::INFINITY };
    }
    let moved = project_feasible(&(&state.c - g / l));
    (&state.c - moved).norm() / c_norm
}

/// Initial assignment matrix for `cfg.init`.
pub fn initial_assignment(graph: &AttributedGraph, cfg: &SolverConfig) -> DMatrix<f64> {
    let p = graph.num_nodes();
    let k = cfg.k;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut c = match cfg.init {
        InitStrategy::RandomUniform => DMatrix::from_fn(p, k, |_, _| rng.gen::<f64>()),
        InitStrategy::DegreeSeeded => {
            let anchors = degree_anchors(graph, k);
            let adjacency = graph.adjacency();
            let mut indicator = DMatrix::zeros(p, k);
            for (j, &a) in anchors.iter().enumerate() {
                indicator[(a, j)] = 1.0;
            }
            let one_hop = adjacency.mul_dense(&indicator);
            let two_hop = adjacency.mul_dense(&one_hop);
            let mut score = one_hop + two_hop * 0.5;
            for v in score.iter_mut() {
                *v += 1e-2 * rng.gen::<f64>();
            }
            for (j, &a) in anchors.iter().enumerate() {
                score.row_mut(a).fill(0.0);
                score[(a, j)] = 1.0;
            }
            score
        }
    };
    for mut row in c.row_iter_mut() {
        let norm = row.norm();
        if norm > 0.0 {
            row /= norm;
        } else {
            row.fill(1.0 / (k as f64).sqrt());
        }
    }
    c
}

/// Highest-degree nodes, skipping neighbours of nodes already chosen.
fn degree_anchors(graph: &AttributedGraph, k: usize) -> Vec<usize> {
    let degree = graph.degrees();
    let mut order: Vec<usize> = (0..graph.num_nodes()).collect();
    order.sort_by(|&a, &b| degree[b].total_cmp(&degree[a]).then(a.cmp(&b)));
    let mut blocked = vec![false; graph.num_nodes()];
    let mut anchors = Vec::with_capacity(k);
    for &v in &order {
        if anchors.len() == k {
            break;
        }
        if blocked[v] {
            continue;
        }
        anchors.push(v);
        blocked[v] = true;
        for (u, _) in graph.adjacency().row(v) {
            blocked[u] = true;
        }
    }
    for &v in &order {
        if anchors.len() == k {
            break;
        }
        if !anchors.contains(&v) {
            anchors.push(v);
        }
    }
    anchors
}

/// Runs the alternating C / X_C updates from the configured initialization.
pub fn solve(graph: &AttributedGraph, cfg: &SolverConfig) -> Result<SolveOutcome, SolverError> {
    cfg.validate(graph.num_nodes())?;
    let c0 = initial_assignment(graph, cfg);
    solve_from(graph, cfg, c0)
}

/// Runs the solver from a caller-supplied feasible initial assignment.
pub fn solve_from(
    graph: &AttributedGraph,
    cfg: &SolverConfig,
    c0: DMatrix<f64>,
) -> Result<SolveOutcome, SolverError> {
    cfg.validate(graph.num_nodes())?;
    let x = graph.features().ok_or(SolverError::MissingFeatures)?;
    let derived = build_derived(graph)?;
    solve_with(&derived, x, cfg, c0)
}

/// Solver loop on precomputed derived matrices.
pub fn solve_with(
    derived: &DerivedMatrices,
    x: &DMatrix<f64>,
    cfg: &SolverConfig,
    c0: DMatrix<f64>,
) -> Result<SolveOutcome, SolverError> {
    cfg.validate(derived.num_nodes())?;
    let pr = problem(derived, x, cfg, &c0)?;
    let mut c = project_feasible(&c0);
    let mut ct = pr.c_terms(&c)?;
    let mut xc = settle_xc(&pr, &mut c, &mut ct, None)?;
    let mut xt = pr.xc_terms(&xc);
    let mut current = pr.loss(&c, &ct, &xt);
    let mut trace = vec![IterationRecord {
        iteration: 0,
        loss: current,
        lipschitz: 0.0,
        xc_residual: pr.xc_residual(&c, &ct, &xc),
    }];
    let mut step_l = pr.lipschitz(&ct, &xt);
    let mut converged = false;
    let mut t = 0;

    while t < cfg.max_iters {
        t += 1;
        let (c_next, ct_next, l, _) = pr.c_step(&c, &ct, &xt, current.total)?;
        c = c_next;
        ct = ct_next;
        step_l = l;
        xc = settle_xc(&pr, &mut c, &mut ct, Some(&xc))?;
        xt = pr.xc_terms(&xc);
        let next = pr.loss(&c, &ct, &xt);
        if !next.total.is_finite()
            || c.iter().any(|v| !v.is_finite())
            || xc.iter().any(|v| !v.is_finite())
        {
            return Err(SolverError::NonFinite { iteration: t });
        }
        trace.push(IterationRecord {
            iteration: t,
            loss: next,
            lipschitz: l,
            xc_residual: pr.xc_residual(&c, &ct, &xc),
        });
        let change = (next.total - current.total).abs() / current.total.abs().max(1.0);
        current = next;
        if change < cfg.rel_tol {
            converged = true;
            break;
        }
    }

    let state = SolverState {
        c,
        xc,
        t,
        loss_trace: trace,
        step_l,
    };
    let labels = hard_assignments(&state.c);
    let kkt = kkt_residual(&state, derived, x, cfg);
    Ok(SolveOutcome {
        state,
        labels,
        converged,
        kkt_residual: kkt,
    })
}

/// X_C update inside the solver loop, handling empty cluster columns.
///
/// An empty column is re-seeded from the node with the largest reconstruction
/// residual; the re-seeded point is kept only if it does not increase the
/// objective, otherwise the empty column's X_C row is set to zero.
fn settle_xc(
    pr: &Problem<'_>,
    c: &mut DMatrix<f64>,
    ct: &mut CTerms,
    previous_xc: Option<&DMatrix<f64>>,
) -> Result<DMatrix<f64>, SolverError> {
    match pr.solve_xc(c, &ct.coarse, &ct.ctc) {
        Ok(xc) => return Ok(xc),
        Err(SolverError::SingularSystem { .. }) => {}
        Err(e) => return Err(e),
    }
    let fallback = pr.solve_xc_reduced(c, &ct.coarse, &ct.ctc)?;
    let fallback_loss = pr.loss(c, ct, &pr.xc_terms(&fallback)).total;

    let empty: Vec<usize> = (0..c.ncols()).filter(|&j| c.column(j).norm() <= 1e-12).collect();
    if empty.is_empty() {
        return Ok(fallback);
    }
    let reference = previous_xc.cloned().unwrap_or_else(|| fallback.clone());
    let recon = &*c * &reference;
    let mut residuals: Vec<(usize, f64)> = (0..c.nrows())
        .map(|i| (i, (pr.x.row(i) - recon.row(i)).norm_squared()))
        .collect();
    residuals.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut reseeded = c.clone();
    for (&col, &(node, _)) in empty.iter().zip(residuals.iter()) {
        reseeded.row_mut(node).fill(0.0);
        reseeded[(node, col)] = 1.0;
    }
    if let Ok(new_terms) = pr.c_terms(&reseeded) {
        if let Ok(xc) = pr.solve_xc(&reseeded, &new_terms.coarse, &new_terms.ctc) {
            let new_loss = pr.loss(&reseeded, &new_terms, &pr.xc_terms(&xc)).total;
            if new_loss <= fallback_loss {
                *c = reseeded;
                *ct = new_terms;
                return Ok(xc);
            }
        }
    }
    Ok(fallback)
}
