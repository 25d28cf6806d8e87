//! Graph representation and the matrices derived from it.
//!
//! An [`AttributedGraph`] holds a sparse symmetric adjacency matrix, an
//! optional dense feature matrix and optional ground-truth labels. From it,
//! [`build_derived`] computes the degree vector, the combinatorial Laplacian
//! `diag(d) - A` and the modularity matrix `A - d d^T / 2e`.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Symmetry tolerance applied to adjacency matrices.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Largest node count for which the modularity matrix is materialized.
/// Beyond it, products with `B` are evaluated as `A C - d (d^T C) / 2e`.
pub const DENSE_MODULARITY_LIMIT: usize = 20_000;

const POWER_ITERATIONS: usize = 50;
const POWER_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("graph has no edges (2e = 0); modularity is undefined")]
    EmptyGraph,
    #[error("adjacency is not symmetric at ({row}, {col})")]
    AsymmetricAdjacency { row: usize, col: usize },
    #[error("self-loop at node {node}")]
    SelfLoop { node: usize },
    #[error("negative edge weight at ({row}, {col})")]
    NegativeWeight { row: usize, col: usize },
    #[error("non-finite value in {what}")]
    NonFinite { what: &'static str },
    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("node index {index} out of range for {nodes} nodes")]
    NodeOutOfRange { index: usize, nodes: usize },
}

/// Square sparse matrix in compressed sparse row layout.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    dim: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds a `dim x dim` matrix from `(row, col, value)` triplets.
    /// Duplicate coordinates are summed; explicit zeros are dropped.
    pub fn from_triplets(
        dim: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self, GraphError> {
        let mut entries: Vec<(usize, usize, f64)> = Vec::new();
        for (r, c, v) in triplets {
            if r >= dim || c >= dim {
                return Err(GraphError::NodeOutOfRange {
                    index: r.max(c),
                    nodes: dim,
                });
            }
            if !v.is_finite() {
                return Err(GraphError::NonFinite { what: "adjacency" });
            }
            entries.push((r, c, v));
        }
        entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));

        let mut indptr = vec![0usize; dim + 1];
        let mut indices = Vec::with_capacity(entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in entries {
            if last == Some((r, c)) {
                *values.last_mut().expect("entry exists") += v;
            } else {
                indptr[r + 1] += 1;
                indices.push(c);
                values.push(v);
                last = Some((r, c));
            }
        }
        for i in 0..dim {
            indptr[i + 1] += indptr[i];
        }
        let mut m = Self {
            dim,
            indptr,
            indices,
            values,
        };
        m.drop_zeros();
        Ok(m)
    }

    /// An empty `dim x dim` matrix.
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            indptr: vec![0; dim + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    fn drop_zeros(&mut self) {
        if self.values.iter().all(|&v| v != 0.0) {
            return;
        }
        let mut indptr = vec![0usize; self.dim + 1];
        let mut indices = Vec::with_capacity(self.indices.len());
        let mut values = Vec::with_capacity(self.values.len());
        for row in 0..self.dim {
            for (col, v) in self.row(row) {
                if v != 0.0 {
                    indices.push(col);
                    values.push(v);
                }
            }
            indptr[row + 1] = indices.len();
        }
        self.indptr = indptr;
        self.indices = indices;
        self.values = values;
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of stored entries.
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Iterates the stored `(col, value)` pairs of one row.
    pub fn row(&self, row: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[row]..self.indptr[row + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    /// Iterates all stored entries as `(row, col, value)`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.dim).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        let span = self.indptr[row]..self.indptr[row + 1];
        match self.indices[span.clone()].binary_search(&col) {
            Ok(pos) => self.values[span.start + pos],
            Err(_) => 0.0,
        }
    }

    pub fn row_sums(&self) -> DVector<f64> {
        DVector::from_iterator(self.dim, (0..self.dim).map(|r| self.row(r).map(|(_, v)| v).sum()))
    }

    pub fn mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.dim,
            (0..self.dim).map(|r| self.row(r).map(|(c, v)| v * x[c]).sum()),
        )
    }

    /// Sparse-dense product `self * m`.
    pub fn mul_dense(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(m.nrows(), self.dim, "sparse product dimension mismatch");
        let cols = m.ncols();
        let mut out = DMatrix::zeros(self.dim, cols);
        for j in 0..cols {
            let src = m.column(j);
            let mut dst = out.column_mut(j);
            for r in 0..self.dim {
                let mut acc = 0.0;
                for idx in self.indptr[r]..self.indptr[r + 1] {
                    acc += self.values[idx] * src[self.indices[idx]];
                }
                dst[r] = acc;
            }
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.dim, self.dim);
        for (r, c, v) in self.iter() {
            out[(r, c)] += v;
        }
        out
    }

    /// First `(row, col)` whose mirrored entry differs by more than `tol`.
    pub fn asymmetry(&self, tol: f64) -> Option<(usize, usize)> {
        for (r, c, v) in self.iter() {
            if (v - self.get(c, r)).abs() > tol {
                return Some((r, c));
            }
        }
        None
    }
}

/// A graph with optional node features and ground-truth labels.
#[derive(Debug, Clone)]
pub struct AttributedGraph {
    adjacency: SparseMatrix,
    features: Option<DMatrix<f64>>,
    labels: Option<Vec<usize>>,
}

impl AttributedGraph {
    /// Validates and wraps an adjacency matrix with optional features and labels.
    pub fn new(
        adjacency: SparseMatrix,
        features: Option<DMatrix<f64>>,
        labels: Option<Vec<usize>>,
    ) -> Result<Self, GraphError> {
        let p = adjacency.dim();
        for (r, c, v) in adjacency.iter() {
            if r == c {
                return Err(GraphError::SelfLoop { node: r });
            }
            if v < 0.0 {
                return Err(GraphError::NegativeWeight { row: r, col: c });
            }
        }
        if let Some((row, col)) = adjacency.asymmetry(SYMMETRY_TOL) {
            return Err(GraphError::AsymmetricAdjacency { row, col });
        }
        if let Some(x) = &features {
            if x.nrows() != p {
                return Err(GraphError::DimensionMismatch {
                    what: "feature rows",
                    expected: p,
                    found: x.nrows(),
                });
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(GraphError::NonFinite { what: "features" });
            }
        }
        if let Some(y) = &labels {
            if y.len() != p {
                return Err(GraphError::DimensionMismatch {
                    what: "labels",
                    expected: p,
                    found: y.len(),
                });
            }
        }
        Ok(Self {
            adjacency,
            features,
            labels,
        })
    }

    /// Undirected graph from an edge list; each `(u, v, w)` adds `w` in both directions.
    pub fn from_edges(p: usize, edges: &[(usize, usize, f64)]) -> Result<Self, GraphError> {
        let triplets = edges.iter().flat_map(|&(u, v, w)| [(u, v, w), (v, u, w)]);
        Self::new(SparseMatrix::from_triplets(p, triplets)?, None, None)
    }

    pub fn with_features(self, features: DMatrix<f64>) -> Result<Self, GraphError> {
        Self::new(self.adjacency, Some(features), self.labels)
    }

    pub fn with_labels(self, labels: Vec<usize>) -> Result<Self, GraphError> {
        Self::new(self.adjacency, self.features, Some(labels))
    }

    pub fn num_nodes(&self) -> usize {
        self.adjacency.dim()
    }

    /// Number of undirected edges with nonzero weight.
    pub fn num_edges(&self) -> usize {
        self.adjacency.iter().filter(|&(r, c, _)| r < c).count()
    }

    pub fn adjacency(&self) -> &SparseMatrix {
        &self.adjacency
    }

    pub fn features(&self) -> Option<&DMatrix<f64>> {
        self.features.as_ref()
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn degrees(&self) -> DVector<f64> {
        self.adjacency.row_sums()
    }

    /// Relabels nodes so that new node `i` is old node `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self, GraphError> {
        let p = self.num_nodes();
        if perm.len() != p {
            return Err(GraphError::DimensionMismatch {
                what: "permutation",
                expected: p,
                found: perm.len(),
            });
        }
        let mut inverse = vec![usize::MAX; p];
        for (new, &old) in perm.iter().enumerate() {
            if old >= p || inverse[old] != usize::MAX {
                return Err(GraphError::NodeOutOfRange { index: old, nodes: p });
            }
            inverse[old] = new;
        }
        let adjacency = SparseMatrix::from_triplets(
            p,
            self.adjacency.iter().map(|(r, c, v)| (inverse[r], inverse[c], v)),
        )?;
        let features = self
            .features
            .as_ref()
            .map(|x| DMatrix::from_fn(p, x.ncols(), |i, j| x[(perm[i], j)]));
        let labels = self
            .labels
            .as_ref()
            .map(|y| perm.iter().map(|&old| y[old]).collect());
        Self::new(adjacency, features, labels)
    }
}

/// The modularity matrix `B = A - d d^T / 2e`, dense or implicit.
#[derive(Debug, Clone)]
pub enum ModularityMatrix {
    Dense(DMatrix<f64>),
    /// Rank-one update of the sparse adjacency, never materialized.
    Implicit {
        adjacency: SparseMatrix,
        degree: DVector<f64>,
        two_e: f64,
    },
}

impl ModularityMatrix {
    pub fn dim(&self) -> usize {
        match self {
            Self::Dense(b) => b.nrows(),
            Self::Implicit { degree, .. } => degree.len(),
        }
    }

    /// Computes `B * m`.
    pub fn apply(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            Self::Dense(b) => b * m,
            Self::Implicit {
                adjacency,
                degree,
                two_e,
            } => {
                let mut out = adjacency.mul_dense(m);
                let dtm = m.tr_mul(degree); // (d^T m)^T, one entry per column
                for j in 0..m.ncols() {
                    let s = dtm[j] / two_e;
                    out.column_mut(j).axpy(-s, degree, 1.0);
                }
                out
            }
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            Self::Dense(b) => b.clone(),
            Self::Implicit {
                adjacency,
                degree,
                two_e,
            } => adjacency.to_dense() - degree * degree.transpose() / *two_e,
        }
    }
}

/// Degree vector, Laplacian and modularity matrix of a graph.
#[derive(Debug)]
pub struct DerivedMatrices {
    pub degree: DVector<f64>,
    pub laplacian: SparseMatrix,
    pub modularity: ModularityMatrix,
    pub two_e: f64,
    laplacian_norm: OnceLock<f64>,
    modularity_norm: OnceLock<f64>,
}

impl DerivedMatrices {
    /// Spectral norm of the Laplacian (power iteration, cached).
    pub fn laplacian_norm(&self) -> f64 {
        *self.laplacian_norm.get_or_init(|| {
            spectral_norm_estimate(self.degree.len(), |v| {
                self.laplacian.mul_dense(v)
            })
        })
    }

    /// Largest absolute eigenvalue of the modularity matrix (power iteration, cached).
    pub fn modularity_norm(&self) -> f64 {
        *self
            .modularity_norm
            .get_or_init(|| spectral_norm_estimate(self.degree.len(), |v| self.modularity.apply(v)))
    }

    pub fn num_nodes(&self) -> usize {
        self.degree.len()
    }
}

/// Spectral norm of a symmetric operator by power iteration on `|v|`.
///
/// The start vector is a fixed pseudo-random sequence orthogonalized against
/// the all-ones vector, which lies in the null space of both `Θ` and `B`.
pub(crate) fn spectral_norm_estimate(
    dim: usize,
    apply: impl Fn(&DMatrix<f64>) -> DMatrix<f64>,
) -> f64 {
    if dim == 0 {
        return 0.0;
    }
    let mut state: u64 = 0x9E37_79B9_7F4A_7C15;
    let mut v = DMatrix::from_fn(dim, 1, |_, _| {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    });
    let mean = v.mean();
    v.add_scalar_mut(-mean);
    let norm = v.norm();
    if norm == 0.0 {
        return 0.0;
    }
    v /= norm;
    let mut estimate = 0.0;
    for _ in 0..POWER_ITERATIONS {
        let w = apply(&v);
        let next = w.norm();
        if next == 0.0 {
            return estimate;
        }
        v = w / next;
        let converged = (next - estimate).abs() <= POWER_TOL * next;
        estimate = next;
        if converged {
            break;
        }
    }
    estimate
}

/// Computes degree vector, Laplacian, modularity matrix and `2e`.
pub fn build_derived(graph: &AttributedGraph) -> Result<DerivedMatrices, GraphError> {
    let adjacency = graph.adjacency();
    if let Some((row, col)) = adjacency.asymmetry(SYMMETRY_TOL) {
        return Err(GraphError::AsymmetricAdjacency { row, col });
    }
    let p = adjacency.dim();
    let degree = adjacency.row_sums();
    let two_e = degree.sum();
    if two_e <= 0.0 {
        return Err(GraphError::EmptyGraph);
    }

    let laplacian = SparseMatrix::from_triplets(
        p,
        adjacency
            .iter()
            .map(|(r, c, v)| (r, c, -v))
            .chain((0..p).map(|i| (i, i, degree[i]))),
    )?;

    let modularity = if p <= DENSE_MODULARITY_LIMIT {
        let mut b = -(&degree * degree.transpose()) / two_e;
        for (r, c, v) in adjacency.iter() {
            b[(r, c)] += v;
        }
        ModularityMatrix::Dense(b)
    } else {
        ModularityMatrix::Implicit {
            adjacency: adjacency.clone(),
            degree: degree.clone(),
            two_e,
        }
    };

    Ok(DerivedMatrices {
        degree,
        laplacian,
        modularity,
        two_e,
        laplacian_norm: OnceLock::new(),
        modularity_norm: OnceLock::new(),
    })
}

/// Coarsened Laplacian `C^T Θ C` for an assignment matrix `C` (p x k).
pub fn coarsened_laplacian(c: &DMatrix<f64>, theta: &SparseMatrix) -> Result<DMatrix<f64>, GraphError> {
    if c.nrows() != theta.dim() {
        return Err(GraphError::DimensionMismatch {
            what: "assignment rows",
            expected: theta.dim(),
            found: c.nrows(),
        });
    }
    if c.ncols() == 0 {
        return Err(GraphError::DimensionMismatch {
            what: "assignment columns",
            expected: 1,
            found: 0,
        });
    }
    let theta_c = theta.mul_dense(c);
    let mut coarse = c.tr_mul(&theta_c);
    symmetrize(&mut coarse);
    Ok(coarse)
}

pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// One-hot `p x k` assignment matrix of a label vector.
pub fn one_hot(labels: &[usize], k: usize) -> DMatrix<f64> {
    let mut c = DMatrix::zeros(labels.len(), k);
    for (i, &l) in labels.iter().enumerate() {
        c[(i, l)] = 1.0;
    }
    c
}
