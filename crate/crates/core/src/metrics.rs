//! Clustering quality metrics.
//!
//! Label metrics compare two partitions through their contingency table and
//! are invariant to relabeling either side. Graph metrics score a partition
//! against the adjacency structure alone.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{one_hot, AttributedGraph, DerivedMatrices, GraphError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("label vectors differ in length: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("cluster {cluster} has zero volume (or its complement does); conductance undefined")]
    ZeroVolumeCluster { cluster: usize },
    #[error("graph has no edges; modularity undefined")]
    EmptyGraph,
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Count matrix with rows indexed by true class and columns by predicted cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contingency {
    pub counts: Vec<Vec<u64>>,
    pub total: u64,
}

impl Contingency {
    pub fn new(y_true: &[usize], y_pred: &[usize]) -> Result<Self, MetricError> {
        check_lengths(y_true, y_pred)?;
        let rows = y_true.iter().max().map_or(0, |m| m + 1);
        let cols = y_pred.iter().max().map_or(0, |m| m + 1);
        let mut counts = vec![vec![0u64; cols]; rows];
        for (&t, &p) in y_true.iter().zip(y_pred) {
            counts[t][p] += 1;
        }
        Ok(Self {
            counts,
            total: y_true.len() as u64,
        })
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<u64> {
        let cols = self.counts.first().map_or(0, Vec::len);
        (0..cols)
            .map(|j| self.counts.iter().map(|r| r[j]).sum())
            .collect()
    }
}

fn check_lengths(a: &[usize], b: &[usize]) -> Result<(), MetricError> {
    if a.len() != b.len() {
        return Err(MetricError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(())
}

fn entropy(sums: &[u64], n: f64) -> f64 {
    sums.iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Mutual information (natural log) between two labelings.
pub fn mutual_information(y_true: &[usize], y_pred: &[usize]) -> Result<f64, MetricError> {
    let table = Contingency::new(y_true, y_pred)?;
    Ok(mutual_information_of(&table))
}

fn mutual_information_of(table: &Contingency) -> f64 {
    let n = table.total as f64;
    if n == 0.0 {
        return 0.0;
    }
    let rows = table.row_sums();
    let cols = table.col_sums();
    let mut mi = 0.0;
    for (i, row) in table.counts.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let c = c as f64;
            mi += c / n * (n * c / (rows[i] as f64 * cols[j] as f64)).ln();
        }
    }
    mi.max(0.0)
}

/// Mutual information normalized by the arithmetic mean of the two entropies.
///
/// Two single-cluster labelings score 1; a single cluster against anything
/// with two or more classes scores 0.
pub fn nmi(y_true: &[usize], y_pred: &[usize]) -> Result<f64, MetricError> {
    let table = Contingency::new(y_true, y_pred)?;
    let n = table.total as f64;
    let h_true = entropy(&table.row_sums(), n);
    let h_pred = entropy(&table.col_sums(), n);
    if h_true == 0.0 && h_pred == 0.0 {
        return Ok(1.0);
    }
    if h_true == 0.0 || h_pred == 0.0 {
        return Ok(0.0);
    }
    let mi = mutual_information_of(&table);
    Ok((mi / (0.5 * (h_true + h_pred))).clamp(0.0, 1.0))
}

fn pairs(c: u64) -> f64 {
    let c = c as f64;
    c * (c - 1.0) / 2.0
}

/// Adjusted Rand index.
pub fn ari(y_true: &[usize], y_pred: &[usize]) -> Result<f64, MetricError> {
    let table = Contingency::new(y_true, y_pred)?;
    let n = table.total;
    if n < 2 {
        return Ok(1.0);
    }
    let index: f64 = table.counts.iter().flatten().map(|&c| pairs(c)).sum();
    let sum_rows: f64 = table.row_sums().into_iter().map(pairs).sum();
    let sum_cols: f64 = table.col_sums().into_iter().map(pairs).sum();
    let expected = sum_rows * sum_cols / pairs(n);
    let max_index = 0.5 * (sum_rows + sum_cols);
    let denom = max_index - expected;
    if denom == 0.0 {
        // both partitions trivial in the same way
        return Ok(if index == expected { 1.0 } else { 0.0 });
    }
    Ok((index - expected) / denom)
}

/// Fraction of nodes correctly labeled under the best one-to-one matching
/// of predicted clusters to true classes.
pub fn accuracy(y_true: &[usize], y_pred: &[usize]) -> Result<f64, MetricError> {
    let table = Contingency::new(y_true, y_pred)?;
    if table.total == 0 {
        return Ok(1.0);
    }
    let rows = table.counts.len();
    let cols = table.counts.first().map_or(0, Vec::len);
    let size = rows.max(cols);
    // zero-padded square profit matrix turned into a cost matrix
    let max = table.counts.iter().flatten().copied().max().unwrap_or(0) as f64;
    let cost = DMatrix::from_fn(size, size, |i, j| {
        let c = if i < rows && j < cols {
            table.counts[i][j] as f64
        } else {
            0.0
        };
        max - c
    });
    let assignment = hungarian(&cost);
    let matched: u64 = assignment
        .iter()
        .enumerate()
        .filter(|&(i, &j)| i < rows && j < cols)
        .map(|(i, &j)| table.counts[i][j])
        .sum();
    Ok(matched as f64 / table.total as f64)
}

/// Minimum-cost perfect assignment on a square cost matrix.
///
/// Returns `assignment[row] = column`. O(n³) shortest augmenting path with
/// row and column potentials.
pub fn hungarian(cost: &DMatrix<f64>) -> Vec<usize> {
    let n = cost.nrows();
    assert_eq!(n, cost.ncols(), "cost matrix must be square");
    if n == 0 {
        return Vec::new();
    }
    // 1-based arrays; index 0 is the virtual source column
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut col0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[col0] = true;
            let r = owner[col0];
            let mut delta = f64::INFINITY;
            let mut next = 0usize;
            for col in 1..=n {
                if used[col] {
                    continue;
                }
                let reduced = cost[(r - 1, col - 1)] - u[r] - v[col];
                if reduced < minv[col] {
                    minv[col] = reduced;
                    way[col] = col0;
                }
                if minv[col] < delta {
                    delta = minv[col];
                    next = col;
                }
            }
            for col in 0..=n {
                if used[col] {
                    u[owner[col]] += delta;
                    v[col] -= delta;
                } else {
                    minv[col] -= delta;
                }
            }
            col0 = next;
            if owner[col0] == 0 {
                break;
            }
        }
        loop {
            let prev = way[col0];
            owner[col0] = owner[prev];
            col0 = prev;
            if col0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for col in 1..=n {
        assignment[owner[col] - 1] = col - 1;
    }
    assignment
}

/// Newman modularity of a hard partition, by direct summation over node pairs.
pub fn modularity_score(graph: &AttributedGraph, labels: &[usize]) -> Result<f64, MetricError> {
    check_lengths(labels, &vec![0; graph.num_nodes()])?;
    let adjacency = graph.adjacency();
    let degree = adjacency.row_sums();
    let two_e: f64 = degree.iter().sum();
    if two_e <= 0.0 {
        return Err(MetricError::EmptyGraph);
    }
    // Σ_ij A_ij δ + Σ_ij d_i d_j δ / 2e, the latter via per-cluster degree totals
    let mut within = 0.0;
    for (i, j, w) in adjacency.iter() {
        if labels[i] == labels[j] {
            within += w;
        }
    }
    let clusters = labels.iter().max().map_or(0, |m| m + 1);
    let mut cluster_degree = vec![0.0; clusters];
    for (i, &l) in labels.iter().enumerate() {
        cluster_degree[l] += degree[i];
    }
    let expected: f64 = cluster_degree.iter().map(|d| d * d).sum::<f64>() / two_e;
    Ok((within - expected) / two_e)
}

/// Modularity as `tr(CᵀBC) / 2e` for the one-hot matrix of `labels`.
pub fn modularity_trace(derived: &DerivedMatrices, labels: &[usize]) -> Result<f64, MetricError> {
    check_lengths(labels, &vec![0; derived.num_nodes()])?;
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let c = one_hot(labels, k);
    let bc = derived.modularity.apply(&c);
    Ok((c.transpose() * bc).trace() / derived.two_e)
}

/// Mean over clusters of `cut(S, V∖S) / min(vol S, vol V∖S)`.
///
/// Cluster ids without members are skipped.
pub fn conductance(graph: &AttributedGraph, labels: &[usize]) -> Result<f64, MetricError> {
    let per_cluster = conductance_per_cluster(graph, labels)?;
    let present: Vec<f64> = per_cluster.into_iter().flatten().collect();
    Ok(present.iter().sum::<f64>() / present.len() as f64)
}

/// Conductance of each cluster id; `None` for ids with no members.
pub fn conductance_per_cluster(graph: &AttributedGraph, labels: &[usize]) -> Result<Vec<Option<f64>>, MetricError> {
    check_lengths(labels, &vec![0; graph.num_nodes()])?;
    let adjacency = graph.adjacency();
    let degree = adjacency.row_sums();
    let total: f64 = degree.iter().sum();
    let clusters = labels.iter().max().map_or(0, |m| m + 1);
    let mut volume = vec![0.0; clusters];
    let mut size = vec![0usize; clusters];
    let mut cut = vec![0.0; clusters];
    for (i, &l) in labels.iter().enumerate() {
        volume[l] += degree[i];
        size[l] += 1;
    }
    for (i, j, w) in adjacency.iter() {
        if labels[i] != labels[j] {
            cut[labels[i]] += w;
        }
    }
    (0..clusters)
        .map(|c| {
            if size[c] == 0 {
                return Ok(None);
            }
            let denom = volume[c].min(total - volume[c]);
            if denom <= 0.0 {
                return Err(MetricError::ZeroVolumeCluster { cluster: c });
            }
            Ok(Some(cut[c] / denom))
        })
        .collect()
}

/// All metrics for one predicted labeling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub nmi: f64,
    pub ari: f64,
    pub acc: f64,
    pub modularity: f64,
    /// `None` when some cluster or its complement has zero volume.
    pub conductance: Option<f64>,
    pub contingency: Contingency,
}

/// Evaluates `y_pred` against `y_true` and against the graph structure.
pub fn evaluate(graph: &AttributedGraph, y_true: &[usize], y_pred: &[usize]) -> Result<Evaluation, MetricError> {
    check_lengths(y_true, y_pred)?;
    check_lengths(y_pred, &vec![0; graph.num_nodes()])?;
    let conductance = match conductance(graph, y_pred) {
        Ok(c) => Some(c),
        Err(MetricError::ZeroVolumeCluster { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(Evaluation {
        nmi: nmi(y_true, y_pred)?,
        ari: ari(y_true, y_pred)?,
        acc: accuracy(y_true, y_pred)?,
        modularity: modularity_score(graph, y_pred)?,
        conductance,
        contingency: Contingency::new(y_true, y_pred)?,
    })
}
