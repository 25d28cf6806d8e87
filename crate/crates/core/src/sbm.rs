//! Degree-corrected stochastic block model with synthetic node features.
//!
//! Edges are independent Bernoulli draws with probability
//! `s · θ_i θ_j · P[y_i, y_j]`, where `θ` follows a clamped power law
//! normalized to mean one inside each block and `s` is calibrated so the
//! expected mean degree hits the configured target. Features are Gaussian
//! blobs centred on hypercube vertices, one vertex per feature group.

use log::warn;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{AttributedGraph, GraphError, SparseMatrix};

const GRAPH_STREAM: u64 = 1;
const THETA_STREAM: u64 = 2;
const FEATURE_STREAM: u64 = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SbmError {
    #[error("invalid degrees: expected degree {degree} must exceed sub-degree {sub_degree}")]
    InvalidDegrees { degree: f64, sub_degree: f64 },
    #[error("invalid SBM configuration: {0}")]
    InvalidConfig(String),
    #[error("{groups} feature groups incompatible with {blocks} blocks (one must divide the other)")]
    GroupMismatch { groups: usize, blocks: usize },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// How the block connectivity matrix is specified.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BlockSpec {
    /// Explicit symmetric nonnegative `k x k` matrix, row-major.
    Matrix(Vec<Vec<f64>>),
    /// Built with [`block_matrix_from_degrees`].
    Degrees { expected_degree: f64, sub_degree: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbmConfig {
    pub p: usize,
    pub k: usize,
    /// Block sizes; `None` splits `p` as evenly as possible.
    pub block_sizes: Option<Vec<usize>>,
    pub blocks: BlockSpec,
    /// Target mean degree used to calibrate the edge-probability scale.
    pub target_degree: f64,
    pub powerlaw_exponent: f64,
    pub theta_min: f64,
    pub theta_max: f64,
    pub feature_dim: usize,
    /// Number of feature groups; `None` means one per block.
    pub feature_groups: Option<usize>,
    pub class_sep: f64,
    pub seed: u64,
}

impl Default for SbmConfig {
    /// Four blocks of 250 nodes, expected degree 20 with sub-degree 2,
    /// θ from a power law with exponent 2 clamped to `[2, 4]`, 128 features.
    fn default() -> Self {
        Self {
            p: 1000,
            k: 4,
            block_sizes: None,
            blocks: BlockSpec::Degrees {
                expected_degree: 20.0,
                sub_degree: 2.0,
            },
            target_degree: 20.0,
            powerlaw_exponent: 2.0,
            theta_min: 2.0,
            theta_max: 4.0,
            feature_dim: 128,
            feature_groups: None,
            class_sep: 1.0,
            seed: 0,
        }
    }
}

impl SbmConfig {
    pub fn sizes(&self) -> Vec<usize> {
        match &self.block_sizes {
            Some(s) => s.clone(),
            None => (0..self.k)
                .map(|b| self.p / self.k + usize::from(b < self.p % self.k))
                .collect(),
        }
    }

    pub fn block_matrix(&self) -> Result<DMatrix<f64>, SbmError> {
        match &self.blocks {
            BlockSpec::Degrees {
                expected_degree,
                sub_degree,
            } => block_matrix_from_degrees(self.k, *expected_degree, *sub_degree),
            BlockSpec::Matrix(rows) => {
                if rows.len() != self.k || rows.iter().any(|r| r.len() != self.k) {
                    return Err(SbmError::InvalidConfig(format!(
                        "block matrix must be {0}x{0}",
                        self.k
                    )));
                }
                Ok(DMatrix::from_fn(self.k, self.k, |i, j| rows[i][j]))
            }
        }
    }

    pub fn validate(&self) -> Result<(), SbmError> {
        if self.k == 0 || self.p < self.k {
            return Err(SbmError::InvalidConfig(format!(
                "need 1 <= k <= p, got k={} p={}",
                self.k, self.p
            )));
        }
        let sizes = self.sizes();
        if sizes.len() != self.k || sizes.iter().sum::<usize>() != self.p {
            return Err(SbmError::InvalidConfig("block sizes must sum to p".into()));
        }
        let b = self.block_matrix()?;
        for i in 0..self.k {
            for j in 0..self.k {
                if !(b[(i, j)] >= 0.0) || !b[(i, j)].is_finite() {
                    return Err(SbmError::InvalidConfig("block matrix entries must be >= 0".into()));
                }
                if (b[(i, j)] - b[(j, i)]).abs() > 1e-12 {
                    return Err(SbmError::InvalidConfig("block matrix must be symmetric".into()));
                }
            }
        }
        if !(self.theta_min > 0.0 && self.theta_min <= self.theta_max) {
            return Err(SbmError::InvalidConfig(
                "theta clamps must satisfy 0 < theta_min <= theta_max".into(),
            ));
        }
        if !(self.powerlaw_exponent > 1.0) {
            return Err(SbmError::InvalidConfig("power-law exponent must exceed 1".into()));
        }
        if !(self.target_degree > 0.0) {
            return Err(SbmError::InvalidConfig("target degree must be positive".into()));
        }
        if !(self.class_sep >= 0.0) {
            return Err(SbmError::InvalidConfig("class_sep must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Block matrix with `d − d_out` on the diagonal and `d_out` elsewhere.
pub fn block_matrix_from_degrees(k: usize, degree: f64, sub_degree: f64) -> Result<DMatrix<f64>, SbmError> {
    if k < 2 {
        return Err(SbmError::InvalidConfig("need at least two blocks".into()));
    }
    if !(degree > sub_degree) || sub_degree < 0.0 {
        return Err(SbmError::InvalidDegrees {
            degree,
            sub_degree,
        });
    }
    Ok(DMatrix::from_fn(k, k, |i, j| {
        if i == j {
            degree - sub_degree
        } else {
            sub_degree
        }
    }))
}

/// A fully specified DC-SBM: labels, degree parameters and edge probabilities.
#[derive(Debug, Clone)]
pub struct DcSbmModel {
    pub labels: Vec<usize>,
    /// Raw power-law draws, clamped to `[theta_min, theta_max]`.
    pub theta: Vec<f64>,
    /// `θ` divided by its block mean.
    pub weights: Vec<f64>,
    /// Scaled block probabilities `s · P`.
    pub probabilities: DMatrix<f64>,
    pub scale: f64,
}

impl DcSbmModel {
    pub fn from_config(cfg: &SbmConfig) -> Result<Self, SbmError> {
        cfg.validate()?;
        let sizes = cfg.sizes();
        let labels: Vec<usize> = sizes
            .iter()
            .enumerate()
            .flat_map(|(b, &n)| std::iter::repeat(b).take(n))
            .collect();

        let mut rng = stream_rng(cfg.seed, THETA_STREAM);
        // Pareto draw by inversion: x = x_min · u^{-1/(a-1)}
        let theta: Vec<f64> = (0..cfg.p)
            .map(|_| {
                let u: f64 = 1.0 - rng.gen::<f64>();
                let x = cfg.theta_min * u.powf(-1.0 / (cfg.powerlaw_exponent - 1.0));
                x.clamp(cfg.theta_min, cfg.theta_max)
            })
            .collect();

        let mut block_mean = vec![0.0; cfg.k];
        for (i, &b) in labels.iter().enumerate() {
            block_mean[b] += theta[i];
        }
        for (b, m) in block_mean.iter_mut().enumerate() {
            *m /= sizes[b].max(1) as f64;
        }
        let weights: Vec<f64> = labels
            .iter()
            .zip(&theta)
            .map(|(&b, &t)| t / block_mean[b])
            .collect();

        let base = cfg.block_matrix()?;
        let mut block_weight = vec![0.0; cfg.k];
        let mut self_pairs = 0.0;
        for (i, &b) in labels.iter().enumerate() {
            block_weight[b] += weights[i];
            self_pairs += weights[i] * weights[i] * base[(b, b)];
        }
        let mut pair_mass = -self_pairs;
        for a in 0..cfg.k {
            for b in 0..cfg.k {
                pair_mass += base[(a, b)] * block_weight[a] * block_weight[b];
            }
        }
        let scale = if pair_mass > 0.0 {
            cfg.target_degree * cfg.p as f64 / pair_mass
        } else {
            0.0
        };
        Ok(Self {
            labels,
            theta,
            weights,
            probabilities: base * scale,
            scale,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.labels.len()
    }

    /// Bernoulli parameter of edge `(i, j)` before clipping to 1.
    pub fn edge_probability(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        self.weights[i] * self.weights[j] * self.probabilities[(self.labels[i], self.labels[j])]
    }

    /// Expected mean degree under the model (after clipping).
    pub fn expected_mean_degree(&self) -> f64 {
        let p = self.num_nodes();
        let mut total = 0.0;
        for i in 0..p {
            for j in (i + 1)..p {
                total += self.edge_probability(i, j).min(1.0);
            }
        }
        2.0 * total / p as f64
    }

    /// Draws one simple undirected 0/1 adjacency matrix.
    pub fn sample_adjacency<R: Rng>(&self, rng: &mut R) -> SparseMatrix {
        let p = self.num_nodes();
        let mut triplets = Vec::new();
        let mut clipped = 0usize;
        for i in 0..p {
            for j in (i + 1)..p {
                let mut prob = self.edge_probability(i, j);
                if prob > 1.0 {
                    clipped += 1;
                    prob = 1.0;
                }
                if rng.gen::<f64>() < prob {
                    triplets.push((i, j, 1.0));
                    triplets.push((j, i, 1.0));
                }
            }
        }
        if clipped > 0 {
            warn!("{clipped} edge probabilities exceeded 1 and were clipped");
        }
        SparseMatrix::from_triplets(p, triplets).expect("indices in range")
    }
}

/// Generated graph together with the model that produced it.
#[derive(Debug, Clone)]
pub struct GeneratedSbm {
    pub graph: AttributedGraph,
    pub model: DcSbmModel,
    pub feature_groups: Vec<usize>,
    pub realized_mean_degree: f64,
}

/// Generates an attributed DC-SBM graph with planted labels.
pub fn generate(cfg: &SbmConfig) -> Result<GeneratedSbm, SbmError> {
    let model = DcSbmModel::from_config(cfg)?;
    let mut rng = stream_rng(cfg.seed, GRAPH_STREAM);
    let adjacency = model.sample_adjacency(&mut rng);
    let realized_mean_degree = adjacency.nnz() as f64 / cfg.p as f64;
    log::info!(
        "DC-SBM: scale {:.6e}, realized mean degree {:.3} (target {})",
        model.scale,
        realized_mean_degree,
        cfg.target_degree
    );
    let (features, feature_groups) = generate_features(&model.labels, cfg)?;
    let graph = AttributedGraph::new(adjacency, Some(features), Some(model.labels.clone()))?;
    Ok(GeneratedSbm {
        graph,
        model,
        feature_groups,
        realized_mean_degree,
    })
}

/// Feature group of each node: equal to the block, an even split of each
/// block (more groups than blocks) or an even merge of blocks (fewer groups).
pub fn feature_group_assignment(labels: &[usize], k: usize, groups: usize) -> Result<Vec<usize>, SbmError> {
    if groups == 0 || k == 0 {
        return Err(SbmError::GroupMismatch { groups, blocks: k });
    }
    if groups == k {
        return Ok(labels.to_vec());
    }
    if groups > k {
        if groups % k != 0 {
            return Err(SbmError::GroupMismatch { groups, blocks: k });
        }
        let per_block = groups / k;
        let mut sizes = vec![0usize; k];
        for &l in labels {
            sizes[l] += 1;
        }
        let mut seen = vec![0usize; k];
        Ok(labels
            .iter()
            .map(|&l| {
                let rank = seen[l];
                seen[l] += 1;
                l * per_block + rank * per_block / sizes[l]
            })
            .collect())
    } else {
        if k % groups != 0 {
            return Err(SbmError::GroupMismatch { groups, blocks: k });
        }
        let merge = k / groups;
        Ok(labels.iter().map(|&l| l / merge).collect())
    }
}

/// Hypercube vertex of a feature group: the `group`-th Walsh sign pattern,
/// so distinct groups differ in many coordinates.
pub fn hypercube_vertex(group: usize, dim: usize) -> Vec<f64> {
    (0..dim)
        .map(|j| if (group & j).count_ones() % 2 == 0 { 1.0 } else { -1.0 })
        .collect()
}

/// Samples `x_i = class_sep · v(g_i) + N(0, I)` for each node.
pub fn generate_features(labels: &[usize], cfg: &SbmConfig) -> Result<(DMatrix<f64>, Vec<usize>), SbmError> {
    let groups = cfg.feature_groups.unwrap_or(cfg.k);
    let assignment = feature_group_assignment(labels, cfg.k, groups)?;
    if groups > cfg.feature_dim.max(1) {
        return Err(SbmError::InvalidConfig(format!(
            "{groups} feature groups need at least as many feature dimensions"
        )));
    }
    let centers: Vec<Vec<f64>> = (0..groups)
        .map(|g| hypercube_vertex(g, cfg.feature_dim))
        .collect();
    let mut rng = stream_rng(cfg.seed, FEATURE_STREAM);
    let n = cfg.feature_dim;
    let mut x = DMatrix::zeros(labels.len(), n);
    for (i, &g) in assignment.iter().enumerate() {
        for j in 0..n {
            let noise: f64 = rng.sample(StandardNormal);
            x[(i, j)] = cfg.class_sep * centers[g][j] + noise;
        }
    }
    Ok((x, assignment))
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
