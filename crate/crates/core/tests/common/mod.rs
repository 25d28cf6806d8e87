//! Dense reference computations shared by the integration tests.
#![allow(dead_code)]

use magc::graph::AttributedGraph;
use magc::solver::{project_feasible, SolverConfig};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Erdős–Rényi style graph with random positive weights and at least one edge.
pub fn random_graph(rng: &mut ChaCha8Rng, p: usize, density: f64, weighted: bool) -> AttributedGraph {
    let mut edges = Vec::new();
    for i in 0..p {
        for j in (i + 1)..p {
            if rng.gen::<f64>() < density {
                let w = if weighted { rng.gen_range(0.5..2.0) } else { 1.0 };
                edges.push((i, j, w));
            }
        }
    }
    // spanning path keeps the graph connected
    for i in 1..p {
        if !edges.iter().any(|&(a, b, _)| (a, b) == (i - 1, i)) {
            edges.push((i - 1, i, 1.0));
        }
    }
    AttributedGraph::from_edges(p, &edges).unwrap()
}

pub fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0))
}

/// Strictly positive feasible assignment matrix.
pub fn random_feasible(rng: &mut ChaCha8Rng, p: usize, k: usize) -> DMatrix<f64> {
    let m = DMatrix::from_fn(p, k, |_, _| rng.gen_range(0.05..1.0));
    let mut out = m;
    for mut row in out.row_iter_mut() {
        let n = row.norm();
        row *= rng.gen_range(0.3..0.95) / n;
    }
    project_feasible(&out)
}

pub fn dense_adjacency(g: &AttributedGraph) -> DMatrix<f64> {
    let p = g.num_nodes();
    DMatrix::from_fn(p, p, |i, j| g.adjacency().get(i, j))
}

pub fn dense_laplacian(a: &DMatrix<f64>) -> DMatrix<f64> {
    let p = a.nrows();
    let mut l = -a.clone();
    for i in 0..p {
        l[(i, i)] += a.row(i).sum();
    }
    l
}

pub fn dense_modularity(a: &DMatrix<f64>) -> (DMatrix<f64>, f64) {
    let p = a.nrows();
    let d: Vec<f64> = (0..p).map(|i| a.row(i).sum()).collect();
    let two_e: f64 = d.iter().sum();
    (DMatrix::from_fn(p, p, |i, j| a[(i, j)] - d[i] * d[j] / two_e), two_e)
}

pub fn eig_logdet(m: &DMatrix<f64>) -> f64 {
    m.clone().symmetric_eigenvalues().iter().map(|v| v.ln()).sum()
}

/// Objective evaluated term by term with dense matrices.
pub fn dense_total(
    g: &AttributedGraph,
    c: &DMatrix<f64>,
    xc: &DMatrix<f64>,
    x: &DMatrix<f64>,
    cfg: &SolverConfig,
) -> f64 {
    let a = dense_adjacency(g);
    let theta = dense_laplacian(&a);
    let (b, two_e) = dense_modularity(&a);
    let k = c.ncols();
    let coarse = c.transpose() * &theta * c;
    let smooth = (xc.transpose() * &coarse * xc).trace();
    let relax = 0.5 * (x - c * xc).norm_squared();
    let modularity = (c.transpose() * &b * c).trace();
    let j = DMatrix::from_element(k, k, 1.0 / k as f64);
    let logdet = if cfg.gamma > 0.0 { eig_logdet(&(coarse + j)) } else { 0.0 };
    let sparsity: f64 = 0.5
        * c.row_iter()
            .map(|r| r.iter().map(|v| v.abs()).sum::<f64>().powi(2))
            .sum::<f64>();
    smooth + cfg.alpha * relax - cfg.beta / two_e * modularity - cfg.gamma * logdet + cfg.lambda * sparsity
}

/// Central finite-difference gradient of [`dense_total`] in `C`.
pub fn fd_gradient(
    g: &AttributedGraph,
    c: &DMatrix<f64>,
    xc: &DMatrix<f64>,
    x: &DMatrix<f64>,
    cfg: &SolverConfig,
    h: f64,
) -> DMatrix<f64> {
    DMatrix::from_fn(c.nrows(), c.ncols(), |i, j| {
        let mut plus = c.clone();
        plus[(i, j)] += h;
        let mut minus = c.clone();
        minus[(i, j)] -= h;
        (dense_total(g, &plus, xc, x, cfg) - dense_total(g, &minus, xc, x, cfg)) / (2.0 * h)
    })
}

/// Two triangles {0,1,2} and {3,4,5} joined by the edge 2–3.
pub fn bridged_triangles() -> AttributedGraph {
    AttributedGraph::from_edges(
        6,
        &[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0), (3, 4, 1.0), (4, 5, 1.0), (3, 5, 1.0), (2, 3, 1.0)],
    )
    .unwrap()
}

/// Two triangles with no edge between them.
pub fn disjoint_triangles() -> AttributedGraph {
    AttributedGraph::from_edges(
        6,
        &[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0), (3, 4, 1.0), (4, 5, 1.0), (3, 5, 1.0)],
    )
    .unwrap()
}

pub fn clique_pair(size: usize) -> AttributedGraph {
    let mut edges = Vec::new();
    for block in 0..2 {
        let off = block * size;
        for i in 0..size {
            for j in (i + 1)..size {
                edges.push((off + i, off + j, 1.0));
            }
        }
    }
    AttributedGraph::from_edges(2 * size, &edges).unwrap()
}

/// Mutual information from marginal and joint entropies, normalized by the
/// mean entropy.
pub fn nmi_oracle(a: &[usize], b: &[usize]) -> f64 {
    use std::collections::HashMap;
    let n = a.len() as f64;
    let entropy = |counts: HashMap<(usize, usize), usize>| -> f64 {
        counts
            .values()
            .map(|&c| {
                let p = c as f64 / n;
                -p * p.ln()
            })
            .sum()
    };
    let mut ha = HashMap::new();
    let mut hb = HashMap::new();
    let mut hab = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *ha.entry((x, 0)).or_insert(0) += 1;
        *hb.entry((y, 0)).or_insert(0) += 1;
        *hab.entry((x, y)).or_insert(0) += 1;
    }
    let (ea, eb, eab) = (entropy(ha), entropy(hb), entropy(hab));
    if ea == 0.0 && eb == 0.0 {
        return 1.0;
    }
    if ea == 0.0 || eb == 0.0 {
        return 0.0;
    }
    ((ea + eb - eab) / (0.5 * (ea + eb))).clamp(0.0, 1.0)
}

/// Adjusted Rand index by counting all node pairs.
pub fn ari_oracle(a: &[usize], b: &[usize]) -> f64 {
    let (mut both, mut only_a, mut only_b, mut neither) = (0.0f64, 0.0, 0.0, 0.0);
    for i in 0..a.len() {
        for j in (i + 1)..a.len() {
            match (a[i] == a[j], b[i] == b[j]) {
                (true, true) => both += 1.0,
                (true, false) => only_a += 1.0,
                (false, true) => only_b += 1.0,
                (false, false) => neither += 1.0,
            }
        }
    }
    let denom = (both + only_a) * (only_a + neither) + (both + only_b) * (only_b + neither);
    if denom == 0.0 {
        return 1.0;
    }
    2.0 * (both * neither - only_a * only_b) / denom
}

/// Best accuracy over every injective map between predicted clusters and classes.
pub fn accuracy_oracle(truth: &[usize], pred: &[usize]) -> f64 {
    let kt = truth.iter().max().map_or(0, |m| m + 1);
    let kp = pred.iter().max().map_or(0, |m| m + 1);
    let mut best = 0usize;
    let mut used = vec![false; kt];
    let mut map = vec![usize::MAX; kp];
    fn search(
        c: usize,
        kp: usize,
        used: &mut Vec<bool>,
        map: &mut Vec<usize>,
        truth: &[usize],
        pred: &[usize],
        best: &mut usize,
    ) {
        if c == kp {
            let hits = truth.iter().zip(pred).filter(|(&t, &p)| map[p] == t).count();
            *best = (*best).max(hits);
            return;
        }
        // cluster c may stay unmatched when there are more clusters than classes
        map[c] = usize::MAX;
        search(c + 1, kp, used, map, truth, pred, best);
        for t in 0..used.len() {
            if !used[t] {
                used[t] = true;
                map[c] = t;
                search(c + 1, kp, used, map, truth, pred, best);
                used[t] = false;
            }
        }
        map[c] = usize::MAX;
    }
    search(0, kp, &mut used, &mut map, truth, pred, &mut best);
    best as f64 / truth.len() as f64
}

/// Newman modularity by a double loop over all node pairs.
pub fn modularity_oracle(g: &AttributedGraph, labels: &[usize]) -> f64 {
    let a = dense_adjacency(g);
    let p = a.nrows();
    let d: Vec<f64> = (0..p).map(|i| a.row(i).sum()).collect();
    let two_e: f64 = d.iter().sum();
    let mut q = 0.0;
    for i in 0..p {
        for j in 0..p {
            if labels[i] == labels[j] {
                q += a[(i, j)] - d[i] * d[j] / two_e;
            }
        }
    }
    q / two_e
}

pub fn random_labels(rng: &mut ChaCha8Rng, p: usize, k: usize) -> Vec<usize> {
    (0..p).map(|_| rng.gen_range(0..k)).collect()
}
