//! `bench`: per-iteration solver time across a grid of graph sizes and the
//! fitted growth exponent `log t / log p`.

use std::time::Instant;

use anyhow::{bail, Context, Result};
use magc::sbm::{self, BlockSpec};
use magc::solver::{self, InitStrategy, StepPolicy};
use magc::{build_derived, SbmConfig, SolverConfig};
use serde::Serialize;

#[derive(Debug, Clone)]
pub struct BenchSettings {
    pub sizes: Vec<usize>,
    pub k: usize,
    pub feature_dim: usize,
    pub iters: usize,
    pub repeats: usize,
    pub seed: u64,
    pub step_policy: StepPolicy,
}

impl Default for BenchSettings {
    fn default() -> Self {
        Self {
            sizes: vec![500, 1000, 2000],
            k: 4,
            feature_dim: 64,
            iters: 20,
            repeats: 3,
            seed: 0,
            step_policy: StepPolicy::Backtracking,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchPoint {
    pub p: usize,
    pub num_edges: usize,
    pub iterations: usize,
    /// Fastest repeat, divided by its iteration count.
    pub seconds_per_iter: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub k: usize,
    pub feature_dim: usize,
    pub points: Vec<BenchPoint>,
    /// Least-squares slope of `ln(seconds_per_iter)` against `ln(p)`.
    pub exponent: f64,
}

/// Ordinary least-squares slope of `ys` on `xs`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

pub fn run_bench(settings: &BenchSettings) -> Result<BenchReport> {
    if settings.sizes.len() < 2 {
        bail!("bench: need at least two sizes");
    }
    if settings.iters == 0 || settings.repeats == 0 {
        bail!("bench: iters and repeats must be positive");
    }
    let mut points = Vec::new();
    for &p in &settings.sizes {
        let sbm_cfg = SbmConfig {
            p,
            k: settings.k,
            blocks: BlockSpec::Degrees {
                expected_degree: 20.0,
                sub_degree: 2.0,
            },
            feature_dim: settings.feature_dim,
            seed: settings.seed,
            ..SbmConfig::default()
        };
        let gen = sbm::generate(&sbm_cfg).context("sbm")?;
        let graph = &gen.graph;
        let x = graph.features().expect("generated graphs carry features");
        let derived = build_derived(graph).context("graph")?;
        let cfg = SolverConfig {
            k: settings.k,
            max_iters: settings.iters,
            // never met, so every run performs exactly `iters` updates
            rel_tol: f64::MIN_POSITIVE,
            step_policy: settings.step_policy,
            init: InitStrategy::RandomUniform,
            seed: settings.seed,
            ..SolverConfig::default()
        };
        let c0 = solver::initial_assignment(graph, &cfg);
        let mut best = f64::INFINITY;
        let mut iterations = 0;
        for _ in 0..settings.repeats {
            let started = Instant::now();
            let out = solver::solve_with(&derived, x, &cfg, c0.clone()).context("solver")?;
            let elapsed = started.elapsed().as_secs_f64();
            iterations = out.state.t.max(1);
            best = best.min(elapsed / iterations as f64);
        }
        log::info!("bench p={p}: {best:.3e} s/iter");
        points.push(BenchPoint {
            p,
            num_edges: graph.num_edges(),
            iterations,
            seconds_per_iter: best,
        });
    }
    let xs: Vec<f64> = points.iter().map(|pt| (pt.p as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|pt| pt.seconds_per_iter.ln()).collect();
    Ok(BenchReport {
        k: settings.k,
        feature_dim: settings.feature_dim,
        exponent: fit_slope(&xs, &ys),
        points,
    })
}

/// Plain-text table for terminals.
pub fn render_table(report: &BenchReport) -> String {
    let mut out = format!("{:>8} {:>10} {:>8} {:>14}\n", "p", "edges", "iters", "s/iter");
    for pt in &report.points {
        out += &format!(
            "{:>8} {:>10} {:>8} {:>14.6e}\n",
            pt.p, pt.num_edges, pt.iterations, pt.seconds_per_iter
        );
    }
    out += &format!("fitted exponent: {:.3}\n", report.exponent);
    out
}

#[cfg(test)]
mod tests {
    use super::fit_slope;

    #[test]
    fn slope_of_exact_power_law() {
        let xs: Vec<f64> = [500.0f64, 1000.0, 2000.0].iter().map(|p| p.ln()).collect();
        let ys: Vec<f64> = [500.0f64, 1000.0, 2000.0].iter().map(|p| (3e-9 * p * p).ln()).collect();
        assert!((fit_slope(&xs, &ys) - 2.0).abs() < 1e-12);
    }
}
