//! `eval`: score a predicted labeling against ground truth and the graph.

use anyhow::{Context, Result};
use magc::io::{self, EdgeListOptions};
use magc::{evaluate, AttributedGraph, Evaluation};

use crate::EvalArgs;

pub fn run_eval(args: &EvalArgs) -> Result<Evaluation> {
    let y_true = io::load_labels(&args.labels).context("io")?;
    let y_pred = io::load_labels(&args.pred).context("io")?;
    let options = EdgeListOptions {
        num_nodes: Some(y_true.len()),
        ..EdgeListOptions::default()
    };
    let edges = io::load_edge_list(&args.edges, &options).context("io")?;
    let graph = AttributedGraph::new(edges.adjacency, None, None).context("graph")?;
    evaluate(&graph, &y_true, &y_pred).context("metrics")
}
