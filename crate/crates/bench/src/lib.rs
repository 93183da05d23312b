//! Shared fixtures for the benchmarks in `benches/`.

use heatpar_core::parametrix::{complete_graph_kernel, restriction_parametrix};
use heatpar_core::{Parametrix, Result, SubgraphEmbedding, TimeGrid, WeightedGraph};

/// K_n with the edge {0, 1} removed, and its restriction parametrix on M uniform steps.
pub fn complete_minus_edge(n: usize, t_max: f64, steps: usize) -> Result<Parametrix> {
    let e = SubgraphEmbedding::new(WeightedGraph::complete(n), (0..n).collect(), vec![(0, 1)], vec![])?;
    restriction_parametrix(&e, &complete_graph_kernel(n)?, &TimeGrid::uniform(t_max, steps)?)
}

/// A deterministic dense weighted graph with weights in (0, 2).
pub fn dense_graph(n: usize) -> WeightedGraph {
    let mut edges = Vec::new();
    for x in 0..n {
        for y in x + 1..n {
            edges.push((x, y, 1.0 + ((x * 7 + y * 13) % 19) as f64 / 19.0 - 0.45));
        }
    }
    WeightedGraph::from_edges(n, &edges).expect("valid weights")
}
