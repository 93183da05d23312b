//! Weighted graphs, the graph Laplacian, and subgraph boundary combinatorics.

use crate::error::{contract, HeatError, Result};
use crate::linalg::Matrix;

/// Vertices are positional: `0..n` in the owning graph.
pub type VertexId = usize;

/// Finite graph with a dense symmetric nonnegative weight matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    weights: Matrix,
    degrees: Vec<f64>,
}

impl WeightedGraph {
    pub fn new(weights: Matrix) -> Result<Self> {
        let n = weights.n();
        for x in 0..n {
            if weights[(x, x)] != 0.0 {
                return Err(HeatError::InvalidGraph(format!("nonzero self weight at vertex {x}")));
            }
            for y in 0..n {
                let w = weights[(x, y)];
                if !w.is_finite() || w < 0.0 {
                    return Err(HeatError::InvalidGraph(format!("weight w[{x},{y}] = {w} is not a nonnegative number")));
                }
                if w != weights[(y, x)] {
                    return Err(HeatError::InvalidGraph(format!("w[{x},{y}] != w[{y},{x}]")));
                }
            }
        }
        let degrees = (0..n).map(|x| weights.row(x).iter().sum()).collect();
        Ok(Self { weights, degrees })
    }

    /// Builds from an undirected edge list; each edge must appear once.
    pub fn from_edges(n: usize, edges: &[(VertexId, VertexId, f64)]) -> Result<Self> {
        let mut w = Matrix::zeros(n);
        for &(u, v, wt) in edges {
            if u >= n || v >= n {
                return Err(HeatError::InvalidGraph(format!("edge ({u}, {v}) references a vertex outside 0..{n}")));
            }
            if u == v {
                return Err(HeatError::InvalidGraph(format!("self loop at vertex {u}")));
            }
            if w[(u, v)] != 0.0 {
                return Err(HeatError::InvalidGraph(format!("edge ({u}, {v}) listed twice")));
            }
            w[(u, v)] = wt;
            w[(v, u)] = wt;
        }
        Self::new(w)
    }

    pub fn empty(n: usize) -> Self {
        Self { weights: Matrix::zeros(n), degrees: vec![0.0; n] }
    }

    pub fn complete(n: usize) -> Self {
        Self::new(Matrix::from_fn(n, |i, j| if i == j { 0.0 } else { 1.0 })).expect("complete graph is valid")
    }

    pub fn path(n: usize) -> Self {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i, 1.0)).collect();
        Self::from_edges(n, &edges).expect("path graph is valid")
    }

    pub fn n(&self) -> usize {
        self.weights.n()
    }

    pub fn weight(&self, x: VertexId, y: VertexId) -> f64 {
        self.weights[(x, y)]
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    /// Weighted degree μ(x).
    pub fn degree(&self, x: VertexId) -> f64 {
        self.degrees[x]
    }

    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    pub fn max_weight(&self) -> f64 {
        self.weights.max_abs()
    }

    pub fn neighbors(&self, x: VertexId) -> impl Iterator<Item = (VertexId, f64)> + '_ {
        self.weights.row(x).iter().enumerate().filter(|(_, w)| **w > 0.0).map(|(y, w)| (y, *w))
    }

    pub fn edges(&self) -> Vec<(VertexId, VertexId, f64)> {
        let mut out = Vec::new();
        for x in 0..self.n() {
            for (y, w) in self.neighbors(x) {
                if x < y {
                    out.push((x, y, w));
                }
            }
        }
        out
    }

    /// Δ as a dense matrix: μ on the diagonal, −w off it.
    pub fn laplacian(&self) -> Matrix {
        Matrix::from_fn(self.n(), |x, y| if x == y { self.degrees[x] } else { -self.weights[(x, y)] })
    }

    /// Δf(x) = Σ_y (f(x) − f(y)) w_xy.
    pub fn laplacian_apply(&self, f: &[f64]) -> Result<Vec<f64>> {
        if f.len() != self.n() {
            return Err(HeatError::DimensionMismatch { expected: self.n(), got: f.len() });
        }
        Ok((0..self.n())
            .map(|x| {
                let mut s = self.degrees[x] * f[x];
                for (y, w) in self.neighbors(x) {
                    s -= w * f[y];
                }
                s
            })
            .collect())
    }

    pub fn is_connected(&self) -> bool {
        let n = self.n();
        if n == 0 {
            return true;
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(x) = stack.pop() {
            for (y, _) in self.neighbors(x) {
                if !seen[y] {
                    seen[y] = true;
                    stack.push(y);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DegreeProfile {
    pub mu: Vec<f64>,
    pub mu_ambient: Option<Vec<f64>>,
}

/// Boundary structure of an embedding; all ids are local (indices into `kept`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundarySets {
    /// Every kept vertex whose degree drops, μ(x) < μ̃(x).
    pub boundary: Vec<VertexId>,
    /// Boundary vertices that lose degree only to frontier vertices. These are
    /// artifacts of cutting an infinite graph down to a window.
    pub window: Vec<VertexId>,
    /// `boundary ∖ window`: the vertices with nonempty A(x).
    pub genuine: Vec<VertexId>,
    /// `VG ∖ boundary`.
    pub interior: Vec<VertexId>,
    /// Boundary of `VG ∖ genuine` re-embedded in G.
    pub inner_boundary: Vec<VertexId>,
}

/// A graph G sitting inside an ambient (windowed) graph G̃.
#[derive(Debug, Clone)]
pub struct SubgraphEmbedding {
    ambient: WeightedGraph,
    kept: Vec<VertexId>,
    removed: Vec<(VertexId, VertexId)>,
    frontier: Vec<VertexId>,
    local: Vec<Option<VertexId>>,
    is_frontier: Vec<bool>,
    graph: WeightedGraph,
}

impl SubgraphEmbedding {
    /// `kept`, `removed` and `frontier` use ambient vertex ids. Local vertex
    /// `i` of G is `kept[i]`; the order of `kept` is preserved.
    pub fn new(
        ambient: WeightedGraph,
        kept: Vec<VertexId>,
        removed: Vec<(VertexId, VertexId)>,
        frontier: Vec<VertexId>,
    ) -> Result<Self> {
        let na = ambient.n();
        let mut local = vec![None; na];
        for (i, &v) in kept.iter().enumerate() {
            if v >= na {
                return Err(HeatError::InvalidEmbedding(format!("kept vertex {v} outside ambient 0..{na}")));
            }
            if local[v].replace(i).is_some() {
                return Err(HeatError::InvalidEmbedding(format!("kept vertex {v} listed twice")));
            }
        }
        let mut is_frontier = vec![false; na];
        for &f in &frontier {
            if f >= na || local[f].is_some() {
                return Err(HeatError::InvalidEmbedding(format!("frontier vertex {f} must be an ambient vertex outside kept")));
            }
            is_frontier[f] = true;
        }
        let mut norm_removed: Vec<(VertexId, VertexId)> = Vec::with_capacity(removed.len());
        for &(u, v) in &removed {
            let (a, b) = (u.min(v), u.max(v));
            if b >= na || local[a].is_none() || local[b].is_none() {
                return Err(HeatError::InvalidEmbedding(format!("removed edge ({u}, {v}) is not inside kept")));
            }
            if ambient.weight(a, b) <= 0.0 {
                return Err(HeatError::InvalidEmbedding(format!("removed edge ({u}, {v}) has no ambient weight")));
            }
            if norm_removed.contains(&(a, b)) {
                return Err(HeatError::InvalidEmbedding(format!("removed edge ({u}, {v}) listed twice")));
            }
            norm_removed.push((a, b));
        }
        let nk = kept.len();
        let mut w = Matrix::from_fn(nk, |i, j| ambient.weight(kept[i], kept[j]));
        for &(a, b) in &norm_removed {
            let (i, j) = (local[a].unwrap(), local[b].unwrap());
            w[(i, j)] = 0.0;
            w[(j, i)] = 0.0;
        }
        let graph = WeightedGraph::new(w)?;
        Ok(Self { ambient, kept, removed: norm_removed, frontier, local, is_frontier, graph })
    }

    /// G = G̃: nothing removed, no frontier.
    pub fn trivial(g: WeightedGraph) -> Self {
        let kept = (0..g.n()).collect();
        Self::new(g, kept, vec![], vec![]).expect("trivial embedding is valid")
    }

    pub fn ambient(&self) -> &WeightedGraph {
        &self.ambient
    }

    /// The subgraph G in local indexing.
    pub fn graph(&self) -> &WeightedGraph {
        &self.graph
    }

    pub fn kept(&self) -> &[VertexId] {
        &self.kept
    }

    pub fn removed(&self) -> &[(VertexId, VertexId)] {
        &self.removed
    }

    pub fn frontier(&self) -> &[VertexId] {
        &self.frontier
    }

    /// Ambient id of local vertex `i`.
    pub fn global(&self, i: VertexId) -> VertexId {
        self.kept[i]
    }

    /// Local id of ambient vertex `v`, if kept.
    pub fn local(&self, v: VertexId) -> Option<VertexId> {
        self.local[v]
    }

    pub fn degree_profile(&self) -> DegreeProfile {
        DegreeProfile {
            mu: self.graph.degrees().to_vec(),
            mu_ambient: Some(self.kept.iter().map(|&v| self.ambient.degree(v)).collect()),
        }
    }

    /// A(v): ambient vertices adjacent to local vertex `v` in G̃ but not in G,
    /// excluding frontier vertices. Returned as ambient ids with the ambient weight.
    pub fn adjacency_complement(&self, v: VertexId) -> Result<Vec<(VertexId, f64)>> {
        if v >= self.kept.len() {
            return Err(contract(format!("vertex {v} is not in the subgraph")));
        }
        let gv = self.kept[v];
        Ok(self
            .ambient
            .neighbors(gv)
            .filter(|&(u, _)| match self.local[u] {
                Some(lu) => self.graph.weight(v, lu) == 0.0,
                None => !self.is_frontier[u],
            })
            .collect())
    }

    pub fn boundary_sets(&self) -> BoundarySets {
        let nk = self.kept.len();
        let mu_a: Vec<f64> = self.kept.iter().map(|&v| self.ambient.degree(v)).collect();
        let mut boundary = Vec::new();
        let mut window = Vec::new();
        let mut genuine = Vec::new();
        let mut interior = Vec::new();
        for x in 0..nk {
            if self.graph.degree(x) < mu_a[x] {
                boundary.push(x);
                let a = self.adjacency_complement(x).expect("x is kept");
                if a.is_empty() {
                    window.push(x);
                } else {
                    genuine.push(x);
                }
            } else {
                interior.push(x);
            }
        }
        let mut in_genuine = vec![false; nk];
        for &x in &genuine {
            in_genuine[x] = true;
        }
        let inner_boundary = (0..nk)
            .filter(|&x| !in_genuine[x] && self.graph.neighbors(x).any(|(u, _)| in_genuine[u]))
            .collect();
        BoundarySets { boundary, window, genuine, interior, inner_boundary }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn laplacian_examples() {
        let k2 = WeightedGraph::complete(2);
        assert_eq!(k2.laplacian_apply(&[1.0, 0.0]).unwrap(), vec![1.0, -1.0]);
        let p3 = WeightedGraph::path(3);
        assert_eq!(p3.laplacian_apply(&[1.0, 0.0, 0.0]).unwrap(), vec![1.0, -1.0, 0.0]);
        assert_eq!(p3.laplacian_apply(&[2.5; 3]).unwrap(), vec![0.0; 3]);
        assert!(matches!(p3.laplacian_apply(&[1.0]), Err(HeatError::DimensionMismatch { .. })));
    }

    #[test]
    fn graph_validation() {
        let mut w = Matrix::zeros(2);
        w[(0, 1)] = 1.0;
        assert!(WeightedGraph::new(w.clone()).is_err());
        w[(1, 0)] = 1.0;
        assert!(WeightedGraph::new(w.clone()).is_ok());
        w[(0, 0)] = 1.0;
        assert!(WeightedGraph::new(w).is_err());
        assert!(WeightedGraph::from_edges(2, &[(0, 1, -1.0)]).is_err());
        assert!(WeightedGraph::from_edges(2, &[(0, 1, 1.0), (1, 0, 1.0)]).is_err());
        assert!(WeightedGraph::from_edges(2, &[(0, 2, 1.0)]).is_err());
    }

    fn k_minus_edge(n: usize) -> SubgraphEmbedding {
        SubgraphEmbedding::new(WeightedGraph::complete(n), (0..n).collect(), vec![(0, 1)], vec![]).unwrap()
    }

    #[test]
    fn complete_minus_edge_boundary() {
        let e = k_minus_edge(5);
        let b = e.boundary_sets();
        assert_eq!(b.boundary, vec![0, 1]);
        assert_eq!(b.genuine, vec![0, 1]);
        assert!(b.window.is_empty());
        assert_eq!(b.interior, vec![2, 3, 4]);
        assert_eq!(e.adjacency_complement(0).unwrap(), vec![(1, 1.0)]);
        assert_eq!(e.adjacency_complement(1).unwrap(), vec![(0, 1.0)]);
        assert!(e.adjacency_complement(2).unwrap().is_empty());
        assert!(e.adjacency_complement(5).is_err());
    }

    #[test]
    fn half_line_window_boundary() {
        // ambient path over labels -1..=W+1; vertex i has label i-1
        let w = 10;
        let amb = WeightedGraph::path(w + 3);
        let kept: Vec<_> = (1..=w + 1).collect();
        let e = SubgraphEmbedding::new(amb, kept, vec![], vec![w + 2]).unwrap();
        let b = e.boundary_sets();
        assert_eq!(b.boundary, vec![0, w]);
        assert_eq!(b.genuine, vec![0]);
        assert_eq!(b.window, vec![w]);
        assert_eq!(b.inner_boundary, vec![1]);
        assert_eq!(e.adjacency_complement(0).unwrap(), vec![(0, 1.0)]);
        for v in 1..=w {
            assert!(e.adjacency_complement(v).unwrap().is_empty());
        }
    }

    #[test]
    fn trivial_embedding_has_no_boundary() {
        let e = SubgraphEmbedding::trivial(WeightedGraph::path(4));
        let b = e.boundary_sets();
        assert!(b.boundary.is_empty() && b.inner_boundary.is_empty());
        assert_eq!(b.interior, vec![0, 1, 2, 3]);
        for v in 0..4 {
            assert!(e.adjacency_complement(v).unwrap().is_empty());
        }
    }

    #[test]
    fn embedding_validation() {
        let g = WeightedGraph::path(3);
        assert!(SubgraphEmbedding::new(g.clone(), vec![0, 0], vec![], vec![]).is_err());
        assert!(SubgraphEmbedding::new(g.clone(), vec![0, 1, 2], vec![(0, 2)], vec![]).is_err());
        assert!(SubgraphEmbedding::new(g.clone(), vec![0, 1], vec![(1, 2)], vec![]).is_err());
        assert!(SubgraphEmbedding::new(g.clone(), vec![0, 1], vec![], vec![1]).is_err());
        assert!(SubgraphEmbedding::new(g, vec![0, 1], vec![(0, 1), (1, 0)], vec![]).is_err());
    }

    #[test]
    fn boundary_recomputes_identically() {
        let e = k_minus_edge(6);
        let rebuilt = SubgraphEmbedding::new(e.ambient().clone(), e.kept().to_vec(), e.removed().to_vec(), vec![]).unwrap();
        assert_eq!(e.boundary_sets(), rebuilt.boundary_sets());
        let p = e.degree_profile();
        for (m, ma) in p.mu.iter().zip(p.mu_ambient.unwrap()) {
            assert!(*m <= ma);
        }
    }

    fn graph_and_vectors() -> impl Strategy<Value = (WeightedGraph, Vec<f64>, Vec<f64>)> {
        (1usize..9).prop_flat_map(|n| {
            (
                prop::collection::vec(prop_oneof![Just(0.0), 0.0..2.0f64], n * n),
                prop::collection::vec(-1.0..1.0f64, n),
                prop::collection::vec(-1.0..1.0f64, n),
            )
                .prop_map(move |(raw, f, g)| {
                    let w = Matrix::from_fn(n, |i, j| if i == j { 0.0 } else { raw[i.min(j) * n + i.max(j)] });
                    (WeightedGraph::new(w).unwrap(), f, g)
                })
        })
    }

    proptest! {
        #[test]
        fn laplacian_rows_sum_to_zero((g, f, _) in graph_and_vectors()) {
            let lf = g.laplacian_apply(&f).unwrap();
            let total: f64 = lf.iter().sum();
            let fmax = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let mu: f64 = g.degrees().iter().sum();
            prop_assert!(total.abs() <= 1e-12 * fmax * mu + 1e-300);
        }

        #[test]
        fn laplacian_symmetric_psd((g, f, h) in graph_and_vectors()) {
            let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
            let lf = g.laplacian_apply(&f).unwrap();
            let lh = g.laplacian_apply(&h).unwrap();
            let (a, b) = (dot(&lf, &h), dot(&f, &lh));
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs())));
            prop_assert!(dot(&f, &lf) >= -1e-12 * dot(&f, &f));
        }

        #[test]
        fn boundary_is_degree_deficit((g, _, _) in graph_and_vectors(), drop_first in any::<bool>()) {
            let n = g.n();
            let kept: Vec<_> = if drop_first && n > 1 { (1..n).collect() } else { (0..n).collect() };
            let e = SubgraphEmbedding::new(g.clone(), kept.clone(), vec![], vec![]).unwrap();
            let b = e.boundary_sets();
            for (i, &v) in kept.iter().enumerate() {
                let deficit = e.graph().degree(i) < g.degree(v);
                prop_assert_eq!(deficit, b.boundary.contains(&i));
                prop_assert_eq!(!deficit, b.interior.contains(&i));
            }
            prop_assert_eq!(&b.boundary, &b.genuine);
        }
    }
}
