//! Parametrices, the Neumann series that corrects them, and the complete-graph
//! closed forms.
//!
//! Heat images L H = (Δ + ∂_t) H are always built algebraically from kernel
//! values or exact derivatives; nothing here differentiates sampled data.

use crate::error::{contract, HeatError, Result};
use crate::graph::{SubgraphEmbedding, VertexId, WeightedGraph};
use crate::linalg::{symmetric_eigen, Matrix, SymmetricEigen};
use crate::series::{sample_closed_form_on, ClosedFormKernel, ConvolutionPlan, KernelFamily, KernelSeries, TimeGrid};
use crate::util::{ln_factorial, log_add};

/// Hard cap on Neumann terms.
pub const MAX_TERMS: usize = 10_000;

/// Margin applied to the sampled sup of |LH| before it enters the factorial bound.
pub const CONSTANT_INFLATION: f64 = 1.1;

#[derive(Debug, Clone)]
pub struct Parametrix {
    pub kernel: KernelSeries,
    pub heat_image: KernelSeries,
    /// k with |LH| ≤ C t^k near 0.
    pub order: u32,
    /// Rows outside this set have LH ≡ 0.
    pub support: Option<Vec<VertexId>>,
}

impl Parametrix {
    pub fn new(kernel: KernelSeries, heat_image: KernelSeries, order: u32, support: Option<Vec<VertexId>>) -> Result<Self> {
        if kernel.grid() != heat_image.grid() {
            return Err(HeatError::GridMismatch);
        }
        if kernel.n() != heat_image.n() {
            return Err(HeatError::DimensionMismatch { expected: kernel.n(), got: heat_image.n() });
        }
        kernel.ensure_finite()?;
        heat_image.ensure_finite()?;
        if let Some(s) = &support {
            let mut inside = vec![false; kernel.n()];
            for &v in s {
                if v >= kernel.n() {
                    return Err(contract(format!("support vertex {v} out of range")));
                }
                inside[v] = true;
            }
            if let Some(x) = (0..kernel.n()).find(|&x| !inside[x] && heat_image.row_sup(x) != 0.0) {
                return Err(contract(format!("heat image is nonzero on row {x} outside the declared support")));
            }
        }
        Ok(Self { kernel, heat_image, order, support })
    }

    pub fn n(&self) -> usize {
        self.kernel.n()
    }

    pub fn grid(&self) -> &TimeGrid {
        self.kernel.grid()
    }

    /// max |H(x, y; 0) − δ_xy| over `rows`.
    pub fn dirac_deviation_on(&self, rows: &[VertexId]) -> f64 {
        let mut d = 0.0f64;
        for &x in rows {
            for y in 0..self.n() {
                let target = if x == y { 1.0 } else { 0.0 };
                d = d.max((self.kernel.get(x, y, 0) - target).abs());
            }
        }
        d
    }

    pub fn dirac_deviation(&self) -> f64 {
        self.dirac_deviation_on(&(0..self.n()).collect::<Vec<_>>())
    }

    /// Sampled sup of |LH(x, y; t)| / t^k (t > 0 nodes only when k > 0).
    pub fn order_constant(&self) -> f64 {
        let k = self.order as i32;
        let mut c = 0.0f64;
        let nodes = self.grid().nodes();
        for x in 0..self.n() {
            for y in 0..self.n() {
                for (j, &v) in self.heat_image.series(x, y).iter().enumerate() {
                    if k == 0 {
                        c = c.max(v.abs());
                    } else if j > 0 {
                        c = c.max(v.abs() / nodes[j].powi(k));
                    }
                }
            }
        }
        c
    }

    fn effective_vertices(&self) -> usize {
        self.support.as_ref().map_or(self.n(), |s| s.len()).max(1)
    }
}

/// How many Neumann terms to sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Truncation {
    /// Stop at the first ℓ whose factorial bound at t_max is below `tol`.
    FactorialBound { tol: f64 },
    /// Stop once two consecutive terms have sup-norm below `tol` (or a term
    /// vanishes identically). No tail certificate.
    Observed { tol: f64 },
}

#[derive(Debug, Clone)]
pub struct NeumannSeriesResult {
    pub f: KernelSeries,
    pub terms_used: usize,
    /// Σ_{m > terms_used} of the factorial bound, when that truncation was used.
    pub certified_tail: Option<f64>,
    /// The constant C used in the bound (inflated sampled sup of |LH|/t^k).
    pub constant: f64,
    /// sup |(LH)^{∗ℓ}| for ℓ = 1..=terms_used.
    pub term_norms: Vec<f64>,
}

/// ln of (C k!)^ℓ n^{ℓ−1} T^{ℓk+ℓ−1} / (ℓk+ℓ−1)!.
fn log_term_bound(c: f64, k: u32, n: usize, t: f64, l: usize) -> f64 {
    let l = l as f64;
    let p = l * k as f64 + l - 1.0;
    l * (c.ln() + ln_factorial(k as u64)) + (l - 1.0) * (n as f64).ln() + p * t.ln() - ln_factorial(p as u64)
}

/// The factorial bound on sup |(LH)^{∗ℓ}| over [0, T].
pub fn neumann_term_bound(c: f64, k: u32, n: usize, t: f64, l: usize) -> f64 {
    if c == 0.0 {
        return 0.0;
    }
    log_term_bound(c, k, n, t, l).exp()
}

/// First ℓ with bound(ℓ) < tol and the summed bound of all later terms.
fn factorial_truncation(c: f64, k: u32, n: usize, t: f64, tol: f64) -> Result<(usize, f64)> {
    let ltol = tol.ln();
    let mut last = f64::INFINITY;
    for l in 1..=MAX_TERMS {
        last = log_term_bound(c, k, n, t, l);
        if last < ltol {
            let mut tail = f64::NEG_INFINITY;
            for m in l + 1..l + 1 + MAX_TERMS {
                let b = log_term_bound(c, k, n, t, m);
                tail = log_add(tail, b);
                if b < tail - 80.0 {
                    break;
                }
            }
            return Ok((l, tail.exp()));
        }
    }
    Err(HeatError::NonConvergence { terms: MAX_TERMS, last_bound: last.exp() })
}

/// F = Σ_{ℓ≥1} (−1)^ℓ (LH)^{∗ℓ}, truncated by the factorial bound.
pub fn neumann_series(p: &Parametrix, tol: f64) -> Result<NeumannSeriesResult> {
    neumann_series_with(p, Truncation::FactorialBound { tol })
}

pub fn neumann_series_with(p: &Parametrix, truncation: Truncation) -> Result<NeumannSeriesResult> {
    let tol = match truncation {
        Truncation::FactorialBound { tol } | Truncation::Observed { tol } => tol,
    };
    if !(tol > 0.0) {
        return Err(contract(format!("tolerance must be positive, got {tol}")));
    }
    let c = CONSTANT_INFLATION * p.order_constant();
    let grid = p.grid();
    let k_img = &p.heat_image;
    if c == 0.0 {
        return Ok(NeumannSeriesResult {
            f: KernelSeries::zeros(grid, p.n()),
            terms_used: 1,
            certified_tail: Some(0.0),
            constant: 0.0,
            term_norms: vec![0.0],
        });
    }
    let planned = match truncation {
        Truncation::FactorialBound { tol } => {
            Some(factorial_truncation(c, p.order, p.effective_vertices(), grid.t_max(), tol)?)
        }
        Truncation::Observed { .. } => None,
    };

    let plan = ConvolutionPlan::new(grid);
    let support = p.support.as_deref();
    let prepared = plan.prepare(k_img, support)?;
    let mut f = k_img.scaled(-1.0);
    let mut power = k_img.clone();
    let mut norms = vec![power.sup_norm()];
    let mut small_run = usize::from(norms[0] < tol);
    let mut l = 1;
    loop {
        match planned {
            Some((stop, _)) if l >= stop => break,
            None if small_run >= 2 || norms[l - 1] == 0.0 => break,
            None if l >= MAX_TERMS => {
                return Err(HeatError::NonConvergence { terms: l, last_bound: norms[l - 1] });
            }
            _ => {}
        }
        power = plan.convolve_prepared(&power, &prepared, support)?;
        l += 1;
        let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
        f.axpy(sign, &power)?;
        let nrm = power.sup_norm();
        norms.push(nrm);
        small_run = if nrm < tol { small_run + 1 } else { 0 };
    }
    f.ensure_finite()?;
    Ok(NeumannSeriesResult { f, terms_used: l, certified_tail: planned.map(|(_, t)| t), constant: c, term_norms: norms })
}

/// H_G = H + H ∗ F.
pub fn assemble_heat_kernel(p: &Parametrix, f: &NeumannSeriesResult) -> Result<KernelSeries> {
    if f.f.grid() != p.grid() {
        return Err(HeatError::GridMismatch);
    }
    let plan = ConvolutionPlan::new(p.grid());
    let prepared = plan.prepare(&f.f, p.support.as_deref())?;
    let correction = plan.convolve_prepared(&p.kernel, &prepared, None)?;
    let out = p.kernel.add(&correction)?;
    out.ensure_finite()?;
    Ok(out)
}

/// Neumann series plus assembly.
pub fn heat_kernel(p: &Parametrix, truncation: Truncation) -> Result<(KernelSeries, NeumannSeriesResult)> {
    let f = neumann_series_with(p, truncation)?;
    Ok((assemble_heat_kernel(p, &f)?, f))
}

/// δ_xy e^{−μ(x) t}.
#[derive(Debug, Clone)]
pub struct DiagonalExponentialKernel {
    mu: Vec<f64>,
}

impl DiagonalExponentialKernel {
    pub fn new(g: &WeightedGraph) -> Self {
        Self { mu: g.degrees().to_vec() }
    }
}

impl ClosedFormKernel for DiagonalExponentialKernel {
    fn family(&self) -> KernelFamily {
        KernelFamily::DiagonalExponential
    }

    fn value(&self, x: VertexId, y: VertexId, t: f64) -> Result<f64> {
        let mu = *self.mu.get(x).ok_or_else(|| contract(format!("vertex {x} out of range")))?;
        Ok(if x == y { (-mu * t).exp() } else { 0.0 })
    }

    fn time_derivative(&self, x: VertexId, y: VertexId, t: f64) -> Result<f64> {
        let mu = *self.mu.get(x).ok_or_else(|| contract(format!("vertex {x} out of range")))?;
        Ok(if x == y { -mu * (-mu * t).exp() } else { 0.0 })
    }
}

/// H(x, y; t) = δ_xy e^{−μ(x)t}, a parametrix of order 0 on any finite graph
/// with LH(x, y; t) = −w_xy e^{−μ(y)t}.
pub fn diagonal_parametrix(g: &WeightedGraph, grid: &TimeGrid) -> Result<Parametrix> {
    let n = g.n();
    let kern = DiagonalExponentialKernel::new(g);
    let ids: Vec<_> = (0..n).collect();
    let kernel = sample_closed_form_on(&kern, grid, &ids)?;
    let mu = g.degrees();
    let heat_image = KernelSeries::from_fn(grid, n, |x, y, j| {
        let w = g.weight(x, y);
        if w == 0.0 {
            0.0
        } else {
            -w * (-mu[y] * grid.node(j)).exp()
        }
    })?;
    let support = (0..n).filter(|&x| mu[x] > 0.0).collect();
    Parametrix::new(kernel, heat_image, 0, Some(support))
}

/// Ambient kernel values H̃(rows, kept) at every node, row-major per node.
fn ambient_rows(e: &SubgraphEmbedding, k: &dyn ClosedFormKernel, grid: &TimeGrid, rows: &[VertexId]) -> Result<Vec<Vec<f64>>> {
    grid.nodes().iter().map(|&t| k.block(rows, e.kept(), t)).collect()
}

/// The ambient heat kernel restricted to G. LH is supported on the genuine
/// boundary: LH(v₁, v₂) = −Σ_{u∈A(v₁)} (H̃(v₁, v₂) − H̃(u, v₂)) w̃_{v₁u}.
pub fn restriction_parametrix(e: &SubgraphEmbedding, ambient_kernel: &dyn ClosedFormKernel, grid: &TimeGrid) -> Result<Parametrix> {
    let n = e.kept().len();
    if n == 0 {
        return Err(contract("the subgraph has no vertices"));
    }
    let kernel = sample_closed_form_on(ambient_kernel, grid, e.kept())?;
    let bs = e.boundary_sets();
    let mut heat_image = KernelSeries::zeros(grid, n);
    for &x in &bs.genuine {
        let a = e.adjacency_complement(x)?;
        let us: Vec<VertexId> = a.iter().map(|&(u, _)| u).collect();
        let vals = ambient_rows(e, ambient_kernel, grid, &us)?;
        for y in 0..n {
            let dst = heat_image.series_mut(x, y);
            for (j, d) in dst.iter_mut().enumerate() {
                let hxy = kernel.get(x, y, j);
                *d = -a.iter().enumerate().map(|(i, &(_, w))| (hxy - vals[j][i * n + y]) * w).sum::<f64>();
            }
        }
    }
    Parametrix::new(kernel, heat_image, 0, Some(bs.genuine))
}

/// The ambient kernel with its rows on ∂G set to zero. LH is supported on
/// ∂G ∪ ∂(G∖∂G):
/// - v₁ ∈ ∂G: LH = −Σ_{u∼v₁, u∉∂G} w H̃(u, v₂) (neighbours beyond the window included);
/// - v₁ ∉ ∂G: LH = Σ_{u∈∂G, u∼v₁} w H̃(u, v₂).
pub fn dirichlet_parametrix(e: &SubgraphEmbedding, ambient_kernel: &dyn ClosedFormKernel, grid: &TimeGrid) -> Result<Parametrix> {
    let n = e.kept().len();
    if n == 0 {
        return Err(contract("the subgraph has no vertices"));
    }
    let bs = e.boundary_sets();
    let mut in_b = vec![false; n];
    for &x in &bs.genuine {
        in_b[x] = true;
    }
    let mut kernel = sample_closed_form_on(ambient_kernel, grid, e.kept())?;
    for &x in &bs.genuine {
        for y in 0..n {
            kernel.series_mut(x, y).iter_mut().for_each(|v| *v = 0.0);
        }
    }
    let g = e.graph();
    let amb = e.ambient();
    let mut heat_image = KernelSeries::zeros(grid, n);
    let mut support = bs.genuine.clone();
    support.extend(&bs.inner_boundary);
    support.sort_unstable();

    for &x in &support {
        // (ambient vertex, coefficient) pairs whose H̃ rows enter LH(x, ·)
        let mut terms: Vec<(VertexId, f64)> = Vec::new();
        if in_b[x] {
            for (u, w) in g.neighbors(x) {
                if !in_b[u] {
                    terms.push((e.global(u), -w));
                }
            }
            for &f in e.frontier() {
                let w = amb.weight(e.global(x), f);
                if w > 0.0 {
                    terms.push((f, -w));
                }
            }
        } else {
            for (u, w) in g.neighbors(x) {
                if in_b[u] {
                    terms.push((e.global(u), w));
                }
            }
        }
        let us: Vec<VertexId> = terms.iter().map(|&(u, _)| u).collect();
        let vals = ambient_rows(e, ambient_kernel, grid, &us)?;
        for y in 0..n {
            let dst = heat_image.series_mut(x, y);
            for (j, d) in dst.iter_mut().enumerate() {
                *d = terms.iter().enumerate().map(|(i, &(_, c))| c * vals[j][i * n + y]).sum();
            }
        }
    }
    Parametrix::new(kernel, heat_image, 0, Some(support))
}

/// Heat kernel of the unit-weight complete graph K_N.
#[derive(Debug, Clone, Copy)]
pub struct CompleteGraphKernel {
    n: usize,
}

pub fn complete_graph_kernel(n: usize) -> Result<CompleteGraphKernel> {
    if n < 2 {
        return Err(contract(format!("complete graph needs N ≥ 2, got {n}")));
    }
    Ok(CompleteGraphKernel { n })
}

impl CompleteGraphKernel {
    pub fn n(&self) -> usize {
        self.n
    }

    fn check(&self, x: VertexId, y: VertexId) -> Result<()> {
        if x >= self.n || y >= self.n {
            return Err(contract(format!("vertex pair ({x}, {y}) outside K_{}", self.n)));
        }
        Ok(())
    }
}

impl ClosedFormKernel for CompleteGraphKernel {
    fn family(&self) -> KernelFamily {
        KernelFamily::CompleteGraph
    }

    fn value(&self, x: VertexId, y: VertexId, t: f64) -> Result<f64> {
        self.check(x, y)?;
        let nf = self.n as f64;
        let e = (-nf * t).exp();
        Ok(if x == y { 1.0 / nf + (1.0 - 1.0 / nf) * e } else { (1.0 - e) / nf })
    }

    fn time_derivative(&self, x: VertexId, y: VertexId, t: f64) -> Result<f64> {
        self.check(x, y)?;
        let nf = self.n as f64;
        let e = (-nf * t).exp();
        Ok(if x == y { -(nf - 1.0) * e } else { e })
    }
}

fn check_complete_ambient(e: &SubgraphEmbedding) -> Result<usize> {
    let a = e.ambient();
    let n = a.n();
    let unit = (0..n).all(|x| (0..n).all(|y| a.weight(x, y) == if x == y { 0.0 } else { 1.0 }));
    if !unit || n < 2 {
        return Err(contract("ambient graph is not a unit-weight complete graph"));
    }
    if e.kept().len() != n || !e.frontier().is_empty() {
        return Err(contract("edge-deletion closed form needs every vertex of K_N kept"));
    }
    Ok(n)
}

/// B with b_xx = complement degree, b_xy = −1 when the edge xy was deleted
/// (the Laplacian of the deleted-edge graph), in local vertex order.
pub fn b_matrix(e: &SubgraphEmbedding) -> Result<Matrix> {
    let n = check_complete_ambient(e)?;
    let mut b = Matrix::zeros(n);
    for &(u, v) in e.removed() {
        let (i, j) = (e.local(u).unwrap(), e.local(v).unwrap());
        b[(i, j)] = -1.0;
        b[(j, i)] = -1.0;
        b[(i, i)] += 1.0;
        b[(j, j)] += 1.0;
    }
    Ok(b)
}

/// H_G = H_{K_N} + e^{−Nt}(exp(tB) − I), exact because Δ_G = Δ_{K_N} − B and
/// B commutes with the all-ones matrix.
#[derive(Debug, Clone)]
pub struct CompleteSubgraphKernel {
    base: CompleteGraphKernel,
    b: SymmetricEigen,
}

impl CompleteSubgraphKernel {
    pub fn new(e: &SubgraphEmbedding) -> Result<Self> {
        let b = b_matrix(e)?;
        Ok(Self { base: complete_graph_kernel(b.n())?, b: symmetric_eigen(&b)? })
    }

    pub fn matrix(&self, t: f64) -> Matrix {
        let n = self.base.n;
        let decay = (-(n as f64) * t).exp();
        let expb = self.b.apply_fn(|l| (l * t).exp());
        Matrix::from_fn(n, |x, y| {
            let id = if x == y { 1.0 } else { 0.0 };
            self.base.value(x, y, t).unwrap() + decay * (expb[(x, y)] - id)
        })
    }
}

impl ClosedFormKernel for CompleteSubgraphKernel {
    fn family(&self) -> KernelFamily {
        KernelFamily::CompleteGraph
    }

    fn value(&self, x: VertexId, y: VertexId, t: f64) -> Result<f64> {
        self.base.check(x, y)?;
        Ok(self.matrix(t)[(x, y)])
    }

    /// d/dt [e^{−Nt}(exp(tB) − I)] = e^{−Nt}((B − N)exp(tB) + N·I).
    fn time_derivative(&self, x: VertexId, y: VertexId, t: f64) -> Result<f64> {
        self.base.check(x, y)?;
        let nf = self.base.n as f64;
        let decay = (-nf * t).exp();
        let m = self.b.apply_fn(|l| (l - nf) * (l * t).exp());
        let id = if x == y { nf } else { 0.0 };
        Ok(self.base.time_derivative(x, y, t)? + decay * (m[(x, y)] + id))
    }

    fn block(&self, rows: &[VertexId], cols: &[VertexId], t: f64) -> Result<Vec<f64>> {
        let m = self.matrix(t);
        let mut out = Vec::with_capacity(rows.len() * cols.len());
        for &x in rows {
            for &y in cols {
                self.base.check(x, y)?;
                out.push(m[(x, y)]);
            }
        }
        Ok(out)
    }
}

pub fn subgraph_kernel_closed_form(e: &SubgraphEmbedding, t: f64) -> Result<Matrix> {
    Ok(CompleteSubgraphKernel::new(e)?.matrix(t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bessel::{kernel_halfline, kernel_halfline_dirichlet, kernel_z, Lattice, LatticeKernel};
    use crate::oracle::spectral_heat_kernel;

    fn k_minus_edge(n: usize) -> SubgraphEmbedding {
        SubgraphEmbedding::new(WeightedGraph::complete(n), (0..n).collect(), vec![(0, 1)], vec![]).unwrap()
    }

    /// Z window with labels −1..=w+1; G = {0..=w}, frontier = {w+1}.
    fn half_line(w: usize) -> (SubgraphEmbedding, LatticeKernel) {
        let amb = WeightedGraph::path(w + 3);
        let e = SubgraphEmbedding::new(amb, (1..=w + 1).collect(), vec![], vec![w + 2]).unwrap();
        (e, LatticeKernel::consecutive(-1, w + 3, Lattice::Integers).unwrap())
    }

    #[test]
    fn complete_kernel_examples() {
        let k = complete_graph_kernel(4).unwrap();
        assert!(complete_graph_kernel(1).is_err());
        for t in [0.0, 0.2, 3.0] {
            let row: f64 = (0..4).map(|y| k.value(0, y, t).unwrap()).sum();
            assert!((row - 1.0).abs() < 1e-15);
        }
        assert_eq!(k.value(1, 1, 0.0).unwrap(), 1.0);
        assert_eq!(k.value(1, 2, 0.0).unwrap(), 0.0);
        let k2 = complete_graph_kernel(2).unwrap();
        let s = spectral_heat_kernel(&WeightedGraph::complete(2), 0.8).unwrap();
        assert!((k2.value(0, 1, 0.8).unwrap() - s[(0, 1)]).abs() < 1e-15);
        assert!((k2.value(0, 0, 40.0).unwrap() - 0.5).abs() < 1e-15);
        let h = 1e-5;
        let fd = (k.value(0, 0, 0.5 + h).unwrap() - k.value(0, 0, 0.5 - h).unwrap()) / (2.0 * h);
        assert!((fd - k.time_derivative(0, 0, 0.5).unwrap()).abs() < 1e-8);
    }

    #[test]
    fn b_matrix_edge_deletion() {
        let e = k_minus_edge(5);
        let b = b_matrix(&e).unwrap();
        assert_eq!((b[(0, 0)], b[(1, 1)], b[(0, 1)], b[(1, 0)]), (1.0, 1.0, -1.0, -1.0));
        assert_eq!(b.max_abs(), 1.0);
        assert_eq!(b.as_slice().iter().filter(|v| **v != 0.0).count(), 4);
        let mut p = b.clone();
        for l in 1..6 {
            assert_eq!(p[(0, 0)], 2f64.powi(l - 1));
            p = p.matmul(&b);
        }
        let trivial = SubgraphEmbedding::trivial(WeightedGraph::complete(4));
        assert_eq!(b_matrix(&trivial).unwrap(), Matrix::zeros(4));
        let not_complete = SubgraphEmbedding::trivial(WeightedGraph::path(3));
        assert!(b_matrix(&not_complete).is_err());
    }

    #[test]
    fn closed_form_edge_deletion() {
        let e = k_minus_edge(5);
        let k = complete_graph_kernel(5).unwrap();
        for t in [0.1, 0.5, 1.0] {
            let h = subgraph_kernel_closed_form(&e, t).unwrap();
            let bump = (-5.0 * t).exp() * ((2.0 * t).exp() - 1.0) / 2.0;
            for x in 0..5 {
                for y in 0..5 {
                    let mut expect = k.value(x, y, t).unwrap();
                    if x < 2 && y < 2 {
                        expect += if x == y { bump } else { -bump };
                    }
                    assert!((h[(x, y)] - expect).abs() < 1e-14);
                }
            }
            let s = spectral_heat_kernel(e.graph(), t).unwrap();
            assert!(h.sub(&s).max_abs() < 1e-12);
        }
        let ck = CompleteSubgraphKernel::new(&e).unwrap();
        let hh = 1e-5;
        let fd = (ck.value(0, 1, 0.4 + hh).unwrap() - ck.value(0, 1, 0.4 - hh).unwrap()) / (2.0 * hh);
        assert!((fd - ck.time_derivative(0, 1, 0.4).unwrap()).abs() < 1e-8);
    }

    #[test]
    fn diagonal_parametrix_examples() {
        let grid = TimeGrid::uniform(1.0, 10).unwrap();
        let single = diagonal_parametrix(&WeightedGraph::empty(1), &grid).unwrap();
        assert_eq!(single.heat_image.sup_norm(), 0.0);
        assert!(single.kernel.series(0, 0).iter().all(|&v| v == 1.0));
        let k2 = diagonal_parametrix(&WeightedGraph::complete(2), &grid).unwrap();
        for (j, &t) in grid.nodes().iter().enumerate() {
            assert_eq!(k2.heat_image.get(0, 1, j), -(-t).exp());
            assert_eq!(k2.heat_image.get(0, 0, j), 0.0);
        }
        assert_eq!(k2.dirac_deviation(), 0.0);
        let r = neumann_series(&single, 1e-12).unwrap();
        assert_eq!(r.terms_used, 1);
        assert_eq!(r.f.sup_norm(), 0.0);
    }

    #[test]
    fn trivial_restriction_is_exact() {
        let grid = TimeGrid::uniform(1.0, 20).unwrap();
        let e = SubgraphEmbedding::trivial(WeightedGraph::complete(4));
        let p = restriction_parametrix(&e, &complete_graph_kernel(4).unwrap(), &grid).unwrap();
        assert_eq!(p.heat_image.sup_norm(), 0.0);
        let r = neumann_series(&p, 1e-10).unwrap();
        assert_eq!(r.terms_used, 1);
        assert_eq!(assemble_heat_kernel(&p, &r).unwrap(), p.kernel);
    }

    #[test]
    fn restriction_heat_images() {
        let grid = TimeGrid::uniform(1.0, 20).unwrap();
        let e = k_minus_edge(5);
        let p = restriction_parametrix(&e, &complete_graph_kernel(5).unwrap(), &grid).unwrap();
        assert_eq!(p.support.as_deref(), Some(&[0, 1][..]));
        for (j, &t) in grid.nodes().iter().enumerate() {
            let e5 = (-5.0 * t).exp();
            for x in 0..5 {
                for y in 0..5 {
                    let expect = match (x, y) {
                        (0, 0) | (1, 1) => -e5,
                        (0, 1) | (1, 0) => e5,
                        _ => 0.0,
                    };
                    assert!((p.heat_image.get(x, y, j) - expect).abs() < 1e-15);
                }
            }
        }

        let (e, z) = half_line(12);
        let p = restriction_parametrix(&e, &z, &grid).unwrap();
        for (j, &t) in grid.nodes().iter().enumerate() {
            for w in 0..=12 {
                let expect = kernel_z(w as i64 + 1, 0, t).unwrap() - kernel_z(w as i64, 0, t).unwrap();
                assert!((p.heat_image.get(0, w, j) - expect).abs() < 1e-15);
                for v in 1..=12 {
                    assert_eq!(p.heat_image.get(v, w, j), 0.0);
                }
            }
        }
    }

    #[test]
    fn dirichlet_heat_images() {
        let grid = TimeGrid::uniform(1.0, 20).unwrap();
        let (e, z) = half_line(12);
        let p = dirichlet_parametrix(&e, &z, &grid).unwrap();
        assert_eq!(p.support.as_deref(), Some(&[0, 1][..]));
        for (j, &t) in grid.nodes().iter().enumerate() {
            for y in 0..=12i64 {
                let yl = y as usize;
                assert_eq!(p.kernel.get(0, yl, j), 0.0);
                assert!((p.heat_image.get(1, yl, j) - kernel_z(y, 0, t).unwrap()).abs() < 1e-15);
                assert!((p.heat_image.get(0, yl, j) + kernel_z(y, 1, t).unwrap()).abs() < 1e-15);
                for x in 2..=12 {
                    assert_eq!(p.heat_image.get(x, yl, j), 0.0);
                }
            }
        }
        let interior: Vec<_> = (1..=12).collect();
        assert_eq!(p.dirac_deviation_on(&interior), 0.0);
    }

    #[test]
    fn halfline_pipelines_small() {
        let grid = TimeGrid::uniform(1.0, 200).unwrap();
        let (e, z) = half_line(20);
        let p = restriction_parametrix(&e, &z, &grid).unwrap();
        let (h, _) = heat_kernel(&p, Truncation::FactorialBound { tol: 1e-12 }).unwrap();
        let d = dirichlet_parametrix(&e, &z, &grid).unwrap();
        let (hd, fd) = heat_kernel(&d, Truncation::FactorialBound { tol: 1e-12 }).unwrap();
        let mut err = 0.0f64;
        let mut errd = 0.0f64;
        for (j, &t) in grid.nodes().iter().enumerate() {
            assert!(fd.f.get(0, 0, j).abs() < 1e-5, "F(0,0) = {}", fd.f.get(0, 0, j));
            for v in 0..5 {
                for w in 0..5 {
                    err = err.max((h.get(v, w, j) - kernel_halfline(v as i64, w as i64, t).unwrap()).abs());
                    errd = errd.max((hd.get(v, w, j) - kernel_halfline_dirichlet(v as i64, w as i64, t).unwrap()).abs());
                }
                assert_eq!(hd.get(0, v, j), 0.0);
            }
        }
        assert!(err < 1e-4, "{err}");
        assert!(errd < 1e-4, "{errd}");
    }

    #[test]
    fn factorial_truncation_behaviour() {
        let (l, tail) = factorial_truncation(1.0, 0, 1, 1.0, 1e-10).unwrap();
        // bound(ℓ) = 1/(ℓ−1)!
        assert!(ln_factorial(l as u64 - 1) > 10.0 * 10f64.ln());
        assert!(ln_factorial(l as u64 - 2) <= 10.0 * 10f64.ln());
        assert!(tail < 1e-10);
        assert!(matches!(factorial_truncation(1e6, 0, 1000, 1000.0, 1e-300), Err(HeatError::NonConvergence { .. })));
        assert_eq!(neumann_term_bound(0.0, 0, 3, 1.0, 4), 0.0);
    }

    #[test]
    fn series_is_a_fixed_point() {
        // F + K + F∗K = (−1)^L K^{∗(L+1)}, bounded by the certified tail
        let grid = TimeGrid::uniform(1.0, 100).unwrap();
        let p = diagonal_parametrix(&WeightedGraph::path(4), &grid).unwrap();
        let r = neumann_series(&p, 1e-12).unwrap();
        let fk = crate::series::convolve(&r.f, &p.heat_image).unwrap();
        let resid = r.f.add(&p.heat_image).unwrap().add(&fk).unwrap();
        assert!(resid.sup_norm() <= r.certified_tail.unwrap() + 1e-13);
    }

    #[test]
    fn support_is_enforced() {
        let grid = TimeGrid::uniform(1.0, 4).unwrap();
        let k = KernelSeries::zeros(&grid, 2);
        let img = KernelSeries::from_fn(&grid, 2, |x, _, _| x as f64).unwrap();
        assert!(Parametrix::new(k.clone(), img.clone(), 0, Some(vec![0])).is_err());
        assert!(Parametrix::new(k, img, 0, Some(vec![1])).is_ok());
    }
}
