//! Independent ground truth: spectral heat kernels, a Taylor matrix
//! exponential, and kernel comparison reports.

use crate::error::{contract, Result};
use crate::graph::{VertexId, WeightedGraph};
use crate::linalg::{symmetric_eigen, Matrix, SymmetricEigen};
use crate::series::{ClosedFormKernel, KernelFamily, KernelSeries};

/// Eigenpairs of Δ_G, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    eigen: SymmetricEigen,
}

impl SpectralDecomposition {
    pub fn new(g: &WeightedGraph) -> Result<Self> {
        Ok(Self { eigen: symmetric_eigen(&g.laplacian())? })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigen.values
    }

    /// Column j is ψ_j.
    pub fn eigenvectors(&self) -> &Matrix {
        &self.eigen.vectors
    }

    /// Σ_j e^{−λ_j t} ψ_j ψ_jᵀ.
    pub fn heat_kernel(&self, t: f64) -> Matrix {
        self.eigen.apply_fn(|l| (-l * t).exp())
    }

    /// ‖Δ − Σ λ_j ψ_j ψ_jᵀ‖∞ / ‖Δ‖∞ (0 for the empty Laplacian).
    pub fn reconstruction_error(&self, g: &WeightedGraph) -> f64 {
        let l = g.laplacian();
        let scale = l.max_abs();
        if scale == 0.0 {
            return self.eigen.reconstruct().max_abs();
        }
        self.eigen.reconstruct().sub(&l).max_abs() / scale
    }

    /// ‖ΨᵀΨ − I‖∞.
    pub fn orthogonality_error(&self) -> f64 {
        let v = &self.eigen.vectors;
        v.transpose().matmul(v).sub(&Matrix::identity(v.n())).max_abs()
    }
}

pub fn spectral_heat_kernel(g: &WeightedGraph, t: f64) -> Result<Matrix> {
    if t.is_nan() || t < 0.0 {
        return Err(contract(format!("time must be nonnegative, got {t}")));
    }
    Ok(SpectralDecomposition::new(g)?.heat_kernel(t))
}

const TAYLOR_TERMS: usize = 25;

/// exp(A): scale by 2^{−s} until ‖A/2^s‖∞ ≤ ½, sum 25 Taylor terms, square s times.
/// With ‖X‖∞ ≤ ½ the dropped Taylor remainder is below 2^{−26}e^{½}/26! ≈ 6e−35.
pub fn expm(a: &Matrix) -> Matrix {
    let norm = a.norm_inf();
    let mut s = 0;
    while norm / 2f64.powi(s) > 0.5 {
        s += 1;
    }
    let x = a.scaled(1.0 / 2f64.powi(s));
    let n = a.n();
    let mut sum = Matrix::identity(n);
    let mut term = Matrix::identity(n);
    for k in 1..=TAYLOR_TERMS {
        term = term.matmul(&x).scaled(1.0 / k as f64);
        sum = sum.add(&term);
    }
    for _ in 0..s {
        sum = sum.matmul(&sum);
    }
    sum
}

/// exp(−tΔ).
pub fn expm_heat_kernel(g: &WeightedGraph, t: f64) -> Result<Matrix> {
    if t.is_nan() || t < 0.0 {
        return Err(contract(format!("time must be nonnegative, got {t}")));
    }
    Ok(expm(&g.laplacian().scaled(-t)))
}

/// The spectral heat kernel of a finite graph as a closed-form kernel.
#[derive(Debug, Clone)]
pub struct SpectralKernel {
    dec: SpectralDecomposition,
}

impl SpectralKernel {
    pub fn new(g: &WeightedGraph) -> Result<Self> {
        Ok(Self { dec: SpectralDecomposition::new(g)? })
    }

    pub fn decomposition(&self) -> &SpectralDecomposition {
        &self.dec
    }

    fn weighted(&self, x: VertexId, y: VertexId, f: impl Fn(f64) -> f64) -> Result<f64> {
        let v = self.dec.eigenvectors();
        if x >= v.n() || y >= v.n() {
            return Err(contract(format!("vertex pair ({x}, {y}) outside the graph")));
        }
        Ok(self.dec.eigenvalues().iter().enumerate().map(|(k, &l)| f(l) * v[(x, k)] * v[(y, k)]).sum())
    }
}

impl ClosedFormKernel for SpectralKernel {
    fn family(&self) -> KernelFamily {
        KernelFamily::Spectral
    }

    fn value(&self, x: VertexId, y: VertexId, t: f64) -> Result<f64> {
        self.weighted(x, y, |l| (-l * t).exp())
    }

    fn time_derivative(&self, x: VertexId, y: VertexId, t: f64) -> Result<f64> {
        self.weighted(x, y, |l| -l * (-l * t).exp())
    }

    fn block(&self, rows: &[VertexId], cols: &[VertexId], t: f64) -> Result<Vec<f64>> {
        let h = self.dec.heat_kernel(t);
        let n = h.n();
        if rows.iter().chain(cols).any(|&v| v >= n) {
            return Err(contract("block request outside the graph"));
        }
        Ok(rows.iter().flat_map(|&x| cols.iter().map(move |&y| (x, y))).map(|(x, y)| h[(x, y)]).collect())
    }
}

/// A kernel sampled at a list of times.
pub type Snapshots = Vec<(f64, Matrix)>;

pub fn series_snapshots(s: &KernelSeries) -> Snapshots {
    s.grid().nodes().iter().enumerate().map(|(j, &t)| (t, s.at(j))).collect()
}

pub fn spectral_snapshots(g: &WeightedGraph, times: &[f64]) -> Result<Snapshots> {
    let dec = SpectralDecomposition::new(g)?;
    Ok(times.iter().map(|&t| (t, dec.heat_kernel(t))).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub times: Vec<f64>,
    /// Sup-norm difference at each time.
    pub per_time: Vec<f64>,
    pub sup: f64,
    pub budget: f64,
    /// First (index, time) whose error exceeds the budget.
    pub first_exceeding: Option<(usize, f64)>,
}

impl OracleReport {
    pub fn within_budget(&self) -> bool {
        self.first_exceeding.is_none()
    }
}

pub fn compare_kernels(a: &[(f64, Matrix)], b: &[(f64, Matrix)], budget: f64) -> Result<OracleReport> {
    if a.len() != b.len() {
        return Err(contract(format!("kernels sampled at {} and {} times", a.len(), b.len())));
    }
    let mut report = OracleReport { times: Vec::new(), per_time: Vec::new(), sup: 0.0, budget, first_exceeding: None };
    for (i, ((ta, ma), (tb, mb))) in a.iter().zip(b).enumerate() {
        if (ta - tb).abs() > 1e-12 * ta.abs().max(1.0) {
            return Err(contract(format!("sample {i} taken at t = {ta} and t = {tb}")));
        }
        if ma.n() != mb.n() {
            return Err(contract(format!("sample {i} has sizes {} and {}", ma.n(), mb.n())));
        }
        let e = ma.sub(mb).max_abs();
        report.times.push(*ta);
        report.per_time.push(e);
        report.sup = report.sup.max(e);
        if report.first_exceeding.is_none() && !(e <= budget) {
            report.first_exceeding = Some((i, *ta));
        }
    }
    Ok(report)
}
