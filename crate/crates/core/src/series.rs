//! Time-sampled two-variable kernels and the graph convolution algebra.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;

use crate::error::{contract, HeatError, Result};
use crate::graph::VertexId;
use crate::linalg::Matrix;
use crate::quad::{self, FftEngine};
use crate::util::ln_factorial;

#[derive(Debug, Clone, PartialEq)]
enum Spacing {
    Uniform(f64),
    Graded,
}

/// Sample times t_0 = 0 < t_1 < … < t_M = t_max.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    nodes: Arc<Vec<f64>>,
    spacing: Spacing,
}

impl TimeGrid {
    pub fn uniform(t_max: f64, steps: usize) -> Result<Self> {
        if !(t_max > 0.0 && t_max.is_finite()) {
            return Err(contract(format!("t_max must be positive, got {t_max}")));
        }
        if steps == 0 {
            return Err(contract("a time grid needs at least one step"));
        }
        let dt = t_max / steps as f64;
        let mut nodes: Vec<f64> = (0..=steps).map(|j| j as f64 * dt).collect();
        nodes[steps] = t_max;
        Ok(Self { nodes: Arc::new(nodes), spacing: Spacing::Uniform(dt) })
    }

    /// Step h(t) = clamp(ratio·t, h_min, h_max): geometric refinement toward t = 0
    /// for kernels with a fast initial transient.
    pub fn graded(t_max: f64, h_min: f64, ratio: f64, h_max: f64) -> Result<Self> {
        if !(t_max > 0.0 && h_min > 0.0 && h_max >= h_min && ratio > 0.0) {
            return Err(contract("graded grid needs t_max, h_min, ratio > 0 and h_max ≥ h_min"));
        }
        let mut nodes = vec![0.0];
        let mut t = 0.0f64;
        while t < t_max {
            let h = (ratio * t).clamp(h_min, h_max);
            t = if t_max - (t + h) < 0.25 * h { t_max } else { t + h };
            nodes.push(t);
        }
        Ok(Self { nodes: Arc::new(nodes), spacing: Spacing::Graded })
    }

    pub fn steps(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn t_max(&self) -> f64 {
        self.nodes[self.steps()]
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn node(&self, j: usize) -> f64 {
        self.nodes[j]
    }

    /// dt for uniform grids.
    pub fn spacing(&self) -> Option<f64> {
        match self.spacing {
            Spacing::Uniform(dt) => Some(dt),
            Spacing::Graded => None,
        }
    }

    pub fn is_uniform(&self) -> bool {
        self.spacing().is_some()
    }

    /// Index of the node equal to `t` (within 1e-12 relative), if any.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let tol = 1e-12 * self.t_max();
        let j = self.nodes.partition_point(|&s| s < t - tol);
        (j < self.nodes.len() && (self.nodes[j] - t).abs() <= tol).then_some(j)
    }
}

/// A kernel F(x, y; t_j) on a vertex set of size n, stored so that each
/// (x, y) time series is contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSeries {
    grid: TimeGrid,
    n: usize,
    data: Vec<f64>,
}

impl KernelSeries {
    pub fn zeros(grid: &TimeGrid, n: usize) -> Self {
        Self { grid: grid.clone(), n, data: vec![0.0; n * n * grid.len()] }
    }

    pub fn from_fn(grid: &TimeGrid, n: usize, mut f: impl FnMut(VertexId, VertexId, usize) -> f64) -> Result<Self> {
        let mut s = Self::zeros(grid, n);
        for x in 0..n {
            for y in 0..n {
                for j in 0..grid.len() {
                    let v = f(x, y, j);
                    if !v.is_finite() {
                        return Err(HeatError::NonFinite { j, x, y });
                    }
                    s.data[(x * n + y) * grid.len() + j] = v;
                }
            }
        }
        Ok(s)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, x: VertexId, y: VertexId, j: usize) -> f64 {
        self.data[(x * self.n + y) * self.grid.len() + j]
    }

    pub fn set(&mut self, x: VertexId, y: VertexId, j: usize, v: f64) {
        let m1 = self.grid.len();
        self.data[(x * self.n + y) * m1 + j] = v;
    }

    pub fn series(&self, x: VertexId, y: VertexId) -> &[f64] {
        let m1 = self.grid.len();
        &self.data[(x * self.n + y) * m1..(x * self.n + y + 1) * m1]
    }

    pub fn series_mut(&mut self, x: VertexId, y: VertexId) -> &mut [f64] {
        let m1 = self.grid.len();
        &mut self.data[(x * self.n + y) * m1..(x * self.n + y + 1) * m1]
    }

    /// The n×n matrix at node j.
    pub fn at(&self, j: usize) -> Matrix {
        Matrix::from_fn(self.n, |x, y| self.get(x, y, j))
    }

    pub fn ensure_finite(&self) -> Result<()> {
        let m1 = self.grid.len();
        match self.data.iter().position(|v| !v.is_finite()) {
            None => Ok(()),
            Some(i) => Err(HeatError::NonFinite { j: i % m1, x: i / m1 / self.n, y: (i / m1) % self.n }),
        }
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid {
            return Err(HeatError::GridMismatch);
        }
        if self.n != other.n {
            return Err(HeatError::DimensionMismatch { expected: self.n, got: other.n });
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        Ok(Self { data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(), ..self.clone() })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        Ok(Self { data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(), ..self.clone() })
    }

    /// self += s·other
    pub fn axpy(&mut self, s: f64, other: &Self) -> Result<()> {
        self.check_compatible(other)?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
        Ok(())
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { data: self.data.iter().map(|v| v * s).collect(), ..self.clone() }
    }

    pub fn sup_norm(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        self.check_compatible(other)?;
        Ok(self.data.iter().zip(&other.data).fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    /// Largest |F(x, ·; ·)| over the row.
    pub fn row_sup(&self, x: VertexId) -> f64 {
        let m1 = self.grid.len();
        self.data[x * self.n * m1..(x + 1) * self.n * m1].iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn series_is_zero(&self, x: VertexId, y: VertexId) -> bool {
        self.series(x, y).iter().all(|&v| v == 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelFamily {
    CompleteGraph,
    Bessel,
    DiagonalExponential,
    SineSeries,
    Spectral,
}

/// An analytically evaluable kernel with an exact time derivative.
pub trait ClosedFormKernel: Send + Sync {
    fn family(&self) -> KernelFamily;

    fn value(&self, x: VertexId, y: VertexId, t: f64) -> Result<f64>;

    fn time_derivative(&self, x: VertexId, y: VertexId, t: f64) -> Result<f64>;

    /// Row-major values over `rows × cols` at time t.
    fn block(&self, rows: &[VertexId], cols: &[VertexId], t: f64) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(rows.len() * cols.len());
        for &x in rows {
            for &y in cols {
                out.push(self.value(x, y, t)?);
            }
        }
        Ok(out)
    }
}

/// Samples `k` on `0..n × 0..n` at every node.
pub fn sample_closed_form(k: &dyn ClosedFormKernel, grid: &TimeGrid, n: usize) -> Result<KernelSeries> {
    let ids: Vec<VertexId> = (0..n).collect();
    sample_closed_form_on(k, grid, &ids)
}

/// Samples `k` on the kernel's own vertex ids `ids`; entry (i, j) of the
/// result is k(ids[i], ids[j]).
pub fn sample_closed_form_on(k: &dyn ClosedFormKernel, grid: &TimeGrid, ids: &[VertexId]) -> Result<KernelSeries> {
    let n = ids.len();
    let mut s = KernelSeries::zeros(grid, n);
    for (j, &t) in grid.nodes().iter().enumerate() {
        let block = k.block(ids, ids, t)?;
        for x in 0..n {
            for y in 0..n {
                let v = block[x * n + y];
                if !v.is_finite() {
                    return Err(HeatError::NonFinite { j, x, y });
                }
                s.set(x, y, j, v);
            }
        }
    }
    Ok(s)
}

#[derive(Clone, Debug)]
enum Engine {
    Direct(f64),
    Fft(f64, FftEngine),
    Graded(Arc<Vec<Vec<(u32, u32, f64)>>>),
}

/// Precomputed quadrature for convolutions on one grid.
#[derive(Clone, Debug)]
pub struct ConvolutionPlan {
    grid: TimeGrid,
    engine: Engine,
}

/// Right operand of a convolution, with its spectra cached when the plan uses
/// the FFT path.
pub struct Prepared<'a> {
    series: &'a KernelSeries,
    inner: Vec<VertexId>,
    spectra: Vec<Option<Vec<Complex64>>>,
}

impl ConvolutionPlan {
    pub fn new(grid: &TimeGrid) -> Self {
        let engine = match grid.spacing() {
            Some(dt) if grid.len() > quad::FFT_THRESHOLD => Engine::Fft(dt, FftEngine::new(grid.len())),
            Some(dt) => Engine::Direct(dt),
            None => Engine::Graded(Arc::new(quad::graded_weights(grid.nodes()))),
        };
        Self { grid: grid.clone(), engine }
    }

    /// Plain O(M²) summation regardless of grid size.
    pub fn direct(grid: &TimeGrid) -> Self {
        let engine = match grid.spacing() {
            Some(dt) => Engine::Direct(dt),
            None => Engine::Graded(Arc::new(quad::graded_weights(grid.nodes()))),
        };
        Self { grid: grid.clone(), engine }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// `inner` limits the vertex sum; it must contain every v with B(v, ·) ≢ 0
    /// or A(·, v) ≢ 0 for the result to be exact.
    pub fn prepare<'a>(&self, b: &'a KernelSeries, inner: Option<&[VertexId]>) -> Result<Prepared<'a>> {
        if b.grid != self.grid {
            return Err(HeatError::GridMismatch);
        }
        let n = b.n;
        let inner: Vec<VertexId> = match inner {
            Some(s) => {
                if let Some(&bad) = s.iter().find(|&&v| v >= n) {
                    return Err(contract(format!("inner vertex {bad} out of range")));
                }
                s.to_vec()
            }
            None => (0..n).collect(),
        };
        let spectra = match &self.engine {
            Engine::Fft(_, e) => inner
                .iter()
                .flat_map(|&v| (0..n).map(move |y| (v, y)))
                .map(|(v, y)| (!b.series_is_zero(v, y)).then(|| e.forward(b.series(v, y))))
                .collect(),
            _ => Vec::new(),
        };
        Ok(Prepared { series: b, inner, spectra })
    }

    /// A ∗ B evaluated only on output rows `rows` (others are zero).
    pub fn convolve_prepared(&self, a: &KernelSeries, b: &Prepared<'_>, rows: Option<&[VertexId]>) -> Result<KernelSeries> {
        a.check_compatible(b.series)?;
        if a.grid != self.grid {
            return Err(HeatError::GridMismatch);
        }
        let n = a.n;
        let m1 = self.grid.len();
        let mut wanted = vec![rows.is_none(); n];
        for &x in rows.unwrap_or(&[]) {
            if x >= n {
                return Err(contract(format!("output row {x} out of range")));
            }
            wanted[x] = true;
        }
        if let Engine::Graded(w) = &self.engine {
            return Ok(graded_convolve(w, a, b, &wanted));
        }
        let mut out = KernelSeries::zeros(&self.grid, n);
        let bs = b.series;
        out.data.par_chunks_mut(n * m1).enumerate().filter(|(x, _)| wanted[*x]).for_each(|(x, row)| {
            let a_nonzero: Vec<bool> = b.inner.iter().map(|&v| !a.series_is_zero(x, v)).collect();
            match &self.engine {
                Engine::Direct(dt) => {
                    for y in 0..n {
                        let dst = &mut row[y * m1..(y + 1) * m1];
                        for (k, &v) in b.inner.iter().enumerate() {
                            if a_nonzero[k] && !bs.series_is_zero(v, y) {
                                quad::trapezoid_direct_acc(a.series(x, v), bs.series(v, y), *dt, dst);
                            }
                        }
                    }
                }
                Engine::Fft(dt, e) => {
                    let fa: Vec<Option<Vec<Complex64>>> = b
                        .inner
                        .iter()
                        .enumerate()
                        .map(|(k, &v)| a_nonzero[k].then(|| e.forward(a.series(x, v))))
                        .collect();
                    let mut acc = vec![Complex64::new(0.0, 0.0); e.len()];
                    for y in 0..n {
                        acc.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
                        let mut any = false;
                        for k in 0..b.inner.len() {
                            if let (Some(sa), Some(sb)) = (&fa[k], &b.spectra[k * n + y]) {
                                any = true;
                                for ((c, p), q) in acc.iter_mut().zip(sa).zip(sb) {
                                    *c += p * q;
                                }
                            }
                        }
                        if any {
                            e.inverse_into(&mut acc, *dt, &mut row[y * m1..(y + 1) * m1]);
                        }
                    }
                }
                Engine::Graded(_) => unreachable!(),
            }
        });
        Ok(out)
    }

    pub fn convolve(&self, a: &KernelSeries, b: &KernelSeries) -> Result<KernelSeries> {
        let p = self.prepare(b, None)?;
        self.convolve_prepared(a, &p, None)
    }
}

/// Graded-grid convolution in time-major layout: each quadrature weight
/// (p, q, c) contributes c·A(t_p)·B(t_q) as a small matrix product.
fn graded_convolve(w: &[Vec<(u32, u32, f64)>], a: &KernelSeries, b: &Prepared<'_>, wanted: &[bool]) -> KernelSeries {
    let n = a.n;
    let m1 = a.grid.len();
    let rows: Vec<VertexId> = (0..n).filter(|&x| wanted[x]).collect();
    let inner = &b.inner;
    let (nr, ni) = (rows.len(), inner.len());
    // at[p] is rows × inner, bt[q] is inner × n
    let mut at = vec![0.0; m1 * nr * ni];
    let mut bt = vec![0.0; m1 * ni * n];
    for (r, &x) in rows.iter().enumerate() {
        for (k, &v) in inner.iter().enumerate() {
            for (p, &val) in a.series(x, v).iter().enumerate() {
                at[(p * nr + r) * ni + k] = val;
            }
        }
    }
    for (k, &v) in inner.iter().enumerate() {
        for y in 0..n {
            for (q, &val) in b.series.series(v, y).iter().enumerate() {
                bt[(q * ni + k) * n + y] = val;
            }
        }
    }
    let per_node: Vec<Vec<f64>> = (0..m1)
        .into_par_iter()
        .map(|j| {
            // weights arrive sorted by p: gather Σ_q c·B(t_q) per p, then one product
            let mut acc = vec![0.0; nr * n];
            let mut bsum = vec![0.0; ni * n];
            let entries = &w[j];
            let mut i = 0;
            while i < entries.len() {
                let p = entries[i].0 as usize;
                bsum.iter_mut().for_each(|t| *t = 0.0);
                while i < entries.len() && entries[i].0 as usize == p {
                    let (_, q, c) = entries[i];
                    let bq = &bt[q as usize * ni * n..(q as usize + 1) * ni * n];
                    for (t, &bv) in bsum.iter_mut().zip(bq) {
                        *t += c * bv;
                    }
                    i += 1;
                }
                let ap = &at[p * nr * ni..(p + 1) * nr * ni];
                for r in 0..nr {
                    let arow = &ap[r * ni..(r + 1) * ni];
                    let orow = &mut acc[r * n..(r + 1) * n];
                    for (k, &av) in arow.iter().enumerate() {
                        if av != 0.0 {
                            for (o, &bv) in orow.iter_mut().zip(&bsum[k * n..(k + 1) * n]) {
                                *o += av * bv;
                            }
                        }
                    }
                }
            }
            acc
        })
        .collect();
    let mut out = KernelSeries::zeros(&a.grid, n);
    for (j, acc) in per_node.iter().enumerate().skip(1) {
        for (r, &x) in rows.iter().enumerate() {
            for y in 0..n {
                out.set(x, y, j, acc[r * n + y]);
            }
        }
    }
    out
}

/// (F1 ∗ F2)(x, y; t) = ∫₀ᵗ Σ_v F1(x, v; t − r) F2(v, y; r) dr by the
/// trapezoidal rule; the value at t = 0 is 0.
pub fn convolve(f1: &KernelSeries, f2: &KernelSeries) -> Result<KernelSeries> {
    f1.check_compatible(f2)?;
    ConvolutionPlan::new(f1.grid()).convolve(f1, f2)
}

/// f^{∗ℓ} = f^{∗(ℓ−1)} ∗ f, with f^{∗1} = f.
pub fn l_fold_convolve(f: &KernelSeries, l: usize) -> Result<KernelSeries> {
    if l == 0 {
        return Err(contract("the zero-fold convolution (identity) is not representable on a grid"));
    }
    let plan = ConvolutionPlan::new(f.grid());
    let prepared = plan.prepare(f, None)?;
    let mut acc = f.clone();
    for _ in 1..l {
        acc = plan.convolve_prepared(&acc, &prepared, None)?;
    }
    Ok(acc)
}

/// C1·C2·n·k!ℓ!/(k+ℓ+1)!·t^{k+ℓ+1}: the bound on |F1 ∗ F2| when
/// |F1| ≤ C1 t^k and |F2| ≤ C2 t^ℓ on n vertices.
pub fn convolution_bound(c1: f64, k: u32, c2: f64, l: u32, n: usize, t: f64) -> f64 {
    if c1 == 0.0 || c2 == 0.0 || t == 0.0 {
        return 0.0;
    }
    let p = (k + l + 1) as u64;
    let lf = ln_factorial(k as u64) + ln_factorial(l as u64) - ln_factorial(p);
    c1 * c2 * n as f64 * (lf + p as f64 * t.ln()).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn const_series(grid: &TimeGrid, n: usize, c: f64) -> KernelSeries {
        KernelSeries::from_fn(grid, n, |_, _, _| c).unwrap()
    }

    #[test]
    fn grids() {
        let g = TimeGrid::uniform(2.0, 4).unwrap();
        assert_eq!(g.nodes(), &[0.0, 0.5, 1.0, 1.5, 2.0]);
        assert_eq!(g.spacing(), Some(0.5));
        assert_eq!(g.index_of(1.5), Some(3));
        assert_eq!(g.index_of(1.2), None);
        assert!(TimeGrid::uniform(1.0, 0).is_err());
        assert!(TimeGrid::uniform(-1.0, 3).is_err());
        let gg = TimeGrid::graded(1.0, 1e-4, 0.1, 0.05).unwrap();
        assert_eq!(gg.node(0), 0.0);
        assert_eq!(gg.t_max(), 1.0);
        assert!(gg.nodes().windows(2).all(|w| w[1] > w[0]));
        assert!(gg.spacing().is_none());
    }

    #[test]
    fn constant_convolutions() {
        for m in [10, 200] {
            let g = TimeGrid::uniform(1.0, m).unwrap();
            for n in [1, 3] {
                let one = const_series(&g, n, 1.0);
                let c = convolve(&one, &one).unwrap();
                for j in 0..=m {
                    assert!((c.get(0, n - 1, j) - n as f64 * g.node(j)).abs() < 1e-12);
                }
            }
            let one = const_series(&g, 1, 1.0);
            let c3 = l_fold_convolve(&one, 3).unwrap();
            let dt = 1.0 / m as f64;
            for j in 0..=m {
                let t = g.node(j);
                assert!((c3.get(0, 0, j) - t * t / 2.0).abs() < dt * dt);
            }
        }
    }

    #[test]
    fn l_fold_edge_cases() {
        let g = TimeGrid::uniform(1.0, 8).unwrap();
        let f = KernelSeries::from_fn(&g, 2, |x, y, j| (x + 2 * y) as f64 + j as f64).unwrap();
        assert_eq!(l_fold_convolve(&f, 1).unwrap(), f);
        assert!(l_fold_convolve(&f, 0).is_err());
        let other = KernelSeries::zeros(&TimeGrid::uniform(1.0, 9).unwrap(), 2);
        assert_eq!(convolve(&f, &other), Err(HeatError::GridMismatch));
        let small = KernelSeries::zeros(&g, 1);
        assert!(matches!(convolve(&f, &small), Err(HeatError::DimensionMismatch { .. })));
    }

    #[test]
    fn beta_integral() {
        // t^k ∗ t^l = k! l! t^{k+l+1}/(k+l+1)!
        for (k, l) in [(1, 1), (2, 1), (3, 0)] {
            let mut errs = Vec::new();
            for m in [100, 200] {
                let g = TimeGrid::uniform(1.0, m).unwrap();
                let a = KernelSeries::from_fn(&g, 1, |_, _, j| g.node(j).powi(k)).unwrap();
                let b = KernelSeries::from_fn(&g, 1, |_, _, j| g.node(j).powi(l)).unwrap();
                let c = convolve(&a, &b).unwrap();
                let exact = convolution_bound(1.0, k as u32, 1.0, l as u32, 1, 1.0);
                errs.push((c.get(0, 0, m) - exact).abs());
            }
            assert!(errs[0] / errs[1] > 3.5, "k={k} l={l}: {errs:?}");
        }
    }

    #[test]
    fn bound_examples() {
        assert!((convolution_bound(2.0, 0, 3.0, 0, 4, 0.5) - 12.0).abs() < 1e-14);
        assert_eq!(convolution_bound(0.0, 2, 1.0, 1, 3, 1.0), 0.0);
        assert!((convolution_bound(1.0, 1, 1.0, 1, 1, 1.0) - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn engines_agree() {
        let g = TimeGrid::uniform(1.5, 150).unwrap();
        let a = KernelSeries::from_fn(&g, 3, |x, y, j| ((x * 3 + y) as f64 * 0.3 + g.node(j)).sin()).unwrap();
        let b = KernelSeries::from_fn(&g, 3, |x, y, j| (-((x + y) as f64) * g.node(j)).exp()).unwrap();
        let fast = ConvolutionPlan::new(&g).convolve(&a, &b).unwrap();
        let slow = ConvolutionPlan::direct(&g).convolve(&a, &b).unwrap();
        assert!(fast.max_abs_diff(&slow).unwrap() < 1e-12);
    }

    #[test]
    fn restricted_convolution_matches_full() {
        let g = TimeGrid::uniform(1.0, 40).unwrap();
        // A supported on row 1 only, B on row 1 only: inner = {1}, rows = {1}
        let a = KernelSeries::from_fn(&g, 3, |x, y, j| if x == 1 { (y + 1) as f64 * g.node(j) } else { 0.0 }).unwrap();
        let b = KernelSeries::from_fn(&g, 3, |x, y, j| if x == 1 { 1.0 + y as f64 + g.node(j) } else { 0.0 }).unwrap();
        let plan = ConvolutionPlan::new(&g);
        let full = plan.convolve(&a, &b).unwrap();
        let p = plan.prepare(&b, Some(&[1])).unwrap();
        let restricted = plan.convolve_prepared(&a, &p, Some(&[1])).unwrap();
        assert_eq!(full.max_abs_diff(&restricted).unwrap(), 0.0);
    }

    #[test]
    fn sampling_reports_non_finite() {
        struct Bad;
        impl ClosedFormKernel for Bad {
            fn family(&self) -> KernelFamily {
                KernelFamily::Spectral
            }
            fn value(&self, x: VertexId, _y: VertexId, t: f64) -> Result<f64> {
                Ok(if x == 1 && t > 0.4 { f64::NAN } else { 0.0 })
            }
            fn time_derivative(&self, _: VertexId, _: VertexId, _: f64) -> Result<f64> {
                Ok(0.0)
            }
        }
        let g = TimeGrid::uniform(1.0, 4).unwrap();
        assert_eq!(sample_closed_form(&Bad, &g, 2).unwrap_err(), HeatError::NonFinite { j: 2, x: 1, y: 0 });
    }

    fn random_series(n: usize, m: usize, zero_at_origin: bool) -> impl Strategy<Value = KernelSeries> {
        prop::collection::vec(-1.0..1.0f64, n * n * (m + 1)).prop_map(move |v| {
            let g = TimeGrid::uniform(1.0, m).unwrap();
            KernelSeries::from_fn(&g, n, |x, y, j| if zero_at_origin && j == 0 { 0.0 } else { v[(x * n + y) * (m + 1) + j] })
                .unwrap()
        })
    }

    fn triple(zero: bool) -> impl Strategy<Value = (KernelSeries, KernelSeries, KernelSeries)> {
        (1usize..=4, prop_oneof![Just(16usize), Just(64), Just(128)])
            .prop_flat_map(move |(n, m)| (random_series(n, m, zero), random_series(n, m, zero), random_series(n, m, zero)))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn associative_when_vanishing_at_origin((a, b, c) in triple(true)) {
            let ab_c = convolve(&convolve(&a, &b).unwrap(), &c).unwrap();
            let a_bc = convolve(&a, &convolve(&b, &c).unwrap()).unwrap();
            let scale = a.sup_norm() * b.sup_norm() * c.sup_norm() * (a.n() * a.n()) as f64;
            prop_assert!(ab_c.max_abs_diff(&a_bc).unwrap() <= 1e-10 * scale.max(1.0));
        }

        #[test]
        fn lemma_bound_holds((a, b, _) in triple(false)) {
            // |a| ≤ sup|a| t^0, so |a ∗ b|(t) ≤ sup|a| sup|b| n t
            let c = convolve(&a, &b).unwrap();
            let (ca, cb) = (a.sup_norm(), b.sup_norm());
            for x in 0..a.n() { for y in 0..a.n() { for (j, &t) in a.grid().nodes().iter().enumerate() {
                prop_assert!(c.get(x, y, j).abs() <= convolution_bound(ca, 0, cb, 0, a.n(), t) + 1e-10);
            }}}
        }
    }

    #[test]
    fn associative_to_second_order_otherwise() {
        // smooth series nonzero at 0: discrepancy shrinks like dt²
        let mut errs = Vec::new();
        for m in [50, 100] {
            let g = TimeGrid::uniform(1.0, m).unwrap();
            let a = KernelSeries::from_fn(&g, 2, |x, y, j| (x + y) as f64 + (g.node(j)).cos()).unwrap();
            let b = KernelSeries::from_fn(&g, 2, |x, y, j| 1.0 + x as f64 * g.node(j) - y as f64).unwrap();
            let c = KernelSeries::from_fn(&g, 2, |_, y, j| (-(y as f64) * g.node(j)).exp()).unwrap();
            let l = convolve(&convolve(&a, &b).unwrap(), &c).unwrap();
            let r = convolve(&a, &convolve(&b, &c).unwrap()).unwrap();
            errs.push(l.max_abs_diff(&r).unwrap());
        }
        assert!(errs[0] / errs[1] > 3.5, "{errs:?}");
    }
}
