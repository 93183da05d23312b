//! A graph embedded in the interval (0, L): Voronoi cells, bump functions, and
//! the parametrix obtained by averaging the Dirichlet heat kernel of the
//! interval against the bumps.
//!
//! The sine-series kernel is separable, so each averaged entry reduces to
//! Σ_n (2/L) c_n(v₁) c_n(v₂) e^{−λ_n t} with c_n(v) = ∫ sin(nπx/L) η_v(x) dx.

use std::f64::consts::PI;

use crate::error::{contract, HeatError, Result};
use crate::graph::{VertexId, WeightedGraph};
use crate::parametrix::{heat_kernel, NeumannSeriesResult, Parametrix, Truncation};
use crate::series::{sample_closed_form, ClosedFormKernel, KernelFamily, KernelSeries, TimeGrid};

/// Bound on the dropped sine-series tail used to pick the mode count.
pub const MODE_TAIL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalDomain {
    pub length: f64,
    pub modes: usize,
    /// Simpson panels on each of the four ramp pieces of a bump.
    pub quad_points: usize,
}

impl IntervalDomain {
    pub fn new(length: f64, modes: usize, quad_points: usize) -> Result<Self> {
        if !(length > 0.0 && length.is_finite()) || modes == 0 {
            return Err(contract("interval needs L > 0 and at least one mode"));
        }
        if quad_points < 2 || quad_points % 2 != 0 {
            return Err(contract("quad_points must be even and at least 2"));
        }
        Ok(Self { length, modes, quad_points })
    }

    /// Enough modes that the dropped tail at `t_min` is below `MODE_TAIL_TOL`.
    pub fn certified(length: f64, t_min: f64, quad_points: usize) -> Result<Self> {
        if !(t_min > 0.0) {
            return Err(contract("mode certificate needs a positive smallest time"));
        }
        let mut n = 1;
        while mode_tail_bound(length, n, t_min) >= MODE_TAIL_TOL {
            n += 1;
        }
        Self::new(length, n, quad_points)
    }

    fn wavenumber(&self, n: usize) -> f64 {
        n as f64 * PI / self.length
    }

    fn eigenvalue(&self, n: usize) -> f64 {
        self.wavenumber(n).powi(2)
    }
}

/// Σ_{n>N} (2/L) e^{−(nπ/L)² t}; consecutive ratios after N+1 are at most
/// e^{−a(2N+3)}, so the tail is bounded by a geometric series.
pub fn mode_tail_bound(length: f64, modes: usize, t: f64) -> f64 {
    let a = (PI / length).powi(2) * t;
    let first = (-a * ((modes + 1) as f64).powi(2)).exp();
    let r = (-a * (2 * modes + 3) as f64).exp();
    2.0 / length * first / (1.0 - r)
}

fn check_point(d: &IntervalDomain, x: f64) -> Result<()> {
    if !(x > 0.0 && x < d.length) {
        return Err(HeatError::Domain(format!("point {x} outside (0, {})", d.length)));
    }
    Ok(())
}

/// Dirichlet heat kernel of (0, L), truncated to `d.modes` terms.
pub fn interval_heat_kernel(d: &IntervalDomain, x: f64, y: f64, t: f64) -> Result<f64> {
    check_point(d, x)?;
    check_point(d, y)?;
    Ok((1..=d.modes)
        .map(|n| {
            let k = d.wavenumber(n);
            2.0 / d.length * (k * x).sin() * (k * y).sin() * (-k * k * t).exp()
        })
        .sum())
}

/// Termwise ∂_t of `interval_heat_kernel`.
pub fn interval_heat_kernel_dt(d: &IntervalDomain, x: f64, y: f64, t: f64) -> Result<f64> {
    check_point(d, x)?;
    check_point(d, y)?;
    Ok((1..=d.modes)
        .map(|n| {
            let k = d.wavenumber(n);
            -k * k * 2.0 / d.length * (k * x).sin() * (k * y).sin() * (-k * k * t).exp()
        })
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoronoiCell1D {
    pub vertex: VertexId,
    pub position: f64,
    pub a: f64,
    pub b: f64,
    /// Collar width.
    pub delta: f64,
}

impl VoronoiCell1D {
    pub fn measure(&self) -> f64 {
        self.b - self.a
    }

    /// Distance to the nearer cell end.
    fn depth(&self, x: f64) -> f64 {
        (x - self.a).min(self.b - x)
    }
}

/// Cells split at midpoints of consecutive positions; δ = δ_fraction × the
/// smallest cell half-width, shared by all cells.
pub fn build_voronoi(positions: &[f64], length: f64, delta_fraction: f64) -> Result<Vec<VoronoiCell1D>> {
    if positions.is_empty() {
        return Err(contract("no vertex positions"));
    }
    if !(delta_fraction > 0.0 && delta_fraction < 0.5) {
        return Err(contract(format!("δ fraction must lie in (0, 1/2), got {delta_fraction}")));
    }
    if let Some(w) = positions.windows(2).find(|w| !(w[1] > w[0])) {
        return Err(contract(format!("positions must be strictly increasing ({} then {})", w[0], w[1])));
    }
    if !(positions[0] > 0.0 && positions[positions.len() - 1] < length) {
        return Err(contract(format!("positions must lie inside (0, {length})")));
    }
    let k = positions.len();
    let bounds: Vec<f64> = std::iter::once(0.0)
        .chain(positions.windows(2).map(|w| 0.5 * (w[0] + w[1])))
        .chain(std::iter::once(length))
        .collect();
    let half = (0..k).map(|i| 0.5 * (bounds[i + 1] - bounds[i])).fold(f64::INFINITY, f64::min);
    let delta = delta_fraction * half;
    Ok((0..k)
        .map(|i| VoronoiCell1D { vertex: i, position: positions[i], a: bounds[i], b: bounds[i + 1], delta })
        .collect())
}

/// Quintic smoothstep 6u⁵ − 15u⁴ + 10u³.
fn smoothstep(u: f64) -> f64 {
    u * u * u * (10.0 + u * (-15.0 + 6.0 * u))
}

/// ∫₀¹ S(u)² du.
const SMOOTHSTEP_SQ: f64 = 181.0 / 462.0;

/// η_v: 0 within δ/2 of the cell ends, a smoothstep rise to `amplitude`, a
/// smoothstep fall back to the plateau value 1 at depth δ, then 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bump {
    pub cell: VoronoiCell1D,
    pub amplitude: f64,
}

impl Bump {
    pub fn eval(&self, x: f64) -> f64 {
        let c = &self.cell;
        if !(x > c.a && x < c.b) {
            return 0.0;
        }
        let d = c.depth(x);
        let h = 0.5 * c.delta;
        if d <= h {
            0.0
        } else if d >= c.delta {
            1.0
        } else {
            let s = (d - h) / h;
            if s < 0.5 {
                self.amplitude * smoothstep(2.0 * s)
            } else {
                self.amplitude + (1.0 - self.amplitude) * smoothstep(2.0 * s - 1.0)
            }
        }
    }

    /// The four ramp pieces as (start, end) intervals in x.
    fn ramps(&self) -> [(f64, f64); 4] {
        let c = &self.cell;
        let q = 0.25 * c.delta;
        [
            (c.a + 2.0 * q, c.a + 3.0 * q),
            (c.a + 3.0 * q, c.a + c.delta),
            (c.b - c.delta, c.b - 3.0 * q),
            (c.b - 3.0 * q, c.b - 2.0 * q),
        ]
    }

    fn plateau(&self) -> (f64, f64) {
        (self.cell.a + self.cell.delta, self.cell.b - self.cell.delta)
    }

    /// Composite Simpson of f·η over the ramps plus the exact plateau integral
    /// `plateau_integral(p, q)`.
    fn integrate(&self, panels: usize, f: impl Fn(f64) -> f64, plateau_integral: impl Fn(f64, f64) -> f64) -> f64 {
        let (p, q) = self.plateau();
        let mut total = plateau_integral(p, q);
        for (lo, hi) in self.ramps() {
            total += simpson(|x| f(x) * self.eval(x), lo, hi, panels);
        }
        total
    }

    /// ∫ η².
    pub fn norm_sq(&self, panels: usize) -> f64 {
        let (p, q) = self.plateau();
        let mut total = q - p;
        for (lo, hi) in self.ramps() {
            total += simpson(|x| self.eval(x).powi(2), lo, hi, panels);
        }
        total
    }

    /// ∫ η.
    pub fn integral(&self, panels: usize) -> f64 {
        self.integrate(panels, |_| 1.0, |p, q| q - p)
    }
}

pub(crate) fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    let mut s = f(a) + f(b);
    for i in 1..panels {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct BumpFamily {
    pub bumps: Vec<Bump>,
}

/// Chooses each amplitude A so that ∫η² equals the cell measure. The ramps
/// contribute (δ/4)(A²p + A + (1−A)²p) per side with p = ∫S², so the plateau
/// deficit 2δ is repaid exactly when A²p + A + (1−A)²p = 4, whatever δ is.
pub fn build_bumps(cells: &[VoronoiCell1D]) -> Result<BumpFamily> {
    let mut bumps = Vec::with_capacity(cells.len());
    for c in cells {
        if !(c.delta > 0.0 && 2.0 * c.delta < c.measure()) {
            return Err(HeatError::Construction(format!(
                "collar δ = {} does not fit cell ({}, {}); use a smaller δ fraction",
                c.delta, c.a, c.b
            )));
        }
        let p = SMOOTHSTEP_SQ;
        let excess = |a: f64| 0.25 * c.delta * 2.0 * (a * a * p + a + (1.0 - a).powi(2) * p) - 2.0 * c.delta;
        let (mut lo, mut hi) = (1.0, 16.0);
        if !(excess(lo) < 0.0 && excess(hi) > 0.0) {
            return Err(HeatError::Construction("amplitude root not bracketed; use a smaller δ fraction".into()));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if excess(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        bumps.push(Bump { cell: *c, amplitude: 0.5 * (lo + hi) });
    }
    Ok(BumpFamily { bumps })
}

/// How H₀ is normalised.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    /// 1/√(μ_{v₁} μ_{v₂}): symmetric in the two vertices.
    Symmetric,
    /// 1/μ_{v₁}.
    RowVolume,
}

/// H₀(v₁, v₂; t) as a closed-form kernel on the embedded vertices.
#[derive(Debug, Clone)]
pub struct AveragedKernel {
    /// (2/L)^{1/2} c_n(v) per vertex and mode.
    coeffs: Vec<Vec<f64>>,
    lambda: Vec<f64>,
    measure: Vec<f64>,
    normalization: Normalization,
}

fn sine_coefficients(d: &IntervalDomain, bump: &Bump, panels: usize) -> Vec<f64> {
    let scale = (2.0 / d.length).sqrt();
    (1..=d.modes)
        .map(|n| {
            let k = d.wavenumber(n);
            scale * bump.integrate(panels, |x| (k * x).sin(), |p, q| ((k * p).cos() - (k * q).cos()) / k)
        })
        .collect()
}

impl AveragedKernel {
    fn build(d: &IntervalDomain, bumps: &BumpFamily, normalization: Normalization, panels: usize) -> Self {
        Self {
            coeffs: bumps.bumps.iter().map(|b| sine_coefficients(d, b, panels)).collect(),
            lambda: (1..=d.modes).map(|n| d.eigenvalue(n)).collect(),
            measure: bumps.bumps.iter().map(|b| b.cell.measure()).collect(),
            normalization,
        }
    }

    /// Builds with `d.quad_points` panels and rejects the result if doubling
    /// the panels moves any entry at `t_probe` by more than `budget`.
    pub fn new(d: &IntervalDomain, bumps: &BumpFamily, normalization: Normalization, t_probe: f64, budget: f64) -> Result<Self> {
        let k = Self::build(d, bumps, normalization, d.quad_points);
        let fine = Self::build(d, bumps, normalization, 2 * d.quad_points);
        let n = k.n();
        let mut estimate = 0.0f64;
        for x in 0..n {
            for y in 0..n {
                estimate = estimate.max((k.value(x, y, t_probe)? - fine.value(x, y, t_probe)?).abs());
            }
        }
        if !(estimate <= budget) {
            return Err(HeatError::Resolution { estimate, budget });
        }
        Ok(k)
    }

    pub fn n(&self) -> usize {
        self.coeffs.len()
    }

    fn norm(&self, x: VertexId, y: VertexId) -> f64 {
        match self.normalization {
            Normalization::Symmetric => 1.0 / (self.measure[x] * self.measure[y]).sqrt(),
            Normalization::RowVolume => 1.0 / self.measure[x],
        }
    }

    fn check(&self, x: VertexId, y: VertexId) -> Result<()> {
        if x >= self.n() || y >= self.n() {
            return Err(contract(format!("vertex pair ({x}, {y}) outside the embedding")));
        }
        Ok(())
    }

    fn modal_sum(&self, x: VertexId, y: VertexId, f: impl Fn(f64) -> f64) -> f64 {
        let (cx, cy) = (&self.coeffs[x], &self.coeffs[y]);
        self.norm(x, y) * self.lambda.iter().zip(cx.iter().zip(cy)).map(|(&l, (a, b))| a * b * f(l)).sum::<f64>()
    }
}

impl ClosedFormKernel for AveragedKernel {
    fn family(&self) -> KernelFamily {
        KernelFamily::SineSeries
    }

    fn value(&self, x: VertexId, y: VertexId, t: f64) -> Result<f64> {
        self.check(x, y)?;
        Ok(self.modal_sum(x, y, |l| (-l * t).exp()))
    }

    fn time_derivative(&self, x: VertexId, y: VertexId, t: f64) -> Result<f64> {
        self.check(x, y)?;
        Ok(self.modal_sum(x, y, |l| -l * (-l * t).exp()))
    }

    fn block(&self, rows: &[VertexId], cols: &[VertexId], t: f64) -> Result<Vec<f64>> {
        let decay: Vec<f64> = self.lambda.iter().map(|l| (-l * t).exp()).collect();
        let mut out = Vec::with_capacity(rows.len() * cols.len());
        for &x in rows {
            for &y in cols {
                self.check(x, y)?;
                let s: f64 = self.coeffs[x].iter().zip(&self.coeffs[y]).zip(&decay).map(|((a, b), e)| a * b * e).sum();
                out.push(self.norm(x, y) * s);
            }
        }
        Ok(out)
    }
}

/// Default Richardson budget for the averaged kernel.
pub const RESOLUTION_BUDGET: f64 = 1e-8;

/// H₀ sampled on `grid` with heat image Δ_G H₀ + ∂_t H₀ (the time derivative
/// taken termwise from the sine series).
pub fn averaged_parametrix(
    d: &IntervalDomain,
    bumps: &BumpFamily,
    g: &WeightedGraph,
    grid: &TimeGrid,
    normalization: Normalization,
) -> Result<Parametrix> {
    let n = g.n();
    if bumps.bumps.len() != n {
        return Err(HeatError::DimensionMismatch { expected: n, got: bumps.bumps.len() });
    }
    let t_probe = grid.node(1);
    let k = AveragedKernel::new(d, bumps, normalization, t_probe, RESOLUTION_BUDGET)?;
    averaged_parametrix_from(&k, g, grid)
}

pub fn averaged_parametrix_from(k: &AveragedKernel, g: &WeightedGraph, grid: &TimeGrid) -> Result<Parametrix> {
    let n = g.n();
    if k.n() != n {
        return Err(HeatError::DimensionMismatch { expected: n, got: k.n() });
    }
    let kernel = sample_closed_form(k, grid, n)?;
    let mut heat_image = KernelSeries::zeros(grid, n);
    let mu = g.degrees();
    for x in 0..n {
        for y in 0..n {
            for (j, &t) in grid.nodes().iter().enumerate() {
                let mut v = k.time_derivative(x, y, t)? + mu[x] * kernel.get(x, y, j);
                for (u, w) in g.neighbors(x) {
                    v -= w * kernel.get(u, y, j);
                }
                heat_image.set(x, y, j, v);
            }
        }
    }
    Parametrix::new(kernel, heat_image, 0, None)
}

/// The graded grid used for embedded parametrices: steps grow geometrically
/// from 1e−6 at rate 1.25% until they reach 2.5e−3.
pub fn default_grid(t_max: f64) -> Result<TimeGrid> {
    TimeGrid::graded(t_max, 1e-6, 0.0125, 2.5e-3)
}

#[derive(Debug, Clone)]
pub struct EmbedResult {
    pub kernel: KernelSeries,
    pub series: NeumannSeriesResult,
    /// max |(H₀ ∗ F)(t_1)| over vertex pairs.
    pub correction_at_first_node: f64,
}

/// Runs the Neumann series on an averaged parametrix and assembles H_G.
///
/// The heat image of an averaged parametrix has a sharp initial transient
/// (large sup, small integral), so the factorial bound would demand far more
/// terms than needed; terms are summed until they are observed to be below `tol`.
pub fn embed_heat_kernel(p: &Parametrix, g: &WeightedGraph, tol: f64) -> Result<EmbedResult> {
    if p.n() != g.n() {
        return Err(HeatError::DimensionMismatch { expected: g.n(), got: p.n() });
    }
    let (kernel, series) = heat_kernel(p, Truncation::Observed { tol })?;
    let mut corr = 0.0f64;
    for x in 0..g.n() {
        for y in 0..g.n() {
            corr = corr.max((kernel.get(x, y, 1) - p.kernel.get(x, y, 1)).abs());
        }
    }
    Ok(EmbedResult { kernel, series, correction_at_first_node: corr })
}
