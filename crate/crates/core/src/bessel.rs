//! Integer-order modified Bessel functions I_n and the lattice heat kernels
//! built from them.
//!
//! Only nonnegative orders are exposed. Negative orders reduce to these
//! through the reflection I_{−n} = I_n.

use crate::error::{HeatError, Result};
use crate::graph::VertexId;
use crate::quad;
use crate::series::{ClosedFormKernel, KernelFamily};
use crate::util::ln_factorial;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesselEvaluator {
    pub x_max: f64,
    /// Accuracy target: |error| ≤ tol · max(1, I_n(x)).
    pub tol: f64,
}

impl Default for BesselEvaluator {
    fn default() -> Self {
        Self { x_max: 40.0, tol: 1e-12 }
    }
}

impl BesselEvaluator {
    fn check(&self, x: f64) -> Result<()> {
        if !(0.0..=self.x_max).contains(&x) {
            return Err(HeatError::Domain(format!("Bessel argument {x} outside [0, {}]", self.x_max)));
        }
        Ok(())
    }

    pub fn besseli(&self, n: u32, x: f64) -> Result<f64> {
        Ok(self.besseli_scaled(n, x)? * x.exp())
    }

    /// e^{−x} I_n(x).
    pub fn besseli_scaled(&self, n: u32, x: f64) -> Result<f64> {
        self.check(x)?;
        if x == 0.0 {
            return Ok(if n == 0 { 1.0 } else { 0.0 });
        }
        if x <= 2.0 * (n as f64 + 1.0) {
            Ok(series_scaled(n, x))
        } else {
            Ok(miller_scaled(n, x)[n as usize])
        }
    }

    /// e^{−x} I_k(x) for k = 0..=n_max in one backward sweep.
    pub fn besseli_scaled_orders(&self, n_max: u32, x: f64) -> Result<Vec<f64>> {
        self.check(x)?;
        if x == 0.0 {
            let mut v = vec![0.0; n_max as usize + 1];
            v[0] = 1.0;
            return Ok(v);
        }
        let mut v = miller_scaled(n_max, x);
        v.truncate(n_max as usize + 1);
        Ok(v)
    }
}

/// Power series Σ_k (x/2)^{2k+n} / (k!(k+n)!), all terms positive.
fn series_scaled(n: u32, x: f64) -> f64 {
    let h = 0.5 * x;
    let ln_first = n as f64 * h.ln() - ln_factorial(n as u64) - x;
    let q = h * h;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    loop {
        term *= q / (k * (k + n as f64));
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
        k += 1.0;
    }
    sum * ln_first.exp()
}

/// Backward recurrence I_{k−1} = (2k/x) I_k + I_{k+1}, normalised by
/// I_0 + 2Σ_{k≥1} I_k = e^x. Returns scaled values for orders 0..=n_max
/// (the vector may be longer).
fn miller_scaled(n_max: u32, x: f64) -> Vec<f64> {
    let start = n_max as usize + x.ceil() as usize + 60;
    let mut f = vec![0.0; start + 2];
    f[start] = 1e-280;
    let mut sum = 0.0;
    for k in (1..=start).rev() {
        f[k - 1] = (2.0 * k as f64 / x) * f[k] + f[k + 1];
        sum += 2.0 * f[k];
        if f[k - 1] > 1e250 {
            for v in f[k - 1..].iter_mut() {
                *v *= 1e-250;
            }
            sum *= 1e-250;
        }
    }
    sum += f[0];
    f.truncate(start + 1);
    for v in f.iter_mut() {
        *v /= sum;
    }
    f
}

pub fn besseli(n: u32, x: f64) -> Result<f64> {
    BesselEvaluator::default().besseli(n, x)
}

pub fn besseli_scaled(n: u32, x: f64) -> Result<f64> {
    BesselEvaluator::default().besseli_scaled(n, x)
}

/// (x/2)^n e^x / n!, an upper bound for I_n(x).
pub fn bessel_tail_bound(n: u32, x: f64) -> f64 {
    if x == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    (n as f64 * (0.5 * x).ln() + x - ln_factorial(n as u64)).exp()
}

/// Upper bound for Σ_{k≥n0} I_k(x): the termwise bounds shrink at least
/// geometrically with ratio x/(2(n0+1)) from n0 on. Infinite if that ratio is ≥ 1.
pub fn bessel_tail_sum_bound(n0: u32, x: f64) -> f64 {
    let r = x / (2.0 * (n0 as f64 + 1.0));
    if r >= 1.0 {
        return f64::INFINITY;
    }
    bessel_tail_bound(n0, x) / (1.0 - r)
}

/// e^{−2t} I_{|v−w|}(2t), the heat kernel of Z.
pub fn kernel_z(v: i64, w: i64, t: f64) -> Result<f64> {
    check_time(t)?;
    besseli_scaled((v - w).unsigned_abs() as u32, 2.0 * t)
}

/// Heat kernel of the half-line {0, 1, …}: e^{−2t}(I_{|v−w|}(2t) + I_{v+w+1}(2t)).
pub fn kernel_halfline(v: i64, w: i64, t: f64) -> Result<f64> {
    check_time(t)?;
    check_nonneg(v, w)?;
    let x = 2.0 * t;
    Ok(besseli_scaled((v - w).unsigned_abs() as u32, x)? + besseli_scaled((v + w + 1) as u32, x)?)
}

/// Dirichlet heat kernel of the half-line: e^{−2t}(I_{x−y}(2t) − I_{x+y}(2t)).
pub fn kernel_halfline_dirichlet(x: i64, y: i64, t: f64) -> Result<f64> {
    check_time(t)?;
    check_nonneg(x, y)?;
    if x == 0 || y == 0 {
        return Ok(0.0);
    }
    let s = 2.0 * t;
    Ok(besseli_scaled((x - y).unsigned_abs() as u32, s)? - besseli_scaled((x + y) as u32, s)?)
}

fn check_time(t: f64) -> Result<()> {
    if t.is_nan() || t < 0.0 {
        return Err(HeatError::Domain(format!("time {t} must be nonnegative")));
    }
    Ok(())
}

fn check_nonneg(a: i64, b: i64) -> Result<()> {
    if a < 0 || b < 0 {
        return Err(HeatError::Domain(format!("half-line vertices must be nonnegative, got ({a}, {b})")));
    }
    Ok(())
}

/// Trapezoidal ∫₀ˣ I_m(τ) I_n(x−τ) dτ on `quad_steps` uniform panels.
pub fn bessel_time_convolve(m: u32, n: u32, x: f64, quad_steps: usize) -> Result<f64> {
    if quad_steps < 2 {
        return Err(HeatError::Contract("quad_steps must be at least 2".into()));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    let h = x / quad_steps as f64;
    let ev = BesselEvaluator::default();
    let mut sum = 0.0;
    for i in 0..=quad_steps {
        let tau = i as f64 * h;
        let f = ev.besseli(m, tau)? * ev.besseli(n, x - tau)?;
        sum += if i == 0 || i == quad_steps { 0.5 * f } else { f };
    }
    Ok(sum * h)
}

/// 2Σ_{k=0}^{K} I_{m+n+2k+1}(x) and a certified bound on the dropped tail.
pub fn watson_series(m: u32, n: u32, x: f64, terms: u32) -> Result<(f64, f64)> {
    let ev = BesselEvaluator::default();
    let mut sum = 0.0;
    for k in 0..=terms {
        sum += 2.0 * ev.besseli(m + n + 2 * k + 1, x)?;
    }
    let tail = 2.0 * bessel_tail_sum_bound(m + n + 2 * terms + 3, x);
    Ok((sum, tail))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityReport {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    /// Certified bound on the omitted part of the right-hand side (∞ if unavailable).
    pub tail: f64,
}

/// |I_{x+y}(t) − Σ_{ℓ=0}^{L} (−1)^ℓ 2^{−ℓ−1} (I_1^{∗ℓ} ∗ I_{x−1} ∗ I_y)(t)|,
/// with every one-variable convolution done by the trapezoidal rule on a
/// uniform grid of `quad_steps` panels over [0, t].
pub fn verify_intro_identity(x: u32, y: u32, t: f64, order: usize, quad_steps: usize) -> Result<IdentityReport> {
    if x < 1 {
        return Err(HeatError::Domain("intro identity needs x ≥ 1".into()));
    }
    if quad_steps < 2 {
        return Err(HeatError::Contract("quad_steps must be at least 2".into()));
    }
    let ev = BesselEvaluator::default();
    let lhs = ev.besseli(x + y, t)?;
    if t == 0.0 {
        return Ok(IdentityReport { lhs, rhs: 0.0, residual: lhs.abs(), tail: 0.0 });
    }
    let h = t / quad_steps as f64;
    let sample = |order: u32| -> Result<Vec<f64>> { (0..=quad_steps).map(|i| ev.besseli(order, i as f64 * h)).collect() };
    let i1 = sample(1)?;
    let conv = quad::ScalarConvolver::new(quad_steps + 1);
    let mut term = conv.convolve(&sample(x - 1)?, &sample(y)?, h);
    let mut rhs = 0.0;
    let mut weight = 0.5;
    for l in 0..=order {
        if l > 0 {
            term = conv.convolve(&i1, &term, h);
            weight *= -0.5;
        }
        rhs += weight * term[quad_steps];
    }
    // |(I_1^{∗ℓ} ∗ g)(t)| ≤ (∫₀ᵗ I_1)^ℓ sup|g| = (I_0(t) − 1)^ℓ sup|g| for the dropped ℓ > L.
    let q = 0.5 * (ev.besseli(0, t)? - 1.0);
    let g_sup = ev.besseli(x - 1, t)? * ev.besseli(y, t)? * t;
    let tail = if q < 1.0 { 0.5 * g_sup * q.powi(order as i32 + 1) / (1.0 - q) } else { f64::INFINITY };
    Ok(IdentityReport { lhs, rhs, residual: (lhs - rhs).abs(), tail })
}

/// Boundary behaviour of a lattice kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lattice {
    /// The full integer line.
    Integers,
    /// {0, 1, …} with its natural (reflecting) heat kernel.
    HalfLine,
    /// {0, 1, …} with the kernel vanishing at 0.
    DirichletHalfLine,
}

/// A lattice heat kernel evaluated on graph vertices carrying integer labels.
#[derive(Debug, Clone)]
pub struct LatticeKernel {
    labels: Vec<i64>,
    lattice: Lattice,
    eval: BesselEvaluator,
}

impl LatticeKernel {
    pub fn new(labels: Vec<i64>, lattice: Lattice) -> Result<Self> {
        if lattice != Lattice::Integers && labels.iter().any(|&l| l < 0) {
            return Err(HeatError::Domain("half-line labels must be nonnegative".into()));
        }
        Ok(Self { labels, lattice, eval: BesselEvaluator::default() })
    }

    /// Labels `start, start+1, …` for `count` consecutive vertices.
    pub fn consecutive(start: i64, count: usize, lattice: Lattice) -> Result<Self> {
        Self::new((0..count as i64).map(|i| start + i).collect(), lattice)
    }

    pub fn labels(&self) -> &[i64] {
        &self.labels
    }

    fn orders(&self, a: i64, b: i64) -> (u32, Option<(u32, f64)>) {
        let diff = (a - b).unsigned_abs() as u32;
        match self.lattice {
            Lattice::Integers => (diff, None),
            Lattice::HalfLine => (diff, Some(((a + b + 1) as u32, 1.0))),
            Lattice::DirichletHalfLine => (diff, Some(((a + b) as u32, -1.0))),
        }
    }

    fn label(&self, v: VertexId) -> Result<i64> {
        self.labels.get(v).copied().ok_or_else(|| HeatError::Domain(format!("vertex {v} has no lattice label")))
    }

    fn combine(&self, x: VertexId, y: VertexId, table: &dyn Fn(u32) -> f64) -> Result<f64> {
        let (a, b) = (self.label(x)?, self.label(y)?);
        if self.lattice == Lattice::DirichletHalfLine && (a == 0 || b == 0) {
            return Ok(0.0);
        }
        let (d, image) = self.orders(a, b);
        let mut v = table(d);
        if let Some((k, s)) = image {
            v += s * table(k);
        }
        Ok(v)
    }
}

/// d/dt e^{−2t} I_k(2t) = e^{−2t}(I_{k−1} + I_{k+1} − 2I_k)(2t), with I_{−1} = I_1.
fn scaled_derivative(ive: &[f64], k: u32) -> f64 {
    let k = k as usize;
    let below = if k == 0 { ive[1] } else { ive[k - 1] };
    below + ive[k + 1] - 2.0 * ive[k]
}

impl ClosedFormKernel for LatticeKernel {
    fn family(&self) -> KernelFamily {
        KernelFamily::Bessel
    }

    fn value(&self, x: VertexId, y: VertexId, t: f64) -> Result<f64> {
        check_time(t)?;
        let (a, b) = (self.label(x)?, self.label(y)?);
        let (d, image) = self.orders(a, b);
        let top = image.map_or(d, |(k, _)| k.max(d));
        let table = self.eval.besseli_scaled_orders(top, 2.0 * t)?;
        self.combine(x, y, &|k| table[k as usize])
    }

    fn time_derivative(&self, x: VertexId, y: VertexId, t: f64) -> Result<f64> {
        check_time(t)?;
        let (a, b) = (self.label(x)?, self.label(y)?);
        let (d, image) = self.orders(a, b);
        let top = image.map_or(d, |(k, _)| k.max(d)) + 1;
        let table = self.eval.besseli_scaled_orders(top.max(1), 2.0 * t)?;
        self.combine(x, y, &|k| scaled_derivative(&table, k))
    }

    fn block(&self, rows: &[VertexId], cols: &[VertexId], t: f64) -> Result<Vec<f64>> {
        check_time(t)?;
        let mut top = 0u32;
        for &x in rows {
            for &y in cols {
                let (d, image) = self.orders(self.label(x)?, self.label(y)?);
                top = top.max(image.map_or(d, |(k, _)| k.max(d)));
            }
        }
        let table = self.eval.besseli_scaled_orders(top, 2.0 * t)?;
        let mut out = Vec::with_capacity(rows.len() * cols.len());
        for &x in rows {
            for &y in cols {
                out.push(self.combine(x, y, &|k| table[k as usize])?);
            }
        }
        Ok(out)
    }
}
