//! Trapezoidal convolution quadrature shared by the one-variable (Bessel) and
//! two-variable (graph) convolutions.
//!
//! On a uniform grid the rule is
//! `out_j = dt·(Σ_{i=1}^{j−1} a_{j−i} b_i + ½a_j b_0 + ½a_0 b_j)`, `out_0 = 0`.
//! That is a truncated polynomial product of the endpoint-halved sequences, so
//! long series go through an FFT of the padded sequences (same discrete sum,
//! different evaluation order).

use std::collections::BTreeMap;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Below this many nodes direct summation beats the FFT.
pub(crate) const FFT_THRESHOLD: usize = 96;

pub fn trapezoid_direct(a: &[f64], b: &[f64], dt: f64) -> Vec<f64> {
    let m1 = a.len();
    let mut out = vec![0.0; m1];
    trapezoid_direct_acc(a, b, dt, &mut out);
    out
}

/// Adds the trapezoidal convolution of `a` and `b` into `out`.
pub(crate) fn trapezoid_direct_acc(a: &[f64], b: &[f64], dt: f64, out: &mut [f64]) {
    let m1 = a.len();
    debug_assert_eq!(b.len(), m1);
    for j in 1..m1 {
        let mut s = 0.5 * (a[j] * b[0] + a[0] * b[j]);
        for i in 1..j {
            s += a[j - i] * b[i];
        }
        out[j] += dt * s;
    }
}

/// Complex FFT sized for linear convolution of two length-`m1` sequences.
#[derive(Clone)]
pub struct FftEngine {
    m1: usize,
    len: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for FftEngine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FftEngine").field("m1", &self.m1).field("len", &self.len).finish()
    }
}

impl FftEngine {
    pub fn new(m1: usize) -> Self {
        let len = (2 * m1).next_power_of_two();
        let mut planner = FftPlanner::new();
        Self { m1, len, fwd: planner.plan_fft_forward(len), inv: planner.plan_fft_inverse(len) }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Spectrum of the sequence with its first sample halved.
    pub fn forward(&self, a: &[f64]) -> Vec<Complex64> {
        debug_assert_eq!(a.len(), self.m1);
        let mut buf = vec![Complex64::new(0.0, 0.0); self.len];
        for (d, &v) in buf.iter_mut().zip(a) {
            d.re = v;
        }
        buf[0].re *= 0.5;
        self.fwd.process(&mut buf);
        buf
    }

    /// Writes the convolution encoded by the product spectrum `spec` into `out`
    /// (destroys `spec`).
    pub fn inverse_into(&self, spec: &mut [Complex64], dt: f64, out: &mut [f64]) {
        self.inv.process(spec);
        let scale = dt / self.len as f64;
        out[0] = 0.0;
        for j in 1..self.m1 {
            out[j] = spec[j].re * scale;
        }
    }
}

/// One-variable trapezoidal convolution on a fixed uniform grid.
pub struct ScalarConvolver {
    fft: Option<FftEngine>,
}

impl ScalarConvolver {
    pub fn new(m1: usize) -> Self {
        Self { fft: (m1 > FFT_THRESHOLD).then(|| FftEngine::new(m1)) }
    }

    pub fn convolve(&self, a: &[f64], b: &[f64], dt: f64) -> Vec<f64> {
        match &self.fft {
            None => trapezoid_direct(a, b, dt),
            Some(e) => {
                let mut fa = e.forward(a);
                let fb = e.forward(b);
                for (x, y) in fa.iter_mut().zip(&fb) {
                    *x *= y;
                }
                let mut out = vec![0.0; a.len()];
                e.inverse_into(&mut fa, dt, &mut out);
                out
            }
        }
    }
}

/// Quadrature weights for convolution on a non-uniform grid.
///
/// For node t_j the integral ∫₀^{t_j} A(t_j − r) B(r) dr is taken with the
/// trapezoidal rule on the union of both factors' sample points,
/// {t_i} ∪ {t_j − t_i}, each factor linearly interpolated between its own
/// nodes. Entry j lists `(p, q, c)` with out_j = Σ c·A_p·B_q.
pub(crate) fn graded_weights(nodes: &[f64]) -> Vec<Vec<(u32, u32, f64)>> {
    let m1 = nodes.len();
    let mut all = vec![Vec::new(); m1];
    for j in 1..m1 {
        let tj = nodes[j];
        let eps = 1e-13 * tj;
        let mut pts: Vec<f64> = Vec::with_capacity(2 * j + 2);
        pts.extend_from_slice(&nodes[..=j]);
        pts.extend(nodes[..=j].iter().map(|&t| tj - t));
        pts.sort_by(f64::total_cmp);
        pts.dedup_by(|a, b| (*a - *b).abs() <= eps);
        // clamp the merged ends exactly
        pts[0] = 0.0;
        *pts.last_mut().unwrap() = tj;

        let mut acc: BTreeMap<(u32, u32), f64> = BTreeMap::new();
        let np = pts.len();
        for k in 0..np {
            let lo = if k == 0 { pts[0] } else { pts[k - 1] };
            let hi = if k + 1 == np { pts[np - 1] } else { pts[k + 1] };
            let w = 0.5 * (hi - lo);
            if w == 0.0 {
                continue;
            }
            let r = pts[k];
            let a = interp(nodes, j, tj - r, eps);
            let b = interp(nodes, j, r, eps);
            for &(p, wa) in a.iter().flatten() {
                for &(q, wb) in b.iter().flatten() {
                    *acc.entry((p as u32, q as u32)).or_insert(0.0) += w * wa * wb;
                }
            }
        }
        all[j] = acc.into_iter().filter(|(_, c)| *c != 0.0).map(|((p, q), c)| (p, q, c)).collect();
    }
    all
}

/// Linear interpolation stencil for s ∈ [0, nodes[j]].
fn interp(nodes: &[f64], j: usize, s: f64, eps: f64) -> [Option<(usize, f64)>; 2] {
    let s = s.clamp(0.0, nodes[j]);
    let p = nodes[..=j].partition_point(|&t| t <= s + eps).saturating_sub(1);
    if (nodes[p] - s).abs() <= eps || p == j {
        return [Some((p, 1.0)), None];
    }
    let (t0, t1) = (nodes[p], nodes[p + 1]);
    let alpha = (t1 - s) / (t1 - t0);
    [Some((p, alpha)), Some((p + 1, 1.0 - alpha))]
}

#[cfg(test)]
fn graded_apply(weights: &[(u32, u32, f64)], a: &[f64], b: &[f64]) -> f64 {
    weights.iter().map(|&(p, q, c)| c * a[p as usize] * b[q as usize]).sum()
}
