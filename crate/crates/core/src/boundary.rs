//! Evaluation of spectral fields and their normal derivatives at boundary
//! nodes (the trace operator `T_k*`), by exact non-uniform summation of the
//! Fourier series.
//!
//! The sum at an off-grid point uses the same Nyquist convention as
//! [`crate::spectral`]: the mode `-N/2` contributes `c cos(N x / 2)` along its
//! axis, so interpolation of a real field is real and reproduces grid samples.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::geometry::BoundaryDiscretization;
use crate::spectral::{apply_symbol, derivative_multiplier, fft_nd, Grid, GridField, OperatorSymbol};

/// Field traces `D_n^l f(s_i)` for `l = 0..=order`, stored block-wise:
/// entry `(l, i)` lives at `l * n_b + i`.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceBlock {
    order: usize,
    n_b: usize,
    data: Vec<f64>,
}

impl TraceBlock {
    pub fn new(order: usize, n_b: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), (order + 1) * n_b, "trace block size mismatch");
        Self { order, n_b, data }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn n_b(&self) -> usize {
        self.n_b
    }

    pub fn get(&self, l: usize, i: usize) -> f64 {
        self.data[l * self.n_b + i]
    }

    pub fn block(&self, l: usize) -> &[f64] {
        &self.data[l * self.n_b..(l + 1) * self.n_b]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Per-axis basis values `w_m(x)` at a coordinate, indexed by storage index.
fn axis_phases(grid: &Grid, x: f64) -> Vec<Complex64> {
    (0..grid.n())
        .map(|m| {
            let k = grid.wavenumber(m);
            if grid.is_nyquist(k) {
                Complex64::new((k as f64 * x).cos(), 0.0)
            } else {
                Complex64::from_polar(1.0, k as f64 * x)
            }
        })
        .collect()
}

/// Real part of `Σ_j c_j Π_a w_{j_a}(p_a)` at a single point.
fn eval_series_at(grid: &Grid, c: &[Complex64], p: &[f64]) -> f64 {
    let n = grid.n();
    let d = grid.dim();
    let phases: Vec<Vec<Complex64>> = p.iter().map(|&x| axis_phases(grid, x)).collect();
    if d == 1 {
        return c.iter().zip(&phases[0]).map(|(a, w)| a * w).sum::<Complex64>().re;
    }
    // contract the last axis first, then walk outwards
    let mut buf: Vec<Complex64> = c
        .chunks_exact(n)
        .map(|row| row.iter().zip(&phases[d - 1]).map(|(a, w)| a * w).sum())
        .collect();
    for axis in (0..d - 1).rev() {
        buf = buf
            .chunks_exact(n)
            .map(|row| row.iter().zip(&phases[axis]).map(|(a, w)| a * w).sum())
            .collect();
    }
    buf[0].re
}

/// Evaluate a coefficient array at arbitrary points.
pub fn eval_coefficients(grid: &Grid, c: &[Complex64], points: &[Vec<f64>]) -> Vec<f64> {
    points.par_iter().map(|p| eval_series_at(grid, c, p)).collect()
}

/// Interpolation `S*`: the Fourier series of `field` at every node.
pub fn eval_at_nodes(field: &GridField, nodes: &BoundaryDiscretization) -> Vec<f64> {
    let c = field.coefficient_vec();
    eval_coefficients(field.grid(), &c, &nodes.positions)
}

/// All multi-indices of length `d` with total order `l`.
pub fn multi_indices(d: usize, l: usize) -> Vec<Vec<usize>> {
    if d == 1 {
        return vec![vec![l]];
    }
    (0..=l)
        .rev()
        .flat_map(|first| {
            multi_indices(d - 1, l - first).into_iter().map(move |mut rest| {
                rest.insert(0, first);
                rest
            })
        })
        .collect()
}

pub fn multinomial(alpha: &[usize]) -> f64 {
    let fact = |n: usize| (1..=n).map(|i| i as f64).product::<f64>();
    let l: usize = alpha.iter().sum();
    alpha.iter().fold(fact(l), |acc, &a| acc / fact(a))
}

/// `T_k* f`: values and normal derivatives up to order `k` at every node,
/// built from spectral partial derivatives combined by the multinomial
/// expansion of `(n · ∇)^l`.
pub fn normal_derivative_traces(
    field: &GridField,
    nodes: &BoundaryDiscretization,
    k: usize,
) -> TraceBlock {
    let grid = *field.grid();
    let coeffs = field.to_coefficients();
    let nb = nodes.len();
    let mut data = vec![0.0; (k + 1) * nb];
    for l in 0..=k {
        for alpha in multi_indices(grid.dim(), l) {
            let values = if l == 0 {
                eval_at_nodes(&coeffs, nodes)
            } else {
                eval_at_nodes(&apply_symbol(&coeffs, &OperatorSymbol::Derivative(alpha.clone())), nodes)
            };
            let weight = multinomial(&alpha);
            for (i, v) in values.iter().enumerate() {
                let dir: f64 = nodes.normals[i]
                    .iter()
                    .zip(&alpha)
                    .map(|(a, &p)| a.powi(p as i32))
                    .product();
                data[l * nb + i] += weight * dir * v;
            }
        }
    }
    TraceBlock::new(k, nb, data)
}

/// Exact traces of `e^{i j·x}`: `(i j·n)^l e^{i j·s}`, block-ordered as in
/// [`TraceBlock`].
pub fn mode_trace_closed_form(j: &[i64], nodes: &BoundaryDiscretization, k: usize) -> Vec<Complex64> {
    let nb = nodes.len();
    let mut out = vec![Complex64::new(0.0, 0.0); (k + 1) * nb];
    for (i, (s, n)) in nodes.positions.iter().zip(&nodes.normals).enumerate() {
        let phase: f64 = j.iter().zip(s).map(|(&a, &x)| a as f64 * x).sum();
        let jn: f64 = j.iter().zip(n).map(|(&a, &x)| a as f64 * x).sum();
        let base = Complex64::from_polar(1.0, phase);
        let factor = Complex64::new(0.0, jn);
        let mut term = base;
        for l in 0..=k {
            out[l * nb + i] = term;
            term *= factor;
        }
    }
    out
}

/// Multiplier of `D_n^l` at wave vector `k` under the grid's Nyquist
/// convention.
pub fn normal_derivative_multiplier(k: &[i64], normal: &[f64], l: usize, n: usize) -> Complex64 {
    let nyq = -(n as i64 / 2);
    if l == 0 {
        return Complex64::new(1.0, 0.0);
    }
    if k.iter().all(|&x| x != nyq) {
        let kn: f64 = k.iter().zip(normal).map(|(&a, &b)| a as f64 * b).sum();
        return Complex64::new(0.0, kn).powu(l as u32);
    }
    multi_indices(k.len(), l)
        .iter()
        .map(|alpha| {
            let dir: f64 = normal.iter().zip(alpha).map(|(a, &p)| a.powi(p as i32)).product();
            derivative_multiplier(alpha, k, n) * (multinomial(alpha) * dir)
        })
        .sum()
}

/// Grid kernel `K` of the functional `v ↦ D_n^l (σ ⊙ v)(s)`, so that the
/// functional equals `N^{-d} Σ_m K_m v_m` for any real grid field `v`.
///
/// `symbol` must be real and even in `k`; `K` is then real.
pub fn trace_kernel(
    grid: &Grid,
    point: &[f64],
    normal: &[f64],
    l: usize,
    symbol: impl Fn(&[i64]) -> Complex64,
) -> Vec<f64> {
    let phases: Vec<Vec<Complex64>> = point.iter().map(|&x| axis_phases(grid, x)).collect();
    let mut idx = vec![0usize; grid.dim()];
    let mut k = vec![0i64; grid.dim()];
    let mut w: Vec<Complex64> = (0..grid.len())
        .map(|flat| {
            grid.unravel(flat, &mut idx);
            for (kk, &i) in k.iter_mut().zip(&idx) {
                *kk = grid.wavenumber(i);
            }
            let e: Complex64 = idx.iter().enumerate().map(|(a, &i)| phases[a][i]).product();
            symbol(&k) * normal_derivative_multiplier(&k, normal, l, grid.n()) * e
        })
        .collect();
    fft_nd(grid, &mut w, rustfft::FftDirection::Forward);
    w.into_iter().map(|z| z.re).collect()
}
