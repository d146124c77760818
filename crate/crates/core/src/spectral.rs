//! Uniform periodic grids on `[0, 2π)^d` and diagonal Fourier operators.
//!
//! Coefficients are normalized as `c_j = N^{-d} Σ_m f(x_m) e^{-i j·x_m}` and
//! stored in FFT order: the flat index of axis value `m` carries wavenumber
//! `m` for `m < N/2` and `m - N` otherwise, so each axis spans `[-N/2, N/2)`.
//! The Nyquist wavenumber `-N/2` is treated as the real mode `cos(N x / 2)`:
//! odd-order derivative symbols vanish there.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::error::{Result, SfeError};

/// Relative tolerance for conjugate symmetry of coefficient arrays.
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Grid {
    dim: usize,
    n: usize,
}

impl Grid {
    pub fn new(dim: usize, n: usize) -> Result<Self> {
        if dim == 0 {
            return Err(SfeError::InvalidGrid("dimension must be at least 1".into()));
        }
        if n < 4 || !n.is_power_of_two() {
            return Err(SfeError::InvalidGrid(format!(
                "points per axis must be a power of two >= 4, got {n}"
            )));
        }
        Ok(Self { dim, n })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Total number of grid nodes, `N^d`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.n as f64
    }

    /// Quadrature weight of a single node, `Δx^d`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn coordinate(&self, m: usize) -> f64 {
        m as f64 * self.spacing()
    }

    /// Row-major decomposition of a flat index into per-axis indices.
    pub fn unravel(&self, mut flat: usize, out: &mut [usize]) {
        for a in (0..self.dim).rev() {
            out[a] = flat % self.n;
            flat /= self.n;
        }
    }

    pub fn ravel(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.n + i)
    }

    pub fn point(&self, flat: usize, out: &mut [f64]) {
        let mut idx = vec![0; self.dim];
        self.unravel(flat, &mut idx);
        for (o, &i) in out.iter_mut().zip(&idx) {
            *o = self.coordinate(i);
        }
    }

    /// Coordinates of every node, row-major.
    pub fn points(&self) -> Vec<Vec<f64>> {
        let mut p = vec![0.0; self.dim];
        (0..self.len())
            .map(|f| {
                self.point(f, &mut p);
                p.clone()
            })
            .collect()
    }

    /// Signed wavenumber carried by axis index `m`.
    pub fn wavenumber(&self, m: usize) -> i64 {
        if m < self.n / 2 {
            m as i64
        } else {
            m as i64 - self.n as i64
        }
    }

    pub fn is_nyquist(&self, k: i64) -> bool {
        k == -(self.n as i64 / 2)
    }

    pub fn wave_vector(&self, flat: usize, out: &mut [i64]) {
        let mut idx = vec![0; self.dim];
        self.unravel(flat, &mut idx);
        for (o, &i) in out.iter_mut().zip(&idx) {
            *o = self.wavenumber(i);
        }
    }

    /// Flat storage index of wave vector `k` (taken modulo `N` per axis).
    pub fn index_of(&self, k: &[i64]) -> usize {
        let n = self.n as i64;
        k.iter()
            .fold(0, |acc, &kj| acc * self.n + kj.rem_euclid(n) as usize)
    }

    /// Flat index of the refined-grid node coinciding with node `flat` of
    /// this grid. `fine.n()` must be a multiple of `self.n()`.
    pub fn nested_index(&self, flat: usize, fine: &Grid) -> usize {
        let ratio = fine.n / self.n;
        let mut idx = vec![0; self.dim];
        self.unravel(flat, &mut idx);
        for i in idx.iter_mut() {
            *i *= ratio;
        }
        fine.ravel(&idx)
    }

    pub fn check_same(&self, other: &Grid) -> Result<()> {
        if self != other {
            return Err(SfeError::GridMismatch {
                expected: self.n,
                expected_dim: self.dim,
                found: other.n,
                found_dim: other.dim,
            });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Representation {
    Values(Vec<f64>),
    Coefficients(Vec<Complex64>),
}

/// A real field on a [`Grid`], held either as samples or as Fourier
/// coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    grid: Grid,
    repr: Representation,
}

impl GridField {
    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(SfeError::InvalidParameter(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(Self {
            grid,
            repr: Representation::Values(values),
        })
    }

    pub fn from_coefficients(grid: Grid, coefficients: Vec<Complex64>) -> Result<Self> {
        if coefficients.len() != grid.len() {
            return Err(SfeError::InvalidParameter(format!(
                "expected {} coefficients, got {}",
                grid.len(),
                coefficients.len()
            )));
        }
        Ok(Self {
            grid,
            repr: Representation::Coefficients(coefficients),
        })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(&[f64]) -> f64) -> Self {
        let mut p = vec![0.0; grid.dim()];
        let values = (0..grid.len())
            .map(|flat| {
                grid.point(flat, &mut p);
                f(&p)
            })
            .collect();
        Self {
            grid,
            repr: Representation::Values(values),
        }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            repr: Representation::Values(vec![0.0; grid.len()]),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn representation(&self) -> &Representation {
        &self.repr
    }

    pub fn values(&self) -> Option<&[f64]> {
        match &self.repr {
            Representation::Values(v) => Some(v),
            Representation::Coefficients(_) => None,
        }
    }

    pub fn coefficients(&self) -> Option<&[Complex64]> {
        match &self.repr {
            Representation::Coefficients(c) => Some(c),
            Representation::Values(_) => None,
        }
    }

    pub fn to_coefficients(&self) -> GridField {
        self.clone().into_coefficients()
    }

    pub fn into_coefficients(self) -> GridField {
        match self.repr {
            Representation::Coefficients(_) => self,
            Representation::Values(v) => {
                let mut data: Vec<Complex64> = v.iter().map(|&x| Complex64::new(x, 0.0)).collect();
                fft_nd(&self.grid, &mut data, FftDirection::Forward);
                let scale = 1.0 / self.grid.len() as f64;
                data.iter_mut().for_each(|c| *c *= scale);
                symmetrize(&self.grid, &mut data);
                GridField {
                    grid: self.grid,
                    repr: Representation::Coefficients(data),
                }
            }
        }
    }

    pub fn to_values(&self) -> Result<GridField> {
        self.clone().into_values()
    }

    pub fn into_values(self) -> Result<GridField> {
        match self.repr {
            Representation::Values(_) => Ok(self),
            Representation::Coefficients(mut c) => {
                let deviation = symmetry_deviation(&self.grid, &c);
                let scale = c.iter().fold(0.0f64, |m, z| m.max(z.norm()));
                if deviation > SYMMETRY_TOLERANCE * scale {
                    return Err(SfeError::SymmetryViolation { deviation });
                }
                fft_nd(&self.grid, &mut c, FftDirection::Inverse);
                Ok(GridField {
                    grid: self.grid,
                    repr: Representation::Values(c.into_iter().map(|z| z.re).collect()),
                })
            }
        }
    }

    /// Sample vector, transforming if necessary.
    pub fn value_vec(&self) -> Result<Vec<f64>> {
        match &self.repr {
            Representation::Values(v) => Ok(v.clone()),
            Representation::Coefficients(_) => match self.to_values()?.repr {
                Representation::Values(v) => Ok(v),
                Representation::Coefficients(_) => unreachable!(),
            },
        }
    }

    pub fn coefficient_vec(&self) -> Vec<Complex64> {
        match self.to_coefficients().repr {
            Representation::Coefficients(c) => c,
            Representation::Values(_) => unreachable!(),
        }
    }

    /// Grid average `N^{-d} Σ_m f(x_m)`, i.e. the zero mode.
    pub fn mean(&self) -> f64 {
        match &self.repr {
            Representation::Values(v) => v.iter().sum::<f64>() / v.len() as f64,
            Representation::Coefficients(c) => c[0].re,
        }
    }

    /// `Σ_i w_i f_i` over fields sharing one grid, in value space.
    pub fn linear_combination(terms: &[(f64, &GridField)]) -> Result<GridField> {
        let grid = *terms
            .first()
            .ok_or_else(|| SfeError::InvalidParameter("empty linear combination".into()))?
            .1
            .grid();
        let mut acc = vec![0.0; grid.len()];
        for (w, f) in terms {
            grid.check_same(f.grid())?;
            let v = f.value_vec()?;
            acc.iter_mut().zip(&v).for_each(|(a, x)| *a += w * x);
        }
        GridField::from_values(grid, acc)
    }
}

/// Replace each pair by `(c_j + conj(c_{-j}))/2`, which is exactly
/// conjugate-symmetric in floating point.
fn symmetrize(grid: &Grid, c: &mut [Complex64]) {
    let mut k = vec![0i64; grid.dim()];
    for flat in 0..c.len() {
        grid.wave_vector(flat, &mut k);
        k.iter_mut().for_each(|x| *x = -*x);
        let partner = grid.index_of(&k);
        if partner >= flat {
            let avg = (c[flat] + c[partner].conj()) * 0.5;
            c[flat] = avg;
            c[partner] = avg.conj();
        }
    }
}

/// `max_j |c_j - conj(c_{-j})|`.
pub fn symmetry_deviation(grid: &Grid, c: &[Complex64]) -> f64 {
    let mut k = vec![0i64; grid.dim()];
    let mut dev = 0.0f64;
    for (flat, cj) in c.iter().enumerate() {
        grid.wave_vector(flat, &mut k);
        k.iter_mut().for_each(|x| *x = -*x);
        let partner = c[grid.index_of(&k)];
        dev = dev.max((cj - partner.conj()).norm());
    }
    dev
}

/// Constant-coefficient operators, represented by their Fourier symbols.
#[derive(Clone, Debug, PartialEq)]
pub enum OperatorSymbol {
    /// `Δ`, symbol `-|j|²`.
    Laplacian,
    /// `I - αΔ`, symbol `1 + α|j|²`.
    Helmholtz { alpha: f64 },
    /// `∂^α` for a multi-index, symbol `Π (i j_a)^{α_a}`.
    Derivative(Vec<usize>),
    /// `-Δ - σ`, symbol `|j|² - σ`.
    ShiftedLaplacian { shift: f64 },
}

impl OperatorSymbol {
    /// Multiplier `σ(j)` for wave vector `k` on a grid with `n` points per axis.
    pub fn multiplier(&self, k: &[i64], n: usize) -> Complex64 {
        let norm2 = || k.iter().map(|&x| (x * x) as f64).sum::<f64>();
        match self {
            OperatorSymbol::Laplacian => Complex64::new(-norm2(), 0.0),
            OperatorSymbol::Helmholtz { alpha } => Complex64::new(1.0 + alpha * norm2(), 0.0),
            OperatorSymbol::ShiftedLaplacian { shift } => Complex64::new(norm2() - shift, 0.0),
            OperatorSymbol::Derivative(alpha) => derivative_multiplier(alpha, k, n),
        }
    }

    /// Whether the symbol is real and even in `j` (self-adjoint, no odd
    /// derivatives), which makes its grid kernels real.
    pub fn is_even(&self) -> bool {
        match self {
            OperatorSymbol::Derivative(alpha) => alpha.iter().all(|a| a % 2 == 0),
            _ => true,
        }
    }
}

/// `Π_a (i k_a)^{α_a}`, with odd powers of the Nyquist wavenumber set to zero.
pub fn derivative_multiplier(alpha: &[usize], k: &[i64], n: usize) -> Complex64 {
    let nyquist = -(n as i64 / 2);
    let mut m = Complex64::new(1.0, 0.0);
    for (&a, &kj) in alpha.iter().zip(k) {
        if a == 0 {
            continue;
        }
        if kj == nyquist && a % 2 == 1 {
            return Complex64::new(0.0, 0.0);
        }
        m *= Complex64::new(0.0, kj as f64).powu(a as u32);
    }
    m
}

/// Coefficient-wise product `c_j <- σ(j) c_j`. Output is in coefficient space.
pub fn apply_symbol(field: &GridField, symbol: &OperatorSymbol) -> GridField {
    let grid = *field.grid();
    let mut c = field.coefficient_vec();
    let mut k = vec![0i64; grid.dim()];
    for (flat, cj) in c.iter_mut().enumerate() {
        grid.wave_vector(flat, &mut k);
        *cj *= symbol.multiplier(&k, grid.n());
    }
    GridField {
        grid,
        repr: Representation::Coefficients(c),
    }
}

/// Zero-mean inverse of the Laplacian: `c_j / (-|j|²)` for `j != 0`, zero mean.
pub fn invert_zero_mean_laplacian(field: &GridField) -> GridField {
    let grid = *field.grid();
    let mut c = field.coefficient_vec();
    let mut k = vec![0i64; grid.dim()];
    for (flat, cj) in c.iter_mut().enumerate() {
        grid.wave_vector(flat, &mut k);
        let norm2: i64 = k.iter().map(|x| x * x).sum();
        if norm2 == 0 {
            *cj = Complex64::new(0.0, 0.0);
        } else {
            *cj /= -(norm2 as f64);
        }
    }
    GridField {
        grid,
        repr: Representation::Coefficients(c),
    }
}

/// Inverse of `I - αΔ`, `c_j / (1 + α|j|²)`.
pub fn invert_helmholtz(field: &GridField, alpha: f64) -> Result<GridField> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(SfeError::InvalidParameter(format!(
            "Helmholtz parameter must be positive, got {alpha}"
        )));
    }
    invert_symbol(field, &OperatorSymbol::Helmholtz { alpha })
}

/// Term-wise division by an operator symbol that has no zeros on the grid.
pub fn invert_symbol(field: &GridField, symbol: &OperatorSymbol) -> Result<GridField> {
    let grid = *field.grid();
    let mut c = field.coefficient_vec();
    let mut k = vec![0i64; grid.dim()];
    for (flat, cj) in c.iter_mut().enumerate() {
        grid.wave_vector(flat, &mut k);
        let m = symbol.multiplier(&k, grid.n());
        if m.norm() == 0.0 {
            return Err(SfeError::Configuration(format!(
                "operator {symbol:?} is not invertible on the torus (zero symbol at {k:?})"
            )));
        }
        *cj /= m;
    }
    Ok(GridField {
        grid,
        repr: Representation::Coefficients(c),
    })
}

type PlanCache = Mutex<HashMap<(usize, bool), Arc<dyn Fft<f64>>>>;

fn plan(n: usize, direction: FftDirection) -> Arc<dyn Fft<f64>> {
    static PLANS: OnceLock<PlanCache> = OnceLock::new();
    let key = (n, direction == FftDirection::Forward);
    let mut cache = PLANS
        .get_or_init(|| Mutex::new(HashMap::new()))
        .lock()
        .expect("fft plan cache poisoned");
    cache
        .entry(key)
        .or_insert_with(|| FftPlanner::new().plan_fft(n, direction))
        .clone()
}

/// Unnormalized d-dimensional DFT in place (row-major layout).
pub fn fft_nd(grid: &Grid, data: &mut [Complex64], direction: FftDirection) {
    let n = grid.n();
    let fft = plan(n, direction);
    let d = grid.dim();
    let total = data.len();
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    // last axis is contiguous
    fft.process_with_scratch(data, &mut scratch);
    if d == 1 {
        return;
    }
    let mut lines = vec![Complex64::new(0.0, 0.0); total];
    for axis in 0..d - 1 {
        let stride = n.pow((d - 1 - axis) as u32);
        let block = stride * n;
        // gather every line along `axis` into contiguous storage
        let mut line = 0;
        for start in (0..total).step_by(block) {
            for offset in 0..stride {
                let base = start + offset;
                for m in 0..n {
                    lines[line * n + m] = data[base + m * stride];
                }
                line += 1;
            }
        }
        fft.process_with_scratch(&mut lines, &mut scratch);
        let mut line = 0;
        for start in (0..total).step_by(block) {
            for offset in 0..stride {
                let base = start + offset;
                for m in 0..n {
                    data[base + m * stride] = lines[line * n + m];
                }
                line += 1;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid1(n: usize) -> Grid {
        Grid::new(1, n).unwrap()
    }

    #[test]
    fn grid_rejects_bad_sizes() {
        assert!(Grid::new(1, 6).is_err());
        assert!(Grid::new(1, 2).is_err());
        assert!(Grid::new(0, 8).is_err());
        assert!(Grid::new(2, 16).is_ok());
    }

    #[test]
    fn cosine_has_two_half_coefficients() {
        let g = grid1(8);
        let c = GridField::from_fn(g, |x| x[0].cos()).coefficient_vec();
        for (flat, cj) in c.iter().enumerate() {
            let k = g.wavenumber(flat);
            let expect = if k.abs() == 1 { 0.5 } else { 0.0 };
            assert!((cj - Complex64::new(expect, 0.0)).norm() < 1e-15, "k={k}");
        }
    }

    #[test]
    fn constant_field_is_zero_mode() {
        let g = grid1(8);
        let c = GridField::from_fn(g, |_| 3.0).coefficient_vec();
        assert!((c[0].re - 3.0).abs() < 1e-15);
        assert!(c[1..].iter().all(|z| z.norm() < 1e-15));
    }

    #[test]
    fn coefficients_to_values() {
        let g = grid1(8);
        let mut c = vec![Complex64::new(0.0, 0.0); 8];
        c[1] = Complex64::new(0.5, 0.0);
        c[7] = Complex64::new(0.5, 0.0);
        let v = GridField::from_coefficients(g, c).unwrap().value_vec().unwrap();
        for (m, x) in v.iter().enumerate() {
            assert!((x - g.coordinate(m).cos()).abs() < 1e-15);
        }
        let mut c = vec![Complex64::new(0.0, 0.0); 8];
        c[0] = Complex64::new(2.0, 0.0);
        let v = GridField::from_coefficients(g, c).unwrap().value_vec().unwrap();
        assert!(v.iter().all(|x| (x - 2.0).abs() < 1e-15));
    }

    #[test]
    fn asymmetric_coefficients_rejected() {
        let g = grid1(8);
        let mut c = vec![Complex64::new(0.0, 0.0); 8];
        c[1] = Complex64::new(1.0, 0.0);
        let err = GridField::from_coefficients(g, c).unwrap().to_values();
        assert!(matches!(err, Err(SfeError::SymmetryViolation { .. })));
    }

    #[test]
    fn derivative_of_single_mode() {
        let g = grid1(16);
        let f = GridField::from_fn(g, |x| (3.0 * x[0]).sin());
        let df = apply_symbol(&f, &OperatorSymbol::Derivative(vec![1]))
            .value_vec()
            .unwrap();
        for (m, v) in df.iter().enumerate() {
            assert!((v - 3.0 * (3.0 * g.coordinate(m)).cos()).abs() < 1e-13);
        }
    }

    #[test]
    fn laplacian_of_product_mode() {
        let g = Grid::new(2, 16).unwrap();
        let f = GridField::from_fn(g, |p| p[0].cos() * (2.0 * p[1]).cos());
        let lf = apply_symbol(&f, &OperatorSymbol::Laplacian).value_vec().unwrap();
        let fv = f.value_vec().unwrap();
        for (a, b) in lf.iter().zip(&fv) {
            assert!((a + 5.0 * b).abs() < 1e-13);
        }
    }

    #[test]
    fn zero_mean_inverse_examples() {
        let g = grid1(16);
        let inv = invert_zero_mean_laplacian(&GridField::from_fn(g, |x| x[0].sin()))
            .value_vec()
            .unwrap();
        for (m, v) in inv.iter().enumerate() {
            assert!((v + g.coordinate(m).sin()).abs() < 1e-14);
        }
        let inv = invert_zero_mean_laplacian(&GridField::from_fn(g, |_| 5.0))
            .value_vec()
            .unwrap();
        assert!(inv.iter().all(|v| v.abs() < 1e-15));

        let g2 = Grid::new(2, 16).unwrap();
        let f = GridField::from_fn(g2, |p| (2.0 * p[0] + p[1]).cos());
        let inv = invert_zero_mean_laplacian(&f).value_vec().unwrap();
        for (a, b) in inv.iter().zip(f.values().unwrap()) {
            assert!((a + b / 5.0).abs() < 1e-14);
        }
    }

    #[test]
    fn helmholtz_examples() {
        let g = grid1(16);
        let f = GridField::from_fn(g, |x| x[0].cos());
        let inv = invert_helmholtz(&f, 1.0).unwrap().value_vec().unwrap();
        for (a, b) in inv.iter().zip(f.values().unwrap()) {
            assert!((a - 0.5 * b).abs() < 1e-15);
        }
        let c = GridField::from_fn(g, |_| 4.0);
        let inv = invert_helmholtz(&c, 7.5).unwrap().value_vec().unwrap();
        assert!(inv.iter().all(|v| (v - 4.0).abs() < 1e-14));
        assert!(matches!(
            invert_helmholtz(&c, 0.0),
            Err(SfeError::InvalidParameter(_))
        ));
        assert!(invert_helmholtz(&c, -1.0).is_err());
    }

    #[test]
    fn nyquist_odd_derivative_vanishes() {
        let g = grid1(8);
        let m = derivative_multiplier(&[1], &[-4], 8);
        assert_eq!(m, Complex64::new(0.0, 0.0));
        let m = derivative_multiplier(&[2], &[-4], 8);
        assert_eq!(m, Complex64::new(-16.0, 0.0));
        // derivative of the alternating field stays real and zero
        let f = GridField::from_fn(g, |x| (4.0 * x[0]).cos());
        let df = apply_symbol(&f, &OperatorSymbol::Derivative(vec![1]));
        assert!(df.value_vec().unwrap().iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn nested_index_maps_coincident_nodes() {
        let coarse = Grid::new(2, 8).unwrap();
        let fine = Grid::new(2, 32).unwrap();
        let mut pc = [0.0; 2];
        let mut pf = [0.0; 2];
        for flat in 0..coarse.len() {
            coarse.point(flat, &mut pc);
            fine.point(coarse.nested_index(flat, &fine), &mut pf);
            assert!((pc[0] - pf[0]).abs() < 1e-14 && (pc[1] - pf[1]).abs() < 1e-14);
        }
    }
}
