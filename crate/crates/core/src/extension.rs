//! Forcing extension: the trigonometric basis for `h`, the constraint
//! system (boundary, mean and regularity rows), and the standalone Fourier
//! continuation of a function given on Ω.
//!
//! Complex modes are realified. The basis columns are the constant and
//! `√2 cos(j·x)`, `√2 sin(j·x)` over a half lattice of wave vectors, so the
//! Euclidean norm of the real coefficient vector equals `Σ_j |c_j|²` of the
//! complex coefficients and the minimum-norm solution is the same in both
//! parametrizations.

use std::f64::consts::SQRT_2;
use std::io::Write;
use std::ops::Range;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::boundary::{
    eval_coefficients, mode_trace_closed_form, normal_derivative_traces, trace_kernel, TraceBlock,
};
use crate::error::{Result, SfeError};
use crate::geometry::{boundary_nodes, grid_masks, BoundaryDiscretization, Domain, GridMasks};
use crate::jet::ClosedForm;
use crate::min_norm::{MinNormSolution, MinNormSolver};
use crate::spectral::{fft_nd, Grid, GridField, OperatorSymbol};

pub use crate::min_norm::{RANK_TOLERANCE, RESIDUAL_TOLERANCE};

/// Smoothness of the extended forcing across ∂Ω; `-1` imposes nothing.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RegularityOrder(i32);

impl RegularityOrder {
    pub const NONE: RegularityOrder = RegularityOrder(-1);

    pub fn new(k: i32) -> Result<Self> {
        if k < -1 {
            return Err(SfeError::InvalidParameter(format!(
                "regularity order must be >= -1, got {k}"
            )));
        }
        Ok(Self(k))
    }

    pub fn get(&self) -> i32 {
        self.0
    }

    /// Highest matched derivative, if any.
    pub fn max_derivative(&self) -> Option<usize> {
        (self.0 >= 0).then_some(self.0 as usize)
    }

    /// Number of regularity rows per boundary node, `k + 1`.
    pub fn rows_per_node(&self) -> usize {
        (self.0 + 1) as usize
    }
}

/// Real parametrization of `h = Σ_{‖j‖∞ ≤ J} c_j e^{i j·x}`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtensionBasis {
    dim: usize,
    half_width: usize,
    /// Half lattice: nonzero `j` whose first nonzero component is positive.
    modes: Vec<Vec<i64>>,
}

impl ExtensionBasis {
    pub fn new(dim: usize, half_width: usize) -> Self {
        let jw = half_width as i64;
        let side = 2 * half_width + 1;
        let total = side.pow(dim as u32);
        let mut modes = Vec::with_capacity(total / 2);
        for flat in 0..total {
            let mut rem = flat;
            let mut j = vec![0i64; dim];
            for a in (0..dim).rev() {
                j[a] = (rem % side) as i64 - jw;
                rem /= side;
            }
            if j.iter().find(|&&x| x != 0).is_some_and(|&x| x > 0) {
                modes.push(j);
            }
        }
        Self {
            dim,
            half_width,
            modes,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    pub fn modes(&self) -> &[Vec<i64>] {
        &self.modes
    }

    /// Real degrees of freedom, `(2J + 1)^d`.
    pub fn dof(&self) -> usize {
        1 + 2 * self.modes.len()
    }

    /// Value of real basis column `col` at `x`.
    pub fn column_value(&self, col: usize, x: &[f64]) -> f64 {
        if col == 0 {
            return 1.0;
        }
        let j = &self.modes[(col - 1) / 2];
        let phase: f64 = j.iter().zip(x).map(|(&a, &b)| a as f64 * b).sum();
        if (col - 1) % 2 == 0 {
            SQRT_2 * phase.cos()
        } else {
            SQRT_2 * phase.sin()
        }
    }

    /// Complex coefficients `c_j` on `grid` for real coefficients `x`.
    pub fn to_grid_coefficients(&self, x: &[f64], grid: &Grid) -> Result<Vec<Complex64>> {
        if 2 * self.half_width >= grid.n() {
            return Err(SfeError::Configuration(format!(
                "extension half-width {} is not resolved by N = {}",
                self.half_width,
                grid.n()
            )));
        }
        let mut c = vec![Complex64::new(0.0, 0.0); grid.len()];
        c[0] = Complex64::new(x[0], 0.0);
        for (q, j) in self.modes.iter().enumerate() {
            let (a, b) = (x[1 + 2 * q], x[2 + 2 * q]);
            let cj = Complex64::new(a, -b) * (SQRT_2 / 2.0);
            c[grid.index_of(j)] = cj;
            let neg: Vec<i64> = j.iter().map(|v| -v).collect();
            c[grid.index_of(&neg)] = cj.conj();
        }
        Ok(c)
    }

    /// `h` sampled on `grid`.
    pub fn synthesize(&self, x: &[f64], grid: &Grid) -> Result<GridField> {
        GridField::from_coefficients(*grid, self.to_grid_coefficients(x, grid)?)?.into_values()
    }
}

/// Which experiment family a mode count is chosen for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModeContext {
    /// Regularity rows only (standalone continuation).
    ExtensionOnly,
    /// Boundary (+ mean) + regularity rows of an elliptic solve.
    Solver,
}

/// Number of extension half-width `J`.
///
/// In 1D this is `k + 1` (continuation) or `k + 2` (solver). For `d >= 2` the
/// starting value `⌈√(n_b(k+2))/2 - 1⌉` is raised until
/// `(2J+1)^d >= n_b(k+2) + mean_row`.
pub fn choose_num_modes(
    n_b: usize,
    k: RegularityOrder,
    dim: usize,
    context: ModeContext,
    mean_row: bool,
) -> usize {
    let kk = k.get();
    if dim == 1 {
        return match context {
            ModeContext::ExtensionOnly => (kk + 1).max(0) as usize,
            ModeContext::Solver => (kk + 2) as usize,
        };
    }
    let constraints = match context {
        ModeContext::ExtensionOnly => n_b * k.rows_per_node(),
        ModeContext::Solver => n_b * (kk + 2) as usize + usize::from(mean_row),
    };
    let start = ((n_b as f64 * (kk + 2) as f64).sqrt() / 2.0 - 1.0).ceil().max(0.0) as usize;
    let mut j = start;
    while (2 * j + 1).pow(dim as u32) < constraints {
        j += 1;
    }
    j
}

/// How the torus operator is inverted inside boundary rows.
#[derive(Clone, Debug, PartialEq)]
pub enum InversePath {
    /// Zero-mean inverse of the Laplacian plus a mean unknown `U`.
    ZeroMean,
    /// Plain term-wise division by an invertible symbol.
    Direct(OperatorSymbol),
}

impl InversePath {
    pub fn for_operator(op: &OperatorSymbol, grid: &Grid) -> Result<Self> {
        match op {
            OperatorSymbol::Laplacian => Ok(InversePath::ZeroMean),
            OperatorSymbol::Derivative(_) => Err(SfeError::Configuration(format!(
                "operator {op:?} is not invertible and has no mean-correction path"
            ))),
            _ => {
                let mut k = vec![0i64; grid.dim()];
                for flat in 0..grid.len() {
                    grid.wave_vector(flat, &mut k);
                    if op.multiplier(&k, grid.n()).norm() == 0.0 {
                        return Err(SfeError::Configuration(format!(
                            "operator {op:?} is singular at wave vector {k:?}"
                        )));
                    }
                }
                Ok(InversePath::Direct(op.clone()))
            }
        }
    }

    pub fn has_mean_unknown(&self) -> bool {
        matches!(self, InversePath::ZeroMean)
    }

    pub fn multiplier(&self, k: &[i64], n: usize) -> Complex64 {
        match self {
            InversePath::ZeroMean => {
                let n2: i64 = k.iter().map(|x| x * x).sum();
                if n2 == 0 {
                    Complex64::new(0.0, 0.0)
                } else {
                    Complex64::new(-1.0 / n2 as f64, 0.0)
                }
            }
            InversePath::Direct(op) => op.multiplier(k, n).inv(),
        }
    }

    /// Apply the inverse to a field (coefficient-space result).
    pub fn apply(&self, field: &GridField) -> GridField {
        let grid = *field.grid();
        let mut c = field.coefficient_vec();
        let mut k = vec![0i64; grid.dim()];
        for (flat, cj) in c.iter_mut().enumerate() {
            grid.wave_vector(flat, &mut k);
            *cj *= self.multiplier(&k, grid.n());
        }
        GridField::from_coefficients(grid, c).expect("same grid")
    }
}

/// Boundary condition kind at one node.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BcKind {
    Dirichlet,
    /// Derivative along the node's outward normal.
    Neumann,
}

impl BcKind {
    fn derivative_order(self) -> usize {
        match self {
            BcKind::Dirichlet => 0,
            BcKind::Neumann => 1,
        }
    }
}

/// How boundary-row entries are computed. Both give the same matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum AssemblyRoute {
    /// One masked, inverted basis field per column, traced at all nodes.
    Columns,
    /// One adjoint kernel per node, correlated with every masked mode by FFT.
    #[default]
    Rows,
}

/// Where the right-hand side of the regularity rows comes from.
#[derive(Clone, Copy, Debug)]
pub enum RegularitySource<'a> {
    /// Exact traces of a closed-form forcing.
    Analytic(&'a ClosedForm),
    /// Spectral traces of a grid field.
    Spectral(&'a GridField),
}

impl RegularitySource<'_> {
    /// `T_k*` of the source at the nodes.
    pub fn traces(&self, nodes: &BoundaryDiscretization, k: usize) -> TraceBlock {
        match self {
            RegularitySource::Analytic(f) => {
                let nb = nodes.len();
                let mut data = vec![0.0; (k + 1) * nb];
                for (i, (s, n)) in nodes.positions.iter().zip(&nodes.normals).enumerate() {
                    let d = f.directional_derivatives(s, n, k);
                    for (l, v) in d.into_iter().enumerate() {
                        data[l * nb + i] = v;
                    }
                }
                TraceBlock::new(k, nb, data)
            }
            RegularitySource::Spectral(field) => normal_derivative_traces(field, nodes, k),
        }
    }
}

/// Row and column bookkeeping of an assembled system.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemLayout {
    pub boundary: Range<usize>,
    pub mean: Option<usize>,
    pub regularity: Range<usize>,
    /// Basis columns; the mean unknown, when present, follows at `basis_dof`.
    pub basis_dof: usize,
    pub mean_column: Option<usize>,
}

impl SystemLayout {
    pub fn new(n_boundary: usize, mean: bool, n_regularity: usize, basis_dof: usize) -> Self {
        let mean_row = mean.then_some(n_boundary);
        let reg_start = n_boundary + usize::from(mean);
        Self {
            boundary: 0..n_boundary,
            mean: mean_row,
            regularity: reg_start..reg_start + n_regularity,
            basis_dof,
            mean_column: mean.then_some(basis_dof),
        }
    }

    pub fn rows(&self) -> usize {
        self.regularity.end
    }

    pub fn cols(&self) -> usize {
        self.basis_dof + usize::from(self.mean_column.is_some())
    }
}

/// The constraint matrix `M`, right-hand side `b` and their layout.
#[derive(Clone, Debug)]
pub struct ExtensionSystem {
    pub matrix: DMatrix<f64>,
    pub rhs: Vec<f64>,
    pub layout: SystemLayout,
}

impl ExtensionSystem {
    /// Write `[M | b]` as CSV, one constraint per line.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        let cols = self.matrix.ncols();
        let header: Vec<String> = (0..cols)
            .map(|c| format!("m{c}"))
            .chain(std::iter::once("b".to_string()))
            .collect();
        writeln!(out, "{}", header.join(","))?;
        for r in 0..self.matrix.nrows() {
            let row: Vec<String> = (0..cols)
                .map(|c| format!("{:.16e}", self.matrix[(r, c)]))
                .chain(std::iter::once(format!("{:.16e}", self.rhs[r])))
                .collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Matrix rows imposing boundary conditions on `u_e` at every node.
///
/// Column `c` holds `T*[L⁻¹(χ_E φ_c)]` at the node's derivative order; the
/// mean column (zero-mean path only) is 1 on Dirichlet rows and 0 on
/// Neumann rows.
pub fn boundary_matrix(
    basis: &ExtensionBasis,
    masks: &GridMasks,
    nodes: &BoundaryDiscretization,
    inverse: &InversePath,
    kinds: &[BcKind],
    route: AssemblyRoute,
) -> Result<DMatrix<f64>> {
    let grid = *masks.grid();
    let nb = nodes.len();
    if kinds.len() != nb {
        return Err(SfeError::Configuration(format!(
            "{} boundary conditions for {nb} nodes",
            kinds.len()
        )));
    }
    if 2 * basis.half_width() >= grid.n() {
        return Err(SfeError::Configuration(format!(
            "extension half-width {} is not resolved by N = {}",
            basis.half_width(),
            grid.n()
        )));
    }
    let cols = basis.dof() + usize::from(inverse.has_mean_unknown());
    let mut m = DMatrix::zeros(nb, cols);
    let chi_e = masks.chi_extension();
    match route {
        AssemblyRoute::Columns => {
            let max_order = kinds.iter().map(|k| k.derivative_order()).max().unwrap_or(0);
            let points = grid.points();
            let columns: Vec<Vec<f64>> = (0..basis.dof())
                .into_par_iter()
                .map(|col| {
                    let vals: Vec<f64> = points
                        .iter()
                        .zip(&chi_e)
                        .map(|(p, &e)| e * basis.column_value(col, p))
                        .collect();
                    let field = GridField::from_values(grid, vals).expect("grid-sized");
                    let inv = inverse.apply(&field);
                    let traces = normal_derivative_traces(&inv, nodes, max_order);
                    kinds
                        .iter()
                        .enumerate()
                        .map(|(i, kind)| traces.get(kind.derivative_order(), i))
                        .collect()
                })
                .collect();
            for (col, entries) in columns.iter().enumerate() {
                for (i, v) in entries.iter().enumerate() {
                    m[(i, col)] = *v;
                }
            }
        }
        AssemblyRoute::Rows => {
            let rows: Vec<Vec<f64>> = (0..nb)
                .into_par_iter()
                .map(|i| {
                    let kern = trace_kernel(
                        &grid,
                        &nodes.positions[i],
                        &nodes.normals[i],
                        kinds[i].derivative_order(),
                        |k| inverse.multiplier(k, grid.n()),
                    );
                    masked_kernel_row(basis, &grid, &kern, &chi_e)
                })
                .collect();
            for (i, row) in rows.iter().enumerate() {
                for (c, v) in row.iter().enumerate() {
                    m[(i, c)] = *v;
                }
            }
        }
    }
    if inverse.has_mean_unknown() {
        for (i, kind) in kinds.iter().enumerate() {
            m[(i, cols - 1)] = if *kind == BcKind::Dirichlet { 1.0 } else { 0.0 };
        }
    }
    Ok(m)
}

/// Row of basis entries `N^{-d} Σ_m K_m χ_m φ_c(x_m)` for a real kernel `K`
/// and mask `χ`, computed for all columns with one inverse FFT.
fn masked_kernel_row(basis: &ExtensionBasis, grid: &Grid, kernel: &[f64], mask: &[f64]) -> Vec<f64> {
    let scale = 1.0 / grid.len() as f64;
    let mut g: Vec<Complex64> = kernel
        .iter()
        .zip(mask)
        .map(|(a, e)| Complex64::new(a * e, 0.0))
        .collect();
    // Σ_m G_m e^{+i j·x_m}
    fft_nd(grid, &mut g, rustfft::FftDirection::Inverse);
    let mut row = vec![0.0; basis.dof()];
    row[0] = g[0].re * scale;
    for (q, j) in basis.modes().iter().enumerate() {
        let t = g[grid.index_of(j)] * scale;
        row[1 + 2 * q] = SQRT_2 * t.re;
        row[2 + 2 * q] = SQRT_2 * t.im;
    }
    row
}

/// Regularity rows of the masked form `T_k*(χ_Ω h) = T_k*(χ_Ω f)`: entries
/// are spectral traces of the Ω-masked basis functions, so only Ω values of
/// the forcing are ever needed. Ordered like [`regularity_matrix`].
pub fn masked_regularity_matrix(
    basis: &ExtensionBasis,
    masks: &GridMasks,
    nodes: &BoundaryDiscretization,
    k: RegularityOrder,
    with_mean_column: bool,
    route: AssemblyRoute,
) -> Result<DMatrix<f64>> {
    let grid = *masks.grid();
    let nb = nodes.len();
    let cols = basis.dof() + usize::from(with_mean_column);
    let mut m = DMatrix::zeros(k.rows_per_node() * nb, cols);
    let Some(order) = k.max_derivative() else {
        return Ok(m);
    };
    if 2 * basis.half_width() >= grid.n() {
        return Err(SfeError::Configuration(format!(
            "extension half-width {} is not resolved by N = {}",
            basis.half_width(),
            grid.n()
        )));
    }
    let chi_o = masks.chi_omega();
    match route {
        AssemblyRoute::Columns => {
            let points = grid.points();
            let columns: Vec<Vec<f64>> = (0..basis.dof())
                .into_par_iter()
                .map(|col| {
                    let vals: Vec<f64> = points
                        .iter()
                        .zip(&chi_o)
                        .map(|(p, &o)| o * basis.column_value(col, p))
                        .collect();
                    let field = GridField::from_values(grid, vals).expect("grid-sized");
                    normal_derivative_traces(&field, nodes, order).as_slice().to_vec()
                })
                .collect();
            for (col, entries) in columns.iter().enumerate() {
                for (r, v) in entries.iter().enumerate() {
                    m[(r, col)] = *v;
                }
            }
        }
        AssemblyRoute::Rows => {
            let rows: Vec<Vec<f64>> = (0..(order + 1) * nb)
                .into_par_iter()
                .map(|r| {
                    let (l, i) = (r / nb, r % nb);
                    let kern = trace_kernel(&grid, &nodes.positions[i], &nodes.normals[i], l, |_| {
                        Complex64::new(1.0, 0.0)
                    });
                    masked_kernel_row(basis, &grid, &kern, &chi_o)
                })
                .collect();
            for (r, row) in rows.iter().enumerate() {
                for (c, v) in row.iter().enumerate() {
                    m[(r, c)] = *v;
                }
            }
        }
    }
    Ok(m)
}

/// Right-hand side `T_k*(χ_Ω f)` of the masked regularity rows.
pub fn masked_regularity_rhs(
    omega_forcing: &[f64],
    masks: &GridMasks,
    nodes: &BoundaryDiscretization,
    k: RegularityOrder,
) -> Result<Vec<f64>> {
    let Some(order) = k.max_derivative() else {
        return Ok(Vec::new());
    };
    let masked: Vec<f64> = omega_forcing
        .iter()
        .zip(masks.omega())
        .map(|(&f, &o)| if o { f } else { 0.0 })
        .collect();
    let field = GridField::from_values(*masks.grid(), masked)?;
    Ok(RegularitySource::Spectral(&field).traces(nodes, order).as_slice().to_vec())
}

/// `g - T*[L⁻¹(χ_Ω f)]` at each node, with `f` given as Ω samples on the grid
/// (E entries ignored).
pub fn boundary_rhs(
    omega_forcing: &[f64],
    masks: &GridMasks,
    nodes: &BoundaryDiscretization,
    inverse: &InversePath,
    kinds: &[BcKind],
    data: &[f64],
) -> Result<Vec<f64>> {
    let grid = *masks.grid();
    let masked: Vec<f64> = omega_forcing
        .iter()
        .zip(masks.omega())
        .map(|(&f, &o)| if o { f } else { 0.0 })
        .collect();
    let inv = inverse.apply(&GridField::from_values(grid, masked)?);
    let neumann = kinds.iter().any(|k| *k == BcKind::Neumann);
    let traces = if neumann {
        normal_derivative_traces(&inv, nodes, 1)
    } else {
        let c = inv.coefficient_vec();
        TraceBlock::new(0, nodes.len(), eval_coefficients(&grid, &c, &nodes.positions))
    };
    Ok(kinds
        .iter()
        .enumerate()
        .map(|(i, kind)| data[i] - traces.get(kind.derivative_order(), i))
        .collect())
}

/// Boundary rows together with their right-hand side.
#[derive(Clone, Debug)]
pub struct BoundaryBlock {
    pub rows: DMatrix<f64>,
    pub rhs: Vec<f64>,
}

#[allow(clippy::too_many_arguments)]
pub fn assemble_boundary_rows(
    basis: &ExtensionBasis,
    masks: &GridMasks,
    nodes: &BoundaryDiscretization,
    operator: &OperatorSymbol,
    kinds: &[BcKind],
    data: &[f64],
    omega_forcing: &[f64],
    route: AssemblyRoute,
) -> Result<BoundaryBlock> {
    let inverse = InversePath::for_operator(operator, masks.grid())?;
    Ok(BoundaryBlock {
        rows: boundary_matrix(basis, masks, nodes, &inverse, kinds, route)?,
        rhs: boundary_rhs(omega_forcing, masks, nodes, &inverse, kinds, data)?,
    })
}

/// Grid-quadrature average of the extended equation:
/// `Σ_c x_c Δx^d Σ_{E} φ_c = -Δx^d Σ_{Ω} f`. The mean unknown has entry 0.
pub fn assemble_mean_row(
    basis: &ExtensionBasis,
    masks: &GridMasks,
    omega_forcing: &[f64],
) -> (Vec<f64>, f64) {
    let grid = masks.grid();
    let w = grid.cell_volume();
    let mut p = vec![0.0; grid.dim()];
    let mut row = vec![0.0; basis.dof() + 1];
    for flat in 0..grid.len() {
        if masks.is_omega(flat) {
            continue;
        }
        grid.point(flat, &mut p);
        for (c, r) in row.iter_mut().take(basis.dof()).enumerate() {
            *r += w * basis.column_value(c, &p);
        }
    }
    let rhs = -w * masks
        .omega_indices()
        .map(|flat| omega_forcing[flat])
        .sum::<f64>();
    (row, rhs)
}

/// Rows `T_k* h = T_k* f`, ordered `l = 0..=k` with one block of `n_b` rows
/// each. Mode entries are exact; the mean unknown (if any) has entry 0.
pub fn regularity_matrix(
    basis: &ExtensionBasis,
    nodes: &BoundaryDiscretization,
    k: RegularityOrder,
    with_mean_column: bool,
) -> DMatrix<f64> {
    let nb = nodes.len();
    let rows = k.rows_per_node() * nb;
    let cols = basis.dof() + usize::from(with_mean_column);
    let mut m = DMatrix::zeros(rows, cols);
    let Some(order) = k.max_derivative() else {
        return m;
    };
    for i in 0..nb {
        m[(i, 0)] = 1.0;
    }
    for (q, j) in basis.modes().iter().enumerate() {
        let t = mode_trace_closed_form(j, nodes, order);
        for (r, z) in t.iter().enumerate() {
            m[(r, 1 + 2 * q)] = SQRT_2 * z.re;
            m[(r, 2 + 2 * q)] = SQRT_2 * z.im;
        }
    }
    m
}

pub fn assemble_regularity_rows(
    basis: &ExtensionBasis,
    nodes: &BoundaryDiscretization,
    k: RegularityOrder,
    source: RegularitySource<'_>,
    with_mean_column: bool,
) -> (DMatrix<f64>, Vec<f64>) {
    let m = regularity_matrix(basis, nodes, k, with_mean_column);
    let rhs = match k.max_derivative() {
        Some(order) => source.traces(nodes, order).as_slice().to_vec(),
        None => Vec::new(),
    };
    (m, rhs)
}

/// Minimum-norm solution of an assembled system.
pub fn solve_min_norm(system: &ExtensionSystem) -> Result<MinNormSolution> {
    MinNormSolver::new(system.matrix.clone())?.solve(&system.rhs)
}

/// `f_e = χ_Ω f + χ_E h` on a grid, with the data that produced it.
#[derive(Clone, Debug)]
pub struct ExtendedForcing {
    pub basis: ExtensionBasis,
    /// Real coefficients of `h` (basis columns only).
    pub coefficients: Vec<f64>,
    /// Mean of `u_e` when solved alongside the extension.
    pub mean: Option<f64>,
    pub values: GridField,
    pub residual: f64,
    pub rank: usize,
}

impl ExtendedForcing {
    pub fn h_coefficients(&self, grid: &Grid) -> Result<Vec<Complex64>> {
        self.basis.to_grid_coefficients(&self.coefficients, grid)
    }
}

/// Compose `f_e` from Ω samples and the extension coefficients.
pub fn compose_forcing(
    omega_forcing: &[f64],
    masks: &GridMasks,
    basis: &ExtensionBasis,
    coefficients: &[f64],
) -> Result<GridField> {
    let grid = *masks.grid();
    let h = basis.synthesize(coefficients, &grid)?.value_vec()?;
    let values = h
        .iter()
        .zip(omega_forcing)
        .zip(masks.omega())
        .map(|((&hv, &fv), &o)| if o { fv } else { hv })
        .collect();
    GridField::from_values(grid, values)
}

/// Standalone `k`-regular Fourier continuation: only regularity rows, with
/// `J = k + 1` in 1D. The composite is sampled on a grid with `n` points per
/// axis.
pub fn extend_function(
    source: RegularitySource<'_>,
    domain: &Domain,
    k: RegularityOrder,
    n: usize,
) -> Result<ExtendedForcing> {
    let grid = Grid::new(domain.dim(), n)?;
    let masks = grid_masks(domain, &grid)?;
    let nodes = boundary_nodes(domain, n.max(8))?;
    let half_width = choose_num_modes(nodes.len(), k, domain.dim(), ModeContext::ExtensionOnly, false);
    let basis = ExtensionBasis::new(domain.dim(), half_width);
    let (matrix, rhs) = assemble_regularity_rows(&basis, &nodes, k, source, false);
    let sol = MinNormSolver::new(matrix)?.solve(&rhs)?;
    let omega = omega_samples(source, &masks)?;
    let values = compose_forcing(&omega, &masks, &basis, &sol.x)?;
    Ok(ExtendedForcing {
        basis,
        coefficients: sol.x,
        mean: None,
        values,
        residual: sol.residual,
        rank: sol.rank,
    })
}

/// Forcing samples at Ω nodes (zero elsewhere).
pub fn omega_samples(source: RegularitySource<'_>, masks: &GridMasks) -> Result<Vec<f64>> {
    let grid = masks.grid();
    match source {
        RegularitySource::Analytic(f) => {
            let mut p = vec![0.0; grid.dim()];
            Ok((0..grid.len())
                .map(|flat| {
                    if masks.is_omega(flat) {
                        grid.point(flat, &mut p);
                        f.value(&p)
                    } else {
                        0.0
                    }
                })
                .collect())
        }
        RegularitySource::Spectral(field) => {
            grid.check_same(field.grid())?;
            let v = field.value_vec()?;
            Ok(v.iter()
                .zip(masks.omega())
                .map(|(&x, &o)| if o { x } else { 0.0 })
                .collect())
        }
    }
}
