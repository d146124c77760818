//! Dirichlet eigenvalues of `-Δ` on Ω by shifted inverse power iteration,
//! each iteration an embedded solve of `(-Δ - σ)v = u` with `v = 0` on ∂Ω.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::boundary::eval_at_nodes;
use crate::elliptic::{EllipticMachinery, Forcing, RegularityPath, ResidualPolicy, SolverSetup};
use crate::error::{Result, SfeError};
use crate::extension::RegularityOrder;
use crate::geometry::{Domain, GridMasks};
use crate::spectral::{apply_symbol, GridField, OperatorSymbol};

/// Distance below which a shift counts as a lattice value.
pub const SHIFT_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct EigConfig {
    pub shift: f64,
    pub tolerance: f64,
    pub max_iters: usize,
    pub n: usize,
    pub order: RegularityOrder,
    pub seed: u64,
}

impl EigConfig {
    pub fn new(shift: f64, n: usize) -> Self {
        Self {
            shift,
            tolerance: 1e-10,
            max_iters: 2000,
            n,
            order: RegularityOrder::NONE,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct EigResult {
    pub shift: f64,
    pub eigenvalue: f64,
    pub eigenfield: GridField,
    pub iterations: usize,
    pub deviations: Vec<f64>,
    /// `‖(-Δ - λ)u‖` over Ω.
    pub residual: f64,
    /// `max |u|` at the boundary nodes.
    pub boundary_max: f64,
    /// Constraint residual of the last inverse-operator solve.
    pub constraint_residual: f64,
}

impl EigResult {
    pub fn final_deviation(&self) -> f64 {
        self.deviations.last().copied().unwrap_or(f64::INFINITY)
    }
}

/// Whether `m` is a sum of `d` squares of integers.
fn is_sum_of_squares(m: u64, d: usize) -> bool {
    if d == 0 {
        return m == 0;
    }
    let mut a = 0u64;
    while a * a <= m {
        if is_sum_of_squares(m - a * a, d - 1) {
            return true;
        }
        a += 1;
    }
    false
}

/// Reject shifts at which `-Δ - σ` is singular on the grid: values
/// `Σ m_l²` with `Σ m_l² <= N² d / 4`.
pub fn validate_shift(shift: f64, dim: usize, n: usize) -> Result<()> {
    if !shift.is_finite() {
        return Err(SfeError::InvalidParameter(format!("shift {shift} is not finite")));
    }
    let nearest = shift.round();
    let cap = (n * n * dim) as f64 / 4.0;
    if nearest >= 0.0
        && nearest <= cap
        && (shift - nearest).abs() <= SHIFT_TOLERANCE
        && is_sum_of_squares(nearest as u64, dim)
    {
        return Err(SfeError::ShiftOnLattice {
            shift,
            lattice_value: nearest as u64,
        });
    }
    Ok(())
}

fn omega_dot(a: &[f64], b: &[f64], masks: &GridMasks, w: f64) -> f64 {
    w * masks.omega_indices().map(|i| a[i] * b[i]).sum::<f64>()
}

/// Shifted inverse power iteration converging to the eigenvalue closest to
/// `config.shift`.
pub fn inverse_power(config: &EigConfig, domain: &Domain) -> Result<EigResult> {
    validate_shift(config.shift, domain.dim(), config.n)?;
    if !(config.tolerance > 0.0) {
        return Err(SfeError::InvalidParameter(format!(
            "tolerance must be positive, got {}",
            config.tolerance
        )));
    }
    let setup = SolverSetup::new(
        OperatorSymbol::ShiftedLaplacian { shift: config.shift },
        config.order,
        RegularityPath::Spectral,
    )
    // A random start has content the truncated basis cannot match; later
    // iterates are smooth.
    .with_residual_policy(ResidualPolicy::Report);
    let machinery = EllipticMachinery::new(domain, config.n, setup)?;
    let grid = *machinery.grid();
    let masks = machinery.masks().clone();
    let nodes = machinery.nodes().clone();
    let w = grid.cell_volume();
    let zero_data = vec![0.0; nodes.len()];
    let norm = |v: &[f64]| omega_dot(v, v, &masks, w).sqrt();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut u: Vec<f64> = (0..grid.len())
        .map(|i| if masks.is_omega(i) { rng.gen_range(-1.0..=1.0) } else { 0.0 })
        .collect();
    let s = norm(&u);
    u.iter_mut().for_each(|x| *x /= s);
    let mut field = GridField::from_values(grid, u.clone())?;
    let rayleigh = |f: &GridField| -> Result<f64> {
        let v = f.value_vec()?;
        let lap = apply_symbol(f, &OperatorSymbol::Laplacian).into_values()?.value_vec()?;
        Ok(-omega_dot(&v, &lap, &masks, w))
    };
    let mut lambda = rayleigh(&field)?;
    let mut deviations = Vec::new();

    for it in 1..=config.max_iters {
        // Ω part of u drives the solve; E values are discarded by the mask.
        let forcing = Forcing::samples(u.clone());
        let sol = machinery.solve(&forcing, &zero_data)?;
        let mut v = sol.values().to_vec();
        let vn = norm(&v);
        if !(vn > 0.0) {
            return Err(SfeError::NoConvergence {
                iterations: it,
                last_deviation: f64::NAN,
                deviations,
            });
        }
        let sign = if omega_dot(&v, &u, &masks, w) < 0.0 { -1.0 } else { 1.0 };
        v.iter_mut().for_each(|x| *x *= sign / vn);
        let next = GridField::from_values(grid, v.clone())?;
        let lambda_next = rayleigh(&next)?;
        let diff: Vec<f64> = v.iter().zip(&u).map(|(a, b)| a - b).collect();
        let d = (lambda_next - lambda).abs().max(norm(&diff));
        deviations.push(d);
        u = v;
        field = next;
        lambda = lambda_next;
        if d <= config.tolerance {
            let lap = apply_symbol(&field, &OperatorSymbol::Laplacian)
                .into_values()?
                .value_vec()?;
            let res: Vec<f64> = lap.iter().zip(&u).map(|(l, x)| -l - lambda * x).collect();
            let boundary_max = eval_at_nodes(&field, &nodes)
                .iter()
                .fold(0.0f64, |m, x| m.max(x.abs()));
            return Ok(EigResult {
                shift: config.shift,
                eigenvalue: lambda,
                eigenfield: field,
                iterations: it,
                residual: norm(&res),
                boundary_max,
                constraint_residual: sol.diagnostics.residual,
                deviations,
            });
        }
    }
    Err(SfeError::NoConvergence {
        iterations: config.max_iters,
        last_deviation: deviations.last().copied().unwrap_or(f64::NAN),
        deviations,
    })
}

/// Outcome of a multi-shift scan.
#[derive(Debug)]
pub struct SpectrumScan {
    /// Distinct eigenvalues, ascending.
    pub eigenvalues: Vec<EigResult>,
    /// Shifts that failed, with their error.
    pub failures: Vec<(f64, SfeError)>,
}

impl SpectrumScan {
    pub fn values(&self) -> Vec<f64> {
        self.eigenvalues.iter().map(|r| r.eigenvalue).collect()
    }

    /// CSV with columns `shift,eigenvalue,iterations,final_deviation,residual`.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "shift,eigenvalue,iterations,final_deviation,residual")?;
        for r in &self.eigenvalues {
            writeln!(
                out,
                "{:.16e},{:.16e},{},{:.16e},{:.16e}",
                r.shift,
                r.eigenvalue,
                r.iterations,
                r.final_deviation(),
                r.residual
            )?;
        }
        Ok(())
    }
}

/// Run inverse iteration for every shift, merge coincident eigenvalues and
/// sort. Failures are collected, not fatal.
pub fn scan_spectrum(shifts: &[f64], config: &EigConfig, domain: &Domain) -> SpectrumScan {
    let results: Vec<(f64, Result<EigResult>)> = shifts
        .par_iter()
        .map(|&shift| {
            let cfg = EigConfig {
                shift,
                ..config.clone()
            };
            (shift, inverse_power(&cfg, domain))
        })
        .collect();
    let mut found: Vec<EigResult> = Vec::new();
    let mut failures = Vec::new();
    for (shift, r) in results {
        match r {
            Ok(r) => found.push(r),
            Err(e) => failures.push((shift, e)),
        }
    }
    found.sort_by(|a, b| a.eigenvalue.total_cmp(&b.eigenvalue));
    let mut merged: Vec<EigResult> = Vec::new();
    for r in found {
        match merged.last() {
            Some(last)
                if (r.eigenvalue - last.eigenvalue).abs()
                    <= 1e-6 * last.eigenvalue.abs().max(1.0) => {}
            _ => merged.push(r),
        }
    }
    SpectrumScan {
        eigenvalues: merged,
        failures,
    }
}
