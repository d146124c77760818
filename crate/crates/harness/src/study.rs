//! Running catalog cases over their (k, N) sweeps and fitting rates.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;
use sfe_core::elliptic::{manufactured_error, nested_difference, BcSpec, EllipticMachinery, Forcing, RegularityPath, SolverSetup};
use sfe_core::eigen::{scan_spectrum, EigConfig};
use sfe_core::evolution::{run, StartScheme, StepperConfig};
use sfe_core::export::{write_binary, write_solution_csv};
use sfe_core::extension::{
    choose_num_modes, extend_function, regularity_matrix, BcKind, ModeContext, RegularityOrder,
    RegularitySource,
};
use sfe_core::geometry::{boundary_nodes, GridMasks};
use sfe_core::jet::ClosedForm;
use sfe_core::spectral::{GridField, OperatorSymbol};

use crate::catalog::{self, CaseId, CaseKind, CaseSpec, Reference};
use crate::error::HarnessError;

/// Errors at or below this are treated as round-off.
pub const ERROR_FLOOR: f64 = 1e-13;
/// Only errors above `10 ×` the floor enter a rate fit.
pub const FIT_THRESHOLD: f64 = 10.0 * ERROR_FLOOR;
/// Coefficients below this fraction of the largest one are unresolved.
pub const RESOLVED_FRACTION: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RateStatus {
    Fitted,
    /// Every point sits at the error floor.
    Saturated,
    /// Fewer than three usable points.
    Insufficient,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateEstimate {
    /// Least-squares slope of `log e` against `log N`.
    pub slope: Option<f64>,
    /// `log(e_a / e_b) / log(N_b / N_a)` for consecutive points; `log₂` of
    /// the error ratio when grids double.
    pub pairwise: Vec<(usize, f64)>,
    pub status: RateStatus,
    pub points_used: usize,
}

fn least_squares_slope(xy: &[(f64, f64)]) -> f64 {
    let n = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Fit `e ≈ C N^slope` to the points above the fit threshold.
pub fn estimate_rate(points: &[(usize, f64)]) -> RateEstimate {
    let valid: Vec<(usize, f64)> = points
        .iter()
        .copied()
        .filter(|(_, e)| e.is_finite() && *e > 0.0)
        .collect();
    let pairwise = valid
        .windows(2)
        .map(|w| (w[0].0, (w[0].1 / w[1].1).ln() / (w[1].0 as f64 / w[0].0 as f64).ln()))
        .collect();
    let used: Vec<(f64, f64)> = valid
        .iter()
        .filter(|(_, e)| *e > FIT_THRESHOLD)
        .map(|&(n, e)| ((n as f64).ln(), e.ln()))
        .collect();
    let (slope, status) = if !valid.is_empty() && used.is_empty() {
        (None, RateStatus::Saturated)
    } else if used.len() < 3 {
        (None, RateStatus::Insufficient)
    } else {
        (Some(least_squares_slope(&used)), RateStatus::Fitted)
    };
    RateEstimate {
        slope,
        pairwise,
        status,
        points_used: used.len(),
    }
}

/// Log-log slope of the coefficient envelope over the top half-decade of
/// resolved modes.
///
/// `magnitudes[j] = |c_j|` for `j = 0..=N/2` of an `N`-point grid. Modes above
/// `N/8` are excluded since grid aliasing flattens them, as are modes whose
/// envelope (running maximum from the high end) falls below
/// [`RESOLVED_FRACTION`] of the largest coefficient.
pub fn decay_slope(magnitudes: &[f64]) -> Option<f64> {
    let n = 2 * (magnitudes.len() - 1);
    let cap = (n / 8).min(magnitudes.len() - 1);
    if cap < 4 {
        return None;
    }
    let peak = magnitudes.iter().cloned().fold(0.0, f64::max);
    let mut env = vec![0.0; cap + 1];
    let mut running = 0.0f64;
    for j in (1..=cap).rev() {
        running = running.max(magnitudes[j]);
        env[j] = running;
    }
    let top = (1..=cap).rev().find(|&j| env[j] >= RESOLVED_FRACTION * peak)?;
    let low = ((top as f64) / 10f64.sqrt()).ceil().max(1.0) as usize;
    let xy: Vec<(f64, f64)> = (low..=top)
        .map(|j| ((j as f64).ln(), env[j].ln()))
        .collect();
    (xy.len() >= 3).then(|| least_squares_slope(&xy))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub case: CaseId,
    pub k: i32,
    pub n: usize,
    pub n_b: usize,
    pub half_width: usize,
    /// `NaN` when the cell failed.
    pub error_inf: f64,
    /// Constraint residual `‖Mx − b‖₂` of the cell's solve (largest over
    /// time steps); `NaN` when not applicable.
    pub residual: f64,
    /// Whether every solve met the min-norm residual tolerance.
    pub within_tolerance: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellFailure {
    pub k: i32,
    pub n: usize,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceRecord {
    pub case: CaseId,
    pub reference: Reference,
    /// Grid of the finest-grid reference, if one is used.
    pub reference_n: Option<usize>,
    /// Sorted by `(k, N)`.
    pub rows: Vec<ConvergenceRow>,
    pub rates: BTreeMap<i32, RateEstimate>,
    pub failures: Vec<CellFailure>,
    /// Constraint residual of each reference solve, keyed by `k`.
    pub reference_residuals: BTreeMap<i32, f64>,
}

impl ConvergenceRecord {
    pub fn rows_for(&self, k: i32) -> impl Iterator<Item = &ConvergenceRow> {
        self.rows.iter().filter(move |r| r.k == k)
    }

    pub fn errors(&self, k: i32) -> Vec<(usize, f64)> {
        self.rows_for(k).map(|r| (r.n, r.error_inf)).collect()
    }

    pub fn rate(&self, k: i32) -> Option<&RateEstimate> {
        self.rates.get(&k)
    }
}

/// Coefficient magnitudes `|c_j|`, `j = 0..=N/2`, of one continuation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectrumSeries {
    pub k: i32,
    pub n: usize,
    pub magnitudes: Vec<f64>,
    pub slope: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EigenRow {
    pub case: CaseId,
    pub n: usize,
    pub k: i32,
    pub shift: f64,
    pub eigenvalue: f64,
    /// `λ |Ω|`.
    pub scaled: f64,
    pub iterations: usize,
    pub final_deviation: f64,
    pub residual: f64,
    pub boundary_max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EigenRecord {
    pub case: CaseId,
    pub measure: f64,
    pub rows: Vec<EigenRow>,
    pub failures: Vec<(usize, i32, f64, String)>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum CaseOutcome {
    Convergence(ConvergenceRecord),
    Continuation {
        record: ConvergenceRecord,
        spectra: Vec<SpectrumSeries>,
    },
    Eigen(EigenRecord),
}

impl CaseOutcome {
    pub fn convergence(&self) -> Option<&ConvergenceRecord> {
        match self {
            CaseOutcome::Convergence(r) | CaseOutcome::Continuation { record: r, .. } => Some(r),
            CaseOutcome::Eigen(_) => None,
        }
    }

    pub fn eigen(&self) -> Option<&EigenRecord> {
        match self {
            CaseOutcome::Eigen(r) => Some(r),
            _ => None,
        }
    }
}

/// Side outputs requested from a study.
#[derive(Clone, Debug, Default)]
pub struct StudyOptions {
    /// Write each solved field (CSV and binary) here.
    pub dump_dir: Option<PathBuf>,
    /// Also write the assembled constraint system of each elliptic cell.
    pub dump_systems: bool,
}

/// A solved field with what is needed to compare it.
struct CellField {
    field: GridField,
    masks: Arc<GridMasks>,
    n_b: usize,
    half_width: usize,
    /// Error against an exact or manufactured solution, if there is one.
    error: Option<f64>,
    residual: f64,
    within_tolerance: bool,
}

fn order(k: i32) -> Result<RegularityOrder, HarnessError> {
    Ok(RegularityOrder::new(k)?)
}

fn dump(opts: &StudyOptions, spec: &CaseSpec, k: i32, n: usize, cell: &CellField) -> Result<(), HarnessError> {
    if let Some(dir) = &opts.dump_dir {
        std::fs::create_dir_all(dir)?;
        let stem = dir.join(format!("{}_k{}_N{}", spec.stem(), k, n));
        let csv = BufWriter::new(File::create(stem.with_extension("csv"))?);
        write_solution_csv(&cell.field, Some(&cell.masks), csv)?;
        write_binary(&cell.field, BufWriter::new(File::create(stem.with_extension("bin"))?))?;
    }
    Ok(())
}

fn elliptic_cell(spec: &CaseSpec, k: i32, n: usize, opts: &StudyOptions) -> Result<CellField, HarnessError> {
    let id = spec.id;
    let domain = id.domain();
    let order = order(k)?;
    let mixed = id == CaseId::Poisson1dMixed;
    let mut setup = SolverSetup::new(OperatorSymbol::Laplacian, order, RegularityPath::Analytic)
        .with_residual_policy(sfe_core::elliptic::ResidualPolicy::Report);
    if mixed {
        setup = setup.with_kinds(vec![BcKind::Neumann, BcKind::Dirichlet]);
    }
    let m = EllipticMachinery::new(&domain, n, setup)?;
    let forcing_form: ClosedForm = match id {
        CaseId::Poisson1dDirichlet | CaseId::Poisson1dMixed => catalog::pole_forcing(),
        CaseId::Poisson2dDisc => catalog::disc_forcing(),
        _ => catalog::manufactured_laplacian(),
    };
    let data: Vec<f64> = match id {
        // outward normal at x = 2 is -1, so u'(2) = 1 becomes D_n u = -1
        CaseId::Poisson1dMixed => vec![-1.0, -1.0],
        CaseId::Poisson1dDirichlet => vec![1.0, -1.0],
        CaseId::Poisson2dDisc => vec![0.0; m.nodes().len()],
        _ => BcSpec::dirichlet_fn(m.nodes(), catalog::manufactured).data,
    };
    let forcing = Forcing::closed_form(forcing_form, m.grid(), m.masks());
    if opts.dump_systems {
        if let Some(dir) = &opts.dump_dir {
            std::fs::create_dir_all(dir)?;
            let path = dir.join(format!("{}_k{}_N{}_system.csv", spec.stem(), k, n));
            m.system(&forcing, &data)?
                .write_csv(BufWriter::new(File::create(path)?))?;
        }
    }
    let sol = m.solve(&forcing, &data)?;
    let error = match id {
        CaseId::Poisson1dDirichlet | CaseId::Poisson1dMixed => {
            Some(manufactured_error(&sol, |x| catalog::poisson_1d_exact(x[0], mixed)))
        }
        CaseId::Poisson2dDisc => None,
        _ => Some(manufactured_error(&sol, catalog::manufactured)),
    };
    Ok(CellField {
        n_b: sol.diagnostics.n_b,
        half_width: sol.diagnostics.half_width,
        residual: sol.diagnostics.residual,
        within_tolerance: sol.diagnostics.converged,
        field: sol.u_e,
        masks: sol.masks,
        error,
    })
}

fn heat_cell(spec: &CaseSpec, k: i32, n: usize) -> Result<CellField, HarnessError> {
    let problem = match spec.id {
        CaseId::Heat1d => catalog::heat_1d_problem(),
        _ => catalog::heat_2d_problem(),
    };
    let domain = spec.id.domain();
    let dt = spec
        .time_step(n)
        .ok_or_else(|| HarnessError::Config("heat case without a time step".into()))?;
    let scheme: StartScheme = spec.start.map(Into::into).unwrap_or(StartScheme::BackwardEuler);
    let cfg = StepperConfig::new(dt, spec.final_time.unwrap_or(1.0), scheme, order(k)?)?;
    let result = run(&problem, n, &cfg)?;
    let n_b = boundary_nodes(&domain, n)?.len();
    Ok(CellField {
        field: result.solution,
        masks: result.masks.expect("embedded run"),
        n_b,
        half_width: choose_num_modes(n_b, order(k)?, domain.dim(), ModeContext::Solver, false),
        error: result.final_error,
        residual: f64::NAN,
        within_tolerance: true,
    })
}

fn compute_cell(spec: &CaseSpec, k: i32, n: usize, opts: &StudyOptions) -> Result<CellField, HarnessError> {
    let cell = match spec.id.kind() {
        CaseKind::Elliptic => elliptic_cell(spec, k, n, opts)?,
        CaseKind::Heat => heat_cell(spec, k, n)?,
        _ => unreachable!("only field cases have cells"),
    };
    dump(opts, spec, k, n, &cell)?;
    Ok(cell)
}

fn convergence_study(spec: &CaseSpec, opts: &StudyOptions) -> Result<ConvergenceRecord, HarnessError> {
    let finest = spec.id.reference() == Reference::FinestGrid;
    let reference_n = finest.then(|| spec.reference_n.unwrap_or(*spec.n.last().expect("validated")));
    let references: BTreeMap<i32, Result<CellField, String>> = match reference_n {
        Some(rn) => spec
            .k
            .par_iter()
            .map(|&k| (k, compute_cell(spec, k, rn, opts).map_err(|e| e.to_string())))
            .collect(),
        None => BTreeMap::new(),
    };
    let cells: Vec<(i32, usize)> = spec
        .k
        .iter()
        .flat_map(|&k| spec.n.iter().map(move |&n| (k, n)))
        .filter(|&(_, n)| reference_n.map_or(true, |rn| n < rn))
        .collect();
    let outcomes: Vec<(i32, usize, Result<ConvergenceRow, String>)> = cells
        .par_iter()
        .map(|&(k, n)| {
            let r = compute_cell(spec, k, n, opts).map_err(|e| e.to_string()).and_then(|cell| {
                let err = match (&cell.error, references.get(&k)) {
                    (Some(e), _) => *e,
                    (None, Some(Ok(reference))) => {
                        nested_difference(&cell.field, &cell.masks, &reference.field).map_err(|e| e.to_string())?
                    }
                    (None, Some(Err(msg))) => return Err(format!("reference failed: {msg}")),
                    (None, None) => return Err("no error reference".into()),
                };
                Ok(ConvergenceRow {
                    case: spec.id,
                    k,
                    n,
                    n_b: cell.n_b,
                    half_width: cell.half_width,
                    error_inf: err,
                    residual: cell.residual,
                    within_tolerance: cell.within_tolerance,
                })
            });
            (k, n, r)
        })
        .collect();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (k, n, r) in outcomes {
        match r {
            Ok(row) => rows.push(row),
            Err(message) => {
                rows.push(ConvergenceRow {
                    case: spec.id,
                    k,
                    n,
                    n_b: 0,
                    half_width: 0,
                    error_inf: f64::NAN,
                    residual: f64::NAN,
                    within_tolerance: false,
                });
                failures.push(CellFailure { k, n, message });
            }
        }
    }
    for (k, r) in &references {
        if let Err(message) = r {
            failures.push(CellFailure {
                k: *k,
                n: reference_n.expect("reference grid"),
                message: format!("reference: {message}"),
            });
        }
    }
    rows.sort_by_key(|r| (r.k, r.n));
    let reference_residuals = references
        .iter()
        .filter_map(|(k, r)| r.as_ref().ok().map(|c| (*k, c.residual)))
        .collect();
    let rates = spec
        .k
        .iter()
        .map(|&k| {
            let pts: Vec<(usize, f64)> = rows.iter().filter(|r| r.k == k).map(|r| (r.n, r.error_inf)).collect();
            (k, estimate_rate(&pts))
        })
        .collect();
    Ok(ConvergenceRecord {
        case: spec.id,
        reference: spec.id.reference(),
        reference_n,
        reference_residuals,
        rows,
        rates,
        failures,
    })
}

fn continuation_study(spec: &CaseSpec) -> Result<CaseOutcome, HarnessError> {
    let domain = spec.id.domain();
    let f = catalog::pole_forcing();
    let cells: Vec<(i32, usize)> = spec
        .k
        .iter()
        .flat_map(|&k| spec.n.iter().map(move |&n| (k, n)))
        .collect();
    let results: Vec<(i32, usize, Result<(ConvergenceRow, SpectrumSeries), String>)> = cells
        .par_iter()
        .map(|&(k, n)| {
            let run = || -> Result<(ConvergenceRow, SpectrumSeries), HarnessError> {
                let order = order(k)?;
                let ext = extend_function(RegularitySource::Analytic(&f), &domain, order, n)?;
                let coeffs = ext.values.to_coefficients();
                let c = coeffs.coefficients().expect("coefficient space");
                let magnitudes: Vec<f64> = c[..=n / 2].iter().map(|z| z.norm()).collect();
                // mismatch of h against f in value and the first k derivatives
                let nodes = boundary_nodes(&domain, n)?;
                let m = regularity_matrix(&ext.basis, &nodes, order, false);
                let want = RegularitySource::Analytic(&f).traces(&nodes, k as usize);
                let jump = (0..m.nrows())
                    .map(|r| {
                        let got: f64 = m.row(r).iter().zip(&ext.coefficients).map(|(a, b)| a * b).sum();
                        (got - want.as_slice()[r]).abs()
                    })
                    .fold(0.0, f64::max);
                let slope = decay_slope(&magnitudes);
                Ok((
                    ConvergenceRow {
                        case: spec.id,
                        k,
                        n,
                        n_b: nodes.len(),
                        half_width: ext.basis.half_width(),
                        error_inf: jump,
                        residual: ext.residual,
                        within_tolerance: true,
                    },
                    SpectrumSeries {
                        k,
                        n,
                        magnitudes,
                        slope,
                    },
                ))
            };
            (k, n, run().map_err(|e| e.to_string()))
        })
        .collect();
    let mut rows = Vec::new();
    let mut spectra = Vec::new();
    let mut failures = Vec::new();
    for (k, n, r) in results {
        match r {
            Ok((row, series)) => {
                rows.push(row);
                spectra.push(series);
            }
            Err(message) => failures.push(CellFailure { k, n, message }),
        }
    }
    rows.sort_by_key(|r| (r.k, r.n));
    spectra.sort_by_key(|s| (s.k, s.n));
    // the reported rate of a continuation is the coefficient decay slope at the
    // finest grid
    let rates = spec
        .k
        .iter()
        .map(|&k| {
            let slope = spectra.iter().rev().find(|s| s.k == k).and_then(|s| s.slope);
            (
                k,
                RateEstimate {
                    slope,
                    pairwise: Vec::new(),
                    status: if slope.is_some() {
                        RateStatus::Fitted
                    } else {
                        RateStatus::Insufficient
                    },
                    points_used: 1,
                },
            )
        })
        .collect();
    Ok(CaseOutcome::Continuation {
        record: ConvergenceRecord {
            case: spec.id,
            reference: Reference::None,
            reference_n: None,
            rows,
            rates,
            failures,
            reference_residuals: BTreeMap::new(),
        },
        spectra,
    })
}

fn eigen_study(spec: &CaseSpec) -> Result<EigenRecord, HarnessError> {
    let domain = spec.id.domain();
    let measure = domain.measure();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for &n in &spec.n {
        for &k in &spec.k {
            let mut cfg = EigConfig::new(spec.shifts[0], n);
            cfg.order = order(k)?;
            cfg.seed = spec.seed;
            if let Some(t) = spec.tolerance {
                cfg.tolerance = t;
            }
            if let Some(m) = spec.max_iters {
                cfg.max_iters = m;
            }
            let scan = scan_spectrum(&spec.shifts, &cfg, &domain);
            for r in &scan.eigenvalues {
                rows.push(EigenRow {
                    case: spec.id,
                    n,
                    k,
                    shift: r.shift,
                    eigenvalue: r.eigenvalue,
                    scaled: r.eigenvalue * measure,
                    iterations: r.iterations,
                    final_deviation: r.final_deviation(),
                    residual: r.residual,
                    boundary_max: r.boundary_max,
                });
            }
            for (shift, e) in scan.failures {
                failures.push((n, k, shift, e.to_string()));
            }
        }
    }
    Ok(EigenRecord {
        case: spec.id,
        measure,
        rows,
        failures,
    })
}

/// Execute one case. Cell failures are recorded in the outcome, not raised.
pub fn run_case(spec: &CaseSpec, opts: &StudyOptions) -> Result<CaseOutcome, HarnessError> {
    spec.validate()?;
    match spec.id.kind() {
        CaseKind::Extension => continuation_study(spec),
        CaseKind::Elliptic | CaseKind::Heat => Ok(CaseOutcome::Convergence(convergence_study(spec, opts)?)),
        CaseKind::Eigen => Ok(CaseOutcome::Eigen(eigen_study(spec)?)),
    }
}
