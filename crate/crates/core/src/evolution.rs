//! Heat-type evolution `u_t - Δu = f(t, x)` on Ω: BDF-4 in time, each step a
//! Helmholtz solve through the extended forcing, started by Backward Euler or
//! from exact history.

use std::collections::VecDeque;
use std::io::Write;
use std::sync::Arc;

use crate::error::{Result, SfeError};
use crate::extension::RegularityOrder;
use crate::elliptic::{EllipticMachinery, Forcing, RegularityPath, SolverSetup};
use crate::geometry::{Domain, GridMasks};
use crate::spectral::{invert_helmholtz, Grid, GridField, OperatorSymbol};

/// `(t, x) ↦ value`.
pub type SpaceTimeFn = Arc<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>;

/// BDF-4 history weights on `u^n, u^{n-1}, u^{n-2}, u^{n-3}`, over 25.
pub const BDF4_HISTORY: [f64; 4] = [48.0, -36.0, 16.0, -3.0];
/// BDF-4 weight on `Δt f^{n+1}` and on `Δt Δ`, over 25.
pub const BDF4_IMPLICIT: f64 = 12.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StartScheme {
    /// Three Backward Euler steps with the BDF-4 time step.
    BackwardEuler,
    /// `u` at `t = 0, Δt, 2Δt, 3Δt` sampled from the exact solution.
    ExactHistory,
}

impl StartScheme {
    pub fn name(&self) -> &'static str {
        match self {
            StartScheme::BackwardEuler => "bdf4_with_euler_start",
            StartScheme::ExactHistory => "bdf4_with_exact_history",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepperConfig {
    pub dt: f64,
    pub final_time: f64,
    pub scheme: StartScheme,
    pub order: RegularityOrder,
    /// Rebuild the constraint machinery every step instead of reusing it.
    pub reassemble_each_step: bool,
}

impl StepperConfig {
    pub fn new(dt: f64, final_time: f64, scheme: StartScheme, order: RegularityOrder) -> Result<Self> {
        let cfg = Self {
            dt,
            final_time,
            scheme,
            order,
            reassemble_each_step: false,
        };
        cfg.steps()?;
        Ok(cfg)
    }

    /// Number of steps `T / Δt`, which must be an integer up to round-off.
    pub fn steps(&self) -> Result<usize> {
        if !(self.dt > 0.0) || !self.dt.is_finite() || !(self.final_time >= 0.0) {
            return Err(SfeError::InvalidParameter(format!(
                "need dt > 0 and T >= 0, got dt = {}, T = {}",
                self.dt, self.final_time
            )));
        }
        let s = (self.final_time / self.dt).round();
        if (s * self.dt - self.final_time).abs() > 1e-9 * self.final_time.max(1.0) {
            return Err(SfeError::InvalidParameter(format!(
                "T = {} is not an integer multiple of dt = {}",
                self.final_time, self.dt
            )));
        }
        Ok(s as usize)
    }
}

/// Last four solutions, newest first.
#[derive(Clone, Debug, Default)]
pub struct History {
    ring: VecDeque<GridField>,
}

impl History {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, u: GridField) -> Result<()> {
        if let Some(front) = self.ring.front() {
            front.grid().check_same(u.grid())?;
        }
        self.ring.push_front(u);
        self.ring.truncate(4);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.ring.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ring.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.ring.len() == 4
    }

    /// `u^{n-lag}`.
    pub fn get(&self, lag: usize) -> Option<&GridField> {
        self.ring.get(lag)
    }

    pub fn latest(&self) -> Option<&GridField> {
        self.ring.front()
    }
}

/// How a Helmholtz step `(I - αΔ)u = F` is solved.
#[derive(Clone, Debug)]
pub enum StepSolver {
    /// On Ω with Dirichlet data, through the extended forcing.
    Embedded(Box<EllipticMachinery>),
    /// On the whole torus, no boundary.
    Periodic { grid: Grid, alpha: f64 },
}

impl StepSolver {
    pub fn embedded(domain: &Domain, n: usize, alpha: f64, order: RegularityOrder) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(SfeError::InvalidParameter(format!(
                "Helmholtz parameter must be positive, got {alpha}"
            )));
        }
        let setup = SolverSetup::new(OperatorSymbol::Helmholtz { alpha }, order, RegularityPath::Spectral);
        Ok(StepSolver::Embedded(Box::new(EllipticMachinery::new(domain, n, setup)?)))
    }

    pub fn periodic(grid: Grid, alpha: f64) -> Self {
        StepSolver::Periodic { grid, alpha }
    }

    pub fn grid(&self) -> &Grid {
        match self {
            StepSolver::Embedded(m) => m.grid(),
            StepSolver::Periodic { grid, .. } => grid,
        }
    }

    pub fn alpha(&self) -> f64 {
        match self {
            StepSolver::Embedded(m) => match m.operator() {
                OperatorSymbol::Helmholtz { alpha } => *alpha,
                _ => f64::NAN,
            },
            StepSolver::Periodic { alpha, .. } => *alpha,
        }
    }

    /// Solve with forcing `rhs` (only Ω values matter in the embedded case)
    /// and boundary data `g` (ignored on the torus).
    pub fn solve(&self, rhs: GridField, g: &[f64]) -> Result<GridField> {
        self.grid().check_same(rhs.grid())?;
        match self {
            StepSolver::Embedded(m) => {
                let forcing = Forcing::samples(rhs.value_vec()?);
                Ok(m.solve(&forcing, g)?.u_e)
            }
            StepSolver::Periodic { alpha, .. } => invert_helmholtz(&rhs, *alpha)?.into_values(),
        }
    }
}

/// One BDF-4 step: `(I - (12Δt/25)Δ)u^{n+1} = F^{n+1}` with
/// `F^{n+1} = (12Δt f^{n+1} + 48u^n - 36u^{n-1} + 16u^{n-2} - 3u^{n-3})/25`.
pub fn bdf4_step(
    history: &History,
    f_next: &GridField,
    g_next: &[f64],
    dt: f64,
    solver: &StepSolver,
) -> Result<GridField> {
    if !history.is_full() {
        return Err(SfeError::Configuration(format!(
            "BDF-4 needs four history levels, have {}",
            history.len()
        )));
    }
    let mut terms: Vec<(f64, &GridField)> = vec![(BDF4_IMPLICIT * dt / 25.0, f_next)];
    for (lag, w) in BDF4_HISTORY.iter().enumerate() {
        terms.push((w / 25.0, history.get(lag).expect("full history")));
    }
    let rhs = GridField::linear_combination(&terms)?;
    solver.solve(rhs, g_next)
}

/// One Backward Euler step: `(I - ΔtΔ)u^{n+1} = Δt f^{n+1} + u^n`.
pub fn euler_step(
    u_prev: &GridField,
    f_next: &GridField,
    g_next: &[f64],
    dt: f64,
    solver: &StepSolver,
) -> Result<GridField> {
    let rhs = GridField::linear_combination(&[(dt, f_next), (1.0, u_prev)])?;
    solver.solve(rhs, g_next)
}

/// A heat problem on a domain (or the whole torus when `domain` is `None`).
#[derive(Clone)]
pub struct HeatProblem {
    pub domain: Option<Domain>,
    pub forcing: SpaceTimeFn,
    pub boundary: SpaceTimeFn,
    pub initial: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    pub exact: Option<SpaceTimeFn>,
}

impl std::fmt::Debug for HeatProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HeatProblem")
            .field("domain", &self.domain)
            .field("exact", &self.exact.is_some())
            .finish()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub time: f64,
    pub error_inf: Option<f64>,
    pub max_abs: f64,
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub solution: GridField,
    pub masks: Option<Arc<GridMasks>>,
    pub trace: Vec<StepRecord>,
    /// `L∞` error at the final time over Ω nodes, when an exact solution is known.
    pub final_error: Option<f64>,
}

impl RunResult {
    /// Per-step trace as CSV: `step,t,error_inf,max_abs`.
    pub fn write_trace_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "step,t,error_inf,max_abs")?;
        for r in &self.trace {
            let err = r.error_inf.map(|e| format!("{e:.16e}")).unwrap_or_default();
            writeln!(out, "{},{:.16e},{},{:.16e}", r.step, r.time, err, r.max_abs)?;
        }
        Ok(())
    }
}

struct Sampler<'a> {
    grid: Grid,
    masks: Option<&'a GridMasks>,
    points: Vec<Vec<f64>>,
}

impl Sampler<'_> {
    fn field(&self, f: impl Fn(&[f64]) -> f64) -> GridField {
        let v = self.points.iter().map(|p| f(p)).collect();
        GridField::from_values(self.grid, v).expect("grid-sized")
    }

    fn omega_max(&self, values: &[f64], g: impl Fn(usize) -> f64) -> f64 {
        (0..values.len())
            .filter(|&i| self.masks.map_or(true, |m| m.is_omega(i)))
            .map(g)
            .fold(0.0, f64::max)
    }
}

/// Integrate to `config.final_time` on a grid with `n` points per axis.
pub fn run(problem: &HeatProblem, n: usize, config: &StepperConfig) -> Result<RunResult> {
    let steps = config.steps()?;
    let dt = config.dt;
    let dim = problem.domain.as_ref().map_or(1, |d| d.dim());
    let grid = Grid::new(dim, n)?;
    let alpha_bdf = BDF4_IMPLICIT * dt / 25.0;
    let build = |alpha: f64| -> Result<StepSolver> {
        match &problem.domain {
            Some(d) => StepSolver::embedded(d, n, alpha, config.order),
            None => Ok(StepSolver::periodic(grid, alpha)),
        }
    };
    let mut bdf = build(alpha_bdf)?;
    let euler = match config.scheme {
        StartScheme::BackwardEuler => Some(build(dt)?),
        StartScheme::ExactHistory => None,
    };
    let masks = match &bdf {
        StepSolver::Embedded(m) => Some(m.masks().clone()),
        StepSolver::Periodic { .. } => None,
    };
    let nodes = match &bdf {
        StepSolver::Embedded(m) => Some(m.nodes().clone()),
        StepSolver::Periodic { .. } => None,
    };
    let sampler = Sampler {
        grid,
        masks: masks.as_deref(),
        points: grid.points(),
    };
    let boundary_data = |t: f64| -> Vec<f64> {
        nodes
            .as_ref()
            .map(|nd| nd.positions.iter().map(|s| (problem.boundary)(t, s)).collect())
            .unwrap_or_default()
    };
    let record = |step: usize, u: &GridField| -> Result<StepRecord> {
        let t = step as f64 * dt;
        let v = u.value_vec()?;
        let max_abs = sampler.omega_max(&v, |i| v[i].abs());
        let error_inf = problem.exact.as_ref().map(|ex| {
            sampler.omega_max(&v, |i| (v[i] - ex(t, &sampler.points[i])).abs())
        });
        Ok(StepRecord {
            step,
            time: t,
            error_inf,
            max_abs,
        })
    };

    let u0 = sampler.field(|x| (problem.initial)(x));
    let limit = 1e6 * (1.0 + record(0, &u0)?.max_abs);
    let mut history = History::new();
    let mut trace = vec![record(0, &u0)?];
    history.push(u0)?;
    let start_levels = 3.min(steps);
    for s in 1..=start_levels {
        let t = s as f64 * dt;
        let u = match config.scheme {
            StartScheme::ExactHistory => {
                let ex = problem.exact.as_ref().ok_or_else(|| {
                    SfeError::Configuration("exact-history start needs an exact solution".into())
                })?;
                sampler.field(|x| ex(t, x))
            }
            StartScheme::BackwardEuler => {
                let f = sampler.field(|x| (problem.forcing)(t, x));
                let solver = if config.reassemble_each_step {
                    build(dt)?
                } else {
                    euler.clone().expect("euler machinery")
                };
                euler_step(history.latest().expect("u0"), &f, &boundary_data(t), dt, &solver)?
            }
        };
        trace.push(record(s, &u)?);
        history.push(u)?;
    }
    for s in start_levels + 1..=steps {
        let t = s as f64 * dt;
        let f = sampler.field(|x| (problem.forcing)(t, x));
        if config.reassemble_each_step {
            bdf = build(alpha_bdf)?;
        }
        let u = bdf4_step(&history, &f, &boundary_data(t), dt, &bdf)?;
        let rec = record(s, &u)?;
        if !(rec.max_abs <= limit) {
            return Err(SfeError::BlowUp {
                step: s,
                time: t,
                norm: rec.max_abs,
            });
        }
        trace.push(rec);
        history.push(u)?;
    }
    let final_error = trace.last().and_then(|r| r.error_inf);
    Ok(RunResult {
        solution: history.latest().expect("nonempty").clone(),
        masks,
        trace,
        final_error,
    })
}
