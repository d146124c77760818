//! Elliptic solves `Lu = f` on Ω with boundary data, through the extended
//! forcing: assemble constraints, take the minimum-norm extension, invert
//! `L` on the torus.

use std::sync::Arc;

use crate::boundary::{eval_at_nodes, normal_derivative_traces};
use crate::error::{Result, SfeError};
use crate::extension::{
    assemble_mean_row, boundary_matrix, boundary_rhs, choose_num_modes, compose_forcing,
    masked_regularity_matrix, masked_regularity_rhs, regularity_matrix, AssemblyRoute, BcKind, ExtendedForcing, ExtensionBasis, ExtensionSystem,
    InversePath, ModeContext, RegularityOrder, RegularitySource, SystemLayout,
};
use crate::geometry::{boundary_nodes, grid_masks, BoundaryDiscretization, Domain, GridMasks};
use crate::jet::ClosedForm;
use crate::min_norm::{MinNormSolver, RESIDUAL_TOLERANCE};
use crate::spectral::{Grid, GridField, OperatorSymbol};

/// Per-node boundary condition and its datum. Neumann data are derivatives
/// along the node's outward normal.
#[derive(Clone, Debug, PartialEq)]
pub struct BcSpec {
    pub kinds: Vec<BcKind>,
    pub data: Vec<f64>,
}

impl BcSpec {
    pub fn dirichlet(data: Vec<f64>) -> Self {
        Self {
            kinds: vec![BcKind::Dirichlet; data.len()],
            data,
        }
    }

    /// Dirichlet data `g(s_i)` at every node.
    pub fn dirichlet_fn(nodes: &BoundaryDiscretization, g: impl Fn(&[f64]) -> f64) -> Self {
        Self::dirichlet(nodes.positions.iter().map(|s| g(s)).collect())
    }

    pub fn homogeneous(nodes: &BoundaryDiscretization) -> Self {
        Self::dirichlet(vec![0.0; nodes.len()])
    }

    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }
}

/// How the regularity constraints are posed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum RegularityPath {
    /// `T_k* h = T_k* f` with exact mode traces and a closed-form forcing.
    #[default]
    Analytic,
    /// `T_k*(χ_Ω h) = T_k*(χ_Ω f)` with spectral traces of masked grid
    /// fields; needs Ω samples only.
    Spectral,
}

/// Forcing data: Ω samples, plus a closed form for the analytic path.
#[derive(Clone, Debug)]
pub struct Forcing {
    /// Grid samples; only Ω entries are read.
    pub samples: Vec<f64>,
    pub closed_form: Option<ClosedForm>,
}

impl Forcing {
    pub fn closed_form(f: ClosedForm, grid: &Grid, masks: &GridMasks) -> Self {
        let mut p = vec![0.0; grid.dim()];
        let samples = (0..grid.len())
            .map(|flat| {
                if masks.is_omega(flat) {
                    grid.point(flat, &mut p);
                    f.value(&p)
                } else {
                    0.0
                }
            })
            .collect();
        Self {
            samples,
            closed_form: Some(f),
        }
    }

    /// Grid samples only; enough for the spectral path or `k = -1`.
    pub fn samples(samples: Vec<f64>) -> Self {
        Self {
            samples,
            closed_form: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveDiagnostics {
    pub rows: usize,
    pub cols: usize,
    pub n_b: usize,
    pub half_width: usize,
    pub rank: usize,
    pub residual: f64,
    /// Whether the residual met the min-norm tolerance.
    pub converged: bool,
}

/// What to do when the constraint residual misses its tolerance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ResidualPolicy {
    /// Return a rank-deficiency error.
    #[default]
    Strict,
    /// Keep the truncated least-squares solution and flag it in the
    /// diagnostics.
    Report,
}

#[derive(Clone, Debug)]
pub struct Solution {
    /// Extended solution sampled on the grid.
    pub u_e: GridField,
    /// Mean unknown `U` on the zero-mean path.
    pub mean: Option<f64>,
    pub forcing: ExtendedForcing,
    pub masks: Arc<GridMasks>,
    pub nodes: Arc<BoundaryDiscretization>,
    pub diagnostics: SolveDiagnostics,
}

impl Solution {
    pub fn values(&self) -> &[f64] {
        self.u_e.values().expect("solutions are kept in value space")
    }

    /// `S* u_e` at the boundary nodes.
    pub fn boundary_values(&self) -> Vec<f64> {
        eval_at_nodes(&self.u_e, &self.nodes)
    }

    /// Largest boundary-condition violation at the nodes.
    pub fn boundary_defect(&self, bc: &BcSpec) -> f64 {
        let t = normal_derivative_traces(&self.u_e, &self.nodes, 1);
        bc.kinds
            .iter()
            .zip(&bc.data)
            .enumerate()
            .map(|(i, (kind, g))| {
                let l = usize::from(*kind == BcKind::Neumann);
                (t.get(l, i) - g).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Assembled and factorized constraint system for fixed domain, grid,
/// operator, regularity and boundary-condition kinds. Only right-hand sides
/// change between solves.
#[derive(Clone, Debug)]
pub struct EllipticMachinery {
    grid: Grid,
    masks: Arc<GridMasks>,
    nodes: Arc<BoundaryDiscretization>,
    operator: OperatorSymbol,
    inverse: InversePath,
    order: RegularityOrder,
    path: RegularityPath,
    residual_policy: ResidualPolicy,
    kinds: Vec<BcKind>,
    basis: ExtensionBasis,
    layout: SystemLayout,
    solver: MinNormSolver,
}

/// Everything that fixes the constraint matrix apart from domain and grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverSetup {
    pub operator: OperatorSymbol,
    pub order: RegularityOrder,
    pub path: RegularityPath,
    /// Boundary kinds; Dirichlet everywhere when `None`.
    pub kinds: Option<Vec<BcKind>>,
    pub route: AssemblyRoute,
    pub residual_policy: ResidualPolicy,
}

impl SolverSetup {
    pub fn new(operator: OperatorSymbol, order: RegularityOrder, path: RegularityPath) -> Self {
        Self {
            operator,
            order,
            path,
            kinds: None,
            route: AssemblyRoute::default(),
            residual_policy: ResidualPolicy::default(),
        }
    }

    pub fn with_kinds(mut self, kinds: Vec<BcKind>) -> Self {
        self.kinds = Some(kinds);
        self
    }

    pub fn with_route(mut self, route: AssemblyRoute) -> Self {
        self.route = route;
        self
    }

    pub fn with_residual_policy(mut self, policy: ResidualPolicy) -> Self {
        self.residual_policy = policy;
        self
    }
}

impl EllipticMachinery {
    pub fn new(domain: &Domain, n: usize, setup: SolverSetup) -> Result<Self> {
        let grid = Grid::new(domain.dim(), n)?;
        let masks = grid_masks(domain, &grid)?;
        let nodes = boundary_nodes(domain, n)?;
        Self::from_parts(grid, masks, nodes, setup)
    }

    pub fn from_parts(
        grid: Grid,
        masks: GridMasks,
        nodes: BoundaryDiscretization,
        setup: SolverSetup,
    ) -> Result<Self> {
        let SolverSetup {
            operator,
            order,
            path,
            kinds,
            route,
            residual_policy,
        } = setup;
        grid.check_same(masks.grid())?;
        let inverse = InversePath::for_operator(&operator, &grid)?;
        let kinds = kinds.unwrap_or_else(|| vec![BcKind::Dirichlet; nodes.len()]);
        if kinds.len() != nodes.len() {
            return Err(SfeError::Configuration(format!(
                "{} boundary conditions for {} nodes",
                kinds.len(),
                nodes.len()
            )));
        }
        let mean = inverse.has_mean_unknown();
        let half_width = choose_num_modes(nodes.len(), order, grid.dim(), ModeContext::Solver, mean);
        let basis = ExtensionBasis::new(grid.dim(), half_width);
        let layout = SystemLayout::new(
            nodes.len(),
            mean,
            nodes.len() * order.rows_per_node(),
            basis.dof(),
        );
        let mut matrix = nalgebra::DMatrix::zeros(layout.rows(), layout.cols());
        let b = boundary_matrix(&basis, &masks, &nodes, &inverse, &kinds, route)?;
        matrix.rows_mut(0, nodes.len()).copy_from(&b);
        if let Some(r) = layout.mean {
            let (row, _) = assemble_mean_row(&basis, &masks, &vec![0.0; grid.len()]);
            for (c, v) in row.iter().enumerate() {
                matrix[(r, c)] = *v;
            }
        }
        if !layout.regularity.is_empty() {
            let reg = match path {
                RegularityPath::Analytic => regularity_matrix(&basis, &nodes, order, mean),
                RegularityPath::Spectral => masked_regularity_matrix(&basis, &masks, &nodes, order, mean, route)?,
            };
            matrix
                .rows_mut(layout.regularity.start, layout.regularity.len())
                .copy_from(&reg);
        }
        let solver = MinNormSolver::new(matrix)?;
        Ok(Self {
            grid,
            masks: Arc::new(masks),
            nodes: Arc::new(nodes),
            operator,
            inverse,
            order,
            path,
            residual_policy,
            kinds,
            basis,
            layout,
            solver,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn masks(&self) -> &Arc<GridMasks> {
        &self.masks
    }

    pub fn nodes(&self) -> &Arc<BoundaryDiscretization> {
        &self.nodes
    }

    pub fn operator(&self) -> &OperatorSymbol {
        &self.operator
    }

    pub fn order(&self) -> RegularityOrder {
        self.order
    }

    pub fn path(&self) -> RegularityPath {
        self.path
    }

    pub fn kinds(&self) -> &[BcKind] {
        &self.kinds
    }

    pub fn basis(&self) -> &ExtensionBasis {
        &self.basis
    }

    pub fn layout(&self) -> &SystemLayout {
        &self.layout
    }

    pub fn solver(&self) -> &MinNormSolver {
        &self.solver
    }

    /// Right-hand side for given forcing and boundary data.
    pub fn rhs(&self, forcing: &Forcing, data: &[f64]) -> Result<Vec<f64>> {
        if forcing.samples.len() != self.grid.len() {
            return Err(SfeError::GridMismatch {
                expected: self.grid.n(),
                expected_dim: self.grid.dim(),
                found: forcing.samples.len(),
                found_dim: 0,
            });
        }
        if data.len() != self.nodes.len() {
            return Err(SfeError::Configuration(format!(
                "{} boundary data for {} nodes",
                data.len(),
                self.nodes.len()
            )));
        }
        let mut b = boundary_rhs(
            &forcing.samples,
            &self.masks,
            &self.nodes,
            &self.inverse,
            &self.kinds,
            data,
        )?;
        if self.layout.mean.is_some() {
            let w = self.grid.cell_volume();
            b.push(-w * self.masks.omega_indices().map(|i| forcing.samples[i]).sum::<f64>());
        }
        if let Some(order) = self.order.max_derivative() {
            match self.path {
                RegularityPath::Analytic => {
                    let f = forcing.closed_form.as_ref().ok_or_else(|| {
                        SfeError::Configuration("analytic regularity path needs a closed-form forcing".into())
                    })?;
                    b.extend_from_slice(RegularitySource::Analytic(f).traces(&self.nodes, order).as_slice());
                }
                RegularityPath::Spectral => {
                    b.extend(masked_regularity_rhs(&forcing.samples, &self.masks, &self.nodes, self.order)?);
                }
            }
        }
        Ok(b)
    }

    /// The assembled system for given data, e.g. for export.
    pub fn system(&self, forcing: &Forcing, data: &[f64]) -> Result<ExtensionSystem> {
        Ok(ExtensionSystem {
            matrix: self.solver.matrix().clone(),
            rhs: self.rhs(forcing, data)?,
            layout: self.layout.clone(),
        })
    }

    pub fn solve(&self, forcing: &Forcing, data: &[f64]) -> Result<Solution> {
        let b = self.rhs(forcing, data)?;
        let sol = match self.residual_policy {
            ResidualPolicy::Strict => self.solver.solve(&b)?,
            ResidualPolicy::Report => self.solver.solve_unchecked(&b)?,
        };
        let bnorm = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        let converged = sol.residual <= RESIDUAL_TOLERANCE * (1.0 + bnorm);
        let dof = self.basis.dof();
        let coefficients = sol.x[..dof].to_vec();
        let mean = self.layout.mean_column.map(|c| sol.x[c]);
        let f_e = compose_forcing(&forcing.samples, &self.masks, &self.basis, &coefficients)?;
        let mut u = self.inverse.apply(&f_e).into_values()?;
        if let (Some(m), crate::spectral::Representation::Values(v)) = (mean, u.representation()) {
            let shifted: Vec<f64> = v.iter().map(|x| x + m).collect();
            u = GridField::from_values(self.grid, shifted)?;
        }
        Ok(Solution {
            u_e: u,
            mean,
            forcing: ExtendedForcing {
                basis: self.basis.clone(),
                coefficients,
                mean,
                values: f_e,
                residual: sol.residual,
                rank: sol.rank,
            },
            masks: self.masks.clone(),
            nodes: self.nodes.clone(),
            diagnostics: SolveDiagnostics {
                rows: self.layout.rows(),
                cols: self.layout.cols(),
                n_b: self.nodes.len(),
                half_width: self.basis.half_width(),
                rank: sol.rank,
                residual: sol.residual,
                converged,
            },
        })
    }
}

/// One-shot solve: build the machinery for `bc.kinds` and solve once.
pub fn solve(
    operator: OperatorSymbol,
    forcing: &Forcing,
    bc: &BcSpec,
    domain: &Domain,
    n: usize,
    order: RegularityOrder,
    path: RegularityPath,
) -> Result<Solution> {
    let setup = SolverSetup::new(operator, order, path).with_kinds(bc.kinds.clone());
    EllipticMachinery::new(domain, n, setup)?.solve(forcing, &bc.data)
}

/// `max |u_e - u_exact|` over Ω grid nodes.
pub fn manufactured_error(solution: &Solution, exact: impl Fn(&[f64]) -> f64) -> f64 {
    let grid = solution.u_e.grid();
    let values = solution.values();
    let mut p = vec![0.0; grid.dim()];
    solution
        .masks
        .omega_indices()
        .map(|flat| {
            grid.point(flat, &mut p);
            (values[flat] - exact(&p)).abs()
        })
        .fold(0.0, f64::max)
}

/// `max |coarse - fine|` over Ω nodes of the coarse grid, comparing against
/// the fine field at the coincident nested nodes.
pub fn nested_difference(coarse: &GridField, masks: &GridMasks, fine: &GridField) -> Result<f64> {
    let cg = coarse.grid();
    let fg = fine.grid();
    cg.check_same(masks.grid())?;
    if fg.dim() != cg.dim() || fg.n() % cg.n() != 0 {
        return Err(SfeError::GridMismatch {
            expected: cg.n(),
            expected_dim: cg.dim(),
            found: fg.n(),
            found_dim: fg.dim(),
        });
    }
    let fv = fine.value_vec()?;
    let cv = coarse.value_vec()?;
    Ok(masks
        .omega_indices()
        .map(|flat| (cv[flat] - fv[cg.nested_index(flat, fg)]).abs())
        .fold(0.0, f64::max))
}
