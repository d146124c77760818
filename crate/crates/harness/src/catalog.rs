//! The fixed experiment catalog: domains, forcings, exact solutions and
//! default parameter sweeps for every case.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sfe_core::evolution::{HeatProblem, StartScheme};
use sfe_core::geometry::{Domain, DomainSpec};
use sfe_core::jet::{ClosedForm, Jet};

use crate::error::HarnessError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseId {
    #[serde(rename = "extension_1d")]
    Extension1d,
    #[serde(rename = "poisson_1d_dirichlet")]
    Poisson1dDirichlet,
    #[serde(rename = "poisson_1d_mixed")]
    Poisson1dMixed,
    #[serde(rename = "heat_1d")]
    Heat1d,
    #[serde(rename = "poisson_2d_disc")]
    Poisson2dDisc,
    #[serde(rename = "poisson_2d_eye")]
    Poisson2dEye,
    #[serde(rename = "poisson_2d_diamond")]
    Poisson2dDiamond,
    #[serde(rename = "heat_2d")]
    Heat2d,
    EigsDisc,
    EigsEye,
    EigsDiamond,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CaseKind {
    Extension,
    Elliptic,
    Heat,
    Eigen,
}

/// What errors are measured against.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reference {
    Exact,
    Manufactured,
    FinestGrid,
    /// Eigenvalues and continuation spectra have no error reference.
    None,
}

impl CaseId {
    pub const ALL: [CaseId; 11] = [
        CaseId::Extension1d,
        CaseId::Poisson1dDirichlet,
        CaseId::Poisson1dMixed,
        CaseId::Heat1d,
        CaseId::Poisson2dDisc,
        CaseId::Poisson2dEye,
        CaseId::Poisson2dDiamond,
        CaseId::Heat2d,
        CaseId::EigsDisc,
        CaseId::EigsEye,
        CaseId::EigsDiamond,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            CaseId::Extension1d => "extension_1d",
            CaseId::Poisson1dDirichlet => "poisson_1d_dirichlet",
            CaseId::Poisson1dMixed => "poisson_1d_mixed",
            CaseId::Heat1d => "heat_1d",
            CaseId::Poisson2dDisc => "poisson_2d_disc",
            CaseId::Poisson2dEye => "poisson_2d_eye",
            CaseId::Poisson2dDiamond => "poisson_2d_diamond",
            CaseId::Heat2d => "heat_2d",
            CaseId::EigsDisc => "eigs_disc",
            CaseId::EigsEye => "eigs_eye",
            CaseId::EigsDiamond => "eigs_diamond",
        }
    }

    pub fn kind(&self) -> CaseKind {
        match self {
            CaseId::Extension1d => CaseKind::Extension,
            CaseId::Poisson1dDirichlet
            | CaseId::Poisson1dMixed
            | CaseId::Poisson2dDisc
            | CaseId::Poisson2dEye
            | CaseId::Poisson2dDiamond => CaseKind::Elliptic,
            CaseId::Heat1d | CaseId::Heat2d => CaseKind::Heat,
            CaseId::EigsDisc | CaseId::EigsEye | CaseId::EigsDiamond => CaseKind::Eigen,
        }
    }

    pub fn reference(&self) -> Reference {
        match self {
            CaseId::Poisson1dDirichlet | CaseId::Poisson1dMixed => Reference::Exact,
            CaseId::Poisson2dEye | CaseId::Poisson2dDiamond | CaseId::Heat2d => Reference::Manufactured,
            CaseId::Heat1d | CaseId::Poisson2dDisc => Reference::FinestGrid,
            CaseId::Extension1d | CaseId::EigsDisc | CaseId::EigsEye | CaseId::EigsDiamond => {
                Reference::None
            }
        }
    }

    pub fn description(&self) -> &'static str {
        match self {
            CaseId::Extension1d => "k-regular continuation of 1/(x-1) from (2,5); coefficient decay",
            CaseId::Poisson1dDirichlet => "u'' = 1/(x-1) on (2,5), u(2) = 1, u(5) = -1",
            CaseId::Poisson1dMixed => "u'' = 1/(x-1) on (2,5), u'(2) = 1, u(5) = -1",
            CaseId::Heat1d => "u_t - u_xx = sin x on (2,5), u0 = e^sin x, u(2) = 1, u(5) = 0, T = 1",
            CaseId::Poisson2dDisc => "-Δu = 5 sin x cos y outside the unit disc at (2,3), u = 0",
            CaseId::Poisson2dEye => "manufactured u = e^sin x cos y on the eye domain",
            CaseId::Poisson2dDiamond => "manufactured u = e^sin x cos y on the diamond domain",
            CaseId::Heat2d => "u = e^sin x cos y cos t outside the disc, T = 2, dt = 1/(4N)",
            CaseId::EigsDisc => "Dirichlet eigenvalues of -Δ outside the disc",
            CaseId::EigsEye => "Dirichlet eigenvalues of -Δ on the eye domain",
            CaseId::EigsDiamond => "Dirichlet eigenvalues of -Δ on the diamond domain",
        }
    }

    pub fn domain(&self) -> Domain {
        let spec = match self {
            CaseId::Extension1d | CaseId::Poisson1dDirichlet | CaseId::Poisson1dMixed | CaseId::Heat1d => {
                DomainSpec::Interval { a: 2.0, b: 5.0 }
            }
            CaseId::Poisson2dDisc | CaseId::Heat2d | CaseId::EigsDisc => DomainSpec::DiscComplement {
                center: [2.0, 3.0],
                radius: 1.0,
            },
            CaseId::Poisson2dEye | CaseId::EigsEye => DomainSpec::Eye {
                center: [3.0, 3.0],
                radius: 3.0,
                angle: 0.75 * PI,
            },
            CaseId::Poisson2dDiamond | CaseId::EigsDiamond => DomainSpec::Diamond {
                center: [3.0, 3.5],
                side: 3.0,
            },
        };
        Domain::new(spec).expect("catalog domains fit in the box")
    }

    /// Default sweep for the case.
    pub fn defaults(&self) -> CaseSpec {
        let pow2 = |lo: u32, hi: u32| (lo..=hi).map(|p| 1usize << p).collect::<Vec<_>>();
        let mut spec = CaseSpec {
            id: *self,
            n: pow2(5, 8),
            k: vec![-1, 0, 1],
            reference_n: None,
            dt: None,
            dt_per_n: None,
            final_time: None,
            start: None,
            shifts: Vec::new(),
            tolerance: None,
            max_iters: None,
            seed: 0,
            output: None,
        };
        match self {
            CaseId::Extension1d => {
                spec.n = vec![1 << 12];
                spec.k = vec![0, 1, 2, 3];
            }
            CaseId::Poisson1dDirichlet => {
                spec.n = pow2(4, 10);
                spec.k = vec![-1, 0, 1, 2];
            }
            CaseId::Poisson1dMixed => {
                spec.n = pow2(4, 10);
                spec.k = vec![0, 1, 2];
            }
            CaseId::Heat1d => {
                spec.k = vec![0, 1];
                spec.reference_n = Some(1 << 10);
                spec.dt = Some(2.5e-3);
                spec.final_time = Some(1.0);
                spec.start = Some(StartName::BackwardEuler);
            }
            CaseId::Heat2d => {
                spec.n = pow2(5, 7);
                spec.k = vec![0, 1];
                spec.dt_per_n = Some(0.25);
                spec.final_time = Some(2.0);
                spec.start = Some(StartName::ExactHistory);
            }
            CaseId::Poisson2dDisc | CaseId::Poisson2dEye | CaseId::Poisson2dDiamond => {}
            CaseId::EigsDisc | CaseId::EigsEye | CaseId::EigsDiamond => {
                spec.n = vec![1 << 7];
                spec.k = vec![-1];
                spec.tolerance = Some(1e-8);
                spec.max_iters = Some(2000);
                spec.shifts = match self {
                    CaseId::EigsDisc => vec![0.2],
                    CaseId::EigsEye => vec![1.3],
                    _ => vec![2.3, 5.6, 8.6],
                };
            }
        }
        spec
    }
}

impl fmt::Display for CaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CaseId {
    type Err = HarnessError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CaseId::ALL
            .iter()
            .copied()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| HarnessError::Config(format!("unknown case id `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartName {
    BackwardEuler,
    ExactHistory,
}

impl From<StartName> for StartScheme {
    fn from(s: StartName) -> Self {
        match s {
            StartName::BackwardEuler => StartScheme::BackwardEuler,
            StartName::ExactHistory => StartScheme::ExactHistory,
        }
    }
}

/// A fully resolved experiment: catalog defaults with overrides applied.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseSpec {
    pub id: CaseId,
    pub n: Vec<usize>,
    pub k: Vec<i32>,
    /// Grid used as the reference for finest-grid errors; defaults to the
    /// largest entry of `n`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    /// Time step `dt_per_n / N`, coupling the step to the grid.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt_per_n: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_time: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub start: Option<StartName>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub shifts: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iters: Option<usize>,
    pub seed: u64,
    /// File stem for the outputs; defaults to the case id.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

impl CaseSpec {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(format!("{}: {m}", self.id)));
        if self.n.is_empty() {
            return bad("empty N list".into());
        }
        if let Some(n) = self.n.iter().find(|n| !n.is_power_of_two() || **n < 8) {
            return bad(format!("N = {n} is not a power of two >= 8"));
        }
        if self.n.windows(2).any(|w| w[0] >= w[1]) {
            return bad("N list must be strictly ascending".into());
        }
        if self.k.is_empty() {
            return bad("empty k list".into());
        }
        if let Some(k) = self.k.iter().find(|k| **k < -1) {
            return bad(format!("k = {k} is below -1"));
        }
        if let Some(r) = self.reference_n {
            let max = *self.n.last().expect("nonempty");
            if !r.is_power_of_two() || r < max {
                return bad(format!("reference N = {r} must be a power of two >= {max}"));
            }
        }
        match self.id.kind() {
            CaseKind::Heat => {
                if self.dt.is_some() == self.dt_per_n.is_some() {
                    return bad("exactly one of dt and dt_per_n is required".into());
                }
                if !self.final_time.is_some_and(|t| t > 0.0) {
                    return bad("final_time must be positive".into());
                }
                if self.start == Some(StartName::ExactHistory) && self.id == CaseId::Heat1d {
                    return bad("heat_1d has no exact solution for an exact-history start".into());
                }
            }
            CaseKind::Eigen => {
                if self.shifts.is_empty() {
                    return bad("empty shift list".into());
                }
                if !self.tolerance.is_some_and(|t| t > 0.0) {
                    return bad("tolerance must be positive".into());
                }
            }
            CaseKind::Extension if self.k.contains(&-1) => {
                return bad("continuation needs k >= 0".into());
            }
            _ => {}
        }
        if self.id.reference() == Reference::FinestGrid {
            let finest = self.reference_n.unwrap_or(*self.n.last().expect("nonempty"));
            if self.n.iter().filter(|&&n| n < finest).count() == 0 {
                return bad("finest-grid reference leaves no coarser grid to compare".into());
            }
        }
        Ok(())
    }

    pub fn stem(&self) -> String {
        self.output.clone().unwrap_or_else(|| self.id.to_string())
    }

    pub fn time_step(&self, n: usize) -> Option<f64> {
        self.dt.or_else(|| self.dt_per_n.map(|c| c / n as f64))
    }
}

/// `1 / (x - 1)`.
pub fn pole_forcing() -> ClosedForm {
    ClosedForm::new(|x: &[Jet]| (x[0] - 1.0).recip())
}

/// Integration constants of `u = (x-1)ln(x-1) + C1 x + C2`.
pub fn poisson_1d_constants(mixed: bool) -> (f64, f64) {
    let ln4 = 4f64.ln();
    if mixed {
        // u'(2) = 1 gives C1 = 0; u(5) = -1 then fixes C2
        (0.0, -1.0 - 4.0 * ln4)
    } else {
        let c1 = (-2.0 - 4.0 * ln4) / 3.0;
        (c1, 1.0 - 2.0 * c1)
    }
}

pub fn poisson_1d_exact(x: f64, mixed: bool) -> f64 {
    let (c1, c2) = poisson_1d_constants(mixed);
    (x - 1.0) * (x - 1.0).ln() + c1 * x + c2
}

/// `e^{sin x} cos y`.
pub fn manufactured(p: &[f64]) -> f64 {
    p[0].sin().exp() * p[1].cos()
}

/// `Δ(e^{sin x} cos y) = e^{sin x} cos y (cos²x - sin x - 1)`.
pub fn manufactured_laplacian() -> ClosedForm {
    ClosedForm::new(|p: &[Jet]| {
        let (s, c) = p[0].sin_cos();
        s.exp() * p[1].cos() * (c * c - s - 1.0)
    })
}

/// `Δu` for the disc problem `-Δu = 5 sin x cos y`.
pub fn disc_forcing() -> ClosedForm {
    ClosedForm::new(|p: &[Jet]| (p[0].sin() * p[1].cos()) * -5.0)
}

pub fn heat_1d_problem() -> HeatProblem {
    HeatProblem {
        domain: Some(CaseId::Heat1d.domain()),
        forcing: Arc::new(|_, x| x[0].sin()),
        boundary: Arc::new(|_, s| if s[0] < 3.5 { 1.0 } else { 0.0 }),
        initial: Arc::new(|x| x[0].sin().exp()),
        exact: None,
    }
}

pub fn heat_2d_exact(t: f64, p: &[f64]) -> f64 {
    manufactured(p) * t.cos()
}

pub fn heat_2d_problem() -> HeatProblem {
    HeatProblem {
        domain: Some(CaseId::Heat2d.domain()),
        forcing: Arc::new(|t, p| {
            let (s, c) = p[0].sin_cos();
            let space = s.exp() * p[1].cos();
            -space * t.sin() - t.cos() * space * (c * c - s - 1.0)
        }),
        boundary: Arc::new(heat_2d_exact),
        initial: Arc::new(|p| heat_2d_exact(0.0, p)),
        exact: Some(Arc::new(heat_2d_exact)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_round_trip() {
        for id in CaseId::ALL {
            assert_eq!(id.as_str().parse::<CaseId>().unwrap(), id);
            id.defaults().validate().unwrap();
        }
        assert!("poisson_3d".parse::<CaseId>().is_err());
    }

    #[test]
    fn exact_solutions_meet_boundary_data() {
        assert!((poisson_1d_exact(2.0, false) - 1.0).abs() < 1e-14);
        assert!((poisson_1d_exact(5.0, false) + 1.0).abs() < 1e-14);
        assert!((poisson_1d_exact(5.0, true) + 1.0).abs() < 1e-14);
        // u'(x) = ln(x-1) + 1 + C1
        let (c1, _) = poisson_1d_constants(true);
        assert!((1f64.ln() + 1.0 + c1 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn manufactured_laplacian_matches_differences() {
        let p = [1.3, 0.7];
        let h = 1e-4;
        let fd = (manufactured(&[p[0] + h, p[1]]) + manufactured(&[p[0] - h, p[1]])
            + manufactured(&[p[0], p[1] + h])
            + manufactured(&[p[0], p[1] - h])
            - 4.0 * manufactured(&p))
            / (h * h);
        assert!((fd - manufactured_laplacian().value(&p)).abs() < 1e-6);
    }

    #[test]
    fn empty_n_list_is_rejected() {
        let mut s = CaseId::Poisson2dDisc.defaults();
        s.n.clear();
        assert!(s.validate().is_err());
    }
}
