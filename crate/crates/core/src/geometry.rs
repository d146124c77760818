//! Physical domains embedded in the periodic box: membership, grid masks,
//! boundary node sets with outward unit normals, and exact measures.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Result, SfeError};
use crate::spectral::Grid;

const TWO_PI: f64 = 2.0 * PI;

/// Slack used when rounding node-count formulas that land on an integer.
const CEIL_SLACK: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub enum DomainSpec {
    /// `Ω = (a, b)` in one dimension.
    Interval { a: f64, b: f64 },
    /// The box minus a closed disc.
    DiscComplement { center: [f64; 2], radius: f64 },
    /// Lens bounded by two circular arcs of radius `radius`, each subtending
    /// `angle`, symmetric about the horizontal line through `center`.
    Eye {
        center: [f64; 2],
        radius: f64,
        angle: f64,
    },
    /// Square of side `side` rotated by 45 degrees.
    Diamond { center: [f64; 2], side: f64 },
}

impl DomainSpec {
    pub fn dim(&self) -> usize {
        match self {
            DomainSpec::Interval { .. } => 1,
            _ => 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Membership {
    Omega,
    Extension,
    Boundary,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Domain {
    spec: DomainSpec,
}

impl Domain {
    pub fn new(spec: DomainSpec) -> Result<Self> {
        let inside = |lo: f64, hi: f64| lo > 0.0 && hi < TWO_PI;
        let ok = match &spec {
            DomainSpec::Interval { a, b } => a < b && inside(*a, *b),
            DomainSpec::DiscComplement { center, radius } => {
                *radius > 0.0
                    && inside(center[0] - radius, center[0] + radius)
                    && inside(center[1] - radius, center[1] + radius)
            }
            DomainSpec::Eye {
                center,
                radius,
                angle,
            } => {
                let half_width = radius * (angle / 2.0).sin();
                let height = radius * (1.0 - (angle / 2.0).cos());
                *radius > 0.0
                    && *angle > 0.0
                    && *angle < PI
                    && inside(center[0] - half_width, center[0] + half_width)
                    && inside(center[1] - height, center[1] + height)
            }
            DomainSpec::Diamond { center, side } => {
                let r = side * FRAC_1_SQRT_2;
                *side > 0.0 && inside(center[0] - r, center[0] + r) && inside(center[1] - r, center[1] + r)
            }
        };
        if !ok {
            return Err(SfeError::InvalidParameter(format!(
                "domain {spec:?} does not fit strictly inside the periodic box"
            )));
        }
        Ok(Self { spec })
    }

    pub fn spec(&self) -> &DomainSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    /// `|Ω|` in closed form.
    pub fn measure(&self) -> f64 {
        match &self.spec {
            DomainSpec::Interval { a, b } => b - a,
            DomainSpec::DiscComplement { radius, .. } => TWO_PI * TWO_PI - PI * radius * radius,
            DomainSpec::Diamond { side, .. } => side * side,
            DomainSpec::Eye { radius, angle, .. } => radius * radius * (angle - angle.sin()),
        }
    }

    pub fn membership(&self, p: &[f64]) -> Membership {
        use std::cmp::Ordering::*;
        // signed "level" compared against its boundary value
        let cmp = match &self.spec {
            DomainSpec::Interval { a, b } => {
                let x = p[0];
                if x > *a && x < *b {
                    Less
                } else if x == *a || x == *b {
                    Equal
                } else {
                    Greater
                }
            }
            DomainSpec::DiscComplement { center, radius } => {
                let d2 = (p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2);
                // inside the disc is the extension region
                (radius * radius).total_cmp(&d2)
            }
            DomainSpec::Eye {
                center,
                radius,
                angle,
            } => {
                let (up, down) = eye_centers(center, *radius, *angle);
                let d = dist(p, &up).max(dist(p, &down));
                d.total_cmp(radius)
            }
            DomainSpec::Diamond { center, side } => {
                let l1 = (p[0] - center[0]).abs() + (p[1] - center[1]).abs();
                l1.total_cmp(&(side * FRAC_1_SQRT_2))
            }
        };
        match cmp {
            Less => Membership::Omega,
            Equal => Membership::Boundary,
            Greater => Membership::Extension,
        }
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        self.membership(p) != Membership::Extension
    }
}

fn dist(p: &[f64], c: &[f64; 2]) -> f64 {
    ((p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2)).sqrt()
}

/// Centers of the circles carrying the upper and lower arcs of the eye.
fn eye_centers(center: &[f64; 2], radius: f64, angle: f64) -> ([f64; 2], [f64; 2]) {
    let offset = radius * (angle / 2.0).cos();
    (
        [center[0], center[1] - offset],
        [center[0], center[1] + offset],
    )
}

/// Boundary nodes with outward (from Ω) unit normals.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryDiscretization {
    pub positions: Vec<Vec<f64>>,
    pub normals: Vec<Vec<f64>>,
    /// Distance between successive nodes along the boundary.
    pub spacing: f64,
}

impl BoundaryDiscretization {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.positions.first().map_or(0, |p| p.len())
    }
}

fn ceil_count(x: f64) -> usize {
    (x - CEIL_SLACK).ceil().max(1.0) as usize
}

pub fn boundary_nodes(domain: &Domain, n: usize) -> Result<BoundaryDiscretization> {
    if n < 8 {
        return Err(SfeError::InvalidParameter(format!(
            "boundary discretization needs N >= 8, got {n}"
        )));
    }
    let nf = n as f64;
    let nodes = match domain.spec() {
        DomainSpec::Interval { a, b } => BoundaryDiscretization {
            positions: vec![vec![*a], vec![*b]],
            normals: vec![vec![-1.0], vec![1.0]],
            spacing: b - a,
        },
        DomainSpec::DiscComplement { center, radius } => {
            let nb = ceil_count(0.5 * nf);
            let mut positions = Vec::with_capacity(nb);
            let mut normals = Vec::with_capacity(nb);
            for i in 0..nb {
                let theta = TWO_PI * i as f64 / nb as f64;
                let (s, c) = theta.sin_cos();
                positions.push(vec![center[0] + radius * c, center[1] + radius * s]);
                normals.push(vec![-c, -s]);
            }
            BoundaryDiscretization {
                positions,
                normals,
                spacing: TWO_PI * radius / nb as f64,
            }
        }
        DomainSpec::Eye {
            center,
            radius,
            angle,
        } => {
            let mut nb = ceil_count(radius * angle * nf / TWO_PI);
            nb += nb % 2;
            let per_arc = nb / 2;
            let (up, down) = eye_centers(center, *radius, *angle);
            let step = angle / per_arc as f64;
            let mut positions = Vec::with_capacity(nb);
            let mut normals = Vec::with_capacity(nb);
            for (c, mid) in [(up, PI / 2.0), (down, -PI / 2.0)] {
                let start = mid - angle / 2.0;
                for i in 0..per_arc {
                    let phi = start + (i as f64 + 0.5) * step;
                    let (s, co) = phi.sin_cos();
                    positions.push(vec![c[0] + radius * co, c[1] + radius * s]);
                    normals.push(vec![co, s]);
                }
            }
            BoundaryDiscretization {
                positions,
                normals,
                spacing: radius * step,
            }
        }
        DomainSpec::Diamond { center, side } => {
            let per_side = ceil_count(side * nf / (4.0 * PI));
            let r = side * FRAC_1_SQRT_2;
            let v = [
                [center[0] + r, center[1]],
                [center[0], center[1] + r],
                [center[0] - r, center[1]],
                [center[0], center[1] - r],
            ];
            let outward = [
                [FRAC_1_SQRT_2, FRAC_1_SQRT_2],
                [-FRAC_1_SQRT_2, FRAC_1_SQRT_2],
                [-FRAC_1_SQRT_2, -FRAC_1_SQRT_2],
                [FRAC_1_SQRT_2, -FRAC_1_SQRT_2],
            ];
            let mut positions = Vec::with_capacity(4 * per_side);
            let mut normals = Vec::with_capacity(4 * per_side);
            for s in 0..4 {
                let (a, b) = (v[s], v[(s + 1) % 4]);
                for i in 0..per_side {
                    let t = (i as f64 + 0.5) / per_side as f64;
                    positions.push(vec![a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
                    normals.push(outward[s].to_vec());
                }
            }
            BoundaryDiscretization {
                positions,
                normals,
                spacing: side / per_side as f64,
            }
        }
    };
    Ok(nodes)
}

/// Indicator of Ω on the grid; its complement is the indicator of E.
#[derive(Clone, Debug, PartialEq)]
pub struct GridMasks {
    grid: Grid,
    omega: Vec<bool>,
    omega_count: usize,
}

impl GridMasks {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn is_omega(&self, flat: usize) -> bool {
        self.omega[flat]
    }

    pub fn omega(&self) -> &[bool] {
        &self.omega
    }

    pub fn omega_count(&self) -> usize {
        self.omega_count
    }

    pub fn extension_count(&self) -> usize {
        self.omega.len() - self.omega_count
    }

    pub fn omega_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.omega.iter().enumerate().filter(|(_, &o)| o).map(|(i, _)| i)
    }

    /// χ_Ω as 0/1 samples.
    pub fn chi_omega(&self) -> Vec<f64> {
        self.omega.iter().map(|&o| if o { 1.0 } else { 0.0 }).collect()
    }

    /// χ_E as 0/1 samples.
    pub fn chi_extension(&self) -> Vec<f64> {
        self.omega.iter().map(|&o| if o { 0.0 } else { 1.0 }).collect()
    }
}

pub fn grid_masks(domain: &Domain, grid: &Grid) -> Result<GridMasks> {
    if domain.dim() != grid.dim() {
        return Err(SfeError::Configuration(format!(
            "domain is {}-dimensional but grid is {}-dimensional",
            domain.dim(),
            grid.dim()
        )));
    }
    let mut p = vec![0.0; grid.dim()];
    let omega: Vec<bool> = (0..grid.len())
        .map(|flat| {
            grid.point(flat, &mut p);
            domain.contains(&p)
        })
        .collect();
    let omega_count = omega.iter().filter(|&&o| o).count();
    Ok(GridMasks {
        grid: *grid,
        omega,
        omega_count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disc() -> Domain {
        Domain::new(DomainSpec::DiscComplement {
            center: [2.0, 3.0],
            radius: 1.0,
        })
        .unwrap()
    }

    fn eye() -> Domain {
        Domain::new(DomainSpec::Eye {
            center: [3.0, 3.0],
            radius: 3.0,
            angle: 3.0 * PI / 4.0,
        })
        .unwrap()
    }

    fn diamond() -> Domain {
        Domain::new(DomainSpec::Diamond {
            center: [3.0, 3.5],
            side: 3.0,
        })
        .unwrap()
    }

    #[test]
    fn node_counts_match_figure_captions() {
        assert_eq!(boundary_nodes(&disc(), 64).unwrap().len(), 32);
        assert_eq!(boundary_nodes(&eye(), 64).unwrap().len(), 72);
        assert_eq!(boundary_nodes(&diamond(), 64).unwrap().len(), 64);
    }

    #[test]
    fn interval_nodes_and_masks() {
        let d = Domain::new(DomainSpec::Interval { a: 2.0, b: 5.0 }).unwrap();
        let b = boundary_nodes(&d, 8).unwrap();
        assert_eq!(b.positions, vec![vec![2.0], vec![5.0]]);
        assert_eq!(b.normals, vec![vec![-1.0], vec![1.0]]);
        let g = Grid::new(1, 8).unwrap();
        let m = grid_masks(&d, &g).unwrap();
        let inside: Vec<usize> = m.omega_indices().collect();
        assert_eq!(inside, vec![3, 4, 5, 6]);
    }

    #[test]
    fn disc_center_is_extension() {
        assert_eq!(disc().membership(&[2.0, 3.0]), Membership::Extension);
        assert_eq!(disc().membership(&[3.0, 3.0]), Membership::Boundary);
        assert_eq!(disc().membership(&[0.5, 0.5]), Membership::Omega);
    }

    #[test]
    fn measures() {
        assert_eq!(diamond().measure(), 9.0);
        assert!((disc().measure() - (4.0 * PI * PI - PI)).abs() < 1e-14);
        let t = 3.0 * PI / 4.0;
        assert!((eye().measure() - 9.0 * (t - t.sin())).abs() < 1e-14);
    }

    #[test]
    fn nodes_on_boundary_with_unit_normals() {
        for d in [disc(), eye(), diamond()] {
            for n in [32, 64, 128, 256, 512] {
                let b = boundary_nodes(&d, n).unwrap();
                for (p, nrm) in b.positions.iter().zip(&b.normals) {
                    let len = (nrm[0] * nrm[0] + nrm[1] * nrm[1]).sqrt();
                    assert!((len - 1.0).abs() < 1e-14);
                    let level = match d.spec() {
                        DomainSpec::DiscComplement { center, radius } => {
                            dist(p, center) - radius
                        }
                        DomainSpec::Eye {
                            center,
                            radius,
                            angle,
                        } => {
                            let (u, l) = eye_centers(center, *radius, *angle);
                            dist(p, &u).max(dist(p, &l)) - radius
                        }
                        DomainSpec::Diamond { center, side } => {
                            (p[0] - center[0]).abs() + (p[1] - center[1]).abs()
                                - side * FRAC_1_SQRT_2
                        }
                        _ => unreachable!(),
                    };
                    assert!(level.abs() < 1e-12, "{d:?} node off boundary by {level}");
                }
                let ratio = b.spacing / (TWO_PI / n as f64);
                assert!((1.5..=2.5).contains(&ratio), "spacing ratio {ratio}");
            }
        }
    }

    #[test]
    fn outward_normals_leave_omega() {
        for d in [disc(), eye(), diamond()] {
            let b = boundary_nodes(&d, 64).unwrap();
            for (p, nrm) in b.positions.iter().zip(&b.normals) {
                let out = [p[0] + 1e-3 * nrm[0], p[1] + 1e-3 * nrm[1]];
                let inn = [p[0] - 1e-3 * nrm[0], p[1] - 1e-3 * nrm[1]];
                assert_eq!(d.membership(&out), Membership::Extension);
                assert_eq!(d.membership(&inn), Membership::Omega);
            }
        }
    }

    #[test]
    fn no_eye_or_diamond_node_at_a_corner() {
        let e = boundary_nodes(&eye(), 64).unwrap();
        let t = 3.0 * PI / 4.0;
        let corners = [[3.0 - 3.0 * (t / 2.0).sin(), 3.0], [3.0 + 3.0 * (t / 2.0).sin(), 3.0]];
        for p in &e.positions {
            for c in &corners {
                assert!(dist(p, c) > 0.1 * e.spacing);
            }
        }
    }

    #[test]
    fn counted_area_matches_measure() {
        let g = Grid::new(2, 256).unwrap();
        for d in [disc(), eye(), diamond()] {
            let m = grid_masks(&d, &g).unwrap();
            let est = m.omega_count() as f64 * g.cell_volume();
            let rel = (est - d.measure()).abs() / d.measure();
            assert!(rel < 0.01, "{d:?}: {est} vs {}", d.measure());
        }
    }

    #[test]
    fn masks_partition_grid() {
        let g = Grid::new(2, 32).unwrap();
        let m = grid_masks(&eye(), &g).unwrap();
        let chi: Vec<f64> = m
            .chi_omega()
            .iter()
            .zip(m.chi_extension())
            .map(|(a, b)| a + b)
            .collect();
        assert!(chi.iter().all(|&s| s == 1.0));
        assert_eq!(m.omega_count() + m.extension_count(), g.len());
    }

    #[test]
    fn rejects_domains_outside_box() {
        assert!(Domain::new(DomainSpec::Interval { a: -1.0, b: 2.0 }).is_err());
        assert!(Domain::new(DomainSpec::Diamond {
            center: [1.0, 1.0],
            side: 3.0
        })
        .is_err());
    }
}
