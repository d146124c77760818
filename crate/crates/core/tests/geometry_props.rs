use std::f64::consts::{FRAC_1_SQRT_2, PI};

use proptest::prelude::*;
use sfe_core::geometry::{boundary_nodes, grid_masks, Domain, DomainSpec, Membership};
use sfe_core::spectral::Grid;

fn disc() -> Domain {
    Domain::new(DomainSpec::DiscComplement { center: [2.0, 3.0], radius: 1.0 }).unwrap()
}

fn eye() -> Domain {
    Domain::new(DomainSpec::Eye { center: [3.0, 3.0], radius: 3.0, angle: 0.75 * PI }).unwrap()
}

fn diamond() -> Domain {
    Domain::new(DomainSpec::Diamond { center: [3.0, 3.5], side: 3.0 }).unwrap()
}

fn planar() -> Vec<Domain> {
    vec![disc(), eye(), diamond()]
}

/// Distance from `p` to the boundary, computed from the shape's definition.
fn boundary_distance(domain: &Domain, p: &[f64]) -> f64 {
    match domain.spec() {
        DomainSpec::Interval { a, b } => (p[0] - a).abs().min((p[0] - b).abs()),
        DomainSpec::DiscComplement { center, radius } => {
            ((p[0] - center[0]).hypot(p[1] - center[1]) - radius).abs()
        }
        DomainSpec::Eye { center, radius, angle } => {
            // each arc lies on a circle through the two corners
            let half_chord = radius * (angle / 2.0).sin();
            let sag = radius * (angle / 2.0).cos();
            let upper = [center[0], center[1] - sag];
            let lower = [center[0], center[1] + sag];
            let on = |c: [f64; 2], side: f64| {
                let r = (p[0] - c[0]).hypot(p[1] - c[1]);
                if (p[0] - center[0]).abs() <= half_chord && (p[1] - center[1]) * side >= 0.0 {
                    (r - radius).abs()
                } else {
                    f64::INFINITY
                }
            };
            on(upper, 1.0).min(on(lower, -1.0))
        }
        DomainSpec::Diamond { center, side } => {
            ((p[0] - center[0]).abs() + (p[1] - center[1]).abs() - side * FRAC_1_SQRT_2).abs()
        }
    }
}

#[test]
fn node_spacing_is_about_twice_grid_spacing() {
    for domain in planar() {
        for e in 5..=9 {
            let n = 1usize << e;
            let nodes = boundary_nodes(&domain, n).unwrap();
            let ratio = nodes.spacing / (2.0 * PI / n as f64);
            assert!((1.5..=2.5).contains(&ratio), "{:?} N={n}: {ratio}", domain.spec());
        }
    }
}

#[test]
fn nodes_lie_on_boundary_with_outward_unit_normals() {
    let interval = Domain::new(DomainSpec::Interval { a: 2.0, b: 5.0 }).unwrap();
    let mut all = planar();
    all.push(interval);
    for domain in all {
        for n in [32, 64, 128, 256] {
            let nodes = boundary_nodes(&domain, n).unwrap();
            for (p, nv) in nodes.positions.iter().zip(&nodes.normals) {
                assert!(boundary_distance(&domain, p) < 1e-12, "{:?} {p:?}", domain.spec());
                let norm = nv.iter().map(|x| x * x).sum::<f64>().sqrt();
                assert!((norm - 1.0).abs() < 1e-14);
                let step = |t: f64| -> Vec<f64> { p.iter().zip(nv).map(|(a, b)| a + t * b).collect() };
                assert_eq!(domain.membership(&step(1e-6)), Membership::Extension);
                assert_eq!(domain.membership(&step(-1e-6)), Membership::Omega);
            }
        }
    }
}

#[test]
fn disc_normals_point_to_center_and_diamond_normals_are_diagonal() {
    let nodes = boundary_nodes(&disc(), 64).unwrap();
    for (p, nv) in nodes.positions.iter().zip(&nodes.normals) {
        assert!((p[0] + nv[0] - 2.0).abs() < 1e-14 && (p[1] + nv[1] - 3.0).abs() < 1e-14);
    }
    let nodes = boundary_nodes(&diamond(), 64).unwrap();
    for side in nodes.normals.chunks(16) {
        assert!(side.iter().all(|nv| nv == &side[0]));
        assert!((side[0][0].abs() - FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((side[0][1].abs() - FRAC_1_SQRT_2).abs() < 1e-15);
    }
}

#[test]
fn node_count_examples() {
    assert_eq!(boundary_nodes(&disc(), 64).unwrap().len(), 32);
    assert_eq!(boundary_nodes(&eye(), 64).unwrap().len(), 72);
    assert_eq!(boundary_nodes(&diamond(), 64).unwrap().len(), 64);
    let interval = Domain::new(DomainSpec::Interval { a: 2.0, b: 5.0 }).unwrap();
    let nodes = boundary_nodes(&interval, 64).unwrap();
    assert_eq!(nodes.positions, vec![vec![2.0], vec![5.0]]);
    assert_eq!(nodes.normals, vec![vec![-1.0], vec![1.0]]);
}

#[test]
fn masks_partition_grid() {
    for domain in planar() {
        for n in [32, 64, 128] {
            let grid = Grid::new(2, n).unwrap();
            let masks = grid_masks(&domain, &grid).unwrap();
            let chi = masks.chi_omega();
            let chi_e = masks.chi_extension();
            assert!(chi.iter().zip(&chi_e).all(|(a, b)| a + b == 1.0));
            assert_eq!(masks.omega_count() + masks.extension_count(), grid.len());
            let pts = grid.points();
            for (m, p) in pts.iter().enumerate() {
                assert_eq!(masks.is_omega(m), domain.contains(p));
            }
        }
    }
}

#[test]
fn measure_matches_grid_count() {
    let grid = Grid::new(2, 256).unwrap();
    for domain in planar() {
        let masks = grid_masks(&domain, &grid).unwrap();
        let estimate = masks.omega_count() as f64 / grid.len() as f64 * (2.0 * PI).powi(2);
        let exact = domain.measure();
        assert!((estimate - exact).abs() < 0.01 * exact, "{:?}: {estimate} vs {exact}", domain.spec());
    }
    assert!((diamond().measure() - 9.0).abs() < 1e-14);
    assert!((disc().measure() - (4.0 * PI * PI - PI)).abs() < 1e-12);
    assert!((eye().measure() - 9.0 * (0.75 * PI - (0.75 * PI).sin())).abs() < 1e-12);
}

#[test]
fn membership_examples() {
    let interval = Domain::new(DomainSpec::Interval { a: 2.0, b: 5.0 }).unwrap();
    let grid = Grid::new(1, 8).unwrap();
    let masks = grid_masks(&interval, &grid).unwrap();
    let inside: Vec<usize> = masks.omega_indices().collect();
    assert_eq!(inside, vec![3, 4, 5, 6]);
    assert_eq!(disc().membership(&[2.0, 3.0]), Membership::Extension);
    assert_eq!(interval.membership(&[2.0]), Membership::Boundary);
    assert!(interval.contains(&[5.0]));
}

#[test]
fn rejects_domains_leaving_the_box() {
    assert!(Domain::new(DomainSpec::Interval { a: 5.0, b: 2.0 }).is_err());
    assert!(Domain::new(DomainSpec::DiscComplement { center: [0.5, 3.0], radius: 1.0 }).is_err());
    assert!(Domain::new(DomainSpec::Diamond { center: [3.0, 3.0], side: 9.0 }).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_discs_have_boundary_nodes(cx in 1.5f64..4.8, cy in 1.5f64..4.8, r in 0.2f64..1.4, e in 5u32..9) {
        let domain = Domain::new(DomainSpec::DiscComplement { center: [cx, cy], radius: r }).unwrap();
        let n = 1usize << e;
        let nodes = boundary_nodes(&domain, n).unwrap();
        prop_assert_eq!(nodes.len(), n / 2);
        for p in &nodes.positions {
            prop_assert!(boundary_distance(&domain, p) < 1e-12);
        }
    }

    #[test]
    fn random_diamonds_have_equal_sides(cx in 2.8f64..3.4, cy in 2.8f64..3.4, side in 1.0f64..3.5, e in 5u32..9) {
        let domain = Domain::new(DomainSpec::Diamond { center: [cx, cy], side }).unwrap();
        let nodes = boundary_nodes(&domain, 1usize << e).unwrap();
        prop_assert_eq!(nodes.len() % 4, 0);
        for p in &nodes.positions {
            prop_assert!(boundary_distance(&domain, p) < 1e-12);
        }
    }

    #[test]
    fn eye_node_count_is_even(radius in 1.5f64..3.0, angle in 1.0f64..2.6, e in 5u32..9) {
        let domain = Domain::new(DomainSpec::Eye { center: [3.0, 3.0], radius, angle }).unwrap();
        let nodes = boundary_nodes(&domain, 1usize << e).unwrap();
        prop_assert_eq!(nodes.len() % 2, 0);
        for p in &nodes.positions {
            prop_assert!(boundary_distance(&domain, p) < 1e-12);
        }
    }
}
