use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;
use proptest::prelude::*;
use sfe_core::elliptic::{EllipticMachinery, RegularityPath, SolverSetup};
use sfe_core::extension::{
    assemble_mean_row, assemble_regularity_rows, boundary_matrix, boundary_rhs, extend_function, AssemblyRoute,
    BcKind, ExtensionBasis, InversePath, RegularityOrder, RegularitySource,
};
use sfe_core::geometry::{boundary_nodes, grid_masks, Domain, DomainSpec};
use sfe_core::jet::ClosedForm;
use sfe_core::spectral::{symmetry_deviation, Grid, GridField, OperatorSymbol};

fn interval() -> Domain {
    Domain::new(DomainSpec::Interval { a: 2.0, b: 5.0 }).unwrap()
}

fn disc() -> Domain {
    Domain::new(DomainSpec::DiscComplement { center: [2.0, 3.0], radius: 1.0 }).unwrap()
}

fn pole(c: f64, b: f64) -> ClosedForm {
    ClosedForm::new(move |x| (x[0] - c).recip() + x[0].sin() * b)
}

/// `Σ_k ĉ_k μ_k e^{ikx}` at `x`, with `ĉ` from a direct DFT of `v`.
fn direct_inverse_at(v: &[f64], multiplier: impl Fn(i64) -> f64, x: f64) -> f64 {
    let n = v.len() as i64;
    let mut acc = 0.0;
    for k in -n / 2..n / 2 {
        let c: Complex64 = v
            .iter()
            .enumerate()
            .map(|(m, &f)| f * Complex64::from_polar(1.0, -(k as f64) * 2.0 * PI * m as f64 / n as f64))
            .sum::<Complex64>()
            / n as f64;
        let phase = if k == -n / 2 {
            Complex64::new((k as f64 * x).cos(), 0.0)
        } else {
            Complex64::from_polar(1.0, k as f64 * x)
        };
        acc += (c * multiplier(k) * phase).re;
    }
    acc
}

fn inv_lap(k: i64) -> f64 {
    if k == 0 {
        0.0
    } else {
        -1.0 / (k * k) as f64
    }
}

#[test]
fn boundary_rows_match_dense_oracle() {
    let domain = interval();
    let n = 64;
    let grid = Grid::new(1, n).unwrap();
    let masks = grid_masks(&domain, &grid).unwrap();
    let nodes = boundary_nodes(&domain, n).unwrap();
    let basis = ExtensionBasis::new(1, 2);
    let inverse = InversePath::ZeroMean;
    let kinds = [BcKind::Dirichlet; 2];
    let m = boundary_matrix(&basis, &masks, &nodes, &inverse, &kinds, AssemblyRoute::Rows).unwrap();
    let xs = grid.points();
    for col in 0..basis.dof() {
        let v: Vec<f64> = xs
            .iter()
            .enumerate()
            .map(|(i, p)| if masks.is_omega(i) { 0.0 } else { basis.column_value(col, p) })
            .collect();
        for (i, s) in nodes.positions.iter().enumerate() {
            let oracle = direct_inverse_at(&v, inv_lap, s[0]);
            assert!((m[(i, col)] - oracle).abs() < 1e-11, "col {col} node {i}");
        }
    }
    for i in 0..2 {
        assert_eq!(m[(i, basis.dof())], 1.0);
    }

    let f = pole(1.0, 0.0);
    let omega: Vec<f64> = xs
        .iter()
        .enumerate()
        .map(|(i, p)| if masks.is_omega(i) { f.value(p) } else { 0.0 })
        .collect();
    let data = [0.3, -0.2];
    let rhs = boundary_rhs(&omega, &masks, &nodes, &inverse, &kinds, &data).unwrap();
    for (i, s) in nodes.positions.iter().enumerate() {
        let oracle = data[i] - direct_inverse_at(&omega, inv_lap, s[0]);
        assert!((rhs[i] - oracle).abs() < 1e-11);
    }
}

#[test]
fn regularity_rhs_examples() {
    let nodes = boundary_nodes(&interval(), 64).unwrap();
    let basis = ExtensionBasis::new(1, 1);
    let f = pole(1.0, 0.0);
    let (_, rhs) = assemble_regularity_rows(&basis, &nodes, RegularityOrder::new(0).unwrap(), RegularitySource::Analytic(&f), false);
    assert_eq!(rhs.len(), 2);
    assert!((rhs[0] - 1.0).abs() < 1e-15);
    assert!((rhs[1] - 0.25).abs() < 1e-15);

    // mode j = 2 at x = 5, normal +1: (2i)^l e^{10i}, realified
    let basis = ExtensionBasis::new(1, 2);
    let (m, _) = assemble_regularity_rows(&basis, &nodes, RegularityOrder::new(1).unwrap(), RegularitySource::Analytic(&f), false);
    let q = basis.modes().iter().position(|j| j == &vec![2]).unwrap();
    for l in 0..2 {
        let z = Complex64::new(0.0, 2.0).powu(l as u32) * Complex64::from_polar(1.0, 10.0);
        let row = l * 2 + 1;
        assert!((m[(row, 1 + 2 * q)] - SQRT_2 * z.re).abs() < 1e-13);
        assert!((m[(row, 2 + 2 * q)] - SQRT_2 * z.im).abs() < 1e-13);
    }
}

#[test]
fn mean_row_integrates_basis_over_extension_region() {
    let domain = disc();
    let grid = Grid::new(2, 128).unwrap();
    let masks = grid_masks(&domain, &grid).unwrap();
    let basis = ExtensionBasis::new(2, 3);
    let zeros = vec![0.0; grid.len()];
    let (row, rhs) = assemble_mean_row(&basis, &masks, &zeros);
    assert_eq!(rhs, 0.0);
    assert_eq!(*row.last().unwrap(), 0.0);
    assert!((row[0] - masks.extension_count() as f64 * grid.cell_volume()).abs() < 1e-12);

    // ∫_disc e^{i j·x} = e^{i j·c} 2πr J1(|j|r)/|j|; J1(1) below
    let j1 = 0.440_050_585_744_933_5;
    let q = basis.modes().iter().position(|j| j == &vec![1, 0]).unwrap();
    let amp = 2.0 * PI * j1 * SQRT_2;
    let expect = [amp * 2f64.cos(), amp * 2f64.sin()];
    for (got, want) in [row[1 + 2 * q], row[2 + 2 * q]].iter().zip(expect) {
        assert!((got - want).abs() < 5e-2 * want.abs(), "{got} vs {want}");
    }
}

#[test]
fn spectral_traces_of_smooth_field_match_analytic() {
    let f = ClosedForm::new(|x| (x[0].sin() * x[1].cos()).exp());
    let field = GridField::from_fn(Grid::new(2, 64).unwrap(), |p| f.value(p));
    let nodes = boundary_nodes(&disc(), 64).unwrap();
    let a = RegularitySource::Analytic(&f).traces(&nodes, 3);
    let s = RegularitySource::Spectral(&field).traces(&nodes, 3);
    for (x, y) in a.as_slice().iter().zip(s.as_slice()) {
        assert!((x - y).abs() < 1e-9 * (1.0 + x.abs()));
    }
}

#[test]
fn high_order_extension_stays_bounded_near_pole() {
    let f = pole(1.0, 0.0);
    let ext = extend_function(RegularitySource::Analytic(&f), &interval(), RegularityOrder::new(3).unwrap(), 1024).unwrap();
    let grid = *ext.values.grid();
    let v = ext.values.value_vec().unwrap();
    let omega_max = 1.0;
    for (m, x) in v.iter().enumerate() {
        assert!(x.abs() <= 10.0 * omega_max, "x = {}: {x}", grid.coordinate(m));
    }
    // h keeps climbing toward the pole as x falls from 2 toward 1
    let at = |x: f64| v[(x / grid.spacing()).round() as usize];
    assert!(at(1.5) > at(2.0 - grid.spacing()));
}

#[test]
fn assembled_systems_are_underdetermined() {
    let eye = Domain::new(DomainSpec::Eye { center: [3.0, 3.0], radius: 3.0, angle: 0.75 * PI }).unwrap();
    let diamond = Domain::new(DomainSpec::Diamond { center: [3.0, 3.5], side: 3.0 }).unwrap();
    for domain in [interval(), disc(), eye, diamond] {
        for n in [32, 64] {
            for k in -1..=3 {
                let setup = SolverSetup::new(OperatorSymbol::Laplacian, RegularityOrder::new(k).unwrap(), RegularityPath::Analytic);
                let m = EllipticMachinery::new(&domain, n, setup).unwrap();
                let layout = m.layout();
                assert!(layout.cols() >= layout.rows(), "{:?} N={n} k={k}", domain.spec());
                assert_eq!(m.solver().shape(), (layout.rows(), layout.cols()));
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn restriction_identity_and_reality(c in 0.3f64..1.6, b in -1.0f64..1.0, k in 0i32..=3, e in 6u32..10) {
        let f = pole(c, b);
        let n = 1usize << e;
        let ext = extend_function(RegularitySource::Analytic(&f), &interval(), RegularityOrder::new(k).unwrap(), n).unwrap();
        let grid = *ext.values.grid();
        let masks = grid_masks(&interval(), &grid).unwrap();
        let v = ext.values.value_vec().unwrap();
        let mut p = [0.0];
        for flat in masks.omega_indices() {
            grid.point(flat, &mut p);
            prop_assert_eq!(v[flat].to_bits(), f.value(&p).to_bits());
        }
        let h = ext.h_coefficients(&grid).unwrap();
        let hmax = h.iter().fold(0.0f64, |m, z| m.max(z.norm()));
        prop_assert!(symmetry_deviation(&grid, &h) <= 1e-12 * hmax.max(1.0));
        // h matches f and its derivatives at both endpoints
        let hf = GridField::from_coefficients(grid, h).unwrap();
        let nodes = boundary_nodes(&interval(), n).unwrap();
        let th = RegularitySource::Spectral(&hf).traces(&nodes, k as usize);
        let tf = RegularitySource::Analytic(&f).traces(&nodes, k as usize);
        for (x, y) in th.as_slice().iter().zip(tf.as_slice()) {
            prop_assert!((x - y).abs() < 1e-8 * (1.0 + y.abs()));
        }
    }
}
