use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sfe_core::min_norm::{solve_dense_min_norm, MinNormSolver};
use sfe_core::SfeError;

/// Pseudoinverse solution via one-sided Jacobi on `Mᵀ`.
///
/// Columns of `A = Mᵀ` are rotated until mutually orthogonal, `A W = [a_i]`,
/// so `M = W Σ Uᵀ` and `M⁺ b = Σ a_i (w_iᵀ b) / σ_i²`.
fn jacobi_pinv_solve(m: &DMatrix<f64>, b: &[f64]) -> Vec<f64> {
    let mut a = m.transpose();
    let n = a.ncols();
    let mut w = DMatrix::<f64>::identity(n, n);
    for _sweep in 0..60 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = a.column(p).norm_squared();
                let beta = a.column(q).norm_squared();
                let gamma = a.column(p).dot(&a.column(q));
                if gamma == 0.0 {
                    continue;
                }
                off = off.max(gamma.abs() / (alpha * beta).sqrt());
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for mat in [&mut a, &mut w] {
                    for r in 0..mat.nrows() {
                        let (x, y) = (mat[(r, p)], mat[(r, q)]);
                        mat[(r, p)] = c * x - s * y;
                        mat[(r, q)] = s * x + c * y;
                    }
                }
            }
        }
        if off < 1e-15 {
            break;
        }
    }
    let smax = (0..n).map(|i| a.column(i).norm()).fold(0.0, f64::max);
    let mut x = vec![0.0; a.nrows()];
    for i in 0..n {
        let s2 = a.column(i).norm_squared();
        if s2.sqrt() <= 1e-12 * smax {
            continue;
        }
        let wb: f64 = (0..n).map(|r| w[(r, i)] * b[r]).sum();
        for (r, xr) in x.iter_mut().enumerate() {
            *xr += a[(r, i)] * wb / s2;
        }
    }
    x
}

fn random_system(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> (DMatrix<f64>, Vec<f64>) {
    let m = DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0));
    let b = (0..rows).map(|_| rng.gen_range(-1.0..1.0)).collect();
    (m, b)
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn matches_jacobi_oracle_on_random_systems() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..200 {
        let rows = rng.gen_range(1..=12);
        let cols = rng.gen_range(rows..=rows + 12);
        let (m, b) = random_system(&mut rng, rows, cols);
        let got = solve_dense_min_norm(m.clone(), &b).unwrap();
        let oracle = jacobi_pinv_solve(&m, &b);
        let scale = oracle.iter().fold(1.0f64, |s, x| s.max(x.abs()));
        assert!(max_diff(&got.x, &oracle) <= 1e-9 * scale, "{rows}x{cols}");
        assert_eq!(got.rank, rows);
    }
}

#[test]
fn seven_by_twelve_example() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (m, b) = random_system(&mut rng, 7, 12);
    let got = solve_dense_min_norm(m.clone(), &b).unwrap();
    assert!(max_diff(&got.x, &jacobi_pinv_solve(&m, &b)) < 1e-10);
    assert!(got.residual < 1e-13);
}

#[test]
fn trivial_examples() {
    let s = solve_dense_min_norm(DMatrix::from_row_slice(1, 2, &[1.0, 0.0]), &[2.0]).unwrap();
    assert_eq!(s.x.len(), 2);
    assert!((s.x[0] - 2.0).abs() < 1e-15 && s.x[1].abs() < 1e-15);
    let s = solve_dense_min_norm(DMatrix::from_row_slice(1, 2, &[1.0, 1.0]), &[2.0]).unwrap();
    assert!((s.x[0] - 1.0).abs() < 1e-14 && (s.x[1] - 1.0).abs() < 1e-14);
}

#[test]
fn inconsistent_system_reports_rank() {
    let m = DMatrix::from_row_slice(3, 4, &[1.0, 2.0, 0.0, 1.0, 1.0, 2.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0]);
    match solve_dense_min_norm(m, &[1.0, 2.0, 0.5]) {
        Err(SfeError::RankDeficient { rank, rows, .. }) => {
            assert_eq!(rank, 2);
            assert_eq!(rows, 3);
        }
        other => panic!("expected rank diagnostic, got {other:?}"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn duplicated_rows_leave_solution_unchanged(seed in any::<u64>(), rows in 1usize..8, extra in 1usize..8,
                                                 dup in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cols = rows + dup + extra;
        let (m, b) = random_system(&mut rng, rows, cols);
        let base = solve_dense_min_norm(m.clone(), &b).unwrap();
        let picks: Vec<usize> = (0..dup).map(|_| rng.gen_range(0..rows)).collect();
        let mut m2 = DMatrix::zeros(rows + dup, cols);
        m2.rows_mut(0, rows).copy_from(&m);
        let mut b2 = b.clone();
        for (i, &r) in picks.iter().enumerate() {
            m2.row_mut(rows + i).copy_from(&m.row(r));
            b2.push(b[r]);
        }
        let with_dups = solve_dense_min_norm(m2, &b2).unwrap();
        prop_assert_eq!(with_dups.rank, rows);
        let scale = base.x.iter().fold(1.0f64, |s, x| s.max(x.abs()));
        prop_assert!(max_diff(&base.x, &with_dups.x) <= 1e-9 * scale);
    }

    #[test]
    fn solution_is_orthogonal_to_null_space(seed in any::<u64>(), rows in 1usize..10, extra in 1usize..10) {
        // x = Mᵀ y for some y, so x has no component in ker M
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (m, b) = random_system(&mut rng, rows, rows + extra);
        let s = solve_dense_min_norm(m.clone(), &b).unwrap();
        let x = nalgebra::DVector::from_vec(s.x);
        let y = (&m * m.transpose()).lu().solve(&(&m * &x)).unwrap();
        let proj = m.transpose() * y;
        prop_assert!((proj - &x).norm() <= 1e-9 * (1.0 + x.norm()));
    }

    #[test]
    fn residual_within_tolerance(seed in any::<u64>(), rows in 1usize..20, extra in 0usize..20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (m, b) = random_system(&mut rng, rows, rows + extra);
        let solver = MinNormSolver::new(m).unwrap();
        let bnorm = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        if let Ok(s) = solver.solve(&b) {
            prop_assert!(s.residual <= 1e-10 * (1.0 + bnorm));
        }
    }
}
