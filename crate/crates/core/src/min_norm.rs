//! Minimum-norm least squares for under-determined systems via a truncated SVD.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SfeError};

/// Singular values below `RANK_TOLERANCE · σ_max` are dropped.
pub const RANK_TOLERANCE: f64 = 1e-12;

/// Accepted residual is `RESIDUAL_TOLERANCE · (1 + ‖b‖₂)`.
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct MinNormSolution {
    pub x: Vec<f64>,
    pub residual: f64,
    pub rank: usize,
}

/// Truncated SVD factors of `M`, reusable across right-hand sides.
///
/// The factors are applied in turn as `V (Σ⁻¹ (Uᵀ b))`; an explicit
/// pseudoinverse would smear rounding from the small singular values into
/// every direction.
#[derive(Clone, Debug)]
pub struct MinNormSolver {
    matrix: DMatrix<f64>,
    /// Kept left singular vectors, transposed (`rank × rows`).
    u_t: DMatrix<f64>,
    /// Kept right singular vectors (`cols × rank`).
    v: DMatrix<f64>,
    sigma: DVector<f64>,
    rank: usize,
    singular_values: Vec<f64>,
}

impl MinNormSolver {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        let (rows, cols) = matrix.shape();
        if rows > cols {
            return Err(SfeError::Configuration(format!(
                "system is over-determined: {rows} rows, {cols} columns"
            )));
        }
        if rows == 0 {
            return Ok(Self {
                u_t: DMatrix::zeros(0, 0),
                v: DMatrix::zeros(cols, 0),
                sigma: DVector::zeros(0),
                matrix,
                rank: 0,
                singular_values: Vec::new(),
            });
        }
        // nalgebra's bidiagonal SVD loses several digits on these systems.
        let svd = faer::Mat::<f64>::from_fn(rows, cols, |i, j| matrix[(i, j)])
            .thin_svd()
            .map_err(|e| SfeError::Configuration(format!("SVD did not converge: {e:?}")))?;
        let (u, v, sigma) = (svd.U(), svd.V(), svd.S().column_vector());
        let sigma_max = (0..sigma.nrows()).map(|i| sigma[i]).fold(0.0, f64::max);
        let cutoff = RANK_TOLERANCE * sigma_max;
        let kept: Vec<usize> = (0..sigma.nrows())
            .filter(|&i| sigma[i] > cutoff && sigma[i] > 0.0)
            .collect();
        let rank = kept.len();
        let v_kept = DMatrix::from_fn(cols, rank, |j, c| v[(j, kept[c])]);
        let u_t = DMatrix::from_fn(rank, rows, |c, i| u[(i, kept[c])]);
        let kept_sigma = DVector::from_iterator(rank, kept.iter().map(|&i| sigma[i]));
        let mut singular_values: Vec<f64> = (0..sigma.nrows()).map(|i| sigma[i]).collect();
        singular_values.sort_by(|a, b| b.total_cmp(a));
        Ok(Self {
            matrix,
            u_t,
            v: v_kept,
            sigma: kept_sigma,
            rank,
            singular_values,
        })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn shape(&self) -> (usize, usize) {
        self.matrix.shape()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Singular values in descending order.
    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    /// Minimum-norm solution of `Mx = b`. Fails with a rank diagnostic when
    /// the residual exceeds tolerance.
    pub fn solve(&self, b: &[f64]) -> Result<MinNormSolution> {
        let sol = self.solve_unchecked(b)?;
        let bnorm = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        if sol.residual > RESIDUAL_TOLERANCE * (1.0 + bnorm) {
            return Err(SfeError::RankDeficient {
                rank: self.rank,
                rows: self.matrix.nrows(),
                residual: sol.residual,
            });
        }
        Ok(sol)
    }

    /// As [`solve`](Self::solve) but returns the solution regardless of the
    /// residual.
    pub fn solve_unchecked(&self, b: &[f64]) -> Result<MinNormSolution> {
        if b.len() != self.matrix.nrows() {
            return Err(SfeError::InvalidParameter(format!(
                "right-hand side has {} entries, system has {} rows",
                b.len(),
                self.matrix.nrows()
            )));
        }
        let bv = DVector::from_column_slice(b);
        let mut c = &self.u_t * &bv;
        c.component_div_assign(&self.sigma);
        let x = &self.v * c;
        let residual = (&self.matrix * &x - &bv).norm();
        Ok(MinNormSolution {
            x: x.as_slice().to_vec(),
            residual,
            rank: self.rank,
        })
    }
}

/// One-shot minimum-norm solve of `Mx = b`.
pub fn solve_dense_min_norm(matrix: DMatrix<f64>, b: &[f64]) -> Result<MinNormSolution> {
    MinNormSolver::new(matrix)?.solve(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn picks_zero_free_component() {
        let s = solve_dense_min_norm(DMatrix::from_row_slice(1, 2, &[1.0, 0.0]), &[2.0]).unwrap();
        assert!((s.x[0] - 2.0).abs() < 1e-15 && s.x[1].abs() < 1e-15);
        let s = solve_dense_min_norm(DMatrix::from_row_slice(1, 2, &[1.0, 1.0]), &[2.0]).unwrap();
        assert!((s.x[0] - 1.0).abs() < 1e-14 && (s.x[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_tall_systems() {
        assert!(MinNormSolver::new(DMatrix::zeros(3, 2)).is_err());
    }

    #[test]
    fn inconsistent_rank_deficient_system_reports_rank() {
        // two identical rows with different data cannot both hold
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 1.0, 2.0, 3.0]);
        match solve_dense_min_norm(m, &[1.0, 2.0]) {
            Err(SfeError::RankDeficient { rank, rows, .. }) => {
                assert_eq!(rank, 1);
                assert_eq!(rows, 2);
            }
            other => panic!("expected rank diagnostic, got {other:?}"),
        }
    }
}
