use thiserror::Error;

#[derive(Debug, Error)]
pub enum SfeError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("coefficients violate conjugate symmetry (max deviation {deviation:e})")]
    SymmetryViolation { deviation: f64 },

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("grid mismatch: expected N = {expected}, d = {expected_dim}; got N = {found}, d = {found_dim}")]
    GridMismatch {
        expected: usize,
        expected_dim: usize,
        found: usize,
        found_dim: usize,
    },

    #[error("rank-deficient system: numerical rank {rank} of {rows} rows, residual {residual:e}")]
    RankDeficient {
        rank: usize,
        rows: usize,
        residual: f64,
    },

    #[error("shift {shift} coincides with torus eigenvalue {lattice_value}")]
    ShiftOnLattice { shift: f64, lattice_value: u64 },

    #[error("inverse power iteration did not converge in {iterations} iterations (last deviation {last_deviation:e})")]
    NoConvergence {
        iterations: usize,
        last_deviation: f64,
        deviations: Vec<f64>,
    },

    #[error("blow-up detected at step {step} (t = {time}): max |u| = {norm:e}")]
    BlowUp { step: usize, time: f64, norm: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SfeError>;
