//! Dense and sparse matrix primitives.
//!
//! Values are stored in single precision; kernels accumulate in double
//! precision and round once on output.

mod adam;
mod dense;
pub(crate) mod gemm;
mod sparse;
pub mod spem;

pub use adam::{AdamConfig, AdamState};
pub use dense::DenseMatrix;
pub use sparse::{CscMatrix, CsrMatrix, Triplet};

/// Rows whose ℓ2 norm is at or below this are treated as all-zero.
pub const NORM_EPS: f64 = 1e-12;

/// Outcome of a row normalization pass.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NormalizeReport {
    /// Rows left untouched because their norm was below [`NORM_EPS`].
    pub zero_rows: Vec<usize>,
}

/// Scales `row` to unit ℓ2 norm in place. Returns `false` if it is a zero row.
pub(crate) fn normalize_slice(row: &mut [f32]) -> bool {
    let norm = row
        .iter()
        .map(|&v| f64::from(v) * f64::from(v))
        .sum::<f64>()
        .sqrt();
    if norm <= NORM_EPS {
        return false;
    }
    for v in row.iter_mut() {
        *v = (f64::from(*v) / norm) as f32;
    }
    true
}

pub(crate) fn l2_norm(row: &[f32]) -> f64 {
    row.iter()
        .map(|&v| f64::from(v) * f64::from(v))
        .sum::<f64>()
        .sqrt()
}
