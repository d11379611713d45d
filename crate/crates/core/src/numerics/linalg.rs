use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::geometry::CorrelationMatrix;

/// Pivots below this (in absolute value) are treated as exact zeros.
const PIVOT_TOLERANCE: f64 = 1e-8;

/// Lower-triangular `L` with `L * L^T = sigma`.
///
/// Semidefinite input is accepted: a pivot in `[-1e-8, 0]` yields a zero
/// column, which the integrator and sampler treat as a deterministic
/// coordinate.
pub fn cholesky_psd(sigma: &CorrelationMatrix) -> Result<DMatrix<f64>> {
    let a = sigma.as_matrix();
    let n = a.nrows();
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut pivot = a[(j, j)];
        for k in 0..j {
            pivot -= l[(j, k)] * l[(j, k)];
        }
        if pivot < -PIVOT_TOLERANCE {
            return Err(Error::Numerical(format!(
                "matrix is indefinite at pivot {j} ({pivot:e})"
            )));
        }
        let d = pivot.max(0.0).sqrt();
        l[(j, j)] = d;
        if d == 0.0 {
            continue;
        }
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(l)
}
