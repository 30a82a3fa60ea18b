//! Matrix sign function by the scaled Newton iteration.

use crate::error::Error;
use crate::scalar::{real, Scalar};
use crate::Result;

use super::lu::Lu;
use super::matrix::Matrix;

const MAX_ITERATIONS: usize = 100;

/// `sign(M)` for a square matrix with no eigenvalues on the imaginary axis.
///
/// Newton iteration `Z <- (mu Z + (mu Z)^{-1}) / 2` with determinant scaling
/// `mu = |det Z|^{-1/n}`, stopped when the step falls below
/// `1e-13 * ||Z||`. The result is checked to square to the identity.
pub fn matrix_sign<T: Scalar>(m: &Matrix<T>) -> Result<Matrix<T>> {
    if !m.is_square() {
        return Err(Error::NotSquare {
            op: "matrix_sign",
            rows: m.rows(),
            cols: m.cols(),
        });
    }
    m.require_finite("matrix_sign")?;
    let n = m.rows();
    if n == 0 {
        return Ok(Matrix::zeros(0, 0));
    }

    let mut z = m.clone();
    let half = real::<T>(0.5);
    let step_tol = real::<T>(1e-13);
    let mut converged = false;
    for iteration in 0..MAX_ITERATIONS {
        let lu = Lu::new(&z).map_err(|_| Error::ImaginaryAxisSpectrum {
            details: format!("iterate became singular at step {iteration}"),
        })?;
        let (log_det, _) = lu.log_abs_det();
        // mu = |det|^{-1/n}, computed in logs to dodge overflow.
        let mu = (-log_det / real::<T>(n as f64)).exp();
        let mu = if mu.is_finite() && mu > T::zero() {
            mu
        } else {
            T::one()
        };
        let z_scaled = z.scale(mu);
        let inv = Lu::new(&z_scaled)
            .map_err(|_| Error::ImaginaryAxisSpectrum {
                details: format!("scaled iterate singular at step {iteration}"),
            })?
            .inverse();
        let next = z_scaled.add(&inv).scale(half);
        let step = next.sub(&z).norm_fro();
        let znorm = z.norm_fro();
        z = next;
        if !z.all_finite() {
            return Err(Error::ImaginaryAxisSpectrum {
                details: format!("iterate diverged at step {iteration}"),
            });
        }
        if step <= step_tol * znorm {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::ImaginaryAxisSpectrum {
            details: "no convergence within 100 iterations".into(),
        });
    }

    let involution_residual = z.matmul(&z).sub(&Matrix::identity(n)).max_abs();
    if involution_residual > real::<T>(1e-8) {
        return Err(Error::ImaginaryAxisSpectrum {
            details: format!("sign(M)^2 deviates from I by {involution_residual:e}"),
        });
    }
    Ok(z)
}
