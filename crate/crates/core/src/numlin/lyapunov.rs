//! Continuous Lyapunov equation `A^T Y + Y A + W = 0` via the vectorized
//! n^2 x n^2 linear system. Intended for the small dense problems this
//! crate works with.

use crate::error::Error;
use crate::scalar::Scalar;
use crate::Result;

use super::lu::Lu;
use super::matrix::Matrix;

pub fn solve_lyapunov<T: Scalar>(a: &Matrix<T>, w: &Matrix<T>) -> Result<Matrix<T>> {
    if !a.is_square() {
        return Err(Error::NotSquare {
            op: "solve_lyapunov",
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    if w.rows() != a.rows() || w.cols() != a.cols() {
        return Err(Error::DimensionMismatch {
            op: "solve_lyapunov",
            details: format!(
                "A is {}x{} but W is {}x{}",
                a.rows(),
                a.cols(),
                w.rows(),
                w.cols()
            ),
        });
    }
    let n = a.rows();
    if n == 0 {
        return Ok(Matrix::zeros(0, 0));
    }

    // Unknown Y flattened row-major: y[i*n + j] = Y[i, j].
    // (A^T Y)[i,j] = sum_k A[k,i] Y[k,j];  (Y A)[i,j] = sum_k Y[i,k] A[k,j].
    let mut sys = Matrix::zeros(n * n, n * n);
    let mut rhs = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..n {
            let row = i * n + j;
            for k in 0..n {
                sys[(row, k * n + j)] = sys[(row, k * n + j)] + a[(k, i)];
                sys[(row, i * n + k)] = sys[(row, i * n + k)] + a[(k, j)];
            }
            rhs[row] = -w[(i, j)];
        }
    }

    let lu = Lu::new(&sys).map_err(|_| Error::ResonantLyapunov)?;
    let y = lu.solve_vec(&rhs);
    let mat = Matrix::from_vec(n, n, y);
    Ok(mat.symmetrize())
}
