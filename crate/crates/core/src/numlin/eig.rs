//! Cyclic Jacobi eigendecomposition for symmetric matrices.

use crate::error::Error;
use crate::scalar::{real, Scalar};
use crate::Result;

use super::matrix::Matrix;

const MAX_SWEEPS: usize = 50;

pub struct SymEig<T> {
    /// Ascending eigenvalues.
    pub values: Vec<T>,
    /// Column `i` is the eigenvector for `values[i]`.
    pub vectors: Matrix<T>,
}

fn off_diag_norm<T: Scalar>(a: &Matrix<T>) -> T {
    let n = a.rows();
    let mut acc = T::zero();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                acc = acc + a[(i, j)] * a[(i, j)];
            }
        }
    }
    acc.sqrt()
}

/// Eigenvalues and eigenvectors of a symmetric matrix. Rotations run until
/// the off-diagonal norm falls below `1e-13 * ||M||`.
pub fn sym_eig<T: Scalar>(m: &Matrix<T>) -> Result<SymEig<T>> {
    if !m.is_square() {
        return Err(Error::NotSquare {
            op: "sym_eig",
            rows: m.rows(),
            cols: m.cols(),
        });
    }
    m.require_finite("sym_eig")?;
    let n = m.rows();
    let scale = m.max_abs();
    let skew = m.sub(&m.transpose()).max_abs();
    if skew > real::<T>(1e-12) * (T::one() + scale) {
        return Err(Error::NotSymmetric {
            skew: skew.to_f64().unwrap_or(f64::NAN),
        });
    }

    let mut a = m.symmetrize();
    let mut v = Matrix::identity(n);
    let target = real::<T>(1e-13) * (T::one() + a.norm_fro());
    for _ in 0..MAX_SWEEPS {
        if off_diag_norm(&a) <= target {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq.abs() <= target / real::<T>((n * n) as f64 + 1.0) {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                let two = T::one() + T::one();
                let theta = (aqq - app) / (two * apq);
                let t = if theta >= T::zero() {
                    T::one() / (theta + (T::one() + theta * theta).sqrt())
                } else {
                    -T::one() / (-theta + (T::one() + theta * theta).sqrt())
                };
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                // A <- J^T A J on rows/cols p,q.
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].partial_cmp(&a[(j, j)]).unwrap());
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = Matrix::from_fn(n, n, |i, j| v[(i, order[j])]);
    Ok(SymEig { values, vectors })
}

/// Ascending eigenvalues of a symmetric matrix.
pub fn sym_eigvals<T: Scalar>(m: &Matrix<T>) -> Result<Vec<T>> {
    Ok(sym_eig(m)?.values)
}

pub fn min_eigval<T: Scalar>(m: &Matrix<T>) -> Result<T> {
    let vals = sym_eigvals(m)?;
    Ok(vals.first().copied().unwrap_or_else(T::zero))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_passthrough() {
        let vals = sym_eigvals(&Matrix::<f64>::diag(&[0.5, 2.0f64.sqrt()])).unwrap();
        assert!((vals[0] - 0.5).abs() < 1e-14);
        assert!((vals[1] - 2.0f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn identity_eigvals() {
        let vals = sym_eigvals(&Matrix::<f64>::identity(3)).unwrap();
        for v in vals {
            assert!((v - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn two_by_two_closed_form() {
        let m = Matrix::<f64>::from_rows(&[&[2.0, 1.0], &[1.0, 2.0]]);
        let vals = sym_eigvals(&m).unwrap();
        assert!((vals[0] - 1.0).abs() < 1e-13);
        assert!((vals[1] - 3.0).abs() < 1e-13);
    }

    #[test]
    fn rejects_asymmetric() {
        let m = Matrix::<f64>::from_rows(&[&[1.0, 2.0], &[0.0, 1.0]]);
        assert!(sym_eig(&m).is_err());
    }

    #[test]
    fn eigenvectors_diagonalize() {
        let m = Matrix::<f64>::from_rows(&[&[4.0, 1.0, -2.0], &[1.0, 3.0, 0.5], &[-2.0, 0.5, 1.0]]);
        let eig = sym_eig(&m).unwrap();
        let d = eig.vectors.transpose().matmul(&m).matmul(&eig.vectors);
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { eig.values[i] } else { 0.0 };
                assert!((d[(i, j)] - expect).abs() < 1e-11);
            }
        }
    }
}
