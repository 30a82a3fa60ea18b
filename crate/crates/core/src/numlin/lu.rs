//! LU factorization with partial pivoting: solves, inverses, determinants.

use crate::error::Error;
use crate::scalar::{real, Scalar};
use crate::Result;

use super::matrix::Matrix;

pub struct Lu<T> {
    lu: Matrix<T>,
    perm: Vec<usize>,
    sign_flips: usize,
}

impl<T: Scalar> Lu<T> {
    pub fn new(a: &Matrix<T>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::NotSquare {
                op: "lu",
                rows: a.rows(),
                cols: a.cols(),
            });
        }
        let n = a.rows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign_flips = 0;
        let scale = a.max_abs();
        let pivot_floor = scale * real::<T>(1e-14) * real::<T>(n.max(1) as f64);
        for k in 0..n {
            let mut p = k;
            let mut best = lu[(k, k)].abs();
            for i in k + 1..n {
                let v = lu[(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best <= pivot_floor || best == T::zero() {
                return Err(Error::Singular { op: "lu" });
            }
            if p != k {
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = tmp;
                }
                perm.swap(k, p);
                sign_flips += 1;
            }
            let inv_piv = T::one() / lu[(k, k)];
            for i in k + 1..n {
                let factor = lu[(i, k)] * inv_piv;
                lu[(i, k)] = factor;
                for j in k + 1..n {
                    let upd = lu[(k, j)] * factor;
                    lu[(i, j)] = lu[(i, j)] - upd;
                }
            }
        }
        Ok(Lu {
            lu,
            perm,
            sign_flips,
        })
    }

    pub fn n(&self) -> usize {
        self.lu.rows()
    }

    pub fn solve_vec(&self, b: &[T]) -> Vec<T> {
        let n = self.n();
        assert_eq!(b.len(), n);
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 1..n {
            let mut acc = x[i];
            for j in 0..i {
                acc = acc - self.lu[(i, j)] * x[j];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in i + 1..n {
                acc = acc - self.lu[(i, j)] * x[j];
            }
            x[i] = acc / self.lu[(i, i)];
        }
        x
    }

    pub fn solve_mat(&self, b: &Matrix<T>) -> Matrix<T> {
        assert_eq!(b.rows(), self.n());
        let mut out = Matrix::zeros(b.rows(), b.cols());
        for j in 0..b.cols() {
            let col = self.solve_vec(&b.col(j));
            for i in 0..b.rows() {
                out[(i, j)] = col[i];
            }
        }
        out
    }

    pub fn inverse(&self) -> Matrix<T> {
        self.solve_mat(&Matrix::identity(self.n()))
    }

    pub fn det(&self) -> T {
        let mut d = if self.sign_flips % 2 == 0 {
            T::one()
        } else {
            -T::one()
        };
        for i in 0..self.n() {
            d = d * self.lu[(i, i)];
        }
        d
    }

    /// `(log |det|, sign)`; robust against overflow for larger matrices.
    pub fn log_abs_det(&self) -> (T, T) {
        let mut log = T::zero();
        let mut sign = if self.sign_flips % 2 == 0 {
            T::one()
        } else {
            -T::one()
        };
        for i in 0..self.n() {
            let d = self.lu[(i, i)];
            log = log + d.abs().ln();
            if d < T::zero() {
                sign = -sign;
            }
        }
        (log, sign)
    }
}

/// Convenience wrapper: solve `A X = B`.
pub fn solve<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>) -> Result<Matrix<T>> {
    Ok(Lu::new(a)?.solve_mat(b))
}

pub fn inverse<T: Scalar>(a: &Matrix<T>) -> Result<Matrix<T>> {
    Ok(Lu::new(a)?.inverse())
}
