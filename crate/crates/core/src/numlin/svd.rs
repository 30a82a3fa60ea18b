//! One-sided Jacobi SVD and the rank-revealing decomposition built on it.
//!
//! Every structural decision in the pencil analysis (regularity, index,
//! block sizes) flows through the single tolerance knob in
//! [`RankTolerance`].

use crate::scalar::{real, Scalar};
use crate::Result;

use super::matrix::{dot, Matrix};

const MAX_SWEEPS: usize = 60;

/// Full plane-rotation SVD data: `M = U * diag(s) * V^T` with `V` square
/// orthogonal and `U` given column-wise through `scaled_u` (column `i` is
/// `s[i] * u_i`).
pub struct Svd<T> {
    /// `M * V`; column `i` equals `s[i] * u_i`.
    pub scaled_u: Matrix<T>,
    /// Right singular vectors, `cols x cols`, orthogonal.
    pub v: Matrix<T>,
    /// Singular values, nonincreasing, length `cols`.
    pub s: Vec<T>,
}

pub fn svd<T: Scalar>(m: &Matrix<T>) -> Svd<T> {
    let q = m.cols();
    let mut g = m.clone();
    let mut v = Matrix::identity(q);
    let tol = T::epsilon() * real::<T>(32.0);

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..q {
            for r in p + 1..q {
                let gp = g.col(p);
                let gr = g.col(r);
                let app = dot(&gp, &gp);
                let arr = dot(&gr, &gr);
                let apr = dot(&gp, &gr);
                if apr.abs() <= tol * (app * arr).sqrt() || app == T::zero() || arr == T::zero() {
                    continue;
                }
                rotated = true;
                let two = T::one() + T::one();
                let zeta = (arr - app) / (two * apr);
                let t = if zeta >= T::zero() {
                    T::one() / (zeta + (T::one() + zeta * zeta).sqrt())
                } else {
                    -T::one() / (-zeta + (T::one() + zeta * zeta).sqrt())
                };
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                for i in 0..g.rows() {
                    let a = g[(i, p)];
                    let b = g[(i, r)];
                    g[(i, p)] = c * a - s * b;
                    g[(i, r)] = s * a + c * b;
                }
                for i in 0..q {
                    let a = v[(i, p)];
                    let b = v[(i, r)];
                    v[(i, p)] = c * a - s * b;
                    v[(i, r)] = s * a + c * b;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    // Sort singular values (column norms) in nonincreasing order.
    let mut norms: Vec<T> = (0..q).map(|j| dot(&g.col(j), &g.col(j)).sqrt()).collect();
    let mut order: Vec<usize> = (0..q).collect();
    order.sort_by(|&a, &b| norms[b].partial_cmp(&norms[a]).unwrap());
    let g_sorted = Matrix::from_fn(g.rows(), q, |i, j| g[(i, order[j])]);
    let v_sorted = Matrix::from_fn(q, q, |i, j| v[(i, order[j])]);
    norms.sort_by(|a, b| b.partial_cmp(a).unwrap());

    Svd {
        scaled_u: g_sorted,
        v: v_sorted,
        s: norms,
    }
}

impl<T: Scalar> Svd<T> {
    pub fn rank(&self, threshold: T) -> usize {
        self.s.iter().filter(|&&s| s > threshold).count()
    }

    /// Orthonormal basis of the range (left singular vectors for `s > threshold`).
    pub fn range_basis(&self, rank: usize) -> Matrix<T> {
        Matrix::from_fn(self.scaled_u.rows(), rank, |i, j| {
            self.scaled_u[(i, j)] / self.s[j]
        })
    }

    /// Orthonormal basis of the kernel (right singular vectors for `s <= threshold`).
    pub fn null_basis(&self, rank: usize) -> Matrix<T> {
        let q = self.v.cols();
        Matrix::from_fn(q, q - rank, |i, j| self.v[(i, rank + j)])
    }

    /// Orthonormal basis of the row space (right singular vectors for `s > threshold`).
    pub fn row_space_basis(&self, rank: usize) -> Matrix<T> {
        Matrix::from_fn(self.v.rows(), rank, |i, j| self.v[(i, j)])
    }
}

/// Orthonormal basis of the orthogonal complement of `basis` (whose columns
/// must already be orthonormal) in the ambient space of its rows.
pub fn orth_complement<T: Scalar>(basis: &Matrix<T>) -> Matrix<T> {
    let n = basis.rows();
    let k = basis.cols();
    assert!(k <= n);
    let mut cols: Vec<Vec<T>> = Vec::with_capacity(n - k);
    // Project identity columns, pick the largest residual each round.
    let mut candidates: Vec<Vec<T>> = (0..n)
        .map(|i| {
            let mut e = vec![T::zero(); n];
            e[i] = T::one();
            e
        })
        .collect();
    while cols.len() < n - k {
        let mut best: Option<(usize, T, Vec<T>)> = None;
        for (idx, cand) in candidates.iter().enumerate() {
            let mut r = cand.clone();
            for j in 0..k {
                let b = basis.col(j);
                let c = dot(&r, &b);
                for i in 0..n {
                    r[i] = r[i] - c * b[i];
                }
            }
            for picked in &cols {
                let c = dot(&r, picked);
                for i in 0..n {
                    r[i] = r[i] - c * picked[i];
                }
            }
            let nrm = dot(&r, &r).sqrt();
            if best.as_ref().map_or(true, |(_, bn, _)| nrm > *bn) {
                best = Some((idx, nrm, r));
            }
        }
        let (idx, nrm, mut r) = best.expect("complement candidate");
        assert!(
            nrm > T::epsilon() * real::<T>(64.0),
            "orth_complement: degenerate residual"
        );
        for x in &mut r {
            *x = *x / nrm;
        }
        // One re-orthogonalization pass for numerical hygiene.
        for j in 0..k {
            let b = basis.col(j);
            let c = dot(&r, &b);
            for i in 0..n {
                r[i] = r[i] - c * b[i];
            }
        }
        for picked in &cols {
            let c = dot(&r, picked);
            for i in 0..n {
                r[i] = r[i] - c * picked[i];
            }
        }
        let n2 = dot(&r, &r).sqrt();
        for x in &mut r {
            *x = *x / n2;
        }
        cols.push(r);
        candidates.remove(idx);
    }
    Matrix::from_fn(n, n - k, |i, j| cols[j][i])
}

// ── rank-revealing decomposition ────────────────────────────────────

/// Tolerance policy for numerical rank decisions: relative to the largest
/// singular value, with an optional absolute floor. Staircase-style
/// algorithms anchor the floor at the scale of the original matrix so that
/// deflated subblocks made of pure roundoff are ranked zero instead of
/// being rescaled into significance.
#[derive(Debug, Clone, Copy)]
pub struct RankTolerance<T> {
    pub rtol: T,
    pub atol: T,
}

impl<T: Scalar> Default for RankTolerance<T> {
    fn default() -> Self {
        RankTolerance {
            rtol: real(1e-10),
            atol: T::zero(),
        }
    }
}

impl<T: Scalar> RankTolerance<T> {
    /// Default relative tolerance with the absolute floor anchored at the
    /// given problem scale.
    pub fn anchored(scale: T, dim: usize) -> Self {
        let rtol = real::<T>(1e-10);
        RankTolerance {
            rtol,
            atol: rtol * scale * real::<T>(dim.max(1) as f64),
        }
    }

    pub fn threshold(&self, sigma_max: T, rows: usize, cols: usize) -> T {
        (self.rtol * sigma_max * real::<T>(rows.max(cols).max(1) as f64)).max(self.atol)
    }
}

#[derive(Debug)]
pub struct RankDecomposition<T> {
    pub rank: usize,
    /// Orthonormal columns spanning the range.
    pub range_basis: Matrix<T>,
    /// Orthonormal columns spanning the kernel.
    pub null_basis: Matrix<T>,
    /// Nonincreasing singular values.
    pub singular_values: Vec<T>,
    /// The threshold that separated rank from kernel.
    pub threshold: T,
    /// Some singular value lies within a factor 10 of the threshold; the
    /// rank decision is ill-posed for this input.
    pub marginal: bool,
}

pub fn rank_decompose<T: Scalar>(
    m: &Matrix<T>,
    tol: RankTolerance<T>,
) -> Result<RankDecomposition<T>> {
    m.require_finite("rank_decompose")?;
    let decomposition = svd(m);
    let sigma_max = decomposition.s.first().copied().unwrap_or_else(T::zero);
    let threshold = tol.threshold(sigma_max, m.rows(), m.cols());
    let rank = decomposition.rank(threshold);
    let ten = real::<T>(10.0);
    let marginal = threshold > T::zero()
        && decomposition
            .s
            .iter()
            .any(|&s| s > threshold / ten && s <= threshold * ten && s > T::zero());
    Ok(RankDecomposition {
        rank,
        range_basis: decomposition.range_basis(rank),
        null_basis: decomposition.null_basis(rank),
        singular_values: decomposition.s,
        threshold,
        marginal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn default_rank(m: &Matrix<f64>) -> RankDecomposition<f64> {
        rank_decompose(m, RankTolerance::default()).unwrap()
    }

    #[test]
    fn identity_full_rank() {
        let rd = default_rank(&Matrix::identity(3));
        assert_eq!(rd.rank, 3);
        assert_eq!(rd.null_basis.cols(), 0);
    }

    #[test]
    fn nilpotent_shift_rank_one() {
        // [[0,1],[0,0]] has rank 1 and kernel e1.
        let m = Matrix::from_rows(&[&[0.0, 1.0], &[0.0, 0.0]]);
        let rd = default_rank(&m);
        assert_eq!(rd.rank, 1);
        assert_eq!(rd.null_basis.cols(), 1);
        assert!((rd.null_basis[(0, 0)].abs() - 1.0).abs() < 1e-12);
        assert!(rd.null_basis[(1, 0)].abs() < 1e-12);
    }

    #[test]
    fn low_rank_product() {
        // 5x3 product of rank-2 factors.
        let mut rng = Rng::new(42);
        let u = Matrix::from_fn(5, 2, |_, _| rng.gauss());
        let v = Matrix::from_fn(3, 2, |_, _| rng.gauss());
        let m = u.matmul(&v.transpose());
        let rd = default_rank(&m);
        assert_eq!(rd.rank, 2);
        // M * null_basis must be tiny.
        let residual = m.matmul(&rd.null_basis).max_abs();
        assert!(residual <= rd.threshold * (1.0 + m.norm_fro()));
    }

    #[test]
    fn bases_orthonormal() {
        let mut rng = Rng::new(3);
        let m = Matrix::from_fn(6, 4, |_, _| rng.gauss());
        let rd = default_rank(&m);
        let qtq = rd.range_basis.transpose().matmul(&rd.range_basis);
        let err = qtq.sub(&Matrix::identity(rd.rank)).max_abs();
        assert!(err < 1e-12, "range basis orthonormality {err}");
    }

    #[test]
    fn range_projection_acts_as_identity_on_column_space() {
        let mut rng = Rng::new(9);
        let m = Matrix::from_fn(5, 3, |_, _| rng.gauss());
        let rd = default_rank(&m);
        let proj = rd.range_basis.matmul(&rd.range_basis.transpose());
        let err = proj.matmul(&m).sub(&m).max_abs();
        assert!(err < 1e-10 * (1.0 + m.max_abs()), "projection error {err}");
    }

    #[test]
    fn complement_completes_basis() {
        let mut rng = Rng::new(11);
        let m = Matrix::from_fn(5, 2, |_, _| rng.gauss());
        let rd = default_rank(&m);
        let comp = orth_complement(&rd.range_basis);
        assert_eq!(comp.cols(), 3);
        let full = rd.range_basis.hstack(&comp);
        let err = full
            .transpose()
            .matmul(&full)
            .sub(&Matrix::identity(5))
            .max_abs();
        assert!(err < 1e-12, "completion orthonormality {err}");
    }

    #[test]
    fn zero_and_empty_matrices() {
        let z: Matrix<f64> = Matrix::zeros(3, 2);
        let rd = default_rank(&z);
        assert_eq!(rd.rank, 0);
        assert_eq!(rd.null_basis.cols(), 2);

        let e: Matrix<f64> = Matrix::zeros(0, 4);
        let rd = default_rank(&e);
        assert_eq!(rd.rank, 0);
        assert_eq!(rd.null_basis.cols(), 4);
    }
}
