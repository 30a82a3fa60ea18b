//! Stabilizing terminal ingredients: the ellipsoidal terminal region, its
//! radius, and the terminal cost.
//!
//! The terminal set is the image of `{zh : zh^T P zh <= rho}` under the
//! lift `L = X [I; -K]`, i.e. the closed-loop manifold of the reduced LQR
//! law expressed in original `(x, u)` coordinates. The radius comes from
//! the tightest constraint row:
//! `rho = lambda_min(P) / (max row 2-norm of [F G] L)^2`,
//! which makes `||[F G] L zh||_inf <= 1` on the whole ellipsoid.

use crate::error::Error;
use crate::numlin::eig::sym_eigvals;
use crate::numlin::matrix::{dot, Matrix};
use crate::pencil::ConstraintSet;
use crate::regularize::ReducedOde;
use crate::riccati::RiccatiSolution;
use crate::scalar::{real, Scalar};
use crate::Result;

/// Radius assigned when no constraint row touches the closed-loop manifold
/// (unconstrained problems need a bounded terminal set to keep the OCP
/// well-posed).
pub const RHO_CAP: f64 = 1e6;

#[derive(Debug, Clone)]
pub struct TerminalIngredients<T> {
    pub rho: T,
    pub p_hat: Matrix<T>,
    /// Lift `(n+m) x n_hat` parameterizing the terminal set.
    pub lift: Matrix<T>,
    /// State rows of the lift (`n x n_hat`).
    pub w_state: Matrix<T>,
    /// Constraint rows `[F G] L`.
    pub constraint_rows: Matrix<T>,
    pub lambda_min: T,
    pub lambda_max: T,
    /// True when the radius was capped because every constraint row is zero.
    pub capped: bool,
}

pub fn build_terminal<T: Scalar>(
    reduced: &ReducedOde<T>,
    sol: &RiccatiSolution<T>,
    constraints: &ConstraintSet<T>,
) -> Result<TerminalIngredients<T>> {
    if constraints.f.cols() != reduced.n_states || constraints.g.cols() != reduced.m_inputs {
        return Err(Error::DimensionMismatch {
            op: "build_terminal",
            details: "constraint columns must match the original system".into(),
        });
    }
    let n_hat = reduced.n_hat;
    // L = X [I; -K].
    let stack = Matrix::identity(n_hat).vstack(&sol.gain.neg());
    let lift = reduced.lift.matmul(&stack);
    let w_state = lift.submatrix(0, 0, reduced.n_states, n_hat);
    let constraint_rows = constraints.stacked().matmul(&lift);

    let eigs = sym_eigvals(&sol.p_hat)?;
    let lambda_min = eigs.first().copied().unwrap_or_else(T::zero);
    let lambda_max = eigs.last().copied().unwrap_or_else(T::zero);

    let max_row = constraint_rows.max_row_norm2();
    let (rho, capped) = if max_row <= real::<T>(1e-14) {
        (real::<T>(RHO_CAP), true)
    } else {
        (lambda_min / (max_row * max_row), false)
    };
    if rho <= T::zero() {
        return Err(Error::StructuralInconsistency {
            details: "terminal radius is not positive".into(),
        });
    }

    Ok(TerminalIngredients {
        rho,
        p_hat: sol.p_hat.clone(),
        lift,
        w_state,
        constraint_rows,
        lambda_min,
        lambda_max,
        capped,
    })
}

/// Terminal cost `z1^T P z1`.
pub fn vf_eval<T: Scalar>(ing: &TerminalIngredients<T>, z1: &[T]) -> Result<T> {
    if z1.len() != ing.p_hat.rows() {
        return Err(Error::DimensionMismatch {
            op: "vf_eval",
            details: format!(
                "state has length {}, expected {}",
                z1.len(),
                ing.p_hat.rows()
            ),
        });
    }
    Ok(dot(z1, &ing.p_hat.matvec(z1)))
}

/// Membership in the terminal region with relative slack (default 1e-9).
pub fn in_terminal_region<T: Scalar>(ing: &TerminalIngredients<T>, z1: &[T], slack: T) -> bool {
    if z1.len() != ing.p_hat.rows() {
        return false;
    }
    dot(z1, &ing.p_hat.matvec(z1)) <= ing.rho * (T::one() + slack)
}

pub fn default_slack<T: Scalar>() -> T {
    real(1e-9)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numlin::eig::sym_eig;
    use crate::rng::Rng;

    fn simple_ingredients(p: Matrix<f64>, rows: Matrix<f64>, rho: f64) -> TerminalIngredients<f64> {
        let n = p.rows();
        let eigs = sym_eigvals(&p).unwrap();
        TerminalIngredients {
            rho,
            lambda_min: eigs[0],
            lambda_max: eigs[n - 1],
            p_hat: p,
            lift: Matrix::identity(n),
            w_state: Matrix::identity(n),
            constraint_rows: rows,
            capped: false,
        }
    }

    #[test]
    fn vf_is_the_quadratic() {
        let ing = simple_ingredients(
            Matrix::diag(&[0.5, 2.0f64.sqrt()]),
            Matrix::zeros(0, 2),
            1.0,
        );
        assert_eq!(vf_eval(&ing, &[0.0, 0.0]).unwrap(), 0.0);
        let v = vf_eval(&ing, &[2.0, 1.0]).unwrap();
        assert!((v - (0.5 * 4.0 + 2.0f64.sqrt())).abs() < 1e-14);
    }

    #[test]
    fn membership_boundary_cases() {
        let p = Matrix::diag(&[1.0, 4.0]);
        let rho = 1.0;
        let ing = simple_ingredients(p.clone(), Matrix::zeros(0, 2), rho);
        assert!(in_terminal_region(&ing, &[0.0, 0.0], 1e-9));
        // Boundary point along the largest eigenvalue direction.
        let eig = sym_eig(&p).unwrap();
        let lmax = eig.values[1];
        let dir = eig.vectors.col(1);
        let scale = (rho / lmax).sqrt();
        let boundary: Vec<f64> = dir.iter().map(|d| d * scale).collect();
        assert!(in_terminal_region(&ing, &boundary, 1e-9));
        let outside: Vec<f64> = boundary.iter().map(|d| d * 2.0).collect();
        assert!(!in_terminal_region(&ing, &outside, 1e-9));
    }

    #[test]
    fn rho_scales_inverse_quadratically_with_constraints() {
        // Tightening [F G] by c divides rho by exactly c^2.
        let mut rng = Rng::new(4);
        let p = {
            let g = Matrix::from_fn(2, 2, |_, _| rng.gauss());
            g.matmul(&g.transpose()).add(&Matrix::identity(2))
        };
        let rows = Matrix::from_fn(3, 2, |_, _| rng.gauss());
        let lmin = sym_eigvals(&p).unwrap()[0];
        let rho_of = |c: f64| {
            let scaled = rows.scale(c);
            lmin / scaled.max_row_norm2().powi(2)
        };
        let base = rho_of(1.0);
        for &c in &[2.0, 3.5, 10.0] {
            let ratio = base / rho_of(c);
            assert!((ratio - c * c).abs() <= 1e-12 * c * c);
        }
    }
}
