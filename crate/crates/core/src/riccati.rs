//! Assumption checks and the cross-term continuous algebraic Riccati
//! equation
//! `A^T P + P A + Q - (P B + H) R^{-1} (P B + H)^T = 0`,
//! solved through the matrix sign function of the Hamiltonian with Newton
//! refinement (each sweep one Lyapunov solve).

use crate::error::Error;
use crate::numlin::eig::{min_eigval, sym_eigvals};
use crate::numlin::lu::Lu;
use crate::numlin::lyapunov::solve_lyapunov;
use crate::numlin::matrix::Matrix;
use crate::numlin::sign::matrix_sign;
use crate::numlin::svd::{rank_decompose, RankTolerance};
use crate::regularize::ReducedOde;
use crate::scalar::{real, Scalar};
use crate::Result;

/// Diagnosis of the standing assumptions on the reduced problem:
/// cost positive semidefinite, reduced input weight positive definite,
/// no hidden cost rank, state weight observable, stabilizable pair.
#[derive(Debug, Clone)]
pub struct AssumptionReport {
    pub s_psd: bool,
    pub stabilizable: bool,
    pub r_pd: bool,
    pub observable: bool,
    pub rank_match: bool,
    pub details: Vec<String>,
}

impl AssumptionReport {
    pub fn all_pass(&self) -> bool {
        self.s_psd && self.stabilizable && self.r_pd && self.observable && self.rank_match
    }
}

#[derive(Debug, Clone)]
pub struct RiccatiSolution<T> {
    /// Symmetric positive definite solution.
    pub p_hat: Matrix<T>,
    /// Optimal gain `K = R^{-1} (B^T P + H^T)`; the optimal input is
    /// `v = -K z1`.
    pub gain: Matrix<T>,
    pub residual_norm: T,
    pub lambda_min: T,
}

fn observability_rank<T: Scalar>(a: &Matrix<T>, c: &Matrix<T>) -> Result<usize> {
    let n = a.cols();
    if n == 0 {
        return Ok(0);
    }
    let mut stacked = c.clone();
    let mut power = c.clone();
    for _ in 1..n {
        power = power.matmul(a);
        stacked = stacked.vstack(&power);
    }
    Ok(rank_decompose(&stacked, RankTolerance::default())?.rank)
}

/// Evaluate the five standing assumptions. Stabilizability is certified
/// constructively: the Riccati solve must succeed and the closed loop must
/// carry a Lyapunov certificate.
pub fn check_assumptions<T: Scalar>(reduced: &ReducedOde<T>) -> Result<AssumptionReport> {
    let mut details = Vec::new();

    let s_eigs = sym_eigvals(&reduced.s_hat)?;
    let s_scale = reduced.s_hat.norm_fro() + T::one();
    let s_psd = s_eigs
        .first()
        .map_or(true, |&l| l >= -real::<T>(1e-10) * s_scale);
    details.push(format!(
        "cost matrix eigenvalue range [{:e}, {:e}]",
        s_eigs.first().copied().unwrap_or_else(T::zero),
        s_eigs.last().copied().unwrap_or_else(T::zero)
    ));

    let r_scale = reduced.r_hat.norm_fro() + T::one();
    let r_min = if reduced.m_red == 0 {
        T::zero()
    } else {
        min_eigval(&reduced.r_hat)?
    };
    let r_pd = reduced.m_red > 0 && r_min > real::<T>(1e-10) * r_scale;
    details.push(format!("input weight minimum eigenvalue {r_min:e}"));

    let tol = RankTolerance::default();
    let rank_s = rank_decompose(&reduced.s_hat, tol)?.rank;
    let rank_q = rank_decompose(&reduced.q_hat, tol)?.rank;
    let rank_r = rank_decompose(&reduced.r_hat, tol)?.rank;
    let rank_match = rank_s == rank_q + rank_r;
    details.push(format!(
        "rank of cost {rank_s}, state part {rank_q}, input part {rank_r}"
    ));

    // ker Q = ker Q^{1/2} for PSD Q, so Q itself works as output matrix.
    let obs_rank = observability_rank(&reduced.a_hat, &reduced.q_hat)?;
    let observable = obs_rank == reduced.n_hat;
    details.push(format!(
        "observability rank {obs_rank} of {}",
        reduced.n_hat
    ));

    let stabilizable = if r_pd && s_psd {
        match solve_care_core(reduced) {
            Ok(sol) => {
                let certified = certify_closed_loop(reduced, &sol)?;
                if !certified {
                    details.push("closed loop failed the Lyapunov certificate".into());
                }
                certified
            }
            Err(e) => {
                details.push(format!("Riccati probe failed: {e}"));
                false
            }
        }
    } else {
        details.push("stabilizability probe skipped (cost conditions failed)".into());
        false
    };

    Ok(AssumptionReport {
        s_psd,
        stabilizable,
        r_pd,
        observable,
        rank_match,
        details,
    })
}

fn solve_care_core<T: Scalar>(reduced: &ReducedOde<T>) -> Result<RiccatiSolution<T>> {
    let n = reduced.n_hat;
    let m = reduced.m_red;
    if n == 0 {
        return Ok(RiccatiSolution {
            p_hat: Matrix::zeros(0, 0),
            gain: Matrix::zeros(m, 0),
            residual_norm: T::zero(),
            lambda_min: T::zero(),
        });
    }
    let r_lu = Lu::new(&reduced.r_hat).map_err(|_| Error::CareFailure {
        details: "input weight is singular".into(),
    })?;

    // Eliminate the cross term: At = A - B R^{-1} H^T, Qt = Q - H R^{-1} H^T.
    let rinv_ht = r_lu.solve_mat(&reduced.h_hat.transpose());
    let a_tilde = reduced.a_hat.sub(&reduced.b_hat.matmul(&rinv_ht));
    let q_tilde = reduced
        .q_hat
        .sub(&reduced.h_hat.matmul(&rinv_ht))
        .symmetrize();
    let s_term = reduced
        .b_hat
        .matmul(&r_lu.solve_mat(&reduced.b_hat.transpose()))
        .symmetrize();

    // Hamiltonian [[At, -S], [-Qt, -At^T]].
    let top = a_tilde.hstack(&s_term.neg());
    let bottom = q_tilde.neg().hstack(&a_tilde.transpose().neg());
    let hamiltonian = top.vstack(&bottom);

    let sign = matrix_sign(&hamiltonian).map_err(|e| Error::CareFailure {
        details: format!("Hamiltonian sign iteration: {e}"),
    })?;

    // Stable invariant subspace = range(sign - I).
    let shifted = sign.sub(&Matrix::identity(2 * n));
    let rd = rank_decompose(&shifted, RankTolerance::default())?;
    if rd.rank != n {
        return Err(Error::CareFailure {
            details: format!("stable subspace has dimension {} instead of {n}", rd.rank),
        });
    }
    let basis = rd.range_basis;
    let v1 = basis.submatrix(0, 0, n, n);
    let v2 = basis.submatrix(n, 0, n, n);
    // P = V2 V1^{-1}: solve V1^T P^T = V2^T.
    let v1t_lu = Lu::new(&v1.transpose()).map_err(|_| Error::CareFailure {
        details: "stable subspace is not a graph over the state space".into(),
    })?;
    let mut p = v1t_lu.solve_mat(&v2.transpose()).transpose().symmetrize();

    // Two Newton sweeps on the residual, each one Lyapunov solve.
    let residual = |p: &Matrix<T>| -> Matrix<T> {
        let pb_h = p.matmul(&reduced.b_hat).add(&reduced.h_hat);
        let quad = pb_h.matmul(&r_lu.solve_mat(&pb_h.transpose()));
        reduced
            .a_hat
            .transpose()
            .matmul(p)
            .add(&p.matmul(&reduced.a_hat))
            .add(&reduced.q_hat)
            .sub(&quad)
    };
    for _ in 0..2 {
        let res = residual(&p);
        let gain = r_lu.solve_mat(
            &reduced
                .b_hat
                .transpose()
                .matmul(&p)
                .add(&reduced.h_hat.transpose()),
        );
        let a_closed = reduced.a_hat.sub(&reduced.b_hat.matmul(&gain));
        match solve_lyapunov(&a_closed, &res) {
            Ok(delta) => p = p.add(&delta).symmetrize(),
            Err(_) => break,
        }
    }

    let res_norm = residual(&p).norm_fro();
    let lambda_min = min_eigval(&p)?;
    let gain = r_lu.solve_mat(
        &reduced
            .b_hat
            .transpose()
            .matmul(&p)
            .add(&reduced.h_hat.transpose()),
    );
    Ok(RiccatiSolution {
        p_hat: p,
        gain,
        residual_norm: res_norm,
        lambda_min,
    })
}

/// Solve the cross-term CARE for the reduced problem.
///
/// Positive semidefinite cost and positive definite input weight are hard
/// preconditions; failures of observability or the rank condition are
/// reported by [`check_assumptions`] but do not stop the solve.
pub fn solve_care<T: Scalar>(reduced: &ReducedOde<T>) -> Result<RiccatiSolution<T>> {
    let s_eigs = sym_eigvals(&reduced.s_hat)?;
    let s_scale = reduced.s_hat.norm_fro() + T::one();
    if s_eigs
        .first()
        .map_or(false, |&l| l < -real::<T>(1e-10) * s_scale)
    {
        return Err(Error::AssumptionViolated {
            details: "cost matrix is not positive semidefinite".into(),
        });
    }
    if reduced.m_red == 0 {
        return Err(Error::AssumptionViolated {
            details: "reduced problem has no inputs; input weight cannot be positive definite"
                .into(),
        });
    }
    let r_min = min_eigval(&reduced.r_hat)?;
    if r_min <= real::<T>(1e-10) * (reduced.r_hat.norm_fro() + T::one()) {
        return Err(Error::AssumptionViolated {
            details: format!("input weight is not positive definite (min eig {r_min:e})"),
        });
    }

    let sol = solve_care_core(reduced)?;
    if reduced.n_hat > 0 {
        let bound = real::<T>(1e-9) * (T::one() + sol.p_hat.norm_fro()).powi(2);
        if sol.residual_norm > bound {
            return Err(Error::CareFailure {
                details: format!("residual {:e} exceeds bound {:e}", sol.residual_norm, bound),
            });
        }
        if sol.lambda_min <= T::zero() {
            return Err(Error::CareFailure {
                details: format!(
                    "solution not positive definite (min eig {:e})",
                    sol.lambda_min
                ),
            });
        }
    }
    Ok(sol)
}

/// Lyapunov certificate for the closed loop `A - B K`: a positive definite
/// solution of `Acl^T Y + Y Acl + I = 0` certifies a Hurwitz matrix.
pub fn certify_closed_loop<T: Scalar>(
    reduced: &ReducedOde<T>,
    sol: &RiccatiSolution<T>,
) -> Result<bool> {
    let n = reduced.n_hat;
    if n == 0 {
        return Ok(true);
    }
    let a_closed = reduced.a_hat.sub(&reduced.b_hat.matmul(&sol.gain));
    match solve_lyapunov(&a_closed, &Matrix::identity(n)) {
        Ok(y) => Ok(min_eigval(&y)? > T::zero()),
        Err(Error::ResonantLyapunov) => Ok(false),
        Err(e) => Err(e),
    }
}
