//! Discretized finite-horizon constrained OCP over the reduced ODE.
//!
//! Piecewise-constant inputs on a uniform grid make both the dynamics and
//! the stage cost exact: the ZOH pair comes from one augmented matrix
//! exponential and the per-step cost blocks from the companion
//! triangular-exponential quadrature, so the discrete cost equals the
//! continuous integral for every grid input sequence. States are
//! eliminated, leaving a condensed quadratic program in the stacked inputs
//! with per-step inequality rows, one optional terminal ellipsoid, and one
//! optional terminal-input equality, solved by operator splitting.

use crate::error::Error;
use crate::numlin::expm::expm;
use crate::numlin::lu::{inverse, Lu};
use crate::numlin::matrix::{dot, norm2, norm_inf_vec, vec_sub, Matrix};
use crate::numlin::project_ellipsoid;
use crate::regularize::ReducedOde;
use crate::riccati::RiccatiSolution;
use crate::scalar::{real, Scalar};
use crate::terminal::TerminalIngredients;
use crate::Result;

const ADMM_MAX_ITER: usize = 20_000;
const ADMM_TOL: f64 = 1e-8;
const ADMM_RHO_INIT: f64 = 1.0;
const ADMM_ADAPT_EVERY: usize = 50;
const ADMM_INFEAS_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct TerminalData<T> {
    pub p_hat: Matrix<T>,
    pub rho: T,
    pub gain: Matrix<T>,
}

/// Exact discretization of the reduced OCP on `N` steps of length `h`.
#[derive(Debug, Clone)]
pub struct DiscreteOcp<T> {
    pub n_steps: usize,
    pub h: T,
    pub ad: Matrix<T>,
    pub bd: Matrix<T>,
    /// Per-step cost blocks: the stage integral equals
    /// `(z_k; v_k)^T [qd hd; hd^T rd] (z_k; v_k)`.
    pub qd: Matrix<T>,
    pub hd: Matrix<T>,
    pub rd: Matrix<T>,
    /// Constraint rows `[F G] X` applied at every grid point.
    pub constraint_rows: Matrix<T>,
    pub terminal: Option<TerminalData<T>>,
    pub n_hat: usize,
    pub m_red: usize,
}

/// ZOH pair plus exact stage-cost blocks for the reduced system.
pub fn discretize<T: Scalar>(
    reduced: &ReducedOde<T>,
    horizon: T,
    steps: usize,
) -> Result<DiscreteOcp<T>> {
    if horizon <= T::zero() || steps == 0 {
        return Err(Error::InvalidConfig {
            details: "horizon must be positive and steps at least 1".into(),
        });
    }
    let n = reduced.n_hat;
    let m = reduced.m_red;
    let h = horizon / real::<T>(steps as f64);

    // Augmented drift [[A, B], [0, 0]]; its h-exponential is [[Ad, Bd], [0, I]].
    let d = n + m;
    let mut aug = Matrix::zeros(d, d);
    aug.set_block(0, 0, &reduced.a_hat);
    aug.set_block(0, n, &reduced.b_hat);
    let phase = expm(&aug.scale(h))?;
    let ad = phase.submatrix(0, 0, n, n);
    let bd = phase.submatrix(0, n, n, m);

    // Quadrature: exp([[ -Aug^T, S ], [0, Aug]] h) = [[*, G], [0, F]] with
    // the stage integral F^T G.
    let mut van = Matrix::zeros(2 * d, 2 * d);
    van.set_block(0, 0, &aug.transpose().neg());
    van.set_block(0, d, &reduced.s_hat);
    van.set_block(d, d, &aug);
    let e = expm(&van.scale(h))?;
    let g_block = e.submatrix(0, d, d, d);
    let f_block = e.submatrix(d, d, d, d);
    let sd = f_block.transpose().matmul(&g_block).symmetrize();

    let qd = sd.submatrix(0, 0, n, n);
    let hd = sd.submatrix(0, n, n, m);
    let rd = sd.submatrix(n, n, m, m);

    Ok(DiscreteOcp {
        n_steps: steps,
        h,
        ad,
        bd,
        qd,
        hd,
        rd,
        constraint_rows: reduced.constraint_rows.clone(),
        terminal: None,
        n_hat: n,
        m_red: m,
    })
}

impl<T: Scalar> DiscreteOcp<T> {
    pub fn with_terminal(mut self, ing: &TerminalIngredients<T>, sol: &RiccatiSolution<T>) -> Self {
        self.terminal = Some(TerminalData {
            p_hat: ing.p_hat.clone(),
            rho: ing.rho,
            gain: sol.gain.clone(),
        });
        self
    }

    /// Roll the dynamics out under a given input sequence.
    pub fn rollout(&self, z0: &[T], v_grid: &[Vec<T>]) -> Vec<Vec<T>> {
        let mut z = z0.to_vec();
        let mut path = vec![z.clone()];
        for v in v_grid {
            let zn = crate::numlin::vec_add(&self.ad.matvec(&z), &self.bd.matvec(v));
            path.push(zn.clone());
            z = zn;
        }
        path
    }

    /// Objective value of an input sequence (terminal cost included when
    /// `use_terminal` and terminal data is attached).
    pub fn eval_cost(&self, z0: &[T], v_grid: &[Vec<T>], use_terminal: bool) -> T {
        let path = self.rollout(z0, v_grid);
        let mut cost = T::zero();
        for (k, v) in v_grid.iter().enumerate() {
            cost = cost + self.stage_cost(&path[k], v);
        }
        if use_terminal {
            if let Some(term) = &self.terminal {
                let zn = &path[self.n_steps];
                cost = cost + dot(zn, &term.p_hat.matvec(zn));
            }
        }
        cost
    }

    pub fn stage_cost(&self, z: &[T], v: &[T]) -> T {
        let qz = self.qd.matvec(z);
        let hv = self.hd.matvec(v);
        let rv = self.rd.matvec(v);
        let two = T::one() + T::one();
        dot(z, &qz) + two * dot(z, &hv) + dot(v, &rv)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OcpStatus {
    Optimal,
    MaxIter,
    Infeasible,
}

impl core::fmt::Display for OcpStatus {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            OcpStatus::Optimal => write!(f, "optimal"),
            OcpStatus::MaxIter => write!(f, "max_iter"),
            OcpStatus::Infeasible => write!(f, "infeasible"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct OcpSolution<T> {
    /// Inputs per step, `N` entries of length `m_red`.
    pub v_grid: Vec<Vec<T>>,
    /// States per grid point, `N + 1` entries of length `n_hat`.
    pub z_grid: Vec<Vec<T>>,
    pub cost: T,
    pub status: OcpStatus,
    pub primal_residual: T,
    pub dual_residual: T,
    pub iterations: usize,
}

/// Row blocks of the slack map `y = M w + c`.
struct SlackSets<T> {
    /// Number of one-sided rows `y_i <= 1`.
    n_box: usize,
    /// Equality rows pinned to the given values.
    eq_values: Vec<T>,
    /// Ellipsoid block (terminal state) at the tail, if present.
    ellipsoid: Option<(Matrix<T>, T, Matrix<T>)>, // (P, rho, P^{-1})
}

struct Condensed<T> {
    p_qp: Matrix<T>,
    q_qp: Vec<T>,
    m_map: Matrix<T>,
    c_off: Vec<T>,
    sets: SlackSets<T>,
}

fn condense<T: Scalar>(docp: &DiscreteOcp<T>, z0: &[T], use_terminal: bool) -> Condensed<T> {
    let n = docp.n_hat;
    let m = docp.m_red;
    let big_n = docp.n_steps;
    let dim = big_n * m;

    // State predictors.
    let mut phi_mats: Vec<Matrix<T>> = Vec::with_capacity(big_n + 1);
    let mut phi_offs: Vec<Vec<T>> = Vec::with_capacity(big_n + 1);
    phi_mats.push(Matrix::zeros(n, dim));
    phi_offs.push(z0.to_vec());
    for k in 0..big_n {
        let prev = &phi_mats[k];
        let mut next = docp.ad.matmul(prev);
        next.set_block(0, k * m, &docp.bd);
        phi_mats.push(next);
        phi_offs.push(docp.ad.matvec(&phi_offs[k]));
    }

    // Objective: sum_k (z_k; v_k)^T Sd (z_k; v_k) + optional z_N^T P z_N.
    let mut p_qp = Matrix::zeros(dim, dim);
    let mut q_qp = vec![T::zero(); dim];
    let two = T::one() + T::one();
    let sd = docp
        .qd
        .hstack(&docp.hd)
        .vstack(&docp.hd.transpose().hstack(&docp.rd));
    for k in 0..big_n {
        // M_k = [phi_k; E_k], c_k = [phi_off_k; 0].
        let mut mk = Matrix::zeros(n + m, dim);
        mk.set_block(0, 0, &phi_mats[k]);
        for i in 0..m {
            mk[(n + i, k * m + i)] = T::one();
        }
        let mut ck = phi_offs[k].clone();
        ck.extend(core::iter::repeat(T::zero()).take(m));
        let smk = sd.matmul(&mk);
        p_qp = p_qp.add(&mk.transpose().matmul(&smk).scale(two));
        let sck = sd.matvec(&ck);
        let contrib = mk.tr_matvec(&sck);
        for i in 0..dim {
            q_qp[i] = q_qp[i] + two * contrib[i];
        }
    }
    if use_terminal {
        if let Some(term) = &docp.terminal {
            let phin = &phi_mats[big_n];
            let p_phin = term.p_hat.matmul(phin);
            p_qp = p_qp.add(&phin.transpose().matmul(&p_phin).scale(two));
            let p_off = term.p_hat.matvec(&phi_offs[big_n]);
            let contrib = phin.tr_matvec(&p_off);
            for i in 0..dim {
                q_qp[i] = q_qp[i] + two * contrib[i];
            }
        }
    }
    p_qp = p_qp.symmetrize();

    // Slack rows: inequality rows per step, then the terminal equality,
    // then the terminal state block for the ellipsoid.
    let c_rows = docp.constraint_rows.rows();
    let mut blocks_m: Vec<Matrix<T>> = Vec::new();
    let mut c_off: Vec<T> = Vec::new();
    for k in 0..big_n {
        if c_rows == 0 {
            continue;
        }
        let mut mk = Matrix::zeros(n + m, dim);
        mk.set_block(0, 0, &phi_mats[k]);
        for i in 0..m {
            mk[(n + i, k * m + i)] = T::one();
        }
        let rows_k = docp.constraint_rows.matmul(&mk);
        let mut ck = phi_offs[k].clone();
        ck.extend(core::iter::repeat(T::zero()).take(m));
        let off_k = docp.constraint_rows.matvec(&ck);
        blocks_m.push(rows_k);
        c_off.extend(off_k);
    }
    let n_box = c_off.len();

    let mut eq_values = Vec::new();
    let mut ellipsoid = None;
    if use_terminal {
        if let Some(term) = &docp.terminal {
            // v_{N-1} + K z_{N-1} = 0.
            let last = big_n - 1;
            let mut rows = term.gain.matmul(&phi_mats[last]);
            for i in 0..m {
                rows[(i, last * m + i)] = rows[(i, last * m + i)] + T::one();
            }
            let off = term.gain.matvec(&phi_offs[last]);
            blocks_m.push(rows);
            c_off.extend(off.iter().copied());
            eq_values = vec![T::zero(); m];

            // Terminal state rows for the ellipsoid projection.
            blocks_m.push(phi_mats[big_n].clone());
            c_off.extend(phi_offs[big_n].iter().copied());
            let p_inv = inverse(&term.p_hat).expect("terminal weight is positive definite");
            ellipsoid = Some((term.p_hat.clone(), term.rho, p_inv));
        }
    }

    let m_map = if blocks_m.is_empty() {
        Matrix::zeros(0, dim)
    } else {
        let mut stacked = blocks_m[0].clone();
        for b in &blocks_m[1..] {
            stacked = stacked.vstack(b);
        }
        stacked
    };

    Condensed {
        p_qp,
        q_qp,
        m_map,
        c_off,
        sets: SlackSets {
            n_box,
            eq_values,
            ellipsoid,
        },
    }
}

fn project_slack<T: Scalar>(sets: &SlackSets<T>, y: &[T]) -> Vec<T> {
    let mut out = y.to_vec();
    for item in out.iter_mut().take(sets.n_box) {
        if *item > T::one() {
            *item = T::one();
        }
    }
    let eq_start = sets.n_box;
    for (i, &val) in sets.eq_values.iter().enumerate() {
        out[eq_start + i] = val;
    }
    if let Some((p, rho, _)) = &sets.ellipsoid {
        let ell_start = eq_start + sets.eq_values.len();
        let block = &y[ell_start..];
        let projected =
            project_ellipsoid(block, p, *rho).expect("terminal projection is well posed");
        out[ell_start..].copy_from_slice(&projected);
    }
    out
}

/// Support function of the slack set evaluated at a certificate direction;
/// returns `None` when it is `+infinity`.
fn support_function<T: Scalar>(sets: &SlackSets<T>, delta: &[T], tol: T) -> Option<T> {
    let mut total = T::zero();
    for &d in delta.iter().take(sets.n_box) {
        if d < -tol {
            return None;
        }
        if d > T::zero() {
            total = total + d; // upper bound is 1
        }
    }
    let eq_start = sets.n_box;
    for (i, &val) in sets.eq_values.iter().enumerate() {
        total = total + delta[eq_start + i] * val;
    }
    if let Some((_, rho, p_inv)) = &sets.ellipsoid {
        let ell_start = eq_start + sets.eq_values.len();
        let block = &delta[ell_start..];
        let quad = dot(block, &p_inv.matvec(block));
        total = total + (*rho * quad.max(T::zero())).sqrt();
    }
    Some(total)
}

/// Solve the condensed OCP by operator splitting (fresh start).
pub fn solve_ocp<T: Scalar>(
    docp: &DiscreteOcp<T>,
    z0: &[T],
    use_terminal: bool,
) -> Result<OcpSolution<T>> {
    solve_ocp_warm(docp, z0, use_terminal, None)
}

/// Operator-splitting solve with an optional warm-start input sequence.
pub fn solve_ocp_warm<T: Scalar>(
    docp: &DiscreteOcp<T>,
    z0: &[T],
    use_terminal: bool,
    warm_start: Option<&[Vec<T>]>,
) -> Result<OcpSolution<T>> {
    if z0.len() != docp.n_hat {
        return Err(Error::DimensionMismatch {
            op: "solve_ocp",
            details: format!("state has length {}, expected {}", z0.len(), docp.n_hat),
        });
    }
    if z0.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite { op: "solve_ocp" });
    }
    if use_terminal && docp.terminal.is_none() {
        return Err(Error::InvalidConfig {
            details: "terminal ingredients requested but not attached".into(),
        });
    }

    let big_n = docp.n_steps;
    let m = docp.m_red;
    let dim = big_n * m;
    let cond = condense(docp, z0, use_terminal);

    let mut w = vec![T::zero(); dim];
    if let Some(ws) = warm_start {
        if ws.len() == big_n && ws.iter().all(|v| v.len() == m) {
            for (k, v) in ws.iter().enumerate() {
                w[k * m..(k + 1) * m].copy_from_slice(v);
            }
        }
    }

    let n_rows = cond.m_map.rows();
    let finish = |w: &[T], status, pri, dua, iters| -> OcpSolution<T> {
        let v_grid: Vec<Vec<T>> = (0..big_n).map(|k| w[k * m..(k + 1) * m].to_vec()).collect();
        let z_grid = docp.rollout(z0, &v_grid);
        let cost = docp.eval_cost(z0, &v_grid, use_terminal);
        OcpSolution {
            v_grid,
            z_grid,
            cost,
            status,
            primal_residual: pri,
            dual_residual: dua,
            iterations: iters,
        }
    };

    if dim == 0 {
        return Ok(finish(&w, OcpStatus::Optimal, T::zero(), T::zero(), 0));
    }

    // Unconstrained: a single linear solve.
    if n_rows == 0 {
        let rhs: Vec<T> = cond.q_qp.iter().map(|&q| -q).collect();
        let sol = Lu::new(&cond.p_qp)
            .map_err(|_| Error::StructuralInconsistency {
                details: "condensed objective is singular".into(),
            })?
            .solve_vec(&rhs);
        return Ok(finish(&sol, OcpStatus::Optimal, T::zero(), T::zero(), 1));
    }

    let mut rho = real::<T>(ADMM_RHO_INIT);
    let mt = cond.m_map.transpose();
    let mtm = mt.matmul(&cond.m_map);
    let factorize = |rho: T| -> Result<Lu<T>> {
        Lu::new(&cond.p_qp.add(&mtm.scale(rho))).map_err(|_| Error::StructuralInconsistency {
            details: "operator-splitting system is singular".into(),
        })
    };
    let mut kkt = factorize(rho)?;

    let mut y = project_slack(&cond.sets, &{
        let mut init = cond.m_map.matvec(&w);
        for (i, c) in cond.c_off.iter().enumerate() {
            init[i] = init[i] + *c;
        }
        init
    });
    let mut lambda = vec![T::zero(); n_rows];
    let mut lambda_window = lambda.clone();

    let tol = real::<T>(ADMM_TOL);
    let mut pri_res = T::infinity();
    let mut dua_res = T::infinity();
    let mut status = OcpStatus::MaxIter;
    let mut iterations = ADMM_MAX_ITER;

    for iter in 0..ADMM_MAX_ITER {
        // w-update: (P + rho M^T M) w = -q - rho M^T (c - y + lambda).
        let mut shift = vec![T::zero(); n_rows];
        for i in 0..n_rows {
            shift[i] = cond.c_off[i] - y[i] + lambda[i];
        }
        let mut rhs = mt.matvec(&shift);
        for i in 0..dim {
            rhs[i] = -cond.q_qp[i] - rho * rhs[i];
        }
        w = kkt.solve_vec(&rhs);

        // y-update and dual update.
        let mw = cond.m_map.matvec(&w);
        let mut axc = vec![T::zero(); n_rows];
        for i in 0..n_rows {
            axc[i] = mw[i] + cond.c_off[i];
        }
        let mut pre = vec![T::zero(); n_rows];
        for i in 0..n_rows {
            pre[i] = axc[i] + lambda[i];
        }
        let y_next = project_slack(&cond.sets, &pre);
        let y_diff = vec_sub(&y_next, &y);
        for i in 0..n_rows {
            lambda[i] = lambda[i] + axc[i] - y_next[i];
        }

        pri_res = norm2(&vec_sub(&axc, &y_next));
        dua_res = rho * norm2(&mt.matvec(&y_diff));
        y = y_next;

        let scale_p = T::one() + norm2(&axc).max(norm2(&y));
        let scale_d = T::one() + rho * norm2(&mt.matvec(&lambda));
        if pri_res <= tol * scale_p && dua_res <= tol * scale_d {
            status = OcpStatus::Optimal;
            iterations = iter + 1;
            break;
        }

        // Primal infeasibility certificate on the dual increment
        // accumulated over a window.
        if (iter + 1) % 25 == 0 {
            let delta = vec_sub(&lambda, &lambda_window);
            let delta_norm = norm_inf_vec(&delta);
            if delta_norm > real::<T>(1e-12) {
                let mt_delta = norm_inf_vec(&mt.matvec(&delta));
                let eps = real::<T>(ADMM_INFEAS_TOL) * delta_norm;
                if mt_delta <= eps * real::<T>((dim as f64).sqrt() + 1.0) {
                    if let Some(support) = support_function(&cond.sets, &delta, eps) {
                        let gap = support - dot(&delta, &cond.c_off);
                        if gap < -eps {
                            status = OcpStatus::Infeasible;
                            iterations = iter + 1;
                            break;
                        }
                    }
                }
            }
            lambda_window = lambda.clone();
        }

        // Residual balancing.
        if (iter + 1) % ADMM_ADAPT_EVERY == 0 {
            let ten = real::<T>(10.0);
            let two = real::<T>(2.0);
            let ratio_p = pri_res / scale_p;
            let ratio_d = dua_res / scale_d;
            let mut changed = false;
            if ratio_p > ten * ratio_d && rho < real::<T>(1e6) {
                rho = rho * two;
                changed = true;
            } else if ratio_d > ten * ratio_p && rho > real::<T>(1e-6) {
                rho = rho / two;
                changed = true;
            }
            if changed {
                kkt = factorize(rho)?;
            }
        }
    }

    Ok(finish(&w, status, pri_res, dua_res, iterations))
}

/// Infinite-horizon unconstrained value `z0^T P z0`.
pub fn infinite_horizon_value<T: Scalar>(sol: &RiccatiSolution<T>, z0: &[T]) -> T {
    dot(z0, &sol.p_hat.matvec(z0))
}

/// Dynamic-programming residual
/// `|V(z0) - (J_T along the sampled optimal feedback + V(z(T)))|`
/// with the feedback held constant over each of `steps` grid intervals;
/// first order in the step size.
pub fn bellman_residual_steps<T: Scalar>(
    reduced: &ReducedOde<T>,
    sol: &RiccatiSolution<T>,
    z0: &[T],
    horizon: T,
    steps: usize,
) -> Result<T> {
    let docp = discretize(reduced, horizon, steps)?;
    let mut z = z0.to_vec();
    let mut cost = T::zero();
    for _ in 0..steps {
        let v: Vec<T> = sol.gain.matvec(&z).iter().map(|&g| -g).collect();
        cost = cost + docp.stage_cost(&z, &v);
        z = crate::numlin::vec_add(&docp.ad.matvec(&z), &docp.bd.matvec(&v));
    }
    let total = cost + infinite_horizon_value(sol, &z);
    Ok((infinite_horizon_value(sol, z0) - total).abs())
}

/// [`bellman_residual_steps`] on the standard 200-point grid.
pub fn bellman_residual<T: Scalar>(
    reduced: &ReducedOde<T>,
    sol: &RiccatiSolution<T>,
    z0: &[T],
    horizon: T,
) -> Result<T> {
    bellman_residual_steps(reduced, sol, z0, horizon, 200)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::riccati::solve_care;

    fn integrator() -> ReducedOde<f64> {
        // z' = v with unit costs.
        crate::riccati::tests::reduced_from_parts(
            Matrix::diag(&[0.0]),
            Matrix::diag(&[1.0]),
            Matrix::identity(1),
            Matrix::zeros(1, 1),
            Matrix::identity(1),
        )
    }

    #[test]
    fn discretize_integrator_closed_form() {
        let red = integrator();
        let docp = discretize(&red, 1.0, 1).unwrap();
        assert!((docp.ad[(0, 0)] - 1.0).abs() < 1e-14);
        assert!((docp.bd[(0, 0)] - 1.0).abs() < 1e-14);
        // From integrating (z0 + t v)^2 + v^2 over [0, 1].
        assert!((docp.qd[(0, 0)] - 1.0).abs() < 1e-12);
        assert!((docp.hd[(0, 0)] - 0.5).abs() < 1e-12);
        assert!((docp.rd[(0, 0)] - (1.0 + 1.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn discretize_decay_closed_form() {
        let red = crate::riccati::tests::reduced_from_parts(
            Matrix::diag(&[-1.0]),
            Matrix::zeros(1, 1),
            Matrix::identity(1),
            Matrix::zeros(1, 1),
            Matrix::identity(1),
        );
        let docp = discretize(&red, 2.0f64.ln(), 1).unwrap();
        assert!((docp.ad[(0, 0)] - 0.5).abs() < 1e-13);
    }

    #[test]
    fn zero_state_stays_optimal_at_zero_cost() {
        let red = integrator();
        let docp = discretize(&red, 1.0, 5).unwrap();
        let sol = solve_ocp(&docp, &[0.0], false).unwrap();
        assert_eq!(sol.status, OcpStatus::Optimal);
        assert!(sol.cost.abs() < 1e-12);
        for v in &sol.v_grid {
            assert!(v[0].abs() < 1e-9);
        }
    }

    #[test]
    fn long_horizon_matches_riccati_value() {
        let red = integrator();
        let care = solve_care(&red).unwrap();
        let docp = discretize(&red, 12.0, 240).unwrap();
        let sol = solve_ocp(&docp, &[1.0], false).unwrap();
        let vinf = infinite_horizon_value(&care, &[1.0]);
        let rel = (sol.cost - vinf).abs() / vinf;
        assert!(rel < 1e-3, "relative gap {rel}");
    }

    #[test]
    fn bellman_residual_decays_under_refinement() {
        let red = integrator();
        let care = solve_care(&red).unwrap();
        let r200 = bellman_residual_steps(&red, &care, &[1.0], 1.0, 200).unwrap();
        let r400 = bellman_residual_steps(&red, &care, &[1.0], 1.0, 400).unwrap();
        let vinf = infinite_horizon_value(&care, &[1.0]);
        assert!(r200 / vinf < 1e-4, "relative residual {}", r200 / vinf);
        // Exact ZOH propagation and exact stage quadrature leave only the
        // sampled-feedback suboptimality, which is quadratic in the step.
        let ratio = r200 / r400;
        assert!(ratio > 1.4, "refinement ratio {ratio}");
        assert!((ratio - 4.0).abs() < 1.0, "refinement ratio {ratio}");
    }

    #[test]
    fn box_constrained_solution_respects_bounds() {
        // Constraint |v| <= 0.4 written as two rows of [F G] X with X = I.
        let mut red = integrator();
        red.constraint_rows = Matrix::from_rows(&[&[0.0, 2.5], &[0.0, -2.5]]);
        let docp = discretize(&red, 2.0, 20).unwrap();
        let sol = solve_ocp(&docp, &[2.0], false).unwrap();
        assert_eq!(sol.status, OcpStatus::Optimal);
        for v in &sol.v_grid {
            assert!(v[0].abs() <= 0.4 + 1e-6, "bound violated: {}", v[0]);
        }
        // Clipping must actually bind somewhere for this start.
        assert!(sol.v_grid.iter().any(|v| v[0].abs() > 0.39));
    }

    #[test]
    fn infeasible_constant_row_detected() {
        // A state-only row that the fixed initial state already violates.
        let mut red = integrator();
        red.constraint_rows = Matrix::from_rows(&[&[1.0, 0.0]]);
        let docp = discretize(&red, 1.0, 4).unwrap();
        let sol = solve_ocp(&docp, &[2.0], false).unwrap();
        assert_eq!(sol.status, OcpStatus::Infeasible);
    }

    #[test]
    fn convexity_sanity_never_beats_zero_control() {
        let red = integrator();
        let docp = discretize(&red, 3.0, 30).unwrap();
        let sol = solve_ocp(&docp, &[0.7], false).unwrap();
        let zero = vec![vec![0.0]; 30];
        let zero_cost = docp.eval_cost(&[0.7], &zero, false);
        assert!(sol.cost <= zero_cost + 1e-9);
    }
}
