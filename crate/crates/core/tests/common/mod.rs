//! Shared helpers for the integration suites: independent oracles and
//! random instance generators.

#![allow(dead_code)]

use daempc::numlin::lu::Lu;
use daempc::numlin::matrix::{dot, Matrix};
use daempc::ocp::DiscreteOcp;
use daempc::pencil::{ConstraintSet, DaeSystem};
use daempc::regularize::{ReducedOde, RouteKind};
use daempc::rng::Rng;

pub fn random_matrix(rng: &mut Rng, rows: usize, cols: usize) -> Matrix<f64> {
    Matrix::from_fn(rows, cols, |_, _| rng.gauss())
}

pub fn random_invertible(rng: &mut Rng, n: usize) -> Matrix<f64> {
    loop {
        let m = random_matrix(rng, n, n);
        if Lu::new(&m).is_ok() {
            return m;
        }
    }
}

pub fn random_orthogonal(rng: &mut Rng, n: usize) -> Matrix<f64> {
    // Gram-Schmidt on a random Gaussian matrix.
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    while cols.len() < n {
        let mut v: Vec<f64> = (0..n).map(|_| rng.gauss()).collect();
        for c in &cols {
            let proj = dot(&v, c);
            for i in 0..n {
                v[i] -= proj * c[i];
            }
        }
        let norm = dot(&v, &v).sqrt();
        if norm > 1e-6 {
            for x in &mut v {
                *x /= norm;
            }
            cols.push(v);
        }
    }
    Matrix::from_fn(n, n, |i, j| cols[j][i])
}

/// Hand-assembled reduced problem with identity lift; satisfies the
/// standing assumptions by construction (positive definite full cost).
pub fn random_reduced(rng: &mut Rng, n_hat: usize, m_red: usize) -> ReducedOde<f64> {
    let a_hat = random_matrix(rng, n_hat, n_hat);
    let b_hat = random_matrix(rng, n_hat, m_red);
    let g = random_invertible(rng, n_hat + m_red);
    let s_hat = g.transpose().matmul(&g);
    let s_hat = s_hat.add(&Matrix::identity(n_hat + m_red).scale(0.1));
    let q_hat = s_hat.submatrix(0, 0, n_hat, n_hat);
    let h_hat = s_hat.submatrix(0, n_hat, n_hat, m_red);
    let r_hat = s_hat.submatrix(n_hat, n_hat, m_red, m_red);
    ReducedOde {
        a_hat,
        b_hat,
        q_hat,
        h_hat,
        r_hat,
        s_hat,
        lift: Matrix::identity(n_hat + m_red),
        t_hat_total: Matrix::identity(n_hat + m_red),
        t_hat_total_inv: Matrix::identity(n_hat + m_red),
        init_selector: Matrix::from_fn(n_hat, n_hat + m_red, |i, j| if i == j { 1.0 } else { 0.0 }),
        constraint_rows: Matrix::zeros(0, n_hat + m_red),
        n_hat,
        m_red,
        n_states: n_hat,
        m_inputs: m_red,
        route: RouteKind::Feedback,
    }
}

/// Damped, norm-controlled variant: drift spectrum near -1, nearly
/// isotropic cost, unit-scale input map. Keeps the hold bias of grid
/// discretizations small in long-horizon value comparisons.
pub fn random_damped_reduced(rng: &mut Rng, n_hat: usize, m_red: usize) -> ReducedOde<f64> {
    let mut red = random_reduced(rng, n_hat, m_red);
    let scale = 0.3 / red.a_hat.norm_fro().max(1.0);
    red.a_hat = red
        .a_hat
        .scale(scale)
        .sub(&Matrix::identity(n_hat).scale(0.9));
    red.b_hat = red.b_hat.scale(1.0 / red.b_hat.norm_fro().max(1.0));
    let dim = n_hat + m_red;
    red.s_hat = Matrix::identity(dim).add(&red.s_hat.scale(0.3 / red.s_hat.norm_fro().max(1.0)));
    red.q_hat = red.s_hat.submatrix(0, 0, n_hat, n_hat);
    red.h_hat = red.s_hat.submatrix(0, n_hat, n_hat, m_red);
    red.r_hat = red.s_hat.submatrix(n_hat, n_hat, m_red, m_red);
    red
}

/// Random regular index-one DAE with generic right-hand side:
/// `E = P diag(I_k, 0) Q` with invertible `P`, `Q`.
pub fn random_index1_dae(rng: &mut Rng, n: usize, rank: usize, m: usize) -> DaeSystem<f64> {
    let p = random_invertible(rng, n);
    let q = random_invertible(rng, n);
    let mut core = Matrix::zeros(n, n);
    for i in 0..rank {
        core[(i, i)] = 1.0;
    }
    let e = p.matmul(&core).matmul(&q);
    let a = random_matrix(rng, n, n);
    let b = random_matrix(rng, n, m);
    DaeSystem::new(e, a, b).unwrap()
}

pub fn empty_constraints(n: usize, m: usize) -> ConstraintSet<f64> {
    ConstraintSet::empty(n, m)
}

// ── independent brute-force QP oracle ───────────────────────────────

/// Evaluate the stacked constraint values of an input sequence (black box
/// through the rollout).
fn constraint_values(docp: &DiscreteOcp<f64>, z0: &[f64], v_grid: &[Vec<f64>]) -> Vec<f64> {
    let path = docp.rollout(z0, v_grid);
    let mut vals = Vec::new();
    for (k, v) in v_grid.iter().enumerate() {
        let mut zv = path[k].clone();
        zv.extend_from_slice(v);
        vals.extend(docp.constraint_rows.matvec(&zv));
    }
    vals
}

fn unpack(w: &[f64], steps: usize, m: usize) -> Vec<Vec<f64>> {
    (0..steps).map(|k| w[k * m..(k + 1) * m].to_vec()).collect()
}

/// Exhaustive active-set solve of the discretized OCP (no terminal
/// ingredients), built by black-box evaluation of the cost and constraint
/// functions: the quadratic pieces are recovered from function values, the
/// optimum by enumerating every active set of the KKT system. Returns
/// `None` when no active set yields a feasible candidate.
pub fn brute_force_ocp(docp: &DiscreteOcp<f64>, z0: &[f64]) -> Option<(f64, Vec<f64>)> {
    let steps = docp.n_steps;
    let m = docp.m_red;
    let dim = steps * m;
    let zero = vec![0.0; dim];
    let eval = |w: &[f64]| docp.eval_cost(z0, &unpack(w, steps, m), false);
    let j0 = eval(&zero);

    // Quadratic recovery: J(w) = 1/2 w' P w + q' w + j0.
    let mut p = Matrix::zeros(dim, dim);
    let mut q = vec![0.0; dim];
    let unit = |i: usize| {
        let mut e = vec![0.0; dim];
        e[i] = 1.0;
        e
    };
    let singles: Vec<f64> = (0..dim).map(|i| eval(&unit(i))).collect();
    for i in 0..dim {
        for j in 0..dim {
            let mut eij = vec![0.0; dim];
            eij[i] += 1.0;
            eij[j] += 1.0;
            // J(ei+ej) - J(ei) - J(ej) + J(0) = P_ij (also for i = j).
            let pij = eval(&eij) - singles[i] - singles[j] + j0;
            p[(i, j)] = pij;
        }
    }
    for i in 0..dim {
        // q_i = J(e_i) - 1/2 P_ii - J(0).
        q[i] = singles[i] - 0.5 * p[(i, i)] - j0;
    }

    // Affine constraint recovery: val(w) = G w + g0 <= 1.
    let g0 = constraint_values(docp, z0, &unpack(&zero, steps, m));
    let rows = g0.len();
    let mut g = Matrix::zeros(rows, dim);
    for j in 0..dim {
        let vals = constraint_values(docp, z0, &unpack(&unit(j), steps, m));
        for i in 0..rows {
            g[(i, j)] = vals[i] - g0[i];
        }
    }

    let feas_tol = 1e-8;
    let mut best: Option<(f64, Vec<f64>)> = None;
    assert!(rows <= 16, "oracle instance too large");
    for mask in 0u32..(1u32 << rows) {
        let active: Vec<usize> = (0..rows).filter(|i| mask & (1 << i) != 0).collect();
        let na = active.len();
        // KKT: [P G_a'; G_a 0] [w; mu] = [-q; 1 - g0_a].
        let mut kkt = Matrix::zeros(dim + na, dim + na);
        kkt.set_block(0, 0, &p);
        let mut rhs = vec![0.0; dim + na];
        for i in 0..dim {
            rhs[i] = -q[i];
        }
        for (t, &row) in active.iter().enumerate() {
            for j in 0..dim {
                kkt[(dim + t, j)] = g[(row, j)];
                kkt[(j, dim + t)] = g[(row, j)];
            }
            rhs[dim + t] = 1.0 - g0[row];
        }
        let Ok(lu) = Lu::new(&kkt) else { continue };
        let sol = lu.solve_vec(&rhs);
        let w = &sol[..dim];
        let mu = &sol[dim..];
        if mu.iter().any(|&x| x < -1e-7) {
            continue;
        }
        let vals = constraint_values(docp, z0, &unpack(w, steps, m));
        if vals.iter().any(|&v| v > 1.0 + feas_tol) {
            continue;
        }
        let cost = eval(w);
        if best.as_ref().map_or(true, |(c, _)| cost < *c) {
            best = Some((cost, w.to_vec()));
        }
    }
    best
}
