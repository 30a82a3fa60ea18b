//! Turn an arbitrary DAE system into an equivalent explicit ODE optimal
//! control problem.
//!
//! Two routes produce a regular index-at-most-one system first:
//!
//! * feedback regularization `[E, A + BK, B]` for regular, impulse
//!   controllable systems (numerically cheaper), and
//! * a unimodular reduction `[sE - A, -B] T = U(s) [0; sE_r - A_r, -B_r]`
//!   of the extended pencil for everything else. Free variables of a
//!   singular system become inputs of the reduced system, so the reduced
//!   input dimension can exceed the original one.
//!
//! An SVD-based state transformation then yields the explicit ODE, the
//! lift back to `(x, u)`, and the transformed cost blocks.

use crate::error::Error;
use crate::numlin::lu::Lu;
use crate::numlin::matrix::Matrix;
use crate::numlin::svd::{orth_complement, rank_decompose, svd, RankTolerance};
use crate::pencil::{
    impulse_controllable, is_regular, kronecker_structure, ConstraintSet, DaeSystem,
};
use crate::rng::Rng;
use crate::scalar::{real, Scalar};
use crate::Result;

/// The identity `[sE - A, -B] T = U(s) [0; sE_r - A_r, -B_r]` and the
/// regularity/index checks are verified to this relative tolerance.
const IDENTITY_TOL: f64 = 1e-10;

// ── feedback route ──────────────────────────────────────────────────

#[derive(Debug, Clone)]
pub struct FeedbackRegularization<T> {
    /// `K` with `[E, A + BK, B]` regular of index at most one;
    /// behaviours are linked by `u = K x + v`.
    pub gain: Matrix<T>,
    /// The regularized system `[E, A + BK, B]`.
    pub system: DaeSystem<T>,
    /// Number of random draws consumed (0 when `K = 0` was accepted).
    pub attempts: usize,
}

/// Regularizing feedback for a regular, impulse controllable system.
///
/// `K = M Z^T` for an orthonormal kernel basis `Z` of `E` and a seeded
/// Gaussian `M`, accepted when `rank [E, (A + BK) Z] = n`. `K = 0` is
/// tried first so index-at-most-one systems pass through untouched; up to
/// ten random draws follow.
pub fn feedback_regularize<T: Scalar>(
    sys: &DaeSystem<T>,
    seed: u64,
) -> Result<FeedbackRegularization<T>> {
    if !is_regular(sys)? {
        return Err(Error::RegularityRequired {
            op: "feedback_regularize",
        });
    }
    if !impulse_controllable(sys)? {
        return Err(Error::AssumptionViolated {
            details: "feedback regularization requires impulse controllability".into(),
        });
    }
    let n = sys.n_states();
    let m = sys.n_inputs();
    let tol = RankTolerance::default();
    let z = rank_decompose(&sys.e, tol)?.null_basis;
    let kernel_dim = z.cols();

    let accepts = |gain: &Matrix<T>| -> Result<bool> {
        let a_closed = sys.a.add(&sys.b.matmul(gain));
        let stacked = sys.e.hstack(&a_closed.matmul(&z));
        Ok(rank_decompose(&stacked, tol)?.rank == n)
    };

    let zero_gain = Matrix::zeros(m, n);
    if kernel_dim == 0 || accepts(&zero_gain)? {
        let system = DaeSystem::new(
            sys.e.clone(),
            sys.a.add(&sys.b.matmul(&zero_gain)),
            sys.b.clone(),
        )?;
        return Ok(FeedbackRegularization {
            gain: zero_gain,
            system,
            attempts: 0,
        });
    }

    let mut rng = Rng::new(seed);
    const MAX_DRAWS: usize = 10;
    for attempt in 1..=MAX_DRAWS {
        let m_draw = Matrix::from_fn(m, kernel_dim, |_, _| rng.gauss_scalar());
        let gain = m_draw.matmul(&z.transpose());
        if accepts(&gain)? {
            let closed = sys.a.add(&sys.b.matmul(&gain));
            let system = DaeSystem::new(sys.e.clone(), closed, sys.b.clone())?;
            if is_regular(&system)? {
                return Ok(FeedbackRegularization {
                    gain,
                    system,
                    attempts: attempt,
                });
            }
        }
    }
    Err(Error::FeedbackRegularizationFailed {
        attempts: MAX_DRAWS,
    })
}

// ── unimodular route ────────────────────────────────────────────────

#[derive(Debug, Clone)]
pub struct UnimodularRegularization<T> {
    /// Orthogonal column transform of the extended pencil;
    /// `(x; u) = t_hat * (z_states; v)`.
    pub t_hat: Matrix<T>,
    /// `U(s) = u0 + s u1`, unimodular.
    pub u0: Matrix<T>,
    pub u1: Matrix<T>,
    /// Regular index-at-most-one reduced system, `r x r`.
    pub e_r: Matrix<T>,
    pub a_r: Matrix<T>,
    /// Reduced input map, `r x m_red`.
    pub b_r: Matrix<T>,
    pub r: usize,
    /// Rows of the pencil that reduce to zero (one per overdetermined block).
    pub zero_rows: usize,
    /// Worst conditioning among the algebraic solves of the reduction.
    pub solve_condition: T,
    pub warnings: Vec<String>,
}

impl<T: Scalar> UnimodularRegularization<T> {
    pub fn m_red(&self) -> usize {
        self.b_r.cols()
    }
}

#[derive(Clone, Copy, PartialEq)]
enum RowTag {
    Active,
    Alg(usize),
    Zero,
}

#[derive(Clone, Copy, PartialEq)]
enum ColTag {
    Active,
    AlgVar(usize),
    State,
    Input,
}

/// Build an embedded full-size transform: `local` placed at the given
/// index positions, identity elsewhere.
fn embed_at<T: Scalar>(size: usize, positions: &[usize], local: &Matrix<T>) -> Matrix<T> {
    debug_assert_eq!(local.rows(), positions.len());
    debug_assert_eq!(local.cols(), positions.len());
    let mut full = Matrix::identity(size);
    for (i, &pi) in positions.iter().enumerate() {
        for (j, &pj) in positions.iter().enumerate() {
            full[(pi, pj)] = local[(i, j)];
        }
    }
    full
}

/// Greedy column-pivoted selection of `count` independent columns
/// (modified Gram-Schmidt with full pivoting), returned in ascending
/// order. Columns flagged in `prefer` win whenever their residual is not
/// negligibly small against the overall best; the algebraic pinning uses
/// this to absorb input-like (derivative-free) directions first, which
/// keeps the eventual state selection free of input content.
fn pivot_columns_preferring<T: Scalar>(
    m: &Matrix<T>,
    count: usize,
    prefer: Option<&[bool]>,
) -> Result<Vec<usize>> {
    use crate::numlin::matrix::dot;
    let cols = m.cols();
    let mut residual = m.clone();
    let mut available = vec![true; cols];
    let mut picked = Vec::with_capacity(count);
    for _ in 0..count {
        let mut best_all: Option<(usize, T)> = None;
        let mut best_pref: Option<(usize, T)> = None;
        for j in 0..cols {
            if !available[j] {
                continue;
            }
            let col = residual.col(j);
            let n2 = dot(&col, &col);
            if best_all.map_or(true, |(_, b)| n2 > b) {
                best_all = Some((j, n2));
            }
            if prefer.map_or(false, |p| p[j]) && best_pref.map_or(true, |(_, b)| n2 > b) {
                best_pref = Some((j, n2));
            }
        }
        let (_, all_norm) = best_all.ok_or_else(|| Error::StructuralInconsistency {
            details: "pivot selection ran out of columns".into(),
        })?;
        let j = match best_pref {
            Some((jp, np)) if np > all_norm * real::<T>(1e-16) => jp,
            _ => best_all.unwrap().0,
        };
        let norm = dot(&residual.col(j), &residual.col(j)).sqrt();
        if !(norm > T::zero()) {
            return Err(Error::StructuralInconsistency {
                details: "degenerate pivot in column selection".into(),
            });
        }
        let q: Vec<T> = residual.col(j).iter().map(|&x| x / norm).collect();
        for k in 0..cols {
            if k == j || !available[k] {
                continue;
            }
            let c = dot(&q, &residual.col(k));
            for i in 0..residual.rows() {
                residual[(i, k)] = residual[(i, k)] - c * q[i];
            }
        }
        available[j] = false;
        picked.push(j);
    }
    picked.sort_unstable();
    Ok(picked)
}

fn pivot_columns<T: Scalar>(m: &Matrix<T>, count: usize) -> Result<Vec<usize>> {
    pivot_columns_preferring(m, count, None)
}

/// Unimodular regularization of the extended pencil `s[E, 0] - [A, B]` by
/// iterated algebraic substitution: each level row-compresses `E`, pins the
/// variables fixed by the algebraic rows, and eliminates them from the
/// differential rows with a degree-one polynomial row operation. Rows of
/// overdetermined blocks collapse to zero rows; the surviving square part
/// is regular with index at most one and the leftover free columns become
/// inputs of the reduced system.
pub fn unimodular_regularize<T: Scalar>(sys: &DaeSystem<T>) -> Result<UnimodularRegularization<T>> {
    let l = sys.n_eqs();
    let q = sys.n_states() + sys.n_inputs();
    let (mut ecur, mut acur) = sys.extended_pencil();
    let mut t_acc = Matrix::identity(q);
    let mut u0 = Matrix::identity(l);
    let mut u1 = Matrix::zeros(l, l);
    let mut row_tags = vec![RowTag::Active; l];
    let mut col_tags = vec![ColTag::Active; q];
    let mut warnings = Vec::new();
    let mut solve_condition = T::one();
    // Rank decisions anchored at the extended pencil's scale.
    let tol = RankTolerance::anchored(ecur.norm_fro() + acur.norm_fro(), l.max(q));

    let active = |tags: &[RowTag]| -> Vec<usize> {
        tags.iter()
            .enumerate()
            .filter(|(_, t)| **t == RowTag::Active)
            .map(|(i, _)| i)
            .collect()
    };
    let active_cols = |tags: &[ColTag]| -> Vec<usize> {
        tags.iter()
            .enumerate()
            .filter(|(_, t)| **t == ColTag::Active)
            .map(|(i, _)| i)
            .collect()
    };

    let mut level = 0usize;
    loop {
        level += 1;
        let arows = active(&row_tags);
        let acols = active_cols(&col_tags);
        if arows.is_empty() {
            for &c in &acols {
                col_tags[c] = ColTag::Input;
            }
            break;
        }

        // Row-compress E on the active block: differential rows first.
        let esub = ecur.gather(&arows, &acols);
        let rd_e = rank_decompose(&esub, tol)?;
        if rd_e.marginal {
            warnings.push(format!("marginal E-rank decision at level {level}"));
        }
        let rho = rd_e.rank;
        let u_range = rd_e.range_basis;
        let u_comp = orth_complement(&u_range);
        let w_local = u_range.hstack(&u_comp);
        let w_full = embed_at(l, &arows, &w_local);
        let w_full_t = w_full.transpose();
        ecur = w_full_t.matmul(&ecur);
        acur = w_full_t.matmul(&acur);
        u0 = u0.matmul(&w_full);
        u1 = u1.matmul(&w_full);

        let diff_rows: Vec<usize> = arows[..rho].to_vec();
        let cand_rows: Vec<usize> = arows[rho..].to_vec();
        // Candidate rows have no E content left (below the rank threshold).
        for &r in &cand_rows {
            for c in 0..q {
                ecur[(r, c)] = T::zero();
            }
        }

        if cand_rows.is_empty() {
            finish_base(
                &mut ecur,
                &mut acur,
                &mut t_acc,
                &mut col_tags,
                &diff_rows,
                &acols,
                tol,
                &mut warnings,
            )?;
            break;
        }

        // Split candidate rows into genuinely algebraic rows and zero rows.
        let asub = acur.gather(&cand_rows, &acols);
        let rd_a = rank_decompose(&asub, tol)?;
        if rd_a.marginal {
            warnings.push(format!("marginal A-rank decision at level {level}"));
        }
        let r2 = rd_a.rank;
        let a_range = rd_a.range_basis;
        let a_comp = orth_complement(&a_range);
        let w2_local = a_range.hstack(&a_comp);
        let w2_full = embed_at(l, &cand_rows, &w2_local);
        let w2_full_t = w2_full.transpose();
        ecur = w2_full_t.matmul(&ecur);
        acur = w2_full_t.matmul(&acur);
        u0 = u0.matmul(&w2_full);
        u1 = u1.matmul(&w2_full);

        let alg_rows: Vec<usize> = cand_rows[..r2].to_vec();
        for &r in &cand_rows[r2..] {
            row_tags[r] = RowTag::Zero;
            for c in 0..q {
                acur[(r, c)] = T::zero();
            }
        }

        if r2 == 0 {
            finish_base(
                &mut ecur,
                &mut acur,
                &mut t_acc,
                &mut col_tags,
                &diff_rows,
                &acols,
                tol,
                &mut warnings,
            )?;
            break;
        }
        for &r in &alg_rows {
            row_tags[r] = RowTag::Alg(level);
        }

        // Pin coordinate columns by column pivoting on the algebraic rows.
        // The remaining active columns are untouched original coordinates,
        // so the eventual differential states never absorb input
        // directions and the initial-value selector stays input-free. The
        // algebraic rows keep their constant coupling to the rest.
        // Derivative-free columns are pinned first: for them the
        // elimination multiplier has no s-part, so pinning cannot spread
        // E-content onto other derivative-free columns.
        let asub2 = acur.gather(&alg_rows, &acols);
        let e_scale = ecur.max_abs() + T::one();
        let derivative_free: Vec<bool> = acols
            .iter()
            .map(|&c| {
                diff_rows
                    .iter()
                    .all(|&r| ecur[(r, c)].abs() <= real::<T>(1e-14) * e_scale)
            })
            .collect();
        let local_pivots = pivot_columns_preferring(&asub2, r2, Some(&derivative_free))?;
        let w_cols: Vec<usize> = local_pivots.iter().map(|&j| acols[j]).collect();
        for &c in &w_cols {
            col_tags[c] = ColTag::AlgVar(level);
        }

        // Degree-one row elimination: remove the pinned-column content of
        // the differential rows by adding `L(s) = (s E1w - A1w) Gamma^{-1}`
        // times the algebraic rows; U(s) absorbs the multiplier. The
        // algebraic rows also carry constant coupling on the remaining
        // active columns, which flows into the differential rows here.
        let gamma = acur.gather(&alg_rows, &w_cols);
        let gamma_lu = Lu::new(&gamma).map_err(|_| Error::StructuralInconsistency {
            details: format!("pinned block singular at level {level}"),
        })?;
        let gamma_inv = gamma_lu.inverse();
        {
            let dec = svd(&gamma);
            let smax = dec.s.first().copied().unwrap_or_else(T::zero);
            let smin = dec.s.last().copied().unwrap_or_else(T::zero);
            if smin > T::zero() {
                solve_condition = solve_condition.max(smax / smin);
            }
        }
        let e1w = ecur.gather(&diff_rows, &w_cols);
        let a1w = acur.gather(&diff_rows, &w_cols);
        let l1 = e1w.matmul(&gamma_inv);
        let l0 = a1w.matmul(&gamma_inv).neg();

        // Pencil update on the full row support of the algebraic rows:
        // E[diff] -= L1 A_alg, A[diff] += L0 A_alg; the pinned columns come
        // out exactly zero.
        let all_cols: Vec<usize> = (0..q).collect();
        let a_alg = acur.gather(&alg_rows, &all_cols);
        let e_update = l1.matmul(&a_alg);
        let a_update = l0.matmul(&a_alg);
        for (i, &ri) in diff_rows.iter().enumerate() {
            for c in 0..q {
                ecur[(ri, c)] = ecur[(ri, c)] - e_update[(i, c)];
                acur[(ri, c)] = acur[(ri, c)] + a_update[(i, c)];
            }
        }
        for &r in &diff_rows {
            for &c in &w_cols {
                ecur[(r, c)] = T::zero();
                acur[(r, c)] = T::zero();
            }
        }

        let mut l0_emb = Matrix::zeros(l, l);
        let mut l1_emb = Matrix::zeros(l, l);
        for (i, &ri) in diff_rows.iter().enumerate() {
            for (j, &rj) in alg_rows.iter().enumerate() {
                l0_emb[(ri, rj)] = l0[(i, j)];
                l1_emb[(ri, rj)] = l1[(i, j)];
            }
        }
        // U(s) <- U(s) (I - s L1 - L0); the s^2 term U1 L1 vanishes because
        // U1 has no columns on still-differential rows.
        let u0_l0 = u0.matmul(&l0_emb);
        let u0_l1 = u0.matmul(&l1_emb);
        let u1_l0 = u1.matmul(&l0_emb);
        debug_assert!(u1.matmul(&l1_emb).max_abs() == T::zero());
        u1 = u1.sub(&u1_l0).sub(&u0_l1);
        u0 = u0.sub(&u0_l0);
    }

    // Assemble the canonical ordering: zero rows on top, differential rows,
    // then algebraic rows by level; states (differential then pinned),
    // inputs last.
    let mut row_order: Vec<usize> = Vec::with_capacity(l);
    let zero_rows: Vec<usize> = (0..l).filter(|&i| row_tags[i] == RowTag::Zero).collect();
    let diff_rows_final: Vec<usize> = (0..l).filter(|&i| row_tags[i] == RowTag::Active).collect();
    let mut alg_rows_final: Vec<(usize, usize)> = (0..l)
        .filter_map(|i| match row_tags[i] {
            RowTag::Alg(lv) => Some((lv, i)),
            _ => None,
        })
        .collect();
    alg_rows_final.sort_unstable();
    row_order.extend(&zero_rows);
    row_order.extend(&diff_rows_final);
    row_order.extend(alg_rows_final.iter().map(|&(_, i)| i));

    let state_cols_diff: Vec<usize> = (0..q).filter(|&i| col_tags[i] == ColTag::State).collect();
    let mut state_cols_alg: Vec<(usize, usize)> = (0..q)
        .filter_map(|i| match col_tags[i] {
            ColTag::AlgVar(lv) => Some((lv, i)),
            _ => None,
        })
        .collect();
    state_cols_alg.sort_unstable();
    let input_cols: Vec<usize> = (0..q).filter(|&i| col_tags[i] == ColTag::Input).collect();
    let mut col_order: Vec<usize> = Vec::with_capacity(q);
    col_order.extend(&state_cols_diff);
    col_order.extend(state_cols_alg.iter().map(|&(_, i)| i));
    col_order.extend(&input_cols);

    let n_states_red = state_cols_diff.len() + state_cols_alg.len();
    let r_dim = diff_rows_final.len() + alg_rows_final.len();
    if n_states_red != r_dim {
        return Err(Error::StructuralInconsistency {
            details: format!(
                "reduced system is not square: {r_dim} equations, {n_states_red} states"
            ),
        });
    }
    let z_count = zero_rows.len();

    let sys_rows: Vec<usize> = row_order[z_count..].to_vec();
    let state_sel: Vec<usize> = col_order[..n_states_red].to_vec();
    let input_sel: Vec<usize> = col_order[n_states_red..].to_vec();
    let e_r = ecur.gather(&sys_rows, &state_sel);
    let a_r = acur.gather(&sys_rows, &state_sel);
    let b_r = acur.gather(&sys_rows, &input_sel);

    let all_rows: Vec<usize> = (0..q).collect();
    let t_hat = t_acc.gather(&all_rows, &col_order);
    let u_rows: Vec<usize> = (0..l).collect();
    let u0 = u0.gather(&u_rows, &row_order);
    let u1 = u1.gather(&u_rows, &row_order);

    let reg = UnimodularRegularization {
        t_hat,
        u0,
        u1,
        e_r,
        a_r,
        b_r,
        r: r_dim,
        zero_rows: z_count,
        solve_condition,
        warnings,
    };
    verify_reduction(sys, &reg)?;
    Ok(reg)
}

/// Base case of the reduction: the remaining differential rows have `E` of
/// full row rank. States are pivoted independent `E`-columns (original
/// coordinate directions; input columns of the extended pencil carry no
/// `E`-content and are never picked), inputs span the kernel of `E` on the
/// active columns.
fn finish_base<T: Scalar>(
    ecur: &mut Matrix<T>,
    acur: &mut Matrix<T>,
    t_acc: &mut Matrix<T>,
    col_tags: &mut [ColTag],
    diff_rows: &[usize],
    acols: &[usize],
    tol: RankTolerance<T>,
    warnings: &mut Vec<String>,
) -> Result<()> {
    let q = t_acc.rows();
    let esub = ecur.gather(diff_rows, acols);
    let rd = rank_decompose(&esub, tol)?;
    if rd.rank != diff_rows.len() {
        return Err(Error::StructuralInconsistency {
            details: format!(
                "differential core lost row rank: {} rows, rank {}",
                diff_rows.len(),
                rd.rank
            ),
        });
    }
    if rd.marginal {
        warnings.push("marginal rank decision in the differential core".into());
    }
    let rho = rd.rank;
    let na = acols.len();
    let pivots = pivot_columns(&esub, rho)?;
    let kernel = rd.null_basis;
    // Local column transform: unit pivot columns, then the kernel basis.
    // Invertible because the pivot columns complement the kernel.
    let mut v_local = Matrix::zeros(na, na);
    for (t, &j) in pivots.iter().enumerate() {
        v_local[(j, t)] = T::one();
    }
    for jj in 0..na - rho {
        for i in 0..na {
            v_local[(i, rho + jj)] = kernel[(i, jj)];
        }
    }
    let v_full = embed_at(q, acols, &v_local);
    *ecur = ecur.matmul(&v_full);
    *acur = acur.matmul(&v_full);
    *t_acc = t_acc.matmul(&v_full);
    for (idx, &c) in acols.iter().enumerate() {
        col_tags[c] = if idx < rho {
            ColTag::State
        } else {
            ColTag::Input
        };
    }
    // E on the input columns is kernel residue.
    for &r in diff_rows {
        for &c in &acols[rho..] {
            ecur[(r, c)] = T::zero();
        }
    }
    Ok(())
}

/// Check the factorization identity coefficient-wise, unimodularity of
/// `U(s)`, and regularity/index of the reduced system.
fn verify_reduction<T: Scalar>(
    sys: &DaeSystem<T>,
    reg: &UnimodularRegularization<T>,
) -> Result<()> {
    let (ep, ap) = sys.extended_pencil();
    let l = sys.n_eqs();
    let scale = (ep.norm_fro() + ap.norm_fro() + T::one())
        * (T::one() + reg.u0.norm_fro() + reg.u1.norm_fro());
    let tol = real::<T>(IDENTITY_TOL) * scale;

    // Reduced pencil stacked under the zero rows: [0; sE_r - A_r, -B_r].
    let r = reg.r;
    let m_red = reg.m_red();
    let mut e_red = Matrix::zeros(l, r + m_red);
    e_red.set_block(reg.zero_rows, 0, &reg.e_r);
    let mut a_red = Matrix::zeros(l, r + m_red);
    a_red.set_block(reg.zero_rows, 0, &reg.a_r);
    a_red.set_block(reg.zero_rows, r, &reg.b_r);

    // s^2: U1 * E_red = 0.
    let s2 = reg.u1.matmul(&e_red).max_abs();
    // s^1: E T = U1 * (-A_red) + U0 * E_red.
    let s1 = ep
        .matmul(&reg.t_hat)
        .sub(&reg.u0.matmul(&e_red).sub(&reg.u1.matmul(&a_red)))
        .max_abs();
    // s^0: -A T = -U0 * A_red.
    let s0 = ap.matmul(&reg.t_hat).sub(&reg.u0.matmul(&a_red)).max_abs();
    if s2 > tol || s1 > tol || s0 > tol {
        return Err(Error::StructuralInconsistency {
            details: format!(
                "reduction identity violated (s^0 {s0:e}, s^1 {s1:e}, s^2 {s2:e}, tol {tol:e})"
            ),
        });
    }

    if !verify_unimodular(&reg.u0, &reg.u1)? {
        return Err(Error::StructuralInconsistency {
            details: "accumulated U(s) is not unimodular".into(),
        });
    }

    let reduced_sys = DaeSystem::new(reg.e_r.clone(), reg.a_r.clone(), reg.b_r.clone())?;
    if !is_regular(&reduced_sys)? {
        return Err(Error::StructuralInconsistency {
            details: "reduced pencil is not regular".into(),
        });
    }
    let idx = crate::pencil::index(&reg.e_r, &reg.a_r)?;
    if idx > 1 {
        return Err(Error::StructuralInconsistency {
            details: format!("reduced pencil has index {idx}"),
        });
    }
    Ok(())
}

/// Unimodularity test for `U(s) = s U1 + U0` by determinant sampling: a
/// degree-`l` polynomial that takes the same nonzero value at `l + 1`
/// points is a nonzero constant.
pub fn verify_unimodular<T: Scalar>(u0: &Matrix<T>, u1: &Matrix<T>) -> Result<bool> {
    if !u0.is_square() || u0.rows() != u1.rows() || u0.cols() != u1.cols() {
        return Err(Error::DimensionMismatch {
            op: "verify_unimodular",
            details: format!(
                "U0 is {}x{}, U1 is {}x{}",
                u0.rows(),
                u0.cols(),
                u1.rows(),
                u1.cols()
            ),
        });
    }
    let l = u0.rows();
    if l == 0 {
        return Ok(true);
    }
    let mut dets = Vec::with_capacity(l + 1);
    for k in 0..=l {
        let s = real::<T>(k as f64 + 0.5);
        let m = u1.scale(s).add(u0);
        let det = match Lu::new(&m) {
            Ok(lu) => lu.det(),
            Err(_) => T::zero(),
        };
        if det == T::zero() {
            return Ok(false);
        }
        dets.push(det);
    }
    let max_abs = dets.iter().map(|d| d.abs()).fold(T::zero(), T::max);
    let spread = dets
        .iter()
        .map(|&d| (d - dets[0]).abs())
        .fold(T::zero(), T::max);
    Ok(spread <= real::<T>(1e-8) * max_abs)
}

// ── index-1 to explicit ODE ─────────────────────────────────────────

#[derive(Debug, Clone)]
pub struct Index1Form<T> {
    /// `s_r * E * t_r = [I 0; 0 0]`.
    pub s_r: Matrix<T>,
    pub t_r: Matrix<T>,
    pub a11: Matrix<T>,
    pub a12: Matrix<T>,
    pub a21: Matrix<T>,
    /// Invertible for index-at-most-one systems.
    pub a22: Matrix<T>,
    pub b1: Matrix<T>,
    pub b2: Matrix<T>,
    pub n_hat: usize,
    pub a22_condition: T,
}

/// SVD-based transformation of a regular index-at-most-one triple into the
/// split form with `E` brought to `[I 0; 0 0]`.
pub fn index1_to_ode<T: Scalar>(
    e: &Matrix<T>,
    a: &Matrix<T>,
    b: &Matrix<T>,
) -> Result<Index1Form<T>> {
    if !e.is_square() || a.rows() != e.rows() || a.cols() != e.cols() {
        return Err(Error::DimensionMismatch {
            op: "index1_to_ode",
            details: "E and A must be square and of equal size".into(),
        });
    }
    let n = e.rows();
    let tol = RankTolerance::default();
    let dec = svd(e);
    let sigma_max = dec.s.first().copied().unwrap_or_else(T::zero);
    let threshold = tol.threshold(sigma_max, n, n);
    let n_hat = dec.rank(threshold);

    // S_r = U^T (completed to square), T_r = V diag(1/sigma, .., 1, ..).
    let u_range = dec.range_basis(n_hat);
    let u_full = u_range.hstack(&orth_complement(&u_range));
    let s_r = u_full.transpose();
    let mut scaling = vec![T::one(); n];
    for (i, slot) in scaling.iter_mut().enumerate().take(n_hat) {
        *slot = T::one() / dec.s[i];
    }
    let t_r = dec.v.matmul(&Matrix::diag(&scaling));

    let a_split = s_r.matmul(a).matmul(&t_r);
    let b_split = s_r.matmul(b);
    let a11 = a_split.submatrix(0, 0, n_hat, n_hat);
    let a12 = a_split.submatrix(0, n_hat, n_hat, n - n_hat);
    let a21 = a_split.submatrix(n_hat, 0, n - n_hat, n_hat);
    let a22 = a_split.submatrix(n_hat, n_hat, n - n_hat, n - n_hat);
    let b1 = b_split.submatrix(0, 0, n_hat, b.cols());
    let b2 = b_split.submatrix(n_hat, 0, n - n_hat, b.cols());

    let a22_condition = if n - n_hat == 0 {
        T::one()
    } else {
        let dec22 = svd(&a22);
        let smax = dec22.s.first().copied().unwrap_or_else(T::zero);
        let smin = dec22.s.last().copied().unwrap_or_else(T::zero);
        let thr22 = tol.threshold(smax, n - n_hat, n - n_hat);
        if smin <= thr22 {
            return Err(Error::StructuralInconsistency {
                details: format!(
                    "algebraic block is numerically singular (rank gap {} of {}), \
                     contradicting index at most one",
                    (n - n_hat) - dec22.rank(thr22),
                    n - n_hat
                ),
            });
        }
        smax / smin
    };

    Ok(Index1Form {
        s_r,
        t_r,
        a11,
        a12,
        a21,
        a22,
        b1,
        b2,
        n_hat,
        a22_condition,
    })
}

// ── reduced ODE assembly ────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RouteKind {
    Feedback,
    Unimodular,
}

impl core::fmt::Display for RouteKind {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            RouteKind::Feedback => write!(f, "feedback"),
            RouteKind::Unimodular => write!(f, "unimodular"),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Route<T> {
    Feedback(FeedbackRegularization<T>),
    Unimodular(UnimodularRegularization<T>),
}

impl<T: Scalar> Route<T> {
    pub fn kind(&self) -> RouteKind {
        match self {
            Route::Feedback(_) => RouteKind::Feedback,
            Route::Unimodular(_) => RouteKind::Unimodular,
        }
    }
}

/// Pick the regularization route: feedback for regular impulse controllable
/// systems, the unimodular reduction otherwise (also the fallback when the
/// random feedback draws fail).
pub fn select_route<T: Scalar>(sys: &DaeSystem<T>, seed: u64) -> Result<Route<T>> {
    if is_regular(sys)? && impulse_controllable(sys)? {
        match feedback_regularize(sys, seed) {
            Ok(fr) => return Ok(Route::Feedback(fr)),
            Err(Error::FeedbackRegularizationFailed { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    unimodular_regularize(sys).map(Route::Unimodular)
}

/// The equivalent explicit ODE optimal control problem.
#[derive(Debug, Clone)]
pub struct ReducedOde<T> {
    pub a_hat: Matrix<T>,
    pub b_hat: Matrix<T>,
    /// Lift `X`: `(x; u) = X (z1; v)` pointwise, `(n+m) x (n_hat + m_red)`.
    pub lift: Matrix<T>,
    /// Accumulated `(n+m)` transform; `(x; u) = t_hat_total (z; v)`.
    pub t_hat_total: Matrix<T>,
    pub t_hat_total_inv: Matrix<T>,
    /// Transformed cost `X^T S X` and its blocks.
    pub s_hat: Matrix<T>,
    pub q_hat: Matrix<T>,
    pub h_hat: Matrix<T>,
    pub r_hat: Matrix<T>,
    /// `n_hat x (n+m)` selector realizing `z1(0) = [I 0] T^{-1} (x0; 0)`.
    pub init_selector: Matrix<T>,
    /// Constraint rows `[F G] X`, enforced on the reduced variables.
    pub constraint_rows: Matrix<T>,
    pub n_hat: usize,
    pub m_red: usize,
    pub n_states: usize,
    pub m_inputs: usize,
    pub route: RouteKind,
}

impl<T: Scalar> ReducedOde<T> {
    /// Reduced initial state from a (weakly consistent) original state.
    pub fn initial_state(&self, x0: &[T]) -> Vec<T> {
        assert_eq!(x0.len(), self.n_states, "initial state dimension");
        let mut padded = x0.to_vec();
        padded.extend(core::iter::repeat(T::zero()).take(self.m_inputs));
        self.init_selector.matvec(&padded)
    }

    /// Lift one reduced point to `(x, u)`.
    pub fn lift_point(&self, z1: &[T], v: &[T]) -> (Vec<T>, Vec<T>) {
        assert_eq!(z1.len(), self.n_hat);
        assert_eq!(v.len(), self.m_red);
        let mut zv = z1.to_vec();
        zv.extend_from_slice(v);
        let xu = self.lift.matvec(&zv);
        let x = xu[..self.n_states].to_vec();
        let u = xu[self.n_states..].to_vec();
        (x, u)
    }

    /// Stage cost `(z1; v)^T S_hat (z1; v)`.
    pub fn stage_cost(&self, z1: &[T], v: &[T]) -> T {
        let mut zv = z1.to_vec();
        zv.extend_from_slice(v);
        crate::numlin::dot(&zv, &self.s_hat.matvec(&zv))
    }
}

/// Assemble the reduced ODE-OCP from a completed regularization.
pub fn build_reduced_ode<T: Scalar>(
    sys: &DaeSystem<T>,
    constraints: &ConstraintSet<T>,
    s_cost: &Matrix<T>,
    route: &Route<T>,
) -> Result<ReducedOde<T>> {
    let n = sys.n_states();
    let m = sys.n_inputs();
    if s_cost.rows() != n + m || s_cost.cols() != n + m {
        return Err(Error::DimensionMismatch {
            op: "build_reduced_ode",
            details: format!("cost matrix must be {}x{}", n + m, n + m),
        });
    }
    if constraints.f.cols() != n || constraints.g.cols() != m {
        return Err(Error::DimensionMismatch {
            op: "build_reduced_ode",
            details: "constraint column counts must match the system".into(),
        });
    }
    let s_sym = s_cost.symmetrize();

    let (form, t_hat_total, t_hat_total_inv, m_red) = match route {
        Route::Feedback(fr) => {
            let form = index1_to_ode(&fr.system.e, &fr.system.a, &fr.system.b)?;
            // T = [T_r 0; K T_r I], inverse [T_r^{-1} 0; -K I].
            let kt = fr.gain.matmul(&form.t_r);
            let top = form.t_r.hstack(&Matrix::zeros(n, m));
            let bottom = kt.hstack(&Matrix::identity(m));
            let t_hat = top.vstack(&bottom);
            let t_r_inv = crate::numlin::lu::inverse(&form.t_r)?;
            let inv_top = t_r_inv.hstack(&Matrix::zeros(n, m));
            let inv_bottom = fr.gain.neg().hstack(&Matrix::identity(m));
            let t_hat_inv = inv_top.vstack(&inv_bottom);
            (form, t_hat, t_hat_inv, m)
        }
        Route::Unimodular(ur) => {
            let form = index1_to_ode(&ur.e_r, &ur.a_r, &ur.b_r)?;
            let m_red = ur.m_red();
            let blk = Matrix::block_diag(&[&form.t_r, &Matrix::identity(m_red)]);
            let t_hat = ur.t_hat.matmul(&blk);
            let blk_inv = Matrix::block_diag(&[
                &crate::numlin::lu::inverse(&form.t_r)?,
                &Matrix::identity(m_red),
            ]);
            // t_hat of the unimodular route is orthogonal.
            let t_hat_inv = blk_inv.matmul(&ur.t_hat.transpose());
            (form, t_hat, t_hat_inv, m_red)
        }
    };

    let n_hat = form.n_hat;
    let a22_lu = if form.a22.rows() > 0 {
        Some(Lu::new(&form.a22)?)
    } else {
        None
    };
    let (neg_a22inv_a21, neg_a22inv_b2) = match &a22_lu {
        Some(lu) => (lu.solve_mat(&form.a21).neg(), lu.solve_mat(&form.b2).neg()),
        None => (Matrix::zeros(0, n_hat), Matrix::zeros(0, m_red)),
    };

    let a_hat = form.a11.add(&form.a12.matmul(&neg_a22inv_a21));
    let b_hat = form.b1.add(&form.a12.matmul(&neg_a22inv_b2));

    // Inner lift [I 0; -A22^{-1}A21 -A22^{-1}B2; 0 I].
    let r_states = n_hat + form.a22.rows();
    let mut inner = Matrix::zeros(r_states + m_red, n_hat + m_red);
    inner.set_block(0, 0, &Matrix::identity(n_hat));
    inner.set_block(n_hat, 0, &neg_a22inv_a21);
    inner.set_block(n_hat, n_hat, &neg_a22inv_b2);
    inner.set_block(r_states, n_hat, &Matrix::identity(m_red));

    let lift = t_hat_total.matmul(&inner);
    let s_hat = lift.transpose().matmul(&s_sym).matmul(&lift);
    let q_hat = s_hat.submatrix(0, 0, n_hat, n_hat);
    let h_hat = s_hat.submatrix(0, n_hat, n_hat, m_red);
    let r_hat = s_hat.submatrix(n_hat, n_hat, m_red, m_red);

    let selector_rows: Vec<usize> = (0..n_hat).collect();
    let all_cols: Vec<usize> = (0..n + m).collect();
    let init_selector = t_hat_total_inv.gather(&selector_rows, &all_cols);

    let constraint_rows = constraints.stacked().matmul(&lift);

    let reduced = ReducedOde {
        a_hat,
        b_hat,
        lift,
        t_hat_total,
        t_hat_total_inv,
        s_hat,
        q_hat,
        h_hat,
        r_hat,
        init_selector,
        constraint_rows,
        n_hat,
        m_red,
        n_states: n,
        m_inputs: m,
        route: route.kind(),
    };

    // The replacement of the initial-value set by a point requires the
    // selector to ignore the input components. This is automatic for the
    // feedback route and guaranteed for overdetermined-free extended
    // pencils; verify it numerically and reject structures where it fails.
    if m > 0 {
        let input_part = Matrix::from_fn(n_hat, m, |i, j| reduced.init_selector[(i, n + j)]);
        let residual = input_part.max_abs();
        let scale = T::one() + reduced.init_selector.max_abs();
        if residual > real::<T>(1e-9) * scale {
            if let Route::Unimodular(ur) = route {
                if ur.zero_rows > 0 && !is_regular(sys)? {
                    let (ep, ap) = sys.extended_pencil();
                    let ks = kronecker_structure(&ep, &ap)?;
                    return Err(Error::UnsupportedStructure {
                        row_sizes: ks.overdetermined_row_sizes,
                        residual: residual.to_f64().unwrap_or(f64::NAN),
                    });
                }
            }
            return Err(Error::StructuralInconsistency {
                details: format!(
                    "initial-state selector unexpectedly depends on the input (residual {residual:e})"
                ),
            });
        }
    }

    Ok(reduced)
}

/// Full regularization convenience: route selection plus reduced-ODE
/// assembly.
pub fn reduce<T: Scalar>(
    sys: &DaeSystem<T>,
    constraints: &ConstraintSet<T>,
    s_cost: &Matrix<T>,
    seed: u64,
) -> Result<(Route<T>, ReducedOde<T>)> {
    let route = select_route(sys, seed)?;
    let reduced = build_reduced_ode(sys, constraints, s_cost, &route)?;
    Ok((route, reduced))
}

/// Lift reduced trajectories pointwise: `(x; u)(t_k) = X (z1; v)(t_k)`.
pub fn lift_trajectory<T: Scalar>(
    reduced: &ReducedOde<T>,
    z1_path: &[Vec<T>],
    v_path: &[Vec<T>],
) -> Result<(Vec<Vec<T>>, Vec<Vec<T>>)> {
    if z1_path.len() != v_path.len() {
        return Err(Error::DimensionMismatch {
            op: "lift_trajectory",
            details: format!(
                "{} state samples vs {} input samples",
                z1_path.len(),
                v_path.len()
            ),
        });
    }
    let mut xs = Vec::with_capacity(z1_path.len());
    let mut us = Vec::with_capacity(z1_path.len());
    for (z1, v) in z1_path.iter().zip(v_path) {
        if z1.len() != reduced.n_hat || v.len() != reduced.m_red {
            return Err(Error::DimensionMismatch {
                op: "lift_trajectory",
                details: "sample dimension mismatch".into(),
            });
        }
        let (x, u) = reduced.lift_point(z1, v);
        xs.push(x);
        us.push(u);
    }
    Ok((xs, us))
}
