//! Structural analysis of matrix pencils `sE - A` and DAE systems
//! `d/dt(E x) = A x + B u`: regularity, quasi-Kronecker block structure,
//! index, impulse controllability, weak consistency of initial values.

use crate::error::Error;
use crate::numlin::matrix::{norm2, Matrix};
use crate::numlin::svd::{orth_complement, rank_decompose, RankTolerance};
use crate::regularize::ReducedOde;
use crate::scalar::{real, Scalar};
use crate::Result;

/// The triple `[E, A, B]` of `d/dt(E x) = A x + B u`.
///
/// `E` and `A` are `l x n`; `B` is `l x m` with `m = 0` allowed (systems
/// without inputs are first-class).
#[derive(Debug, Clone)]
pub struct DaeSystem<T> {
    pub e: Matrix<T>,
    pub a: Matrix<T>,
    pub b: Matrix<T>,
}

impl<T: Scalar> DaeSystem<T> {
    pub fn new(e: Matrix<T>, a: Matrix<T>, b: Matrix<T>) -> Result<Self> {
        if e.rows() != a.rows() || e.cols() != a.cols() {
            return Err(Error::DimensionMismatch {
                op: "DaeSystem",
                details: format!(
                    "E is {}x{} but A is {}x{}",
                    e.rows(),
                    e.cols(),
                    a.rows(),
                    a.cols()
                ),
            });
        }
        if b.rows() != e.rows() {
            return Err(Error::DimensionMismatch {
                op: "DaeSystem",
                details: format!("B has {} rows, expected {}", b.rows(), e.rows()),
            });
        }
        for (m, name) in [(&e, "E"), (&a, "A"), (&b, "B")] {
            if !m.all_finite() {
                return Err(Error::NonFinite { op: "DaeSystem" });
            }
            let _ = name;
        }
        Ok(DaeSystem { e, a, b })
    }

    /// Number of equations `l`.
    pub fn n_eqs(&self) -> usize {
        self.e.rows()
    }

    /// Number of state variables `n`.
    pub fn n_states(&self) -> usize {
        self.e.cols()
    }

    /// Number of inputs `m`.
    pub fn n_inputs(&self) -> usize {
        self.b.cols()
    }

    /// The extended pencil `s [E, 0] - [A, B]` as an `(E, A)` pair.
    pub fn extended_pencil(&self) -> (Matrix<T>, Matrix<T>) {
        let zero = Matrix::zeros(self.n_eqs(), self.n_inputs());
        (self.e.hstack(&zero), self.a.hstack(&self.b))
    }
}

/// Mixed state and control constraints `[F G] (x; u) <= 1` componentwise.
#[derive(Debug, Clone)]
pub struct ConstraintSet<T> {
    pub f: Matrix<T>,
    pub g: Matrix<T>,
}

impl<T: Scalar> ConstraintSet<T> {
    pub fn new(f: Matrix<T>, g: Matrix<T>) -> Result<Self> {
        if f.rows() != g.rows() {
            return Err(Error::DimensionMismatch {
                op: "ConstraintSet",
                details: format!("F has {} rows, G has {}", f.rows(), g.rows()),
            });
        }
        Ok(ConstraintSet { f, g })
    }

    /// Constraint-free set with matching column counts.
    pub fn empty(n: usize, m: usize) -> Self {
        ConstraintSet {
            f: Matrix::zeros(0, n),
            g: Matrix::zeros(0, m),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.f.rows()
    }

    /// Stacked `[F G]`.
    pub fn stacked(&self) -> Matrix<T> {
        self.f.hstack(&self.g)
    }
}

/// Block data of a pencil's quasi-Kronecker form.
///
/// The transforms realize the orthogonal staircase splitting, not a fully
/// decoupled canonical form; only the block sizes are contracted.
/// `nilpotent_block` is reported in canonical shift coordinates built from
/// the computed chain lengths.
#[derive(Debug, Clone)]
pub struct KroneckerStructure<T> {
    /// Column counts `n_i >= 1` of the underdetermined blocks, ascending.
    pub underdetermined_col_sizes: Vec<usize>,
    /// Size of the finite (Jordan) part.
    pub n_finite: usize,
    /// The finite part `J` (`E`-normalized: eigenvalues of `J` are the
    /// finite eigenvalues of the pencil).
    pub finite_block: Matrix<T>,
    /// Size of the nilpotent part.
    pub n_nilpotent: usize,
    /// Nilpotent `E`-block, canonical shift form.
    pub nilpotent_block: Matrix<T>,
    /// Row counts (`>= 1`) of the overdetermined blocks, ascending.
    pub overdetermined_row_sizes: Vec<usize>,
    /// Nilpotency index of the nilpotent part (0 when that part is empty).
    pub nilpotency_index: usize,
    /// Orthogonal row transform of the staircase.
    pub left_transform: Matrix<T>,
    /// Orthogonal column transform of the staircase.
    pub right_transform: Matrix<T>,
    /// Condition estimate of the accumulated transforms (1 when all steps
    /// stayed orthogonal).
    pub transform_condition: T,
    /// Marginal rank decisions encountered along the way.
    pub warnings: Vec<String>,
}

impl<T: Scalar> KroneckerStructure<T> {
    /// Row count of the underdetermined part.
    pub fn l_under(&self) -> usize {
        self.underdetermined_col_sizes.iter().map(|&n| n - 1).sum()
    }

    /// Column count of the underdetermined part.
    pub fn n_under(&self) -> usize {
        self.underdetermined_col_sizes.iter().sum()
    }

    /// Row count of the overdetermined part.
    pub fn l_over(&self) -> usize {
        self.overdetermined_row_sizes.iter().sum()
    }

    /// Column count of the overdetermined part.
    pub fn n_over(&self) -> usize {
        self.overdetermined_row_sizes.iter().map(|&r| r - 1).sum()
    }

    /// True when the block data describes a regular pencil of the given shape.
    pub fn describes_regular(&self, rows: usize, cols: usize) -> bool {
        rows == cols
            && self.underdetermined_col_sizes.is_empty()
            && self.overdetermined_row_sizes.is_empty()
    }
}

// ── staircase machinery ─────────────────────────────────────────────

struct StaircasePass<T> {
    /// Per stage: (kernel dimension of E, rank of A on that kernel).
    stages: Vec<(usize, usize)>,
    /// Deflated remainder (E has full column rank).
    e_rem: Matrix<T>,
    a_rem: Matrix<T>,
    /// Accumulated orthogonal transforms: the staircase form of the input
    /// pencil is `left^T (sE - A) right`, remainder in the top-left corner.
    left: Matrix<T>,
    right: Matrix<T>,
    warnings: Vec<String>,
}

/// One-sided staircase: repeatedly compress the kernel of `E` and the range
/// of `A` on it. Consumes the underdetermined chains and the nilpotent
/// chains of the pencil; the remainder has `E` of full column rank.
fn staircase_pass<T: Scalar>(
    e0: &Matrix<T>,
    a0: &Matrix<T>,
    tol: RankTolerance<T>,
) -> Result<StaircasePass<T>> {
    let l_full = e0.rows();
    let q_full = e0.cols();
    // Anchor rank decisions at the scale of the whole pencil: deflated
    // subblocks consisting of roundoff must rank zero.
    let anchor = e0.norm_fro() + a0.norm_fro();
    let tol = RankTolerance {
        rtol: tol.rtol,
        atol: tol
            .atol
            .max(tol.rtol * anchor * real::<T>(l_full.max(q_full).max(1) as f64)),
    };
    let mut ecur = e0.clone();
    let mut acur = a0.clone();
    let mut left = Matrix::identity(l_full);
    let mut right = Matrix::identity(q_full);
    let mut stages = Vec::new();
    let mut warnings = Vec::new();

    loop {
        let la = ecur.rows();
        let qa = ecur.cols();
        if qa == 0 {
            break;
        }
        let rd_e = rank_decompose(&ecur, tol)?;
        let kk = qa - rd_e.rank;
        if kk == 0 {
            break;
        }
        if rd_e.marginal {
            warnings.push(format!(
                "marginal rank decision on E stage {} (threshold {:e})",
                stages.len() + 1,
                rd_e.threshold
            ));
        }
        // Column split: row space first, kernel last.
        let z_kernel = rd_e.null_basis;
        let z_rows = orth_complement(&z_kernel);
        let v_active = z_rows.hstack(&z_kernel);

        let w = acur.matmul(&z_kernel);
        let rd_w = rank_decompose(&w, tol)?;
        let r = rd_w.rank;
        if rd_w.marginal {
            warnings.push(format!(
                "marginal rank decision on A-kernel stage {} (threshold {:e})",
                stages.len() + 1,
                rd_w.threshold
            ));
        }
        let u_range = rd_w.range_basis;
        let u_comp = orth_complement(&u_range);
        let u_active = u_comp.hstack(&u_range);

        stages.push((kk, r));

        // Accumulate embedded transforms.
        let mut right_step = Matrix::identity(q_full);
        right_step.set_block(0, 0, &v_active);
        right = right.matmul(&right_step);
        let mut left_step = Matrix::identity(l_full);
        left_step.set_block(0, 0, &u_active);
        left = left.matmul(&left_step);

        // Deflate: keep complement rows and row-space columns.
        let e_next = u_comp.transpose().matmul(&ecur).matmul(&z_rows);
        let a_next = u_comp.transpose().matmul(&acur).matmul(&z_rows);
        ecur = e_next;
        acur = a_next;
        debug_assert_eq!(ecur.rows(), la - r);
        debug_assert_eq!(ecur.cols(), qa - kk);
    }

    Ok(StaircasePass {
        stages,
        e_rem: ecur,
        a_rem: acur,
        left,
        right,
        warnings,
    })
}

/// Interpret staircase stage counts: sizes of the K-type chains (as column
/// counts) and the lengths of the nilpotent chains.
fn interpret_stage_counts(
    stages: &[(usize, usize)],
    warnings: &mut Vec<String>,
) -> (Vec<usize>, Vec<usize>) {
    let depth = stages.len();
    // kappa[j] = number of chains with column size j+1 (0-based j).
    let kappa: Vec<isize> = stages
        .iter()
        .map(|&(k, r)| k as isize - r as isize)
        .collect();
    // chains_geq[j] = number of K chains with column size > j (0-based).
    let mut chains_geq = vec![0isize; depth + 1];
    for j in (0..depth).rev() {
        chains_geq[j] = chains_geq[j + 1] + kappa[j];
    }
    let mut col_sizes = Vec::new();
    for (j, &count) in kappa.iter().enumerate() {
        if count < 0 {
            warnings.push(format!("negative chain count at stage {}", j + 1));
            continue;
        }
        for _ in 0..count {
            col_sizes.push(j + 1);
        }
    }
    // omega[j] = number of nilpotent chains with length >= j+1.
    let mut omega = vec![0usize; depth];
    for j in 0..depth {
        let val = stages[j].1 as isize - chains_geq[j + 1];
        if val < 0 {
            warnings.push(format!("negative nilpotent count at stage {}", j + 1));
            omega[j] = 0;
        } else {
            omega[j] = val as usize;
        }
    }
    let mut chain_lengths = Vec::new();
    for j in 0..depth {
        let next = if j + 1 < depth { omega[j + 1] } else { 0 };
        if omega[j] < next {
            warnings.push(format!(
                "non-monotone nilpotent chain profile at stage {}",
                j + 1
            ));
            continue;
        }
        for _ in 0..(omega[j] - next) {
            chain_lengths.push(j + 1);
        }
    }
    col_sizes.sort_unstable();
    chain_lengths.sort_unstable();
    (col_sizes, chain_lengths)
}

fn canonical_shift<T: Scalar>(chain_lengths: &[usize]) -> Matrix<T> {
    let n: usize = chain_lengths.iter().sum();
    let mut m = Matrix::zeros(n, n);
    let mut offset = 0;
    for &len in chain_lengths {
        for i in 0..len.saturating_sub(1) {
            m[(offset + i, offset + i + 1)] = T::one();
        }
        offset += len;
    }
    m
}

/// Quasi-Kronecker block structure of the pencil `sE - A`, computed by a
/// two-sided orthogonal staircase reduction: one pass on `(E, A)` for the
/// underdetermined and nilpotent parts, a transposed pass on the remainder
/// for the overdetermined part, and a final solve for the finite part.
pub fn kronecker_structure<T: Scalar>(
    e: &Matrix<T>,
    a: &Matrix<T>,
) -> Result<KroneckerStructure<T>> {
    kronecker_structure_with(e, a, RankTolerance::default())
}

pub fn kronecker_structure_with<T: Scalar>(
    e: &Matrix<T>,
    a: &Matrix<T>,
    tol: RankTolerance<T>,
) -> Result<KroneckerStructure<T>> {
    if e.rows() != a.rows() || e.cols() != a.cols() {
        return Err(Error::DimensionMismatch {
            op: "kronecker_structure",
            details: format!(
                "E is {}x{}, A is {}x{}",
                e.rows(),
                e.cols(),
                a.rows(),
                a.cols()
            ),
        });
    }
    e.require_finite("kronecker_structure")?;
    a.require_finite("kronecker_structure")?;

    let mut warnings = Vec::new();

    // Pass 1: underdetermined chains + nilpotent chains.
    let pass1 = staircase_pass(e, a, tol)?;
    warnings.extend(pass1.warnings.iter().cloned());
    let (col_sizes, chain_lengths) = interpret_stage_counts(&pass1.stages, &mut warnings);

    // Pass 2 on the transposed remainder: overdetermined chains. A leftover
    // "nilpotent" profile here would contradict pass 1; flag it.
    let pass2 = staircase_pass(&pass1.e_rem.transpose(), &pass1.a_rem.transpose(), tol)?;
    warnings.extend(pass2.warnings.iter().cloned());
    let (row_sizes, spurious) = interpret_stage_counts(&pass2.stages, &mut warnings);
    if !spurious.is_empty() {
        warnings.push(format!(
            "unexpected infinite structure in the transposed pass: {spurious:?}"
        ));
    }

    // Remainder of pass 2 is the finite part, transposed.
    let e_fin = pass2.e_rem.transpose();
    let a_fin = pass2.a_rem.transpose();
    let n_finite = e_fin.rows();
    let finite_block = if n_finite == 0 {
        Matrix::zeros(0, 0)
    } else {
        crate::numlin::lu::solve(&e_fin, &a_fin).map_err(|_| Error::StructuralInconsistency {
            details: "finite part has singular E after staircase deflation".into(),
        })?
    };

    let nilpotency_index = chain_lengths.iter().copied().max().unwrap_or(0);
    let n_nilpotent: usize = chain_lengths.iter().sum();
    let nilpotent_block = canonical_shift(&chain_lengths);

    // Compose transforms: pass 2 acted on the transposed remainder embedded
    // in the top-left corner, so its column transform acts on rows here.
    let mut rows2 = Matrix::identity(e.rows());
    rows2.set_block(0, 0, &pass2.right);
    let mut cols2 = Matrix::identity(e.cols());
    cols2.set_block(0, 0, &pass2.left);
    let left_transform = pass1.left.matmul(&rows2).transpose();
    let right_transform = pass1.right.matmul(&cols2);

    Ok(KroneckerStructure {
        underdetermined_col_sizes: col_sizes,
        n_finite,
        finite_block,
        n_nilpotent,
        nilpotent_block,
        overdetermined_row_sizes: row_sizes,
        nilpotency_index,
        left_transform,
        right_transform,
        transform_condition: T::one(),
        warnings,
    })
}

// ── pencil predicates ───────────────────────────────────────────────

/// Regularity test by deterministic multi-point rank sampling.
///
/// `det(lambda E - A)` is a polynomial of degree at most `n`; a regular
/// pencil cannot have it vanish at all `n + 1` sample points
/// `lambda_k = k + 1/2`.
pub fn is_regular<T: Scalar>(sys: &DaeSystem<T>) -> Result<bool> {
    if sys.n_eqs() != sys.n_states() {
        return Ok(false);
    }
    let n = sys.n_states();
    if n == 0 {
        return Ok(true);
    }
    let tol = RankTolerance::default();
    for k in 0..=n {
        let lambda = real::<T>(k as f64 + 0.5);
        let m = sys.e.scale(lambda).sub(&sys.a);
        if rank_decompose(&m, tol)?.rank == n {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Index of the pencil `sE - A` (nilpotency index of its nilpotent block;
/// 0 when that block is empty).
pub fn index<T: Scalar>(e: &Matrix<T>, a: &Matrix<T>) -> Result<usize> {
    Ok(kronecker_structure(e, a)?.nilpotency_index)
}

/// Impulse controllability of a regular system: `rank [E, A Z, B] = n` for
/// an orthonormal kernel basis `Z` of `E`.
pub fn impulse_controllable<T: Scalar>(sys: &DaeSystem<T>) -> Result<bool> {
    if !is_regular(sys)? {
        return Err(Error::RegularityRequired {
            op: "impulse_controllable",
        });
    }
    let tol = RankTolerance::default();
    let z = rank_decompose(&sys.e, tol)?.null_basis;
    let stacked = sys.e.hstack(&sys.a.matmul(&z)).hstack(&sys.b);
    Ok(rank_decompose(&stacked, tol)?.rank == sys.n_states())
}

/// Weak consistency of an initial value: `E x0` must lie in the range of
/// `E` restricted to the state parts of lifted trajectories, which is
/// exactly the set of achievable `(E x)(0)` values.
pub fn is_weakly_consistent<T: Scalar>(
    sys: &DaeSystem<T>,
    reduced: &ReducedOde<T>,
    x0: &[T],
) -> Result<bool> {
    if x0.len() != sys.n_states() {
        return Err(Error::DimensionMismatch {
            op: "is_weakly_consistent",
            details: format!("x0 has length {}, expected {}", x0.len(), sys.n_states()),
        });
    }
    let x_state = reduced
        .lift
        .submatrix(0, 0, sys.n_states(), reduced.lift.cols());
    let reach = sys.e.matmul(&x_state);
    let target = sys.e.matvec(x0);
    let target_norm = norm2(&target);
    if target_norm == T::zero() {
        return Ok(true);
    }
    let rd = rank_decompose(&reach, RankTolerance::default())?;
    // Residual of the projection onto the range.
    let coeffs = rd.range_basis.tr_matvec(&target);
    let projected = rd.range_basis.matvec(&coeffs);
    let residual = norm2(
        &target
            .iter()
            .zip(&projected)
            .map(|(&t, &p)| t - p)
            .collect::<Vec<_>>(),
    );
    let tol = rd.threshold.max(real::<T>(1e-10) * target_norm);
    Ok(residual <= tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn sys(e: Matrix<f64>, a: Matrix<f64>, b: Matrix<f64>) -> DaeSystem<f64> {
        DaeSystem::new(e, a, b).unwrap()
    }

    /// `sE - A = [s 1; . .]` of size (n-1) x n: one underdetermined chain.
    fn k_chain(n: usize) -> (Matrix<f64>, Matrix<f64>) {
        let mut e = Matrix::zeros(n - 1, n);
        let mut a = Matrix::zeros(n - 1, n);
        for i in 0..n - 1 {
            e[(i, i)] = 1.0;
            a[(i, i + 1)] = -1.0;
        }
        (e, a)
    }

    /// Nilpotent block `sN - I` of the given chain length.
    fn n_chain(len: usize) -> (Matrix<f64>, Matrix<f64>) {
        let mut e = Matrix::zeros(len, len);
        for i in 0..len - 1 {
            e[(i, i + 1)] = 1.0;
        }
        (e, Matrix::identity(len))
    }

    /// Overdetermined chain with `rows` rows and `rows - 1` columns.
    fn o_chain(rows: usize) -> (Matrix<f64>, Matrix<f64>) {
        let cols = rows - 1;
        let mut e = Matrix::zeros(rows, cols);
        let mut a = Matrix::zeros(rows, cols);
        for j in 0..cols {
            e[(j, j)] = 1.0;
            a[(j + 1, j)] = 1.0;
        }
        (e, a)
    }

    fn block_pencil(blocks: &[(Matrix<f64>, Matrix<f64>)]) -> (Matrix<f64>, Matrix<f64>) {
        let es: Vec<&Matrix<f64>> = blocks.iter().map(|(e, _)| e).collect();
        let aas: Vec<&Matrix<f64>> = blocks.iter().map(|(_, a)| a).collect();
        (Matrix::block_diag(&es), Matrix::block_diag(&aas))
    }

    #[test]
    fn regularity_examples() {
        // sI - 0 is regular.
        let s = sys(
            Matrix::identity(2),
            Matrix::zeros(2, 2),
            Matrix::zeros(2, 0),
        );
        assert!(is_regular(&s).unwrap());

        // 1x2 pencil cannot be regular.
        let s = sys(
            Matrix::from_rows(&[&[0.0, 1.0]]),
            Matrix::from_rows(&[&[1.0, 0.0]]),
            Matrix::from_rows(&[&[1.0]]),
        );
        assert!(!is_regular(&s).unwrap());

        // Nilpotent-E pencil with A = I is regular.
        let s = sys(
            Matrix::from_rows(&[&[0.0, 1.0], &[0.0, 0.0]]),
            Matrix::identity(2),
            Matrix::zeros(2, 0),
        );
        assert!(is_regular(&s).unwrap());
    }

    #[test]
    fn ode_pencil_structure() {
        let ks =
            kronecker_structure(&Matrix::<f64>::identity(2), &Matrix::diag(&[1.0, 2.0])).unwrap();
        assert!(ks.underdetermined_col_sizes.is_empty());
        assert!(ks.overdetermined_row_sizes.is_empty());
        assert_eq!(ks.n_finite, 2);
        assert_eq!(ks.n_nilpotent, 0);
        assert_eq!(ks.nilpotency_index, 0);
        // Finite part similar to diag(1,2): check eigenvalues via trace/det.
        let j = &ks.finite_block;
        let trace = j[(0, 0)] + j[(1, 1)];
        let det = j[(0, 0)] * j[(1, 1)] - j[(0, 1)] * j[(1, 0)];
        assert!((trace - 3.0).abs() < 1e-9);
        assert!((det - 2.0).abs() < 1e-9);
    }

    #[test]
    fn index_two_pencil_structure() {
        let e = Matrix::from_rows(&[&[0.0, 1.0], &[0.0, 0.0]]);
        let a = Matrix::identity(2);
        let ks = kronecker_structure(&e, &a).unwrap();
        assert_eq!(ks.n_nilpotent, 2);
        assert_eq!(ks.nilpotency_index, 2);
        assert_eq!(ks.n_finite, 0);
        assert!(ks.underdetermined_col_sizes.is_empty());
        assert!(ks.overdetermined_row_sizes.is_empty());
    }

    #[test]
    fn free_variable_extended_pencil_structure() {
        // E = (0, 1), A = (1, 0), B = 1: extended pencil is (-1, s, -1),
        // whose hand Kronecker form is one size-2 chain plus one free column.
        let s = sys(
            Matrix::from_rows(&[&[0.0, 1.0]]),
            Matrix::from_rows(&[&[1.0, 0.0]]),
            Matrix::from_rows(&[&[1.0]]),
        );
        let (ee, aa) = s.extended_pencil();
        let ks = kronecker_structure(&ee, &aa).unwrap();
        assert_eq!(ks.underdetermined_col_sizes, vec![1, 2]);
        assert_eq!(ks.n_finite, 0);
        assert_eq!(ks.n_nilpotent, 0);
        assert!(ks.overdetermined_row_sizes.is_empty());
    }

    #[test]
    fn index_examples() {
        assert_eq!(
            index(&Matrix::<f64>::identity(3), &Matrix::zeros(3, 3)).unwrap(),
            0
        );

        let e = Matrix::from_rows(&[&[0.0, 1.0], &[0.0, 0.0]]);
        assert_eq!(index(&e, &Matrix::identity(2)).unwrap(), 2);

        // [0, I2] has index 1.
        assert_eq!(
            index(&Matrix::<f64>::zeros(2, 2), &Matrix::identity(2)).unwrap(),
            1
        );
    }

    #[test]
    fn impulse_controllability_examples() {
        // Invertible E: trivially impulse controllable.
        let s = sys(
            Matrix::identity(2),
            Matrix::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]]),
            Matrix::zeros(2, 0),
        );
        assert!(impulse_controllable(&s).unwrap());

        // Index-two pencil without inputs: not impulse controllable.
        let s = sys(
            Matrix::from_rows(&[&[0.0, 1.0], &[0.0, 0.0]]),
            Matrix::identity(2),
            Matrix::zeros(2, 0),
        );
        assert!(!impulse_controllable(&s).unwrap());

        // Singular systems are rejected.
        let s = sys(
            Matrix::from_rows(&[&[0.0, 1.0]]),
            Matrix::from_rows(&[&[1.0, 0.0]]),
            Matrix::from_rows(&[&[1.0]]),
        );
        assert!(matches!(
            impulse_controllable(&s),
            Err(Error::RegularityRequired { .. })
        ));
    }

    #[test]
    fn constructed_block_pencil_recovered() {
        // K2 + K3 + J(2) + N chains (2,1) + O(3 rows): known ground truth.
        let blocks = [
            k_chain(2),
            k_chain(3),
            (
                Matrix::identity(2),
                Matrix::from_rows(&[&[1.0, 1.0], &[0.0, -2.0]]),
            ),
            n_chain(2),
            n_chain(1),
            o_chain(3),
        ];
        let (e, a) = block_pencil(&blocks);
        let ks = kronecker_structure(&e, &a).unwrap();
        assert_eq!(ks.underdetermined_col_sizes, vec![2, 3]);
        assert_eq!(ks.n_finite, 2);
        assert_eq!(ks.n_nilpotent, 3);
        assert_eq!(ks.nilpotency_index, 2);
        assert_eq!(ks.overdetermined_row_sizes, vec![3]);
    }

    #[test]
    fn block_sizes_invariant_under_equivalence() {
        let blocks = [
            k_chain(2),
            n_chain(2),
            (Matrix::identity(1), Matrix::diag(&[-1.0])),
        ];
        let (e, a) = block_pencil(&blocks);
        let reference = kronecker_structure(&e, &a).unwrap();
        let mut rng = Rng::new(99);
        for _ in 0..20 {
            // Random well-conditioned invertible transforms.
            let t = random_invertible(e.rows(), &mut rng);
            let u = random_invertible(e.cols(), &mut rng);
            let e2 = t.matmul(&e).matmul(&u);
            let a2 = t.matmul(&a).matmul(&u);
            let ks = kronecker_structure(&e2, &a2).unwrap();
            assert_eq!(
                ks.underdetermined_col_sizes,
                reference.underdetermined_col_sizes
            );
            assert_eq!(ks.n_finite, reference.n_finite);
            assert_eq!(ks.n_nilpotent, reference.n_nilpotent);
            assert_eq!(ks.nilpotency_index, reference.nilpotency_index);
            assert_eq!(
                ks.overdetermined_row_sizes,
                reference.overdetermined_row_sizes
            );
        }
    }

    pub(crate) fn random_invertible(n: usize, rng: &mut Rng) -> Matrix<f64> {
        loop {
            let m = Matrix::from_fn(n, n, |_, _| rng.gauss());
            let shifted = m.add(&Matrix::identity(n).scale(0.1));
            if crate::numlin::lu::Lu::new(&shifted).is_ok() {
                return shifted;
            }
        }
    }

    #[test]
    fn regular_consistency_on_random_pencils() {
        let mut rng = Rng::new(7);
        for trial in 0..200 {
            let n = 1 + (rng.next_u64() % 4) as usize;
            let square = trial % 2 == 0;
            let (rows, cols) = if square { (n, n) } else { (n, n + 1) };
            let e = Matrix::from_fn(rows, cols, |_, _| rng.gauss());
            let a = Matrix::from_fn(rows, cols, |_, _| rng.gauss());
            let s = DaeSystem::new(e.clone(), a.clone(), Matrix::zeros(rows, 0)).unwrap();
            let regular = is_regular(&s).unwrap();
            let ks = kronecker_structure(&e, &a).unwrap();
            assert_eq!(
                regular,
                ks.describes_regular(rows, cols),
                "disagreement on trial {trial}"
            );
            if regular {
                assert_eq!(ks.n_finite + ks.n_nilpotent, n);
            }
        }
    }

    #[test]
    fn nilpotent_block_consistent_with_index() {
        let e = Matrix::from_rows(&[&[0.0, 1.0], &[0.0, 0.0]]);
        let ks = kronecker_structure(&e, &Matrix::identity(2)).unwrap();
        let n = &ks.nilpotent_block;
        // N^(nu-1) != 0, N^nu = 0, recomputed from the returned block.
        let mut p = Matrix::identity(ks.n_nilpotent);
        for _ in 0..ks.nilpotency_index - 1 {
            p = p.matmul(n);
        }
        assert!(p.max_abs() > 0.0);
        assert_eq!(p.matmul(n).max_abs(), 0.0);
    }
}
