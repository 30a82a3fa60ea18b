//! Small benchmark systems covering every structural class the pipeline
//! handles. The CLI ships the same problems as JSON fixtures; the test
//! suites build them from here.

use crate::numlin::matrix::Matrix;
use crate::pencil::{ConstraintSet, DaeSystem};
use crate::scalar::Scalar;

/// A fully specified control problem.
#[derive(Debug, Clone)]
pub struct DemoProblem<T> {
    pub sys: DaeSystem<T>,
    pub constraints: ConstraintSet<T>,
    pub cost: Matrix<T>,
    pub x0: Vec<T>,
}

fn from_f64<T: Scalar>(rows: usize, cols: usize, data: &[f64]) -> Matrix<T> {
    assert_eq!(data.len(), rows * cols);
    Matrix::from_fn(rows, cols, |i, j| crate::scalar::real(data[i * cols + j]))
}

/// Scalar equation with a free state: `d/dt x2 = x1 + u`. Singular; the
/// free variable `x1` turns into an input of the reduced system.
pub fn free_variable_scalar<T: Scalar>() -> DemoProblem<T> {
    let e = from_f64(1, 2, &[0.0, 1.0]);
    let a = from_f64(1, 2, &[1.0, 0.0]);
    let b = from_f64(1, 1, &[1.0]);
    let sys = DaeSystem::new(e, a, b).expect("demo system");
    let constraints = ConstraintSet::empty(2, 1);
    let cost = Matrix::identity(3);
    DemoProblem {
        sys,
        constraints,
        cost,
        x0: vec![crate::scalar::real(0.0), crate::scalar::real(1.0)],
    }
}

/// Regular index-two pencil without inputs: both states are forced to
/// vanish almost everywhere.
pub fn nilpotent_index2<T: Scalar>() -> DemoProblem<T> {
    let e = from_f64(2, 2, &[0.0, 1.0, 0.0, 0.0]);
    let a = Matrix::identity(2);
    let b = Matrix::zeros(2, 0);
    let sys = DaeSystem::new(e, a, b).expect("demo system");
    DemoProblem {
        sys,
        constraints: ConstraintSet::empty(2, 0),
        cost: Matrix::identity(2),
        x0: vec![T::zero(), T::zero()],
    }
}

/// Singular three-state system mixing an underdetermined chain with an
/// index-two algebraic pair; reduces to the scalar integrator driven by
/// the former free variable.
pub fn mixed_singular_chain<T: Scalar>() -> DemoProblem<T> {
    let e = from_f64(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
    let a = from_f64(3, 3, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
    let b = from_f64(3, 1, &[0.0, 0.0, 1.0]);
    let sys = DaeSystem::new(e, a, b).expect("demo system");
    DemoProblem {
        sys,
        constraints: ConstraintSet::empty(3, 1),
        cost: Matrix::identity(4),
        x0: vec![T::zero(), crate::scalar::real(0.5), T::zero()],
    }
}

/// Five-state singular benchmark: a redundant equation pair, an algebraic
/// constraint, a stable mode, and an integrator driven jointly by a free
/// variable and the input, under unit box constraints on all states and
/// the input. The default initial value realizes
/// `(E x)(0) = (0, 0, 0, -0.9, -0.55)`, i.e. `x3(0) = -0.9`,
/// `x5(0) = -0.55`.
pub fn singular_benchmark<T: Scalar>() -> DemoProblem<T> {
    let e = from_f64(
        5,
        5,
        &[
            0.0, 0.0, 0.0, 0.0, 0.0, //
            1.0, 0.0, 0.0, 0.0, 0.0, //
            0.0, 0.0, 0.0, 0.0, 0.0, //
            0.0, 0.0, 1.0, 0.0, 0.0, //
            0.0, 0.0, 0.0, 0.0, 1.0,
        ],
    );
    let a = from_f64(
        5,
        5,
        &[
            1.0, 0.0, 0.0, 0.0, 0.0, //
            0.0, 0.0, 0.0, 0.0, 0.0, //
            0.0, 1.0, 0.0, 0.0, 0.0, //
            0.0, 0.0, -1.0, 0.0, 0.0, //
            0.0, 0.0, 0.0, 1.0, 0.0,
        ],
    );
    let b = from_f64(5, 1, &[0.0, 0.0, 0.0, 0.0, 1.0]);
    let sys = DaeSystem::new(e, a, b).expect("demo system");

    // -1 <= x_i <= 1 and -1 <= u <= 1 as [F G](x; u) <= 1.
    let mut f = Matrix::zeros(12, 5);
    let mut g = Matrix::zeros(12, 1);
    for i in 0..5 {
        f[(i, i)] = T::one();
        f[(5 + i, i)] = -T::one();
    }
    g[(10, 0)] = T::one();
    g[(11, 0)] = -T::one();
    let constraints = ConstraintSet::new(f, g).expect("demo constraints");

    DemoProblem {
        sys,
        constraints,
        cost: Matrix::identity(6),
        x0: vec![
            T::zero(),
            T::zero(),
            crate::scalar::real(-0.9),
            T::zero(),
            crate::scalar::real(-0.55),
        ],
    }
}

/// Regular, impulse controllable index-two system: exercises the feedback
/// regularization route with a genuinely random gain.
pub fn feedback_index2<T: Scalar>() -> DemoProblem<T> {
    let e = from_f64(2, 2, &[1.0, 0.0, 0.0, 0.0]);
    let a = from_f64(2, 2, &[0.0, 1.0, 1.0, 0.0]);
    let b = from_f64(2, 1, &[0.0, 1.0]);
    let sys = DaeSystem::new(e, a, b).expect("demo system");
    DemoProblem {
        sys,
        constraints: ConstraintSet::empty(2, 1),
        cost: Matrix::identity(3),
        x0: vec![crate::scalar::real(0.4), T::zero()],
    }
}
