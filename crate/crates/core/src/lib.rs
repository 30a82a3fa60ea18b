//! Model predictive control for linear time-invariant differential-algebraic
//! systems `d/dt(E x) = A x + B u`, including singular and higher-index ones.
//!
//! The pipeline goes: structural analysis of the matrix pencil `sE - A`
//! ([`pencil`]), regularization of the DAE into an equivalent explicit ODE
//! optimal control problem ([`regularize`]), Riccati-based terminal cost and
//! gain ([`riccati`]), an invariant terminal region ([`terminal`]), a
//! discretized constrained finite-horizon solver ([`ocp`]), and the receding
//! horizon closed loop with stability monitors ([`mpc`]).
//!
//! All numerical kernels live in [`numlin`] and are generic over the scalar
//! type; the aliases at the crate root fix `f64`, which is what the solvers
//! and their default tolerances are tuned for.

pub mod demo;
pub mod error;
pub mod mpc;
pub mod numlin;
pub mod ocp;
pub mod pencil;
pub mod regularize;
pub mod riccati;
pub mod rng;
pub mod scalar;
pub mod terminal;

pub use error::Error;
pub use scalar::Scalar;

/// Double-precision aliases. The whole stack is generic over [`Scalar`];
/// these are the instantiations used by the CLI and the test suites.
pub type Matrix = numlin::Matrix<f64>;
pub type DaeSystem = pencil::DaeSystem<f64>;
pub type ConstraintSet = pencil::ConstraintSet<f64>;
pub type KroneckerStructure = pencil::KroneckerStructure<f64>;
pub type ReducedOde = regularize::ReducedOde<f64>;
pub type RiccatiSolution = riccati::RiccatiSolution<f64>;
pub type TerminalIngredients = terminal::TerminalIngredients<f64>;
pub type DiscreteOcp = ocp::DiscreteOcp<f64>;
pub type ClosedLoopTrace = mpc::ClosedLoopTrace<f64>;

pub type Result<T, E = Error> = core::result::Result<T, E>;
