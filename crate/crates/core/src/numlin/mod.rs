//! Self-contained dense linear-algebra kernels.
//!
//! Everything downstream (pencil analysis, regularization, Riccati, OCP)
//! is built on these: rank-revealing decompositions, the matrix
//! exponential, Lyapunov solves, the matrix sign function, symmetric
//! eigenvalues, and ellipsoid projection. All types are immutable values
//! and all operations are pure.

pub mod eig;
pub mod ellipsoid;
pub mod expm;
pub mod lu;
pub mod lyapunov;
pub mod matrix;
pub mod sign;
pub mod svd;

pub use eig::{min_eigval, sym_eig, sym_eigvals, SymEig};
pub use ellipsoid::project_ellipsoid;
pub use expm::expm;
pub use lu::{inverse, solve, Lu};
pub use lyapunov::solve_lyapunov;
pub use matrix::{dot, norm2, norm_inf_vec, vec_add, vec_scale, vec_sub, Matrix};
pub use sign::matrix_sign;
pub use svd::{orth_complement, rank_decompose, svd, RankDecomposition, RankTolerance, Svd};
