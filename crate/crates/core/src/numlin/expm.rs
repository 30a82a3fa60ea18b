//! Matrix exponential: scaling and squaring with a diagonal Padé
//! approximant of order 6.

use crate::error::Error;
use crate::scalar::{real, Scalar};
use crate::Result;

use super::lu::Lu;
use super::matrix::Matrix;

// Order-6 diagonal Padé coefficients.
const PADE6: [f64; 7] = [
    1.0,
    0.5,
    5.0 / 44.0,
    1.0 / 66.0,
    1.0 / 792.0,
    1.0 / 15_840.0,
    1.0 / 665_280.0,
];

pub fn expm<T: Scalar>(m: &Matrix<T>) -> Result<Matrix<T>> {
    if !m.is_square() {
        return Err(Error::NotSquare {
            op: "expm",
            rows: m.rows(),
            cols: m.cols(),
        });
    }
    m.require_finite("expm")?;
    let n = m.rows();
    if n == 0 {
        return Ok(Matrix::zeros(0, 0));
    }

    // Scale so the Padé argument has norm at most 1/2.
    let norm = m.norm_one();
    let half = real::<T>(0.5);
    let mut squarings = 0usize;
    let mut scaled = m.clone();
    if norm > half {
        let ratio = (norm / half).ln() / real::<T>(2.0).ln();
        squarings = ratio.ceil().to_f64().unwrap_or(0.0) as usize;
        let factor = real::<T>(0.5f64.powi(squarings as i32));
        scaled = m.scale(factor);
    }

    let m2 = scaled.matmul(&scaled);
    let m4 = m2.matmul(&m2);
    let m6 = m4.matmul(&m2);
    let ident = Matrix::identity(n);

    // U = M (c1 I + c3 M^2 + c5 M^4), V = c0 I + c2 M^2 + c4 M^4 + c6 M^6.
    let u_inner = ident
        .scale(real(PADE6[1]))
        .add(&m2.scale(real(PADE6[3])))
        .add(&m4.scale(real(PADE6[5])));
    let u = scaled.matmul(&u_inner);
    let v = ident
        .scale(real(PADE6[0]))
        .add(&m2.scale(real(PADE6[2])))
        .add(&m4.scale(real(PADE6[4])))
        .add(&m6.scale(real(PADE6[6])));

    // (V - U) X = (V + U)
    let lhs = v.sub(&u);
    let rhs = v.add(&u);
    let mut result = Lu::new(&lhs)
        .map_err(|_| Error::StructuralInconsistency {
            details: "Padé denominator singular in expm".into(),
        })?
        .solve_mat(&rhs);

    for _ in 0..squarings {
        result = result.matmul(&result);
    }
    Ok(result)
}
