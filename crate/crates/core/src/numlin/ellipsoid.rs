//! Euclidean projection onto the ellipsoid `{ z : z^T P z <= rho }`.

use crate::error::Error;
use crate::scalar::{real, Scalar};
use crate::Result;

use super::lu::Lu;
use super::matrix::{dot, Matrix};

/// Nearest point of `{z : z^T P z <= rho}` to `y` (`P` symmetric positive
/// definite, `rho > 0`). Interior points come back unchanged.
///
/// The KKT system is `z = (I + mu P)^{-1} y` with a scalar multiplier
/// `mu >= 0` chosen so the boundary residual vanishes; `mu` is found by a
/// bisection-safeguarded Newton iteration.
pub fn project_ellipsoid<T: Scalar>(y: &[T], p: &Matrix<T>, rho: T) -> Result<Vec<T>> {
    if !p.is_square() || p.rows() != y.len() {
        return Err(Error::DimensionMismatch {
            op: "project_ellipsoid",
            details: format!("P is {}x{}, y has length {}", p.rows(), p.cols(), y.len()),
        });
    }
    if rho <= T::zero() {
        return Err(Error::InvalidConfig {
            details: "ellipsoid radius must be positive".into(),
        });
    }
    let quad = |z: &[T]| dot(z, &p.matvec(z));
    if quad(y) <= rho {
        return Ok(y.to_vec());
    }

    let n = y.len();
    let ident = Matrix::identity(n);
    let eval = |mu: T| -> Result<(Vec<T>, T, T)> {
        // z(mu), g(mu) = z^T P z - rho, g'(mu) = -2 z^T P (I + mu P)^{-1} P z
        let sys = ident.add(&p.scale(mu));
        let lu = Lu::new(&sys).map_err(|_| Error::StructuralInconsistency {
            details: "I + mu P singular; P is not positive definite".into(),
        })?;
        let z = lu.solve_vec(y);
        let pz = p.matvec(&z);
        let g = dot(&z, &pz) - rho;
        let w = lu.solve_vec(&pz);
        let two = T::one() + T::one();
        let gprime = -two * dot(&pz, &w);
        Ok((z, g, gprime))
    };

    // Bracket: g(0) > 0 and g(mu) -> -rho as mu -> infinity.
    let mut lo = T::zero();
    let mut hi = T::one();
    loop {
        let (_, g, _) = eval(hi)?;
        if g < T::zero() {
            break;
        }
        lo = hi;
        hi = hi * real::<T>(4.0);
        if hi > real::<T>(1e18) {
            return Err(Error::StructuralInconsistency {
                details: "ellipsoid projection multiplier out of range".into(),
            });
        }
    }

    let tol = real::<T>(1e-12) * rho;
    let mut mu = (lo + hi) * real::<T>(0.5);
    let mut best = eval(mu)?;
    for _ in 0..200 {
        let (_, g, gp) = best;
        if g.abs() <= tol {
            break;
        }
        if g > T::zero() {
            lo = mu;
        } else {
            hi = mu;
        }
        // Newton step, bisect when it leaves the bracket.
        let newton = mu - g / gp;
        mu = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            (lo + hi) * real::<T>(0.5)
        };
        best = eval(mu)?;
    }
    let (z, _, _) = best;
    Ok(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numlin::matrix::norm2;
    use crate::rng::Rng;

    #[test]
    fn interior_point_unchanged() {
        let p = Matrix::<f64>::identity(2);
        let y = vec![0.3, 0.2];
        let z = project_ellipsoid(&y, &p, 1.0).unwrap();
        assert_eq!(z, y);
    }

    #[test]
    fn sphere_projection() {
        let p = Matrix::<f64>::identity(2);
        let z = project_ellipsoid(&[2.0, 0.0], &p, 1.0).unwrap();
        assert!((z[0] - 1.0).abs() < 1e-10);
        assert!(z[1].abs() < 1e-12);
    }

    #[test]
    fn kkt_verified_anisotropic() {
        let p = Matrix::<f64>::diag(&[0.5, 2.0f64.sqrt()]);
        let rho = 0.25;
        let y = vec![2.0, 2.0];
        let z = project_ellipsoid(&y, &p, rho).unwrap();
        // Boundary residual.
        let q = dot(&z, &p.matvec(&z));
        assert!((q - rho).abs() <= 1e-10 * rho.max(1.0), "boundary {q}");
        // Stationarity: y - z parallel to P z.
        let diff = [y[0] - z[0], y[1] - z[1]];
        let pz = p.matvec(&z);
        let cross = diff[0] * pz[1] - diff[1] * pz[0];
        assert!(cross.abs() < 1e-9, "stationarity {cross}");
    }

    #[test]
    fn closer_than_random_feasible_points() {
        let p = Matrix::<f64>::from_rows(&[&[2.0, 0.3], &[0.3, 1.0]]);
        let rho = 0.7;
        let y = vec![1.5, -2.0];
        let z = project_ellipsoid(&y, &p, rho).unwrap();
        let dz = norm2(&[y[0] - z[0], y[1] - z[1]]);
        let mut rng = Rng::new(23);
        for _ in 0..1000 {
            // Rejection-sample a feasible candidate.
            let cand = loop {
                let c = [rng.uniform_in(-2.0, 2.0), rng.uniform_in(-2.0, 2.0)];
                if dot(&c, &p.matvec(&c)) <= rho {
                    break c;
                }
            };
            let dc = norm2(&[y[0] - cand[0], y[1] - cand[1]]);
            assert!(dz <= dc + 1e-12);
        }
    }
}
