//! Decomposition-backed kernel: spectral radius, operator 2-norm,
//! positive-definiteness, pivoted linear solves, and the Stein-type
//! equation solvers used to build initial iterates.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matrix::{ComplexMatrix, HermitianMatrix};
use crate::tol;

fn to_na(m: &ComplexMatrix) -> DMatrix<Complex64> {
    DMatrix::from_row_iterator(m.rows(), m.cols(), m.entries().iter().cloned())
}

fn from_na(m: &DMatrix<Complex64>) -> ComplexMatrix {
    ComplexMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Largest singular value. Zero for empty matrices.
pub fn operator_two_norm(m: &ComplexMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let sv = to_na(m).svd(false, false).singular_values;
    sv.iter().cloned().fold(0.0, f64::max)
}

/// Largest eigenvalue modulus, by dense Schur factorization.
pub fn spectral_radius(m: &ComplexMatrix) -> Result<f64> {
    if !m.is_square() {
        return Err(Error::Dimension {
            context: "spectral_radius",
            details: format!("{}x{} is not square", m.rows(), m.cols()),
        });
    }
    if m.is_empty() {
        return Ok(0.0);
    }
    let eigs = to_na(m)
        .eigenvalues()
        .ok_or_else(|| Error::Numerical("eigenvalue iteration did not converge".into()))?;
    Ok(eigs.iter().map(|z| z.norm()).fold(0.0, f64::max))
}

/// Real eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &HermitianMatrix) -> Result<Vec<f64>> {
    if m.order() == 0 {
        return Ok(Vec::new());
    }
    let se = nalgebra::SymmetricEigen::try_new(to_na(m.as_matrix()), f64::EPSILON, 0)
        .ok_or_else(|| Error::Numerical("Hermitian eigenvalue iteration did not converge".into()))?;
    let mut eigs: Vec<f64> = se.eigenvalues.iter().cloned().collect();
    eigs.sort_by(|a, b| a.total_cmp(b));
    Ok(eigs)
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn lambda_min(m: &HermitianMatrix) -> Result<f64> {
    if m.order() == 0 {
        return Ok(f64::INFINITY);
    }
    Ok(hermitian_eigenvalues(m)?[0])
}

/// True iff `lambda_min(M) > tol * max(1, ||M||_2)`. Total: numerical
/// failures count as "not positive definite".
pub fn is_positive_definite(m: &HermitianMatrix, tol: f64) -> bool {
    if m.order() == 0 {
        return true;
    }
    match hermitian_eigenvalues(m) {
        Ok(eigs) => {
            let norm = eigs.iter().map(|x| x.abs()).fold(0.0, f64::max);
            eigs[0] > tol * f64::max(1.0, norm)
        }
        Err(_) => false,
    }
}

/// Reciprocal condition number sigma_min / sigma_max of a square matrix.
/// Empty matrices are nonsingular by convention (rcond 1).
pub fn rcond(m: &ComplexMatrix) -> f64 {
    assert!(m.is_square(), "rcond requires a square matrix");
    if m.is_empty() {
        return 1.0;
    }
    let sv = to_na(m).svd(false, false).singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if smax == 0.0 {
        0.0
    } else {
        smin / smax
    }
}

/// Solves `M Z = RHS` by pivoted LU. Singularity to working precision is
/// detected from the ratio of extreme pivot magnitudes (an rcond estimate,
/// cheaper than the exact SVD form used by the membership predicates), and
/// the result is verified against a backward-stable residual bound.
pub fn solve_linear(m: &ComplexMatrix, rhs: &ComplexMatrix) -> Result<ComplexMatrix> {
    if !m.is_square() {
        return Err(Error::Dimension {
            context: "solve_linear",
            details: format!("coefficient matrix {}x{} is not square", m.rows(), m.cols()),
        });
    }
    if rhs.rows() != m.rows() {
        return Err(Error::Dimension {
            context: "solve_linear",
            details: format!("rhs has {} rows, expected {}", rhs.rows(), m.rows()),
        });
    }
    if m.is_empty() || rhs.is_empty() {
        return Ok(ComplexMatrix::zeros(m.cols(), rhs.cols()));
    }

    let lu = to_na(m).lu();
    let u = lu.u();
    let mut pmin = f64::INFINITY;
    let mut pmax: f64 = 0.0;
    for i in 0..u.nrows().min(u.ncols()) {
        let p = u[(i, i)].norm();
        pmin = pmin.min(p);
        pmax = pmax.max(p);
    }
    let rcond_est = if pmax == 0.0 { 0.0 } else { pmin / pmax };
    if rcond_est < tol::RCOND_MIN {
        return Err(Error::Singular {
            context: "solve_linear".into(),
            rcond: rcond_est,
        });
    }
    let z = lu.solve(&to_na(rhs)).ok_or(Error::Singular {
        context: "solve_linear (zero pivot)".into(),
        rcond: rcond_est,
    })?;
    let z = from_na(&z);

    let residual = (&(m * &z) - rhs).frobenius_norm();
    let bound =
        tol::SOLVE_TOL * (m.frobenius_norm() * z.frobenius_norm() + rhs.frobenius_norm());
    if residual > bound {
        return Err(Error::Numerical(format!(
            "linear solve residual {residual:.3e} exceeds bound {bound:.3e}"
        )));
    }
    Ok(z)
}

/// Kronecker product, used by the vectorized Stein solve and its tests.
pub fn kronecker(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    ComplexMatrix::from_fn(a.rows() * b.rows(), a.cols() * b.cols(), |i, j| {
        a.get(i / b.rows(), j / b.cols()) * b.get(i % b.rows(), j % b.cols())
    })
}

fn check_stein_preconditions(c: &ComplexMatrix, q: &HermitianMatrix, context: &str) -> Result<f64> {
    if !c.is_square() || c.rows() != q.order() {
        return Err(Error::Dimension {
            context: "solve_stein",
            details: format!(
                "coefficient {}x{} vs constant term order {}",
                c.rows(),
                c.cols(),
                q.order()
            ),
        });
    }
    let rho = spectral_radius(c)?;
    if rho >= 1.0 - tol::STAB_MARGIN {
        return Err(Error::Unstable {
            context: context.into(),
            rho,
        });
    }
    Ok(rho)
}

/// Unique Hermitian solution of `X - C^H X C = Q` for rho(C) < 1.
///
/// Small orders go through the n^2 x n^2 vectorized linear system; larger
/// orders use squared-Smith doubling (X_{j+1} = X_j + M_j^H X_j M_j with
/// M_{j+1} = M_j^2), which sums the same convergent series in O(log) passes.
pub fn solve_stein(c: &ComplexMatrix, q: &HermitianMatrix) -> Result<HermitianMatrix> {
    check_stein_preconditions(c, q, "solve_stein: rho(C) >= 1")?;
    let n = q.order();
    if n == 0 {
        return Ok(HermitianMatrix::zeros(0));
    }

    let x = if n <= tol::KRONECKER_MAX_ORDER {
        stein_kronecker(c, q)?
    } else {
        stein_doubling(c, q)?
    };
    let x = HermitianMatrix::symmetrize(x);

    let residual = stein_residual(c, q, &x);
    let scale = q.frobenius_norm()
        + (1.0 + c.frobenius_norm()).powi(2) * x.frobenius_norm();
    if residual > 1e-11 * f64::max(1.0, scale) {
        return Err(Error::Numerical(format!(
            "Stein solve residual {residual:.3e} too large"
        )));
    }
    Ok(x)
}

fn stein_residual(c: &ComplexMatrix, q: &HermitianMatrix, x: &HermitianMatrix) -> f64 {
    let xm = x.as_matrix();
    let img = &(&c.adjoint() * xm) * c;
    (&(xm - &img) - q.as_matrix()).frobenius_norm()
}

/// Row-major vectorization: vec(C^H X C) = (C^H kron C^T) vec(X).
fn stein_kronecker(c: &ComplexMatrix, q: &HermitianMatrix) -> Result<ComplexMatrix> {
    let n = q.order();
    let k = kronecker(&c.adjoint(), &c.transpose());
    let system = &ComplexMatrix::identity(n * n) - &k;
    let rhs = ComplexMatrix::new(n * n, 1, q.as_matrix().entries().to_vec())?;
    let sol = solve_linear(&system, &rhs)?;
    ComplexMatrix::new(n, n, sol.entries().to_vec())
}

fn stein_doubling(c: &ComplexMatrix, q: &HermitianMatrix) -> Result<ComplexMatrix> {
    let mut x = q.as_matrix().clone();
    let mut m = c.clone();
    for _ in 0..64 {
        let update = &(&m.adjoint() * &x) * &m;
        x = &x + &update;
        if !x.is_finite() {
            return Err(Error::Numerical("Stein doubling produced non-finite iterate".into()));
        }
        if update.frobenius_norm() <= 1e-17 * f64::max(1.0, x.frobenius_norm()) {
            return Ok(x);
        }
        m = &m * &m;
    }
    Err(Error::Numerical(
        "Stein doubling did not converge within 64 squarings".into(),
    ))
}

/// Unique Hermitian solution of `X - A^H conj(X) A = Q` for rho(conj(A) A) < 1,
/// by reduction to the standard Stein equation
/// `X - (conj(A) A)^H X (conj(A) A) = Q + A^H conj(Q) A`.
pub fn solve_conjugate_stein(a: &ComplexMatrix, q: &HermitianMatrix) -> Result<HermitianMatrix> {
    let c = &a.conj() * a;
    check_stein_preconditions(&c, q, "solve_conjugate_stein: rho(conj(A)*A) >= 1")?;
    let extra = &(&a.adjoint() * q.conj().as_matrix()) * a;
    let q_reduced = HermitianMatrix::symmetrize(&extra + q.as_matrix());
    let x = solve_stein(&c, &q_reduced)?;

    let img = &(&a.adjoint() * x.conj().as_matrix()) * a;
    let residual = (&(x.as_matrix() - &img) - q.as_matrix()).frobenius_norm();
    let scale = q.frobenius_norm()
        + (1.0 + a.frobenius_norm()).powi(2) * x.frobenius_norm();
    if residual > 1e-11 * f64::max(1.0, scale) {
        return Err(Error::Numerical(format!(
            "conjugate Stein residual {residual:.3e} too large"
        )));
    }
    Ok(x)
}
