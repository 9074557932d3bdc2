//! The conjugate discrete-time algebraic Riccati equation (CDARE)
//!
//! ```text
//!     X = R(X) = A^H X~ A - A^H X~ B (R + B^H X~ B)^{-1} B^H X~ A + H
//!       = A^H X~ (I + G X~)^{-1} A + H,        G = B R^{-1} B^H,
//! ```
//!
//! where `X~` denotes the entrywise conjugate of X. This module owns the
//! problem data, both evaluation forms of the operator, the feedback and
//! closed-loop matrices, membership predicates for the domain / positivity /
//! stability sets, the normalized residual used as every solver's stopping
//! measure, and the conjugate-Stein rewriting identity as a computable
//! residual.

use crate::error::{Error, Result};
use crate::linalg;
use crate::matrix::{ComplexMatrix, HermitianMatrix};
use crate::tol;

/// Coefficient bundle (A, B, R, H) with the cached quadratic-term kernel
/// G = B R^{-1} B^H. R must be nonsingular; H is any Hermitian matrix.
#[derive(Clone, Debug)]
pub struct CdareProblem {
    a: ComplexMatrix,
    b: ComplexMatrix,
    r: HermitianMatrix,
    h: HermitianMatrix,
    g: HermitianMatrix,
}

/// Everything the solvers need about one candidate X: the shifted weighting
/// matrix R_X = R + B^H X~ B, the feedback gain F_X = R_X^{-1} B^H X~ A, the
/// closed-loop matrix T_X = A - B F_X, and the conjugate-squared closed loop
/// T^ = conj(T_X) T_X whose spectral radius governs convergence.
#[derive(Clone, Debug)]
pub struct EvalCache {
    pub x: HermitianMatrix,
    pub r_x: HermitianMatrix,
    pub f_x: ComplexMatrix,
    pub t_x: ComplexMatrix,
    pub that_x: ComplexMatrix,
}

/// Result of one instrumented step of the fixed-point iteration.
#[derive(Clone, Debug)]
pub struct RiccatiStep {
    /// R(X), symmetrized.
    pub image: HermitianMatrix,
    /// Normalized residual of X (not of the image).
    pub nres: f64,
    /// rho(conj(T_X) T_X) at X, when the eigenvalue iteration converged.
    pub rho_that: Option<f64>,
}

/// Intermediates shared by the operator forms and the residual.
struct Ingredients {
    r_x: HermitianMatrix,
    /// B^H X~ A, the numerator of the feedback gain.
    w: ComplexMatrix,
    /// F_X = R_X^{-1} W.
    f_x: ComplexMatrix,
    /// A^H X~ A.
    axa: ComplexMatrix,
}

impl CdareProblem {
    pub fn new(
        a: ComplexMatrix,
        b: ComplexMatrix,
        r: HermitianMatrix,
        h: HermitianMatrix,
    ) -> Result<Self> {
        let n = a.rows();
        let m = b.cols();
        if !a.is_square() {
            return Err(Error::Dimension {
                context: "CdareProblem::new",
                details: format!("A is {}x{}, expected square", a.rows(), a.cols()),
            });
        }
        if b.rows() != n || r.order() != m || h.order() != n {
            return Err(Error::Dimension {
                context: "CdareProblem::new",
                details: format!(
                    "A {n}x{n}, B {}x{}, R order {}, H order {}",
                    b.rows(),
                    b.cols(),
                    r.order(),
                    h.order()
                ),
            });
        }
        let rc = linalg::rcond(r.as_matrix());
        if rc < tol::RCOND_MIN {
            return Err(Error::Singular {
                context: "CdareProblem::new: control weighting matrix R".into(),
                rcond: rc,
            });
        }
        // G = B R^{-1} B^H via a factorization solve.
        let rinv_bh = linalg::solve_linear(r.as_matrix(), &b.adjoint())?;
        let g = HermitianMatrix::symmetrize(&b * &rinv_bh);
        Ok(Self { a, b, r, h, g })
    }

    pub fn state_dim(&self) -> usize {
        self.a.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.cols()
    }

    pub fn a(&self) -> &ComplexMatrix {
        &self.a
    }

    pub fn b(&self) -> &ComplexMatrix {
        &self.b
    }

    pub fn r(&self) -> &HermitianMatrix {
        &self.r
    }

    pub fn h(&self) -> &HermitianMatrix {
        &self.h
    }

    pub fn g(&self) -> &HermitianMatrix {
        &self.g
    }

    /// R_X = R + B^H X~ B.
    pub fn r_x(&self, x: &HermitianMatrix) -> HermitianMatrix {
        let xc = x.conj();
        let bxb = &(&self.b.adjoint() * xc.as_matrix()) * &self.b;
        HermitianMatrix::symmetrize(&bxb + self.r.as_matrix())
    }

    fn check_dim(&self, x: &HermitianMatrix, context: &'static str) -> Result<()> {
        if x.order() != self.state_dim() {
            return Err(Error::Dimension {
                context,
                details: format!("X order {}, expected {}", x.order(), self.state_dim()),
            });
        }
        Ok(())
    }

    fn ingredients(&self, x: &HermitianMatrix, context: &str) -> Result<Ingredients> {
        let xc = x.conj();
        let xa = xc.as_matrix() * &self.a;
        let w = &self.b.adjoint() * &xa;
        let axa = &self.a.adjoint() * &xa;
        let r_x = self.r_x(x);
        let rc = linalg::rcond(r_x.as_matrix());
        if rc < tol::RCOND_MIN {
            return Err(Error::Domain {
                what: format!("{context}: det(R_X) ~ 0 (rcond {rc:.3e})"),
            });
        }
        let f_x = linalg::solve_linear(r_x.as_matrix(), &w)?;
        Ok(Ingredients { r_x, w, f_x, axa })
    }

    /// R(X) in quotient form, symmetrized. Valid for any X with R_X
    /// nonsingular.
    pub fn riccati_apply(&self, x: &HermitianMatrix) -> Result<HermitianMatrix> {
        self.check_dim(x, "riccati_apply")?;
        let ing = self.ingredients(x, "riccati_apply")?;
        let corr = &ing.w.adjoint() * &ing.f_x;
        let img = &(&ing.axa - &corr) + self.h.as_matrix();
        Ok(HermitianMatrix::symmetrize(img))
    }

    /// One instrumented iteration step: the image R(X) together with the
    /// normalized residual and closed-loop spectral radius at X, all from a
    /// single evaluation of the operator internals. This is what the
    /// iteration drivers call once per step.
    pub fn riccati_step(&self, x: &HermitianMatrix) -> Result<RiccatiStep> {
        self.check_dim(x, "riccati_step")?;
        let ing = self.ingredients(x, "riccati_step")?;
        let corr = &ing.w.adjoint() * &ing.f_x;
        let image = HermitianMatrix::symmetrize(&(&ing.axa - &corr) + self.h.as_matrix());

        let numerator = linalg::operator_two_norm(&(x.as_matrix() - image.as_matrix()));
        let denominator = linalg::operator_two_norm(x.as_matrix())
            + linalg::operator_two_norm(&ing.axa)
            + linalg::operator_two_norm(&corr)
            + linalg::operator_two_norm(self.h.as_matrix());
        let nres = if denominator == 0.0 {
            0.0
        } else {
            numerator / denominator
        };

        let t_x = &self.a - &(&self.b * &ing.f_x);
        let rho_that = linalg::spectral_radius(&(&t_x.conj() * &t_x)).ok();
        Ok(RiccatiStep {
            image,
            nres,
            rho_that,
        })
    }

    /// R(X) in compact form A^H X~ (I + G X~)^{-1} A + H, symmetrized.
    /// Additionally requires I + G X~ nonsingular; kept separate for
    /// cross-checking against the quotient form.
    pub fn riccati_apply_compact(&self, x: &HermitianMatrix) -> Result<HermitianMatrix> {
        self.check_dim(x, "riccati_apply_compact")?;
        let n = self.state_dim();
        let xc = x.conj();
        let igx = &ComplexMatrix::identity(n) + &(self.g.as_matrix() * xc.as_matrix());
        let z = linalg::solve_linear(&igx, &self.a).map_err(|e| match e {
            Error::Singular { rcond, .. } => Error::Domain {
                what: format!("riccati_apply_compact: I + G X~ singular (rcond {rcond:.3e})"),
            },
            other => other,
        })?;
        let img = &(&self.a.adjoint() * &(xc.as_matrix() * &z)) + self.h.as_matrix();
        Ok(HermitianMatrix::symmetrize(img))
    }

    /// Feedback gain, closed-loop matrix and conjugate-squared closed loop
    /// at X. T_X is formed as A - B F_X; the resolvent form
    /// (I + G X~)^{-1} A agrees with it up to rounding.
    pub fn eval_cache(&self, x: &HermitianMatrix) -> Result<EvalCache> {
        self.check_dim(x, "eval_cache")?;
        let ing = self.ingredients(x, "eval_cache")?;
        let t_x = &self.a - &(&self.b * &ing.f_x);
        let that_x = &t_x.conj() * &t_x;
        Ok(EvalCache {
            x: x.clone(),
            r_x: ing.r_x,
            f_x: ing.f_x,
            t_x,
            that_x,
        })
    }

    /// X is in the operator domain: R_X nonsingular to working precision.
    pub fn in_domain(&self, x: &HermitianMatrix) -> bool {
        x.order() == self.state_dim()
            && linalg::rcond(self.r_x(x).as_matrix()) >= tol::RCOND_MIN
    }

    /// X is in the positivity set: R_X positive definite.
    pub fn in_p(&self, x: &HermitianMatrix) -> bool {
        x.order() == self.state_dim()
            && linalg::is_positive_definite(&self.r_x(x), tol::PD_TOL)
    }

    /// X is in the stability set: in the domain with rho(conj(T_X) T_X) < 1.
    pub fn in_t(&self, x: &HermitianMatrix) -> bool {
        if !self.in_domain(x) {
            return false;
        }
        match self.eval_cache(x) {
            Ok(cache) => matches!(linalg::spectral_radius(&cache.that_x), Ok(rho) if rho < 1.0),
            Err(_) => false,
        }
    }

    /// Normalized residual
    /// ||Z - R(Z)|| / (||Z|| + ||A^H Z~ A|| + ||A^H Z~ B R_Z^{-1} B^H Z~ A|| + ||H||)
    /// in the operator 2-norm. Returns 0 when the denominator vanishes
    /// (only possible for Z = 0, A = 0, H = 0).
    pub fn normalized_residual(&self, z: &HermitianMatrix) -> Result<f64> {
        self.check_dim(z, "normalized_residual")?;
        let ing = self.ingredients(z, "normalized_residual")?;
        let corr = &ing.w.adjoint() * &ing.f_x;
        let img = HermitianMatrix::symmetrize(&(&ing.axa - &corr) + self.h.as_matrix());

        let numerator = linalg::operator_two_norm(&(z.as_matrix() - img.as_matrix()));
        let denominator = linalg::operator_two_norm(z.as_matrix())
            + linalg::operator_two_norm(&ing.axa)
            + linalg::operator_two_norm(&corr)
            + linalg::operator_two_norm(self.h.as_matrix());
        if denominator == 0.0 {
            return Ok(0.0);
        }
        Ok(numerator / denominator)
    }

    /// Residual of the conjugate-Stein rewriting of the Riccati defect: for
    /// any feedback F,
    ///
    /// ```text
    ///   X - R(X) = [X - A_F^H X~ A_F] - (H + F^H R F) + (F - F_X)^H R_X (F - F_X)
    /// ```
    ///
    /// with A_F = A - B F. The identity is exact, so the returned 2-norm is
    /// rounding noise for any X in the domain.
    pub fn stein_identity_residual(
        &self,
        x: &HermitianMatrix,
        f: &ComplexMatrix,
    ) -> Result<f64> {
        self.check_dim(x, "stein_identity_residual")?;
        if f.rows() != self.input_dim() || f.cols() != self.state_dim() {
            return Err(Error::Dimension {
                context: "stein_identity_residual",
                details: format!(
                    "F is {}x{}, expected {}x{}",
                    f.rows(),
                    f.cols(),
                    self.input_dim(),
                    self.state_dim()
                ),
            });
        }
        let ing = self.ingredients(x, "stein_identity_residual")?;
        let img = HermitianMatrix::symmetrize(
            &(&ing.axa - &(&ing.w.adjoint() * &ing.f_x)) + self.h.as_matrix(),
        );
        let lhs = x.as_matrix() - img.as_matrix();

        let a_f = &self.a - &(&self.b * f);
        let xc = x.conj();
        let conj_stein = x.as_matrix() - &(&(&a_f.adjoint() * xc.as_matrix()) * &a_f);
        let h_f = &(&(&f.adjoint() * self.r.as_matrix()) * f) + self.h.as_matrix();
        let df = f - &ing.f_x;
        let k_f = &(&df.adjoint() * ing.r_x.as_matrix()) * &df;
        let rhs = &(&conj_stein - &h_f) + &k_f;

        Ok(linalg::operator_two_norm(&(&lhs - &rhs)))
    }
}
