//! Transformation of a CDARE into an equivalent standard discrete-time
//! algebraic Riccati equation (DARE)
//!
//! ```text
//!     X = A^ H X (I + G^ X)^{-1} A^ + H^
//! ```
//!
//! whose operator equals one double application of the conjugate operator,
//! R^(X) = R(R(X)). Coefficients:
//!
//! ```text
//!     A^ = A~ A - A~ B (R + B^H H~ B)^{-1} B^H H~ A
//!     B^ = [B~  A~ B]          R^ = R~ (+) R_H      (block diagonal)
//!     G^ = G~ + A~ (I + G H~)^{-1} G A~^H = B^ R^^{-1} B^^H
//!     H^ = H + A^H H~ (I + G H~)^{-1} A
//! ```
//!
//! with `M~ = conj(M)` and R_H = R + B^H H~ B, which must be nonsingular.
//! The module also exposes the structural identities tying the two
//! equations together (lifted block form of R^_X and its Schur complement,
//! closed-loop factorization) as computable residuals.

use crate::error::{Error, Result};
use crate::linalg;
use crate::matrix::{ComplexMatrix, HermitianMatrix};
use crate::model::CdareProblem;
use crate::tol;

/// Coefficients of the transformed standard DARE. For an n-state, m-input
/// CDARE the lifted input dimension is 2m.
#[derive(Clone, Debug)]
pub struct DareProblem {
    ahat: ComplexMatrix,
    bhat: ComplexMatrix,
    rhat: HermitianMatrix,
    ghat: HermitianMatrix,
    hhat: HermitianMatrix,
}

/// Feedback data of the transformed DARE at a candidate X.
#[derive(Clone, Debug)]
pub struct DareEvalCache {
    pub x: HermitianMatrix,
    pub rhat_x: HermitianMatrix,
    pub fhat_x: ComplexMatrix,
    /// Closed-loop matrix A^ - B^ F^_X = (I + G^ X)^{-1} A^.
    pub that_d_x: ComplexMatrix,
}

impl DareProblem {
    /// Builds the transformed DARE from a CDARE. Fails if the nonsingularity
    /// assumption det(R_H) != 0 with R_H = R + B^H conj(H) B is violated, or
    /// if I + G conj(H) is singular.
    pub fn transform(p: &CdareProblem) -> Result<Self> {
        let n = p.state_dim();
        let a = p.a();
        let b = p.b();
        let h_conj = p.h().conj();

        let r_h = HermitianMatrix::symmetrize(
            &(&(&b.adjoint() * h_conj.as_matrix()) * b) + p.r().as_matrix(),
        );
        let rc = linalg::rcond(r_h.as_matrix());
        if rc < tol::RCOND_MIN {
            return Err(Error::AssumptionViolation {
                what: format!(
                    "det(R_H) != 0 fails: R_H = R + B^H conj(H) B has rcond {rc:.3e}"
                ),
            });
        }

        // A^ = conj(A) (A - B R_H^{-1} B^H conj(H) A)
        let bha = &(&b.adjoint() * h_conj.as_matrix()) * a;
        let z = linalg::solve_linear(r_h.as_matrix(), &bha)?;
        let ahat = &a.conj() * &(a - &(b * &z));

        let bhat = b.conj().hstack(&(&a.conj() * b))?;
        let zero_off = ComplexMatrix::zeros(p.input_dim(), p.input_dim());
        let rhat = HermitianMatrix::symmetrize(ComplexMatrix::from_blocks_2x2(
            p.r().conj().as_matrix(),
            &zero_off,
            &zero_off,
            r_h.as_matrix(),
        )?);

        let igh = &ComplexMatrix::identity(n) + &(p.g().as_matrix() * h_conj.as_matrix());
        let igh_rcond = linalg::rcond(&igh);
        if igh_rcond < tol::RCOND_MIN {
            return Err(Error::Singular {
                context: "transform: I + G conj(H)".into(),
                rcond: igh_rcond,
            });
        }
        let s = linalg::solve_linear(&igh, p.g().as_matrix())?;
        let ghat = HermitianMatrix::symmetrize(
            &(&(&a.conj() * &s) * &a.conj().adjoint()) + p.g().conj().as_matrix(),
        );
        let t = linalg::solve_linear(&igh, a)?;
        let hhat = HermitianMatrix::symmetrize(
            &(&a.adjoint() * &(h_conj.as_matrix() * &t)) + p.h().as_matrix(),
        );

        Ok(Self {
            ahat,
            bhat,
            rhat,
            ghat,
            hhat,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.ahat.rows()
    }

    /// Lifted input dimension (twice the CDARE's input dimension).
    pub fn input_dim(&self) -> usize {
        self.bhat.cols()
    }

    pub fn ahat(&self) -> &ComplexMatrix {
        &self.ahat
    }

    pub fn bhat(&self) -> &ComplexMatrix {
        &self.bhat
    }

    pub fn rhat(&self) -> &HermitianMatrix {
        &self.rhat
    }

    pub fn ghat(&self) -> &HermitianMatrix {
        &self.ghat
    }

    pub fn hhat(&self) -> &HermitianMatrix {
        &self.hhat
    }

    /// Builds a DareProblem directly from its five coefficients (for files
    /// produced by the transform subcommand; no rederivation is attempted).
    pub fn from_parts(
        ahat: ComplexMatrix,
        bhat: ComplexMatrix,
        rhat: HermitianMatrix,
        ghat: HermitianMatrix,
        hhat: HermitianMatrix,
    ) -> Result<Self> {
        let n = ahat.rows();
        if !ahat.is_square() || bhat.rows() != n || ghat.order() != n || hhat.order() != n {
            return Err(Error::Dimension {
                context: "DareProblem::from_parts",
                details: "coefficient shapes are inconsistent".into(),
            });
        }
        if rhat.order() != bhat.cols() {
            return Err(Error::Dimension {
                context: "DareProblem::from_parts",
                details: format!(
                    "R^ order {} vs lifted input dimension {}",
                    rhat.order(),
                    bhat.cols()
                ),
            });
        }
        Ok(Self {
            ahat,
            bhat,
            rhat,
            ghat,
            hhat,
        })
    }

    /// One application of the transformed operator:
    /// A^H X (I + G^ X)^{-1} A^ + H^, symmetrized.
    pub fn dare_apply(&self, x: &HermitianMatrix) -> Result<HermitianMatrix> {
        let n = self.state_dim();
        if x.order() != n {
            return Err(Error::Dimension {
                context: "dare_apply",
                details: format!("X order {}, expected {n}", x.order()),
            });
        }
        let igx = &ComplexMatrix::identity(n) + &(self.ghat.as_matrix() * x.as_matrix());
        let z = linalg::solve_linear(&igx, &self.ahat).map_err(|e| match e {
            Error::Singular { rcond, .. } => Error::Domain {
                what: format!("dare_apply: I + G^ X singular (rcond {rcond:.3e})"),
            },
            other => other,
        })?;
        let img = &(&self.ahat.adjoint() * &(x.as_matrix() * &z)) + self.hhat.as_matrix();
        Ok(HermitianMatrix::symmetrize(img))
    }

    /// R^_X = R^ + B^^H X B^, symmetrized.
    pub fn rhat_x(&self, x: &HermitianMatrix) -> HermitianMatrix {
        let bxb = &(&self.bhat.adjoint() * x.as_matrix()) * &self.bhat;
        HermitianMatrix::symmetrize(&bxb + self.rhat.as_matrix())
    }

    /// Feedback gain F^_X = R^_X^{-1} B^^H X A^ and closed-loop matrix
    /// T^D_X = A^ - B^ F^_X of the transformed DARE.
    pub fn dare_eval_cache(&self, x: &HermitianMatrix) -> Result<DareEvalCache> {
        if x.order() != self.state_dim() {
            return Err(Error::Dimension {
                context: "dare_eval_cache",
                details: format!("X order {}, expected {}", x.order(), self.state_dim()),
            });
        }
        let rhat_x = self.rhat_x(x);
        let rc = linalg::rcond(rhat_x.as_matrix());
        if rc < tol::RCOND_MIN {
            return Err(Error::Domain {
                what: format!("dare_eval_cache: det(R^_X) ~ 0 (rcond {rc:.3e})"),
            });
        }
        let w = &(&self.bhat.adjoint() * x.as_matrix()) * &self.ahat;
        let fhat_x = linalg::solve_linear(rhat_x.as_matrix(), &w)?;
        let that_d_x = &self.ahat - &(&self.bhat * &fhat_x);
        Ok(DareEvalCache {
            x: x.clone(),
            rhat_x,
            fhat_x,
            that_d_x,
        })
    }

    /// Normalized residual of the transformed DARE, same quotient shape as
    /// the CDARE one but with the hat coefficients and no conjugations.
    pub fn normalized_residual(&self, z: &HermitianMatrix) -> Result<f64> {
        let rhat_z = self.rhat_x(z);
        let rc = linalg::rcond(rhat_z.as_matrix());
        if rc < tol::RCOND_MIN {
            return Err(Error::Domain {
                what: format!("normalized_residual: det(R^_Z) ~ 0 (rcond {rc:.3e})"),
            });
        }
        let za = z.as_matrix() * &self.ahat;
        let w = &self.bhat.adjoint() * &za;
        let f = linalg::solve_linear(rhat_z.as_matrix(), &w)?;
        let aza = &self.ahat.adjoint() * &za;
        let corr = &w.adjoint() * &f;
        let img = HermitianMatrix::symmetrize(&(&aza - &corr) + self.hhat.as_matrix());

        let numerator = linalg::operator_two_norm(&(z.as_matrix() - img.as_matrix()));
        let denominator = linalg::operator_two_norm(z.as_matrix())
            + linalg::operator_two_norm(&aza)
            + linalg::operator_two_norm(&corr)
            + linalg::operator_two_norm(self.hhat.as_matrix());
        if denominator == 0.0 {
            return Ok(0.0);
        }
        Ok(numerator / denominator)
    }
}

/// R(R(X)) through the conjugate operator, the reference route for the
/// transformed DARE. The error distinguishes which application failed.
pub fn double_riccati_apply(p: &CdareProblem, x: &HermitianMatrix) -> Result<HermitianMatrix> {
    let inner = p.riccati_apply(x).map_err(|e| Error::Domain {
        what: format!("double apply, inner application: {e}"),
    })?;
    p.riccati_apply(&inner).map_err(|e| Error::Domain {
        what: format!("double apply, outer application: {e}"),
    })
}

/// Assembles R^_X = R^ + B^^H X B^ blockwise from the original CDARE data
/// without forming B^ or R^:
///
/// ```text
///     [ conj(R_X)           conj(B)^H X conj(A) B              ]
///     [     *        R + B^H (conj(H) + conj(A)^H X conj(A)) B ]
/// ```
pub fn rhat_x_block(p: &CdareProblem, x: &HermitianMatrix) -> HermitianMatrix {
    let b = p.b();
    let b_conj = b.conj();
    let a_conj = p.a().conj();
    let xa = x.as_matrix() * &a_conj;

    let tl = &(&(&b_conj.adjoint() * x.as_matrix()) * &b_conj) + p.r().conj().as_matrix();
    let tr = &(&b_conj.adjoint() * &xa) * b;
    let bl = tr.adjoint();
    let inner = &(&a_conj.adjoint() * &xa) + p.h().conj().as_matrix();
    let br = &(&(&b.adjoint() * &inner) * b) + p.r().as_matrix();

    HermitianMatrix::symmetrize(
        ComplexMatrix::from_blocks_2x2(&tl, &tr, &bl, &br).expect("conforming blocks"),
    )
}

/// Schur complement of the leading m x m block of a 2m x 2m matrix:
/// BR - BL * TL^{-1} * TR.
pub fn schur_complement(m2: &HermitianMatrix, m: usize) -> Result<ComplexMatrix> {
    let full = m2.as_matrix();
    let tl = full.block(0, 0, m, m);
    let tr = full.block(0, m, m, full.cols() - m);
    let bl = full.block(m, 0, full.rows() - m, m);
    let br = full.block(m, m, full.rows() - m, full.cols() - m);
    let z = linalg::solve_linear(&tl, &tr)?;
    Ok(&br - &(&bl * &z))
}

/// 2-norm of T^D_X - conj(T_X) T_{R(X)}, which vanishes identically on the
/// operator domain; at a solution of the CDARE the closed-loop matrices
/// T^D_X and conj(T_X) T_X coincide as well.
pub fn closed_loop_identity_residual(
    p: &CdareProblem,
    d: &DareProblem,
    x: &HermitianMatrix,
) -> Result<f64> {
    let lifted = d.dare_eval_cache(x)?;
    let at_x = p.eval_cache(x)?;
    let rx = p.riccati_apply(x)?;
    let at_rx = p.eval_cache(&rx)?;
    let product = &at_x.t_x.conj() * &at_rx.t_x;
    Ok(linalg::operator_two_norm(&(&lifted.that_d_x - &product)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{rand_complex_matrix, rand_hermitian, Rng};
    use num_complex::Complex64;

    fn scalar_problem(a: f64, b: f64, r: f64, h: f64) -> CdareProblem {
        CdareProblem::new(
            ComplexMatrix::scalar(Complex64::new(a, 0.0)),
            ComplexMatrix::scalar(Complex64::new(b, 0.0)),
            HermitianMatrix::scalar(r),
            HermitianMatrix::scalar(h),
        )
        .unwrap()
    }

    fn random_problem_for_tests(rng: &mut Rng, n: usize, m: usize) -> CdareProblem {
        let mut a = rand_complex_matrix(rng, n, n);
        let rho = linalg::spectral_radius(&(&a.conj() * &a)).unwrap();
        if rho > 0.8 {
            a = a.scale_real((0.8 / rho).sqrt());
        }
        let b = rand_complex_matrix(rng, n, m);
        let r = HermitianMatrix::identity(m);
        // Positive semidefinite H keeps every resolvent in these tests
        // comfortably nonsingular.
        let raw = rand_hermitian(rng, n, 0.6);
        let lmin = linalg::lambda_min(&raw).unwrap();
        let h = raw.add_scaled_identity(-f64::min(lmin, 0.0));
        CdareProblem::new(a, b, r, h).unwrap()
    }

    #[test]
    fn scalar_transform_values() {
        let p = scalar_problem(0.6, 1.0, 1.0, 1.0);
        let d = DareProblem::transform(&p).unwrap();
        assert!((d.ahat().get(0, 0).re - 0.18).abs() < 1e-15);
        assert!((d.ghat().get(0, 0).re - 1.18).abs() < 1e-15);
        assert!((d.hhat().get(0, 0).re - 1.18).abs() < 1e-15);
        // R^ = diag(r, r + b^2 h) = diag(1, 2).
        assert!((d.rhat().get(0, 0).re - 1.0).abs() < 1e-15);
        assert!((d.rhat().get(1, 1).re - 2.0).abs() < 1e-15);
        assert_eq!(d.rhat().get(0, 1), Complex64::ZERO);
    }

    #[test]
    fn transform_collapses_for_zero_h() {
        let mut rng = Rng::new(101);
        let a = rand_complex_matrix(&mut rng, 3, 3);
        let b = rand_complex_matrix(&mut rng, 3, 2);
        let p = CdareProblem::new(
            a.clone(),
            b,
            HermitianMatrix::identity(2),
            HermitianMatrix::zeros(3),
        )
        .unwrap();
        let d = DareProblem::transform(&p).unwrap();
        let aa = &a.conj() * &a;
        assert!((d.ahat() - &aa).frobenius_norm() < 1e-13);
        assert!(d.hhat().frobenius_norm() < 1e-14);
        let g_expect = &(&a.conj() * p.g().as_matrix()) * &a.conj().adjoint();
        let g_expect = &g_expect + p.g().conj().as_matrix();
        assert!((d.ghat().as_matrix() - &g_expect).frobenius_norm() < 1e-12);
    }

    #[test]
    fn transform_without_control() {
        // B = 0 columns: reduces to the conjugate-Stein fixed point form.
        let mut rng = Rng::new(103);
        let a = rand_complex_matrix(&mut rng, 3, 3).scale_real(0.5);
        let h = rand_hermitian(&mut rng, 3, 1.0);
        let p = CdareProblem::new(
            a.clone(),
            ComplexMatrix::zeros(3, 0),
            HermitianMatrix::zeros(0),
            h.clone(),
        )
        .unwrap();
        let d = DareProblem::transform(&p).unwrap();
        assert_eq!(d.input_dim(), 0);
        assert!(d.ghat().frobenius_norm() == 0.0);
        let hhat_expect = &(&(&a.adjoint() * h.conj().as_matrix()) * &a) + h.as_matrix();
        assert!((d.hhat().as_matrix() - &hhat_expect).frobenius_norm() < 1e-12);
    }

    #[test]
    fn transform_rejects_singular_r_h() {
        // r + b^2 h = 1 - 1 = 0.
        let p = scalar_problem(0.6, 1.0, 1.0, -1.0);
        match DareProblem::transform(&p) {
            Err(Error::AssumptionViolation { what }) => {
                assert!(what.contains("det(R_H)"), "message: {what}")
            }
            other => panic!("expected assumption violation, got {other:?}"),
        }
    }

    #[test]
    fn ghat_agrees_with_lifted_kernel_formula() {
        let mut rng = Rng::new(107);
        for _ in 0..10 {
            let p = random_problem_for_tests(&mut rng, 4, 2);
            let d = DareProblem::transform(&p).unwrap();
            // G^ = B^ R^^{-1} B^^H, the other published form.
            let z = linalg::solve_linear(d.rhat().as_matrix(), &d.bhat().adjoint()).unwrap();
            let g2 = d.bhat() * &z;
            let rel = (d.ghat().as_matrix() - &g2).frobenius_norm()
                / f64::max(1.0, g2.frobenius_norm());
            assert!(rel <= 1e-10, "kernel forms disagree: {rel:.3e}");
        }
    }

    #[test]
    fn dare_apply_examples() {
        let p = scalar_problem(0.6, 1.0, 1.0, 1.0);
        let d = DareProblem::transform(&p).unwrap();

        let img = d.dare_apply(&HermitianMatrix::zeros(1)).unwrap();
        assert!((img.get(0, 0).re - 1.18).abs() < 1e-15);

        // The maximal scalar root is a fixed point of the transformed DARE.
        let u = 1.0 - 0.36 - 1.0;
        let x_max = (-u + (u * u + 4.0f64).sqrt()) / 2.0;
        let img = d.dare_apply(&HermitianMatrix::scalar(x_max)).unwrap();
        assert!((img.get(0, 0).re - x_max).abs() < 1e-14);

        // G^ = 0 reduces to a Stein image.
        let mut rng = Rng::new(109);
        let a = rand_complex_matrix(&mut rng, 3, 3).scale_real(0.4);
        let h = rand_hermitian(&mut rng, 3, 1.0);
        let p0 = CdareProblem::new(
            a,
            ComplexMatrix::zeros(3, 0),
            HermitianMatrix::zeros(0),
            h,
        )
        .unwrap();
        let d0 = DareProblem::transform(&p0).unwrap();
        let x = rand_hermitian(&mut rng, 3, 1.0);
        let img = d0.dare_apply(&x).unwrap();
        let expect = &(&(&d0.ahat().adjoint() * x.as_matrix()) * d0.ahat())
            + d0.hhat().as_matrix();
        assert!((img.as_matrix() - &expect).frobenius_norm() < 1e-12);
    }

    #[test]
    fn double_apply_scalar_trace() {
        let p = scalar_problem(0.6, 1.0, 1.0, 1.0);
        let r1 = 0.36 * 2.0 / 3.0 + 1.0; // 1.24
        let r2 = 0.36 * r1 / (1.0 + r1) + 1.0;
        let img = double_riccati_apply(&p, &HermitianMatrix::scalar(2.0)).unwrap();
        assert!((img.get(0, 0).re - r2).abs() < 1e-14);

        // Fixed points of R are fixed points of the double application.
        let u = 1.0 - 0.36 - 1.0;
        let x_max = (-u + (u * u + 4.0f64).sqrt()) / 2.0;
        let img = double_riccati_apply(&p, &HermitianMatrix::scalar(x_max)).unwrap();
        assert!((img.get(0, 0).re - x_max).abs() < 1e-13);

        // X = 0 gives R(H).
        let rh = p.riccati_apply(p.h()).unwrap();
        let img = double_riccati_apply(&p, &HermitianMatrix::zeros(1)).unwrap();
        assert!((img.get(0, 0).re - rh.get(0, 0).re).abs() < 1e-14);
    }

    #[test]
    fn transformed_operator_equals_double_application() {
        let mut rng = Rng::new(113);
        for _ in 0..20 {
            let p = random_problem_for_tests(&mut rng, 5, 2);
            let d = DareProblem::transform(&p).unwrap();
            let x = {
                let raw = rand_hermitian(&mut rng, 5, 0.5);
                let lmin = linalg::lambda_min(&raw).unwrap();
                raw.add_scaled_identity(-f64::min(lmin, 0.0))
            };
            let via_dare = d.dare_apply(&x).unwrap();
            let via_double = double_riccati_apply(&p, &x).unwrap();
            let rel = (via_dare.as_matrix() - via_double.as_matrix()).frobenius_norm()
                / f64::max(1.0, via_double.frobenius_norm());
            assert!(rel <= 1e-10, "operator equivalence broke: {rel:.3e}");
        }
    }

    #[test]
    fn block_assembly_matches_lifted_quadratic_term() {
        let mut rng = Rng::new(127);
        let p = random_problem_for_tests(&mut rng, 4, 2);
        let d = DareProblem::transform(&p).unwrap();

        // X = 0 collapses to the block diagonal R^.
        let at_zero = rhat_x_block(&p, &HermitianMatrix::zeros(4));
        assert!((at_zero.as_matrix() - d.rhat().as_matrix()).frobenius_norm() < 1e-13);

        for _ in 0..10 {
            let x = rand_hermitian(&mut rng, 4, 0.8);
            let direct = rhat_x_block(&p, &x);
            let lifted = d.rhat_x(&x);
            assert!(
                (direct.as_matrix() - lifted.as_matrix()).frobenius_norm()
                    <= 1e-12 * f64::max(1.0, lifted.frobenius_norm())
            );
        }
    }

    #[test]
    fn schur_complement_recovers_shifted_weighting_of_image() {
        // Schur complement of the lifted quadratic term w.r.t. its leading
        // block equals R + B^H conj(R(X)) B for every X in the domain, and
        // therefore equals R_X itself exactly at solutions.
        let mut rng = Rng::new(131);
        for _ in 0..10 {
            let p = random_problem_for_tests(&mut rng, 4, 2);
            let x = rand_hermitian(&mut rng, 4, 0.8);
            if !p.in_domain(&x) {
                continue;
            }
            let block = rhat_x_block(&p, &x);
            let sc = schur_complement(&block, 2).unwrap();
            let rx_of_image = p.r_x(&p.riccati_apply(&x).unwrap());
            let rel = (&sc - rx_of_image.as_matrix()).frobenius_norm()
                / f64::max(1.0, rx_of_image.frobenius_norm());
            assert!(rel <= 1e-10, "Schur identity broke: {rel:.3e}");
        }

        // Scalar family at the maximal root: image equals X, so the Schur
        // complement reproduces R_X.
        let p = scalar_problem(0.6, 1.0, 1.0, 1.0);
        let u = 1.0 - 0.36 - 1.0;
        let x_max = (-u + (u * u + 4.0f64).sqrt()) / 2.0;
        let xm = HermitianMatrix::scalar(x_max);
        let sc = schur_complement(&rhat_x_block(&p, &xm), 1).unwrap();
        assert!((sc.get(0, 0).re - (1.0 + x_max)).abs() < 1e-12);
        // Scalar block values: top-left entry is r + x.
        let block = rhat_x_block(&p, &xm);
        assert!((block.get(0, 0).re - (1.0 + x_max)).abs() < 1e-14);
    }

    #[test]
    fn dare_eval_cache_values_and_resolvent_agreement() {
        let p = scalar_problem(0.6, 1.0, 1.0, 1.0);
        let d = DareProblem::transform(&p).unwrap();

        let cache = d.dare_eval_cache(&HermitianMatrix::zeros(1)).unwrap();
        assert_eq!(cache.fhat_x.frobenius_norm(), 0.0);
        assert!((&cache.that_d_x - d.ahat()).frobenius_norm() < 1e-15);

        let u = 1.0 - 0.36 - 1.0;
        let x_max = (-u + (u * u + 4.0f64).sqrt()) / 2.0;
        let cache = d.dare_eval_cache(&HermitianMatrix::scalar(x_max)).unwrap();
        let expect = 0.18 / (1.0 + 1.18 * x_max);
        assert!((cache.that_d_x.get(0, 0).re - expect).abs() < 1e-12);
        // Equals the conjugate-squared closed-loop radius of the CDARE.
        let rho_cdare = 0.36 / (1.0 + x_max).powi(2);
        assert!((cache.that_d_x.get(0, 0).re - rho_cdare).abs() < 1e-12);

        let mut rng = Rng::new(137);
        for _ in 0..10 {
            let p = random_problem_for_tests(&mut rng, 4, 2);
            let d = DareProblem::transform(&p).unwrap();
            let x = rand_hermitian(&mut rng, 4, 0.7);
            let cache = match d.dare_eval_cache(&x) {
                Ok(c) => c,
                Err(_) => continue,
            };
            let igx = &ComplexMatrix::identity(4) + &(d.ghat().as_matrix() * x.as_matrix());
            let resolvent = match linalg::solve_linear(&igx, d.ahat()) {
                Ok(t) => t,
                Err(_) => continue,
            };
            assert!(
                linalg::operator_two_norm(&(&cache.that_d_x - &resolvent)) <= 1e-10,
                "closed-loop forms disagree"
            );
        }
    }

    #[test]
    fn closed_loop_factorization() {
        // Scalar x = 2: conj(T_2) T_{R(2)} = (0.6/3)(0.6/2.24) and the
        // lifted closed loop is 0.18/(1 + 1.18*2); both equal 3/56.
        let p = scalar_problem(0.6, 1.0, 1.0, 1.0);
        let d = DareProblem::transform(&p).unwrap();
        let x2 = HermitianMatrix::scalar(2.0);
        let resid = closed_loop_identity_residual(&p, &d, &x2).unwrap();
        assert!(resid <= 1e-14);
        let cache = d.dare_eval_cache(&x2).unwrap();
        let expect = (0.6 / 3.0) * (0.6 / 2.24);
        assert!((cache.that_d_x.get(0, 0).re - expect).abs() < 1e-14);
        assert!((expect - 0.18 / 3.36).abs() < 1e-15);

        // Random problems: identity holds on the whole domain.
        let mut rng = Rng::new(139);
        for _ in 0..12 {
            let p = random_problem_for_tests(&mut rng, 5, 2);
            let d = DareProblem::transform(&p).unwrap();
            let x = rand_hermitian(&mut rng, 5, 0.6);
            if !p.in_domain(&x) {
                continue;
            }
            let resid = closed_loop_identity_residual(&p, &d, &x).unwrap();
            assert!(resid <= 1e-10, "closed-loop identity residual {resid:.3e}");
        }

        // At a fixed point the two closed loops coincide.
        let u = 1.0 - 0.36 - 1.0;
        let x_max = (-u + (u * u + 4.0f64).sqrt()) / 2.0;
        let xm = HermitianMatrix::scalar(x_max);
        let lifted = d.dare_eval_cache(&xm).unwrap();
        let direct = p.eval_cache(&xm).unwrap();
        assert!(
            linalg::operator_two_norm(&(&lifted.that_d_x - &direct.that_x)) <= 1e-10
        );
    }
}
