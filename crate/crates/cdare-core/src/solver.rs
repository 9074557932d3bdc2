//! Iteration engines.
//!
//! * [`fpi_solve`]: plain fixed-point iteration X_{k+1} = R(X_k) on the
//!   CDARE.
//! * [`fpi_hat_solve`]: the same iteration stepped by the double application
//!   R(R(.)), i.e. the even-indexed subsequence.
//! * [`afpi_solve`]: accelerated fixed-point iteration of order r on the
//!   transformed DARE. One outer step advances the coefficient triple
//!   (A_k, G_k, H_k) so that the recovered iterate equals r^k plain DARE
//!   steps from the start, using the binary flow operator and its
//!   composition law F(X_i, X_j) = X_{i+j+1}.
//! * [`make_initial`]: constructs a dominating start X_0 with
//!   C_{A_F}(X_0) = H_F + shift*I >= H_F from a stabilizing feedback F, by a
//!   conjugate-Stein solve.
//!
//! Every solve is single-threaded and deterministic; reports are immutable
//! values that can be moved across threads freely.

use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::linalg;
use crate::matrix::{ComplexMatrix, HermitianMatrix};
use crate::model::CdareProblem;
use crate::tol;
use crate::transform::DareProblem;

/// Coefficient triple advanced by the discrete-flow operator. For the
/// transformed DARE the start is (A^, G^, H^).
#[derive(Clone, Debug)]
pub struct FlowTriple {
    pub a: ComplexMatrix,
    pub g: HermitianMatrix,
    pub h: HermitianMatrix,
}

impl FlowTriple {
    pub fn from_dare(d: &DareProblem) -> Self {
        Self {
            a: d.ahat().clone(),
            g: d.ghat().clone(),
            h: d.hhat().clone(),
        }
    }

    pub fn dim(&self) -> usize {
        self.a.rows()
    }
}

/// Binary flow step
///
/// ```text
///   F(X_k, X_0) = ( A_0 D A_k,
///                   G_0 + A_0 D G_k A_0^H,
///                   H_k + A_k^H H_0 D A_k ),     D = (I + G_k H_0)^{-1},
/// ```
///
/// the composition rule under which the triple with subscript i+j+1 arises
/// from the triples with subscripts i and j.
pub fn flow_step(xk: &FlowTriple, x0: &FlowTriple) -> Result<FlowTriple> {
    let n = xk.dim();
    let m = &ComplexMatrix::identity(n) + &(xk.g.as_matrix() * x0.h.as_matrix());
    // One factorization for both right-hand sides.
    let rhs = xk.a.hstack(xk.g.as_matrix())?;
    let z = linalg::solve_linear(&m, &rhs).map_err(|e| match e {
        Error::Singular { rcond, .. } => Error::Singular {
            context: format!("flow step: I + G*H singular (rcond {rcond:.3e})"),
            rcond,
        },
        other => other,
    })?;
    let da = z.block(0, 0, n, n);
    let dg = z.block(0, n, n, n);

    let a_next = &x0.a * &da;
    let g_next = HermitianMatrix::symmetrize(
        &(&(&x0.a * &dg) * &x0.a.adjoint()) + x0.g.as_matrix(),
    );
    let h_next = HermitianMatrix::symmetrize(
        &(&xk.a.adjoint() * &(x0.h.as_matrix() * &da)) + xk.h.as_matrix(),
    );
    Ok(FlowTriple {
        a: a_next,
        g: g_next,
        h: h_next,
    })
}

/// r-fold flow composition: the identity for r = 1, and
/// F_{l+1}(X) = F(X, F_l(X)) otherwise. Applied to the triple with
/// subscript r^k - 1 this advances it to subscript r^{k+1} - 1. A breakdown
/// reports the inner step index; callers supply the outer index.
pub fn flow_compose_r(x: &FlowTriple, r: usize) -> Result<FlowTriple> {
    if r < 1 {
        return Err(Error::Parameter("flow composition order must be >= 1".into()));
    }
    let mut acc = x.clone();
    for inner in 1..r {
        acc = flow_step(x, &acc).map_err(|e| match e {
            Error::Singular { .. } => Error::FlowBreakdown { outer: 0, inner },
            other => other,
        })?;
    }
    Ok(acc)
}

/// Closed-form iterate recovery: H_k + A_k^H Y_0 (I + G_k Y_0)^{-1} A_k,
/// which equals k+1 plain DARE steps from Y_0.
pub fn flow_eval(t: &FlowTriple, y0: &HermitianMatrix) -> Result<HermitianMatrix> {
    let n = t.dim();
    let m = &ComplexMatrix::identity(n) + &(t.g.as_matrix() * y0.as_matrix());
    let z = linalg::solve_linear(&m, &t.a).map_err(|e| match e {
        Error::Singular { rcond, .. } => Error::Singular {
            context: format!("flow recovery: I + G Y_0 singular (rcond {rcond:.3e})"),
            rcond,
        },
        other => other,
    })?;
    let img = &(&t.a.adjoint() * &(y0.as_matrix() * &z)) + t.h.as_matrix();
    Ok(HermitianMatrix::symmetrize(img))
}

/// Solver knobs shared by all iterations.
#[derive(Clone, Debug)]
pub struct SolverConfig {
    /// Stop once the normalized residual drops to this value.
    pub nres_tol: f64,
    /// Maximum number of (outer) steps.
    pub max_iters: usize,
    /// Acceleration order for the accelerated iteration; must be >= 2 there,
    /// ignored by the plain iterations.
    pub r: usize,
    /// Track lambda_min(X_k - X_{k+1}) each step.
    pub monotonicity_check: bool,
    /// Stop with a stagnation status after this many consecutive checks
    /// without at least 1% residual improvement.
    pub stagnation_window: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            nres_tol: tol::DEFAULT_NRES_TOL,
            max_iters: 1000,
            r: 2,
            monotonicity_check: true,
            stagnation_window: tol::DEFAULT_STAGNATION_WINDOW,
        }
    }
}

impl SolverConfig {
    fn validate(&self, needs_order: bool) -> Result<()> {
        if !self.nres_tol.is_finite() || self.nres_tol <= 0.0 {
            return Err(Error::Parameter("nres_tol must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::Parameter("max_iters must be >= 1".into()));
        }
        if self.stagnation_window == 0 {
            return Err(Error::Parameter("stagnation_window must be >= 1".into()));
        }
        if needs_order && self.r < 2 {
            return Err(Error::Parameter(
                "acceleration order r must be >= 2".into(),
            ));
        }
        Ok(())
    }
}

/// Terminal state of a solve. Iteration-level breakdowns are reported here
/// rather than as errors, so the partial history stays available.
#[derive(Clone, Debug, PartialEq)]
pub enum SolveStatus {
    Converged,
    MaxIters,
    Stagnated,
    DomainFailure { at_iteration: usize, message: String },
    FlowBreakdown { outer: usize, inner: usize },
    RecoveryFailure { outer: usize, message: String },
}

impl SolveStatus {
    pub fn label(&self) -> &'static str {
        match self {
            SolveStatus::Converged => "converged",
            SolveStatus::MaxIters => "max-iters",
            SolveStatus::Stagnated => "stagnated",
            SolveStatus::DomainFailure { .. } => "domain-failure",
            SolveStatus::FlowBreakdown { .. } => "flow-breakdown",
            SolveStatus::RecoveryFailure { .. } => "recovery-failure",
        }
    }
}

/// One row of the convergence history.
#[derive(Clone, Debug)]
pub struct IterateRecord {
    pub k: usize,
    pub nres: f64,
    /// Spectral radius of the conjugate-squared closed loop at this iterate,
    /// when it could be evaluated.
    pub rho_that: Option<f64>,
    /// lambda_min(X_k - X_{k+1}); present when the monotonicity check is on
    /// and the next iterate exists.
    pub min_eig_step_diff: Option<f64>,
    pub elapsed_s: f64,
}

/// Full account of one solve: per-step history, terminal status, the last
/// iterate, and the wall time.
#[derive(Clone, Debug)]
pub struct SolveReport {
    pub iterates: Vec<IterateRecord>,
    pub status: SolveStatus,
    pub solution: HermitianMatrix,
    pub wall_time: Duration,
}

impl SolveReport {
    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }

    /// Number of steps taken (the index of the last recorded iterate).
    pub fn iterations(&self) -> usize {
        self.iterates.last().map_or(0, |r| r.k)
    }

    pub fn final_nres(&self) -> Option<f64> {
        self.iterates.last().map(|r| r.nres)
    }

    /// True when every recorded step-difference margin clears
    /// -MONO_TOL * max(1, ||X_k||-scale); margins are recorded only when the
    /// monotonicity check was enabled.
    pub fn monotone_within(&self, scale: f64) -> bool {
        self.iterates
            .iter()
            .filter_map(|r| r.min_eig_step_diff)
            .all(|m| m >= -tol::MONO_TOL * scale.max(1.0))
    }
}

/// Shared iteration driver. `residual` and `rho` evaluate diagnostics at the
/// current iterate; `advance` produces the next iterate or a terminal status.
struct Loop<'c> {
    cfg: &'c SolverConfig,
    start: Instant,
    iterates: Vec<IterateRecord>,
    best_nres: f64,
    stall: usize,
}

impl<'c> Loop<'c> {
    fn new(cfg: &'c SolverConfig) -> Self {
        Self {
            cfg,
            start: Instant::now(),
            iterates: Vec::new(),
            best_nres: f64::INFINITY,
            stall: 0,
        }
    }

    /// Records diagnostics for iterate k and decides whether to stop.
    fn observe(&mut self, k: usize, nres: f64, rho: Option<f64>) -> Option<SolveStatus> {
        self.iterates.push(IterateRecord {
            k,
            nres,
            rho_that: rho,
            min_eig_step_diff: None,
            elapsed_s: self.start.elapsed().as_secs_f64(),
        });
        if nres <= self.cfg.nres_tol {
            return Some(SolveStatus::Converged);
        }
        if nres > 0.99 * self.best_nres {
            self.stall += 1;
        } else {
            self.stall = 0;
        }
        self.best_nres = self.best_nres.min(nres);
        if self.stall >= self.cfg.stagnation_window {
            return Some(SolveStatus::Stagnated);
        }
        if k >= self.cfg.max_iters {
            return Some(SolveStatus::MaxIters);
        }
        None
    }

    fn set_margin(&mut self, margin: f64) {
        if let Some(last) = self.iterates.last_mut() {
            last.min_eig_step_diff = Some(margin);
        }
    }

    fn finish(self, status: SolveStatus, solution: HermitianMatrix) -> SolveReport {
        SolveReport {
            iterates: self.iterates,
            status,
            solution,
            wall_time: self.start.elapsed(),
        }
    }
}

fn step_margin(current: &HermitianMatrix, next: &HermitianMatrix) -> Option<f64> {
    linalg::lambda_min(&current.sub(next)).ok()
}

fn diverged(x: &HermitianMatrix, x0_norm: f64) -> bool {
    x.frobenius_norm() > tol::DIVERGENCE_FACTOR * (1.0 + x0_norm)
}

fn fpi_driver(
    p: &CdareProblem,
    x0: &HermitianMatrix,
    cfg: &SolverConfig,
    double_step: bool,
) -> Result<SolveReport> {
    cfg.validate(false)?;
    if x0.order() != p.state_dim() {
        return Err(Error::Dimension {
            context: "fpi_solve",
            details: format!("X0 order {}, expected {}", x0.order(), p.state_dim()),
        });
    }
    let mut driver = Loop::new(cfg);
    let x0_norm = x0.frobenius_norm();
    let mut x = x0.clone();
    let mut k = 0usize;
    loop {
        // Diagnostics and the image of the current iterate come from one
        // evaluation of the operator internals.
        let step = match p.riccati_step(&x) {
            Ok(s) => s,
            Err(e) => {
                let status = SolveStatus::DomainFailure {
                    at_iteration: k,
                    message: e.to_string(),
                };
                return Ok(driver.finish(status, x));
            }
        };
        if let Some(status) = driver.observe(k, step.nres, step.rho_that) {
            return Ok(driver.finish(status, x));
        }

        let next = if double_step {
            match p.riccati_apply(&step.image) {
                Ok(v) => v,
                Err(e) => {
                    let status = SolveStatus::DomainFailure {
                        at_iteration: k,
                        message: e.to_string(),
                    };
                    return Ok(driver.finish(status, x));
                }
            }
        } else {
            step.image
        };
        if cfg.monotonicity_check {
            if let Some(m) = step_margin(&x, &next) {
                driver.set_margin(m);
            }
        }
        if diverged(&next, x0_norm) {
            let status = SolveStatus::DomainFailure {
                at_iteration: k + 1,
                message: "iterate norm exceeded the divergence guard".into(),
            };
            return Ok(driver.finish(status, next));
        }
        x = next;
        k += 1;
    }
}

/// Plain fixed-point iteration X_{k+1} = R(X_k) from X_0, with per-step
/// normalized residual, closed-loop spectral radius and (optionally) the
/// nonincreasing-step margin lambda_min(X_k - X_{k+1}). Iterates leaving the
/// operator domain end the run with a domain-failure status, not an error.
pub fn fpi_solve(
    p: &CdareProblem,
    x0: &HermitianMatrix,
    cfg: &SolverConfig,
) -> Result<SolveReport> {
    fpi_driver(p, x0, cfg, false)
}

/// Fixed-point iteration stepped by the double application
/// Y_{k+1} = R(R(Y_k)); its iterates are the even-indexed subsequence of the
/// plain iteration started at the same point.
pub fn fpi_hat_solve(
    p: &CdareProblem,
    y0: &HermitianMatrix,
    cfg: &SolverConfig,
) -> Result<SolveReport> {
    fpi_driver(p, y0, cfg, true)
}

/// Accelerated fixed-point iteration of order cfg.r on the transformed DARE.
///
/// Outer step k advances the coefficient triple from subscript r^k - 1 to
/// r^{k+1} - 1 by r-1 flow steps (the inner loop builds the partial
/// compositions), then recovers
/// Y^_{k+1} = A_{k+1}^H Y^_0 (I + G_{k+1} Y^_0)^{-1} A_{k+1} + H_{k+1},
/// which equals r^{k+1} plain DARE steps from Y^_0.
///
/// When the originating CDARE is supplied, the stopping residual and the
/// reported closed-loop radius are measured against it (the two equations
/// share their maximal solution); otherwise against the DARE itself.
pub fn afpi_solve(
    d: &DareProblem,
    origin: Option<&CdareProblem>,
    y0: &HermitianMatrix,
    cfg: &SolverConfig,
) -> Result<SolveReport> {
    cfg.validate(true)?;
    if y0.order() != d.state_dim() {
        return Err(Error::Dimension {
            context: "afpi_solve",
            details: format!("Y0 order {}, expected {}", y0.order(), d.state_dim()),
        });
    }
    let nres_of = |z: &HermitianMatrix| match origin {
        Some(p) => p.normalized_residual(z),
        None => d.normalized_residual(z),
    };
    let rho_of = |z: &HermitianMatrix| match origin {
        Some(p) => p
            .eval_cache(z)
            .ok()
            .and_then(|c| linalg::spectral_radius(&c.that_x).ok()),
        None => d
            .dare_eval_cache(z)
            .ok()
            .and_then(|c| linalg::spectral_radius(&c.that_d_x).ok()),
    };

    let mut driver = Loop::new(cfg);
    let y0_norm = y0.frobenius_norm();
    let mut triple = FlowTriple::from_dare(d);
    let mut y = y0.clone();
    let mut k = 0usize;
    loop {
        let nres = match nres_of(&y) {
            Ok(v) => v,
            Err(e) => {
                let status = SolveStatus::DomainFailure {
                    at_iteration: k,
                    message: e.to_string(),
                };
                return Ok(driver.finish(status, y));
            }
        };
        if let Some(status) = driver.observe(k, nres, rho_of(&y)) {
            return Ok(driver.finish(status, y));
        }

        triple = match flow_compose_r(&triple, cfg.r) {
            Ok(t) => t,
            Err(Error::FlowBreakdown { inner, .. }) => {
                return Ok(driver.finish(SolveStatus::FlowBreakdown { outer: k, inner }, y));
            }
            Err(e) => {
                let status = SolveStatus::DomainFailure {
                    at_iteration: k,
                    message: e.to_string(),
                };
                return Ok(driver.finish(status, y));
            }
        };
        let next = match flow_eval(&triple, y0) {
            Ok(v) => v,
            Err(e) => {
                let status = SolveStatus::RecoveryFailure {
                    outer: k,
                    message: e.to_string(),
                };
                return Ok(driver.finish(status, y));
            }
        };
        if cfg.monotonicity_check {
            if let Some(m) = step_margin(&y, &next) {
                driver.set_margin(m);
            }
        }
        if diverged(&next, y0_norm) {
            let status = SolveStatus::DomainFailure {
                at_iteration: k + 1,
                message: "iterate norm exceeded the divergence guard".into(),
            };
            return Ok(driver.finish(status, next));
        }
        y = next;
        k += 1;
    }
}

/// Builds a dominating initial iterate from a feedback F with
/// rho(conj(A - BF)(A - BF)) < 1: solves the conjugate Stein equation
/// C_{A_F}(X_0) = H + F^H R F + shift*I, so C_{A_F}(X_0) >= H_F by
/// construction and the fixed-point iteration decreases from X_0.
pub fn make_initial(
    p: &CdareProblem,
    f: &ComplexMatrix,
    shift: f64,
) -> Result<HermitianMatrix> {
    if f.rows() != p.input_dim() || f.cols() != p.state_dim() {
        return Err(Error::Dimension {
            context: "make_initial",
            details: format!(
                "F is {}x{}, expected {}x{}",
                f.rows(),
                f.cols(),
                p.input_dim(),
                p.state_dim()
            ),
        });
    }
    if shift.is_nan() || shift < 0.0 {
        return Err(Error::Parameter("shift must be nonnegative".into()));
    }
    let a_f = p.a() - &(p.b() * f);
    let rho = linalg::spectral_radius(&(&a_f.conj() * &a_f))?;
    if rho >= 1.0 - tol::STAB_MARGIN {
        return Err(Error::Unstable {
            context: "make_initial: rho(conj(A-BF)(A-BF)) >= 1; supply a stabilizing feedback F"
                .into(),
            rho,
        });
    }
    let h_f = HermitianMatrix::symmetrize(
        &(&(&f.adjoint() * p.r().as_matrix()) * f) + p.h().as_matrix(),
    )
    .add_scaled_identity(shift);
    linalg::solve_conjugate_stein(&a_f, &h_f)
}

/// make_initial with the default zero feedback and no shift.
pub fn make_initial_default(p: &CdareProblem) -> Result<HermitianMatrix> {
    make_initial(p, &ComplexMatrix::zeros(p.input_dim(), p.state_dim()), 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{rand_complex_matrix, rand_hermitian, Rng};
    use crate::transform::double_riccati_apply;
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

    fn scalar_x_max(a: f64, g: f64, h: f64) -> f64 {
        let u = 1.0 - a * a - g * h;
        (-u + (u * u + 4.0 * g * h).sqrt()) / (2.0 * g)
    }

    /// Random problem with psd H so every flow denominator stays regular.
    fn random_pd_problem(rng: &mut Rng, n: usize, m: usize) -> CdareProblem {
        let mut a = rand_complex_matrix(rng, n, n);
        let rho = linalg::spectral_radius(&(&a.conj() * &a)).unwrap();
        if rho > 0.8 {
            a = a.scale_real((0.8 / rho).sqrt());
        }
        let b = rand_complex_matrix(rng, n, m);
        let raw = rand_hermitian(rng, n, 0.6);
        let lmin = linalg::lambda_min(&raw).unwrap();
        let h = raw.add_scaled_identity(-f64::min(lmin, 0.0));
        CdareProblem::new(a, b, HermitianMatrix::identity(m), h).unwrap()
    }

    #[test]
    fn fpi_scalar_trace_and_limit() {
        let p = scalar_problem(0.6, 1.0, 1.0, 1.0);
        let cfg = SolverConfig {
            max_iters: 200,
            ..Default::default()
        };
        let report = fpi_solve(&p, &HermitianMatrix::scalar(2.0), &cfg).unwrap();
        assert!(report.converged());

        // X1 = 1.24 and X2 = R(1.24), reconstructed step by step.
        let x1 = p.riccati_apply(&HermitianMatrix::scalar(2.0)).unwrap();
        assert!((x1.get(0, 0).re - 1.24).abs() < 1e-14);
        let x2 = p.riccati_apply(&x1).unwrap();
        let x2_expect = 0.36 * 1.24 / 2.24 + 1.0;
        assert!((x2.get(0, 0).re - x2_expect).abs() < 1e-14);

        let x_max = scalar_x_max(0.6, 1.0, 1.0);
        assert!((report.solution.get(0, 0).re - x_max).abs() <= 1e-12);
        // Residual column is recorded and strictly below tolerance at the end.
        assert!(report.final_nres().unwrap() <= cfg.nres_tol);
    }

    #[test]
    fn fpi_converges_immediately_at_solution() {
        let p = scalar_problem(0.6, 1.0, 1.0, 1.0);
        let xm = HermitianMatrix::scalar(scalar_x_max(0.6, 1.0, 1.0));
        let report = fpi_solve(&p, &xm, &SolverConfig::default()).unwrap();
        assert!(report.converged());
        assert_eq!(report.iterations(), 0);
    }

    #[test]
    fn fpi_hat_is_even_subsequence() {
        let p = scalar_problem(0.6, 1.0, 1.0, 1.0);
        let cfg = SolverConfig {
            max_iters: 6,
            nres_tol: 1e-30,
            stagnation_window: 100,
            ..Default::default()
        };
        let hat = fpi_hat_solve(&p, &HermitianMatrix::scalar(2.0), &cfg).unwrap();

        // Plain chain for comparison.
        let mut x = HermitianMatrix::scalar(2.0);
        let mut plain = vec![x.get(0, 0).re];
        for _ in 0..12 {
            x = p.riccati_apply(&x).unwrap();
            plain.push(x.get(0, 0).re);
        }
        // Reconstruct hat iterates by replaying the double step.
        let mut y = HermitianMatrix::scalar(2.0);
        for k in 0..=6 {
            assert!(
                (y.get(0, 0).re - plain[2 * k]).abs() <= 1e-12,
                "hat iterate {k} diverged from X_{}",
                2 * k
            );
            y = double_riccati_apply(&p, &y).unwrap();
        }
        // First hat step from the report equals X_2.
        assert!((hat.iterates[1].nres
            - p.normalized_residual(&HermitianMatrix::scalar(plain[2])).unwrap())
        .abs()
            <= 1e-14);
    }

    #[test]
    fn flow_step_trivial_second_argument() {
        // H_0 = 0 makes D the identity.
        let mut rng = Rng::new(211);
        let n = 4;
        let xk = FlowTriple {
            a: rand_complex_matrix(&mut rng, n, n),
            g: rand_hermitian(&mut rng, n, 1.0),
            h: rand_hermitian(&mut rng, n, 1.0),
        };
        let x0 = FlowTriple {
            a: rand_complex_matrix(&mut rng, n, n),
            g: rand_hermitian(&mut rng, n, 1.0),
            h: HermitianMatrix::zeros(n),
        };
        let next = flow_step(&xk, &x0).unwrap();
        assert!((&next.a - &(&x0.a * &xk.a)).frobenius_norm() < 1e-12);
        let g_expect = &(&(&x0.a * xk.g.as_matrix()) * &x0.a.adjoint()) + x0.g.as_matrix();
        assert!((next.g.as_matrix() - &g_expect).frobenius_norm() < 1e-12);
        assert!((next.h.as_matrix() - xk.h.as_matrix()).frobenius_norm() < 1e-12);
    }

    #[test]
    fn flow_step_scalar_self_application() {
        // Self-apply the running transformed triple (0.18, 1.18, 1.18).
        let t = FlowTriple {
            a: ComplexMatrix::scalar(Complex64::new(0.18, 0.0)),
            g: HermitianMatrix::scalar(1.18),
            h: HermitianMatrix::scalar(1.18),
        };
        let next = flow_step(&t, &t).unwrap();
        let delta = 1.0 / (1.0 + 1.18 * 1.18);
        assert!((next.a.get(0, 0).re - 0.18 * delta * 0.18).abs() < 1e-15);
        assert!((next.g.get(0, 0).re - (1.18 + 0.18 * delta * 1.18 * 0.18)).abs() < 1e-15);
        assert!((next.h.get(0, 0).re - (1.18 + 0.18 * 1.18 * delta * 0.18)).abs() < 1e-15);
    }

    #[test]
    fn flow_composition_law() {
        let mut rng = Rng::new(223);
        for _ in 0..6 {
            let p = random_pd_problem(&mut rng, 4, 2);
            let d = DareProblem::transform(&p).unwrap();
            let base = FlowTriple::from_dare(&d);

            // Unary chain X_{k+1} = F(X_k, X_0), subscripts 0..=7.
            let mut chain = vec![base.clone()];
            for _ in 0..7 {
                chain.push(flow_step(chain.last().unwrap(), &base).unwrap());
            }
            for i in 0..chain.len() {
                for j in 0..chain.len() {
                    if i + j + 1 >= chain.len() {
                        continue;
                    }
                    let combined = flow_step(&chain[i], &chain[j]).unwrap();
                    let expect = &chain[i + j + 1];
                    let scale = f64::max(1.0, expect.a.frobenius_norm());
                    assert!(
                        (&combined.a - &expect.a).frobenius_norm() <= 1e-10 * scale,
                        "flow law failed on A at (i={i}, j={j})"
                    );
                    let gscale = f64::max(1.0, expect.g.frobenius_norm());
                    assert!(
                        (combined.g.as_matrix() - expect.g.as_matrix()).frobenius_norm()
                            <= 1e-10 * gscale
                    );
                    let hscale = f64::max(1.0, expect.h.frobenius_norm());
                    assert!(
                        (combined.h.as_matrix() - expect.h.as_matrix()).frobenius_norm()
                            <= 1e-10 * hscale
                    );
                }
            }

            // Composition operator against the same chain.
            let f2 = flow_compose_r(&base, 2).unwrap();
            assert!((&f2.a - &chain[1].a).frobenius_norm() <= 1e-10);
            let f4 = flow_compose_r(&base, 4).unwrap();
            assert!(
                (f4.h.as_matrix() - chain[3].h.as_matrix()).frobenius_norm()
                    <= 1e-10 * f64::max(1.0, chain[3].h.frobenius_norm())
            );
            let f1 = flow_compose_r(&base, 1).unwrap();
            assert!((&f1.a - &base.a).frobenius_norm() == 0.0);
        }
    }

    #[test]
    fn flow_eval_equals_repeated_dare_steps() {
        let mut rng = Rng::new(227);
        for _ in 0..5 {
            let p = random_pd_problem(&mut rng, 4, 2);
            let d = DareProblem::transform(&p).unwrap();
            let base = FlowTriple::from_dare(&d);
            let y0 = make_initial_default(&p).unwrap();

            let mut triple = base.clone();
            let mut reference = d.dare_apply(&y0).unwrap();
            for k in 0..=6 {
                let recovered = flow_eval(&triple, &y0).unwrap();
                let rel = (recovered.as_matrix() - reference.as_matrix()).frobenius_norm()
                    / f64::max(1.0, reference.frobenius_norm());
                assert!(rel <= 1e-10, "closed form broke at k={k}: {rel:.3e}");
                triple = flow_step(&triple, &base).unwrap();
                reference = d.dare_apply(&reference).unwrap();
            }
        }
    }

    #[test]
    fn afpi_scalar_first_step_and_subsequence() {
        let p = scalar_problem(0.6, 1.0, 1.0, 1.0);
        let d = DareProblem::transform(&p).unwrap();
        let y0 = HermitianMatrix::scalar(2.0);

        // One outer step of order 2 is two DARE applications of Y0.
        let cfg = SolverConfig {
            max_iters: 1,
            nres_tol: 1e-30,
            stagnation_window: 100,
            ..Default::default()
        };
        let report = afpi_solve(&d, Some(&p), &y0, &cfg).unwrap();
        let expect = d.dare_apply(&d.dare_apply(&y0).unwrap()).unwrap();
        assert!((report.solution.get(0, 0).re - expect.get(0, 0).re).abs() <= 1e-13);
        // ... which also equals four plain CDARE steps.
        let mut x = y0.clone();
        for _ in 0..4 {
            x = p.riccati_apply(&x).unwrap();
        }
        assert!((report.solution.get(0, 0).re - x.get(0, 0).re).abs() <= 1e-12);
    }

    #[test]
    fn afpi_subsequence_identity_small_orders() {
        let mut rng = Rng::new(229);
        for &r in &[2usize, 3] {
            let p = random_pd_problem(&mut rng, 3, 1);
            let d = DareProblem::transform(&p).unwrap();
            let y0 = make_initial_default(&p).unwrap();
            let cfg = SolverConfig {
                r,
                max_iters: 3,
                nres_tol: 1e-30,
                stagnation_window: 100,
                ..Default::default()
            };
            let report = afpi_solve(&d, Some(&p), &y0, &cfg).unwrap();

            // r^3 explicit DARE applications.
            let mut reference = y0.clone();
            for _ in 0..r.pow(3) {
                reference = d.dare_apply(&reference).unwrap();
            }
            let rel = (report.solution.as_matrix() - reference.as_matrix()).frobenius_norm()
                / f64::max(1.0, reference.frobenius_norm());
            assert!(rel <= 1e-10, "subsequence identity failed for r={r}: {rel:.3e}");
        }
    }

    #[test]
    fn afpi_fixed_point_is_stationary() {
        let p = scalar_problem(0.6, 1.0, 1.0, 1.0);
        let d = DareProblem::transform(&p).unwrap();
        let xm = HermitianMatrix::scalar(scalar_x_max(0.6, 1.0, 1.0));
        let report = afpi_solve(&d, Some(&p), &xm, &SolverConfig::default()).unwrap();
        assert!(report.converged());
        assert_eq!(report.iterations(), 0);
    }

    #[test]
    fn afpi_requires_order_two() {
        let p = scalar_problem(0.6, 1.0, 1.0, 1.0);
        let d = DareProblem::transform(&p).unwrap();
        let cfg = SolverConfig {
            r: 1,
            ..Default::default()
        };
        assert!(matches!(
            afpi_solve(&d, Some(&p), &HermitianMatrix::scalar(0.0), &cfg),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn make_initial_scalar_and_dominance() {
        let p = scalar_problem(0.6, 1.0, 1.0, 1.0);
        let x0 = make_initial_default(&p).unwrap();
        assert!((x0.get(0, 0).re - 1.5625).abs() < 1e-13);
        let x_max = scalar_x_max(0.6, 1.0, 1.0);
        assert!(x0.get(0, 0).re >= x_max);

        // Feedback at a stabilizing point is also a valid start.
        let cache = p.eval_cache(&HermitianMatrix::scalar(x_max)).unwrap();
        let x0f = make_initial(&p, &cache.f_x, 0.0).unwrap();
        // C_{A_F}(X0) - H_F should vanish by construction.
        let a_f = p.a() - &(p.b() * &cache.f_x);
        let cs = x0f.as_matrix()
            - &(&(&a_f.adjoint() * x0f.conj().as_matrix()) * &a_f);
        let h_f = &(&(&cache.f_x.adjoint() * p.r().as_matrix()) * &cache.f_x)
            + p.h().as_matrix();
        assert!(
            linalg::lambda_min(&HermitianMatrix::symmetrize(&cs - &h_f)).unwrap() >= -1e-10
        );

        // Unstabilizable zero feedback is rejected.
        let bad = scalar_problem(1.2, 1.0, 1.0, 1.0);
        assert!(matches!(
            make_initial_default(&bad),
            Err(Error::Unstable { .. })
        ));
    }

    #[test]
    fn afpi_residual_trace_shows_order_r_decay() {
        // The k-th accelerated iterate equals r^k transformed-operator
        // steps (each worth two plain steps), so -log NRes grows like r^k
        // and the ratio of consecutive increments is r; both the constant
        // and the per-step contraction cancel in that ratio.
        use crate::generator::{make_example1, ScalarFamilyParams};
        // Mild contraction (~0.69 per plain step) keeps several
        // accelerated iterates above the rounding floor of the residual.
        let params = ScalarFamilyParams::real(0.9, 1.0, 1.0, 0.02).unwrap();
        let (p, _) = make_example1(8, &params, 31).unwrap();
        let d = DareProblem::transform(&p).unwrap();
        let y0 = make_initial_default(&p).unwrap();

        for (r, steps) in [(2usize, 5usize), (3, 3)] {
            let cfg = SolverConfig {
                r,
                max_iters: steps,
                nres_tol: 1e-300,
                stagnation_window: usize::MAX,
                monotonicity_check: false,
            };
            let report = afpi_solve(&d, Some(&p), &y0, &cfg).unwrap();
            // Increments of -log NRes between iterates that are past the
            // initial transient and above the rounding floor.
            let clean: Vec<&IterateRecord> = report
                .iterates
                .iter()
                .filter(|row| row.nres > 1e-14)
                .collect();
            let diffs: Vec<f64> = clean
                .windows(2)
                .map(|w| w[0].nres.ln() - w[1].nres.ln())
                .collect();
            let ratios: Vec<f64> = diffs.windows(2).map(|w| w[1] / w[0]).collect();
            let all_nres: Vec<f64> = report.iterates.iter().map(|x| x.nres).collect();
            assert!(ratios.len() >= 2, "trace too short for order {r}: {all_nres:?}");
            for ratio in &ratios[1..] {
                assert!(
                    *ratio >= 0.8 * r as f64 && *ratio <= 1.2 * r as f64,
                    "order-{r} increment ratio {ratio:.3} outside 20% slack ({ratios:?})"
                );
            }
        }
    }

    #[test]
    fn control_free_problem_solves_in_one_shot() {
        // m = 0: the equation degenerates to the conjugate-Stein fixed
        // point, which is exactly what the constructed start solves.
        let mut rng = Rng::new(241);
        let a = rand_complex_matrix(&mut rng, 3, 3).scale_real(0.4);
        let h = rand_hermitian(&mut rng, 3, 1.0);
        let p = CdareProblem::new(
            a,
            ComplexMatrix::zeros(3, 0),
            HermitianMatrix::zeros(0),
            h,
        )
        .unwrap();
        let x0 = make_initial_default(&p).unwrap();
        let report = fpi_solve(&p, &x0, &SolverConfig::default()).unwrap();
        assert!(report.converged());
        assert_eq!(report.iterations(), 0);
    }

    #[test]
    fn fpi_monotone_from_dominating_start() {
        let mut rng = Rng::new(233);
        for _ in 0..5 {
            let p = random_pd_problem(&mut rng, 4, 2);
            let x0 = make_initial_default(&p).unwrap();
            let cfg = SolverConfig {
                max_iters: 300,
                ..Default::default()
            };
            let report = fpi_solve(&p, &x0, &cfg).unwrap();
            assert!(report.converged(), "status {:?}", report.status);
            let scale = x0.frobenius_norm();
            assert!(report.monotone_within(scale));
        }
    }

    #[test]
    fn divergence_guard_trips() {
        // B = 0 leaves the pure recursion x -> 4x + 1, which has no
        // Hermitian solution; the guard must end the run before overflow.
        // Stagnation stays disabled so it is really the guard that fires.
        let p = scalar_problem(2.0, 0.0, 1.0, 1.0);
        let cfg = SolverConfig {
            max_iters: 200,
            monotonicity_check: false,
            stagnation_window: 10_000,
            ..Default::default()
        };
        let report = fpi_solve(&p, &HermitianMatrix::scalar(1.0), &cfg).unwrap();
        match &report.status {
            SolveStatus::DomainFailure { message, .. } => {
                assert!(message.contains("divergence"), "message: {message}")
            }
            other => panic!("expected the divergence guard, got {other:?}"),
        }
        assert!(report.iterations() < 30);
    }

    #[test]
    fn critical_case_stagnates_instead_of_spinning() {
        // h at the double-root threshold: sublinear tail triggers the
        // stagnation stop once per-step improvement drops below 1%.
        let p = scalar_problem(0.6, 1.0, 1.0, -0.16);
        let x0 = make_initial_default(&p).unwrap();
        let cfg = SolverConfig {
            max_iters: 20_000,
            monotonicity_check: false,
            ..Default::default()
        };
        let report = fpi_solve(&p, &x0, &cfg).unwrap();
        assert_eq!(report.status, SolveStatus::Stagnated);
        assert!((report.solution.get(0, 0).re - (-0.4)).abs() < 5e-2);
        assert!(report.iterations() < 2000);
    }
}
