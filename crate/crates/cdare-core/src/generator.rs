//! Seeded generators for benchmark problem families with analytic
//! references.
//!
//! The embedded scalar family plants a one-dimensional equation
//! x = |a|^2 x / (1 + g x) + h (g = |b|^2 / r0) in the (1,1) corner of an
//! n-dimensional problem whose remaining data is random but inert, so the
//! extremal solutions are known in closed form. The critical variant sits
//! exactly at the double-root threshold where the closed-loop spectral
//! radius is 1.
//!
//! All randomness comes from [`crate::rng::SplitMix64`]; identical
//! (parameters, seed) pairs produce bit-identical problems. Draw order for
//! the embedded families: first row h_12..h_1n (one complex normal each),
//! then the full (n-1)x(n-1) trailing block row by row before
//! symmetrization. For [`random_problem`]: A row-major, then B row-major,
//! then the R diagonal, then H row-major.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg;
use crate::matrix::{ComplexMatrix, HermitianMatrix};
use crate::model::CdareProblem;
use crate::rng::SplitMix64;

/// Parameters of the embedded scalar family. Hermitian 1x1 solutions are
/// real, so only |a| and |b| enter the closed forms; the phases land in the
/// generated matrices untouched.
#[derive(Clone, Copy, Debug)]
pub struct ScalarFamilyParams {
    pub a: Complex64,
    pub b: Complex64,
    pub r0: f64,
    pub h: f64,
}

impl ScalarFamilyParams {
    pub fn new(a: Complex64, b: Complex64, r0: f64, h: f64) -> Result<Self> {
        if a.norm().is_nan() || a.norm() <= 0.0 {
            return Err(Error::Parameter("|a| must be positive".into()));
        }
        if r0.is_nan() || r0 <= 0.0 {
            return Err(Error::Parameter("r0 must be positive".into()));
        }
        if b.norm().is_nan() || b.norm() <= 0.0 {
            return Err(Error::Parameter("|b| must be positive so that g > 0".into()));
        }
        if !h.is_finite() {
            return Err(Error::Parameter("h must be finite".into()));
        }
        Ok(Self { a, b, r0, h })
    }

    pub fn real(a: f64, b: f64, r0: f64, h: f64) -> Result<Self> {
        Self::new(Complex64::new(a, 0.0), Complex64::new(b, 0.0), r0, h)
    }

    /// g = |b|^2 / r0.
    pub fn g(&self) -> f64 {
        self.b.norm_sqr() / self.r0
    }
}

/// Closed-form data of the scalar family: the discriminant of
/// g x^2 + (1 - |a|^2 - g h) x - h = 0, the window (h_lower, h_upper) of
/// constant terms with no real solution, both real roots, and the
/// closed-loop spectral radius at the maximal root.
#[derive(Clone, Copy, Debug)]
pub struct ScalarOracle {
    pub discriminant: f64,
    /// Threshold -(1-|a|)^2/g: real solutions exist for h >= h_upper ...
    pub h_upper: f64,
    /// ... or h <= h_lower = -(1+|a|)^2/g.
    pub h_lower: f64,
    pub x_max: f64,
    pub x_min: f64,
    /// |a|^2 / (1 + g x_max)^2.
    pub rho_that: f64,
}

pub fn scalar_oracle(p: &ScalarFamilyParams) -> Result<ScalarOracle> {
    let a2 = p.a.norm_sqr();
    let g = p.g();
    let u = 1.0 - a2 - g * p.h;
    let discriminant = u * u + 4.0 * g * p.h;
    let h_upper = -(1.0 - p.a.norm()).powi(2) / g;
    let h_lower = -(1.0 + p.a.norm()).powi(2) / g;
    if discriminant < 0.0 {
        return Err(Error::NoRealSolution {
            h: p.h,
            h_min: h_lower,
            h_max: h_upper,
        });
    }
    let sqrt_d = discriminant.sqrt();
    let x_max = (-u + sqrt_d) / (2.0 * g);
    let x_min = (-u - sqrt_d) / (2.0 * g);
    let rho_that = a2 / (1.0 + g * x_max).powi(2);
    Ok(ScalarOracle {
        discriminant,
        h_upper,
        h_lower,
        x_max,
        x_min,
        rho_that,
    })
}

/// Builds the n-dimensional embedding of the scalar family: A carries `a` in
/// its (1,1) entry and is otherwise zero, B carries `b` in its first entry,
/// R = r0, and H has `h` at (1,1) with seeded random remaining data. The
/// trailing (n-1)-block is rescaled to eigenvalues in [0.1, 2] so reference
/// residuals are not dominated by its conditioning. Returns the problem and
/// the exact maximal solution, which is H with (1,1) replaced by x_max.
pub fn make_example1(
    n: usize,
    p: &ScalarFamilyParams,
    seed: u64,
) -> Result<(CdareProblem, HermitianMatrix)> {
    let oracle = scalar_oracle(p).map_err(|e| match e {
        Error::NoRealSolution { h, h_min, h_max } => Error::Parameter(format!(
            "h = {h} does not exceed the threshold {h_max} (no-solution window ({h_min}, {h_max}))"
        )),
        other => other,
    })?;
    if p.h <= oracle.h_upper {
        return Err(Error::Parameter(format!(
            "embedded family requires h > {}, got {}",
            oracle.h_upper, p.h
        )));
    }
    build_embedded(n, p, seed, oracle.x_max)
}

/// The critical variant: h is pinned to the double-root threshold
/// -(1-|a|)^2/g, where x_max = x_min = (|a|-1)/g and the closed-loop
/// spectral radius at the solution is exactly 1.
pub fn make_example2(
    n: usize,
    a: Complex64,
    b: Complex64,
    r0: f64,
    seed: u64,
) -> Result<(CdareProblem, HermitianMatrix)> {
    let probe = ScalarFamilyParams::new(a, b, r0, 0.0)?;
    let g = probe.g();
    let h_upper = -(1.0 - a.norm()).powi(2) / g;
    let p = ScalarFamilyParams::new(a, b, r0, h_upper)?;
    let x_critical = (a.norm() - 1.0) / g;
    build_embedded(n, &p, seed, x_critical)
}

fn build_embedded(
    n: usize,
    p: &ScalarFamilyParams,
    seed: u64,
    x_corner: f64,
) -> Result<(CdareProblem, HermitianMatrix)> {
    if n < 1 {
        return Err(Error::Parameter("n must be >= 1".into()));
    }
    let mut rng = SplitMix64::new(seed);

    let mut a_mat = ComplexMatrix::zeros(n, n);
    a_mat.set(0, 0, p.a);
    let mut b_mat = ComplexMatrix::zeros(n, 1);
    b_mat.set(0, 0, p.b);
    let r_mat = HermitianMatrix::scalar(p.r0);

    let mut h_mat = ComplexMatrix::zeros(n, n);
    h_mat.set(0, 0, Complex64::new(p.h, 0.0));
    for j in 1..n {
        let v = rng.complex_normal();
        h_mat.set(0, j, v);
        h_mat.set(j, 0, v.conj());
    }
    if n > 1 {
        let trailing = well_conditioned_hermitian(&mut rng, n - 1)?;
        for i in 0..n - 1 {
            for j in 0..n - 1 {
                h_mat.set(i + 1, j + 1, trailing.get(i, j));
            }
        }
    }
    let h = HermitianMatrix::symmetrize(h_mat);

    let mut x_ref = h.clone().into_matrix();
    x_ref.set(0, 0, Complex64::new(x_corner, 0.0));
    let x_ref = HermitianMatrix::symmetrize(x_ref);

    let problem = CdareProblem::new(a_mat, b_mat, r_mat, h)?;
    Ok((problem, x_ref))
}

/// Random Hermitian matrix remapped affinely so its spectrum lies in
/// [0.1, 2].
fn well_conditioned_hermitian(rng: &mut SplitMix64, n: usize) -> Result<HermitianMatrix> {
    let raw = HermitianMatrix::symmetrize(ComplexMatrix::from_fn(n, n, |_, _| {
        rng.complex_normal()
    }));
    let eigs = linalg::hermitian_eigenvalues(&raw)?;
    let (lo, hi) = (eigs[0], eigs[n - 1]);
    if hi - lo < 1e-12 {
        return Ok(HermitianMatrix::identity(n));
    }
    let alpha = 1.9 / (hi - lo);
    Ok(raw.scale_real(alpha).add_scaled_identity(0.1 - alpha * lo))
}

/// Spectrum regime of the generated constant term and control weighting.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProblemRegime {
    /// R = I and H shifted positive semidefinite.
    Pd,
    /// R a random nonsingular sign-mixed diagonal, H left indefinite.
    Indefinite,
}

/// Seeded generic problem: complex Gaussian A (rescaled so that
/// rho(conj(A) A) <= 0.8, which keeps the zero-feedback initial iterate
/// admissible) and B, with R and H drawn per the regime.
pub fn random_problem(
    n: usize,
    m: usize,
    seed: u64,
    regime: ProblemRegime,
) -> Result<CdareProblem> {
    if n < 1 || m < 1 {
        return Err(Error::Parameter("n and m must be >= 1".into()));
    }
    let mut rng = SplitMix64::new(seed);

    let mut a = ComplexMatrix::from_fn(n, n, |_, _| rng.complex_normal());
    let rho = linalg::spectral_radius(&(&a.conj() * &a))?;
    if rho > 0.8 {
        a = a.scale_real((0.8 / rho).sqrt());
    }
    let b = ComplexMatrix::from_fn(n, m, |_, _| rng.complex_normal());

    let r = match regime {
        ProblemRegime::Pd => HermitianMatrix::identity(m),
        ProblemRegime::Indefinite => {
            let mut diag = Vec::with_capacity(m);
            for _ in 0..m {
                let magnitude = rng.uniform_in(0.5, 2.0);
                let sign = if rng.uniform() < 0.5 { -1.0 } else { 1.0 };
                diag.push(sign * magnitude);
            }
            // Guarantee sign mixing when there is room for it.
            let same_sign = diag.iter().all(|v| *v > 0.0) || diag.iter().all(|v| *v < 0.0);
            if m >= 2 && same_sign {
                diag[m - 1] = -diag[m - 1];
            }
            HermitianMatrix::diag_real(&diag)
        }
    };

    let raw = HermitianMatrix::symmetrize(
        ComplexMatrix::from_fn(n, n, |_, _| rng.complex_normal()).scale_real(0.7),
    );
    let h = match regime {
        ProblemRegime::Pd => {
            let lmin = linalg::lambda_min(&raw)?;
            raw.add_scaled_identity(-f64::min(lmin, 0.0))
        }
        ProblemRegime::Indefinite => raw,
    };

    CdareProblem::new(a, b, r, h)
}
