//! Library-wide tolerances and guards, kept in one place so every module
//! and test pins the same values.

/// Relative asymmetry accepted when constructing a Hermitian matrix from
/// user data; inputs beyond this are rejected rather than repaired.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Reciprocal condition number below which a square matrix is treated as
/// singular to working precision (near machine epsilon for complex f64).
pub const RCOND_MIN: f64 = 1e-13;

/// Guard band when checking spectral-radius-below-one preconditions, so
/// Stein-type solves are not attempted at the stability boundary.
pub const STAB_MARGIN: f64 = 1e-8;

/// Relative eigenvalue threshold for positive-definiteness tests.
pub const PD_TOL: f64 = 1e-12;

/// Backward-stable residual factor accepted from pivoted linear solves:
/// ||M Z - RHS||_F <= SOLVE_TOL * (||M||_F ||Z||_F + ||RHS||_F).
pub const SOLVE_TOL: f64 = 1e-10;

/// Slack on the nonincreasing-iterate check: lambda_min(X_k - X_{k+1})
/// may dip below zero by MONO_TOL * max(1, ||X_k||).
pub const MONO_TOL: f64 = 1e-10;

/// Default normalized-residual stopping tolerance for all solvers.
pub const DEFAULT_NRES_TOL: f64 = 1e-15;

/// Consecutive non-improving residual checks (< 1% gain) before a solver
/// stops with a stagnation status.
pub const DEFAULT_STAGNATION_WINDOW: usize = 5;

/// A solve aborts when the iterate norm exceeds
/// DIVERGENCE_FACTOR * (1 + ||X_0||).
pub const DIVERGENCE_FACTOR: f64 = 1e12;

/// Largest order solved through the n^2 x n^2 vectorized Stein system;
/// larger orders switch to squared-Smith doubling.
pub const KRONECKER_MAX_ORDER: usize = 24;
