//! Maximal Hermitian solutions of conjugate discrete-time algebraic Riccati
//! equations (CDAREs)
//!
//! ```text
//!     X = A^H conj(X) A - A^H conj(X) B (R + B^H conj(X) B)^{-1} B^H conj(X) A + H
//! ```
//!
//! by plain fixed-point iteration, and by an accelerated fixed-point
//! iteration of arbitrary order r >= 2 applied to the equivalent standard
//! discrete-time Riccati equation obtained from one symbolic double
//! application of the operator. The crate also exposes the algebraic
//! identities connecting the two equations (block structure of the lifted
//! quadratic term, closed-loop matrix equality, discrete-flow composition
//! law) as computable residuals, together with seeded benchmark-problem
//! generators carrying closed-form reference solutions.
//!
//! Modules follow the pipeline: [`matrix`]/[`linalg`] are the dense complex
//! kernel, [`model`] defines the CDARE and its Riccati operator, [`transform`]
//! builds the induced standard DARE, [`solver`] iterates, [`generator`]
//! produces reproducible test families, and [`batch`] runs many independent
//! solves (in parallel when the `parallel` feature is on, the default).

pub mod batch;
pub mod error;
pub mod generator;
pub mod linalg;
pub mod matrix;
pub mod model;
pub mod rng;
pub mod solver;
pub mod tol;
pub mod transform;

pub use error::{Error, Result};
pub use matrix::{ComplexMatrix, HermitianMatrix};
pub use model::{CdareProblem, EvalCache};
pub use solver::{FlowTriple, SolveReport, SolveStatus, SolverConfig};
pub use transform::{DareEvalCache, DareProblem};

pub use num_complex::Complex64;

#[cfg(test)]
pub(crate) mod testutil {
    pub use crate::rng::SplitMix64 as Rng;
    use crate::matrix::{ComplexMatrix, HermitianMatrix};

    pub fn rand_complex_matrix(rng: &mut Rng, rows: usize, cols: usize) -> ComplexMatrix {
        ComplexMatrix::from_fn(rows, cols, |_, _| rng.complex_normal())
    }

    pub fn rand_hermitian(rng: &mut Rng, n: usize, scale: f64) -> HermitianMatrix {
        let m = rand_complex_matrix(rng, n, n).scale_real(scale);
        HermitianMatrix::symmetrize(m)
    }
}
