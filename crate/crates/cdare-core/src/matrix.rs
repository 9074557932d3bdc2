//! Dense complex matrices in row-major storage, plus a Hermitian wrapper
//! whose symmetry holds bit-exactly after construction.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg;

/// Dense complex matrix, row-major. Zero-dimension matrices are allowed so
/// that control-free problems (no input columns) degenerate cleanly.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<Complex64>,
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            let row: Vec<String> = (0..self.cols)
                .map(|j| format!("{:.6}{:+.6}i", self.get(i, j).re, self.get(i, j).im))
                .collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        write!(f, "]")
    }
}

impl ComplexMatrix {
    /// Builds a matrix from row-major entries, validating shape and finiteness.
    pub fn new(rows: usize, cols: usize, entries: Vec<Complex64>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::Dimension {
                context: "ComplexMatrix::new",
                details: format!(
                    "{}x{} needs {} entries, got {}",
                    rows,
                    cols,
                    rows * cols,
                    entries.len()
                ),
            });
        }
        let m = Self {
            rows,
            cols,
            entries,
        };
        if !m.is_finite() {
            return Err(Error::NonFinite {
                context: "ComplexMatrix::new",
            });
        }
        Ok(m)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: vec![Complex64::ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, Complex64::ONE);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut entries = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                entries.push(f(i, j));
            }
        }
        Self {
            rows,
            cols,
            entries,
        }
    }

    /// Square matrix with the given complex diagonal.
    pub fn diag(values: &[Complex64]) -> Self {
        let n = values.len();
        Self::from_fn(n, n, |i, j| if i == j { values[i] } else { Complex64::ZERO })
    }

    pub fn diag_real(values: &[f64]) -> Self {
        let v: Vec<Complex64> = values.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        Self::diag(&v)
    }

    /// 1x1 matrix.
    pub fn scalar(z: Complex64) -> Self {
        Self {
            rows: 1,
            cols: 1,
            entries: vec![z],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0 || self.cols == 0
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.entries[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.entries[i * self.cols + j] = v;
    }

    pub fn is_finite(&self) -> bool {
        self.entries
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Entrywise complex conjugate.
    pub fn conj(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i).conj())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn scale(&self, z: Complex64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|e| e * z).collect(),
        }
    }

    pub fn scale_real(&self, x: f64) -> Self {
        self.scale(Complex64::new(x, 0.0))
    }

    /// Horizontal concatenation `[self other]`.
    pub fn hstack(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows {
            return Err(Error::Dimension {
                context: "hstack",
                details: format!("{} rows vs {} rows", self.rows, other.rows),
            });
        }
        Ok(Self::from_fn(self.rows, self.cols + other.cols, |i, j| {
            if j < self.cols {
                self.get(i, j)
            } else {
                other.get(i, j - self.cols)
            }
        }))
    }

    /// Copy of the sub-block starting at (r0, c0) with the given extent.
    pub fn block(&self, r0: usize, c0: usize, nrows: usize, ncols: usize) -> Self {
        assert!(r0 + nrows <= self.rows && c0 + ncols <= self.cols, "block out of range");
        Self::from_fn(nrows, ncols, |i, j| self.get(r0 + i, c0 + j))
    }

    /// Assembles `[a b; c d]` from conforming blocks.
    pub fn from_blocks_2x2(a: &Self, b: &Self, c: &Self, d: &Self) -> Result<Self> {
        if a.rows != b.rows || c.rows != d.rows || a.cols != c.cols || b.cols != d.cols {
            return Err(Error::Dimension {
                context: "from_blocks_2x2",
                details: format!(
                    "blocks {}x{}, {}x{}, {}x{}, {}x{}",
                    a.rows, a.cols, b.rows, b.cols, c.rows, c.cols, d.rows, d.cols
                ),
            });
        }
        Ok(Self::from_fn(a.rows + c.rows, a.cols + b.cols, |i, j| {
            match (i < a.rows, j < a.cols) {
                (true, true) => a.get(i, j),
                (true, false) => b.get(i, j - a.cols),
                (false, true) => c.get(i - a.rows, j),
                (false, false) => d.get(i - a.rows, j - a.cols),
            }
        }))
    }

    fn zip_with(&self, other: &Self, f: impl Fn(Complex64, Complex64) -> Complex64) -> Self {
        assert_eq!(
            (self.rows, self.cols),
            (other.rows, other.cols),
            "shape mismatch in elementwise matrix op"
        );
        Self {
            rows: self.rows,
            cols: self.cols,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: Self) -> ComplexMatrix {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: Self) -> ComplexMatrix {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        self.scale(Complex64::new(-1.0, 0.0))
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: Self) -> ComplexMatrix {
        assert_eq!(
            self.cols, rhs.rows,
            "shape mismatch in matrix product: {}x{} * {}x{}",
            self.rows, self.cols, rhs.rows, rhs.cols
        );
        let (n, k, m) = (self.rows, self.cols, rhs.cols);
        let mut out = ComplexMatrix::zeros(n, m);
        for i in 0..n {
            for p in 0..k {
                let a = self.entries[i * k + p];
                if a == Complex64::ZERO {
                    continue;
                }
                let row = &rhs.entries[p * m..(p + 1) * m];
                let dst = &mut out.entries[i * m..(i + 1) * m];
                for (d, &b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        out
    }
}

/// Hermitian matrix. The stored entries satisfy `M[i][j] == conj(M[j][i])`
/// bit-exactly and diagonal imaginary parts are zero; every constructor
/// enforces this by averaging `(M + M^H)/2` entrywise.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix {
    inner: ComplexMatrix,
}

impl HermitianMatrix {
    /// Accepts a square matrix that is Hermitian up to `tol * max(1, ||M||_2)`
    /// in the operator 2-norm, then stores the exactly symmetrized form.
    /// Inputs beyond the tolerance are rejected rather than silently repaired.
    pub fn new(m: ComplexMatrix, tol: f64) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Dimension {
                context: "HermitianMatrix::new",
                details: format!("{}x{} is not square", m.rows(), m.cols()),
            });
        }
        if !m.is_finite() {
            return Err(Error::NonFinite {
                context: "HermitianMatrix::new",
            });
        }
        let asymmetry = linalg::operator_two_norm(&(&m - &m.adjoint()));
        let bound = tol * f64::max(1.0, linalg::operator_two_norm(&m));
        if asymmetry > bound {
            return Err(Error::NotHermitian { asymmetry, bound });
        }
        Ok(Self::symmetrize(m))
    }

    /// Unconditionally symmetrizes a square matrix. For images of operators
    /// that are Hermitian in exact arithmetic, where only rounding drift is
    /// being removed.
    pub fn symmetrize(m: ComplexMatrix) -> Self {
        assert!(m.is_square(), "cannot symmetrize a non-square matrix");
        let n = m.rows();
        let mut out = m;
        for i in 0..n {
            let d = out.get(i, i);
            out.set(i, i, Complex64::new(d.re, 0.0));
            for j in (i + 1)..n {
                let v = (out.get(i, j) + out.get(j, i).conj()).scale(0.5);
                out.set(i, j, v);
                out.set(j, i, v.conj());
            }
        }
        Self { inner: out }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            inner: ComplexMatrix::zeros(n, n),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            inner: ComplexMatrix::identity(n),
        }
    }

    /// 1x1 Hermitian matrix (a real scalar).
    pub fn scalar(x: f64) -> Self {
        Self {
            inner: ComplexMatrix::scalar(Complex64::new(x, 0.0)),
        }
    }

    pub fn diag_real(values: &[f64]) -> Self {
        Self {
            inner: ComplexMatrix::diag_real(values),
        }
    }

    pub fn order(&self) -> usize {
        self.inner.rows()
    }

    pub fn as_matrix(&self) -> &ComplexMatrix {
        &self.inner
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.inner
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.inner.get(i, j)
    }

    /// Entrywise conjugate; equals the transpose, so it is again Hermitian.
    pub fn conj(&self) -> Self {
        Self {
            inner: self.inner.conj(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            inner: &self.inner + &other.inner,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            inner: &self.inner - &other.inner,
        }
    }

    pub fn scale_real(&self, x: f64) -> Self {
        Self {
            inner: self.inner.scale_real(x),
        }
    }

    /// `self + shift * I`.
    pub fn add_scaled_identity(&self, shift: f64) -> Self {
        let mut inner = self.inner.clone();
        for i in 0..inner.rows() {
            let d = inner.get(i, i);
            inner.set(i, i, Complex64::new(d.re + shift, 0.0));
        }
        Self { inner }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.inner.frobenius_norm()
    }
}
