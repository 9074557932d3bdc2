//! File schemas and canonical serialization.
//!
//! Problems, transformed problems, solutions and bench suites are single
//! self-describing JSON documents. Complex entries are encoded as
//! `[re, im]` pairs in row-major nested arrays, and every float is written
//! with 17 significant digits in scientific notation, which round-trips
//! f64 exactly: write -> read -> write is byte-identical.
//!
//! Schemas: `cdare-1` (problem), `dare-1` (transformed problem),
//! `solution-1` (one Hermitian matrix), `suite-1` (list of problem paths),
//! `run-manifest-1` (per-run metadata).

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use cdare_core::{tol, CdareProblem, Complex64, ComplexMatrix, DareProblem, HermitianMatrix};
use serde::{Deserialize, Serialize};

pub type ComplexEntry = [f64; 2];
pub type MatrixData = Vec<Vec<ComplexEntry>>;

pub const PROBLEM_SCHEMA: &str = "cdare-1";
pub const DARE_SCHEMA: &str = "dare-1";
pub const SOLUTION_SCHEMA: &str = "solution-1";
pub const SUITE_SCHEMA: &str = "suite-1";
pub const MANIFEST_SCHEMA: &str = "run-manifest-1";

/// Coefficient bundle of a conjugate discrete-time Riccati problem.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProblemFile {
    pub schema_version: String,
    pub n: usize,
    pub m: usize,
    #[serde(rename = "A")]
    pub a: MatrixData,
    #[serde(rename = "B")]
    pub b: MatrixData,
    #[serde(rename = "R")]
    pub r: MatrixData,
    #[serde(rename = "H")]
    pub h: MatrixData,
}

/// Coefficients of a transformed (standard) discrete-time Riccati problem.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DareFile {
    pub schema_version: String,
    pub n: usize,
    /// Input dimension of the originating problem; the lifted input
    /// dimension is twice this.
    pub m: usize,
    #[serde(rename = "Ahat")]
    pub ahat: MatrixData,
    #[serde(rename = "Bhat")]
    pub bhat: MatrixData,
    #[serde(rename = "Rhat")]
    pub rhat: MatrixData,
    #[serde(rename = "Ghat")]
    pub ghat: MatrixData,
    #[serde(rename = "Hhat")]
    pub hhat: MatrixData,
}

/// One Hermitian matrix (solutions, references, initial iterates).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolutionFile {
    pub schema_version: String,
    pub n: usize,
    #[serde(rename = "X")]
    pub x: MatrixData,
}

/// List of problem files for the bench subcommand, resolved relative to the
/// suite file's directory.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SuiteFile {
    pub schema_version: String,
    pub problems: Vec<String>,
}

/// Metadata emitted once per solver run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: String,
    pub command: String,
    pub method: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<usize>,
    pub nres_tol: f64,
    pub max_iters: usize,
    pub status: String,
    pub iterations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_nres: Option<f64>,
    pub wall_time_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solution_path: Option<String>,
}

pub fn matrix_to_nested(m: &ComplexMatrix) -> MatrixData {
    (0..m.rows())
        .map(|i| (0..m.cols()).map(|j| [m.get(i, j).re, m.get(i, j).im]).collect())
        .collect()
}

pub fn matrix_from_nested(
    data: &MatrixData,
    rows: usize,
    cols: usize,
    what: &str,
) -> Result<ComplexMatrix> {
    if data.len() != rows {
        bail!("{what}: expected {rows} rows, found {}", data.len());
    }
    let mut entries = Vec::with_capacity(rows * cols);
    for (i, row) in data.iter().enumerate() {
        if row.len() != cols {
            bail!("{what}: row {i} has {} entries, expected {cols}", row.len());
        }
        entries.extend(row.iter().map(|&[re, im]| Complex64::new(re, im)));
    }
    ComplexMatrix::new(rows, cols, entries).with_context(|| format!("{what}: invalid matrix"))
}

pub fn hermitian_from_nested(
    data: &MatrixData,
    order: usize,
    what: &str,
) -> Result<HermitianMatrix> {
    let m = matrix_from_nested(data, order, order, what)?;
    HermitianMatrix::new(m, tol::HERMITIAN_TOL)
        .with_context(|| format!("{what}: not Hermitian within tolerance"))
}

impl ProblemFile {
    pub fn from_problem(p: &CdareProblem) -> Self {
        Self {
            schema_version: PROBLEM_SCHEMA.into(),
            n: p.state_dim(),
            m: p.input_dim(),
            a: matrix_to_nested(p.a()),
            b: matrix_to_nested(p.b()),
            r: matrix_to_nested(p.r().as_matrix()),
            h: matrix_to_nested(p.h().as_matrix()),
        }
    }

    pub fn to_problem(&self) -> Result<CdareProblem> {
        if self.schema_version != PROBLEM_SCHEMA {
            bail!(
                "unsupported problem schema '{}', expected '{PROBLEM_SCHEMA}'",
                self.schema_version
            );
        }
        let a = matrix_from_nested(&self.a, self.n, self.n, "A")?;
        let b = matrix_from_nested(&self.b, self.n, self.m, "B")?;
        let r = hermitian_from_nested(&self.r, self.m, "R")?;
        let h = hermitian_from_nested(&self.h, self.n, "H")?;
        Ok(CdareProblem::new(a, b, r, h)?)
    }
}

impl DareFile {
    pub fn from_dare(d: &DareProblem, original_m: usize) -> Self {
        Self {
            schema_version: DARE_SCHEMA.into(),
            n: d.state_dim(),
            m: original_m,
            ahat: matrix_to_nested(d.ahat()),
            bhat: matrix_to_nested(d.bhat()),
            rhat: matrix_to_nested(d.rhat().as_matrix()),
            ghat: matrix_to_nested(d.ghat().as_matrix()),
            hhat: matrix_to_nested(d.hhat().as_matrix()),
        }
    }

    pub fn to_dare(&self) -> Result<DareProblem> {
        if self.schema_version != DARE_SCHEMA {
            bail!(
                "unsupported schema '{}', expected '{DARE_SCHEMA}'",
                self.schema_version
            );
        }
        let ahat = matrix_from_nested(&self.ahat, self.n, self.n, "Ahat")?;
        let bhat = matrix_from_nested(&self.bhat, self.n, 2 * self.m, "Bhat")?;
        let rhat = hermitian_from_nested(&self.rhat, 2 * self.m, "Rhat")?;
        let ghat = hermitian_from_nested(&self.ghat, self.n, "Ghat")?;
        let hhat = hermitian_from_nested(&self.hhat, self.n, "Hhat")?;
        Ok(DareProblem::from_parts(ahat, bhat, rhat, ghat, hhat)?)
    }
}

impl SolutionFile {
    pub fn from_matrix(x: &HermitianMatrix) -> Self {
        Self {
            schema_version: SOLUTION_SCHEMA.into(),
            n: x.order(),
            x: matrix_to_nested(x.as_matrix()),
        }
    }

    pub fn to_matrix(&self) -> Result<HermitianMatrix> {
        if self.schema_version != SOLUTION_SCHEMA {
            bail!(
                "unsupported schema '{}', expected '{SOLUTION_SCHEMA}'",
                self.schema_version
            );
        }
        hermitian_from_nested(&self.x, self.n, "X")
    }
}

/// Formats one float the way every file and CSV column does: scientific
/// notation with 17 significant digits, which parses back bit-exactly.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Pretty JSON with canonical float formatting.
struct CanonicalFormatter {
    inner: serde_json::ser::PrettyFormatter<'static>,
}

impl serde_json::ser::Formatter for CanonicalFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + Write,
    {
        write!(writer, "{value:.16e}")
    }

    fn begin_array<W>(&mut self, writer: &mut W) -> io::Result<()>
    where
        W: ?Sized + Write,
    {
        self.inner.begin_array(writer)
    }

    fn end_array<W>(&mut self, writer: &mut W) -> io::Result<()>
    where
        W: ?Sized + Write,
    {
        self.inner.end_array(writer)
    }

    fn begin_array_value<W>(&mut self, writer: &mut W, first: bool) -> io::Result<()>
    where
        W: ?Sized + Write,
    {
        self.inner.begin_array_value(writer, first)
    }

    fn end_array_value<W>(&mut self, writer: &mut W) -> io::Result<()>
    where
        W: ?Sized + Write,
    {
        self.inner.end_array_value(writer)
    }

    fn begin_object<W>(&mut self, writer: &mut W) -> io::Result<()>
    where
        W: ?Sized + Write,
    {
        self.inner.begin_object(writer)
    }

    fn end_object<W>(&mut self, writer: &mut W) -> io::Result<()>
    where
        W: ?Sized + Write,
    {
        self.inner.end_object(writer)
    }

    fn begin_object_key<W>(&mut self, writer: &mut W, first: bool) -> io::Result<()>
    where
        W: ?Sized + Write,
    {
        self.inner.begin_object_key(writer, first)
    }

    fn end_object_key<W>(&mut self, writer: &mut W) -> io::Result<()>
    where
        W: ?Sized + Write,
    {
        self.inner.end_object_key(writer)
    }

    fn begin_object_value<W>(&mut self, writer: &mut W) -> io::Result<()>
    where
        W: ?Sized + Write,
    {
        self.inner.begin_object_value(writer)
    }

    fn end_object_value<W>(&mut self, writer: &mut W) -> io::Result<()>
    where
        W: ?Sized + Write,
    {
        self.inner.end_object_value(writer)
    }
}

/// Serializes `value` canonically and writes it to `path` with a trailing
/// newline.
pub fn write_canonical<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut buf = Vec::new();
    let formatter = CanonicalFormatter {
        inner: serde_json::ser::PrettyFormatter::new(),
    };
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, formatter);
    value
        .serialize(&mut ser)
        .with_context(|| format!("serializing {}", path.display()))?;
    buf.push(b'\n');
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)
                .with_context(|| format!("creating directory {}", parent.display()))?;
        }
    }
    fs::write(path, buf).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use cdare_core::generator::{make_example1, ScalarFamilyParams};

    #[test]
    fn canonical_write_is_roundtrip_stable() {
        let params = ScalarFamilyParams::real(0.6, 1.0, 1.0, 1.0).unwrap();
        let (problem, _) = make_example1(4, &params, 7).unwrap();
        let file = ProblemFile::from_problem(&problem);

        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("a.json");
        let p2 = dir.path().join("b.json");
        write_canonical(&p1, &file).unwrap();
        let reread: ProblemFile = read_json(&p1).unwrap();
        write_canonical(&p2, &reread).unwrap();
        assert_eq!(fs::read(&p1).unwrap(), fs::read(&p2).unwrap());

        // And the parsed problem matches the original bit-for-bit.
        let back = reread.to_problem().unwrap();
        assert_eq!(back.a(), problem.a());
        assert_eq!(back.h().as_matrix(), problem.h().as_matrix());
    }

    #[test]
    fn rejects_wrong_schema_and_ragged_rows() {
        let mut file = ProblemFile {
            schema_version: "bogus".into(),
            n: 1,
            m: 1,
            a: vec![vec![[0.5, 0.0]]],
            b: vec![vec![[1.0, 0.0]]],
            r: vec![vec![[1.0, 0.0]]],
            h: vec![vec![[1.0, 0.0]]],
        };
        assert!(file.to_problem().is_err());
        file.schema_version = PROBLEM_SCHEMA.into();
        file.a = vec![vec![]];
        assert!(file.to_problem().is_err());
    }

    #[test]
    fn rejects_non_hermitian_blocks() {
        let file = ProblemFile {
            schema_version: PROBLEM_SCHEMA.into(),
            n: 2,
            m: 1,
            a: vec![
                vec![[0.5, 0.0], [0.0, 0.0]],
                vec![[0.0, 0.0], [0.1, 0.0]],
            ],
            b: vec![vec![[1.0, 0.0]], vec![[0.0, 0.0]]],
            r: vec![vec![[1.0, 0.0]]],
            h: vec![
                vec![[1.0, 0.0], [0.5, 0.0]],
                vec![[0.4, 0.0], [1.0, 0.0]],
            ],
        };
        let err = file.to_problem().unwrap_err();
        assert!(format!("{err:#}").contains("Hermitian"), "{err:#}");
    }

    #[test]
    fn float_formatting_has_17_significant_digits() {
        assert_eq!(fmt_float(1.0), "1.0000000000000000e0");
        let v = 1.196070863465731_f64;
        let s = fmt_float(v);
        assert_eq!(s.parse::<f64>().unwrap(), v);
    }
}
