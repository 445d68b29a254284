//! Test systems: the block-tridiagonal convection–diffusion family, matrices
//! read from MatrixMarket files, and a dense direct solver used as an oracle.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::{matvec, CsrMatrix, Vector};

/// Size of the diagonal blocks in the generated family.
pub const BLOCK: usize = 10;

/// Largest system the dense oracle will densify.
pub const ORACLE_LIMIT: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaheuxSpec {
    pub n: usize,
    pub delta: f64,
}

impl BaheuxSpec {
    pub fn new(n: usize, delta: f64) -> Result<Self> {
        let spec = BaheuxSpec { n, delta };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || !self.n.is_multiple_of(BLOCK) {
            return Err(Error::InvalidConfig(format!(
                "dimension must be a positive multiple of {BLOCK}, got {}",
                self.n
            )));
        }
        if !self.delta.is_finite() {
            return Err(Error::InvalidConfig("delta must be finite".into()));
        }
        Ok(())
    }

    /// Number of stored entries: the diagonal, two intra-block neighbours
    /// and two inter-block neighbours, minus those cut off at the edges.
    pub fn expected_nnz(&self) -> usize {
        let n = self.n;
        n + 2 * (n - n / BLOCK) + 2 * (n - BLOCK)
    }
}

/// A linear system together with its known solution, when there is one.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub a: CsrMatrix,
    pub b: Vector,
    pub x_true: Option<Vector>,
    pub label: String,
}

impl ProblemInstance {
    pub fn new(a: CsrMatrix, b: Vector, x_true: Option<Vector>, label: String) -> Result<Self> {
        a.ensure_square()?;
        if b.len() != a.nrows() {
            return Err(Error::DimensionMismatch {
                op: "ProblemInstance",
                expected: a.nrows(),
                found: b.len(),
            });
        }
        if let Some(x) = &x_true {
            let res = b.sub(&matvec(&a, x)?)?.norm2();
            if res > 1e-10 * b.norm2() {
                return Err(Error::InvalidConfig(format!(
                    "x_true leaves residual {res:e}"
                )));
            }
        }
        Ok(ProblemInstance {
            a,
            b,
            x_true,
            label,
        })
    }

    /// Builds `b = A·1` so that the all-ones vector is the exact solution.
    pub fn with_ones_solution(a: CsrMatrix, label: String) -> Result<Self> {
        a.ensure_square()?;
        let ones = Vector::ones(a.ncols());
        let b = matvec(&a, &ones)?;
        ProblemInstance::new(a, b, Some(ones), label)
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }
}

/// The five-point convection–diffusion test matrix: `B` blocks on the
/// diagonal (4 on the diagonal, `-1+δ` above, `-1-δ` below) coupled by `-I`.
/// The right-hand side is `A·1`.
pub fn gen_baheux(spec: BaheuxSpec) -> Result<ProblemInstance> {
    spec.validate()?;
    let n = spec.n;
    let upper = -1.0 + spec.delta;
    let lower = -1.0 - spec.delta;
    let mut triplets = Vec::with_capacity(spec.expected_nnz());
    for i in 0..n {
        let local = i % BLOCK;
        if i >= BLOCK {
            triplets.push((i, i - BLOCK, -1.0));
        }
        if local > 0 {
            triplets.push((i, i - 1, lower));
        }
        triplets.push((i, i, 4.0));
        if local + 1 < BLOCK {
            triplets.push((i, i + 1, upper));
        }
        if i + BLOCK < n {
            triplets.push((i, i + BLOCK, -1.0));
        }
    }
    let a = CsrMatrix::from_triplets(n, n, &triplets)?;
    ProblemInstance::with_ones_solution(a, format!("baheux(n={n}, delta={})", spec.delta))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MmSymmetry {
    General,
    Symmetric,
}

/// Parses a real MatrixMarket coordinate file into a square CSR matrix.
/// Symmetric files are expanded to full storage.
pub fn parse_matrix_market(text: &str) -> Result<CsrMatrix> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        msg: "empty file".into(),
    })?;
    let fields: Vec<String> = header
        .split_whitespace()
        .map(str::to_ascii_lowercase)
        .collect();
    let bad_header = |msg: &str| Error::Parse {
        line: 1,
        msg: msg.to_string(),
    };
    if fields.len() != 5 || fields[0] != "%%matrixmarket" || fields[1] != "matrix" {
        return Err(bad_header(
            "expected '%%MatrixMarket matrix coordinate real <symmetry>'",
        ));
    }
    if fields[2] != "coordinate" {
        return Err(bad_header("only coordinate format is supported"));
    }
    if fields[3] != "real" && fields[3] != "integer" {
        return Err(bad_header("only real matrices are supported"));
    }
    let symmetry = match fields[4].as_str() {
        "general" => MmSymmetry::General,
        "symmetric" => MmSymmetry::Symmetric,
        other => return Err(bad_header(&format!("unsupported symmetry '{other}'"))),
    };

    let mut body = lines.filter(|(_, l)| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('%')
    });
    let (size_idx, size_line) = body.next().ok_or(Error::Parse {
        line: 2,
        msg: "missing size line".into(),
    })?;
    let size: Vec<usize> = size_line
        .split_whitespace()
        .map(str::parse)
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Parse {
            line: size_idx + 1,
            msg: format!("bad size line: {e}"),
        })?;
    if size.len() != 3 {
        return Err(Error::Parse {
            line: size_idx + 1,
            msg: "size line needs rows, cols and entry count".into(),
        });
    }
    let (nrows, ncols, nnz) = (size[0], size[1], size[2]);
    if nrows != ncols {
        return Err(Error::NotSquare { nrows, ncols });
    }
    if nrows == 0 {
        return Err(Error::Parse {
            line: size_idx + 1,
            msg: "empty matrix".into(),
        });
    }

    let mut triplets = Vec::with_capacity(nnz * 2);
    let mut count = 0;
    for (idx, line) in body {
        let line_no = idx + 1;
        let parse_err = |msg: String| Error::Parse { line: line_no, msg };
        let mut parts = line.split_whitespace();
        let (Some(i), Some(j), Some(v), None) =
            (parts.next(), parts.next(), parts.next(), parts.next())
        else {
            return Err(parse_err("expected 'row col value'".into()));
        };
        let i: usize = i
            .parse()
            .map_err(|e| parse_err(format!("row index: {e}")))?;
        let j: usize = j
            .parse()
            .map_err(|e| parse_err(format!("column index: {e}")))?;
        let v: f64 = v.parse().map_err(|e| parse_err(format!("value: {e}")))?;
        if i == 0 || j == 0 || i > nrows || j > ncols {
            return Err(parse_err(format!("index ({i}, {j}) out of bounds")));
        }
        if !v.is_finite() {
            return Err(parse_err("non-finite value".into()));
        }
        let (i, j) = (i - 1, j - 1);
        triplets.push((i, j, v));
        if symmetry == MmSymmetry::Symmetric && i != j {
            triplets.push((j, i, v));
        }
        count += 1;
    }
    if count != nnz {
        return Err(Error::Parse {
            line: size_idx + 1,
            msg: format!("header declares {nnz} entries, found {count}"),
        });
    }
    CsrMatrix::from_triplets(nrows, ncols, &triplets)
}

/// Renders a matrix in coordinate format. With `Symmetric`, only the lower
/// triangle is written and the matrix must actually be symmetric.
pub fn format_matrix_market(a: &CsrMatrix, symmetry: MmSymmetry) -> Result<String> {
    let entries: Vec<(usize, usize, f64)> = match symmetry {
        MmSymmetry::General => a.triplets().collect(),
        MmSymmetry::Symmetric => {
            a.ensure_square()?;
            if a.triplets().any(|(i, j, v)| a.get(j, i) != v) {
                return Err(Error::InvalidConfig("matrix is not symmetric".into()));
            }
            a.triplets().filter(|&(i, j, _)| j <= i).collect()
        }
    };
    let kind = match symmetry {
        MmSymmetry::General => "general",
        MmSymmetry::Symmetric => "symmetric",
    };
    let mut out = format!(
        "%%MatrixMarket matrix coordinate real {kind}\n{} {} {}\n",
        a.nrows(),
        a.ncols(),
        entries.len()
    );
    for (i, j, v) in entries {
        // `{:e}` prints the shortest representation that parses back exactly.
        let _ = writeln!(out, "{} {} {:e}", i + 1, j + 1, v);
    }
    Ok(out)
}

pub fn write_matrix_market(
    a: &CsrMatrix,
    path: impl AsRef<Path>,
    symmetry: MmSymmetry,
) -> Result<()> {
    fs::write(path, format_matrix_market(a, symmetry)?)?;
    Ok(())
}

/// Reads a right-hand side: one value per line, blank lines ignored.
pub fn parse_rhs(text: &str, n: usize) -> Result<Vector> {
    let values = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(idx, l)| {
            l.trim().parse::<f64>().map_err(|e| Error::Parse {
                line: idx + 1,
                msg: format!("rhs value: {e}"),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if values.len() != n {
        return Err(Error::DimensionMismatch {
            op: "rhs file",
            expected: n,
            found: values.len(),
        });
    }
    Vector::new(values)
}

/// Loads a system from a MatrixMarket file. Without a right-hand-side file
/// the system is completed with `b = A·1`.
pub fn read_matrix_market(path: impl AsRef<Path>, rhs: Option<&Path>) -> Result<ProblemInstance> {
    let path = path.as_ref();
    let a = parse_matrix_market(&fs::read_to_string(path)?)?;
    let label = path.file_name().map_or_else(
        || path.display().to_string(),
        |f| f.to_string_lossy().into_owned(),
    );
    match rhs {
        None => ProblemInstance::with_ones_solution(a, label),
        Some(rhs_path) => {
            let b = parse_rhs(&fs::read_to_string(rhs_path)?, a.nrows())?;
            ProblemInstance::new(a, b, None, label)
        }
    }
}

/// Dense Gaussian elimination with partial pivoting.
pub fn direct_solve_oracle(a: &CsrMatrix, b: &Vector) -> Result<Vector> {
    a.ensure_square()?;
    let n = a.nrows();
    if n > ORACLE_LIMIT {
        return Err(Error::TooLarge {
            n,
            limit: ORACLE_LIMIT,
        });
    }
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            op: "direct_solve_oracle",
            expected: n,
            found: b.len(),
        });
    }
    let mut m = a.to_dense();
    let mut rhs = b.as_slice().to_vec();
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&p, &q| m[p][col].abs().total_cmp(&m[q][col].abs()))
            .unwrap();
        let pivot = m[pivot_row][col];
        if pivot.abs() < 1e-300 {
            return Err(Error::Singular { column: col, pivot });
        }
        m.swap(col, pivot_row);
        rhs.swap(col, pivot_row);
        let (top, bottom) = m.split_at_mut(col + 1);
        let pivot_vals = &top[col];
        for (offset, row) in bottom.iter_mut().enumerate() {
            let factor = row[col] / pivot;
            if factor == 0.0 {
                continue;
            }
            for (r, p) in row[col..].iter_mut().zip(&pivot_vals[col..]) {
                *r -= factor * p;
            }
            rhs[col + 1 + offset] -= factor * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let tail: f64 = m[i][i + 1..]
            .iter()
            .zip(&x[i + 1..])
            .map(|(a, x)| a * x)
            .sum();
        x[i] = (rhs[i] - tail) / m[i][i];
    }
    Vector::from_raw(x, "direct_solve_oracle")
}
