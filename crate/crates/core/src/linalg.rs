//! Dense vectors, CSR sparse matrices and the handful of kernels the
//! recurrences need.
//!
//! All reductions accumulate left to right in `f64` with no compensation, so
//! `dot(u, v)` and `dot(v, u)` agree bitwise. Every kernel that builds a new
//! vector rejects non-finite results instead of passing them on.

use std::fmt;
use std::ops::Index;

use crate::error::{Error, Result};

/// Scalars are plain `f64`; finiteness is checked where they are produced.
pub type Scalar = f64;

/// A dense vector with finite entries.
#[derive(Clone, PartialEq)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(data: Vec<f64>) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::DimensionMismatch {
                op: "Vector::new",
                expected: 1,
                found: 0,
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { op: "Vector::new" });
        }
        Ok(Vector(data))
    }

    pub fn zeros(n: usize) -> Self {
        Vector(vec![0.0; n])
    }

    pub fn ones(n: usize) -> Self {
        Vector(vec![1.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn dot(&self, other: &Vector) -> Result<Scalar> {
        dot(self, other)
    }

    pub fn norm2(&self) -> Scalar {
        norm2(self)
    }

    pub fn norm_inf(&self) -> Scalar {
        self.0.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }

    /// `c · self`, checked.
    pub fn scale(&self, c: Scalar) -> Result<Vector> {
        Vector::from_raw(self.0.iter().map(|v| c * v).collect(), "scale")
    }

    /// `self - other`, checked.
    pub fn sub(&self, other: &Vector) -> Result<Vector> {
        combine(&[1.0, -1.0], &[self, other])
    }

    pub(crate) fn from_raw(data: Vec<f64>, op: &'static str) -> Result<Vector> {
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { op });
        }
        Ok(Vector(data))
    }
}

impl Index<usize> for Vector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl fmt::Debug for Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.0.iter()).finish()
    }
}

impl TryFrom<Vec<f64>> for Vector {
    type Error = Error;

    fn try_from(data: Vec<f64>) -> Result<Self> {
        Vector::new(data)
    }
}

fn check_len(op: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch {
            op,
            expected,
            found,
        });
    }
    Ok(())
}

pub fn dot(u: &Vector, v: &Vector) -> Result<Scalar> {
    check_len("dot", u.len(), v.len())?;
    Ok(u.0.iter().zip(&v.0).fold(0.0, |acc, (a, b)| acc + a * b))
}

pub fn norm2(v: &Vector) -> Scalar {
    v.0.iter().fold(0.0, |acc, a| acc + a * a).sqrt()
}

/// `M · v`.
pub fn matvec(m: &CsrMatrix, v: &Vector) -> Result<Vector> {
    check_len("matvec", m.ncols, v.len())?;
    let out = (0..m.nrows)
        .map(|i| {
            let (cols, vals) = m.row(i);
            cols.iter()
                .zip(vals)
                .fold(0.0, |acc, (&j, &a)| acc + a * v.0[j])
        })
        .collect();
    Vector::from_raw(out, "matvec")
}

/// `Mᵀ · v`, scattered row by row from the CSR arrays.
pub fn matvec_t(m: &CsrMatrix, v: &Vector) -> Result<Vector> {
    check_len("matvec_t", m.nrows, v.len())?;
    let mut out = vec![0.0; m.ncols];
    for i in 0..m.nrows {
        let vi = v.0[i];
        let (cols, vals) = m.row(i);
        for (&j, &a) in cols.iter().zip(vals) {
            out[j] += a * vi;
        }
    }
    Vector::from_raw(out, "matvec_t")
}

/// `Σ coeffs[i] · vecs[i]`.
pub fn combine(coeffs: &[Scalar], vecs: &[&Vector]) -> Result<Vector> {
    if coeffs.is_empty() || vecs.is_empty() {
        return Err(Error::EmptyCombination);
    }
    check_len("combine", coeffs.len(), vecs.len())?;
    let n = vecs[0].len();
    for v in vecs {
        check_len("combine", n, v.len())?;
    }
    let mut out = vec![0.0; n];
    for (&c, v) in coeffs.iter().zip(vecs) {
        for (o, &a) in out.iter_mut().zip(&v.0) {
            *o += c * a;
        }
    }
    Vector::from_raw(out, "combine")
}

/// Compressed sparse row matrix.
#[derive(Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    offsets: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from raw CSR arrays, validating the structure.
    pub fn new(
        nrows: usize,
        ncols: usize,
        offsets: Vec<usize>,
        indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if nrows == 0 || ncols == 0 {
            return Err(Error::InvalidCsr("dimensions must be positive".into()));
        }
        if offsets.len() != nrows + 1 {
            return Err(Error::InvalidCsr(format!(
                "offsets has length {}, expected {}",
                offsets.len(),
                nrows + 1
            )));
        }
        if offsets[0] != 0 || offsets.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidCsr(
                "offsets must start at 0 and be non-decreasing".into(),
            ));
        }
        if indices.len() != values.len() || *offsets.last().unwrap() != indices.len() {
            return Err(Error::InvalidCsr(
                "offsets, indices and values disagree in length".into(),
            ));
        }
        if let Some(&j) = indices.iter().find(|&&j| j >= ncols) {
            return Err(Error::InvalidCsr(format!("column index {j} out of range")));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                op: "CsrMatrix::new",
            });
        }
        Ok(CsrMatrix {
            nrows,
            ncols,
            offsets,
            indices,
            values,
        })
    }

    /// Assembles from (row, col, value) triplets. Duplicates are summed and
    /// columns within a row are sorted.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self> {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nrows];
        for &(i, j, v) in triplets {
            if i >= nrows || j >= ncols {
                return Err(Error::InvalidCsr(format!(
                    "entry ({i}, {j}) outside {nrows}x{ncols}"
                )));
            }
            rows[i].push((j, v));
        }
        let mut offsets = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        offsets.push(0);
        for mut row in rows {
            row.sort_by_key(|&(j, _)| j);
            for (j, v) in row {
                if indices.len() > *offsets.last().unwrap() && indices.last() == Some(&j) {
                    *values.last_mut().unwrap() += v;
                } else {
                    indices.push(j);
                    values.push(v);
                }
            }
            offsets.push(indices.len());
        }
        CsrMatrix::new(nrows, ncols, offsets, indices, values)
    }

    /// Wraps a dense row-major matrix, dropping exact zeros.
    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        let mut triplets = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            check_len("from_dense", ncols, row.len())?;
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    triplets.push((i, j, v));
                }
            }
        }
        CsrMatrix::from_triplets(nrows, ncols, &triplets)
    }

    pub fn identity(n: usize) -> Self {
        CsrMatrix::diagonal(&vec![1.0; n])
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        CsrMatrix {
            nrows: n,
            ncols: n,
            offsets: (0..=n).collect(),
            indices: (0..n).collect(),
            values: diag.to_vec(),
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_square(&self) -> bool {
        self.nrows == self.ncols
    }

    pub fn ensure_square(&self) -> Result<()> {
        if !self.is_square() {
            return Err(Error::NotSquare {
                nrows: self.nrows,
                ncols: self.ncols,
            });
        }
        Ok(())
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let span = self.offsets[i]..self.offsets[i + 1];
        (&self.indices[span.clone()], &self.values[span])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.iter()
            .zip(vals)
            .filter(|(&c, _)| c == j)
            .map(|(_, &v)| v)
            .sum()
    }

    /// Iterates stored entries as (row, col, value) in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&j, &v)| (i, j, v))
        })
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut dense = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, j, v) in self.triplets() {
            dense[i][j] += v;
        }
        dense
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.nrows)
            .map(|i| self.row(i).1.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

impl fmt::Debug for CsrMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CsrMatrix")
            .field("nrows", &self.nrows)
            .field("ncols", &self.ncols)
            .field("nnz", &self.nnz())
            .finish()
    }
}
