//! Dense row-major matrices, the `p` exponent of entry-wise norms, and column
//! subsets.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::linalg;

/// Errors raised by matrix construction and arithmetic.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum MatrixError {
    #[error("matrix dimensions must be positive, got {rows}x{cols}")]
    EmptyShape { rows: usize, cols: usize },
    #[error("a {rows}x{cols} matrix needs {expected} entries, got {got}")]
    LengthMismatch {
        rows: usize,
        cols: usize,
        expected: usize,
        got: usize,
    },
    #[error("ragged input: row {row} has {got} entries, expected {expected}")]
    RaggedRows {
        row: usize,
        expected: usize,
        got: usize,
    },
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("column index {index} out of range for {cols} columns")]
    IndexOutOfRange { index: usize, cols: usize },
    #[error("column subset {indices:?} is not strictly increasing")]
    NotIncreasing { indices: Vec<usize> },
    #[error("column subset must not be empty")]
    EmptySubset,
    #[error("expected a square matrix, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is singular")]
    Singular,
}

/// Invalid exponent for an entry-wise norm.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum PNormError {
    #[error("p must satisfy p >= 1, got {0}")]
    BelowOne(f64),
    #[error("cannot parse {0:?} as p (expected a decimal >= 1 or \"inf\")")]
    Parse(String),
}

/// The exponent `p` of an entry-wise norm, `1 <= p <= inf`.
///
/// Infinity is its own variant; it is never represented by a large finite
/// stand-in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PNorm {
    Finite(f64),
    Infinity,
}

impl PNorm {
    pub const ONE: PNorm = PNorm::Finite(1.0);
    pub const TWO: PNorm = PNorm::Finite(2.0);

    pub fn new(p: f64) -> Result<Self, PNormError> {
        if p.is_nan() {
            return Err(PNormError::Parse("NaN".into()));
        }
        if p == f64::INFINITY {
            return Ok(PNorm::Infinity);
        }
        if p < 1.0 {
            return Err(PNormError::BelowOne(p));
        }
        Ok(PNorm::Finite(p))
    }

    /// The exponent as an `f64`, with `f64::INFINITY` for the max-norm.
    pub fn exponent(self) -> f64 {
        match self {
            PNorm::Finite(p) => p,
            PNorm::Infinity => f64::INFINITY,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, PNorm::Infinity)
    }

    /// The Hölder dual `q` with `1/p + 1/q = 1`.
    pub fn dual(self) -> PNorm {
        match self {
            PNorm::Infinity => PNorm::ONE,
            PNorm::Finite(1.0) => PNorm::Infinity,
            PNorm::Finite(p) => PNorm::Finite(p / (p - 1.0)),
        }
    }

    /// `x^p` for finite `p`, and `x` itself for the max-norm, where sums of
    /// p-th powers become maxima.
    pub fn pow(self, x: f64) -> f64 {
        match self {
            PNorm::Finite(p) => x.powf(p),
            PNorm::Infinity => x,
        }
    }

    /// Combines per-part norms into the norm of the concatenation:
    /// `(sum parts^p)^(1/p)`, or the maximum for `p = inf`.
    pub fn combine(self, parts: &[f64]) -> f64 {
        lp_norm(parts, self)
    }
}

impl fmt::Display for PNorm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PNorm::Finite(p) => write!(f, "{p}"),
            PNorm::Infinity => f.write_str("inf"),
        }
    }
}

impl FromStr for PNorm {
    type Err = PNormError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        match t.to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "∞" => Ok(PNorm::Infinity),
            other => {
                let p: f64 = other
                    .parse()
                    .map_err(|_| PNormError::Parse(s.to_string()))?;
                if !p.is_finite() {
                    return Err(PNormError::Parse(s.to_string()));
                }
                PNorm::new(p)
            }
        }
    }
}

/// Vector ℓp norm, computed with a max-scaling pass so that large `p` does
/// not overflow.
pub fn lp_norm(xs: &[f64], p: PNorm) -> f64 {
    let max = xs.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    match p {
        PNorm::Infinity => max,
        _ if max == 0.0 => 0.0,
        PNorm::Finite(1.0) => xs.iter().map(|x| x.abs()).sum(),
        PNorm::Finite(2.0) => max * xs.iter().map(|x| (x / max).powi(2)).sum::<f64>().sqrt(),
        PNorm::Finite(p) => {
            max * xs
                .iter()
                .map(|x| (x.abs() / max).powf(p))
                .sum::<f64>()
                .powf(1.0 / p)
        }
    }
}

/// Whether a subset is an unordered set (strictly increasing) or an
/// arbitrary index sequence that may repeat or reorder columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SubsetKind {
    Proper,
    Sequence,
}

/// An ordered tuple of zero-based column indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ColumnSubset {
    indices: Vec<usize>,
    kind: SubsetKind,
}

impl ColumnSubset {
    /// A strictly increasing subset of `0..m`.
    pub fn proper(indices: Vec<usize>, m: usize) -> Result<Self, MatrixError> {
        Self::check_range(&indices, m)?;
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(MatrixError::NotIncreasing { indices });
        }
        Ok(Self {
            indices,
            kind: SubsetKind::Proper,
        })
    }

    /// An index sequence over `0..m`; repeats and any order are allowed.
    pub fn sequence(indices: Vec<usize>, m: usize) -> Result<Self, MatrixError> {
        Self::check_range(&indices, m)?;
        Ok(Self {
            indices,
            kind: SubsetKind::Sequence,
        })
    }

    /// Every column `0..m`, in order.
    pub fn all(m: usize) -> Self {
        Self {
            indices: (0..m).collect(),
            kind: SubsetKind::Proper,
        }
    }

    fn check_range(indices: &[usize], m: usize) -> Result<(), MatrixError> {
        if indices.is_empty() {
            return Err(MatrixError::EmptySubset);
        }
        match indices.iter().find(|&&i| i >= m) {
            Some(&index) => Err(MatrixError::IndexOutOfRange { index, cols: m }),
            None => Ok(()),
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn kind(&self) -> SubsetKind {
        self.kind
    }

    pub fn contains(&self, j: usize) -> bool {
        self.indices.contains(&j)
    }

    /// True when no index repeats.
    pub fn is_distinct(&self) -> bool {
        let mut sorted = self.indices.clone();
        sorted.sort_unstable();
        sorted.windows(2).all(|w| w[0] != w[1])
    }
}

impl fmt::Display for ColumnSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.indices)
    }
}

/// A real `rows x cols` matrix stored row-major. Entries are always finite.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, MatrixError> {
        if rows == 0 || cols == 0 {
            return Err(MatrixError::EmptyShape { rows, cols });
        }
        if data.len() != rows * cols {
            return Err(MatrixError::LengthMismatch {
                rows,
                cols,
                expected: rows * cols,
                got: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            return Err(MatrixError::NonFinite {
                row: pos / cols,
                col: pos % cols,
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, MatrixError> {
        let n = rows.len();
        let m = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(n * m);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != m {
                return Err(MatrixError::RaggedRows {
                    row: i,
                    expected: m,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(n, m, data)
    }

    /// Builds a matrix entry by entry. Panics on an empty shape.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(rows > 0 && cols > 0, "empty shape {rows}x{cols}");
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        debug_assert!(data.iter().all(|x| x.is_finite()));
        Self { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::from_fn(rows, cols, |_, _| 0.0)
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    /// A single column built from a vector.
    pub fn column_vector(v: &[f64]) -> Result<Self, MatrixError> {
        Self::new(v.len(), 1, v.to_vec())
    }

    /// Stacks equal-length column vectors side by side.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self, MatrixError> {
        let m = columns.len();
        let n = columns.first().map_or(0, Vec::len);
        if let Some((j, c)) = columns.iter().enumerate().find(|(_, c)| c.len() != n) {
            return Err(MatrixError::RaggedRows {
                row: j,
                expected: n,
                got: c.len(),
            });
        }
        let mut data = vec![0.0; n * m];
        for (j, c) in columns.iter().enumerate() {
            for (i, &x) in c.iter().enumerate() {
                data[i * m + j] = x;
            }
        }
        Self::new(n, m, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn columns(&self) -> Vec<Vec<f64>> {
        (0..self.cols).map(|j| self.column(j)).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<Self, MatrixError> {
        if self.cols != other.rows {
            return Err(MatrixError::ShapeMismatch {
                op: "matmul",
                left: self.shape(),
                right: other.shape(),
            });
        }
        let (n, k, m) = (self.rows, self.cols, other.cols);
        let mut data = vec![0.0; n * m];
        for i in 0..n {
            let out = &mut data[i * m..(i + 1) * m];
            for (l, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out.iter_mut().zip(other.row(l)) {
                    *o += a * b;
                }
            }
        }
        debug_assert_eq!(k, other.rows);
        Ok(Self {
            rows: n,
            cols: m,
            data,
        })
    }

    /// `self * x` for a vector `x`.
    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>, MatrixError> {
        if x.len() != self.cols {
            return Err(MatrixError::ShapeMismatch {
                op: "mul_vec",
                left: self.shape(),
                right: (x.len(), 1),
            });
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect())
    }

    fn zip_with(
        &self,
        other: &DenseMatrix,
        op: &'static str,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Self, MatrixError> {
        if self.shape() != other.shape() {
            return Err(MatrixError::ShapeMismatch {
                op,
                left: self.shape(),
                right: other.shape(),
            });
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &DenseMatrix) -> Result<Self, MatrixError> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &DenseMatrix) -> Result<Self, MatrixError> {
        self.zip_with(other, "sub", |a, b| a - b)
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| c * x).collect(),
        }
    }

    /// Applies `f` to every entry.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_fn(self.rows, self.cols, |i, j| f(self.get(i, j)))
    }

    /// The `n x |J|` matrix of the selected columns, in the order of `J`.
    pub fn submatrix_columns(&self, subset: &ColumnSubset) -> Result<Self, MatrixError> {
        if let Some(&index) = subset.indices().iter().find(|&&j| j >= self.cols) {
            return Err(MatrixError::IndexOutOfRange {
                index,
                cols: self.cols,
            });
        }
        Ok(self.select_columns(subset.indices()))
    }

    /// Column selection by raw indices. Panics if an index is out of range.
    pub fn select_columns(&self, indices: &[usize]) -> Self {
        Self::from_fn(self.rows, indices.len(), |i, t| self.get(i, indices[t]))
    }

    /// Row selection by raw indices. Panics if an index is out of range.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        Self::from_fn(indices.len(), self.cols, |t, j| self.get(indices[t], j))
    }

    /// Concatenates `[self, other]` horizontally.
    pub fn hstack(&self, other: &DenseMatrix) -> Result<Self, MatrixError> {
        if self.rows != other.rows {
            return Err(MatrixError::ShapeMismatch {
                op: "hstack",
                left: self.shape(),
                right: other.shape(),
            });
        }
        let cols = self.cols + other.cols;
        Ok(Self::from_fn(self.rows, cols, |i, j| {
            if j < self.cols {
                self.get(i, j)
            } else {
                other.get(i, j - self.cols)
            }
        }))
    }

    /// The entry-wise ℓp norm: `(sum |a_ij|^p)^(1/p)`, or `max |a_ij|` at
    /// `p = inf`. This is not an operator or Schatten norm.
    pub fn entrywise_norm(&self, p: PNorm) -> f64 {
        lp_norm(&self.data, p)
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        lp_norm(&self.data, PNorm::Infinity)
    }

    /// Determinant by LU factorization with partial pivoting.
    pub fn determinant(&self) -> Result<f64, MatrixError> {
        if self.rows != self.cols {
            return Err(MatrixError::NotSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        Ok(linalg::Lu::new(self)?.determinant())
    }

    /// Singular values in non-increasing order.
    pub fn singular_values(&self) -> Vec<f64> {
        linalg::singular_values(self)
    }

    /// Number of singular values above `tol` times the largest one.
    pub fn numerical_rank(&self, tol: f64) -> usize {
        let sv = self.singular_values();
        match sv.first() {
            Some(&top) if top > 0.0 => sv.iter().filter(|&&s| s > tol * top).count(),
            _ => 0,
        }
    }

    pub fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    /// Converts back from nalgebra; panics on an empty shape.
    pub fn from_nalgebra(m: &DMatrix<f64>) -> Self {
        Self::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }
}

/// Default relative tolerance for [`DenseMatrix::numerical_rank`].
pub const DEFAULT_RANK_TOL: f64 = 1e-10;
