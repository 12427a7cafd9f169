//! Small dense/sparse matrix kernel.
//!
//! Only the operations needed by the graph builders and the factorization
//! solver are provided. Everything is `f64`, row-major, and single-threaded
//! so that results are bit-for-bit reproducible.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl DenseMatrix {
    /// Builds a matrix from row-major values. Fails on a length mismatch or
    /// on any NaN/Inf entry.
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::contract(format!(
                "dense matrix {}x{} needs {} values, got {}",
                rows,
                cols,
                rows * cols,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / cols.max(1),
                col: pos % cols.max(1),
                value: values[pos],
            });
        }
        Ok(Self { rows, cols, values })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            values: vec![0.0; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self {
            rows,
            cols,
            values: vec![value; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Builds a matrix from a slice of equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, |r| r.as_ref().len());
        let mut values = Vec::with_capacity(n * d);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != d {
                return Err(Error::contract(format!(
                    "row {i} has length {}, expected {d}",
                    r.len()
                )));
            }
            values.extend_from_slice(r);
        }
        Self::new(n, d, values)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                values.push(f(i, j));
            }
        }
        Self { rows, cols, values }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact panics on 0, and a zero-width matrix still has rows.
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.values[j * self.rows + i] = self.values[i * self.cols + j];
            }
        }
        t
    }

    /// `self * other`.
    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        matmul(self, other)
    }

    /// `self^T * other` without materializing the transpose.
    pub fn t_matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.rows != other.rows {
            return Err(Error::contract(format!(
                "t_matmul: {}x{} transposed times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.cols, other.cols);
        for r in 0..self.rows {
            let a = self.row(r);
            let b = other.row(r);
            for (i, &av) in a.iter().enumerate() {
                if av == 0.0 {
                    continue;
                }
                let dst = out.row_mut(i);
                for (d, &bv) in dst.iter_mut().zip(b) {
                    *d += av * bv;
                }
            }
        }
        Ok(out)
    }

    /// `self * other^T` without materializing the transpose.
    pub fn matmul_t(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.cols {
            return Err(Error::contract(format!(
                "matmul_t: {}x{} times ({}x{})^T",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            let a = self.row(i);
            for j in 0..other.rows {
                out.values[i * other.rows + j] = dot(a, other.row(j));
            }
        }
        Ok(out)
    }

    fn check_same_shape(&self, other: &DenseMatrix, op: &str) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::contract(format!(
                "{op}: shapes {:?} and {:?} differ",
                self.shape(),
                other.shape()
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        self.zip_map(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        self.zip_map(other, "sub", |a, b| a - b)
    }

    pub fn add_assign(&mut self, other: &DenseMatrix) -> Result<()> {
        self.check_same_shape(other, "add_assign")?;
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += b;
        }
        Ok(())
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: f64, other: &DenseMatrix) -> Result<()> {
        self.check_same_shape(other, "axpy")?;
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += alpha * b;
        }
        Ok(())
    }

    pub fn zip_map(
        &self,
        other: &DenseMatrix,
        op: &str,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<DenseMatrix> {
        self.check_same_shape(other, op)?;
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> DenseMatrix {
        Self {
            rows: self.rows,
            cols: self.cols,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, alpha: f64) -> DenseMatrix {
        self.map(|v| alpha * v)
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.frobenius_norm_sq().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_nonnegative(&self) -> bool {
        self.values.iter().all(|&v| v >= 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.row_iter().map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.cols];
        for r in self.row_iter() {
            for (s, v) in sums.iter_mut().zip(r) {
                *s += v;
            }
        }
        sums
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Index of the largest entry in each row (lowest index on ties).
    pub fn row_argmax(&self) -> Vec<usize> {
        self.row_iter()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| {
                        if v > bv {
                            (i, v)
                        } else {
                            (bi, bv)
                        }
                    })
                    .0
            })
            .collect()
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.values[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.values[i * self.cols + j]
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Dense matrix product.
pub fn matmul(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if a.cols != b.rows {
        return Err(Error::contract(format!(
            "matmul: {}x{} times {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    let mut out = DenseMatrix::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        let arow = a.row(i);
        let dst = &mut out.values[i * b.cols..(i + 1) * b.cols];
        for (k, &av) in arow.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            for (d, &bv) in dst.iter_mut().zip(b.row(k)) {
                *d += av * bv;
            }
        }
    }
    Ok(out)
}

/// Splits `m` into its positive and negative parts, `m = plus - minus`.
pub fn pos_neg_split(m: &DenseMatrix) -> (DenseMatrix, DenseMatrix) {
    (
        m.map(|v| (v.abs() + v) / 2.0),
        m.map(|v| (v.abs() - v) / 2.0),
    )
}

/// `Tr(a^T b)`, computed as the sum of the element-wise product.
pub fn trace_product(a: &DenseMatrix, b: &DenseMatrix) -> Result<f64> {
    a.check_same_shape(b, "trace_product")?;
    Ok(dot(&a.values, &b.values))
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
fn cholesky(m: &DenseMatrix) -> Option<DenseMatrix> {
    let n = m.rows;
    let scale = (0..n).fold(0.0f64, |s, i| s.max(m[(i, i)].abs()));
    let tiny = f64::EPSILON * scale * n as f64;
    let mut l = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = m[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > tiny) {
            return None;
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in j + 1..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Some(l)
}

/// Inverse of `m + ridge * I` for symmetric positive semi-definite `m`,
/// computed through a Cholesky factorization.
pub fn ridge_inverse(m: &DenseMatrix, ridge: f64) -> Result<DenseMatrix> {
    if m.rows != m.cols {
        return Err(Error::contract(format!(
            "ridge_inverse: matrix is {}x{}",
            m.rows, m.cols
        )));
    }
    if !(ridge >= 0.0) {
        return Err(Error::contract(format!("ridge must be >= 0, got {ridge}")));
    }
    let n = m.rows;
    let mut shifted = m.clone();
    for i in 0..n {
        shifted[(i, i)] += ridge;
    }
    let l = cholesky(&shifted)
        .ok_or_else(|| Error::Singular(format!("{n}x{n} Gram matrix with ridge {ridge:e}")))?;

    // Solve L L^T X = I column by column.
    let mut inv = DenseMatrix::zeros(n, n);
    let mut y = vec![0.0; n];
    for col in 0..n {
        for i in 0..n {
            let mut s = if i == col { 1.0 } else { 0.0 };
            for k in 0..i {
                s -= l[(i, k)] * y[k];
            }
            y[i] = s / l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= l[(k, i)] * inv[(k, col)];
            }
            inv[(i, col)] = s / l[(i, i)];
        }
    }
    // Symmetrize away rounding asymmetry.
    for i in 0..n {
        for j in i + 1..n {
            let v = 0.5 * (inv[(i, j)] + inv[(j, i)]);
            inv[(i, j)] = v;
            inv[(j, i)] = v;
        }
    }
    if !inv.is_finite() {
        return Err(Error::Singular(format!(
            "{n}x{n} inverse is not finite (ridge {ridge:e})"
        )));
    }
    Ok(inv)
}

/// Diagonal matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagMatrix {
    diagonal: Vec<f64>,
}

impl DiagMatrix {
    pub fn new(diagonal: Vec<f64>) -> Self {
        Self { diagonal }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            diagonal: vec![0.0; n],
        }
    }

    pub fn size(&self) -> usize {
        self.diagonal.len()
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    pub fn add(&self, other: &DiagMatrix) -> Result<DiagMatrix> {
        if self.size() != other.size() {
            return Err(Error::contract(format!(
                "diag add: sizes {} and {}",
                self.size(),
                other.size()
            )));
        }
        Ok(Self {
            diagonal: self
                .diagonal
                .iter()
                .zip(&other.diagonal)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    /// `self * m`, i.e. scales row `i` of `m` by `d_i`.
    pub fn mul_dense(&self, m: &DenseMatrix) -> Result<DenseMatrix> {
        if self.size() != m.rows() {
            return Err(Error::contract(format!(
                "diag({}) times {}x{}",
                self.size(),
                m.rows(),
                m.cols()
            )));
        }
        let mut out = m.clone();
        for (i, &d) in self.diagonal.iter().enumerate() {
            for v in out.row_mut(i) {
                *v *= d;
            }
        }
        Ok(out)
    }

    pub fn to_sparse(&self) -> SparseMatrix {
        let n = self.size();
        SparseMatrix::from_sorted_unchecked(
            n,
            n,
            self.diagonal
                .iter()
                .enumerate()
                .filter(|(_, &v)| v != 0.0)
                .map(|(i, &v)| (i, i, v)),
        )
    }
}

/// Sparse matrix. Entries are accepted and reported as coordinate triplets
/// and stored in compressed-row form, so iteration is always row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            indptr: vec![0; rows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Builds from `(row, col, value)` triplets in any order. Explicit zeros
    /// are dropped. Out-of-range indices, duplicate coordinates and
    /// non-finite values are rejected.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        mut triplets: Vec<(usize, usize, f64)>,
    ) -> Result<Self> {
        for &(i, j, v) in &triplets {
            if i >= rows || j >= cols {
                return Err(Error::contract(format!(
                    "entry ({i}, {j}) outside {rows}x{cols}"
                )));
            }
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    row: i,
                    col: j,
                    value: v,
                });
            }
        }
        triplets.sort_by_key(|&(i, j, _)| (i, j));
        if let Some(w) = triplets
            .windows(2)
            .find(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1))
        {
            return Err(Error::contract(format!(
                "duplicate entry at ({}, {})",
                w[0].0, w[0].1
            )));
        }
        Ok(Self::from_sorted_unchecked(
            rows,
            cols,
            triplets.into_iter().filter(|t| t.2 != 0.0),
        ))
    }

    /// Triplets must be row-major sorted, unique, in range and nonzero.
    pub(crate) fn from_sorted_unchecked(
        rows: usize,
        cols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Self {
        let mut indptr = vec![0usize; rows + 1];
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for (i, j, v) in triplets {
            indptr[i + 1] += 1;
            indices.push(j);
            values.push(v);
        }
        for i in 0..rows {
            indptr[i + 1] += indptr[i];
        }
        Self {
            rows,
            cols,
            indptr,
            indices,
            values,
        }
    }

    pub fn from_dense(m: &DenseMatrix) -> Self {
        Self::from_sorted_unchecked(
            m.rows(),
            m.cols(),
            (0..m.rows())
                .flat_map(|i| (0..m.cols()).map(move |j| (i, j)))
                .map(|(i, j)| (i, j, m[(i, j)]))
                .filter(|t| t.2 != 0.0),
        )
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Stored entries of row `i` as parallel (column, value) slices.
    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        (&self.indices[a..b], &self.values[a..b])
    }

    /// Row-major iterator over stored `(row, col, value)` entries.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |i| {
            let (idx, vals) = self.row(i);
            idx.iter().zip(vals).map(move |(&j, &v)| (i, j, v))
        })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (idx, vals) = self.row(i);
        idx.binary_search(&j).map_or(0.0, |p| vals[p])
    }

    pub fn is_nonnegative(&self) -> bool {
        self.values.iter().all(|&v| v > 0.0)
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.rows, self.cols);
        for (i, j, v) in self.triplets() {
            d[(i, j)] = v;
        }
        d
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut counts = vec![0usize; self.cols + 1];
        for &j in &self.indices {
            counts[j + 1] += 1;
        }
        for j in 0..self.cols {
            counts[j + 1] += counts[j];
        }
        let indptr = counts.clone();
        let mut next = counts;
        let mut indices = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        // Rows are visited in increasing order, so each transposed row stays sorted.
        for (i, j, v) in self.triplets() {
            let p = next[j];
            indices[p] = i;
            values[p] = v;
            next[j] += 1;
        }
        SparseMatrix {
            rows: self.cols,
            cols: self.rows,
            indptr,
            indices,
            values,
        }
    }

    pub fn is_symmetric(&self) -> bool {
        self.rows == self.cols && *self == self.transpose()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows).map(|i| self.row(i).1.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.cols];
        for (_, j, v) in self.triplets() {
            sums[j] += v;
        }
        sums
    }

    pub fn scale(&self, alpha: f64) -> SparseMatrix {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= alpha);
        out.prune_zeros()
    }

    fn prune_zeros(self) -> SparseMatrix {
        if self.values.iter().all(|&v| v != 0.0) {
            return self;
        }
        let (rows, cols) = self.shape();
        Self::from_sorted_unchecked(
            rows,
            cols,
            self.triplets()
                .filter(|t| t.2 != 0.0)
                .collect::<Vec<_>>(),
        )
    }

    /// Element-wise `alpha * self + beta * other` (sorted merge of rows).
    pub fn linear_combination(
        &self,
        alpha: f64,
        other: &SparseMatrix,
        beta: f64,
    ) -> Result<SparseMatrix> {
        if self.shape() != other.shape() {
            return Err(Error::contract(format!(
                "sparse add: shapes {:?} and {:?}",
                self.shape(),
                other.shape()
            )));
        }
        let mut triplets = Vec::with_capacity(self.nnz() + other.nnz());
        for i in 0..self.rows {
            let (ai, av) = self.row(i);
            let (bi, bv) = other.row(i);
            let (mut p, mut q) = (0, 0);
            while p < ai.len() || q < bi.len() {
                let (j, v) = if q == bi.len() || (p < ai.len() && ai[p] < bi[q]) {
                    p += 1;
                    (ai[p - 1], alpha * av[p - 1])
                } else if p == ai.len() || bi[q] < ai[p] {
                    q += 1;
                    (bi[q - 1], beta * bv[q - 1])
                } else {
                    p += 1;
                    q += 1;
                    (ai[p - 1], alpha * av[p - 1] + beta * bv[q - 1])
                };
                if v != 0.0 {
                    triplets.push((i, j, v));
                }
            }
        }
        Ok(Self::from_sorted_unchecked(self.rows, self.cols, triplets))
    }

    pub fn add(&self, other: &SparseMatrix) -> Result<SparseMatrix> {
        self.linear_combination(1.0, other, 1.0)
    }

    /// `self * m` for dense `m`.
    pub fn mul_dense(&self, m: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != m.rows() {
            return Err(Error::contract(format!(
                "sparse {}x{} times dense {}x{}",
                self.rows,
                self.cols,
                m.rows(),
                m.cols()
            )));
        }
        let mut out = DenseMatrix::zeros(self.rows, m.cols());
        for i in 0..self.rows {
            let (idx, vals) = self.row(i);
            let dst = out.row_mut(i);
            for (&j, &v) in idx.iter().zip(vals) {
                for (d, &x) in dst.iter_mut().zip(m.row(j)) {
                    *d += v * x;
                }
            }
        }
        Ok(out)
    }

    /// `self^T * m` for dense `m`, without building the transpose.
    pub fn t_mul_dense(&self, m: &DenseMatrix) -> Result<DenseMatrix> {
        if self.rows != m.rows() {
            return Err(Error::contract(format!(
                "sparse ({}x{})^T times dense {}x{}",
                self.rows,
                self.cols,
                m.rows(),
                m.cols()
            )));
        }
        let mut out = DenseMatrix::zeros(self.cols, m.cols());
        for i in 0..self.rows {
            let (idx, vals) = self.row(i);
            let src = m.row(i);
            for (&j, &v) in idx.iter().zip(vals) {
                for (d, &x) in out.row_mut(j).iter_mut().zip(src) {
                    *d += v * x;
                }
            }
        }
        Ok(out)
    }

    /// Positive and negative parts, `self = plus - minus`.
    pub fn pos_neg_split(&self) -> (SparseMatrix, SparseMatrix) {
        let pick = |keep_pos: bool| {
            Self::from_sorted_unchecked(
                self.rows,
                self.cols,
                self.triplets()
                    .filter(|t| (t.2 > 0.0) == keep_pos)
                    .map(|(i, j, v)| (i, j, v.abs()))
                    .collect::<Vec<_>>(),
            )
        };
        (pick(true), pick(false))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_dense(rng: &mut impl Rng, r: usize, c: usize) -> DenseMatrix {
        DenseMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
    }

    fn m(rows: &[&[f64]]) -> DenseMatrix {
        DenseMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn matmul_hand_cases() {
        let a = m(&[&[1.0, 2.0], &[3.0, 4.0]]);
        assert_eq!(DenseMatrix::identity(2).matmul(&a).unwrap(), a);
        let p = m(&[&[1.0, 0.0], &[0.0, 0.0]])
            .matmul(&m(&[&[0.0, 1.0], &[1.0, 0.0]]))
            .unwrap();
        assert_eq!(p, m(&[&[0.0, 1.0], &[0.0, 0.0]]));
    }

    #[test]
    fn matmul_matches_triple_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_dense(&mut rng, 3, 4);
        let b = random_dense(&mut rng, 4, 2);
        let p = matmul(&a, &b).unwrap();
        for i in 0..3 {
            for j in 0..2 {
                let mut s = 0.0;
                for k in 0..4 {
                    s += a[(i, k)] * b[(k, j)];
                }
                assert!((p[(i, j)] - s).abs() < 1e-15);
            }
        }
        assert!(p.matmul(&a).is_err());
    }

    #[test]
    fn transposed_products_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_dense(&mut rng, 5, 3);
        let b = random_dense(&mut rng, 5, 2);
        let c = random_dense(&mut rng, 4, 3);
        let t1 = a.t_matmul(&b).unwrap();
        let t2 = a.transpose().matmul(&b).unwrap();
        assert!(t1.sub(&t2).unwrap().max_abs() < 1e-14);
        let u1 = a.matmul_t(&c).unwrap();
        let u2 = a.matmul(&c.transpose()).unwrap();
        assert!(u1.sub(&u2).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn pos_neg_split_examples() {
        let (p, n) = pos_neg_split(&m(&[&[1.0, -2.0], &[0.0, 3.0]]));
        assert_eq!(p, m(&[&[1.0, 0.0], &[0.0, 3.0]]));
        assert_eq!(n, m(&[&[0.0, 2.0], &[0.0, 0.0]]));
        let nonneg = m(&[&[1.0, 2.0], &[0.5, 0.0]]);
        let (p, n) = pos_neg_split(&nonneg);
        assert_eq!(p, nonneg);
        assert_eq!(n, DenseMatrix::zeros(2, 2));
    }

    #[test]
    fn sums() {
        let a = m(&[&[1.0, 2.0], &[3.0, 4.0]]);
        assert_eq!(a.row_sums(), vec![3.0, 7.0]);
        assert_eq!(a.col_sums(), vec![4.0, 6.0]);
        let z = DenseMatrix::zeros(3, 2);
        assert_eq!(z.row_sums(), vec![0.0; 3]);
        assert_eq!(z.col_sums(), vec![0.0; 2]);
    }

    #[test]
    fn sparse_sums_match_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut trip = Vec::new();
        let mut seen = std::collections::HashSet::new();
        while trip.len() < 50 {
            let (i, j) = (rng.random_range(0..100), rng.random_range(0..100));
            if seen.insert((i, j)) {
                trip.push((i, j, rng.random_range(0.1..2.0)));
            }
        }
        let s = SparseMatrix::from_triplets(100, 100, trip).unwrap();
        let d = s.to_dense();
        assert_eq!(s.row_sums(), d.row_sums());
        let (sc, dc) = (s.col_sums(), d.col_sums());
        for (a, b) in sc.iter().zip(&dc) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn trace_product_cases() {
        let i3 = DenseMatrix::identity(3);
        assert_eq!(trace_product(&i3, &i3).unwrap(), 3.0);
        let a = m(&[&[1.0, 2.0], &[3.0, 4.0]]);
        assert_eq!(trace_product(&a, &DenseMatrix::identity(2)).unwrap(), 5.0);
        assert!(trace_product(&a, &i3).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = random_dense(&mut rng, 5, 3);
        let b = random_dense(&mut rng, 5, 3);
        let oracle = a.transpose().matmul(&b).unwrap().trace();
        assert!((trace_product(&a, &b).unwrap() - oracle).abs() < 1e-12);
        assert_eq!(
            trace_product(&a, &b).unwrap(),
            trace_product(&b, &a).unwrap()
        );
    }

    #[test]
    fn ridge_inverse_cases() {
        assert_eq!(
            ridge_inverse(&DenseMatrix::identity(2), 0.0).unwrap(),
            DenseMatrix::identity(2)
        );
        let inv = ridge_inverse(&DenseMatrix::from_diag(&[2.0, 4.0]), 0.0).unwrap();
        assert!(inv.sub(&DenseMatrix::from_diag(&[0.5, 0.25])).unwrap().max_abs() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let g = DenseMatrix::from_fn(8, 3, |_, _| rng.random_range(0.0..1.0));
        let gram = g.t_matmul(&g).unwrap();
        let inv = ridge_inverse(&gram, 1e-10).unwrap();
        let mut shifted = gram.clone();
        for i in 0..3 {
            shifted[(i, i)] += 1e-10;
        }
        let resid = shifted
            .matmul(&inv)
            .unwrap()
            .sub(&DenseMatrix::identity(3))
            .unwrap();
        assert!(resid.frobenius_norm() <= 1e-6);
    }

    #[test]
    fn ridge_inverse_singular() {
        let s = m(&[&[1.0, 1.0], &[1.0, 1.0]]);
        assert!(matches!(ridge_inverse(&s, 0.0), Err(Error::Singular(_))));
        assert!(ridge_inverse(&s, 1e-3).is_ok());
        assert!(ridge_inverse(&DenseMatrix::zeros(2, 3), 0.0).is_err());
    }

    #[test]
    fn sparse_construction_rules() {
        assert!(SparseMatrix::from_triplets(2, 2, vec![(2, 0, 1.0)]).is_err());
        assert!(SparseMatrix::from_triplets(2, 2, vec![(0, 0, 1.0), (0, 0, 2.0)]).is_err());
        let s =
            SparseMatrix::from_triplets(2, 3, vec![(1, 2, 3.0), (0, 1, 0.0), (0, 0, 1.0)]).unwrap();
        assert_eq!(s.nnz(), 2);
        assert_eq!(s.triplets().collect::<Vec<_>>(), vec![(0, 0, 1.0), (1, 2, 3.0)]);
        assert!(s.is_nonnegative());
        assert_eq!(s.transpose().get(2, 1), 3.0);
    }

    #[test]
    fn sparse_products_match_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let d = DenseMatrix::from_fn(6, 5, |_, _| {
            if rng.random_bool(0.4) {
                rng.random_range(-1.0..1.0)
            } else {
                0.0
            }
        });
        let s = SparseMatrix::from_dense(&d);
        let x = random_dense(&mut rng, 5, 3);
        let y = random_dense(&mut rng, 6, 3);
        let a = s.mul_dense(&x).unwrap().sub(&d.matmul(&x).unwrap()).unwrap();
        assert!(a.max_abs() < 1e-14);
        let b = s
            .t_mul_dense(&y)
            .unwrap()
            .sub(&d.t_matmul(&y).unwrap())
            .unwrap();
        assert!(b.max_abs() < 1e-14);

        let (p, n) = s.pos_neg_split();
        let back = p.linear_combination(1.0, &n, -1.0).unwrap();
        assert_eq!(back, s);
        let sum = s.add(&s.scale(-1.0)).unwrap();
        assert_eq!(sum.nnz(), 0);
    }

    proptest! {
        #[test]
        fn split_reconstructs_exactly(vals in proptest::collection::vec(-1e6f64..1e6, 16)) {
            let a = DenseMatrix::new(4, 4, vals).unwrap();
            let (p, n) = pos_neg_split(&a);
            prop_assert!(p.is_nonnegative() && n.is_nonnegative());
            for i in 0..4 {
                for j in 0..4 {
                    prop_assert_eq!(p[(i, j)] - n[(i, j)], a[(i, j)]);
                    prop_assert_eq!(p[(i, j)].min(n[(i, j)]), 0.0);
                }
            }
        }

        #[test]
        fn identity_is_exact(vals in proptest::collection::vec(-1000i32..1000, 12)) {
            let a = DenseMatrix::new(3, 4, vals.into_iter().map(f64::from).collect()).unwrap();
            prop_assert_eq!(DenseMatrix::identity(3).matmul(&a).unwrap(), a.clone());
            prop_assert_eq!(a.matmul(&DenseMatrix::identity(4)).unwrap(), a);
        }
    }
}
