//! Compressed sparse row and column storage.
//!
//! Both layouts share one representation: a *major* axis with `indptr`
//! offsets and a *minor* axis stored in `indices`. CSR is row-major, CSC is
//! column-major; the arrays of the CSR form of `M` are exactly the arrays of
//! the CSC form of `Mᵀ`.

use serde::{Deserialize, Serialize};

use super::{l2_norm, normalize_slice, DenseMatrix, NormalizeReport};
use crate::{Error, Result};

/// `(row, col, value)`.
pub type Triplet = (usize, usize, f32);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Compressed {
    major: usize,
    minor: usize,
    indptr: Vec<usize>,
    indices: Vec<u32>,
    values: Vec<f32>,
}

impl Compressed {
    fn try_new(
        major: usize,
        minor: usize,
        indptr: Vec<usize>,
        indices: Vec<u32>,
        values: Vec<f32>,
    ) -> Result<Self> {
        if indptr.len() != major + 1 {
            return Err(Error::InvalidStructure(format!(
                "offset array has length {}, expected {}",
                indptr.len(),
                major + 1
            )));
        }
        if indptr[0] != 0 {
            return Err(Error::InvalidStructure("first offset must be 0".into()));
        }
        if indptr.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidStructure("offsets must be non-decreasing".into()));
        }
        let nnz = indptr[major];
        if indices.len() != nnz || values.len() != nnz {
            return Err(Error::InvalidStructure(format!(
                "last offset {nnz} disagrees with {} indices / {} values",
                indices.len(),
                values.len()
            )));
        }
        for lane in 0..major {
            let idx = &indices[indptr[lane]..indptr[lane + 1]];
            if idx.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidStructure(format!(
                    "indices of lane {lane} are not strictly increasing"
                )));
            }
            if let Some(&last) = idx.last() {
                if last as usize >= minor {
                    return Err(Error::IndexOutOfRange {
                        index: last as usize,
                        bound: minor,
                    });
                }
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("sparse value".into()));
        }
        Ok(Self {
            major,
            minor,
            indptr,
            indices,
            values,
        })
    }

    /// Builds from `(major, minor, value)` entries; duplicates are rejected.
    fn from_entries(major: usize, minor: usize, mut entries: Vec<(usize, usize, f32)>) -> Result<Self> {
        for &(a, b, _) in &entries {
            if a >= major {
                return Err(Error::IndexOutOfRange { index: a, bound: major });
            }
            if b >= minor {
                return Err(Error::IndexOutOfRange { index: b, bound: minor });
            }
        }
        entries.sort_by_key(|&(a, b, _)| (a, b));
        if entries.windows(2).any(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1)) {
            return Err(Error::InvalidStructure("duplicate entry".into()));
        }
        let mut indptr = vec![0usize; major + 1];
        for &(a, _, _) in &entries {
            indptr[a + 1] += 1;
        }
        for i in 0..major {
            indptr[i + 1] += indptr[i];
        }
        let indices = entries.iter().map(|&(_, b, _)| b as u32).collect();
        let values = entries.iter().map(|&(_, _, v)| v).collect();
        Self::try_new(major, minor, indptr, indices, values)
    }

    fn lane(&self, i: usize) -> (&[u32], &[f32]) {
        let r = self.indptr[i]..self.indptr[i + 1];
        (&self.indices[r.clone()], &self.values[r])
    }

    fn nnz(&self) -> usize {
        self.indptr[self.major]
    }

    /// Swaps the roles of major and minor axes (counting sort, stable).
    fn transposed(&self) -> Self {
        let mut indptr = vec![0usize; self.minor + 1];
        for &j in &self.indices {
            indptr[j as usize + 1] += 1;
        }
        for j in 0..self.minor {
            indptr[j + 1] += indptr[j];
        }
        let mut next = indptr.clone();
        let nnz = self.nnz();
        let mut indices = vec![0u32; nnz];
        let mut values = vec![0f32; nnz];
        for i in 0..self.major {
            let (idx, val) = self.lane(i);
            for (&j, &v) in idx.iter().zip(val) {
                let slot = &mut next[j as usize];
                indices[*slot] = i as u32;
                values[*slot] = v;
                *slot += 1;
            }
        }
        Self {
            major: self.minor,
            minor: self.major,
            indptr,
            indices,
            values,
        }
    }

    /// `y[major] = Σ_minor M[major, minor] · v[minor]` (gather).
    fn gather(&self, v: &[f32]) -> Vec<f32> {
        (0..self.major)
            .map(|i| {
                let (idx, val) = self.lane(i);
                idx.iter()
                    .zip(val)
                    .map(|(&j, &a)| f64::from(a) * f64::from(v[j as usize]))
                    .sum::<f64>() as f32
            })
            .collect()
    }

    /// `y[minor] += M[major, minor] · v[major]` (scatter).
    fn scatter(&self, v: &[f32]) -> Vec<f32> {
        let mut acc = vec![0.0f64; self.minor];
        for (i, &w) in v.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let (idx, val) = self.lane(i);
            for (&j, &a) in idx.iter().zip(val) {
                acc[j as usize] += f64::from(a) * f64::from(w);
            }
        }
        acc.into_iter().map(|a| a as f32).collect()
    }
}

macro_rules! shared_accessors {
    () => {
        pub fn nnz(&self) -> usize {
            self.inner.nnz()
        }

        pub fn indptr(&self) -> &[usize] {
            &self.inner.indptr
        }

        pub fn indices(&self) -> &[u32] {
            &self.inner.indices
        }

        pub fn values(&self) -> &[f32] {
            &self.inner.values
        }
    };
}

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsrMatrix {
    inner: Compressed,
}

/// Compressed sparse column matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CscMatrix {
    inner: Compressed,
}

impl CsrMatrix {
    pub fn try_new(
        rows: usize,
        cols: usize,
        indptr: Vec<usize>,
        indices: Vec<u32>,
        values: Vec<f32>,
    ) -> Result<Self> {
        Compressed::try_new(rows, cols, indptr, indices, values).map(|inner| Self { inner })
    }

    pub fn from_triplets(rows: usize, cols: usize, triplets: &[Triplet]) -> Result<Self> {
        Compressed::from_entries(rows, cols, triplets.to_vec()).map(|inner| Self { inner })
    }

    /// Keeps every entry of `m` that is not exactly zero.
    pub fn from_dense(m: &DenseMatrix) -> Self {
        let mut indptr = Vec::with_capacity(m.rows() + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for row in m.iter_rows() {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    indices.push(j as u32);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Self {
            inner: Compressed {
                major: m.rows(),
                minor: m.cols(),
                indptr,
                indices,
                values,
            },
        }
    }

    /// Builds one row at a time from `(sorted column indices, values)`.
    pub fn from_sparse_rows(cols: usize, rows: Vec<(Vec<u32>, Vec<f32>)>) -> Result<Self> {
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        indptr.push(0);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        let n_rows = rows.len();
        for (idx, val) in rows {
            if idx.len() != val.len() {
                return Err(Error::shape(idx.len(), val.len()));
            }
            indices.extend(idx);
            values.extend(val);
            indptr.push(indices.len());
        }
        Self::try_new(n_rows, cols, indptr, indices, values)
    }

    pub fn rows(&self) -> usize {
        self.inner.major
    }

    pub fn cols(&self) -> usize {
        self.inner.minor
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows(), self.cols())
    }

    shared_accessors!();

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[u32], &[f32]) {
        self.inner.lane(i)
    }

    pub fn row_nnz(&self, i: usize) -> usize {
        self.inner.indptr[i + 1] - self.inner.indptr[i]
    }

    pub fn max_row_nnz(&self) -> usize {
        (0..self.rows()).map(|i| self.row_nnz(i)).max().unwrap_or(0)
    }

    pub fn row_norm(&self, i: usize) -> f64 {
        l2_norm(self.row(i).1)
    }

    pub fn to_csc(&self) -> CscMatrix {
        CscMatrix {
            inner: self.inner.transposed(),
        }
    }

    /// Reinterprets the storage as the CSC form of the transpose (no copy).
    pub fn into_transpose_csc(self) -> CscMatrix {
        CscMatrix { inner: self.inner }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.rows(), self.cols());
        for (i, j, v) in self.triplets() {
            out.set(i, j, v);
        }
        out
    }

    /// Triplets in row-major order.
    pub fn triplets(&self) -> Vec<Triplet> {
        let mut out = Vec::with_capacity(self.nnz());
        for i in 0..self.rows() {
            let (idx, val) = self.row(i);
            out.extend(idx.iter().zip(val).map(|(&j, &v)| (i, j as usize, v)));
        }
        out
    }

    /// `M · v`; each output entry is a dot product over one stored row.
    pub fn spmv(&self, v: &[f32]) -> Result<Vec<f32>> {
        if v.len() != self.cols() {
            return Err(Error::shape(self.cols(), v.len()));
        }
        Ok(self.inner.gather(v))
    }

    /// `vᵀ · M`, scattering the rows selected by the nonzeros of `v`.
    pub fn spmv_transpose(&self, v: &[f32]) -> Result<Vec<f32>> {
        if v.len() != self.rows() {
            return Err(Error::shape(self.rows(), v.len()));
        }
        Ok(self.inner.scatter(v))
    }

    /// Dense product `M · rhs`, parallel over output rows.
    pub fn spmm(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        use rayon::prelude::*;
        if rhs.rows() != self.cols() {
            return Err(Error::shape(self.cols(), rhs.rows()));
        }
        let width = rhs.cols();
        let mut out = vec![0f32; self.rows() * width];
        if width > 0 {
            out.par_chunks_mut(width).enumerate().for_each(|(i, dst)| {
                let mut acc = vec![0f64; width];
                let (idx, val) = self.row(i);
                for (&j, &a) in idx.iter().zip(val) {
                    for (s, &b) in acc.iter_mut().zip(rhs.row(j as usize)) {
                        *s += f64::from(a) * f64::from(b);
                    }
                }
                for (d, s) in dst.iter_mut().zip(acc) {
                    *d = s as f32;
                }
            });
        }
        DenseMatrix::new(self.rows(), width, out)
    }

    /// Scales each nonzero row to unit ℓ2 norm; empty or all-zero rows are reported.
    pub fn row_l2_normalize(&mut self) -> NormalizeReport {
        let mut report = NormalizeReport::default();
        for i in 0..self.rows() {
            let r = self.inner.indptr[i]..self.inner.indptr[i + 1];
            if !normalize_slice(&mut self.inner.values[r]) {
                report.zero_rows.push(i);
            }
        }
        report
    }
}

impl CscMatrix {
    pub fn try_new(
        rows: usize,
        cols: usize,
        indptr: Vec<usize>,
        indices: Vec<u32>,
        values: Vec<f32>,
    ) -> Result<Self> {
        Compressed::try_new(cols, rows, indptr, indices, values).map(|inner| Self { inner })
    }

    pub fn from_triplets(rows: usize, cols: usize, triplets: &[Triplet]) -> Result<Self> {
        let swapped = triplets.iter().map(|&(i, j, v)| (j, i, v)).collect();
        Compressed::from_entries(cols, rows, swapped).map(|inner| Self { inner })
    }

    pub fn rows(&self) -> usize {
        self.inner.minor
    }

    pub fn cols(&self) -> usize {
        self.inner.major
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows(), self.cols())
    }

    shared_accessors!();

    /// Row indices and values of column `j`.
    pub fn col(&self, j: usize) -> (&[u32], &[f32]) {
        self.inner.lane(j)
    }

    pub fn to_csr(&self) -> CsrMatrix {
        CsrMatrix {
            inner: self.inner.transposed(),
        }
    }

    pub fn into_transpose_csr(self) -> CsrMatrix {
        CsrMatrix { inner: self.inner }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        self.to_csr().to_dense()
    }

    /// Triplets in column-major order.
    pub fn triplets(&self) -> Vec<Triplet> {
        let mut out = Vec::with_capacity(self.nnz());
        for j in 0..self.cols() {
            let (idx, val) = self.col(j);
            out.extend(idx.iter().zip(val).map(|(&i, &v)| (i as usize, j, v)));
        }
        out
    }

    /// `M · v`, scattering the columns selected by the nonzeros of `v`.
    pub fn spmv(&self, v: &[f32]) -> Result<Vec<f32>> {
        if v.len() != self.cols() {
            return Err(Error::shape(self.cols(), v.len()));
        }
        Ok(self.inner.scatter(v))
    }

    /// `vᵀ · M`; each output entry is a dot product over one stored column.
    pub fn spmv_transpose(&self, v: &[f32]) -> Result<Vec<f32>> {
        if v.len() != self.rows() {
            return Err(Error::shape(self.rows(), v.len()));
        }
        Ok(self.inner.gather(v))
    }
}
