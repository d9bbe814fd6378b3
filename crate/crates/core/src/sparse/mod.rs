//! Compressed sparse column storage and a sparse direct LU solver.
//!
//! [`SparseMatrix`] is the carrier for every matrix in the crate: the bus
//! admittance matrix, the random admittance-like contrast matrices and the
//! real block Jacobian. Factorization goes through [`order`] (fill-reducing
//! permutation) and [`lu_factorize`] (left-looking Gilbert-Peierls with
//! threshold partial pivoting); the resulting [`LuFactors`] can be reused for
//! any number of right-hand sides.

mod lu;
mod mmio;
mod ordering;
mod scalar;

pub use lu::{lu_factorize, lu_factorize_with, LuFactors, LuOptions, DEFAULT_DENSE_SWITCH, DEFAULT_PIVOT_TOL};
pub use mmio::{read_matrix_market, write_matrix_market};
pub use ordering::{order, order_auto, pattern_is_forest, Ordering, OrderingKind};
pub use scalar::Scalar;

use std::ops::Range;

#[derive(Debug, thiserror::Error)]
pub enum SparseError {
    #[error("entry ({row}, {col}) out of range for a {nrows}x{ncols} matrix")]
    IndexOutOfRange {
        row: usize,
        col: usize,
        nrows: usize,
        ncols: usize,
    },
    #[error("invalid compressed column structure: {0}")]
    InvalidStructure(String),
    #[error("matrix must be square, got {nrows}x{ncols}")]
    NotSquare { nrows: usize, ncols: usize },
    #[error("pattern graph is not a forest")]
    NotAForest,
    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),
    /// `column` is the 0-based elimination step; the message reports it 1-based.
    #[error("{} singularity at pivot column {}", if *.structural { "structural" } else { "numeric" }, .column + 1)]
    Singular { column: usize, structural: bool },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("minimum degree ordering failed: {0}")]
    Ordering(String),
    #[error("matrix market line {line}: {msg}")]
    MatrixMarket { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A matrix in canonical compressed sparse column form.
///
/// Row indices are strictly increasing inside every column. Matrices built by
/// [`SparseMatrix::from_triplets`] carry no explicit zeros; LU factors may.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix<T> {
    nrows: usize,
    ncols: usize,
    colptr: Vec<usize>,
    rowidx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> SparseMatrix<T> {
    /// Assembles a matrix from `(row, col, value)` triplets.
    ///
    /// Duplicates are summed and entries whose sum is exactly zero are dropped.
    pub fn from_triplets<I>(nrows: usize, ncols: usize, entries: I) -> Result<Self, SparseError>
    where
        I: IntoIterator<Item = (usize, usize, T)>,
    {
        let entries: Vec<(usize, usize, T)> = entries.into_iter().collect();
        let mut counts = vec![0usize; ncols + 1];
        for &(row, col, _) in &entries {
            if row >= nrows || col >= ncols {
                return Err(SparseError::IndexOutOfRange {
                    row,
                    col,
                    nrows,
                    ncols,
                });
            }
            counts[col + 1] += 1;
        }
        for j in 0..ncols {
            counts[j + 1] += counts[j];
        }
        let mut next = counts.clone();
        let mut bucket: Vec<(usize, T)> = vec![(0, T::zero()); entries.len()];
        for &(row, col, v) in &entries {
            bucket[next[col]] = (row, v);
            next[col] += 1;
        }

        let mut colptr = Vec::with_capacity(ncols + 1);
        let mut rowidx = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        colptr.push(0);
        for j in 0..ncols {
            let col = &mut bucket[counts[j]..counts[j + 1]];
            col.sort_by_key(|&(r, _)| r);
            let mut k = 0;
            while k < col.len() {
                let row = col[k].0;
                let mut sum = col[k].1;
                k += 1;
                while k < col.len() && col[k].0 == row {
                    sum += col[k].1;
                    k += 1;
                }
                if !sum.is_zero() {
                    rowidx.push(row);
                    values.push(sum);
                }
            }
            colptr.push(rowidx.len());
        }
        Ok(Self {
            nrows,
            ncols,
            colptr,
            rowidx,
            values,
        })
    }

    /// Wraps raw CSC arrays after checking the canonical-form invariants.
    /// Explicit zeros are allowed.
    pub fn from_csc(
        nrows: usize,
        ncols: usize,
        colptr: Vec<usize>,
        rowidx: Vec<usize>,
        values: Vec<T>,
    ) -> Result<Self, SparseError> {
        if colptr.len() != ncols + 1 {
            return Err(SparseError::InvalidStructure(format!(
                "colptr has length {}, expected {}",
                colptr.len(),
                ncols + 1
            )));
        }
        if colptr[0] != 0 || colptr[ncols] != rowidx.len() || rowidx.len() != values.len() {
            return Err(SparseError::InvalidStructure(
                "colptr endpoints disagree with the entry arrays".into(),
            ));
        }
        for j in 0..ncols {
            if colptr[j] > colptr[j + 1] {
                return Err(SparseError::InvalidStructure(format!(
                    "colptr decreases at column {j}"
                )));
            }
            let rows = &rowidx[colptr[j]..colptr[j + 1]];
            for (k, &r) in rows.iter().enumerate() {
                if r >= nrows {
                    return Err(SparseError::IndexOutOfRange {
                        row: r,
                        col: j,
                        nrows,
                        ncols,
                    });
                }
                if k > 0 && rows[k - 1] >= r {
                    return Err(SparseError::InvalidStructure(format!(
                        "row indices not strictly increasing in column {j}"
                    )));
                }
            }
        }
        Ok(Self {
            nrows,
            ncols,
            colptr,
            rowidx,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            colptr: (0..=n).collect(),
            rowidx: (0..n).collect(),
            values: vec![T::one(); n],
        }
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            colptr: vec![0; ncols + 1],
            rowidx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn is_square(&self) -> bool {
        self.nrows == self.ncols
    }

    /// Number of stored entries.
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn colptr(&self) -> &[usize] {
        &self.colptr
    }

    pub fn rowidx(&self) -> &[usize] {
        &self.rowidx
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Row indices and values of column `j`.
    pub fn col(&self, j: usize) -> (&[usize], &[T]) {
        let r = self.colptr[j]..self.colptr[j + 1];
        (&self.rowidx[r.clone()], &self.values[r])
    }

    /// Iterates `(row, col, value)` in column-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.ncols).flat_map(move |j| {
            (self.colptr[j]..self.colptr[j + 1]).map(move |p| (self.rowidx[p], j, self.values[p]))
        })
    }

    pub fn get(&self, row: usize, col: usize) -> T {
        let (rows, vals) = self.col(col);
        match rows.binary_search(&row) {
            Ok(k) => vals[k],
            Err(_) => T::zero(),
        }
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.nrows + 1];
        for &r in &self.rowidx {
            counts[r + 1] += 1;
        }
        for i in 0..self.nrows {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut rowidx = vec![0; self.nnz()];
        let mut values = vec![T::zero(); self.nnz()];
        for j in 0..self.ncols {
            for p in self.colptr[j]..self.colptr[j + 1] {
                let q = next[self.rowidx[p]];
                rowidx[q] = j;
                values[q] = self.values[p];
                next[self.rowidx[p]] += 1;
            }
        }
        Self {
            nrows: self.ncols,
            ncols: self.nrows,
            colptr: counts,
            rowidx,
            values,
        }
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[T]) -> Result<Vec<T>, SparseError> {
        if x.len() != self.ncols {
            return Err(SparseError::DimensionMismatch {
                expected: self.ncols,
                found: x.len(),
            });
        }
        let mut y = vec![T::zero(); self.nrows];
        for j in 0..self.ncols {
            let xj = x[j];
            for p in self.colptr[j]..self.colptr[j + 1] {
                y[self.rowidx[p]] += self.values[p] * xj;
            }
        }
        Ok(y)
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        let mut sums = vec![0.0; self.nrows];
        for (p, &r) in self.rowidx.iter().enumerate() {
            sums[r] += self.values[p].modulus();
        }
        sums.into_iter().fold(0.0, f64::max)
    }

    /// Exact entrywise symmetry `A == Aᵀ` (not Hermitian).
    pub fn is_symmetric(&self) -> bool {
        self.is_square() && *self == self.transpose()
    }

    /// Copies the block `rows × cols` out as a new matrix.
    pub fn block(&self, rows: Range<usize>, cols: Range<usize>) -> Self {
        let mut colptr = Vec::with_capacity(cols.len() + 1);
        let mut rowidx = Vec::new();
        let mut values = Vec::new();
        colptr.push(0);
        for j in cols.clone() {
            for p in self.colptr[j]..self.colptr[j + 1] {
                let r = self.rowidx[p];
                if rows.contains(&r) {
                    rowidx.push(r - rows.start);
                    values.push(self.values[p]);
                }
            }
            colptr.push(rowidx.len());
        }
        Self {
            nrows: rows.len(),
            ncols: cols.len(),
            colptr,
            rowidx,
            values,
        }
    }

    /// Returns `A + diag(d)`.
    pub fn add_diagonal(&self, d: &[T]) -> Result<Self, SparseError> {
        if !self.is_square() {
            return Err(SparseError::NotSquare {
                nrows: self.nrows,
                ncols: self.ncols,
            });
        }
        if d.len() != self.nrows {
            return Err(SparseError::DimensionMismatch {
                expected: self.nrows,
                found: d.len(),
            });
        }
        Self::from_triplets(
            self.nrows,
            self.ncols,
            self.iter()
                .chain(d.iter().enumerate().map(|(i, &v)| (i, i, v))),
        )
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> SparseMatrix<U> {
        SparseMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            colptr: self.colptr.clone(),
            rowidx: self.rowidx.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Row-major dense copy. Meant for small matrices and tests.
    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let mut d = vec![vec![T::zero(); self.ncols]; self.nrows];
        for (i, j, v) in self.iter() {
            d[i][j] = v;
        }
        d
    }

    /// Undirected adjacency lists of the structurally symmetrized pattern,
    /// diagonal excluded. Lists are sorted and duplicate-free.
    pub fn pattern_adjacency(&self) -> Vec<Vec<usize>> {
        let n = self.nrows.max(self.ncols);
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        for j in 0..self.ncols {
            for &i in &self.rowidx[self.colptr[j]..self.colptr[j + 1]] {
                if i != j {
                    adj[i].push(j);
                    adj[j].push(i);
                }
            }
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        adj
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn duplicates_are_summed() {
        let m = SparseMatrix::from_triplets(1, 1, vec![(0, 0, 1.0), (0, 0, 2.0)]).unwrap();
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.values(), &[3.0]);
    }

    #[test]
    fn empty_triplets() {
        let m = SparseMatrix::<f64>::from_triplets(3, 3, vec![]).unwrap();
        assert_eq!(m.nnz(), 0);
        assert_eq!(m.colptr(), &[0, 0, 0, 0]);
    }

    #[test]
    fn identity_layout() {
        let m = SparseMatrix::from_triplets(2, 2, vec![(1, 1, 1.0), (0, 0, 1.0)]).unwrap();
        assert_eq!(m.colptr(), &[0, 1, 2]);
        assert_eq!(m.rowidx(), &[0, 1]);
        assert_eq!(m, SparseMatrix::identity(2));
        assert_eq!(SparseMatrix::<f64>::identity(5).nnz(), 5);
    }

    #[test]
    fn cancelling_entries_dropped() {
        let m =
            SparseMatrix::from_triplets(2, 2, vec![(0, 1, 1.5), (0, 1, -1.5), (1, 0, 1.0)]).unwrap();
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.get(0, 1), 0.0);
    }

    #[test]
    fn out_of_range_rejected() {
        let e = SparseMatrix::from_triplets(2, 2, vec![(2, 0, 1.0)]).unwrap_err();
        assert!(matches!(e, SparseError::IndexOutOfRange { row: 2, .. }));
    }

    #[test]
    fn csc_validation() {
        assert!(SparseMatrix::from_csc(2, 2, vec![0, 2, 2], vec![1, 0], vec![1.0, 1.0]).is_err());
        assert!(SparseMatrix::from_csc(2, 2, vec![0, 1, 2], vec![0, 1], vec![0.0, 1.0]).is_ok());
    }

    #[test]
    fn transpose_and_matvec() {
        let m = SparseMatrix::from_triplets(2, 3, vec![(0, 0, 1.0), (0, 2, 2.0), (1, 1, 3.0)])
            .unwrap();
        let t = m.transpose();
        assert_eq!(t.nrows(), 3);
        assert_eq!(t.get(2, 0), 2.0);
        assert_eq!(m.mul_vec(&[1.0, 1.0, 1.0]).unwrap(), vec![3.0, 3.0]);
        assert_eq!(t.transpose(), m);
    }

    #[test]
    fn block_extraction() {
        let m = SparseMatrix::from_triplets(
            3,
            3,
            vec![(0, 0, 1.0), (2, 0, 4.0), (1, 2, 5.0), (2, 2, 6.0)],
        )
        .unwrap();
        let b = m.block(0..2, 2..3);
        assert_eq!(b.to_dense(), vec![vec![0.0], vec![5.0]]);
    }

    #[test]
    fn complex_symmetry_is_not_hermitian() {
        let z = Complex64::new(1.0, 2.0);
        let m = SparseMatrix::from_triplets(2, 2, vec![(0, 1, z), (1, 0, z)]).unwrap();
        assert!(m.is_symmetric());
        let h = SparseMatrix::from_triplets(2, 2, vec![(0, 1, z), (1, 0, z.conj())]).unwrap();
        assert!(!h.is_symmetric());
    }
}
