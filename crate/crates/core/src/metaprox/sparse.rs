//! Compressed sparse row matrices with the handful of kernels meta-path
//! counting needs: transpose, row-blocked products and chain products.

use std::ops::{AddAssign, Mul};

use rayon::prelude::*;

/// Element types a [`CsrMatrix`] can hold.
pub trait Scalar:
    Copy + Default + PartialEq + PartialOrd + AddAssign + Mul<Output = Self> + Send + Sync + 'static
{
    fn is_zero(self) -> bool {
        self == Self::default()
    }
}

impl Scalar for u64 {}
impl Scalar for f64 {}

/// Row-major compressed sparse matrix. Column indices within a row are
/// strictly increasing and no explicit zeros are stored.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix<T> {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<T>,
}

/// Rows per block in the row-blocked product.
const ROW_BLOCK: usize = 64;

impl<T: Scalar> CsrMatrix<T> {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        CsrMatrix {
            nrows,
            ncols,
            indptr: vec![0; nrows + 1],
            indices: Vec::new(),
            data: Vec::new(),
        }
    }

    /// Builds from `(row, col, value)` triplets, summing duplicates and
    /// dropping zeros.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, T)]) -> Self {
        let mut sorted: Vec<(usize, usize, T)> = triplets.to_vec();
        sorted.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(sorted.len());
        let mut data: Vec<T> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in sorted {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            if last == Some((r, c)) {
                *data.last_mut().unwrap() += v;
            } else {
                indptr[r + 1] += 1;
                indices.push(c);
                data.push(v);
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            indptr[r + 1] += indptr[r];
        }
        CsrMatrix {
            nrows,
            ncols,
            indptr,
            indices,
            data,
        }
        .pruned()
    }

    /// Binary matrix with a one at every listed position.
    pub fn from_pattern(nrows: usize, ncols: usize, pattern: &[(usize, usize)], one: T) -> Self {
        let t: Vec<_> = pattern.iter().map(|&(r, c)| (r, c, one)).collect();
        let mut m = Self::from_triplets(nrows, ncols, &t);
        m.data.iter_mut().for_each(|v| *v = one);
        m
    }

    fn pruned(self) -> Self {
        if !self.data.iter().any(|v| v.is_zero()) {
            return self;
        }
        self.filter(|_, _, v| !v.is_zero())
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nrows, self.ncols)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn row(&self, r: usize) -> (&[usize], &[T]) {
        let (s, e) = (self.indptr[r], self.indptr[r + 1]);
        (&self.indices[s..e], &self.data[s..e])
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        let (cols, vals) = self.row(r);
        match cols.binary_search(&c) {
            Ok(k) => vals[k],
            Err(_) => T::default(),
        }
    }

    /// Row-major `(row, col, value)` iteration.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.nrows).flat_map(move |r| {
            let (cols, vals) = self.row(r);
            cols.iter().zip(vals).map(move |(&c, &v)| (r, c, v))
        })
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let mut out = vec![vec![T::default(); self.ncols]; self.nrows];
        for (r, c, v) in self.triplets() {
            out[r][c] = v;
        }
        out
    }

    /// Writes row `r` into a dense buffer of length `ncols`.
    pub fn row_into(&self, r: usize, out: &mut [T]) {
        out.fill(T::default());
        let (cols, vals) = self.row(r);
        for (&c, &v) in cols.iter().zip(vals) {
            out[c] = v;
        }
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.indices {
            counts[c + 1] += 1;
        }
        for c in 0..self.ncols {
            counts[c + 1] += counts[c];
        }
        let indptr = counts.clone();
        let mut next = counts;
        let mut indices = vec![0usize; self.nnz()];
        let mut data = vec![T::default(); self.nnz()];
        for (r, c, v) in self.triplets() {
            let k = next[c];
            indices[k] = r;
            data[k] = v;
            next[c] += 1;
        }
        CsrMatrix {
            nrows: self.ncols,
            ncols: self.nrows,
            indptr,
            indices,
            data,
        }
    }

    /// Keeps only entries for which `keep(row, col, value)` holds.
    pub fn filter(&self, keep: impl Fn(usize, usize, T) -> bool) -> Self {
        let mut indptr = Vec::with_capacity(self.nrows + 1);
        indptr.push(0);
        let mut indices = Vec::new();
        let mut data = Vec::new();
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                if keep(r, c, v) {
                    indices.push(c);
                    data.push(v);
                }
            }
            indptr.push(indices.len());
        }
        CsrMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            indptr,
            indices,
            data,
        }
    }

    pub fn without_diagonal(&self) -> Self {
        self.filter(|r, c, _| r != c)
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(usize, usize, T) -> U) -> CsrMatrix<U> {
        let mut data = Vec::with_capacity(self.nnz());
        for (r, c, v) in self.triplets() {
            data.push(f(r, c, v));
        }
        CsrMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            indptr: self.indptr.clone(),
            indices: self.indices.clone(),
            data,
        }
        .pruned()
    }

    pub fn row_sums(&self) -> Vec<T> {
        (0..self.nrows)
            .map(|r| {
                let mut acc = T::default();
                for &v in self.row(r).1 {
                    acc += v;
                }
                acc
            })
            .collect()
    }

    pub fn col_sums(&self) -> Vec<T> {
        let mut out = vec![T::default(); self.ncols];
        for (_, c, v) in self.triplets() {
            out[c] += v;
        }
        out
    }

    /// Sparse product `self * rhs`, computed over independent row blocks.
    ///
    /// With `max_row_nnz = Some(n)` each output row keeps only its `n`
    /// largest entries (ties broken toward lower column index). The result
    /// does not depend on how row blocks are scheduled.
    pub fn matmul(&self, rhs: &Self, max_row_nnz: Option<usize>) -> Self {
        assert_eq!(
            self.ncols, rhs.nrows,
            "inner dimensions differ: {:?} x {:?}",
            self.shape(),
            rhs.shape()
        );
        let blocks: Vec<(Vec<usize>, Vec<usize>, Vec<T>)> = (0..self.nrows)
            .collect::<Vec<_>>()
            .par_chunks(ROW_BLOCK)
            .map(|rows| self.multiply_rows(rhs, rows, max_row_nnz))
            .collect();

        let mut indptr = Vec::with_capacity(self.nrows + 1);
        indptr.push(0);
        let mut indices = Vec::new();
        let mut data = Vec::new();
        for (lens, idx, vals) in blocks {
            for len in lens {
                indptr.push(indptr.last().unwrap() + len);
            }
            indices.extend(idx);
            data.extend(vals);
        }
        CsrMatrix {
            nrows: self.nrows,
            ncols: rhs.ncols,
            indptr,
            indices,
            data,
        }
    }

    fn multiply_rows(
        &self,
        rhs: &Self,
        rows: &[usize],
        max_row_nnz: Option<usize>,
    ) -> (Vec<usize>, Vec<usize>, Vec<T>) {
        let mut acc = vec![T::default(); rhs.ncols];
        let mut touched = vec![false; rhs.ncols];
        let mut cols: Vec<usize> = Vec::new();
        let mut lens = Vec::with_capacity(rows.len());
        let mut indices = Vec::new();
        let mut data = Vec::new();
        for &r in rows {
            cols.clear();
            let (lcols, lvals) = self.row(r);
            for (&k, &a) in lcols.iter().zip(lvals) {
                let (rcols, rvals) = rhs.row(k);
                for (&c, &b) in rcols.iter().zip(rvals) {
                    if !touched[c] {
                        touched[c] = true;
                        cols.push(c);
                    }
                    acc[c] += a * b;
                }
            }
            let mut entries: Vec<(usize, T)> = cols
                .iter()
                .map(|&c| {
                    touched[c] = false;
                    (c, std::mem::take(&mut acc[c]))
                })
                .filter(|(_, v)| !v.is_zero())
                .collect();
            if let Some(limit) = max_row_nnz {
                if entries.len() > limit {
                    entries.sort_by(|a, b| {
                        b.1.partial_cmp(&a.1)
                            .unwrap_or(std::cmp::Ordering::Equal)
                            .then(a.0.cmp(&b.0))
                    });
                    entries.truncate(limit);
                }
            }
            entries.sort_unstable_by_key(|e| e.0);
            lens.push(entries.len());
            for (c, v) in entries {
                indices.push(c);
                data.push(v);
            }
        }
        (lens, indices, data)
    }

    /// Estimated multiply-adds of `self * rhs`.
    pub fn product_cost(&self, rhs: &Self) -> u128 {
        let mut col_nnz = vec![0u128; self.ncols];
        for &c in &self.indices {
            col_nnz[c] += 1;
        }
        (0..rhs.nrows)
            .map(|k| col_nnz[k] * (rhs.indptr[k + 1] - rhs.indptr[k]) as u128)
            .sum()
    }
}

/// Product of a chain of matrices. The association order is chosen greedily:
/// the adjacent pair with the smallest estimated cost is multiplied first.
/// Truncation, when requested, is applied only to the final product.
pub fn chain_product<T: Scalar>(factors: Vec<CsrMatrix<T>>, max_row_nnz: Option<usize>) -> CsrMatrix<T> {
    assert!(!factors.is_empty(), "empty matrix chain");
    let mut factors = factors;
    while factors.len() > 1 {
        let last = factors.len() == 2;
        let best = (0..factors.len() - 1)
            .min_by_key(|&i| factors[i].product_cost(&factors[i + 1]))
            .unwrap();
        let rhs = factors.remove(best + 1);
        let trunc = if last { max_row_nnz } else { None };
        factors[best] = factors[best].matmul(&rhs, trunc);
    }
    factors.pop().unwrap()
}
