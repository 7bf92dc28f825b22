//! Compressed sparse row matrices with shareable patterns.

use std::sync::Arc;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparsityPattern {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
}

impl SparsityPattern {
    /// Builds the pattern of the given (row, col) entries, duplicates merged.
    pub fn from_entries(nrows: usize, ncols: usize, entries: &[(usize, usize)]) -> Self {
        let mut counts = vec![0usize; nrows + 1];
        for &(r, c) in entries {
            assert!(r < nrows && c < ncols, "entry ({r}, {c}) outside {nrows}x{ncols}");
            counts[r + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        let mut cols = vec![0usize; entries.len()];
        let mut fill = counts.clone();
        for &(r, c) in entries {
            cols[fill[r]] = c;
            fill[r] += 1;
        }
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::with_capacity(entries.len());
        row_ptr.push(0);
        for r in 0..nrows {
            let row = &mut cols[counts[r]..counts[r + 1]];
            row.sort_unstable();
            let mut last = usize::MAX;
            for &c in row.iter() {
                if c != last {
                    col_idx.push(c);
                    last = c;
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self { nrows, ncols, row_ptr, col_idx }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn row(&self, r: usize) -> &[usize] {
        &self.col_idx[self.row_ptr[r]..self.row_ptr[r + 1]]
    }

    /// Storage position of entry (r, c), if structurally present.
    pub fn position(&self, r: usize, c: usize) -> Option<usize> {
        self.row(r).binary_search(&c).ok().map(|p| self.row_ptr[r] + p)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pattern: Arc<SparsityPattern>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(pattern: Arc<SparsityPattern>) -> Self {
        let n = pattern.nnz();
        Self { pattern, values: vec![0.0; n] }
    }

    pub fn from_values(pattern: Arc<SparsityPattern>, values: Vec<f64>) -> Self {
        assert_eq!(pattern.nnz(), values.len());
        Self { pattern, values }
    }

    /// Sums duplicate triplets in a fixed order, so assembly is bit-reproducible.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let entries: Vec<(usize, usize)> = triplets.iter().map(|&(r, c, _)| (r, c)).collect();
        let pattern = Arc::new(SparsityPattern::from_entries(nrows, ncols, &entries));
        let mut m = Self::zeros(pattern);
        for &(r, c, v) in triplets {
            let p = m.pattern.position(r, c).expect("entry in pattern");
            m.values[p] += v;
        }
        m
    }

    pub fn identity(n: usize) -> Self {
        let t: Vec<_> = (0..n).map(|i| (i, i, 1.0)).collect();
        Self::from_triplets(n, n, &t)
    }

    pub fn pattern(&self) -> &Arc<SparsityPattern> {
        &self.pattern
    }

    pub fn nrows(&self) -> usize {
        self.pattern.nrows
    }

    pub fn ncols(&self) -> usize {
        self.pattern.ncols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.pattern.position(r, c).map_or(0.0, |p| self.values[p])
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols());
        let mut y = vec![0.0; self.nrows()];
        for (r, yr) in y.iter_mut().enumerate() {
            let (a, b) = (self.pattern.row_ptr[r], self.pattern.row_ptr[r + 1]);
            *yr = self.pattern.col_idx[a..b].iter().zip(&self.values[a..b]).map(|(&c, v)| v * x[c]).sum();
        }
        y
    }

    /// y = A^T x
    pub fn mul_transpose_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows());
        let mut y = vec![0.0; self.ncols()];
        for (r, &xr) in x.iter().enumerate() {
            let (a, b) = (self.pattern.row_ptr[r], self.pattern.row_ptr[r + 1]);
            for (&c, v) in self.pattern.col_idx[a..b].iter().zip(&self.values[a..b]) {
                y[c] += v * xr;
            }
        }
        y
    }

    /// x^T A x
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        self.mul_vec(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// Linear combination of matrices that share one pattern.
    pub fn combine(terms: &[(f64, &CsrMatrix)]) -> CsrMatrix {
        let first = terms.first().expect("at least one term").1;
        let mut values = vec![0.0; first.values.len()];
        for &(s, m) in terms {
            assert!(Arc::ptr_eq(&m.pattern, &first.pattern) || m.pattern == first.pattern, "pattern mismatch");
            for (v, a) in values.iter_mut().zip(&m.values) {
                *v += s * a;
            }
        }
        CsrMatrix::from_values(first.pattern.clone(), values)
    }

    /// Largest |A_ij - A_ji|.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..self.nrows() {
            for (k, &c) in self.pattern.row(r).iter().enumerate() {
                let v = self.values[self.pattern.row_ptr[r] + k];
                worst = worst.max((v - self.get(c, r)).abs());
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Iterates (row, col, value) in storage order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows()).flat_map(move |r| {
            let (a, b) = (self.pattern.row_ptr[r], self.pattern.row_ptr[r + 1]);
            (a..b).map(move |p| (r, self.pattern.col_idx[p], self.values[p]))
        })
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn duplicates_summed() {
        let m = CsrMatrix::from_triplets(2, 3, &[(0, 2, 1.0), (1, 0, 2.0), (0, 2, 0.5), (0, 0, -1.0)]);
        assert_eq!(m.pattern().nnz(), 3);
        assert_eq!(m.get(0, 2), 1.5);
        assert_eq!(m.get(1, 1), 0.0);
        assert_eq!(m.mul_vec(&[1.0, 1.0, 2.0]), vec![2.0, 2.0]);
        assert_eq!(m.mul_transpose_vec(&[1.0, 1.0]), vec![1.0, 0.0, 1.5]);
    }

    #[test]
    fn explicit_zeros_stay_structural() {
        let m = CsrMatrix::from_triplets(2, 2, &[(0, 1, 0.0), (1, 1, 1.0)]);
        assert_eq!(m.pattern().nnz(), 2);
        assert!(m.pattern().position(0, 1).is_some());
    }

    proptest! {
        #[test]
        fn matvec_matches_dense(entries in prop::collection::vec((0usize..6, 0usize..5, -10.0f64..10.0), 0..40),
                                x in prop::collection::vec(-5.0f64..5.0, 5)) {
            let m = CsrMatrix::from_triplets(6, 5, &entries);
            let mut dense = [[0.0; 5]; 6];
            for &(r, c, v) in &entries {
                dense[r][c] += v;
            }
            let y = m.mul_vec(&x);
            for r in 0..6 {
                let expect: f64 = (0..5).map(|c| dense[r][c] * x[c]).sum();
                prop_assert!((y[r] - expect).abs() < 1e-10);
            }
        }
    }
}
