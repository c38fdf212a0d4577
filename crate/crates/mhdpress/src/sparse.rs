//! Compressed-row sparse matrices and triplet assembly.

use crate::error::{Error, Result};

/// CSR matrix. Column indices are strictly increasing within each row and
/// duplicates are summed at construction.
#[derive(Debug, Clone)]
pub struct SparseMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        SparseMatrix {
            n_rows,
            n_cols,
            row_ptr: vec![0; n_rows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Build from (row, col, value) triplets; duplicates are summed in
    /// sorted (row, col) order so assembly is deterministic.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        mut triplets: Vec<(usize, usize, f64)>,
    ) -> Self {
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_counts = vec![0usize; n_rows];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for &(r, c, v) in &triplets {
            debug_assert!(r < n_rows && c < n_cols, "triplet ({r},{c}) out of range");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_counts[r] += 1;
                last = Some((r, c));
            }
        }
        let mut row_ptr = vec![0usize; n_rows + 1];
        for r in 0..n_rows {
            row_ptr[r + 1] = row_ptr[r] + row_counts[r];
        }
        SparseMatrix {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let lo = self.row_ptr[r];
        let hi = self.row_ptr[r + 1];
        match self.col_idx[lo..hi].binary_search(&c) {
            Ok(k) => self.values[lo + k],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_cols);
        let mut y = vec![0.0; self.n_rows];
        for r in 0..self.n_rows {
            let mut s = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                s += self.values[k] * x[self.col_idx[k]];
            }
            y[r] = s;
        }
        y
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut triplets = Vec::with_capacity(self.nnz());
        for r in 0..self.n_rows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                triplets.push((self.col_idx[k], r, self.values[k]));
            }
        }
        SparseMatrix::from_triplets(self.n_cols, self.n_rows, triplets)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_rows).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1])
                .map(move |k| (r, self.col_idx[k], self.values[k]))
        })
    }

    /// Largest relative asymmetry max |A - A^T| / max|A|.
    pub fn asymmetry(&self) -> f64 {
        let t = self.transpose();
        let scale = self
            .values
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(1e-300);
        let mut worst = 0.0f64;
        for (r, c, v) in self.iter() {
            worst = worst.max((v - t.get(r, c)).abs());
        }
        worst / scale
    }

    /// Frobenius-ish max-entry distance to `other` (same pattern not required).
    pub fn max_abs_diff(&self, other: &SparseMatrix) -> f64 {
        let mut worst = 0.0f64;
        for (r, c, v) in self.iter() {
            worst = worst.max((v - other.get(r, c)).abs());
        }
        for (r, c, v) in other.iter() {
            worst = worst.max((v - self.get(r, c)).abs());
        }
        worst
    }

    /// Dump in Matrix Market coordinate format (debugging aid).
    pub fn write_matrix_market(&self, path: &std::path::Path) -> Result<()> {
        use std::io::Write;
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(f, "{} {} {}", self.n_rows, self.n_cols, self.nnz())?;
        for (r, c, v) in self.iter() {
            writeln!(f, "{} {} {:.17e}", r + 1, c + 1, v)?;
        }
        Ok(())
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut d = nalgebra::DMatrix::zeros(self.n_rows, self.n_cols);
        for (r, c, v) in self.iter() {
            d[(r, c)] += v;
        }
        d
    }
}

/// Saddle system  [A  B^T; B  0] [x; y] = [f; g].
#[derive(Debug, Clone)]
pub struct SaddleSystem {
    pub a: SparseMatrix,
    pub b: SparseMatrix,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
}

impl SaddleSystem {
    pub fn new(a: SparseMatrix, b: SparseMatrix, f: Vec<f64>, g: Vec<f64>) -> Result<Self> {
        if a.n_rows != a.n_cols || b.n_cols != a.n_cols || f.len() != a.n_rows || g.len() != b.n_rows
        {
            return Err(Error::SolveFailure(
                "inconsistent saddle system block dimensions".into(),
            ));
        }
        Ok(SaddleSystem { a, b, f, g })
    }
}

pub fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn duplicates_are_summed() {
        let m = SparseMatrix::from_triplets(
            2,
            2,
            vec![(0, 0, 1.0), (0, 0, 2.0), (1, 1, 1.0), (0, 1, 0.5)],
        );
        assert_eq!(m.get(0, 0), 3.0);
        assert_eq!(m.get(0, 1), 0.5);
        assert_eq!(m.get(1, 1), 1.0);
        assert_eq!(m.nnz(), 3);
    }

    #[test]
    fn columns_strictly_increasing() {
        let m = SparseMatrix::from_triplets(
            3,
            3,
            vec![(0, 2, 1.0), (0, 0, 1.0), (2, 1, 4.0), (0, 1, 2.0)],
        );
        for r in 0..m.n_rows {
            let cols = &m.col_idx[m.row_ptr[r]..m.row_ptr[r + 1]];
            for w in cols.windows(2) {
                assert!(w[0] < w[1]);
            }
        }
    }

    proptest! {
        #[test]
        fn transpose_twice_is_identity(seed in 0u64..500) {
            use rand::prelude::*;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = rng.random_range(1..12usize);
            let m = rng.random_range(1..12usize);
            let k = rng.random_range(0..40usize);
            let triplets: Vec<_> = (0..k)
                .map(|_| (rng.random_range(0..n), rng.random_range(0..m), rng.random_range(-1.0..1.0)))
                .collect();
            let a = SparseMatrix::from_triplets(n, m, triplets);
            let att = a.transpose().transpose();
            prop_assert_eq!(a.row_ptr, att.row_ptr);
            prop_assert_eq!(a.col_idx, att.col_idx);
            for (x, y) in a.values.iter().zip(&att.values) {
                prop_assert!((x - y).abs() < 1e-15);
            }
        }
    }
}
