//! Compressed sparse row storage assembled from triplets.

use std::io::{self, Write};

#[derive(Debug, Clone, Default)]
pub struct TripletBuilder {
    pub n_rows: usize,
    pub n_cols: usize,
    rows: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl TripletBuilder {
    pub fn new(n_rows: usize, n_cols: usize) -> Self {
        TripletBuilder { n_rows, n_cols, ..Default::default() }
    }

    pub fn with_capacity(n_rows: usize, n_cols: usize, cap: usize) -> Self {
        TripletBuilder { n_rows, n_cols, rows: Vec::with_capacity(cap), cols: Vec::with_capacity(cap), vals: Vec::with_capacity(cap) }
    }

    #[inline]
    pub fn push(&mut self, r: usize, c: usize, v: f64) {
        debug_assert!(r < self.n_rows && c < self.n_cols);
        self.rows.push(r);
        self.cols.push(c);
        self.vals.push(v);
    }

    pub fn len(&self) -> usize {
        self.vals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vals.is_empty()
    }

    /// Sum duplicates; columns sorted within each row. Explicit zeros are kept so the
    /// sparsity pattern depends only on connectivity.
    pub fn build(&self) -> CsrMatrix {
        let n = self.n_rows;
        let mut count = vec![0usize; n + 1];
        for &r in &self.rows {
            count[r + 1] += 1;
        }
        for i in 0..n {
            count[i + 1] += count[i];
        }
        let mut fill = count.clone();
        let mut cols = vec![0usize; self.vals.len()];
        let mut vals = vec![0.0; self.vals.len()];
        for t in 0..self.vals.len() {
            let r = self.rows[t];
            cols[fill[r]] = self.cols[t];
            vals[fill[r]] = self.vals[t];
            fill[r] += 1;
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::with_capacity(self.vals.len() / 4);
        let mut values = Vec::with_capacity(self.vals.len() / 4);
        row_ptr.push(0);
        let mut scratch: Vec<(usize, f64)> = Vec::new();
        for r in 0..n {
            scratch.clear();
            scratch.extend((count[r]..count[r + 1]).map(|t| (cols[t], vals[t])));
            // stable sort keeps the summation order deterministic
            scratch.sort_by_key(|e| e.0);
            let mut i = 0;
            while i < scratch.len() {
                let c = scratch[i].0;
                let mut s = 0.0;
                while i < scratch.len() && scratch[i].0 == c {
                    s += scratch[i].1;
                    i += 1;
                }
                col_idx.push(c);
                values.push(s);
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix { n_rows: n, n_cols: self.n_cols, row_ptr, col_idx, values }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |t| (self.col_idx[t], self.values[t]))
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.col_idx[range.clone()].binary_search(&c) {
            Ok(p) => self.values[range.start + p],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_cols);
        (0..self.n_rows).map(|r| self.row(r).map(|(c, v)| v * x[c]).sum()).collect()
    }

    /// `b − A x` accumulated in double-double arithmetic and rounded once per row.
    pub fn residual_extended(&self, b: &[f64], x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_cols);
        assert_eq!(b.len(), self.n_rows);
        (0..self.n_rows)
            .map(|r| {
                let (mut hi, mut lo) = (b[r], 0.0);
                for (c, v) in self.row(r) {
                    let p = -v * x[c];
                    let pe = (-v).mul_add(x[c], -p);
                    let t = hi + p;
                    let bp = t - hi;
                    lo += (hi - (t - bp)) + (p - bp) + pe;
                    hi = t;
                }
                hi + lo
            })
            .collect()
    }

    /// `yᵀ A x`.
    pub fn bilinear(&self, y: &[f64], x: &[f64]) -> f64 {
        (0..self.n_rows).map(|r| y[r] * self.row(r).map(|(c, v)| v * x[c]).sum::<f64>()).sum()
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut t = TripletBuilder::with_capacity(self.n_cols, self.n_rows, self.nnz());
        for r in 0..self.n_rows {
            for (c, v) in self.row(r) {
                t.push(c, r, v);
            }
        }
        t.build()
    }

    /// Largest `|A_ij − A_ji|` relative to the largest entry.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        let mut worst = 0.0f64;
        for r in 0..self.n_rows {
            for (c, v) in self.row(r) {
                worst = worst.max((v - self.get(c, r)).abs());
            }
        }
        worst / scale
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.n_rows, self.n_cols);
        for r in 0..self.n_rows {
            for (c, v) in self.row(r) {
                m[(r, c)] += v;
            }
        }
        m
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Matrix Market coordinate format, general real.
    pub fn write_matrix_market(&self, w: &mut impl Write) -> io::Result<()> {
        writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(w, "{} {} {}", self.n_rows, self.n_cols, self.nnz())?;
        for r in 0..self.n_rows {
            for (c, v) in self.row(r) {
                writeln!(w, "{} {} {:e}", r + 1, c + 1, v)?;
            }
        }
        Ok(())
    }
}

pub fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}
