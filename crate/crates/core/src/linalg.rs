//! Small sparse linear algebra kit: CSR matrices for constraint Jacobians and
//! a symmetric envelope (skyline) Cholesky for banded Newton systems.

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, row_ptr: vec![0; rows + 1], col_idx: Vec::new(), values: Vec::new() }
    }

    /// Builds a matrix from `(row, col, value)` triplets. Duplicates are summed.
    pub fn from_triplets(rows: usize, cols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut m = Self::zeros(rows, cols);
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            debug_assert!(r < rows && c < cols);
            if last == Some((r, c)) {
                *m.values.last_mut().unwrap() += v;
                continue;
            }
            m.col_idx.push(c);
            m.values.push(v);
            m.row_ptr[r + 1] += 1;
            last = Some((r, c));
        }
        for r in 0..rows {
            m.row_ptr[r + 1] += m.row_ptr[r];
        }
        m
    }

    /// Dense row-major input, keeping every entry that is not exactly zero.
    pub fn from_dense(rows: usize, cols: usize, data: &[f64]) -> Self {
        let mut t = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                let v = data[r * cols + c];
                if v != 0.0 {
                    t.push((r, c, v));
                }
            }
        }
        Self::from_triplets(rows, cols, t)
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    /// `y = A x`
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for (r, yr) in y.iter_mut().enumerate().take(self.rows) {
            *yr = self.row(r).map(|(c, v)| v * x[c]).sum();
        }
    }

    /// `y += A^T x`
    pub fn add_transpose_mul(&self, x: &[f64], y: &mut [f64]) {
        for (r, &xr) in x.iter().enumerate().take(self.rows) {
            if xr == 0.0 {
                continue;
            }
            for (c, v) in self.row(r) {
                y[c] += v * xr;
            }
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.rows * self.cols];
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                d[r * self.cols + c] += v;
            }
        }
        d
    }
}

/// Symmetric matrix stored by rows of its lower envelope: row `i` keeps the
/// entries in columns `first[i]..=i`.
#[derive(Debug, Clone)]
pub struct SkylineMatrix {
    n: usize,
    first: Vec<usize>,
    start: Vec<usize>,
    data: Vec<f64>,
}

impl SkylineMatrix {
    /// Allocates the envelope needed to hold the given lower-triangle
    /// coordinates (`row >= col`); every diagonal entry is always present.
    pub fn with_pattern(n: usize, coords: impl Iterator<Item = (usize, usize)>) -> Self {
        let mut first: Vec<usize> = (0..n).collect();
        for (r, c) in coords {
            let (r, c) = if r >= c { (r, c) } else { (c, r) };
            if c < first[r] {
                first[r] = c;
            }
        }
        Self::with_first(first)
    }

    /// Allocates an envelope from the first stored column of each row.
    pub fn with_first(first: Vec<usize>) -> Self {
        let n = first.len();
        let mut start = Vec::with_capacity(n + 1);
        let mut total = 0;
        for (i, &f) in first.iter().enumerate() {
            assert!(f <= i, "envelope row {i} starts after the diagonal");
            start.push(total);
            total += i - f + 1;
        }
        start.push(total);
        Self { n, first, start, data: vec![0.0; total] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn stored(&self) -> usize {
        self.data.len()
    }

    fn slot(&self, r: usize, c: usize) -> usize {
        debug_assert!(c >= self.first[r] && c <= r);
        self.start[r] + (c - self.first[r])
    }

    /// Adds `v` at `(r, c)` and its mirror. Panics if outside the envelope.
    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        let (r, c) = if r >= c { (r, c) } else { (c, r) };
        assert!(c >= self.first[r], "entry ({r}, {c}) outside the envelope");
        let s = self.slot(r, c);
        self.data[s] += v;
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (r, c) = if r >= c { (r, c) } else { (c, r) };
        if c < self.first[r] {
            0.0
        } else {
            self.data[self.slot(r, c)]
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.data[self.slot(i, i)]).collect()
    }

    /// In-place Cholesky factorization of `A + shift I`. Returns `None` when
    /// a pivot is not positive, which signals an indefinite matrix.
    pub fn cholesky(&self, shift: f64) -> Option<SkylineCholesky> {
        let mut l = self.data.clone();
        for i in 0..self.n {
            let fi = self.first[i];
            let si = self.start[i];
            for j in fi..i {
                let fj = self.first[j];
                let sj = self.start[j];
                let k0 = fi.max(fj);
                let mut sum = l[si + (j - fi)];
                for k in k0..j {
                    sum -= l[si + (k - fi)] * l[sj + (k - fj)];
                }
                let djj = l[sj + (j - fj)];
                l[si + (j - fi)] = sum / djj;
            }
            let mut d = l[si + (i - fi)] + shift;
            for k in fi..i {
                let v = l[si + (k - fi)];
                d -= v * v;
            }
            if !(d > 0.0) || !d.is_finite() {
                return None;
            }
            l[si + (i - fi)] = d.sqrt();
        }
        Some(SkylineCholesky { n: self.n, first: self.first.clone(), start: self.start.clone(), l })
    }
}

/// Lower-triangular factor produced by [`SkylineMatrix::cholesky`].
#[derive(Debug, Clone)]
pub struct SkylineCholesky {
    n: usize,
    first: Vec<usize>,
    start: Vec<usize>,
    l: Vec<f64>,
}

impl SkylineCholesky {
    /// Solves `L L^T x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        for i in 0..self.n {
            let fi = self.first[i];
            let si = self.start[i];
            let mut sum = b[i];
            for k in fi..i {
                sum -= self.l[si + (k - fi)] * b[k];
            }
            b[i] = sum / self.l[si + (i - fi)];
        }
        for i in (0..self.n).rev() {
            let fi = self.first[i];
            let si = self.start[i];
            b[i] /= self.l[si + (i - fi)];
            let xi = b[i];
            for k in fi..i {
                b[k] -= self.l[si + (k - fi)] * xi;
            }
        }
    }
}

pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
