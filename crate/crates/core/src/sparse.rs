//! Real CSR matrices applied to complex vectors, vector kernels and the
//! matrix–vector product tally.

use std::sync::atomic::{AtomicU64, Ordering};

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::check_dim;
use crate::{Error, Result, C64};

/// Cumulative number of products with an n×n operator.
///
/// Products with the diagonal part count as one, like products with the
/// sparse parts; composite operators count their constituent products.
#[derive(Debug, Default)]
pub struct MatvecCounter(AtomicU64);

impl MatvecCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&self, n: u64) {
        self.0.fetch_add(n, Ordering::Relaxed);
    }

    pub fn get(&self) -> u64 {
        self.0.load(Ordering::Relaxed)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseRealMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseRealMatrix {
    pub fn from_raw(
        n: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let m = SparseRealMatrix {
            n,
            row_ptr,
            col_idx,
            values,
        };
        m.validate()?;
        Ok(m)
    }

    /// Assembles from `(row, col, value)` triplets; duplicates are summed
    /// and exact zeros dropped.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Result<Self> {
        if let Some(&(r, c, _)) = triplets.iter().find(|&&(r, c, _)| r >= n || c >= n) {
            return Err(Error::Parameter(format!(
                "entry ({r}, {c}) outside {n}x{n} matrix"
            )));
        }
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        let mut rows = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            if rows.last() == Some(&r) && col_idx.last() == Some(&c) {
                *values.last_mut().unwrap() += v;
            } else {
                rows.push(r);
                col_idx.push(c);
                values.push(v);
            }
        }
        let mut keep_rows = Vec::with_capacity(rows.len());
        let mut k = 0;
        for i in 0..values.len() {
            if values[i] != 0.0 {
                col_idx[k] = col_idx[i];
                values[k] = values[i];
                keep_rows.push(rows[i]);
                k += 1;
            }
        }
        col_idx.truncate(k);
        values.truncate(k);
        for &r in &keep_rows {
            row_ptr[r + 1] += 1;
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self::from_raw(n, row_ptr, col_idx, values)
    }

    pub fn identity(n: usize) -> Self {
        SparseRealMatrix {
            n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Format(format!("CSR matrix: {msg}")));
        if self.row_ptr.len() != self.n + 1 || self.row_ptr[0] != 0 {
            return bad("row_ptr length or origin");
        }
        if self.row_ptr[self.n] != self.col_idx.len() || self.col_idx.len() != self.values.len() {
            return bad("nnz mismatch");
        }
        for r in 0..self.n {
            let (lo, hi) = (self.row_ptr[r], self.row_ptr[r + 1]);
            if lo > hi {
                return bad("row_ptr decreasing");
            }
            let cols = &self.col_idx[lo..hi];
            if cols.iter().any(|&c| c >= self.n) {
                return bad("column index out of range");
            }
            if cols.windows(2).any(|w| w[0] >= w[1]) {
                return bad("columns not strictly increasing within a row");
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn same_pattern(&self, other: &SparseRealMatrix) -> bool {
        self.n == other.n && self.row_ptr == other.row_ptr && self.col_idx == other.col_idx
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.col_idx[range.clone()].binary_search(&c) {
            Ok(p) => self.values[range.start + p],
            Err(_) => 0.0,
        }
    }

    pub fn transpose(&self) -> SparseRealMatrix {
        let mut trip = Vec::with_capacity(self.nnz());
        for r in 0..self.n {
            trip.extend(self.row(r).map(|(c, v)| (c, r, v)));
        }
        Self::from_triplets(self.n, trip).expect("transpose of a valid matrix")
    }

    /// `y = scale · A x`, counted as one product.
    pub fn spmv(&self, x: &[C64], scale: C64, counter: &MatvecCounter) -> Result<Vec<C64>> {
        check_dim(self.n, x.len())?;
        let mut y = vec![C64::new(0.0, 0.0); self.n];
        self.spmv_into(x, scale, &mut y, false);
        counter.add(1);
        Ok(y)
    }

    /// `y (+)= scale · A x` without counting; dimensions must already match.
    pub fn spmv_into(&self, x: &[C64], scale: C64, y: &mut [C64], accumulate: bool) {
        for (r, yr) in y.iter_mut().enumerate().take(self.n) {
            let mut acc = C64::new(0.0, 0.0);
            for p in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += x[self.col_idx[p]] * self.values[p];
            }
            if accumulate {
                *yr += scale * acc;
            } else {
                *yr = scale * acc;
            }
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                m[(r, c)] = v;
            }
        }
        m
    }
}

/// `⟨x, y⟩ = Σ conj(x_i) y_i`.
pub fn cdot(x: &[C64], y: &[C64]) -> C64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

pub fn norm2(x: &[C64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `y += a x`
pub fn axpy(a: C64, x: &[C64], y: &mut [C64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub fn scale(a: C64, x: &mut [C64]) {
    for xi in x.iter_mut() {
        *xi *= a;
    }
}

pub fn diff_norm(x: &[C64], y: &[C64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

pub fn real_vector(x: &[f64]) -> Vec<C64> {
    x.iter().map(|&v| C64::new(v, 0.0)).collect()
}

/// Eigen-decomposition of the real symmetric tridiagonal matrix with
/// diagonal `alpha` and off-diagonal `beta`.
pub fn tridiagonal_eigh(alpha: &[f64], beta: &[f64]) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let m = alpha.len();
    if m == 0 || beta.len() + 1 != m {
        return Err(Error::Parameter(format!(
            "tridiagonal of size {m} needs {} off-diagonal entries, got {}",
            m.saturating_sub(1),
            beta.len()
        )));
    }
    let mut t = DMatrix::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let eig = SymmetricEigen::try_new(t, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Convergence("tridiagonal eigensolver".into()))?;
    Ok((eig.eigenvalues.as_slice().to_vec(), eig.eigenvectors))
}

/// `exp(-i t T)` for the symmetric tridiagonal `T`.
pub fn dense_expm_tridiagonal(alpha: &[f64], beta: &[f64], t: f64) -> Result<DMatrix<C64>> {
    let m = alpha.len();
    if m > 128 {
        return Err(Error::Parameter(format!(
            "tridiagonal exponential limited to 128, got {m}"
        )));
    }
    let (lam, q) = tridiagonal_eigh(alpha, beta)?;
    let mut out = DMatrix::from_element(m, m, C64::new(0.0, 0.0));
    let phase: Vec<C64> = lam.iter().map(|&l| C64::new(0.0, -t * l).exp()).collect();
    for i in 0..m {
        for j in 0..m {
            out[(i, j)] = (0..m).map(|k| phase[k] * q[(i, k)] * q[(j, k)]).sum();
        }
    }
    Ok(out)
}

/// First column of `exp(-i t T)`.
pub(crate) fn expm_tridiagonal_e1(lam: &[f64], q: &DMatrix<f64>, t: f64) -> Vec<C64> {
    let m = lam.len();
    (0..m)
        .map(|i| {
            (0..m)
                .map(|k| C64::new(0.0, -t * lam[k]).exp() * (q[(i, k)] * q[(0, k)]))
                .sum()
        })
        .collect()
}
