//! Dense and sparse linear operators plus the small vector helpers the
//! solvers share.
//!
//! Matrix-vector kernels split work by output entry (or block of entries).
//! Each entry accumulates in the same order on either path, so the parallel
//! and sequential kernels return bit-identical results and solver runs stay reproducible no
//! matter how many worker threads are available.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Below this many stored entries the sequential kernel is always used.
pub const PAR_THRESHOLD: usize = 1 << 14;

/// Column block width of the parallel transposed kernel.
#[cfg(feature = "parallel")]
const COL_BLOCK: usize = 64;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

/// `a - b`
pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// `y += s * x`
pub fn axpy(s: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += s * xi;
    }
}

pub fn scale(s: f64, x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| s * v).collect()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|v| v.is_finite())
}

/// Anything that can be applied to a vector together with its adjoint.
pub trait LinearOperator: Send + Sync {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    fn apply(&self, x: &[f64]) -> Vec<f64>;
    fn apply_t(&self, y: &[f64]) -> Vec<f64>;
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "dense matrix data length");
        Self { rows, cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    /// Scales column `j` by `s`.
    pub fn scale_col(&mut self, j: usize, s: f64) {
        for i in 0..self.rows {
            self.data[i * self.cols + j] *= s;
        }
    }

    /// Largest absolute entry of `self - selfᵀ`; panics unless square.
    pub fn asymmetry(&self) -> f64 {
        assert_eq!(self.rows, self.cols);
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in 0..i {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn matvec_seq(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// `Aᵀy`; every entry accumulates over rows in increasing order.
    pub fn matvec_t_seq(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        self.col_block_dot(0, y, &mut out);
        out
    }

    #[cfg(feature = "parallel")]
    pub fn matvec_par(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .into_par_iter()
            .map(|i| dot(self.row(i), x))
            .collect()
    }

    #[cfg(feature = "parallel")]
    pub fn matvec_t_par(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        out.par_chunks_mut(COL_BLOCK)
            .enumerate()
            .for_each(|(b, chunk)| self.col_block_dot(b * COL_BLOCK, y, chunk));
        out
    }

    /// Columns `j0 .. j0 + out.len()` of `Aᵀy`, walking rows in order.
    fn col_block_dot(&self, j0: usize, y: &[f64], out: &mut [f64]) {
        let w = out.len();
        for (i, yi) in y.iter().enumerate() {
            let row = &self.data[i * self.cols + j0..i * self.cols + j0 + w];
            for (o, a) in out.iter_mut().zip(row) {
                *o += a * yi;
            }
        }
    }

    #[cfg(feature = "parallel")]
    fn use_parallel(&self) -> bool {
        self.data.len() >= PAR_THRESHOLD
    }
}

impl LinearOperator for DenseMatrix {
    fn rows(&self) -> usize {
        self.rows
    }

    fn cols(&self) -> usize {
        self.cols
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        #[cfg(feature = "parallel")]
        if self.use_parallel() {
            return self.matvec_par(x);
        }
        self.matvec_seq(x)
    }

    fn apply_t(&self, y: &[f64]) -> Vec<f64> {
        #[cfg(feature = "parallel")]
        if self.use_parallel() {
            return self.matvec_t_par(y);
        }
        self.matvec_t_seq(y)
    }
}

/// Compressed sparse rows. The transpose is stored alongside so that `Aᵀy`
/// is also a row-wise kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
    t_indptr: Vec<usize>,
    t_indices: Vec<usize>,
    t_values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from `(row, col, value)` triplets. Triplets must be sorted by
    /// row, then column, with no duplicates.
    pub fn from_sorted_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut indptr = vec![0usize; rows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        for &(r, c, v) in triplets {
            assert!(r < rows && c < cols, "triplet out of bounds");
            indptr[r + 1] += 1;
            indices.push(c);
            values.push(v);
        }
        for r in 0..rows {
            indptr[r + 1] += indptr[r];
        }

        let mut t_indptr = vec![0usize; cols + 1];
        for &(_, c, _) in triplets {
            t_indptr[c + 1] += 1;
        }
        for c in 0..cols {
            t_indptr[c + 1] += t_indptr[c];
        }
        let mut fill = t_indptr.clone();
        let mut t_indices = vec![0usize; triplets.len()];
        let mut t_values = vec![0.0; triplets.len()];
        for &(r, c, v) in triplets {
            let slot = fill[c];
            t_indices[slot] = r;
            t_values[slot] = v;
            fill[c] += 1;
        }

        Self {
            rows,
            cols,
            indptr,
            indices,
            values,
            t_indptr,
            t_indices,
            t_values,
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.rows, self.cols);
        for r in 0..self.rows {
            for k in self.indptr[r]..self.indptr[r + 1] {
                d.set(r, self.indices[k], self.values[k]);
            }
        }
        d
    }

    fn row_dot(indptr: &[usize], indices: &[usize], values: &[f64], r: usize, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for k in indptr[r]..indptr[r + 1] {
            acc += values[k] * x[indices[k]];
        }
        acc
    }

    fn kernel(
        n_out: usize,
        indptr: &[usize],
        indices: &[usize],
        values: &[f64],
        x: &[f64],
        nnz: usize,
    ) -> Vec<f64> {
        #[cfg(feature = "parallel")]
        if nnz >= PAR_THRESHOLD {
            return (0..n_out)
                .into_par_iter()
                .map(|r| Self::row_dot(indptr, indices, values, r, x))
                .collect();
        }
        let _ = nnz;
        (0..n_out)
            .map(|r| Self::row_dot(indptr, indices, values, r, x))
            .collect()
    }
}

impl LinearOperator for CsrMatrix {
    fn rows(&self) -> usize {
        self.rows
    }

    fn cols(&self) -> usize {
        self.cols
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        Self::kernel(self.rows, &self.indptr, &self.indices, &self.values, x, self.nnz())
    }

    fn apply_t(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.rows);
        Self::kernel(
            self.cols,
            &self.t_indptr,
            &self.t_indices,
            &self.t_values,
            y,
            self.nnz(),
        )
    }
}

/// Forward-difference operator `(Lx)_i = x_{i+1} - x_i`, shape `(n-1) × n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ForwardDifference {
    n: usize,
}

impl ForwardDifference {
    pub fn new(n: usize) -> Self {
        assert!(n >= 2, "forward difference needs n >= 2");
        Self { n }
    }

    /// `LᵀLx`
    pub fn gram_apply(&self, x: &[f64]) -> Vec<f64> {
        self.apply_t(&self.apply(x))
    }
}

impl LinearOperator for ForwardDifference {
    fn rows(&self) -> usize {
        self.n - 1
    }

    fn cols(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        x.windows(2).map(|w| w[1] - w[0]).collect()
    }

    fn apply_t(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.n - 1);
        let mut out = vec![0.0; self.n];
        for (i, yi) in y.iter().enumerate() {
            out[i] -= yi;
            out[i + 1] += yi;
        }
        out
    }
}

/// Estimates `‖A‖² = λ_max(AᵀA)` by power iteration from a seeded start.
///
/// Stops after `max_iter` sweeps or once successive Rayleigh quotients agree
/// to `rel_tol`.
pub fn spectral_norm_sq(op: &dyn LinearOperator, max_iter: usize, rel_tol: f64, seed: u64) -> f64 {
    let n = op.cols();
    if n == 0 || op.rows() == 0 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..1.5)).collect();
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);

    let mut lambda = 0.0;
    for _ in 0..max_iter {
        let w = op.apply_t(&op.apply(&v));
        let next = dot(&v, &w);
        let nw = norm(&w);
        if nw == 0.0 {
            return 0.0;
        }
        v = w.into_iter().map(|x| x / nw).collect();
        if (next - lambda).abs() <= rel_tol * next.abs() {
            return next;
        }
        lambda = next;
    }
    lambda
}

/// Defaults used by the problem builders: 200 sweeps, tolerance 1e-8.
pub fn spectral_norm_sq_default(op: &dyn LinearOperator) -> f64 {
    spectral_norm_sq(op, 200, 1e-8, 0x5eed_0001)
}
