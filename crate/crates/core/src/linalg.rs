//! Dense complex matrices and the small amount of linear algebra the
//! detectors and coherence tools need.
//!
//! Storage is column-major because every hot path (correlation `X^H v`,
//! residual updates, column normalisation) walks whole columns.

use std::borrow::Cow;
use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::FftPlanner;

pub type C64 = Complex64;

/// `sum_i conj(a_i) * b_i`
#[inline]
pub fn cdot(a: &[C64], b: &[C64]) -> C64 {
    debug_assert_eq!(a.len(), b.len());
    let mut re = 0.0;
    let mut im = 0.0;
    for (x, y) in a.iter().zip(b) {
        re += x.re * y.re + x.im * y.im;
        im += x.re * y.im - x.im * y.re;
    }
    C64::new(re, im)
}

#[inline]
pub fn norm2(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

#[inline]
pub fn norm_inf(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `out += alpha * x`
#[inline]
pub fn axpy(alpha: C64, x: &[C64], out: &mut [C64]) {
    for (o, xi) in out.iter_mut().zip(x) {
        *o += alpha * xi;
    }
}

/// Column-major complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![C64::new(0.0, 0.0); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from equal-length columns.
    ///
    /// Panics if the columns differ in length.
    pub fn from_columns<V: AsRef<[C64]>>(columns: &[V]) -> Self {
        let rows = columns.first().map_or(0, |c| c.as_ref().len());
        let mut data = Vec::with_capacity(rows * columns.len());
        for c in columns {
            let c = c.as_ref();
            assert_eq!(c.len(), rows, "ragged columns");
            data.extend_from_slice(c);
        }
        Self { rows, cols: columns.len(), data }
    }

    /// Row-major input, as used by the codebook container format.
    pub fn from_row_major(rows: usize, cols: usize, entries: &[C64]) -> Self {
        assert_eq!(entries.len(), rows * cols);
        Self::from_fn(rows, cols, |i, j| entries[i * cols + j])
    }

    pub fn to_row_major(&self) -> Vec<C64> {
        let mut out = Vec::with_capacity(self.data.len());
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.push(self[(i, j)]);
            }
        }
        out
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
    pub fn col(&self, j: usize) -> &[C64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    #[inline]
    pub fn col_mut(&mut self, j: usize) -> &mut [C64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[C64]> {
        // chunks_exact panics on a zero chunk size
        let rows = self.rows.max(1);
        self.data.chunks_exact(rows).take(if self.rows == 0 { 0 } else { self.cols })
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn matmul(&self, rhs: &CMatrix) -> Self {
        assert_eq!(self.cols, rhs.rows, "inner dimension mismatch");
        let mut out = Self::zeros(self.rows, rhs.cols);
        for j in 0..rhs.cols {
            let dst = &mut out.data[j * self.rows..(j + 1) * self.rows];
            for (k, &b) in rhs.col(j).iter().enumerate() {
                if b != C64::new(0.0, 0.0) {
                    axpy(b, self.col(k), dst);
                }
            }
        }
        out
    }

    /// `X z`
    pub fn mul_vec(&self, z: &[C64]) -> Vec<C64> {
        assert_eq!(z.len(), self.cols);
        let mut out = vec![C64::new(0.0, 0.0); self.rows];
        for (j, &zj) in z.iter().enumerate() {
            if zj != C64::new(0.0, 0.0) {
                axpy(zj, self.col(j), &mut out);
            }
        }
        out
    }

    /// `X^H v`
    pub fn adjoint_mul_vec(&self, v: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.cols];
        self.adjoint_mul_vec_into(v, &mut out);
        out
    }

    pub fn adjoint_mul_vec_into(&self, v: &[C64], out: &mut [C64]) {
        assert_eq!(v.len(), self.rows);
        assert_eq!(out.len(), self.cols);
        for (o, c) in out.iter_mut().zip(self.columns()) {
            *o = cdot(c, v);
        }
    }

    pub fn column_norms(&self) -> Vec<f64> {
        self.columns().map(norm2).collect()
    }

    /// Scales every column to unit norm and returns the original norms.
    /// Zero columns are left untouched.
    pub fn normalize_columns(&mut self) -> Vec<f64> {
        let norms = self.column_norms();
        for (j, &n) in norms.iter().enumerate() {
            if n > 0.0 {
                let s = 1.0 / n;
                self.col_mut(j).iter_mut().for_each(|z| *z *= s);
            }
        }
        norms
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self::from_fn(rows.len(), self.cols, |i, j| self[(rows[i], j)])
    }

    pub fn select_columns(&self, cols: &[usize]) -> Self {
        let mut data = Vec::with_capacity(self.rows * cols.len());
        for &j in cols {
            data.extend_from_slice(self.col(j));
        }
        Self { rows: self.rows, cols: cols.len(), data }
    }

    /// Multiplies column `j` by `d[j]`.
    pub fn scale_columns(&self, d: &[C64]) -> Self {
        assert_eq!(d.len(), self.cols);
        let mut out = self.clone();
        for (j, &s) in d.iter().enumerate() {
            out.col_mut(j).iter_mut().for_each(|z| *z *= s);
        }
        out
    }

    pub fn max_abs_diff(&self, other: &CMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn to_nalgebra(&self) -> nalgebra::DMatrix<C64> {
        nalgebra::DMatrix::from_column_slice(self.rows, self.cols, &self.data)
    }

    pub fn from_nalgebra(m: &nalgebra::DMatrix<C64>) -> Self {
        Self { rows: m.nrows(), cols: m.ncols(), data: m.as_slice().to_vec() }
    }
}

impl std::ops::Index<(usize, usize)> for CMatrix {
    type Output = C64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[j * self.rows + i]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[j * self.rows + i]
    }
}

/// A linear measurement dictionary seen only through the operations the
/// matching-pursuit detectors use. Dense matrices implement it directly;
/// [`IdentityDictionary`] lets guarantee experiments run at sizes where a
/// dense matrix would not fit in memory.
pub trait Dictionary: Sync {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    /// `out = X^H v`
    fn correlate(&self, v: &[C64], out: &mut [C64]);
    fn column(&self, j: usize) -> Cow<'_, [C64]>;

    /// `out += alpha * x_j`
    fn add_column(&self, j: usize, alpha: C64, out: &mut [C64]) {
        axpy(alpha, &self.column(j), out);
    }
}

impl Dictionary for CMatrix {
    fn nrows(&self) -> usize {
        self.rows
    }
    fn ncols(&self) -> usize {
        self.cols
    }
    fn correlate(&self, v: &[C64], out: &mut [C64]) {
        self.adjoint_mul_vec_into(v, out)
    }
    fn column(&self, j: usize) -> Cow<'_, [C64]> {
        Cow::Borrowed(self.col(j))
    }
    fn add_column(&self, j: usize, alpha: C64, out: &mut [C64]) {
        axpy(alpha, self.col(j), out)
    }
}

/// `X = I_n`, never materialised.
#[derive(Clone, Copy, Debug)]
pub struct IdentityDictionary {
    pub n: usize,
}

impl Dictionary for IdentityDictionary {
    fn nrows(&self) -> usize {
        self.n
    }
    fn ncols(&self) -> usize {
        self.n
    }
    fn correlate(&self, v: &[C64], out: &mut [C64]) {
        out.copy_from_slice(v)
    }
    fn column(&self, j: usize) -> Cow<'_, [C64]> {
        let mut e = vec![C64::new(0.0, 0.0); self.n];
        e[j] = C64::new(1.0, 0.0);
        Cow::Owned(e)
    }
    fn add_column(&self, j: usize, alpha: C64, out: &mut [C64]) {
        out[j] += alpha;
    }
}

/// Unitary DFT matrix with entries `exp(-j 2 pi k n / P) / sqrt(P)`.
pub fn dft_matrix(p: usize) -> CMatrix {
    let s = 1.0 / (p as f64).sqrt();
    CMatrix::from_fn(p, p, |k, n| {
        let ang = -2.0 * PI * ((k * n) % p) as f64 / p as f64;
        C64::from_polar(s, ang)
    })
}

/// Unitary forward DFT of every column, computed with an FFT.
pub fn dft_columns(m: &CMatrix) -> CMatrix {
    let p = m.rows();
    let mut out = m.clone();
    if p == 0 {
        return out;
    }
    let fft = FftPlanner::<f64>::new().plan_fft_forward(p);
    let s = 1.0 / (p as f64).sqrt();
    let mut scratch = vec![C64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    for j in 0..out.cols() {
        let col = out.col_mut(j);
        fft.process_with_scratch(col, &mut scratch);
        col.iter_mut().for_each(|z| *z *= s);
    }
    out
}

/// Unitary forward DFT of a single vector.
pub fn unitary_dft(v: &[C64]) -> Vec<C64> {
    let mut buf = v.to_vec();
    if buf.is_empty() {
        return buf;
    }
    FftPlanner::<f64>::new().plan_fft_forward(buf.len()).process(&mut buf);
    let s = 1.0 / (v.len() as f64).sqrt();
    buf.iter_mut().for_each(|z| *z *= s);
    buf
}

/// Cyclic down-shift by `k`: `out[i] = v[(i - k) mod P]`.
pub fn cyclic_shift(v: &[C64], k: usize) -> Vec<C64> {
    let p = v.len();
    if p == 0 {
        return Vec::new();
    }
    let k = k % p;
    (0..p).map(|i| v[(i + p - k) % p]).collect()
}

/// Largest singular value by power iteration on `X^H X`.
pub fn spectral_norm_power(x: &CMatrix, tol: f64, max_iter: usize) -> f64 {
    let n = x.cols();
    if n == 0 || x.rows() == 0 {
        return 0.0;
    }
    // deterministic, generic start vector
    let mut z: Vec<C64> = (0..n).map(|j| C64::from_polar(1.0, 0.7 * j as f64 + 0.3 * ((j * j) % 17) as f64)).collect();
    let nz = norm2(&z);
    z.iter_mut().for_each(|c| *c /= nz);
    let mut lambda = 0.0;
    for _ in 0..max_iter {
        let u = x.mul_vec(&z);
        let w = x.adjoint_mul_vec(&u);
        let nw = norm2(&w);
        if nw == 0.0 {
            return 0.0;
        }
        let next = nw;
        z = w.into_iter().map(|c| c / nw).collect();
        if (next - lambda).abs() <= tol * next {
            lambda = next;
            break;
        }
        lambda = next;
    }
    lambda.sqrt()
}

/// Spectral norm of a Hermitian matrix, via its eigenvalues.
pub fn hermitian_spectral_norm(h: &CMatrix) -> f64 {
    assert_eq!(h.rows(), h.cols());
    if h.rows() == 0 {
        return 0.0;
    }
    let eig = nalgebra::SymmetricEigen::new(h.to_nalgebra());
    eig.eigenvalues.iter().map(|e| e.abs()).fold(0.0, f64::max)
}

/// `n` i.i.d. draws of CN(0, var): real and imaginary parts each N(0, var/2).
pub fn complex_normal_vec<R: Rng + ?Sized>(rng: &mut R, n: usize, var: f64) -> Vec<C64> {
    let s = (var / 2.0).sqrt();
    (0..n)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            C64::new(re * s, im * s)
        })
        .collect()
}

/// `X_S^H X_S` for the listed columns.
pub fn gram_of(x: &dyn Dictionary, cols: &[usize]) -> CMatrix {
    let k = cols.len();
    let vecs: Vec<Cow<'_, [C64]>> = cols.iter().map(|&j| x.column(j)).collect();
    let mut g = CMatrix::zeros(k, k);
    for a in 0..k {
        for b in a..k {
            let v = cdot(&vecs[a], &vecs[b]);
            g[(a, b)] = v;
            g[(b, a)] = v.conj();
        }
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn fft_columns_match_dense_dft() {
        let m = CMatrix::from_fn(7, 3, |i, j| c((i * j) as f64 * 0.3 - 1.0, (i + 2 * j) as f64 * 0.1));
        let dense = dft_matrix(7).matmul(&m);
        assert!(dense.max_abs_diff(&dft_columns(&m)) < 1e-12);
    }

    #[test]
    fn dft_matrix_is_unitary() {
        let f = dft_matrix(8);
        assert!(f.adjoint().matmul(&f).max_abs_diff(&CMatrix::identity(8)) < 1e-12);
    }

    #[test]
    fn power_iteration_matches_svd() {
        let m = CMatrix::from_fn(5, 9, |i, j| c(((i * 7 + j * 3) % 5) as f64 - 2.0, ((i + j) % 3) as f64));
        let svd = m.to_nalgebra().singular_values();
        let top = svd.iter().cloned().fold(0.0, f64::max);
        assert!((spectral_norm_power(&m, 1e-15, 10_000) - top).abs() < 1e-9);
    }

    #[test]
    fn cyclic_shift_moves_down() {
        let v = [c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0)];
        assert_eq!(cyclic_shift(&v, 1), vec![c(3.0, 0.0), c(1.0, 0.0), c(2.0, 0.0)]);
        assert_eq!(cyclic_shift(&v, 3), v.to_vec());
    }

    #[test]
    fn identity_dictionary_agrees_with_dense_identity() {
        let id = IdentityDictionary { n: 4 };
        let dense = CMatrix::identity(4);
        let v = [c(1.0, 2.0), c(0.0, -1.0), c(3.0, 0.5), c(-2.0, 0.0)];
        let mut a = vec![C64::default(); 4];
        let mut b = vec![C64::default(); 4];
        id.correlate(&v, &mut a);
        dense.correlate(&v, &mut b);
        assert_eq!(a, b);
        assert_eq!(id.column(2).as_ref(), dense.col(2));
    }
}
