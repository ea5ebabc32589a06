//! Dense complex matrices, row-major.
//!
//! This is the single container for every operator in the crate: group
//! generators, module actions, intertwiners, structure constants. Vectors are
//! plain `Vec<Cx<T>>`; a matrix-shaped vector uses the row-major convention
//! `vec(X)[(i, j)] = X[i * cols + j]`, which makes `kron(A, B)` act as
//! `X ↦ A X Bᵀ` on reshaped data.

use crate::error::{Error, Result};
use crate::scalar::{cx, Cx, Real};
use num_complex::Complex;
use num_traits::{One, Zero};
use rayon::prelude::*;
use std::ops::{Index, IndexMut};

/// Row-major dense complex matrix.
#[derive(Clone, PartialEq)]
pub struct CMat<T: Real> {
    rows: usize,
    cols: usize,
    data: Vec<Cx<T>>,
}

impl<T: Real> std::fmt::Debug for CMat<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "CMat {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows.min(8) {
            write!(f, "  ")?;
            for j in 0..self.cols.min(8) {
                let z = self[(i, j)];
                write!(f, "{:+.3e}{:+.3e}i  ", z.re.as_f64(), z.im.as_f64())?;
            }
            writeln!(f, "{}", if self.cols > 8 { "..." } else { "" })?;
        }
        if self.rows > 8 {
            writeln!(f,"  ...")?;
        }
        write!(f, "]")
    }
}

impl<T: Real> CMat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMat {
            rows,
            cols,
            data: vec![Cx::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Cx::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Cx<T>) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        CMat { rows, cols, data }
    }

    /// Build from rows of real entries.
    pub fn from_real_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        Self::from_fn(r, c, |i, j| cx(T::lit(rows[i][j]), T::zero()))
    }

    /// Reinterpret a vector as an `rows x cols` matrix (row-major), borrowing the data.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<Cx<T>>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dim(format!(
                "vector of length {} cannot form a {}x{} matrix",
                data.len(),
                rows,
                cols
            )));
        }
        Ok(CMat { rows, cols, data })
    }

    /// Column vector (n x 1) from a slice.
    pub fn col_vec(v: &[Cx<T>]) -> Self {
        CMat {
            rows: v.len(),
            cols: 1,
            data: v.to_vec(),
        }
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
    pub fn data(&self) -> &[Cx<T>] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [Cx<T>] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Cx<T>> {
        self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[Cx<T>] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<Cx<T>> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_col(&mut self, j: usize, v: &[Cx<T>]) {
        debug_assert_eq!(v.len(), self.rows);
        for i in 0..self.rows {
            self[(i, j)] = v[i];
        }
    }

    pub fn from_cols(rows: usize, cols: &[Vec<Cx<T>>]) -> Self {
        let mut m = Self::zeros(rows, cols.len());
        for (j, c) in cols.iter().enumerate() {
            m.set_col(j, c);
        }
        m
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Exact test: every imaginary part is (signed) zero. Constructions from
    /// real inputs stay exactly real under IEEE arithmetic, so this is a
    /// reliable fast-path discriminator, not a tolerance judgement.
    pub fn is_real(&self) -> bool {
        self.data.iter().all(|z| z.im == T::zero())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn conj(&self) -> Self {
        let data = self.data.iter().map(|z| z.conj()).collect();
        CMat {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn scale(&self, s: Cx<T>) -> Self {
        let data = self.data.iter().map(|z| z * s).collect();
        CMat {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn scale_re(&self, s: T) -> Self {
        self.scale(cx(s, T::zero()))
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "add shape");
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        CMat {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "sub shape");
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        CMat {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn axpy(&mut self, s: Cx<T>, other: &Self) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "axpy shape");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    /// Matrix product. Row-parallel above a size threshold; each output row is
    /// computed by exactly one thread in a fixed order, so results are
    /// bit-identical across thread counts.
    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(
            self.cols, other.rows,
            "mul shape: {}x{} * {}x{}",
            self.rows, self.cols, other.rows, other.cols
        );
        let (m, k, n) = (self.rows, self.cols, other.cols);
        if m == 0 || n == 0 {
            return CMat {
                rows: m,
                cols: n,
                data: Vec::new(),
            };
        }
        let mut out = vec![Cx::<T>::zero(); m * n];
        let work = m.saturating_mul(k).saturating_mul(n);
        let row_task = |i: usize, out_row: &mut [Cx<T>]| {
            for p in 0..k {
                let a = self.data[i * k + p];
                if a.re == T::zero() && a.im == T::zero() {
                    continue;
                }
                let brow = &other.data[p * n..(p + 1) * n];
                for (o, b) in out_row.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        };
        if work >= 1 << 22 {
            out.par_chunks_mut(n).enumerate().for_each(|(i, row)| row_task(i, row));
        } else {
            for (i, row) in out.chunks_mut(n).enumerate() {
                row_task(i, row);
            }
        }
        CMat {
            rows: m,
            cols: n,
            data: out,
        }
    }

    /// Matrix-vector product.
    pub fn apply(&self, v: &[Cx<T>]) -> Vec<Cx<T>> {
        assert_eq!(self.cols, v.len(), "apply shape");
        let mut out = vec![Cx::zero(); self.rows];
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = Cx::zero();
            for (a, x) in self.row(i).iter().zip(v) {
                acc += a * x;
            }
            *o = acc;
        }
        out
    }

    /// Adjoint applied to a vector: `A† v`.
    pub fn apply_adjoint(&self, v: &[Cx<T>]) -> Vec<Cx<T>> {
        assert_eq!(self.rows, v.len(), "apply_adjoint shape");
        let mut out = vec![Cx::zero(); self.cols];
        for (i, vi) in v.iter().enumerate() {
            for (j, a) in self.row(i).iter().enumerate() {
                out[j] += a.conj() * vi;
            }
        }
        out
    }

    /// Kronecker product with row-major index convention
    /// `(A ⊗ B)[(i·p + k, j·q + l)] = A[i,j] B[k,l]`.
    pub fn kron(&self, other: &Self) -> Self {
        let (m, n) = (self.rows, self.cols);
        let (p, q) = (other.rows, other.cols);
        let mut out = Self::zeros(m * p, n * q);
        for i in 0..m {
            for j in 0..n {
                let a = self[(i, j)];
                if a.re == T::zero() && a.im == T::zero() {
                    continue;
                }
                for k in 0..p {
                    for l in 0..q {
                        out[(i * p + k, j * q + l)] = a * other[(k, l)];
                    }
                }
            }
        }
        out
    }

    pub fn trace(&self) -> Cx<T> {
        let n = self.rows.min(self.cols);
        (0..n).map(|i| self[(i, i)]).fold(Cx::zero(), |a, b| a + b)
    }

    /// Hilbert–Schmidt inner product `tr(self† other)`, antilinear in `self`.
    pub fn hs_inner(&self, other: &Self) -> Cx<T> {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "hs shape");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.conj() * b)
            .fold(Cx::zero(), |a, b| a + b)
    }

    pub fn fro_norm(&self) -> T {
        self.data
            .iter()
            .map(|z| z.norm_sqr())
            .fold(T::zero(), |a, b| a + b)
            .sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.data
            .iter()
            .map(|z| z.norm_sqr())
            .fold(T::zero(), T::max)
            .sqrt()
    }

    /// `‖self − other‖_max`, a cheap elementwise distance for assertions.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.sub(other).max_abs()
    }

    pub fn hermitian_residual(&self) -> T {
        self.sub(&self.adjoint()).max_abs()
    }

    /// Symmetrized copy `(A + A†)/2`.
    pub fn hermitize(&self) -> Self {
        self.add(&self.adjoint()).scale_re(T::lit(0.5))
    }

    pub fn hcat(&self, other: &Self) -> Self {
        assert_eq!(self.rows, other.rows, "hcat shape");
        Self::from_fn(self.rows, self.cols + other.cols, |i, j| {
            if j < self.cols {
                self[(i, j)]
            } else {
                other[(i, j - self.cols)]
            }
        })
    }

    pub fn block_diag(blocks: &[&Self]) -> Self {
        let rows: usize = blocks.iter().map(|b| b.rows).sum();
        let cols: usize = blocks.iter().map(|b| b.cols).sum();
        let mut out = Self::zeros(rows, cols);
        let (mut ro, mut co) = (0, 0);
        for b in blocks {
            for i in 0..b.rows {
                for j in 0..b.cols {
                    out[(ro + i, co + j)] = b[(i, j)];
                }
            }
            ro += b.rows;
            co += b.cols;
        }
        out
    }

    /// Copy a sub-block starting at `(r0, c0)`.
    pub fn submatrix(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Self {
        Self::from_fn(rows, cols, |i, j| self[(r0 + i, c0 + j)])
    }

    /// Select a subset of columns.
    pub fn select_cols(&self, idx: &[usize]) -> Self {
        Self::from_fn(self.rows, idx.len(), |i, j| self[(i, idx[j])])
    }

    /// Embed this matrix as a block of a larger zero matrix at `(r0, c0)`.
    pub fn embed(&self, rows: usize, cols: usize, r0: usize, c0: usize) -> Self {
        let mut out = Self::zeros(rows, cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(r0 + i, c0 + j)] = self[(i, j)];
            }
        }
        out
    }

    /// Map to a different real scalar type (used by f32 smoke tests).
    pub fn cast<U: Real>(&self) -> CMat<U> {
        CMat::<U>::from_fn(self.rows, self.cols, |i, j| {
            let z = self[(i, j)];
            cx(U::lit(z.re.as_f64()), U::lit(z.im.as_f64()))
        })
    }
}

impl<T: Real> Index<(usize, usize)> for CMat<T> {
    type Output = Cx<T>;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Cx<T> {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<T: Real> IndexMut<(usize, usize)> for CMat<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Cx<T> {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

/// Euclidean norm of a complex vector.
pub fn vec_norm<T: Real>(v: &[Cx<T>]) -> T {
    v.iter()
        .map(|z| z.norm_sqr())
        .fold(T::zero(), |a, b| a + b)
        .sqrt()
}

/// Standard inner product, antilinear in the first argument.
pub fn vec_inner<T: Real>(a: &[Cx<T>], b: &[Cx<T>]) -> Cx<T> {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| x.conj() * y)
        .fold(Complex::zero(), |s, t| s + t)
}

/// Multiply a vector's entries by a unimodular phase that makes the first
/// coordinate of significant magnitude real and positive. Deterministic
/// canonicalization for eigenvectors and invariant vectors; threshold is half
/// the max modulus, so the pivot choice is stable under small perturbations.
pub fn phase_fix<T: Real>(v: &mut [Cx<T>]) {
    let maxa = v
        .iter()
        .map(|z| z.norm_sqr())
        .fold(T::zero(), T::max)
        .sqrt();
    if maxa == T::zero() {
        return;
    }
    let half = maxa * T::lit(0.5);
    let pivot = v
        .iter()
        .position(|z| z.norm() >= half)
        .expect("pivot exists by construction");
    let p = v[pivot];
    let phase = p.conj() / cx(p.norm(), T::zero());
    for z in v.iter_mut() {
        *z *= phase;
    }
    // The pivot entry is now real up to roundoff; zero its imaginary dust.
    v[pivot] = cx(v[pivot].re, T::zero());
}
