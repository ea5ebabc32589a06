//! Orthonormalization against a positive semidefinite Gram matrix.
//!
//! A spanning family with Gram matrix `G` (rank `r`, possibly much smaller
//! than the family size) is compressed to an orthonormal basis of the
//! completion: a coefficient matrix `Q` with `Q†GQ = I_r`, together with the
//! surjection `P = Q†G` expressing any family member in that basis
//! (`P Q = I_r`). This is the engine behind balanced tensor products and
//! range computations.

use super::cmat::CMat;
use super::eig::eigh;
use crate::error::{Error, Result};
use crate::scalar::{cx, gate_scale, Real};

/// An orthonormal basis of the completion of a semi-inner-product space.
#[derive(Clone, Debug)]
pub struct SemiBasis<T: Real> {
    /// `n x r` isometry coefficients: `q†Gq = I`.
    pub q: CMat<T>,
    /// `r x n` surjection `q†G`; maps raw coefficients to basis coordinates.
    pub proj: CMat<T>,
    /// Gram eigenvalues retained (diagnostic, descending).
    pub lambdas: Vec<T>,
}

impl<T: Real> SemiBasis<T> {
    pub fn rank(&self) -> usize {
        self.q.cols()
    }
}

/// Direct-eigendecomposition cutoff; above it the pivoted route is used.
const DIRECT_LIMIT: usize = 256;

/// Compute a [`SemiBasis`] for the PSD matrix `g`, discarding directions whose
/// Gram eigenvalue falls below `rel` times the largest.
pub fn semi_orthobasis<T: Real>(g: &CMat<T>, rel: T) -> Result<SemiBasis<T>> {
    if !g.is_square() {
        return Err(Error::Dim("gram matrix must be square".into()));
    }
    let n = g.rows();
    if n == 0 {
        return Ok(SemiBasis {
            q: CMat::zeros(0, 0),
            proj: CMat::zeros(0, 0),
            lambdas: Vec::new(),
        });
    }
    let herm_res = g.hermitian_residual();
    let scale = g.max_abs().max(T::one());
    if herm_res > T::lit(1e-10) * gate_scale::<T>() * scale {
        return Err(Error::Input(format!(
            "gram matrix is not hermitian (residual {:.3e})",
            herm_res.as_f64()
        )));
    }
    if n <= DIRECT_LIMIT {
        direct_orthobasis(g, rel)
    } else {
        pivoted_orthobasis(g, rel)
    }
}

fn finish<T: Real>(
    g: &CMat<T>,
    carriers: CMat<T>,
    vals: &[T],
    vecs: &CMat<T>,
    rel: T,
) -> Result<SemiBasis<T>> {
    // `vals`/`vecs` diagonalize carriers† G carriers; keep eigenvalues above
    // the relative threshold, largest first.
    let lam_max = vals.last().copied().unwrap_or(T::zero());
    if lam_max <= T::epsilon() * T::lit(g.rows() as f64) {
        return Ok(SemiBasis {
            q: CMat::zeros(g.rows(), 0),
            proj: CMat::zeros(0, g.rows()),
            lambdas: Vec::new(),
        });
    }
    let thr = rel * lam_max;
    let kept: Vec<usize> = (0..vals.len())
        .rev()
        .filter(|&i| vals[i] > thr)
        .collect();
    let mut lambdas = Vec::with_capacity(kept.len());
    let mut sel = vecs.select_cols(&kept);
    for (slot, &i) in kept.iter().enumerate() {
        lambdas.push(vals[i]);
        let inv_sqrt = T::one() / vals[i].sqrt();
        for r in 0..sel.rows() {
            let e = sel[(r, slot)];
            sel[(r, slot)] = e * cx(inv_sqrt, T::zero());
        }
    }
    let q = carriers.mul(&sel);
    let proj = q.adjoint().mul(g);
    Ok(SemiBasis { q, proj, lambdas })
}

fn direct_orthobasis<T: Real>(g: &CMat<T>, rel: T) -> Result<SemiBasis<T>> {
    let (vals, vecs) = eigh(g)?;
    finish(g, CMat::identity(g.rows()), &vals, &vecs, rel)
}

/// Rank-revealing route for large `g`: greedy pivoted Cholesky selects a set
/// of coordinate directions spanning the completion, then a small
/// eigendecomposition of the pivot block orthonormalizes them. Sound when the
/// spectrum has a clear gap between true directions and null noise, which
/// holds for the exact-rank Gram matrices produced in this crate.
fn pivoted_orthobasis<T: Real>(g: &CMat<T>, rel: T) -> Result<SemiBasis<T>> {
    let n = g.rows();
    let mut d: Vec<T> = (0..n).map(|i| g[(i, i)].re).collect();
    let maxd0 = d.iter().fold(T::zero(), |a, &b| a.max(b));
    if maxd0 <= T::zero() {
        return Ok(SemiBasis {
            q: CMat::zeros(n, 0),
            proj: CMat::zeros(0, n),
            lambdas: Vec::new(),
        });
    }
    // Looser threshold than the final one so borderline directions survive to
    // the compressed eigendecomposition.
    let stop = rel * T::lit(1e-2) * maxd0;
    let mut pivots: Vec<usize> = Vec::new();
    let mut l_cols: Vec<Vec<crate::scalar::Cx<T>>> = Vec::new();
    loop {
        let mut p = 0usize;
        let mut best = T::neg_infinity();
        for (i, &di) in d.iter().enumerate() {
            if di > best {
                best = di;
                p = i;
            }
        }
        if best <= stop || pivots.len() == n {
            break;
        }
        let mut col: Vec<crate::scalar::Cx<T>> = (0..n).map(|i| g[(i, p)]).collect();
        for lc in &l_cols {
            let f = lc[p].conj();
            for (ci, li) in col.iter_mut().zip(lc) {
                *ci -= li * f;
            }
        }
        let piv_sqrt = best.sqrt();
        for ci in col.iter_mut() {
            *ci /= cx(piv_sqrt, T::zero());
        }
        for (di, ci) in d.iter_mut().zip(&col) {
            *di -= ci.norm_sqr();
        }
        d[p] = T::neg_infinity(); // never reselect
        pivots.push(p);
        l_cols.push(col);
    }
    if pivots.is_empty() {
        return Ok(SemiBasis {
            q: CMat::zeros(n, 0),
            proj: CMat::zeros(0, n),
            lambdas: Vec::new(),
        });
    }
    pivots.sort_unstable();
    let t = pivots.len();
    // Carriers are coordinate selectors on the pivot set.
    let mut carriers = CMat::<T>::zeros(n, t);
    for (j, &p) in pivots.iter().enumerate() {
        carriers[(p, j)] = num_traits::One::one();
    }
    let block = CMat::<T>::from_fn(t, t, |i, j| g[(pivots[i], pivots[j])]);
    let (vals, vecs) = eigh(&block)?;
    finish(g, carriers, &vals, &vecs, rel)
}

/// Rank of a PSD Gram matrix at relative threshold `rel`, via the same route
/// selection as [`semi_orthobasis`].
pub fn gram_rank<T: Real>(g: &CMat<T>, rel: T) -> Result<usize> {
    Ok(semi_orthobasis(g, rel)?.rank())
}
