//! Hermitian eigensolver and the small set of decompositions built on it.
//!
//! One numerical kernel covers every need of the crate: Householder
//! tridiagonalization with phase absorption, followed by an implicit-shift QL
//! sweep on the real tridiagonal form. Everything else — unitary matrix
//! exponentials, operator norms, kernels of positive operators, polar factors —
//! reduces to it.

use super::cmat::{phase_fix, CMat};
use crate::error::{Error, Result};
use crate::scalar::{cx, gate_scale, Cx, Real};
use num_complex::Complex;
use num_traits::{One, Zero};

/// Eigendecomposition of a hermitian matrix.
///
/// Returns eigenvalues in ascending order and a unitary matrix whose columns
/// are the matching eigenvectors, each column phase-normalized so its first
/// entry of significant modulus is real positive. The input is symmetrized
/// internally, so roundoff-level deviation from hermiticity is tolerated.
pub fn eigh<T: Real>(a: &CMat<T>) -> Result<(Vec<T>, CMat<T>)> {
    if !a.is_square() {
        return Err(Error::Dim(format!(
            "eigh needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let n = a.rows();
    if n == 0 {
        return Ok((Vec::new(), CMat::zeros(0, 0)));
    }
    let mut m = a.hermitize();
    if n == 1 {
        return Ok((vec![m[(0, 0)].re], CMat::identity(1)));
    }

    // Householder reduction to tridiagonal form. Reflectors are stored for a
    // second accumulation pass.
    let mut reflectors: Vec<(usize, Vec<Cx<T>>, T)> = Vec::new();
    for k in 0..n.saturating_sub(2) {
        let len = n - k - 1;
        let mut x: Vec<Cx<T>> = (0..len).map(|i| m[(k + 1 + i, k)]).collect();
        let sigma = x
            .iter()
            .map(|z| z.norm_sqr())
            .fold(T::zero(), |s, t| s + t)
            .sqrt();
        if sigma == T::zero() {
            continue;
        }
        let x0 = x[0];
        let phase = if x0.norm() == T::zero() {
            Cx::one()
        } else {
            x0 / cx(x0.norm(), T::zero())
        };
        let alpha = -phase * cx(sigma, T::zero());
        x[0] -= alpha;
        let vnorm2 = x
            .iter()
            .map(|z| z.norm_sqr())
            .fold(T::zero(), |s, t| s + t);
        if vnorm2 == T::zero() {
            // Column already in the desired form.
            continue;
        }
        let tau = T::lit(2.0) / vnorm2;
        let v = x;

        // Update the trailing block B <- B - v u† - u v† with
        // w = B v, c = v† w, u = tau w - (tau² c / 2) v.
        let mut w = vec![Cx::<T>::zero(); len];
        for i in 0..len {
            let mut acc = Cx::zero();
            for j in 0..len {
                acc += m[(k + 1 + i, k + 1 + j)] * v[j];
            }
            w[i] = acc;
        }
        let c: Cx<T> = v
            .iter()
            .zip(&w)
            .map(|(vi, wi)| vi.conj() * wi)
            .fold(Complex::zero(), |s, t| s + t);
        let half_tau2_c = c * cx(tau * tau * T::lit(0.5), T::zero());
        let u: Vec<Cx<T>> = w
            .iter()
            .zip(&v)
            .map(|(wi, vi)| wi * cx(tau, T::zero()) - half_tau2_c * vi)
            .collect();
        for i in 0..len {
            for j in 0..len {
                let delta = v[i] * u[j].conj() + u[i] * v[j].conj();
                let e = m[(k + 1 + i, k + 1 + j)];
                m[(k + 1 + i, k + 1 + j)] = e - delta;
            }
        }
        m[(k + 1, k)] = alpha;
        m[(k, k + 1)] = alpha.conj();
        for i in 1..len {
            m[(k + 1 + i, k)] = Cx::zero();
            m[(k, k + 1 + i)] = Cx::zero();
        }
        reflectors.push((k, v, tau));
    }

    // Absorb subdiagonal phases into a diagonal unitary so the tridiagonal
    // matrix becomes real symmetric.
    let mut d = vec![T::zero(); n];
    let mut e = vec![T::zero(); n]; // e[i] couples i and i+1; e[n-1] unused
    let mut dphase = vec![Cx::<T>::one(); n];
    for i in 0..n {
        d[i] = m[(i, i)].re;
    }
    for i in 0..n - 1 {
        let beta = m[(i + 1, i)];
        let b = beta.norm();
        e[i] = b;
        let ph = if b == T::zero() {
            Cx::one()
        } else {
            beta / cx(b, T::zero())
        };
        dphase[i + 1] = dphase[i] * ph;
    }

    // Accumulate U = H_0 ... H_{n-3} D by starting from diag(dphase) and
    // applying reflectors from the innermost outward.
    let mut u_acc = CMat::<T>::zeros(n, n);
    for i in 0..n {
        u_acc[(i, i)] = dphase[i];
    }
    for (k, v, tau) in reflectors.iter().rev() {
        let len = v.len();
        // U <- (I - tau v v†) U on rows k+1..n.
        for col in 0..n {
            let mut dot = Cx::<T>::zero();
            for i in 0..len {
                dot += v[i].conj() * u_acc[(k + 1 + i, col)];
            }
            let f = dot * cx(*tau, T::zero());
            for i in 0..len {
                let e0 = u_acc[(k + 1 + i, col)];
                u_acc[(k + 1 + i, col)] = e0 - v[i] * f;
            }
        }
    }

    // Implicit-shift QL iteration on the real tridiagonal matrix, rotations
    // accumulated into the complex eigenvector matrix.
    tql2(&mut d, &mut e, &mut u_acc)?;

    // Ascending sort with a stable index permutation, then canonical phases.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].partial_cmp(&d[j]).expect("finite eigenvalues"));
    let values: Vec<T> = order.iter().map(|&i| d[i]).collect();
    let mut vectors = u_acc.select_cols(&order);
    for j in 0..n {
        let mut col = vectors.col(j);
        phase_fix(&mut col);
        vectors.set_col(j, &col);
    }
    Ok((values, vectors))
}

/// QL with implicit shifts on a symmetric tridiagonal matrix, rotating the
/// columns of `z` along. `e[i]` couples entries `i` and `i+1`.
fn tql2<T: Real>(d: &mut [T], e: &mut [T], z: &mut CMat<T>) -> Result<()> {
    let n = d.len();
    if n == 0 {
        return Ok(());
    }
    let eps = T::epsilon();
    // Absolute deflation floor, grown over the rows seen so far. The relative
    // test alone can never fire inside a cluster of zero eigenvalues, where
    // |d[m]| + |d[m+1]| sits at roundoff level; treating couplings below
    // eps·scale as zero keeps the classical eps·‖A‖ accuracy and guarantees
    // termination.
    let mut floor = T::zero();
    for l in 0..n {
        let coupling = if l + 1 < n { e[l].abs() } else { T::zero() };
        floor = floor.max(eps * (d[l].abs() + coupling));
        let mut iter = 0usize;
        loop {
            // Find the first decoupled position at or after l.
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= eps * dd || e[m].abs() <= floor {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 50 {
                return Err(Error::Numerical(format!(
                    "tridiagonal QL failed to converge at index {l} after 50 sweeps"
                )));
            }
            // Shift from the 2x2 block at l.
            let mut g = (d[l + 1] - d[l]) / (T::lit(2.0) * e[l]);
            let mut r = g.hypot(T::one());
            let denom = g + if g >= T::zero() { r.abs() } else { -r.abs() };
            g = d[m] - d[l] + e[l] / denom;
            let mut s = T::one();
            let mut c = T::one();
            let mut p = T::zero();
            let mut underflow = false;
            for i in (l..m).rev() {
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == T::zero() {
                    d[i + 1] -= p;
                    e[m] = T::zero();
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + T::lit(2.0) * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                // Rotate eigenvector columns i and i+1.
                for k in 0..z.rows() {
                    let zf = z[(k, i + 1)];
                    let zi = z[(k, i)];
                    z[(k, i + 1)] = zi * cx(s, T::zero()) + zf * cx(c, T::zero());
                    z[(k, i)] = zi * cx(c, T::zero()) - zf * cx(s, T::zero());
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = T::zero();
        }
    }
    Ok(())
}

/// Exponential of a skew-hermitian matrix, computed through the hermitian
/// eigendecomposition of `iX`. For exactly real (antisymmetric) input the
/// result is projected back to real entries, which the true exponential has.
pub fn exp_skew<T: Real>(x: &CMat<T>) -> Result<CMat<T>> {
    if !x.is_square() {
        return Err(Error::Dim("exp_skew needs a square matrix".into()));
    }
    let n = x.rows();
    let skew_res = x.add(&x.adjoint()).max_abs();
    let scale = x.max_abs().max(T::one());
    if skew_res > T::lit(1e-10) * gate_scale::<T>() * scale {
        return Err(Error::Input(format!(
            "exp_skew input is not skew-hermitian (residual {:.3e})",
            skew_res.as_f64()
        )));
    }
    let i1 = cx(T::zero(), T::one());
    let h = x.scale(i1); // hermitian
    let (vals, q) = eigh(&h)?;
    // exp(X) = exp(-i H) = Q exp(-i Λ) Q†.
    let mut phases = CMat::<T>::zeros(n, n);
    for (k, lam) in vals.iter().enumerate() {
        phases[(k, k)] = cx(lam.cos(), -lam.sin());
    }
    let mut out = q.mul(&phases).mul(&q.adjoint());
    if x.is_real() {
        for z in out.data_mut() {
            *z = cx(z.re, T::zero());
        }
    }
    Ok(out)
}

/// Largest singular value. Exact through the eigendecomposition of `A†A` for
/// moderate sizes, deterministic power iteration above that (norm estimates
/// feed tolerance scales, where a few missing digits are harmless).
pub fn opnorm<T: Real>(a: &CMat<T>) -> T {
    let (m, n) = (a.rows(), a.cols());
    if m == 0 || n == 0 {
        return T::zero();
    }
    let gram = if n <= m {
        a.adjoint().mul(a)
    } else {
        a.mul(&a.adjoint())
    };
    let k = gram.rows();
    if k <= 256 {
        match eigh(&gram) {
            Ok((vals, _)) => vals.last().copied().unwrap_or(T::zero()).max(T::zero()).sqrt(),
            Err(_) => power_norm(&gram),
        }
    } else {
        power_norm(&gram)
    }
}

/// Power iteration for the top eigenvalue of a PSD hermitian matrix, with a
/// fixed deterministic start vector.
fn power_norm<T: Real>(gram: &CMat<T>) -> T {
    let k = gram.rows();
    let mut v: Vec<Cx<T>> = (0..k)
        .map(|i| cx(T::one() + T::lit(0.1) * T::lit((i % 7) as f64), T::zero()))
        .collect();
    let mut lam = T::zero();
    for _ in 0..300 {
        let w = gram.apply(&v);
        let nrm = super::cmat::vec_norm(&w);
        if nrm == T::zero() {
            return T::zero();
        }
        let new_lam = nrm;
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = *wi / cx(nrm, T::zero());
        }
        if (new_lam - lam).abs() <= T::lit(1e-13) * new_lam.max(T::one()) {
            lam = new_lam;
            break;
        }
        lam = new_lam;
    }
    lam.max(T::zero()).sqrt()
}

/// Orthonormal basis (standard inner product) of the small-eigenvalue subspace
/// of a positive semidefinite hermitian matrix: columns with `λ ≤ rel·λmax`.
/// For a numerically zero matrix the whole space is returned.
pub fn psd_kernel<T: Real>(g: &CMat<T>, rel: T) -> Result<CMat<T>> {
    let (vals, vecs) = eigh(g)?;
    let n = g.rows();
    if n == 0 {
        return Ok(CMat::zeros(0, 0));
    }
    let lam_max = vals.last().copied().unwrap_or(T::zero());
    if lam_max <= T::epsilon() * T::lit(n as f64) {
        return Ok(CMat::identity(n));
    }
    let thr = rel * lam_max;
    let idx: Vec<usize> = vals
        .iter()
        .enumerate()
        .filter(|(_, &v)| v <= thr)
        .map(|(i, _)| i)
        .collect();
    Ok(vecs.select_cols(&idx))
}

/// Rank of a positive semidefinite hermitian matrix at relative threshold
/// `rel`: the number of eigenvalues above `rel·λmax`.
pub fn psd_rank<T: Real>(g: &CMat<T>, rel: T) -> Result<usize> {
    let (vals, _) = eigh(g)?;
    let lam_max = vals.last().copied().unwrap_or(T::zero());
    if lam_max <= T::epsilon() * T::lit(g.rows() as f64) {
        return Ok(0);
    }
    let thr = rel * lam_max;
    Ok(vals.iter().filter(|&&v| v > thr).count())
}

/// Unitary polar factor of a square, well-conditioned matrix:
/// `U = A (A†A)^{-1/2}`.
pub fn polar_unitary<T: Real>(a: &CMat<T>) -> Result<CMat<T>> {
    if !a.is_square() {
        return Err(Error::Dim("polar factor needs a square matrix".into()));
    }
    let n = a.rows();
    let (vals, v) = eigh(&a.adjoint().mul(a))?;
    let lam_max = vals.last().copied().unwrap_or(T::zero());
    let lam_min = vals.first().copied().unwrap_or(T::zero());
    if lam_max <= T::zero() || lam_min <= T::lit(1e-13) * lam_max {
        return Err(Error::Numerical(format!(
            "polar factor of a nearly singular matrix (spectrum [{:.3e}, {:.3e}])",
            lam_min.as_f64(),
            lam_max.as_f64()
        )));
    }
    let mut inv_sqrt = CMat::<T>::zeros(n, n);
    for (k, lam) in vals.iter().enumerate() {
        inv_sqrt[(k, k)] = cx(T::one() / lam.sqrt(), T::zero());
    }
    Ok(a.mul(&v).mul(&inv_sqrt).mul(&v.adjoint()))
}

/// Inverse by Gauss–Jordan elimination with partial pivoting. Intended for
/// small, well-conditioned systems (pairing matrices, gauge fixes); fails if a
/// pivot falls below `1e-13` times the largest entry.
pub fn inverse<T: Real>(a: &CMat<T>) -> Result<CMat<T>> {
    if !a.is_square() {
        return Err(Error::Dim("inverse needs a square matrix".into()));
    }
    let n = a.rows();
    let scale = a.max_abs();
    if n == 0 {
        return Ok(CMat::zeros(0, 0));
    }
    if scale == T::zero() {
        return Err(Error::Numerical("inverse of the zero matrix".into()));
    }
    let mut work = a.clone();
    let mut inv = CMat::<T>::identity(n);
    for col in 0..n {
        let mut piv = col;
        let mut best = work[(col, col)].norm();
        for r in col + 1..n {
            let v = work[(r, col)].norm();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if best <= T::lit(1e-13) * scale {
            return Err(Error::Numerical(format!(
                "matrix is numerically singular (pivot {:.3e} at column {col})",
                best.as_f64()
            )));
        }
        if piv != col {
            for j in 0..n {
                let tmp = work[(col, j)];
                work[(col, j)] = work[(piv, j)];
                work[(piv, j)] = tmp;
                let tmp = inv[(col, j)];
                inv[(col, j)] = inv[(piv, j)];
                inv[(piv, j)] = tmp;
            }
        }
        let d = work[(col, col)];
        for j in 0..n {
            work[(col, j)] /= d;
            inv[(col, j)] /= d;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = work[(r, col)];
            if f.norm() == T::zero() {
                continue;
            }
            for j in 0..n {
                let wc = work[(col, j)];
                let ic = inv[(col, j)];
                let e = work[(r, j)];
                work[(r, j)] = e - f * wc;
                let e = inv[(r, j)];
                inv[(r, j)] = e - f * ic;
            }
        }
    }
    Ok(inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::gaussian_complex;

    fn seeded_hermitian(n: usize, seed: u64) -> CMat<f64> {
        let data = gaussian_complex::<f64>(seed, n * n);
        let a = CMat::from_vec(n, n, data).unwrap();
        a.hermitize()
    }

    fn assert_unitary(u: &CMat<f64>, tol: f64) {
        let res = u
            .adjoint()
            .mul(u)
            .max_abs_diff(&CMat::identity(u.cols()));
        assert!(res < tol, "not unitary: residual {res:e}");
    }

    #[test]
    fn eigh_reconstructs_seeded_hermitian() {
        for (n, seed) in [(1usize, 5u64), (2, 6), (7, 7), (20, 8), (33, 9)] {
            let a = seeded_hermitian(n, seed);
            let (vals, vecs) = eigh(&a).unwrap();
            assert_unitary(&vecs, 1e-12);
            let mut lam = CMat::<f64>::zeros(n, n);
            for (i, &v) in vals.iter().enumerate() {
                lam[(i, i)] = cx(v, 0.0);
            }
            let rec = vecs.mul(&lam).mul(&vecs.adjoint());
            let scale = a.max_abs().max(1.0);
            assert!(
                rec.max_abs_diff(&a) < 1e-12 * scale,
                "n={n}: reconstruction residual {:e}",
                rec.max_abs_diff(&a)
            );
            for w in vals.windows(2) {
                assert!(w[0] <= w[1], "eigenvalues not ascending");
            }
        }
    }

    #[test]
    fn eigh_handles_degenerate_spectra() {
        // diag(1,1,1,2) conjugated by a seeded unitary.
        let g = seeded_hermitian(4, 17);
        let (_, u) = eigh(&g).unwrap();
        let mut d = CMat::<f64>::zeros(4, 4);
        for (i, v) in [1.0, 1.0, 1.0, 2.0].iter().enumerate() {
            d[(i, i)] = cx(*v, 0.0);
        }
        let a = u.mul(&d).mul(&u.adjoint());
        let (vals, vecs) = eigh(&a).unwrap();
        for (got, want) in vals.iter().zip([1.0, 1.0, 1.0, 2.0]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert_unitary(&vecs, 1e-12);
    }

    #[test]
    fn eigh_keeps_real_input_real() {
        let data = crate::rng::gaussian_reals::<f64>(23, 36);
        let a = CMat::from_fn(6, 6, |i, j| cx(data[i * 6 + j], 0.0)).hermitize();
        let (_, vecs) = eigh(&a).unwrap();
        assert!(vecs.is_real(), "real symmetric input must give real vectors");
    }

    #[test]
    fn eigh_matches_known_two_by_two() {
        // [[0, 1], [1, 0]] has eigenvalues -1, 1.
        let a = CMat::<f64>::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let (vals, _) = eigh(&a).unwrap();
        assert!((vals[0] + 1.0).abs() < 1e-14);
        assert!((vals[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn exp_skew_gives_plane_rotation() {
        let th = 0.731;
        let mut x = CMat::<f64>::zeros(3, 3);
        x[(0, 1)] = cx(-th, 0.0);
        x[(1, 0)] = cx(th, 0.0);
        let r = exp_skew(&x).unwrap();
        assert!(r.is_real());
        assert!((r[(0, 0)].re - th.cos()).abs() < 1e-13);
        assert!((r[(1, 0)].re - th.sin()).abs() < 1e-13);
        assert!((r[(0, 1)].re + th.sin()).abs() < 1e-13);
        assert!((r[(2, 2)].re - 1.0).abs() < 1e-13);
        let res = r.adjoint().mul(&r).max_abs_diff(&CMat::identity(3));
        assert!(res < 1e-13);
    }

    #[test]
    fn exp_skew_is_group_homomorphism_on_a_line() {
        let data = crate::rng::gaussian_reals::<f64>(29, 25);
        let raw = CMat::from_fn(5, 5, |i, j| cx(data[i * 5 + j], 0.0));
        let x = raw.sub(&raw.transpose()).scale_re(0.3);
        let e1 = exp_skew(&x).unwrap();
        let e2 = exp_skew(&x.scale_re(2.0)).unwrap();
        assert!(e1.mul(&e1).max_abs_diff(&e2) < 1e-12);
    }

    #[test]
    fn opnorm_matches_diagonal() {
        let mut a = CMat::<f64>::zeros(3, 3);
        a[(0, 0)] = cx(-3.0, 0.0);
        a[(1, 1)] = cx(1.0, 0.0);
        a[(2, 2)] = cx(0.5, 0.0);
        assert!((opnorm(&a) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn opnorm_power_route_agrees_with_direct() {
        let data = gaussian_complex::<f64>(31, 40 * 40);
        let a = CMat::from_vec(40, 40, data).unwrap();
        let direct = opnorm(&a);
        let power = super::power_norm(&a.adjoint().mul(&a));
        assert!((direct - power).abs() < 1e-9 * direct);
    }

    #[test]
    fn psd_kernel_finds_null_space() {
        // Rank-1 projector on C^5: kernel has dimension 4.
        let v = gaussian_complex::<f64>(37, 5);
        let vm = CMat::col_vec(&v);
        let g = vm.mul(&vm.adjoint());
        let k = psd_kernel(&g, 1e-9).unwrap();
        assert_eq!(k.cols(), 4);
        assert!(g.mul(&k).max_abs() < 1e-12 * g.max_abs());
        assert!(k.adjoint().mul(&k).max_abs_diff(&CMat::identity(4)) < 1e-12);
        assert_eq!(psd_rank(&g, 1e-9).unwrap(), 1);
    }

    #[test]
    fn psd_kernel_of_zero_matrix_is_everything() {
        let g = CMat::<f64>::zeros(3, 3);
        let k = psd_kernel(&g, 1e-9).unwrap();
        assert_eq!(k.cols(), 3);
    }

    #[test]
    fn polar_unitary_recovers_rotation() {
        let data = crate::rng::gaussian_reals::<f64>(41, 16);
        let raw = CMat::from_fn(4, 4, |i, j| cx(data[i * 4 + j], 0.0));
        let x = raw.sub(&raw.transpose());
        let u0 = exp_skew(&x).unwrap();
        // Stretch by a PSD factor and recover the unitary part.
        let mut p = CMat::<f64>::identity(4);
        p[(0, 0)] = cx(2.0, 0.0);
        p[(3, 3)] = cx(0.5, 0.0);
        let a = u0.mul(&p);
        let u = polar_unitary(&a).unwrap();
        assert_unitary(&u, 1e-12);
        assert!(u.max_abs_diff(&u0) < 1e-11);
    }

    #[test]
    fn polar_unitary_rejects_singular_input() {
        let a = CMat::<f64>::zeros(3, 3);
        assert!(polar_unitary(&a).is_err());
    }

    #[test]
    fn inverse_roundtrips() {
        let data = gaussian_complex::<f64>(43, 64);
        let a = CMat::from_vec(8, 8, data).unwrap();
        let ainv = inverse(&a).unwrap();
        let res = a.mul(&ainv).max_abs_diff(&CMat::identity(8));
        assert!(res < 1e-11, "inverse residual {res:e}");
    }

    #[test]
    fn f32_instantiation_works() {
        let data = gaussian_complex::<f32>(47, 36);
        let a = CMat::from_vec(6, 6, data).unwrap().hermitize();
        let (vals, vecs) = eigh(&a).unwrap();
        let mut lam = CMat::<f32>::zeros(6, 6);
        for (i, &v) in vals.iter().enumerate() {
            lam[(i, i)] = cx(v, 0.0);
        }
        let rec = vecs.mul(&lam).mul(&vecs.adjoint());
        assert!(rec.max_abs_diff(&a) < 1e-4 * a.max_abs().max(1.0));
    }
}
