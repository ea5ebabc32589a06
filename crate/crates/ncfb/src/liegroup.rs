//! The special orthogonal Lie algebra so(n) and its unitary representations.
//!
//! A representation is stored through its Lie-algebra generators — one
//! skew-hermitian matrix per basis element of so(n). Since the group is
//! connected, equivariance and invariance are linear conditions at the
//! algebra level, which turns every fixed-point computation into a null-space
//! problem for a positive semidefinite operator.

use crate::error::{Error, Result};
use crate::linalg::{exp_skew, opnorm, psd_kernel, CMat};
use crate::rng::{gaussian_reals, uniform01};
use crate::scalar::{cx, gate_scale, Real};

/// Index pairs `(i, j)`, `i < j`, in lexicographic order; one per basis
/// element `E_ij − E_ji` of so(n).
pub fn so_basis_pairs(n: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            out.push((i, j));
        }
    }
    out
}

/// Dimension of so(n).
pub fn so_dim(n: usize) -> usize {
    n * (n - 1) / 2
}

/// The standard skew-symmetric basis of so(n) as real matrices.
pub fn so_basis<T: Real>(n: usize) -> Vec<CMat<T>> {
    so_basis_pairs(n)
        .into_iter()
        .map(|(i, j)| {
            let mut x = CMat::zeros(n, n);
            x[(i, j)] = cx(T::one(), T::zero());
            x[(j, i)] = cx(-T::one(), T::zero());
            x
        })
        .collect()
}

/// A unitary representation of the rotation group, given by its generators.
#[derive(Clone, Debug)]
pub struct Rep<T: Real> {
    n: usize,
    gens: Vec<CMat<T>>,
}

impl<T: Real> Rep<T> {
    /// Wrap explicit generators (one per so(n) basis element, square, all of
    /// one size). Skew-hermiticity and bracket closure are *not* checked here;
    /// call [`Rep::validate`] for untrusted input.
    pub fn new(n: usize, gens: Vec<CMat<T>>) -> Result<Self> {
        if gens.len() != so_dim(n) {
            return Err(Error::Dim(format!(
                "so({n}) needs {} generators, got {}",
                so_dim(n),
                gens.len()
            )));
        }
        let d = gens.first().map_or(0, |g| g.rows());
        for g in &gens {
            if !g.is_square() || g.rows() != d {
                return Err(Error::Dim("generators must be square, equal size".into()));
            }
        }
        Ok(Rep { n, gens })
    }

    /// The defining representation on real n-space.
    pub fn standard(n: usize) -> Self {
        Rep {
            n,
            gens: so_basis(n),
        }
    }

    /// The one-dimensional trivial representation.
    pub fn trivial(n: usize) -> Self {
        Rep {
            n,
            gens: vec![CMat::zeros(1, 1); so_dim(n)],
        }
    }

    pub fn group_parameter(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.gens.first().map_or(0, |g| g.rows())
    }

    pub fn gens(&self) -> &[CMat<T>] {
        &self.gens
    }

    /// Tensor product: generators act by the Leibniz rule.
    pub fn tensor(&self, other: &Rep<T>) -> Rep<T> {
        assert_eq!(self.n, other.n, "tensor of reps of different groups");
        let (d1, d2) = (self.dim(), other.dim());
        let i1 = CMat::identity(d1);
        let i2 = CMat::identity(d2);
        let gens = self
            .gens
            .iter()
            .zip(&other.gens)
            .map(|(a, b)| a.kron(&i2).add(&i1.kron(b)))
            .collect();
        Rep { n: self.n, gens }
    }

    /// k-fold tensor power; `k = 0` is the trivial representation.
    pub fn power(&self, k: usize) -> Rep<T> {
        let mut acc = Rep::trivial(self.n);
        for _ in 0..k {
            acc = acc.tensor(self);
        }
        // Collapse the leading trivial factor: trivial ⊗ ρ has the same
        // matrices as ρ (dimension 1·d), so nothing further is needed.
        acc
    }

    pub fn direct_sum(&self, other: &Rep<T>) -> Rep<T> {
        assert_eq!(self.n, other.n, "sum of reps of different groups");
        let gens = self
            .gens
            .iter()
            .zip(&other.gens)
            .map(|(a, b)| CMat::block_diag(&[a, b]))
            .collect();
        Rep { n: self.n, gens }
    }

    /// The conjugate representation (entrywise conjugate generators), acting
    /// on the conjugate space with the same coordinates.
    pub fn conjugate(&self) -> Rep<T> {
        Rep {
            n: self.n,
            gens: self.gens.iter().map(|g| g.conj()).collect(),
        }
    }

    /// Restrict along an isometry `j` (columns span an invariant subspace):
    /// generators become `j† X j`. Invariance of the subspace is the caller's
    /// responsibility; residuals surface in downstream checks.
    pub fn conjugated(&self, j: &CMat<T>) -> Rep<T> {
        let gens = self
            .gens
            .iter()
            .map(|g| j.adjoint().mul(&g.mul(j)))
            .collect();
        Rep { n: self.n, gens }
    }

    /// Quadratic Casimir `Σ_a dρ(X_a)²`; negative semidefinite for unitary
    /// representations, with kernel the invariant vectors.
    pub fn casimir(&self) -> CMat<T> {
        let d = self.dim();
        let mut acc = CMat::zeros(d, d);
        for g in &self.gens {
            acc = acc.add(&g.mul(g));
        }
        acc
    }

    /// Orthonormal basis of the invariant vectors, as columns.
    pub fn invariant_vectors(&self, rel: T) -> Result<CMat<T>> {
        let minus_casimir = self.casimir().scale_re(-T::one());
        psd_kernel(&minus_casimir, rel)
    }

    /// Image of the group element `exp(Σ_a c_a X_a)` under this
    /// representation.
    pub fn exponential(&self, coeffs: &[T]) -> Result<CMat<T>> {
        if coeffs.len() != so_dim(self.n) {
            return Err(Error::Dim(format!(
                "expected {} coefficients, got {}",
                so_dim(self.n),
                coeffs.len()
            )));
        }
        let d = self.dim();
        let mut x = CMat::zeros(d, d);
        for (c, g) in coeffs.iter().zip(&self.gens) {
            x.axpy(cx(*c, T::zero()), g);
        }
        exp_skew(&x)
    }

    /// Residual of skew-hermiticity and bracket closure; near zero for any
    /// honestly constructed representation.
    pub fn validate(&self) -> Result<()> {
        let scale = self
            .gens
            .iter()
            .map(|g| g.max_abs())
            .fold(T::zero(), T::max)
            .max(T::one());
        for (a, g) in self.gens.iter().enumerate() {
            let skew = g.add(&g.adjoint()).max_abs();
            if skew > T::lit(1e-10) * gate_scale::<T>() * scale {
                return Err(Error::Input(format!(
                    "generator {a} is not skew-hermitian (residual {:.3e})",
                    skew.as_f64()
                )));
            }
        }
        // Bracket closure against the structure constants of the standard
        // basis: [X_a, X_b] in so(n) determines [dρ_a, dρ_b].
        let basis = so_basis::<T>(self.n);
        let pairs = so_basis_pairs(self.n);
        for a in 0..basis.len() {
            for b in a + 1..basis.len() {
                let target = basis[a].mul(&basis[b]).sub(&basis[b].mul(&basis[a]));
                // Structure constants: expand target over the orthogonal basis
                // E_ij − E_ji (squared norm 2).
                let mut expected = CMat::zeros(self.dim(), self.dim());
                for (c, (i, j)) in pairs.iter().enumerate() {
                    let coeff = target[(*i, *j)];
                    if coeff.norm() > T::zero() {
                        expected.axpy(coeff, &self.gens[c]);
                    }
                }
                let got = self.gens[a]
                    .mul(&self.gens[b])
                    .sub(&self.gens[b].mul(&self.gens[a]));
                let res = got.max_abs_diff(&expected);
                if res > T::lit(1e-9) * gate_scale::<T>() * scale.max(scale * scale) {
                    return Err(Error::Input(format!(
                        "bracket [{a},{b}] violates closure (residual {:.3e})",
                        res.as_f64()
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Worst-case generator-level equivariance residual of `t : V_σ → V_τ`:
/// `max_a ‖dτ(X_a) t − t dσ(X_a)‖_max`.
pub fn equivariance_residual<T: Real>(tau: &Rep<T>, sigma: &Rep<T>, t: &CMat<T>) -> T {
    tau.gens
        .iter()
        .zip(sigma.gens())
        .map(|(a, b)| a.mul(t).sub(&t.mul(b)).max_abs())
        .fold(T::zero(), T::max)
}

/// The positive semidefinite operator on row-major matrix coordinates whose
/// kernel is the space of intertwiners `V_σ → V_τ`. Assembled from Kronecker
/// blocks without forming the individual coupling operators:
/// `H = (Σ A†A)⊗I + I⊗(Σ BB†)ᵀ̄ − Σ (A†⊗B + A⊗B†)` with `A = dτ(X_a)`,
/// `B = dσ(X_a)ᵀ`.
pub fn hom_operator<T: Real>(tau: &Rep<T>, sigma: &Rep<T>) -> CMat<T> {
    assert_eq!(
        tau.group_parameter(),
        sigma.group_parameter(),
        "hom of reps of different groups"
    );
    let t = tau.dim();
    let s = sigma.dim();
    let it = CMat::identity(t);
    let is = CMat::identity(s);
    let mut sum_ada = CMat::<T>::zeros(t, t);
    let mut sum_bdb = CMat::<T>::zeros(s, s);
    let mut cross = CMat::<T>::zeros(t * s, t * s);
    for (a, braw) in tau.gens.iter().zip(sigma.gens()) {
        let b = braw.transpose();
        sum_ada = sum_ada.add(&a.adjoint().mul(a));
        sum_bdb = sum_bdb.add(&b.adjoint().mul(&b));
        cross = cross.add(&a.adjoint().kron(&b));
        cross = cross.add(&a.kron(&b.adjoint()));
    }
    sum_ada
        .kron(&is)
        .add(&it.kron(&sum_bdb))
        .sub(&cross)
}

/// Orthonormal basis of the intertwiner space `Hom(V_σ, V_τ)` in row-major
/// matrix coordinates, as columns.
pub fn hom_basis<T: Real>(tau: &Rep<T>, sigma: &Rep<T>, rel: T) -> Result<CMat<T>> {
    psd_kernel(&hom_operator(tau, sigma), rel)
}

/// Seeded coefficients of a "uniformly scaled" random Lie-algebra element:
/// a standard Gaussian draw rescaled so the standard-representation operator
/// norm is `u·π` with `u` uniform on (0,1). Exponentials of these sweep the
/// group.
pub fn random_algebra_coeffs<T: Real>(n: usize, seed: u64) -> Vec<T> {
    let dim = so_dim(n);
    let mut coeffs = gaussian_reals::<T>(seed, dim);
    let basis = so_basis::<T>(n);
    let mut x = CMat::zeros(n, n);
    for (c, g) in coeffs.iter().zip(&basis) {
        x.axpy(cx(*c, T::zero()), g);
    }
    let nrm = opnorm(&x);
    if nrm > T::zero() {
        let u = uniform01::<T>(seed.wrapping_add(0x9E37_79B9_7F4A_7C15));
        let scale = u * T::PI() / nrm;
        for c in coeffs.iter_mut() {
            *c *= scale;
        }
    }
    coeffs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::eigh;

    #[test]
    fn basis_counts() {
        assert_eq!(so_basis::<f64>(2).len(), 1);
        assert_eq!(so_basis::<f64>(3).len(), 3);
        assert_eq!(so_basis::<f64>(4).len(), 6);
    }

    #[test]
    fn standard_rep_validates() {
        for n in [2, 3, 4] {
            Rep::<f64>::standard(n).validate().unwrap();
        }
    }

    #[test]
    fn tensor_and_sum_validate() {
        let pi = Rep::<f64>::standard(3);
        pi.tensor(&pi).validate().unwrap();
        pi.power(3).validate().unwrap();
        pi.direct_sum(&Rep::trivial(3)).validate().unwrap();
        pi.conjugate().validate().unwrap();
    }

    #[test]
    fn casimir_of_standard_rep_is_scalar() {
        // Σ (E_ij−E_ji)² = −(n−1)·I on the standard representation.
        for n in [2usize, 3, 4] {
            let cas = Rep::<f64>::standard(n).casimir();
            let expect = CMat::<f64>::identity(n).scale_re(-((n - 1) as f64));
            assert!(cas.max_abs_diff(&expect) < 1e-14);
        }
    }

    #[test]
    fn casimir_spectrum_of_squared_standard_rep() {
        // On 3-space ⊗ 3-space the Casimir has eigenvalues 0, −2, −6 with
        // multiplicities 1, 3, 5.
        let pi = Rep::<f64>::standard(3);
        let cas = pi.tensor(&pi).casimir();
        let (vals, _) = eigh(&cas).unwrap();
        let mut counts = std::collections::BTreeMap::new();
        for v in vals {
            let key = v.round() as i64;
            assert!((v - key as f64).abs() < 1e-12, "non-integer eigenvalue {v}");
            *counts.entry(key).or_insert(0usize) += 1;
        }
        assert_eq!(counts.get(&0), Some(&1));
        assert_eq!(counts.get(&-2), Some(&3));
        assert_eq!(counts.get(&-6), Some(&5));
    }

    #[test]
    fn invariants_of_squared_standard_rep() {
        // The lone invariant of 3⊗3 is Σ_i e_i ⊗ e_i (normalized).
        let pi = Rep::<f64>::standard(3);
        let inv = pi.tensor(&pi).invariant_vectors(1e-9).unwrap();
        assert_eq!(inv.cols(), 1);
        let v = inv.col(0);
        let expect = 1.0 / 3.0f64.sqrt();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { expect } else { 0.0 };
                assert!((v[i * 3 + j].re - want).abs() < 1e-12);
                assert!(v[i * 3 + j].im.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn hom_space_dimensions_match_schur_theory() {
        let pi = Rep::<f64>::standard(3);
        // End(π) is one-dimensional (π irreducible).
        assert_eq!(hom_basis(&pi, &pi, 1e-9).unwrap().cols(), 1);
        // End(π⊗π): three summands, all distinct.
        let pi2 = pi.power(2);
        assert_eq!(hom_basis(&pi2, &pi2, 1e-9).unwrap().cols(), 3);
        // Hom(trivial, π⊗π) is spanned by the invariant vector.
        assert_eq!(hom_basis(&pi2, &Rep::trivial(3), 1e-9).unwrap().cols(), 1);
        // Hom(π, π⊗π): one copy of π inside π⊗π.
        assert_eq!(hom_basis(&pi2, &pi, 1e-9).unwrap().cols(), 1);
    }

    #[test]
    fn hom_operator_matches_direct_coupling_sum() {
        let pi = Rep::<f64>::standard(3);
        let tau = pi.power(2);
        let h = hom_operator(&tau, &pi);
        // Direct construction: Σ K†K with K = dτ⊗I − I⊗dσᵀ.
        let it = CMat::<f64>::identity(tau.dim());
        let is = CMat::<f64>::identity(pi.dim());
        let mut direct = CMat::<f64>::zeros(h.rows(), h.cols());
        for (a, b) in tau.gens().iter().zip(pi.gens()) {
            let k = a.kron(&is).sub(&it.kron(&b.transpose()));
            direct = direct.add(&k.adjoint().mul(&k));
        }
        assert!(h.max_abs_diff(&direct) < 1e-12);
    }

    #[test]
    fn hom_kernel_elements_are_equivariant() {
        let pi = Rep::<f64>::standard(3);
        let tau = pi.power(2);
        let basis = hom_basis(&tau, &pi, 1e-9).unwrap();
        for c in 0..basis.cols() {
            let t = CMat::from_vec(tau.dim(), pi.dim(), basis.col(c)).unwrap();
            let res = equivariance_residual(&tau, &pi, &t);
            assert!(res < 1e-10, "column {c}: residual {res:e}");
        }
    }

    #[test]
    fn exponentials_are_special_orthogonal() {
        for n in [2usize, 3, 4] {
            let rep = Rep::<f64>::standard(n);
            for trial in 0..5u64 {
                let coeffs = random_algebra_coeffs::<f64>(n, 1000 + trial);
                let g = rep.exponential(&coeffs).unwrap();
                assert!(g.is_real());
                let res = g.adjoint().mul(&g).max_abs_diff(&CMat::identity(n));
                assert!(res < 1e-12, "n={n} trial={trial}: {res:e}");
            }
        }
    }

    #[test]
    fn exponential_commutes_with_tensor() {
        // ρ⊗σ(g) = ρ(g) ⊗ σ(g).
        let pi = Rep::<f64>::standard(3);
        let pi2 = pi.power(2);
        let coeffs = random_algebra_coeffs::<f64>(3, 77);
        let g1 = pi.exponential(&coeffs).unwrap();
        let g2 = pi2.exponential(&coeffs).unwrap();
        assert!(g1.kron(&g1).max_abs_diff(&g2) < 1e-12);
    }

    #[test]
    fn random_coeffs_are_deterministic_and_bounded() {
        let a = random_algebra_coeffs::<f64>(3, 42);
        let b = random_algebra_coeffs::<f64>(3, 42);
        assert_eq!(a, b);
        let basis = so_basis::<f64>(3);
        let mut x = CMat::<f64>::zeros(3, 3);
        for (c, g) in a.iter().zip(&basis) {
            x.axpy(cx(*c, 0.0), g);
        }
        let nrm = opnorm(&x);
        assert!(nrm <= std::f64::consts::PI + 1e-9);
        assert!(nrm > 0.0);
    }
}
