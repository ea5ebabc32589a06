//! Circle-group graded algebras from Morita self-equivalences.
//!
//! Over the circle group every irreducible representation is a character
//! `t ↦ e^{ikt}`, so a free dynamical system with coefficient algebra `B`
//! amounts to a `ℤ`-graded algebra whose grade-zero level is `B`. The
//! grade-one level determines everything: it is a Morita self-equivalence `N`
//! of `B`, higher levels are balanced tensor powers of `N` and of its
//! conjugate, and the multiplication maps come from word concatenation and
//! the two inner products. This module builds that graded algebra at a finite
//! grade cutoff, verifies its structural laws, and round-trips the grade-one
//! module back out of the product data.

use std::collections::BTreeMap;

use crate::check::CheckSet;
use crate::error::{Error, Result};
use crate::hilbmod::{tensor_over_b, AlgebraShape, Correspondence};
use crate::linalg::{eigh, polar_unitary, psd_kernel, psd_rank, vec_norm, CMat};
use crate::rng::gaussian_complex;
use crate::scalar::{cx, Ctx, Cx, Real};
use num_traits::Zero;

/// An equivalence bimodule: a correspondence (right inner product, both
/// actions) together with a left `B`-valued inner product.
///
/// Conventions: `corr.inner` is conjugate-linear in the first slot (it plays
/// the role of `x*y`), while `linner[γ][(i, j)]` is the `u_γ`-coefficient of
/// the left pairing of `e_i` with `e_j` — linear in the first slot and
/// conjugate-linear in the second (it plays the role of `x y*`).
#[derive(Clone, Debug)]
pub struct MoritaBimodule<T: Real> {
    pub corr: Correspondence<T>,
    pub linner: Vec<CMat<T>>,
}

impl<T: Real> MoritaBimodule<T> {
    pub fn dim(&self) -> usize {
        self.corr.dim
    }

    pub fn alg(&self) -> &AlgebraShape {
        &self.corr.alg
    }

    /// Left `B`-valued pairing of two coordinate vectors.
    pub fn left_inner_of(&self, x: &[Cx<T>], y: &[Cx<T>]) -> Vec<Cx<T>> {
        self.linner
            .iter()
            .map(|g| {
                let mut acc: Cx<T> = Cx::zero();
                for (i, xi) in x.iter().enumerate() {
                    for (j, yj) in y.iter().enumerate() {
                        acc += *xi * yj.conj() * g[(i, j)];
                    }
                }
                acc
            })
            .collect()
    }

    /// The algebra as an equivalence bimodule over itself: both pairings are
    /// the two one-sided products.
    pub fn over_self(alg: &AlgebraShape) -> Self {
        let corr = Correspondence::over_self(alg);
        let nb = alg.dim();
        let mut linner = vec![CMat::zeros(nb, nb); nb];
        for i in 0..nb {
            let mut ei = vec![Cx::<T>::zero(); nb];
            ei[i] = cx(T::one(), T::zero());
            for j in 0..nb {
                let mut ej = vec![Cx::<T>::zero(); nb];
                ej[j] = cx(T::one(), T::zero());
                let prod = alg.mul(&ei, &alg.star(&ej));
                for (g, c) in prod.into_iter().enumerate() {
                    linner[g][(i, j)] = c;
                }
            }
        }
        MoritaBimodule { corr, linner }
    }

    /// Bimodule laws beyond the correspondence ones: the left pairing and the
    /// compatibility identity that couples the two pairings.
    pub fn morita_checks(&self, ctx: &Ctx<T>) -> Result<CheckSet> {
        let mut set = CheckSet::new();
        let alg = &self.corr.alg;
        let nb = alg.dim();
        let d = self.corr.dim;
        let scale = self
            .linner
            .iter()
            .map(|m| m.max_abs())
            .fold(T::one(), T::max);
        let bound = ctx.tol.bound(scale);

        if self.linner.len() != nb || self.linner.iter().any(|m| m.rows() != d || m.cols() != d) {
            return Err(Error::Dim("left pairing tables have mixed shapes".into()));
        }

        // Hermitian symmetry of the left pairing.
        for g in 0..nb {
            let (gb, gp, gq) = alg.unit_position(g);
            let gstar = alg.unit_index(gb, gq, gp);
            set.record(
                "morita.left-inner-hermitian",
                self.linner[gstar].max_abs_diff(&self.linner[g].adjoint()),
                bound,
                &format!("unit {g}"),
            );
        }

        // B-linearity in the first slot: pairing(u_β·x, y) = u_β·pairing(x, y).
        let rl = alg.regular_left::<T>();
        for (beta, rlb) in rl.iter().enumerate() {
            for g in 0..nb {
                let got = self.corr.left[beta].transpose().mul(&self.linner[g]);
                let mut want = CMat::<T>::zeros(d, d);
                for (delta, lw) in self.linner.iter().enumerate() {
                    let c = rlb[(g, delta)];
                    if c.norm_sqr() > T::zero() {
                        want.axpy(c, lw);
                    }
                }
                set.record(
                    "morita.left-inner-linear",
                    got.max_abs_diff(&want),
                    bound,
                    &format!("left unit {beta}, component {g}"),
                );
            }
        }

        // The right action is adjointable for the left pairing:
        // pairing(x·u_β, y) = pairing(x, y·u_β*).
        for beta in 0..nb {
            let (bb, bp, bq) = alg.unit_position(beta);
            let bstar = alg.unit_index(bb, bq, bp);
            for g in 0..nb {
                let got = self.corr.right[beta].transpose().mul(&self.linner[g]);
                let want = self.linner[g].mul(&self.corr.right[bstar].conj());
                set.record(
                    "morita.right-adjointable",
                    got.max_abs_diff(&want),
                    bound,
                    &format!("right unit {beta}, component {g}"),
                );
            }
        }

        // Compatibility of the two pairings: the left pairing of (x, y) acting
        // on z equals x acted on by the right pairing of (y, z).
        let mut rmats = Vec::with_capacity(d * d);
        for j in 0..d {
            for k in 0..d {
                let b: Vec<Cx<T>> = self.corr.inner.iter().map(|g| g[(j, k)]).collect();
                rmats.push(self.corr.right_of(&b));
            }
        }
        let mut worst = T::zero();
        let mut worst_at = (0usize, 0usize, 0usize);
        for i in 0..d {
            for j in 0..d {
                let b: Vec<Cx<T>> = self.linner.iter().map(|g| g[(i, j)]).collect();
                let lm = self.corr.left_of(&b);
                for k in 0..d {
                    let mut diff = T::zero();
                    let rm = &rmats[j * d + k];
                    for row in 0..d {
                        let delta = lm[(row, k)] - rm[(row, i)];
                        diff = diff.max(delta.norm());
                    }
                    if diff > worst {
                        worst = diff;
                        worst_at = (i, j, k);
                    }
                }
            }
        }
        set.record(
            "morita.imprimitivity",
            worst,
            bound,
            &format!("basis triple {worst_at:?}"),
        );

        // Positivity of the left pairing as a block Gram matrix.
        for (blk, &db) in alg.blocks().iter().enumerate() {
            let big = CMat::from_fn(d * db, d * db, |rc, cc| {
                let (i, p) = (rc / db, rc % db);
                let (j, q) = (cc / db, cc % db);
                self.linner[alg.unit_index(blk, p, q)][(i, j)]
            });
            let (vals, _) = eigh(&big)?;
            let min = vals.first().copied().unwrap_or(T::zero());
            set.record(
                "morita.left-inner-positive",
                (-min).max(T::zero()),
                bound,
                &format!("block {blk}"),
            );
        }

        // Fullness of both pairings: their coefficient families span B.
        let lrank = pairing_rank(&self.linner, ctx)?;
        set.record_flag(
            "morita.left-full",
            lrank == nb,
            &format!("left pairing spans rank {lrank} of {nb}"),
        );
        let rrank = pairing_rank(&self.corr.inner, ctx)?;
        set.record_flag(
            "morita.right-full",
            rrank == nb,
            &format!("right pairing spans rank {rrank} of {nb}"),
        );

        // Nondegeneracy of the left pairing (its scalar Gram is invertible);
        // the conjugate module construction divides by this Gram.
        let s = left_scalar_gram(self);
        let (vals, _) = eigh(&s)?;
        let min = vals.first().copied().unwrap_or(T::zero());
        let top = vals.last().copied().unwrap_or(T::one());
        set.record_flag(
            "morita.left-nondegenerate",
            min > ctx.tol.rel * top.max(T::one()),
            &format!("left scalar Gram spectrum in [{min:e}, {top:e}]"),
        );

        Ok(set)
    }

    /// Check every law; the first failing one is returned as a named error.
    pub fn validate(&self, ctx: &Ctx<T>) -> Result<()> {
        self.corr.validate(ctx)?;
        self.morita_checks(ctx)?.ensure_all()
    }

    /// The conjugate bimodule, with actions through the star of the algebra
    /// and the two pairings exchanged. Returns `(module, ident, ident_inv)`
    /// where `ident` realizes the antilinear identification: the conjugate of
    /// an element with coordinates `x` has coordinates `ident·conj(x)`.
    pub fn dual(&self, ctx: &Ctx<T>) -> Result<(MoritaBimodule<T>, CMat<T>, CMat<T>)> {
        let alg = &self.corr.alg;
        let nb = alg.dim();
        let d = self.corr.dim;
        let star_of = |beta: usize| {
            let (b, p, q) = alg.unit_position(beta);
            alg.unit_index(b, q, p)
        };
        // In conjugate coordinates the actions swap sides through the star,
        // and the pairings swap roles.
        let raw_left: Vec<CMat<T>> = (0..nb)
            .map(|b| self.corr.right[star_of(b)].conj())
            .collect();
        let raw_right: Vec<CMat<T>> = (0..nb)
            .map(|b| self.corr.left[star_of(b)].conj())
            .collect();
        let raw_rinner = self.linner.clone();
        let raw_linner = self.corr.inner.clone();

        // Re-orthonormalize: the conjugate coordinates are orthonormal for
        // the scalar trace of the OTHER pairing, so rescale by the inverse
        // square root of the left scalar Gram.
        let s = left_scalar_gram(self);
        let (vals, vecs) = eigh(&s)?;
        let top = vals.last().copied().unwrap_or(T::one());
        if vals.first().copied().unwrap_or(T::zero()) <= ctx.tol.rel * top.max(T::one()) {
            return Err(Error::axiom(
                "morita.left-nondegenerate",
                vals.first().copied().unwrap_or(T::zero()).as_f64(),
                (ctx.tol.rel * top.max(T::one())).as_f64(),
                "conjugate module needs an invertible left scalar Gram",
            ));
        }
        let dmat = spectral_sandwich(&vecs, &vals, |v| v.sqrt());
        let dinv = spectral_sandwich(&vecs, &vals, |v| T::one() / v.sqrt());

        let left: Vec<CMat<T>> = raw_left.iter().map(|m| dmat.mul(&m.mul(&dinv))).collect();
        let right: Vec<CMat<T>> = raw_right.iter().map(|m| dmat.mul(&m.mul(&dinv))).collect();
        let inner: Vec<CMat<T>> = raw_rinner.iter().map(|g| dinv.mul(&g.mul(&dinv))).collect();
        let linner: Vec<CMat<T>> = raw_linner
            .iter()
            .map(|g| dinv.transpose().mul(&g.mul(&dinv.conj())))
            .collect();
        let dual = MoritaBimodule {
            corr: Correspondence {
                alg: alg.clone(),
                dim: d,
                left,
                right,
                inner,
            },
            linner,
        };
        dual.validate(ctx)?;
        Ok((dual, dmat, dinv))
    }
}

/// Max-column-span rank of a `B`-valued pairing family.
fn pairing_rank<T: Real>(tables: &[CMat<T>], ctx: &Ctx<T>) -> Result<usize> {
    let nb = tables.len();
    let d = tables.first().map_or(0, |m| m.rows());
    let f = CMat::from_fn(nb, d * d, |g, col| tables[g][(col / d, col % d)]);
    psd_rank(&f.mul(&f.adjoint()), ctx.tol.rel)
}

/// Scalar trace Gram of the left pairing.
fn left_scalar_gram<T: Real>(m: &MoritaBimodule<T>) -> CMat<T> {
    let alg = &m.corr.alg;
    let d = m.corr.dim;
    let mut s = CMat::<T>::zeros(d, d);
    for (blk, &db) in alg.blocks().iter().enumerate() {
        for p in 0..db {
            s = s.add(&m.linner[alg.unit_index(blk, p, p)]);
        }
    }
    s
}

/// `vecs · diag(f(vals)) · vecs†` for a hermitian eigendecomposition.
fn spectral_sandwich<T: Real>(vecs: &CMat<T>, vals: &[T], f: impl Fn(T) -> T) -> CMat<T> {
    let n = vals.len();
    let mut scaled = vecs.clone();
    for j in 0..n {
        let s = f(vals[j]);
        for i in 0..n {
            scaled[(i, j)] *= cx(s, T::zero());
        }
    }
    scaled.mul(&vecs.adjoint())
}

/// Build an equivalence bimodule from raw structure tables and validate every
/// law, naming the first one that fails.
pub fn make_morita<T: Real>(
    alg: &AlgebraShape,
    left: Vec<CMat<T>>,
    right: Vec<CMat<T>>,
    right_inner: Vec<CMat<T>>,
    left_inner: Vec<CMat<T>>,
    ctx: &Ctx<T>,
) -> Result<MoritaBimodule<T>> {
    let nb = alg.dim();
    if left.len() != nb || right.len() != nb || right_inner.len() != nb || left_inner.len() != nb {
        return Err(Error::Dim(format!(
            "expected {nb} matrices in each structure family"
        )));
    }
    let d = left.first().map_or(0, |m| m.rows());
    if d == 0 {
        return Err(Error::Input("carrier must have positive dimension".into()));
    }
    let m = MoritaBimodule {
        corr: Correspondence {
            alg: alg.clone(),
            dim: d,
            left,
            right,
            inner: right_inner,
        },
        linner: left_inner,
    };
    m.validate(ctx)?;
    Ok(m)
}

/// The twisted line over three points: carrier `ℂ³` over `B = ℂ³` where the
/// right action reads the function one step around the cycle `p ↦ p+1`.
pub fn cycle_bimodule<T: Real>() -> MoritaBimodule<T> {
    let alg = AlgebraShape::new(vec![1, 1, 1]).expect("three points");
    let one = cx(T::one(), T::zero());
    let unit_mat = |p: usize| {
        let mut m = CMat::<T>::zeros(3, 3);
        m[(p, p)] = one;
        m
    };
    let left: Vec<CMat<T>> = (0..3).map(unit_mat).collect();
    // (x·f)_p = x_p f(p+1): the unit at point γ acts at position γ−1.
    let right: Vec<CMat<T>> = (0..3).map(|g| unit_mat((g + 2) % 3)).collect();
    // The right pairing of x and y is supported one step forward; the left
    // pairing is supported at the point itself.
    let rinner: Vec<CMat<T>> = (0..3).map(|g| unit_mat((g + 2) % 3)).collect();
    let linner: Vec<CMat<T>> = (0..3).map(unit_mat).collect();
    MoritaBimodule {
        corr: Correspondence {
            alg,
            dim: 3,
            left,
            right,
            inner: rinner,
        },
        linner,
    }
}

/// Balanced tensor product of two equivalence bimodules, with the quotient
/// maps (`q`: quotient → raw pairs, `proj`: raw pairs → quotient).
fn tensor_morita<T: Real>(
    m: &MoritaBimodule<T>,
    n: &MoritaBimodule<T>,
    ctx: &Ctx<T>,
) -> Result<(MoritaBimodule<T>, CMat<T>, CMat<T>)> {
    let t = tensor_over_b(&m.corr, &n.corr, ctx)?;
    let il = interior_left_gram(m, n);
    let linner: Vec<CMat<T>> = il
        .iter()
        .map(|g| t.q.transpose().mul(&g.mul(&t.q.conj())))
        .collect();
    Ok((
        MoritaBimodule {
            corr: t.corr,
            linner,
        },
        t.q,
        t.proj,
    ))
}

/// Right pairing of the balanced pair space, on raw pair coordinates.
fn interior_right_gram<T: Real>(m: &Correspondence<T>, n: &Correspondence<T>) -> Vec<CMat<T>> {
    let nb = m.alg.dim();
    let raw = m.dim * n.dim;
    let mut out = Vec::with_capacity(nb);
    for gamma in 0..nb {
        let mut g = CMat::<T>::zeros(raw, raw);
        for beta in 0..nb {
            g = g.add(&m.inner[beta].kron(&n.inner[gamma].mul(&n.left[beta])));
        }
        out.push(g);
    }
    out
}

/// Left pairing of the balanced pair space, on raw pair coordinates.
fn interior_left_gram<T: Real>(m: &MoritaBimodule<T>, n: &MoritaBimodule<T>) -> Vec<CMat<T>> {
    let nb = m.corr.alg.dim();
    let raw = m.corr.dim * n.corr.dim;
    let mut out = Vec::with_capacity(nb);
    for gamma in 0..nb {
        let mut g = CMat::<T>::zeros(raw, raw);
        for beta in 0..nb {
            g = g.add(
                &m.corr.right[beta]
                    .transpose()
                    .mul(&m.linner[gamma])
                    .kron(&n.linner[beta]),
            );
        }
        out.push(g);
    }
    out
}

/// A finite slice of the graded level family `…, N̄⊗N̄, N̄, B, N, N⊗N, …`
/// together with every in-range multiplication map.
#[derive(Clone, Debug)]
pub struct FactorSystem<T: Real> {
    pub alg: AlgebraShape,
    pub cutoff: usize,
    /// Levels indexed by `grade + cutoff`; the middle entry is `B`.
    pub levels: Vec<MoritaBimodule<T>>,
    /// Word representatives: carrier of grade `k` → tensor word space.
    pub reps: Vec<CMat<T>>,
    /// Word quotients: tensor word space → carrier of grade `k`.
    pub quots: Vec<CMat<T>>,
    /// Antilinear grade-one identification into the conjugate module.
    pub dual_id: CMat<T>,
    pub dual_id_inv: CMat<T>,
    /// Multiplication maps `carrier(k₁) ⊗ carrier(k₂) → carrier(k₁+k₂)`,
    /// present exactly when all three grades are within the cutoff.
    pub psi: BTreeMap<(i64, i64), CMat<T>>,
}

impl<T: Real> FactorSystem<T> {
    pub fn idx(&self, k: i64) -> usize {
        (k + self.cutoff as i64) as usize
    }

    pub fn in_range(&self, k: i64) -> bool {
        k.unsigned_abs() as usize <= self.cutoff
    }

    pub fn level(&self, k: i64) -> &MoritaBimodule<T> {
        &self.levels[self.idx(k)]
    }

    pub fn level_dim(&self, k: i64) -> usize {
        self.level(k).dim()
    }

    /// Multiplication of two level coordinate vectors; `None` when a grade
    /// falls outside the cutoff.
    pub fn multiply(&self, k1: i64, k2: i64, x: &[Cx<T>], y: &[Cx<T>]) -> Option<Vec<Cx<T>>> {
        let p = self.psi.get(&(k1, k2))?;
        let mut raw = vec![Cx::zero(); x.len() * y.len()];
        for (i, xi) in x.iter().enumerate() {
            for (j, yj) in y.iter().enumerate() {
                raw[i * y.len() + j] = *xi * *yj;
            }
        }
        Some(p.apply(&raw))
    }
}

/// Contract the two middle word letters with a `B`-valued pairing tensor
/// `c: nb × d²`; the word shape goes `pre·d·d·post → pre·nb·post`.
fn contract_step<T: Real>(cols: &CMat<T>, pre: usize, post: usize, c: &CMat<T>, d: usize) -> CMat<T> {
    let nb = c.rows();
    let ncols = cols.cols();
    let mut out = CMat::zeros(pre * nb * post, ncols);
    for col in 0..ncols {
        for p in 0..pre {
            for g in 0..nb {
                for q in 0..post {
                    let mut acc: Cx<T> = Cx::zero();
                    for ij in 0..d * d {
                        acc += c[(g, ij)] * cols[(p * d * d * post + ij * post + q, col)];
                    }
                    out[(p * nb * post + g * post + q, col)] = acc;
                }
            }
        }
    }
    out
}

/// Absorb an algebra letter into the module letter to its left through the
/// right action; `pre·d·nb·post → pre·d·post`.
fn absorb_left_step<T: Real>(cols: &CMat<T>, pre: usize, post: usize, tables: &[CMat<T>]) -> CMat<T> {
    let d = tables[0].rows();
    let nb = tables.len();
    let ncols = cols.cols();
    let mut out = CMat::zeros(pre * d * post, ncols);
    for col in 0..ncols {
        for p in 0..pre {
            for ip in 0..d {
                for q in 0..post {
                    let mut acc: Cx<T> = Cx::zero();
                    for i in 0..d {
                        for g in 0..nb {
                            acc += tables[g][(ip, i)]
                                * cols[(p * d * nb * post + (i * nb + g) * post + q, col)];
                        }
                    }
                    out[(p * d * post + ip * post + q, col)] = acc;
                }
            }
        }
    }
    out
}

/// Absorb an algebra letter into the module letter to its right through the
/// left action; `pre·nb·d·post → pre·d·post`.
fn absorb_right_step<T: Real>(cols: &CMat<T>, pre: usize, post: usize, tables: &[CMat<T>]) -> CMat<T> {
    let d = tables[0].rows();
    let nb = tables.len();
    let ncols = cols.cols();
    let mut out = CMat::zeros(pre * d * post, ncols);
    for col in 0..ncols {
        for p in 0..pre {
            for jp in 0..d {
                for q in 0..post {
                    let mut acc: Cx<T> = Cx::zero();
                    for g in 0..nb {
                        for j in 0..d {
                            acc += tables[g][(jp, j)]
                                * cols[(p * nb * d * post + (g * d + j) * post + q, col)];
                        }
                    }
                    out[(p * d * post + jp * post + q, col)] = acc;
                }
            }
        }
    }
    out
}

/// Kronecker power; the zeroth power is the 1×1 identity.
fn kron_pow<T: Real>(m: &CMat<T>, k: usize) -> CMat<T> {
    let mut out = CMat::identity(1);
    for _ in 0..k {
        out = out.kron(m);
    }
    out
}

/// Permutation reversing the letters of a length-`k` word over `d` symbols.
fn reversal_perm<T: Real>(d: usize, k: usize) -> CMat<T> {
    let n = d.pow(k as u32);
    let mut m = CMat::zeros(n, n);
    for c in 0..n {
        let mut digits = vec![0usize; k];
        let mut rest = c;
        for i in (0..k).rev() {
            digits[i] = rest % d;
            rest /= d;
        }
        digits.reverse();
        let mut r = 0usize;
        for &dig in &digits {
            r = r * d + dig;
        }
        m[(r, c)] = cx(T::one(), T::zero());
    }
    m
}

/// Permutation matrix of the algebra star on unit coefficients:
/// `coords(b*) = star_perm · conj(coords(b))`.
fn star_perm<T: Real>(alg: &AlgebraShape) -> CMat<T> {
    let nb = alg.dim();
    let mut m = CMat::zeros(nb, nb);
    for c in 0..nb {
        let (b, p, q) = alg.unit_position(c);
        m[(alg.unit_index(b, q, p), c)] = cx(T::one(), T::zero());
    }
    m
}

struct MixedTables<'a, T: Real> {
    cl: &'a CMat<T>,
    cr: &'a CMat<T>,
    n_left: &'a [CMat<T>],
    n_right: &'a [CMat<T>],
    nbar_left: &'a [CMat<T>],
    nbar_right: &'a [CMat<T>],
}

/// Multiplication map for grades of opposite sign: contract adjacent
/// conjugate letters into the algebra and absorb, repeatedly.
fn mixed_psi<T: Real>(
    k1: i64,
    k2: i64,
    d: usize,
    reps: &[CMat<T>],
    quots: &[CMat<T>],
    idx: impl Fn(i64) -> usize,
    tables: &MixedTables<'_, T>,
) -> CMat<T> {
    let mut a = k1.unsigned_abs() as usize;
    let mut b = k2.unsigned_abs() as usize;
    let positive_first = k1 > 0;
    let mut cols = reps[idx(k1)].kron(&reps[idx(k2)]);
    while a > 0 && b > 0 {
        let pre = d.pow((a - 1) as u32);
        let post = d.pow((b - 1) as u32);
        cols = contract_step(
            &cols,
            pre,
            post,
            if positive_first { tables.cl } else { tables.cr },
            d,
        );
        a -= 1;
        b -= 1;
        if a > 0 {
            cols = absorb_left_step(
                &cols,
                d.pow((a - 1) as u32),
                d.pow(b as u32),
                if positive_first {
                    tables.n_right
                } else {
                    tables.nbar_right
                },
            );
        } else if b > 0 {
            cols = absorb_right_step(
                &cols,
                1,
                d.pow((b - 1) as u32),
                if positive_first {
                    tables.nbar_left
                } else {
                    tables.n_left
                },
            );
        }
    }
    quots[idx(k1 + k2)].mul(&cols)
}

/// Build the level family and every in-range multiplication map from a
/// grade-one equivalence bimodule.
pub fn factor_system<T: Real>(
    n: &MoritaBimodule<T>,
    cutoff: usize,
    ctx: &Ctx<T>,
) -> Result<FactorSystem<T>> {
    if cutoff < 1 {
        return Err(Error::Input("grade cutoff must be at least 1".into()));
    }
    let alg = n.corr.alg.clone();
    let nb = alg.dim();
    let d = n.corr.dim;
    let (nbar, dmat, dinv) = n.dual(ctx)?;

    let span = 2 * cutoff + 1;
    let mut levels: Vec<Option<MoritaBimodule<T>>> = vec![None; span];
    let mut reps: Vec<Option<CMat<T>>> = vec![None; span];
    let mut quots: Vec<Option<CMat<T>>> = vec![None; span];
    let idx = |k: i64| (k + cutoff as i64) as usize;

    levels[idx(0)] = Some(MoritaBimodule::over_self(&alg));
    reps[idx(0)] = Some(CMat::identity(nb));
    quots[idx(0)] = Some(CMat::identity(nb));
    levels[idx(1)] = Some(n.clone());
    reps[idx(1)] = Some(CMat::identity(d));
    quots[idx(1)] = Some(CMat::identity(d));
    levels[idx(-1)] = Some(nbar.clone());
    reps[idx(-1)] = Some(CMat::identity(d));
    quots[idx(-1)] = Some(CMat::identity(d));

    for step in 2..=cutoff as i64 {
        for sign in [1i64, -1] {
            let k = sign * step;
            let prev = levels[idx(k - sign)].as_ref().expect("previous level");
            let last = if sign > 0 { n } else { &nbar };
            let (lv, q, proj) = tensor_morita(prev, last, ctx)?;
            let prev_rep = reps[idx(k - sign)].as_ref().expect("previous rep");
            let prev_quot = quots[idx(k - sign)].as_ref().expect("previous quot");
            let eye = CMat::<T>::identity(d);
            reps[idx(k)] = Some(prev_rep.kron(&eye).mul(&q));
            quots[idx(k)] = Some(proj.mul(&prev_quot.kron(&eye)));
            levels[idx(k)] = Some(lv);
        }
    }

    let levels: Vec<MoritaBimodule<T>> = levels.into_iter().map(|l| l.expect("level")).collect();
    let reps: Vec<CMat<T>> = reps.into_iter().map(|m| m.expect("rep")).collect();
    let quots: Vec<CMat<T>> = quots.into_iter().map(|m| m.expect("quot")).collect();

    // Pairing tensors for contracting adjacent conjugate letters, with the
    // grade-one identification folded in.
    let cl_mats: Vec<CMat<T>> = n.linner.iter().map(|g| g.mul(&dinv)).collect();
    let cl = CMat::from_fn(nb, d * d, |g, ij| cl_mats[g][(ij / d, ij % d)]);
    let cr_mats: Vec<CMat<T>> = n
        .corr
        .inner
        .iter()
        .map(|g| dinv.transpose().mul(g))
        .collect();
    let cr = CMat::from_fn(nb, d * d, |g, ij| cr_mats[g][(ij / d, ij % d)]);
    let tables = MixedTables {
        cl: &cl,
        cr: &cr,
        n_left: &n.corr.left,
        n_right: &n.corr.right,
        nbar_left: &nbar.corr.left,
        nbar_right: &nbar.corr.right,
    };

    let c = cutoff as i64;
    let mut psi = BTreeMap::new();
    let rl = alg.regular_left::<T>();
    for k1 in -c..=c {
        for k2 in -c..=c {
            if (k1 + k2).unsigned_abs() as usize > cutoff {
                continue;
            }
            let map = if k1 == 0 && k2 == 0 {
                CMat::from_fn(nb, nb * nb, |row, col| rl[col / nb][(row, col % nb)])
            } else if k1 == 0 {
                let lv = &levels[idx(k2)];
                let r = lv.dim();
                CMat::from_fn(r, nb * r, |row, col| lv.corr.left[col / r][(row, col % r)])
            } else if k2 == 0 {
                let lv = &levels[idx(k1)];
                let r = lv.dim();
                CMat::from_fn(r, r * nb, |row, col| lv.corr.right[col % nb][(row, col / nb)])
            } else if k1.signum() == k2.signum() {
                quots[idx(k1 + k2)].mul(&reps[idx(k1)].kron(&reps[idx(k2)]))
            } else {
                mixed_psi(k1, k2, d, &reps, &quots, idx, &tables)
            };
            psi.insert((k1, k2), map);
        }
    }

    Ok(FactorSystem {
        alg,
        cutoff,
        levels,
        reps,
        quots,
        dual_id: dmat,
        dual_id_inv: dinv,
        psi,
    })
}

/// The truncated graded algebra: the level family with its multiplication
/// maps, the grade involution, and the weight-graded circle action.
#[derive(Clone, Debug)]
pub struct CircleAlgebra<T: Real> {
    pub fs: FactorSystem<T>,
    /// Involution matrices indexed like levels: a grade-`k` vector `x` maps
    /// to the grade-`(−k)` vector `inv[idx(k)]·conj(x)`.
    pub involutions: Vec<CMat<T>>,
    /// Offset of each level inside the total coordinate space.
    pub offsets: Vec<usize>,
    pub total_dim: usize,
}

impl<T: Real> CircleAlgebra<T> {
    pub fn cutoff(&self) -> usize {
        self.fs.cutoff
    }

    pub fn level_dim(&self, k: i64) -> usize {
        self.fs.level_dim(k)
    }

    /// Graded product; `None` when the result grade is beyond the cutoff.
    pub fn product(&self, k1: i64, k2: i64, x: &[Cx<T>], y: &[Cx<T>]) -> Option<Vec<Cx<T>>> {
        self.fs.multiply(k1, k2, x, y)
    }

    /// Grade involution: antilinear, maps grade `k` to grade `−k`.
    pub fn involute(&self, k: i64, x: &[Cx<T>]) -> Vec<Cx<T>> {
        let m = &self.involutions[self.fs.idx(k)];
        let conj: Vec<Cx<T>> = x.iter().map(|v| v.conj()).collect();
        m.apply(&conj)
    }

    /// The circle acts on grade `k` by the scalar `e^{ikt}`.
    pub fn weight_scalar(&self, k: i64, t: T) -> Cx<T> {
        let phase = T::lit(k as f64) * t;
        cx(phase.cos(), phase.sin())
    }

    /// Coordinates of the algebra unit (grade zero).
    pub fn unit(&self) -> Vec<Cx<T>> {
        self.fs.alg.one_t()
    }
}

/// Assemble the graded algebra from a factor system: multiplication from the
/// level maps, involution from word reversal and the conjugate identification,
/// circle action by grade weight.
pub fn build_so2_algebra<T: Real>(fs: FactorSystem<T>) -> Result<CircleAlgebra<T>> {
    let c = fs.cutoff as i64;
    let d = fs.level_dim(1);
    let mut involutions = Vec::with_capacity(2 * fs.cutoff + 1);
    for k in -c..=c {
        let m = if k == 0 {
            star_perm(&fs.alg)
        } else if k > 0 {
            let pow = k as usize;
            fs.quots[fs.idx(-k)]
                .mul(&reversal_perm(d, pow))
                .mul(&kron_pow(&fs.dual_id, pow))
                .mul(&fs.reps[fs.idx(k)].conj())
        } else {
            let pow = (-k) as usize;
            fs.quots[fs.idx(-k)]
                .mul(&reversal_perm(d, pow))
                .mul(&kron_pow(&fs.dual_id_inv.transpose(), pow))
                .mul(&fs.reps[fs.idx(k)].conj())
        };
        involutions.push(m);
    }
    let mut offsets = Vec::with_capacity(2 * fs.cutoff + 1);
    let mut total = 0usize;
    for k in -c..=c {
        offsets.push(total);
        total += fs.level_dim(k);
    }
    Ok(CircleAlgebra {
        fs,
        involutions,
        offsets,
        total_dim: total,
    })
}

/// Extract the grade-one bimodule back out of the algebra operations alone:
/// actions from products with grade zero, pairings from products against
/// involuted grade-one elements.
fn extract_grade_one<T: Real>(ca: &CircleAlgebra<T>) -> MoritaBimodule<T> {
    let fs = &ca.fs;
    let alg = fs.alg.clone();
    let nb = alg.dim();
    let d = fs.level_dim(1);
    let basis = |i: usize, len: usize| {
        let mut v = vec![Cx::<T>::zero(); len];
        v[i] = cx(T::one(), T::zero());
        v
    };
    let mut left = vec![CMat::<T>::zeros(d, d); nb];
    let mut right = vec![CMat::<T>::zeros(d, d); nb];
    for beta in 0..nb {
        let ub = basis(beta, nb);
        for i in 0..d {
            let ei = basis(i, d);
            let le = fs.multiply(0, 1, &ub, &ei).expect("grade one in range");
            let ri = fs.multiply(1, 0, &ei, &ub).expect("grade one in range");
            for r in 0..d {
                left[beta][(r, i)] = le[r];
                right[beta][(r, i)] = ri[r];
            }
        }
    }
    let mut rinner = vec![CMat::<T>::zeros(d, d); nb];
    let mut linner = vec![CMat::<T>::zeros(d, d); nb];
    for i in 0..d {
        let ei = basis(i, d);
        let ei_star = ca.involute(1, &ei);
        for j in 0..d {
            let ej = basis(j, d);
            let ej_star = ca.involute(1, &ej);
            let r = fs.multiply(-1, 1, &ei_star, &ej).expect("pairing in range");
            let l = fs.multiply(1, -1, &ei, &ej_star).expect("pairing in range");
            for (g, v) in r.into_iter().enumerate() {
                rinner[g][(i, j)] = v;
            }
            for (g, v) in l.into_iter().enumerate() {
                linner[g][(i, j)] = v;
            }
        }
    }
    MoritaBimodule {
        corr: Correspondence {
            alg,
            dim: d,
            left,
            right,
            inner: rinner,
        },
        linner,
    }
}

/// Verify every structural law of the graded algebra. Law names are prefixed
/// `so2.`; each record carries the worst residual and where it occurred.
pub fn verify_so2<T: Real>(ca: &CircleAlgebra<T>, ctx: &Ctx<T>) -> Result<CheckSet> {
    let fs = &ca.fs;
    let alg = &fs.alg;
    let nb = alg.dim();
    let c = fs.cutoff as i64;
    let d = fs.level_dim(1);
    let mut set = CheckSet::new();
    let scale = fs
        .psi
        .values()
        .map(|p| p.max_abs())
        .fold(T::one(), T::max);
    let bound = ctx.tol.bound(scale);

    // Level family shape and per-level structural laws.
    let dims: Vec<usize> = (-c..=c).map(|k| fs.level_dim(k)).collect();
    set.record_flag(
        "so2.grading",
        dims.len() == 2 * fs.cutoff + 1 && fs.level_dim(0) == nb,
        &format!("level dimensions {dims:?}"),
    );
    for k in -c..=c {
        match fs.level(k).validate(ctx) {
            Ok(()) => set.record_flag("so2.level-valid", true, &format!("grade {k}")),
            Err(e) => set.record_flag("so2.level-valid", false, &format!("grade {k}: {e}")),
        }
    }

    // Grade-zero multiplication is the algebra multiplication.
    let rl = alg.regular_left::<T>();
    let want00 = CMat::from_fn(nb, nb * nb, |row, col| rl[col / nb][(row, col % nb)]);
    set.record(
        "so2.unit-level",
        fs.psi[&(0, 0)].max_abs_diff(&want00),
        bound,
        "grade-zero product vs algebra multiplication",
    );

    // Unit laws against every level.
    let one = alg.one_t::<T>();
    for k in -c..=c {
        let r = fs.level_dim(k);
        let mut worst = T::zero();
        for i in 0..r {
            let mut ei = vec![Cx::<T>::zero(); r];
            ei[i] = cx(T::one(), T::zero());
            let le = fs.multiply(0, k, &one, &ei).expect("unit product");
            let ri = fs.multiply(k, 0, &ei, &one).expect("unit product");
            for (a, v) in le.iter().enumerate() {
                worst = worst.max((*v - ei[a]).norm());
            }
            for (a, v) in ri.iter().enumerate() {
                worst = worst.max((*v - ei[a]).norm());
            }
        }
        set.record("so2.unit-law", worst, bound, &format!("grade {k}"));
    }

    // The algebra's own operations reproduce the grade-one module.
    let ext = extract_grade_one(ca);
    let n1 = fs.level(1);
    let mut worst = T::zero();
    for beta in 0..nb {
        worst = worst.max(ext.corr.left[beta].max_abs_diff(&n1.corr.left[beta]));
        worst = worst.max(ext.corr.right[beta].max_abs_diff(&n1.corr.right[beta]));
        worst = worst.max(ext.corr.inner[beta].max_abs_diff(&n1.corr.inner[beta]));
        worst = worst.max(ext.linner[beta].max_abs_diff(&n1.linner[beta]));
    }
    set.record(
        "so2.level-one",
        worst,
        bound,
        "grade-one module extracted from products and involution",
    );

    // Each multiplication map is a balanced bimodule map, isometric for both
    // pairings, onto its target level.
    for ((k1, k2), p) in &fs.psi {
        let m = fs.level(*k1);
        let n2 = fs.level(*k2);
        let tgt = fs.level(k1 + k2);
        let (r1, r2) = (m.dim(), n2.dim());
        let (i1, i2) = (CMat::<T>::identity(r1), CMat::<T>::identity(r2));
        let at = format!("grades ({k1}, {k2})");
        for beta in 0..nb {
            let lres = p
                .mul(&m.corr.left[beta].kron(&i2))
                .max_abs_diff(&tgt.corr.left[beta].mul(p));
            let rres = p
                .mul(&i1.kron(&n2.corr.right[beta]))
                .max_abs_diff(&tgt.corr.right[beta].mul(p));
            set.record("so2.psi-module", lres.max(rres), bound, &at);
            let bres = p
                .mul(&m.corr.right[beta].kron(&i2))
                .max_abs_diff(&p.mul(&i1.kron(&n2.corr.left[beta])));
            set.record("so2.psi-balanced", bres, bound, &at);
        }
        let ig = interior_right_gram(&m.corr, &n2.corr);
        let il = interior_left_gram(m, n2);
        for gamma in 0..nb {
            let pull_r = p.adjoint().mul(&tgt.corr.inner[gamma].mul(p));
            set.record(
                "so2.psi-isometry",
                pull_r.max_abs_diff(&ig[gamma]),
                bound,
                &at,
            );
            let pull_l = p.transpose().mul(&tgt.linner[gamma].mul(&p.conj()));
            set.record(
                "so2.psi-isometry-left",
                pull_l.max_abs_diff(&il[gamma]),
                bound,
                &at,
            );
        }
        let rank = psd_rank(&p.mul(&p.adjoint()), ctx.tol.rel)?;
        set.record_flag(
            "so2.psi-onto",
            rank == tgt.dim(),
            &format!("{at}: rank {rank} of {}", tgt.dim()),
        );
    }

    // Flatness: contracting on the left of a module letter agrees with
    // contracting on its right, on the full word space.
    {
        let n1 = fs.level(1);
        let nbar = fs.level(-1);
        let cl_mats: Vec<CMat<T>> = n1.linner.iter().map(|g| g.mul(&fs.dual_id_inv)).collect();
        let cl = CMat::from_fn(nb, d * d, |g, ij| cl_mats[g][(ij / d, ij % d)]);
        let cr_mats: Vec<CMat<T>> = n1
            .corr
            .inner
            .iter()
            .map(|g| fs.dual_id_inv.transpose().mul(g))
            .collect();
        let cr = CMat::from_fn(nb, d * d, |g, ij| cr_mats[g][(ij / d, ij % d)]);
        let eye3 = CMat::<T>::identity(d * d * d);
        // Word +, −, +.
        let lhs = absorb_right_step(&contract_step(&eye3, 1, d, &cl, d), 1, 1, &n1.corr.left);
        let rhs = absorb_left_step(&contract_step(&eye3, d, 1, &cr, d), 1, 1, &n1.corr.right);
        set.record(
            "so2.flat",
            lhs.max_abs_diff(&rhs),
            bound,
            "word grades (+1, −1, +1)",
        );
        // Word −, +, −.
        let lhs = absorb_right_step(&contract_step(&eye3, 1, d, &cr, d), 1, 1, &nbar.corr.left);
        let rhs = absorb_left_step(&contract_step(&eye3, d, 1, &cl, d), 1, 1, &nbar.corr.right);
        set.record(
            "so2.flat",
            lhs.max_abs_diff(&rhs),
            bound,
            "word grades (−1, +1, −1)",
        );
    }

    // Associativity of the multiplication maps over every in-range triple.
    for k1 in -c..=c {
        for k2 in -c..=c {
            for k3 in -c..=c {
                let (s12, s23, s) = (k1 + k2, k2 + k3, k1 + k2 + k3);
                if !fs.in_range(s12) || !fs.in_range(s23) || !fs.in_range(s) {
                    continue;
                }
                let (r1, r3) = (fs.level_dim(k1), fs.level_dim(k3));
                let lhs = fs.psi[&(s12, k3)].mul(&fs.psi[&(k1, k2)].kron(&CMat::identity(r3)));
                let rhs = fs.psi[&(k1, s23)].mul(&CMat::identity(r1).kron(&fs.psi[&(k2, k3)]));
                set.record(
                    "so2.cocycle",
                    lhs.max_abs_diff(&rhs),
                    bound,
                    &format!("grades ({k1}, {k2}, {k3})"),
                );
            }
        }
    }

    // Involution: involutive, unital, compatible with the pairings, and an
    // antihomomorphism for the graded product.
    for k in -c..=c {
        let m_k = &ca.involutions[fs.idx(k)];
        let m_neg = &ca.involutions[fs.idx(-k)];
        let r = fs.level_dim(k);
        set.record(
            "so2.involution-involutive",
            m_neg.mul(&m_k.conj()).max_abs_diff(&CMat::identity(r)),
            bound,
            &format!("grade {k}"),
        );
        // Right pairing of involuted vectors is the left pairing.
        let tgt = fs.level(-k);
        let src = fs.level(k);
        for gamma in 0..nb {
            let got = m_k.adjoint().mul(&tgt.corr.inner[gamma].mul(m_k));
            set.record(
                "so2.involution-pairing",
                got.max_abs_diff(&src.linner[gamma]),
                bound,
                &format!("grade {k}, component {gamma}"),
            );
        }
    }
    {
        let one_conj: Vec<Cx<T>> = one.iter().map(|v| v.conj()).collect();
        let star_one = ca.involutions[fs.idx(0)].apply(&one_conj);
        let mut worst = T::zero();
        for (a, v) in star_one.iter().enumerate() {
            worst = worst.max((*v - one[a]).norm());
        }
        set.record("so2.involution-unit", worst, bound, "unit is self-adjoint");
    }
    for (k1, k2) in fs.psi.keys() {
        let (r1, r2) = (fs.level_dim(*k1), fs.level_dim(*k2));
        let seed = ctx.sub_seed("so2.involution", &[(*k1 + c) as u64, (*k2 + c) as u64]);
        let mut x = gaussian_complex::<T>(seed, r1);
        let mut y = gaussian_complex::<T>(seed ^ 0x5A5A, r2);
        let nx = vec_norm(&x).max(T::lit(1e-12));
        let ny = vec_norm(&y).max(T::lit(1e-12));
        x.iter_mut().for_each(|v| *v /= cx(nx, T::zero()));
        y.iter_mut().for_each(|v| *v /= cx(ny, T::zero()));
        let z = fs.multiply(*k1, *k2, &x, &y).expect("in-range product");
        let z_star = ca.involute(k1 + k2, &z);
        let w = fs
            .multiply(-k2, -k1, &ca.involute(*k2, &y), &ca.involute(*k1, &x))
            .expect("mirror product in range");
        let mut worst = T::zero();
        for (a, v) in z_star.iter().enumerate() {
            worst = worst.max((*v - w[a]).norm());
        }
        set.record(
            "so2.involution-antimult",
            worst,
            bound,
            &format!("grades ({k1}, {k2})"),
        );
    }

    // Circle action: multiplicative on products, conjugate under involution.
    for (k1, k2) in fs.psi.keys() {
        let (r1, r2) = (fs.level_dim(*k1), fs.level_dim(*k2));
        let seed = ctx.sub_seed("so2.action", &[(*k1 + c) as u64, (*k2 + c) as u64]);
        let x = gaussian_complex::<T>(seed, r1);
        let y = gaussian_complex::<T>(seed ^ 0xA5A5, r2);
        let t = crate::rng::uniform01::<T>(seed ^ 0x33) * T::lit(std::f64::consts::TAU);
        let z = fs.multiply(*k1, *k2, &x, &y).expect("in-range product");
        let sx = ca.weight_scalar(*k1, t);
        let sy = ca.weight_scalar(*k2, t);
        let sz = ca.weight_scalar(k1 + k2, t);
        let ax: Vec<Cx<T>> = x.iter().map(|v| *v * sx).collect();
        let ay: Vec<Cx<T>> = y.iter().map(|v| *v * sy).collect();
        let az = fs.multiply(*k1, *k2, &ax, &ay).expect("in-range product");
        let mut worst = T::zero();
        for (a, v) in az.iter().enumerate() {
            worst = worst.max((*v - z[a] * sz).norm());
        }
        set.record(
            "so2.action-multiplicative",
            worst,
            bound,
            &format!("grades ({k1}, {k2})"),
        );
    }
    for k in -c..=c {
        let r = fs.level_dim(k);
        let seed = ctx.sub_seed("so2.action-star", &[(k + c) as u64]);
        let x = gaussian_complex::<T>(seed, r);
        let t = crate::rng::uniform01::<T>(seed ^ 0x77) * T::lit(std::f64::consts::TAU);
        let s = ca.weight_scalar(k, t);
        let ax: Vec<Cx<T>> = x.iter().map(|v| *v * s).collect();
        let lhs = ca.involute(k, &ax);
        let s_neg = ca.weight_scalar(-k, t);
        let rhs: Vec<Cx<T>> = ca.involute(k, &x).iter().map(|v| *v * s_neg).collect();
        let mut worst = T::zero();
        for (a, v) in lhs.iter().enumerate() {
            worst = worst.max((*v - rhs[a]).norm());
        }
        set.record("so2.action-star", worst, bound, &format!("grade {k}"));
    }

    // Freeness: both pairings of every level span the whole algebra.
    for k in -c..=c {
        let lv = fs.level(k);
        let lrank = pairing_rank(&lv.linner, ctx)?;
        let rrank = pairing_rank(&lv.corr.inner, ctx)?;
        set.record_flag(
            "so2.freeness",
            lrank == nb && rrank == nb,
            &format!("grade {k}: pairing ranks {lrank}/{rrank} of {nb}"),
        );
    }

    // The standard two-dimensional representation splits into the weight ±1
    // characters, so its equivariant module is the sum of grades +1 and −1.
    {
        let j2 = {
            let mut m = CMat::<T>::zeros(2, 2);
            m[(0, 1)] = cx(-T::one(), T::zero());
            m[(1, 0)] = cx(T::one(), T::zero());
            m
        };
        let mut total = 0usize;
        let mut dims_ok = true;
        let mut worst = T::zero();
        for k in -c..=c {
            let r = fs.level_dim(k);
            let gen = CMat::<T>::identity(r)
                .kron(&j2)
                .add(&CMat::identity(2 * r).scale(cx(T::zero(), T::lit(k as f64))));
            let kern = psd_kernel(&gen.adjoint().mul(&gen), ctx.tol.rel)?;
            let expect = if k == 1 || k == -1 { r } else { 0 };
            if kern.cols() != expect {
                dims_ok = false;
            }
            total += kern.cols();
            if k == 1 || k == -1 {
                // The invariant vectors pair the level with the weight-(−k)
                // direction (1, ∓i)/√2 of the standard representation.
                let half = T::lit(0.5).sqrt();
                let w = [
                    cx(half, T::zero()),
                    if k == 1 {
                        cx(T::zero(), half)
                    } else {
                        cx(T::zero(), -half)
                    },
                ];
                for a in 0..r {
                    let mut vecv = vec![Cx::<T>::zero(); 2 * r];
                    vecv[2 * a] = w[0];
                    vecv[2 * a + 1] = w[1];
                    let img = gen.apply(&vecv);
                    worst = worst.max(vec_norm(&img));
                }
            }
        }
        set.record_flag(
            "so2.standard-split",
            dims_ok && total == 2 * d,
            &format!("invariant dimension {total}, expected 2·{d} at grades ±1"),
        );
        set.record(
            "so2.standard-split-vectors",
            worst,
            bound,
            "level ⊗ weight-vector pairs are invariant",
        );
    }

    Ok(set)
}

/// Rotate a bimodule's carrier by a unitary, transporting all structure.
fn rotate_bimodule<T: Real>(m: &MoritaBimodule<T>, u: &CMat<T>) -> MoritaBimodule<T> {
    let ua = u.adjoint();
    let left: Vec<CMat<T>> = m.corr.left.iter().map(|l| ua.mul(&l.mul(u))).collect();
    let right: Vec<CMat<T>> = m.corr.right.iter().map(|r| ua.mul(&r.mul(u))).collect();
    let inner: Vec<CMat<T>> = m.corr.inner.iter().map(|g| ua.mul(&g.mul(u))).collect();
    let linner: Vec<CMat<T>> = m
        .linner
        .iter()
        .map(|g| u.transpose().mul(&g.mul(&u.conj())))
        .collect();
    MoritaBimodule {
        corr: Correspondence {
            alg: m.corr.alg.clone(),
            dim: m.corr.dim,
            left,
            right,
            inner,
        },
        linner,
    }
}

/// Round trip: extract the grade-one module from the algebra operations,
/// re-coordinate it by a random unitary, rebuild the level family from it,
/// and exhibit the unitary bimodule equivalence between the two systems.
pub fn round_trip_so2<T: Real>(ca: &CircleAlgebra<T>, ctx: &Ctx<T>) -> Result<CheckSet> {
    let fs = &ca.fs;
    let c = fs.cutoff as i64;
    let nb = fs.alg.dim();
    let d = fs.level_dim(1);
    let mut set = CheckSet::new();
    let scale = fs
        .psi
        .values()
        .map(|p| p.max_abs())
        .fold(T::one(), T::max);
    let bound = ctx.tol.bound(scale);

    // Grade-one data extracted from products and involution alone.
    let ext = extract_grade_one(ca);
    match ext.validate(ctx) {
        Ok(()) => set.record_flag("so2.roundtrip-extract", true, "extracted module valid"),
        Err(e) => set.record_flag("so2.roundtrip-extract", false, &format!("{e}")),
    }

    // A different representative of the same equivalence class.
    let g = gaussian_complex::<T>(ctx.sub_seed("so2.roundtrip", &[]), d * d);
    let u = polar_unitary(&CMat::from_vec(d, d, g)?)?;
    let n2 = rotate_bimodule(&ext, &u);
    match n2.validate(ctx) {
        Ok(()) => set.record_flag("so2.roundtrip-rotate", true, "rotated module valid"),
        Err(e) => set.record_flag("so2.roundtrip-rotate", false, &format!("{e}")),
    }
    let fs2 = factor_system(&n2, fs.cutoff, ctx)?;
    let ca2 = build_so2_algebra(fs2)?;
    let fs2 = &ca2.fs;

    let dims_match = (-c..=c).all(|k| fs.level_dim(k) == fs2.level_dim(k));
    set.record_flag(
        "so2.roundtrip-dims",
        dims_match,
        "rebuilt level dimensions match",
    );

    // Comparison maps: on positive grades the letterwise unitary, on negative
    // grades its conjugate, transported through both word quotients.
    let mut vmaps: Vec<CMat<T>> = Vec::with_capacity(2 * fs.cutoff + 1);
    for k in -c..=c {
        let v = if k == 0 {
            CMat::identity(nb)
        } else {
            let pow = k.unsigned_abs() as usize;
            let letter = if k > 0 { u.clone() } else { u.conj() };
            fs.quots[fs.idx(k)]
                .mul(&kron_pow(&letter, pow))
                .mul(&fs2.reps[fs2.idx(k)])
        };
        let r = fs.level_dim(k);
        set.record(
            "so2.roundtrip-unitary",
            v.adjoint().mul(&v).max_abs_diff(&CMat::identity(fs2.level_dim(k)))
                .max(v.mul(&v.adjoint()).max_abs_diff(&CMat::identity(r))),
            bound,
            &format!("grade {k}"),
        );
        set.record(
            "so2.roundtrip-bimodule",
            fs2.level(k).corr.map_bimodule_residual(&fs.level(k).corr, &v),
            bound,
            &format!("grade {k}"),
        );
        vmaps.push(v);
    }

    // The comparison maps intertwine the two multiplication families…
    for ((k1, k2), p2) in &fs2.psi {
        let p1 = &fs.psi[&(*k1, *k2)];
        let lhs = vmaps[fs.idx(k1 + k2)].mul(p2);
        let rhs = p1.mul(&vmaps[fs.idx(*k1)].kron(&vmaps[fs.idx(*k2)]));
        set.record(
            "so2.roundtrip-product",
            lhs.max_abs_diff(&rhs),
            bound,
            &format!("grades ({k1}, {k2})"),
        );
    }
    // …and the two involutions.
    for k in -c..=c {
        let lhs = vmaps[fs.idx(-k)].mul(&ca2.involutions[fs2.idx(k)]);
        let rhs = ca.involutions[fs.idx(k)].mul(&vmaps[fs.idx(k)].conj());
        set.record(
            "so2.roundtrip-involution",
            lhs.max_abs_diff(&rhs),
            bound,
            &format!("grade {k}"),
        );
    }

    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::psd_kernel;

    fn ctx() -> Ctx<f64> {
        Ctx::default()
    }

    #[test]
    fn self_modules_validate() {
        for blocks in [vec![1], vec![1, 1, 1], vec![2], vec![2, 1]] {
            let alg = AlgebraShape::new(blocks).unwrap();
            let m = MoritaBimodule::<f64>::over_self(&alg);
            m.validate(&ctx()).unwrap();
            assert_eq!(m.dim(), alg.dim());
        }
    }

    #[test]
    fn cycle_module_validates() {
        let m = cycle_bimodule::<f64>();
        m.validate(&ctx()).unwrap();
        assert_eq!(m.dim(), 3);
    }

    #[test]
    fn make_morita_accepts_assembled_tables() {
        let alg = AlgebraShape::new(vec![2]).unwrap();
        let base = MoritaBimodule::<f64>::over_self(&alg);
        let m = make_morita(
            &alg,
            base.corr.left.clone(),
            base.corr.right.clone(),
            base.corr.inner.clone(),
            base.linner.clone(),
            &ctx(),
        )
        .unwrap();
        assert_eq!(m.dim(), 4);
    }

    #[test]
    fn non_full_module_is_rejected() {
        // A line supported at one of two points: a fine bimodule, but its
        // pairings only span that point's component.
        let alg = AlgebraShape::new(vec![1, 1]).unwrap();
        let one = Cx::new(1.0, 0.0);
        let zero = Cx::new(0.0, 0.0);
        let m0 = CMat::from_vec(1, 1, vec![one]).unwrap();
        let z0 = CMat::from_vec(1, 1, vec![zero]).unwrap();
        let err = make_morita(
            &alg,
            vec![m0.clone(), z0.clone()],
            vec![m0.clone(), z0.clone()],
            vec![m0.clone(), z0.clone()],
            vec![m0, z0],
            &ctx(),
        )
        .unwrap_err();
        match err {
            Error::Axiom { law, .. } => assert!(law.contains("full"), "law was {law}"),
            other => panic!("expected a named axiom error, got {other}"),
        }
    }

    #[test]
    fn broken_compatibility_is_rejected() {
        // Doubling the left pairing keeps every one-sided law intact but
        // breaks the identity coupling the two pairings.
        let mut m = cycle_bimodule::<f64>();
        for g in &mut m.linner {
            *g = g.scale(Cx::new(2.0, 0.0));
        }
        let err = m.validate(&ctx()).unwrap_err();
        match err {
            Error::Axiom { law, .. } => assert_eq!(law, "morita.imprimitivity"),
            other => panic!("expected the compatibility law to fail, got {other}"),
        }
    }

    #[test]
    fn dual_of_self_module_is_the_algebra() {
        let alg = AlgebraShape::new(vec![2, 1]).unwrap();
        let m = MoritaBimodule::<f64>::over_self(&alg);
        let (dual, dmat, dinv) = m.dual(&ctx()).unwrap();
        let nb = alg.dim();
        assert!(dmat.max_abs_diff(&CMat::identity(nb)) < 1e-12);
        assert!(dinv.max_abs_diff(&CMat::identity(nb)) < 1e-12);
        // The star permutation is a unitary bimodule equivalence onto B.
        let p = star_perm::<f64>(&alg);
        assert!(dual.corr.map_bimodule_residual(&m.corr, &p) < 1e-12);
        for g in 0..nb {
            let pulled = p.adjoint().mul(&m.corr.inner[g].mul(&p));
            assert!(pulled.max_abs_diff(&dual.corr.inner[g]) < 1e-12);
            let pulled_l = p.transpose().mul(&m.linner[g].mul(&p.conj()));
            assert!(pulled_l.max_abs_diff(&dual.linner[g]) < 1e-12);
        }
    }

    #[test]
    fn dual_is_involutive_on_the_cycle() {
        let m = cycle_bimodule::<f64>();
        let (dual, d1, _) = m.dual(&ctx()).unwrap();
        let (dd, d2, _) = dual.dual(&ctx()).unwrap();
        assert!(d1.max_abs_diff(&CMat::identity(3)) < 1e-12);
        assert!(d2.max_abs_diff(&CMat::identity(3)) < 1e-12);
        for g in 0..3 {
            assert!(dd.corr.left[g].max_abs_diff(&m.corr.left[g]) < 1e-12);
            assert!(dd.corr.right[g].max_abs_diff(&m.corr.right[g]) < 1e-12);
            assert!(dd.corr.inner[g].max_abs_diff(&m.corr.inner[g]) < 1e-12);
            assert!(dd.linner[g].max_abs_diff(&m.linner[g]) < 1e-12);
        }
    }

    #[test]
    fn cutoff_must_be_positive() {
        let m = MoritaBimodule::<f64>::over_self(&AlgebraShape::scalar());
        assert!(matches!(
            factor_system(&m, 0, &ctx()),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn scalar_levels_collapse_to_phases() {
        let m = MoritaBimodule::<f64>::over_self(&AlgebraShape::scalar());
        let fs = factor_system(&m, 3, &ctx()).unwrap();
        for k in -3i64..=3 {
            assert_eq!(fs.level_dim(k), 1);
        }
        for p in fs.psi.values() {
            assert_eq!((p.rows(), p.cols()), (1, 1));
            assert!((p[(0, 0)] - Cx::new(1.0, 0.0)).norm() < 1e-13);
        }
        let ca = build_so2_algebra(fs).unwrap();
        let set = verify_so2(&ca, &ctx()).unwrap();
        assert!(set.all_pass(), "failed: {:?}", set.failed_names());
        let cocycle = set
            .checks()
            .iter()
            .find(|c| c.name == "so2.cocycle")
            .unwrap();
        assert!(cocycle.residual < 1e-13);
    }

    #[test]
    fn self_module_levels_keep_the_algebra_dimension() {
        for blocks in [vec![2], vec![1, 1, 1]] {
            let alg = AlgebraShape::new(blocks).unwrap();
            let m = MoritaBimodule::<f64>::over_self(&alg);
            let fs = factor_system(&m, 3, &ctx()).unwrap();
            for k in -3i64..=3 {
                assert_eq!(fs.level_dim(k), alg.dim(), "grade {k}");
            }
        }
    }

    /// Grade twists of a commutative-base system: for each algebra unit find
    /// which left unit matches its right action.
    fn twist_pattern(fs: &FactorSystem<f64>, k: i64) -> Vec<usize> {
        let lv = fs.level(k);
        let nb = fs.alg.dim();
        (0..nb)
            .map(|g| {
                (0..nb)
                    .find(|&h| lv.corr.right[g].max_abs_diff(&lv.corr.left[h]) < 1e-10)
                    .expect("twist is a permutation")
            })
            .collect()
    }

    #[test]
    fn cycle_levels_twist_back_to_the_algebra() {
        let m = cycle_bimodule::<f64>();
        let fs = factor_system(&m, 3, &ctx()).unwrap();
        for k in -3i64..=3 {
            assert_eq!(fs.level_dim(k), 3, "grade {k}");
        }
        // One step of the cycle per grade; the cube of a 3-cycle is trivial.
        assert_eq!(twist_pattern(&fs, 1), vec![2, 0, 1]);
        assert_eq!(twist_pattern(&fs, 2), vec![1, 2, 0]);
        assert_eq!(twist_pattern(&fs, 3), vec![0, 1, 2]);
        // Central vectors exist exactly when the twist is trivial.
        for (k, want) in [(1i64, 0usize), (2, 0), (3, 3)] {
            let lv = fs.level(k);
            let mut acc = CMat::<f64>::zeros(lv.dim(), lv.dim());
            for b in 0..fs.alg.dim() {
                let diff = lv.corr.left[b].sub(&lv.corr.right[b]);
                acc = acc.add(&diff.adjoint().mul(&diff));
            }
            let kern = psd_kernel(&acc, 1e-9).unwrap();
            assert_eq!(kern.cols(), want, "grade {k}");
        }
    }

    #[test]
    fn cycle_system_passes_all_checks() {
        let m = cycle_bimodule::<f64>();
        let fs = factor_system(&m, 3, &ctx()).unwrap();
        let ca = build_so2_algebra(fs).unwrap();
        let set = verify_so2(&ca, &ctx()).unwrap();
        assert!(set.all_pass(), "failed: {:?}", set.failed_names());
        for name in ["so2.cocycle", "so2.flat"] {
            let c = set.checks().iter().find(|c| c.name == name).unwrap();
            assert!(c.residual < 1e-10, "{name}: {}", c.residual);
        }
    }

    #[test]
    fn matrix_system_passes_all_checks() {
        let alg = AlgebraShape::new(vec![2]).unwrap();
        let m = MoritaBimodule::<f64>::over_self(&alg);
        let fs = factor_system(&m, 3, &ctx()).unwrap();
        let ca = build_so2_algebra(fs).unwrap();
        let set = verify_so2(&ca, &ctx()).unwrap();
        assert!(set.all_pass(), "failed: {:?}", set.failed_names());
    }

    #[test]
    fn involution_and_product_work_per_level() {
        let m = cycle_bimodule::<f64>();
        let fs = factor_system(&m, 3, &ctx()).unwrap();
        let ca = build_so2_algebra(fs).unwrap();
        let x = gaussian_complex::<f64>(901, ca.level_dim(2));
        let y = gaussian_complex::<f64>(902, ca.level_dim(1));
        // Product into grade 3 exists, beyond it does not.
        let z = ca.product(2, 1, &x, &y).unwrap();
        assert_eq!(z.len(), ca.level_dim(3));
        assert!(ca.product(3, 1, &z[..0], &y).is_none());
        // The involution reverses the product.
        let z_star = ca.involute(3, &z);
        let w = ca
            .product(-1, -2, &ca.involute(1, &y), &ca.involute(2, &x))
            .unwrap();
        for (p, q) in z_star.iter().zip(&w) {
            assert!((p - q).norm() < 1e-10);
        }
    }

    #[test]
    fn tampered_product_is_detected() {
        let m = cycle_bimodule::<f64>();
        let fs = factor_system(&m, 2, &ctx()).unwrap();
        let mut ca = build_so2_algebra(fs).unwrap();
        let p = ca.fs.psi.get_mut(&(1, 1)).unwrap();
        *p = p.scale(Cx::new(1.01, 0.0));
        let set = verify_so2(&ca, &ctx()).unwrap();
        assert!(!set.all_pass());
        assert!(set
            .failed_names()
            .iter()
            .any(|n| n == "so2.cocycle" || n == "so2.psi-isometry"));
    }

    #[test]
    fn standard_representation_splits_at_grades_one() {
        let alg = AlgebraShape::new(vec![2]).unwrap();
        let m = MoritaBimodule::<f64>::over_self(&alg);
        let fs = factor_system(&m, 2, &ctx()).unwrap();
        let ca = build_so2_algebra(fs).unwrap();
        let set = verify_so2(&ca, &ctx()).unwrap();
        let split = set
            .checks()
            .iter()
            .find(|c| c.name == "so2.standard-split")
            .unwrap();
        assert!(split.pass, "{}", split.context);
        assert!(split.context.contains("8"), "{}", split.context);
    }

    #[test]
    fn roundtrip_reproduces_the_multiplication_maps() {
        for m in [
            cycle_bimodule::<f64>(),
            MoritaBimodule::<f64>::over_self(&AlgebraShape::new(vec![2]).unwrap()),
        ] {
            let fs = factor_system(&m, 3, &ctx()).unwrap();
            let ca = build_so2_algebra(fs).unwrap();
            let set = round_trip_so2(&ca, &ctx()).unwrap();
            assert!(set.all_pass(), "failed: {:?}", set.failed_names());
        }
    }

    #[test]
    fn f32_smoke_run() {
        let m = MoritaBimodule::<f32>::over_self(&AlgebraShape::scalar());
        let cx32 = Ctx::<f32>::default();
        let fs = factor_system(&m, 2, &cx32).unwrap();
        let ca = build_so2_algebra(fs).unwrap();
        let set = verify_so2(&ca, &cx32).unwrap();
        assert!(set.all_pass(), "failed: {:?}", set.failed_names());
    }
}
