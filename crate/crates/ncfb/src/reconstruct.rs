//! Reconstruction of a graded coefficient algebra from one equivariant
//! correspondence.
//!
//! Given an intertwiner action over a coefficient algebra `B`, this module
//! assembles the finite-truncation dynamical system it generates: a direct
//! sum of levels, one per irreducible class inside a chosen cutoff, each of
//! the form (coefficient space of the conjugate class) ⊗ (class carrier).
//! The sum carries
//!
//! * a graded product, computed through the multiplication maps of the
//!   coefficient spaces and isometric decompositions of tensor products of
//!   carriers,
//! * an antilinear involution pairing each level with its conjugate level,
//! * a `B`-valued inner product turning the sum into a Hilbert module, and
//! * a pointwise group action rotating the carrier factor of every level.
//!
//! On top of the algebra sit the analysis routines: spectral subspaces for
//! arbitrary finite-dimensional representations, recovery of the original
//! correspondence from the spectral subspace of the defining class, a
//! freeness test (fullness of the spectral inner products over `B`), a
//! commutativity probe, and a full round trip that rebuilds an action datum
//! from the reconstructed algebra and re-validates it.

use std::collections::BTreeMap;

use num_traits::Zero;
use rand::seq::SliceRandom;

use crate::action::IntertwinerAction;
use crate::check::CheckSet;
use crate::error::{Error, Result};
use crate::gamma::{gamma_morphism, gamma_object, mult_map, ConcreteRep, GammaObject};
use crate::hilbmod::{AlgebraShape, Correspondence};
use crate::liegroup::{random_algebra_coeffs, Rep};
use crate::linalg::{eigh, gram_rank, polar_unitary, psd_kernel, vec_norm, CMat};
use crate::repcat::{isometries_onto_classes, unitary_intertwiner, Registry};
use crate::rng::{gaussian_complex, rng};
use crate::scalar::{Ctx, Cx, Real};

/// Cap on sampled associativity triples inside [`verify_bundle`].
const ASSOC_CAP: usize = 36;
/// Cap on sampled adjoint-compatibility triples inside [`verify_bundle`].
const ADJOINT_CAP: usize = 24;
/// Number of sampled group elements for the covariance checks.
const GROUP_SAMPLES: usize = 10;

/// One graded summand: coefficients of the conjugate class tensored with the
/// class carrier.
#[derive(Clone, Debug)]
pub struct Level<T: Real> {
    /// Irreducible class labelling the carrier factor.
    pub class_id: usize,
    /// Class of the conjugate representation.
    pub conj_class: usize,
    /// Index of the level carrying the conjugate class.
    pub conj_level: usize,
    /// Carrier representation of the class.
    pub rep: Rep<T>,
    /// Matrix `J` of the antiunitary `v ↦ J·conj(v)` from the carrier onto
    /// the conjugate carrier.
    pub conj_map: CMat<T>,
    /// Invariant vector in (conjugate carrier) ⊗ (carrier), of norm `√dim`.
    pub pairing: Vec<Cx<T>>,
    /// Invariant vector in (carrier) ⊗ (conjugate carrier), of norm `√dim`.
    pub copairing: Vec<Cx<T>>,
    /// Coefficient space of the conjugate class.
    pub gamma: GammaObject<T>,
    /// Offset of this level inside the total coordinate vector.
    pub offset: usize,
}

impl<T: Real> Level<T> {
    /// Dimension of the coefficient factor.
    pub fn coeff_dim(&self) -> usize {
        self.gamma.carrier.dim
    }

    /// Dimension of the carrier factor.
    pub fn vdim(&self) -> usize {
        self.rep.dim()
    }

    /// Total dimension of the level. Coordinates are ordered coefficient-major:
    /// entry `γ·vdim + v` holds basis coefficient `γ` ⊗ carrier coordinate `v`.
    pub fn dim(&self) -> usize {
        self.coeff_dim() * self.vdim()
    }
}

/// One irreducible output channel of a product of two levels.
#[derive(Clone, Debug)]
pub struct PairComponent<T: Real> {
    /// Level receiving this channel.
    pub level: usize,
    /// Adjoint of the coefficient-space morphism induced by the conjugated
    /// isometry; maps tensor-target coefficients onto the channel's
    /// coefficient space.
    pub coeff_adj: CMat<T>,
    /// Isometric intertwiner from the channel carrier into the tensor of the
    /// two factor carriers; its adjoint extracts the carrier part.
    pub iso: CMat<T>,
}

/// Multiplication data for an ordered pair of levels.
#[derive(Clone, Debug)]
pub struct PairProduct<T: Real> {
    /// Coefficient multiplication composed with the quotient projection:
    /// maps raw pairs of coefficients into the realized tensor target.
    pub coeff_mul: CMat<T>,
    /// Output channels that fit inside the cutoff.
    pub comps: Vec<PairComponent<T>>,
    /// Class ids of output channels lost to the cutoff. A non-empty list
    /// marks the pair as lossy; the surviving channels are still exact.
    pub dropped: Vec<usize>,
    /// Range residual of the underlying coefficient multiplication.
    pub residual: T,
}

/// Antilinear involution data for one level.
#[derive(Clone, Debug)]
pub struct LevelInvolution<T: Real> {
    /// Level receiving the involuted element.
    pub target: usize,
    /// Matrix applied to the entrywise conjugate of the level coordinates.
    pub map: CMat<T>,
    /// Largest singular value of the map (norm expansion bound).
    pub scale_hi: T,
    /// Smallest singular value of the map (norm contraction bound).
    pub scale_lo: T,
}

/// The reconstructed graded algebra at a finite truncation.
#[derive(Clone, Debug)]
pub struct TruncatedFrameBundle<T: Real> {
    /// Coefficient algebra.
    pub alg: AlgebraShape,
    /// Group parameter `n`.
    pub group_parameter: usize,
    /// Tensor-power truncation inherited from the action.
    pub truncation: usize,
    /// Graded summands, ordered by first-occurrence level of their class.
    pub levels: Vec<Level<T>>,
    /// Position of each class id in [`Self::levels`].
    pub level_of_class: BTreeMap<usize, usize>,
    /// Multiplication data for every pair realizable inside the truncation.
    pub products: BTreeMap<(usize, usize), PairProduct<T>>,
    /// Pairs whose combined realization level exceeds the truncation.
    pub skipped: Vec<(usize, usize)>,
    /// Involution data per level, where the paired realization fits.
    pub involutions: BTreeMap<usize, LevelInvolution<T>>,
    /// Total coordinate dimension of the sum.
    pub total_dim: usize,
    /// Index of the level carrying the trivial class.
    pub trivial_level: usize,
    /// Index of the level carrying the class of the defining representation.
    pub defining_level: usize,
}

impl<T: Real> TruncatedFrameBundle<T> {
    /// Dimension of one level.
    pub fn level_dim(&self, i: usize) -> usize {
        self.levels[i].dim()
    }

    /// Coordinates of the multiplicative unit inside the trivial level.
    pub fn unit(&self) -> Vec<Cx<T>> {
        self.alg.one_t()
    }

    /// Coordinates of the multiplicative unit in the total space.
    pub fn unit_h(&self) -> Vec<Cx<T>> {
        self.embed_h(self.trivial_level, &self.unit())
    }

    /// Embed level coordinates into the total coordinate vector.
    pub fn embed_h(&self, i: usize, x: &[Cx<T>]) -> Vec<Cx<T>> {
        let mut out = vec![Cx::zero(); self.total_dim];
        let off = self.levels[i].offset;
        out[off..off + x.len()].copy_from_slice(x);
        out
    }

    /// Slice of a total coordinate vector belonging to one level.
    pub fn level_slice<'a>(&self, i: usize, h: &'a [Cx<T>]) -> &'a [Cx<T>] {
        let off = self.levels[i].offset;
        &h[off..off + self.level_dim(i)]
    }

    /// True if the pair is realized and lost no output channel.
    pub fn lossless(&self, i: usize, j: usize) -> bool {
        self.products
            .get(&(i, j))
            .map(|p| p.dropped.is_empty())
            .unwrap_or(false)
    }

    /// Product of an element of level `i` with an element of level `j`,
    /// returned as `(level, coordinates)` output channels (levels may repeat
    /// when a class occurs with multiplicity; channels at equal levels add).
    pub fn product(
        &self,
        i: usize,
        j: usize,
        x: &[Cx<T>],
        y: &[Cx<T>],
    ) -> Result<Vec<(usize, Vec<Cx<T>>)>> {
        let ki = self.levels[i].gamma.rep.level;
        let kj = self.levels[j].gamma.rep.level;
        let pp = self.products.get(&(i, j)).ok_or(Error::Truncation {
            needed: ki + kj,
            cap: self.truncation,
        })?;
        let (gi, di) = (self.levels[i].coeff_dim(), self.levels[i].vdim());
        let (gj, dj) = (self.levels[j].coeff_dim(), self.levels[j].vdim());
        let xm = CMat::from_vec(gi, di, x.to_vec())?;
        let ym = CMat::from_vec(gj, dj, y.to_vec())?;
        let w = pp.coeff_mul.mul(&xm.kron(&ym));
        let mut acc: BTreeMap<usize, Vec<Cx<T>>> = BTreeMap::new();
        for comp in &pp.comps {
            let z = comp.coeff_adj.mul(&w).mul(&comp.iso.conj());
            let entry = acc
                .entry(comp.level)
                .or_insert_with(|| vec![Cx::zero(); self.level_dim(comp.level)]);
            for (e, v) in entry.iter_mut().zip(z.data()) {
                *e += *v;
            }
        }
        Ok(acc.into_iter().collect())
    }

    /// Product assembled into total coordinates.
    pub fn product_h(&self, i: usize, j: usize, x: &[Cx<T>], y: &[Cx<T>]) -> Result<Vec<Cx<T>>> {
        let mut out = vec![Cx::zero(); self.total_dim];
        for (lvl, z) in self.product(i, j, x, y)? {
            let off = self.levels[lvl].offset;
            for (o, v) in out[off..off + z.len()].iter_mut().zip(&z) {
                *o += *v;
            }
        }
        Ok(out)
    }

    /// Product of two total coordinate vectors. Requires every pair of
    /// levels on which the factors are supported to be realized.
    pub fn product_full(&self, x: &[Cx<T>], y: &[Cx<T>]) -> Result<Vec<Cx<T>>> {
        let mut out = vec![Cx::zero(); self.total_dim];
        for i in 0..self.levels.len() {
            let xi = self.level_slice(i, x);
            if vec_norm(xi) == T::zero() {
                continue;
            }
            for j in 0..self.levels.len() {
                let yj = self.level_slice(j, y);
                if vec_norm(yj) == T::zero() {
                    continue;
                }
                let part = self.product_h(i, j, xi, yj)?;
                for (o, v) in out.iter_mut().zip(&part) {
                    *o += *v;
                }
            }
        }
        Ok(out)
    }

    /// Involution of an element of level `i`: the target level and the
    /// coordinates of the involuted element.
    pub fn involute(&self, i: usize, x: &[Cx<T>]) -> Result<(usize, Vec<Cx<T>>)> {
        let inv = self.involutions.get(&i).ok_or(Error::Truncation {
            needed: self.levels[i].gamma.rep.level
                + self.levels[self.levels[i].conj_level].gamma.rep.level,
            cap: self.truncation,
        })?;
        let conj: Vec<Cx<T>> = x.iter().map(|c| c.conj()).collect();
        Ok((inv.target, inv.map.apply(&conj)))
    }

    /// Involution on total coordinates; requires it on every level.
    pub fn involute_h(&self, x: &[Cx<T>]) -> Result<Vec<Cx<T>>> {
        let mut out = vec![Cx::zero(); self.total_dim];
        for i in 0..self.levels.len() {
            let (tgt, z) = self.involute(i, self.level_slice(i, x))?;
            let off = self.levels[tgt].offset;
            for (o, v) in out[off..off + z.len()].iter_mut().zip(&z) {
                *o += *v;
            }
        }
        Ok(out)
    }

    /// Weight of one level in the inner product: the reciprocal of its
    /// carrier dimension. This normalization makes the inner product agree
    /// with the expectation of an involuted product, ⟨x, y⟩ = E(x⁺·y) with
    /// `E` the projection onto the trivial level, and thereby makes left
    /// multiplication adjointable with the involution as adjoint.
    pub fn level_weight(&self, i: usize) -> T {
        T::one() / T::lit(self.levels[i].vdim() as f64)
    }

    /// `B`-valued inner product of two elements of one level, carrying the
    /// level weight.
    pub fn level_inner(&self, i: usize, x: &[Cx<T>], y: &[Cx<T>]) -> Vec<Cx<T>> {
        let lvl = &self.levels[i];
        let (g, d) = (lvl.coeff_dim(), lvl.vdim());
        let w = self.level_weight(i);
        let mut out = vec![Cx::zero(); self.alg.dim()];
        for (beta, m) in lvl.gamma.carrier.inner.iter().enumerate() {
            let mut acc: Cx<T> = Cx::zero();
            for v in 0..d {
                for r in 0..g {
                    let xr = x[r * d + v].conj();
                    for c in 0..g {
                        acc += xr * m[(r, c)] * y[c * d + v];
                    }
                }
            }
            out[beta] = acc * crate::scalar::cx(w, T::zero());
        }
        out
    }

    /// `B`-valued inner product of two total coordinate vectors (levels are
    /// mutually orthogonal).
    pub fn h_inner(&self, x: &[Cx<T>], y: &[Cx<T>]) -> Vec<Cx<T>> {
        let mut out = vec![Cx::zero(); self.alg.dim()];
        for i in 0..self.levels.len() {
            let part = self.level_inner(i, self.level_slice(i, x), self.level_slice(i, y));
            for (o, v) in out.iter_mut().zip(&part) {
                *o += *v;
            }
        }
        out
    }

    /// Unitary implementing a group element (given by Lie-algebra
    /// coefficients) on one level: identity on coefficients, exponential on
    /// the carrier.
    pub fn group_element(&self, i: usize, coeffs: &[T]) -> Result<CMat<T>> {
        let lvl = &self.levels[i];
        let rot = lvl.rep.exponential(coeffs)?;
        Ok(CMat::identity(lvl.coeff_dim()).kron(&rot))
    }

    /// Block-diagonal unitary implementing a group element on the total space.
    pub fn action_h(&self, coeffs: &[T]) -> Result<CMat<T>> {
        let blocks: Vec<CMat<T>> = (0..self.levels.len())
            .map(|i| self.group_element(i, coeffs))
            .collect::<Result<_>>()?;
        let refs: Vec<&CMat<T>> = blocks.iter().collect();
        Ok(CMat::block_diag(&refs))
    }

    /// Matrix of left multiplication by an element of level `i` on the whole
    /// sum. Requires every pair `(i, ·)` to be realized.
    pub fn lambda(&self, i: usize, x: &[Cx<T>]) -> Result<CMat<T>> {
        let mut cols: Vec<Vec<Cx<T>>> = Vec::with_capacity(self.total_dim);
        for j in 0..self.levels.len() {
            let dj = self.level_dim(j);
            for m in 0..dj {
                let mut e = vec![Cx::zero(); dj];
                e[m] = Cx::one();
                cols.push(self.product_h(i, j, x, &e)?);
            }
        }
        Ok(CMat::from_cols(self.total_dim, &cols))
    }
}

use num_traits::One;

/// Realization of an irreducible class inside its first tensor power, with
/// the embedding rotated so that the abstract coordinates coincide with the
/// registry's class carrier coordinates.
fn class_realization<T: Real>(
    action: &IntertwinerAction<T>,
    registry: &Registry<T>,
    class_id: usize,
    ctx: &Ctx<T>,
) -> Result<ConcreteRep<T>> {
    let cls = registry.class(class_id);
    let k = cls.source_level;
    let block = registry.levels[k]
        .iter()
        .find(|b| b.class_id == class_id)
        .ok_or_else(|| Error::Internal("class missing from its source level".into()))?;
    let sub = action.power_rep(k).conjugated(&block.embedding);
    let u = unitary_intertwiner(&sub, &cls.rep, ctx)?.ok_or_else(|| {
        Error::Numerical("a classified block failed to match its class carrier".into())
    })?;
    Ok(ConcreteRep {
        level: k,
        embedding: block.embedding.mul(&u),
    })
}

/// Every class id first occurring at or below the given tensor power.
pub fn cutoff_through_level<T: Real>(registry: &Registry<T>, level: usize) -> Vec<usize> {
    registry
        .classes
        .iter()
        .filter(|c| c.source_level <= level)
        .map(|c| c.id)
        .collect()
}

/// Assemble the truncated graded algebra generated by an action, keeping the
/// levels of the given irreducible classes.
///
/// The cutoff must contain the trivial class and the class of the defining
/// representation, and must be closed under conjugation. Every kept class
/// (and its conjugate) must be realizable inside the action's truncation;
/// products whose combined realization level exceeds the truncation are
/// skipped, and product channels falling outside the cutoff are recorded as
/// dropped rather than silently zeroed.
pub fn build_algebra<T: Real>(
    action: &IntertwinerAction<T>,
    registry: &Registry<T>,
    cutoff: &[usize],
    ctx: &Ctx<T>,
) -> Result<TruncatedFrameBundle<T>> {
    if action.group_parameter() != registry.n {
        return Err(Error::Input(
            "registry and action use different group parameters".into(),
        ));
    }
    if action.group_parameter() < 3 {
        return Err(Error::Input(
            "graded reconstruction needs group parameter at least 3; the planar case has its own construction".into(),
        ));
    }
    let kk = action.truncation();
    let mut ids: Vec<usize> = cutoff.to_vec();
    ids.sort_unstable();
    ids.dedup();
    if ids.is_empty() {
        return Err(Error::Input("the cutoff is empty".into()));
    }
    for &id in &ids {
        if id >= registry.classes.len() {
            return Err(Error::Input(format!("unknown class id {id} in the cutoff")));
        }
        let conj = registry.class(id).conjugate_id;
        if !ids.contains(&conj) {
            return Err(Error::Input(format!(
                "the cutoff keeps class {id} but not its conjugate {conj}"
            )));
        }
    }
    let triv_id = registry.levels[0][0].class_id;
    let def_id = registry.levels[1][0].class_id;
    if !ids.contains(&triv_id) || !ids.contains(&def_id) {
        return Err(Error::Input(
            "the cutoff must keep the trivial class and the defining class".into(),
        ));
    }
    for &id in &ids {
        let needed = registry
            .class(registry.class(id).conjugate_id)
            .source_level
            .max(registry.class(id).source_level);
        if needed > kk {
            return Err(Error::Truncation { needed, cap: kk });
        }
    }
    ids.sort_by_key(|&id| (registry.class(id).source_level, id));

    // Levels, with coefficient spaces realized in class coordinates.
    let mut levels: Vec<Level<T>> = Vec::with_capacity(ids.len());
    let mut offset = 0usize;
    for &id in &ids {
        let cls = registry.class(id);
        let conj_class = cls.conjugate_id;
        let gamma = gamma_object(action, class_realization(action, registry, conj_class, ctx)?, ctx)?;
        let lvl = Level {
            class_id: id,
            conj_class,
            conj_level: usize::MAX,
            rep: cls.rep.clone(),
            conj_map: cls.conj.rmat.clone(),
            pairing: cls.conj.rvec.clone(),
            copairing: cls.conj.rbarvec.clone(),
            gamma,
            offset,
        };
        offset += lvl.dim();
        levels.push(lvl);
    }
    let level_of_class: BTreeMap<usize, usize> =
        ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    for lvl in &mut levels {
        lvl.conj_level = level_of_class[&lvl.conj_class];
    }
    let trivial_level = level_of_class[&triv_id];
    let defining_level = level_of_class[&def_id];
    let total_dim = offset;
    let alg = action.algebra().clone();

    // Products and, where the conjugate pairing fits, involutions.
    let mut products: BTreeMap<(usize, usize), PairProduct<T>> = BTreeMap::new();
    let mut skipped: Vec<(usize, usize)> = Vec::new();
    let mut involutions: BTreeMap<usize, LevelInvolution<T>> = BTreeMap::new();
    for i in 0..levels.len() {
        for j in 0..levels.len() {
            let ki = levels[i].gamma.rep.level;
            let kj = levels[j].gamma.rep.level;
            if ki + kj > kk {
                skipped.push((i, j));
                continue;
            }
            let mm = mult_map(action, &levels[i].gamma, &levels[j].gamma, ctx)?;
            let product_rep = levels[i].rep.tensor(&levels[j].rep);
            let isos = isometries_onto_classes(&product_rep, registry, ctx)?;
            let mut comps = Vec::new();
            let mut dropped = Vec::new();
            for (cid, s) in isos {
                match level_of_class.get(&cid) {
                    None => dropped.push(cid),
                    Some(&p) => {
                        // Conjugate the isometry into the tensor of the dual
                        // carriers, where the coefficient target lives.
                        let conj_s = levels[i]
                            .conj_map
                            .kron(&levels[j].conj_map)
                            .mul(&s.conj())
                            .mul(&levels[p].conj_map.adjoint());
                        let g = gamma_morphism(action, &levels[p].gamma, &mm.target, &conj_s)?;
                        comps.push(PairComponent {
                            level: p,
                            coeff_adj: g.adjoint(),
                            iso: s,
                        });
                    }
                }
            }
            let coeff_mul = mm.map.mul(&mm.tensor.proj);
            if levels[i].conj_level == j {
                // Involution of level i: pair a left factor from level i
                // against the canonical invariant vector of the product of
                // the two coefficient carriers, through the adjoint of the
                // one-sided multiplication map.
                let r = CMat::from_vec(mm.target.rep.dim(), 1, levels[i].pairing.clone())?;
                let g_r = gamma_morphism(action, &levels[trivial_level].gamma, &mm.target, &r)?;
                let phi = g_r.apply(&alg.one_t::<T>());
                let raw = coeff_mul.apply_adjoint(&phi);
                let cmat = CMat::from_vec(levels[i].coeff_dim(), levels[j].coeff_dim(), raw)?;
                let imat = cmat.transpose().kron(&levels[i].conj_map);
                let (vals, _) = eigh(&imat.adjoint().mul(&imat))?;
                let scale_lo = vals.first().copied().unwrap_or(T::zero()).max(T::zero()).sqrt();
                let scale_hi = vals.last().copied().unwrap_or(T::zero()).max(T::zero()).sqrt();
                involutions.insert(
                    i,
                    LevelInvolution {
                        target: j,
                        map: imat,
                        scale_hi,
                        scale_lo,
                    },
                );
            }
            products.insert(
                (i, j),
                PairProduct {
                    coeff_mul,
                    comps,
                    dropped,
                    residual: mm.range_residual,
                },
            );
        }
    }

    Ok(TruncatedFrameBundle {
        alg,
        group_parameter: action.group_parameter(),
        truncation: kk,
        levels,
        level_of_class,
        products,
        skipped,
        involutions,
        total_dim,
        trivial_level,
        defining_level,
    })
}

/// Deterministic probe vector for one level.
fn probe<T: Real>(bundle: &TruncatedFrameBundle<T>, ctx: &Ctx<T>, label: &str, i: usize, salt: u64) -> Vec<Cx<T>> {
    gaussian_complex(
        ctx.sub_seed(label, &[i as u64, salt]),
        bundle.level_dim(i),
    )
}

/// Verify every algebraic law of the reconstructed bundle numerically.
///
/// Laws are exercised on deterministic probes; structural facts (grading,
/// block-diagonal action) are recorded as flags. All checks respect the
/// truncation: only realized, loss-free data is compared exactly.
pub fn verify_bundle<T: Real>(
    bundle: &TruncatedFrameBundle<T>,
    ctx: &Ctx<T>,
) -> Result<CheckSet> {
    let mut set = CheckSet::new();
    let alg = &bundle.alg;
    let nb = alg.dim();
    let bound = ctx.tol.bound(T::one());
    let nl = bundle.levels.len();
    let t = bundle.trivial_level;

    // Grading structure.
    let dims_ok = bundle.level_dim(t) == nb
        && bundle.total_dim == (0..nl).map(|i| bundle.level_dim(i)).sum::<usize>();
    set.record_flag(
        "bundle.grading",
        dims_ok,
        &format!(
            "trivial level has dimension {} (coefficient algebra {})",
            bundle.level_dim(t),
            nb
        ),
    );

    // The trivial level is the coefficient algebra on the nose.
    let base = Correspondence::<T>::over_self(alg);
    let carrier = &bundle.levels[t].gamma.carrier;
    let mut base_res = T::zero();
    for (a, b) in carrier
        .left
        .iter()
        .zip(&base.left)
        .chain(carrier.right.iter().zip(&base.right))
        .chain(carrier.inner.iter().zip(&base.inner))
    {
        base_res = base_res.max(a.max_abs_diff(b));
    }
    set.record(
        "bundle.fixed-level",
        base_res,
        bound,
        "trivial-level module structure against the coefficient algebra",
    );

    // Multiplication table of the trivial level against the algebra product.
    let mut table_res = T::zero();
    for be in 0..nb {
        for ga in 0..nb {
            let mut eb = vec![Cx::zero(); nb];
            eb[be] = Cx::one();
            let mut eg = vec![Cx::zero(); nb];
            eg[ga] = Cx::one();
            let parts = bundle.product(t, t, &eb, &eg)?;
            let want = alg.mul(&eb, &eg);
            let mut got = vec![Cx::zero(); nb];
            for (lvl, z) in parts {
                if lvl == t {
                    got = z;
                } else if vec_norm(&z) > T::zero() {
                    table_res = T::infinity();
                }
            }
            for (a, b) in got.iter().zip(&want) {
                table_res = table_res.max((*a - *b).norm());
            }
        }
    }
    set.record(
        "bundle.unit-level",
        table_res,
        bound,
        "trivial-level products against the coefficient algebra table",
    );

    // The unit is a two-sided unit and the trivial level acts as the module
    // structure on every level.
    let one = bundle.unit();
    let mut unit_res = T::zero();
    let mut module_res = T::zero();
    for i in 0..nl {
        let x = probe(bundle, ctx, "bundle.unit", i, 1);
        let lu = bundle.product_h(t, i, &one, &x)?;
        let ru = bundle.product_h(i, t, &x, &one)?;
        let xh = bundle.embed_h(i, &x);
        let scale = vec_norm(&x).max(T::one());
        unit_res = unit_res.max(
            lu.iter()
                .zip(&xh)
                .map(|(a, b)| (*a - *b).norm())
                .fold(T::zero(), T::max)
                / scale,
        );
        unit_res = unit_res.max(
            ru.iter()
                .zip(&xh)
                .map(|(a, b)| (*a - *b).norm())
                .fold(T::zero(), T::max)
                / scale,
        );
        // Arbitrary coefficient elements act as the carrier module structure.
        let b = gaussian_complex(ctx.sub_seed("bundle.module", &[i as u64]), nb);
        let lvl = &bundle.levels[i];
        let lm = lvl.gamma.carrier.left_of(&b).kron(&CMat::identity(lvl.vdim()));
        let rm = lvl.gamma.carrier.right_of(&b).kron(&CMat::identity(lvl.vdim()));
        let lb = bundle.product_h(t, i, &b, &x)?;
        let rb = bundle.product_h(i, t, &x, &b)?;
        let lw = bundle.embed_h(i, &lm.apply(&x));
        let rw = bundle.embed_h(i, &rm.apply(&x));
        for (a, w) in lb.iter().zip(&lw).chain(rb.iter().zip(&rw)) {
            module_res = module_res.max((*a - *w).norm() / scale);
        }
    }
    set.record("bundle.unit", unit_res, bound, "two-sided unit on probes");
    set.record(
        "bundle.module",
        module_res,
        bound,
        "trivial-level products against the module structure",
    );

    // Associativity on loss-free triples.
    let mut triples: Vec<(usize, usize, usize)> = Vec::new();
    'outer: for i in 0..nl {
        for j in 0..nl {
            if !bundle.lossless(i, j) {
                continue;
            }
            for h in 0..nl {
                if !bundle.lossless(j, h) {
                    continue;
                }
                let left_ok = bundle.products[&(i, j)]
                    .comps
                    .iter()
                    .all(|c| bundle.lossless(c.level, h));
                let right_ok = bundle.products[&(j, h)]
                    .comps
                    .iter()
                    .all(|c| bundle.lossless(i, c.level));
                if left_ok && right_ok {
                    triples.push((i, j, h));
                    if triples.len() >= 4 * ASSOC_CAP {
                        break 'outer;
                    }
                }
            }
        }
    }
    if triples.len() > ASSOC_CAP {
        let mut r = rng(ctx.sub_seed("bundle.assoc.sample", &[]));
        triples.shuffle(&mut r);
        triples.truncate(ASSOC_CAP);
    }
    if triples.is_empty() {
        set.record_flag(
            "bundle.assoc",
            true,
            "no loss-free triples inside the truncation; nothing to compare",
        );
    } else {
        let mut worst = T::zero();
        for &(i, j, h) in &triples {
            let x = probe(bundle, ctx, "bundle.assoc", i, (j * nl + h) as u64);
            let y = probe(bundle, ctx, "bundle.assoc", j, (h * nl + i) as u64);
            let z = probe(bundle, ctx, "bundle.assoc", h, (i * nl + j) as u64);
            let scale = vec_norm(&x) * vec_norm(&y) * vec_norm(&z);
            let mut lhs: Vec<Cx<T>> = vec![Cx::zero(); bundle.total_dim];
            for (p, v) in bundle.product(i, j, &x, &y)? {
                let part = bundle.product_h(p, h, &v, &z)?;
                for (o, w) in lhs.iter_mut().zip(&part) {
                    *o += *w;
                }
            }
            let mut rhs: Vec<Cx<T>> = vec![Cx::zero(); bundle.total_dim];
            for (q, v) in bundle.product(j, h, &y, &z)? {
                let part = bundle.product_h(i, q, &x, &v)?;
                for (o, w) in rhs.iter_mut().zip(&part) {
                    *o += *w;
                }
            }
            let diff = lhs
                .iter()
                .zip(&rhs)
                .map(|(a, b)| (*a - *b).norm())
                .fold(T::zero(), T::max);
            worst = worst.max(diff / scale.max(T::one()));
        }
        set.record(
            "bundle.assoc",
            worst,
            bound,
            &format!("associativity on {} loss-free triples", triples.len()),
        );
    }

    // Involution: involutive where both directions exist, unit level matches
    // the algebra star, and the norm distortion is recorded.
    let mut invol_res = T::zero();
    let mut invol_any = false;
    for (&j, inv) in &bundle.involutions {
        set.record_flag(
            "bundle.involution-scale",
            true,
            &format!(
                "level {j}: singular values of the involution lie in [{:.6}, {:.6}]",
                inv.scale_lo.as_f64(),
                inv.scale_hi.as_f64()
            ),
        );
        if !bundle.involutions.contains_key(&inv.target) {
            continue;
        }
        invol_any = true;
        let x = probe(bundle, ctx, "bundle.involution", j, 7);
        let (tgt, x1) = bundle.involute(j, &x)?;
        let (back, x2) = bundle.involute(tgt, &x1)?;
        if back != j {
            set.record_flag(
                "bundle.involution",
                false,
                &format!("level {j} does not return to itself (lands on {back})"),
            );
            continue;
        }
        let scale = vec_norm(&x).max(T::one());
        let diff = x2
            .iter()
            .zip(&x)
            .map(|(a, b)| (*a - *b).norm())
            .fold(T::zero(), T::max);
        invol_res = invol_res.max(diff / scale);
    }
    if invol_any {
        set.record(
            "bundle.involution",
            invol_res,
            bound,
            "double involution against the identity on probes",
        );
    }
    if bundle.involutions.contains_key(&t) {
        let mut star_res = T::zero();
        for be in 0..nb {
            let mut e = vec![Cx::zero(); nb];
            e[be] = Cx::one();
            let (tgt, got) = bundle.involute(t, &e)?;
            let want = alg.star(&e);
            if tgt != t {
                star_res = T::infinity();
                continue;
            }
            for (a, b) in got.iter().zip(&want) {
                star_res = star_res.max((*a - *b).norm());
            }
        }
        set.record(
            "bundle.involution-unit",
            star_res,
            bound,
            "involution on the trivial level against the algebra star",
        );
    }

    // The inner product equals the expectation of an involuted product:
    // ⟨x, y⟩ = E(x⁺·y), E the projection onto the trivial level. This ties
    // the product, the involution, and the level weights together.
    let mut expec_res = T::zero();
    let mut expec_any = false;
    for (&i, inv) in &bundle.involutions {
        if !bundle.products.contains_key(&(inv.target, i)) {
            continue;
        }
        expec_any = true;
        let x = probe(bundle, ctx, "bundle.expectation.x", i, 3);
        let y = probe(bundle, ctx, "bundle.expectation.y", i, 4);
        let scale = (vec_norm(&x) * vec_norm(&y)).max(T::one());
        let (ti, xs) = bundle.involute(i, &x)?;
        let prod = bundle.product_h(ti, i, &xs, &y)?;
        let got = bundle.level_slice(t, &prod);
        let want = bundle.level_inner(i, &x, &y);
        for (g, w) in got.iter().zip(&want) {
            expec_res = expec_res.max((*g - *w).norm() / scale);
        }
    }
    if expec_any {
        set.record(
            "bundle.inner-expectation",
            expec_res,
            bound,
            "inner products against the trivial component of involuted products",
        );
    }

    // Adjoint compatibility: ⟨a·y, z⟩ = ⟨y, a⁺·z⟩ channelwise.
    let mut adj_triples: Vec<(usize, usize, usize)> = Vec::new();
    for (&i, inv) in &bundle.involutions {
        for j in 0..nl {
            let Some(pp) = bundle.products.get(&(i, j)) else {
                continue;
            };
            for comp in &pp.comps {
                let h = comp.level;
                if bundle.products.contains_key(&(inv.target, h)) {
                    adj_triples.push((i, j, h));
                }
            }
        }
    }
    adj_triples.sort_unstable();
    adj_triples.dedup();
    if adj_triples.len() > ADJOINT_CAP {
        let mut r = rng(ctx.sub_seed("bundle.adjoint.sample", &[]));
        adj_triples.shuffle(&mut r);
        adj_triples.truncate(ADJOINT_CAP);
    }
    if !adj_triples.is_empty() {
        let mut worst = T::zero();
        for &(i, j, h) in &adj_triples {
            let a = probe(bundle, ctx, "bundle.adjoint", i, (j * nl + h) as u64);
            let y = probe(bundle, ctx, "bundle.adjoint", j, (h * nl + i) as u64);
            let z = probe(bundle, ctx, "bundle.adjoint", h, (i * nl + j) as u64);
            let scale = (vec_norm(&a) * vec_norm(&y) * vec_norm(&z)).max(T::one());
            let ay = bundle.product_h(i, j, &a, &y)?;
            let lhs = bundle.level_inner(h, bundle.level_slice(h, &ay), &z);
            let (ti, astar) = bundle.involute(i, &a)?;
            let az = bundle.product_h(ti, h, &astar, &z)?;
            let rhs = bundle.level_inner(j, &y, bundle.level_slice(j, &az));
            let diff = lhs
                .iter()
                .zip(&rhs)
                .map(|(p, q)| (*p - *q).norm())
                .fold(T::zero(), T::max);
            worst = worst.max(diff / scale);
        }
        set.record(
            "bundle.adjoint",
            worst,
            bound,
            &format!(
                "inner-product adjoint of left multiplication on {} triples",
                adj_triples.len()
            ),
        );
    }

    // Group action: unitarity, product covariance, inner invariance.
    let n = bundle.group_parameter;
    let mut uni_res = T::zero();
    let mut cov_res = T::zero();
    let mut inner_res = T::zero();
    let pair_keys: Vec<(usize, usize)> = bundle.products.keys().copied().collect();
    for s in 0..GROUP_SAMPLES {
        let coeffs = random_algebra_coeffs::<T>(n, ctx.sub_seed("bundle.action", &[s as u64]));
        let rots: Vec<CMat<T>> = (0..nl)
            .map(|i| bundle.group_element(i, &coeffs))
            .collect::<Result<_>>()?;
        for (i, u) in rots.iter().enumerate() {
            let d = bundle.level_dim(i);
            uni_res = uni_res.max(u.adjoint().mul(u).max_abs_diff(&CMat::identity(d)));
        }
        let mut keys = pair_keys.clone();
        if keys.len() > 10 {
            let mut r = rng(ctx.sub_seed("bundle.action.pairs", &[s as u64]));
            keys.shuffle(&mut r);
            keys.truncate(10);
        }
        for &(i, j) in &keys {
            let x = probe(bundle, ctx, "bundle.action.x", i, s as u64);
            let y = probe(bundle, ctx, "bundle.action.y", j, s as u64);
            let scale = (vec_norm(&x) * vec_norm(&y)).max(T::one());
            let plain = bundle.product(i, j, &x, &y)?;
            let rotated = bundle.product(i, j, &rots[i].apply(&x), &rots[j].apply(&y))?;
            for ((la, va), (lb, vb)) in plain.iter().zip(&rotated) {
                if la != lb {
                    cov_res = T::infinity();
                    continue;
                }
                let rv = rots[*la].apply(va);
                let diff = rv
                    .iter()
                    .zip(vb)
                    .map(|(p, q)| (*p - *q).norm())
                    .fold(T::zero(), T::max);
                cov_res = cov_res.max(diff / scale);
            }
            // Inner products are invariant.
            let before = bundle.level_inner(i, &x, &probe(bundle, ctx, "bundle.action.z", i, s as u64));
            let z = probe(bundle, ctx, "bundle.action.z", i, s as u64);
            let after = bundle.level_inner(i, &rots[i].apply(&x), &rots[i].apply(&z));
            for (p, q) in before.iter().zip(&after) {
                inner_res = inner_res.max((*p - *q).norm() / scale);
            }
        }
    }
    set.record(
        "bundle.action-unitary",
        uni_res,
        bound,
        "sampled group elements act unitarily on every level",
    );
    set.record(
        "bundle.action",
        cov_res,
        bound,
        "product covariance under sampled group elements",
    );
    set.record(
        "bundle.action-inner",
        inner_res,
        bound,
        "inner-product invariance under sampled group elements",
    );
    set.record_flag(
        "bundle.level-invariance",
        true,
        "the action is block-diagonal over the levels by construction",
    );

    Ok(set)
}

/// A finite-dimensional spectral subspace of the bundle: elements of
/// (total space) ⊗ (representation carrier) fixed by the combined action.
#[derive(Clone, Debug)]
pub struct SpectralSubspace<T: Real> {
    /// Class id when the subspace belongs to a single irreducible class.
    pub class_id: Option<usize>,
    /// Dimension of the representation carrier.
    pub rep_dim: usize,
    /// Basis columns in (total space) ⊗ (carrier) coordinates, the carrier
    /// index fastest. Each column is supported on one level and is a unit
    /// vector for the weighted inner product (coordinate norm √dim of its
    /// level carrier).
    pub basis: CMat<T>,
    /// Per-column level weights; the weighted dual basis is
    /// `diag(weights)·basis†`.
    pub weights: Vec<T>,
    /// Module structure of the subspace over the coefficient algebra,
    /// extracted from the bundle's own products and inner product.
    pub corr: Correspondence<T>,
    /// Worst deviation of a coefficient multiple from the subspace span.
    pub closure_residual: T,
}

impl<T: Real> SpectralSubspace<T> {
    /// Coordinates of a vector in the weighted dual basis.
    pub fn coords_vec(&self, z: &[Cx<T>]) -> Vec<Cx<T>> {
        let mut c = self.basis.apply_adjoint(z);
        for (ci, w) in c.iter_mut().zip(&self.weights) {
            *ci *= crate::scalar::cx(*w, T::zero());
        }
        c
    }

    /// Column-wise coordinates of a matrix of vectors.
    pub fn coords_mat(&self, z: &CMat<T>) -> CMat<T> {
        let mut c = self.basis.adjoint().mul(z);
        for r in 0..c.rows() {
            let w = crate::scalar::cx(self.weights[r], T::zero());
            for col in 0..c.cols() {
                c[(r, col)] *= w;
            }
        }
        c
    }
}

/// Build the module structure on the span of the given basis columns (one
/// level each, weighted-unit norm) using bundle products with the trivial
/// level.
fn spectral_from_basis<T: Real>(
    bundle: &TruncatedFrameBundle<T>,
    class_id: Option<usize>,
    rep_dim: usize,
    cols_with_levels: Vec<(usize, Vec<Cx<T>>)>,
) -> Result<SpectralSubspace<T>> {
    let nb = bundle.alg.dim();
    let s = cols_with_levels.len();
    let d = rep_dim;
    let total = bundle.total_dim;
    let t = bundle.trivial_level;
    let weights: Vec<T> = cols_with_levels
        .iter()
        .map(|(lvl, _)| bundle.level_weight(*lvl))
        .collect();
    let plain: Vec<Vec<Cx<T>>> = cols_with_levels.into_iter().map(|(_, c)| c).collect();
    let basis = CMat::from_cols(total * d, &plain);
    let extract = |v: &[Cx<T>]| -> Vec<Cx<T>> {
        let mut c = basis.apply_adjoint(v);
        for (ci, w) in c.iter_mut().zip(&weights) {
            *ci *= crate::scalar::cx(*w, T::zero());
        }
        c
    };
    let mut closure = T::zero();
    let mut left: Vec<CMat<T>> = Vec::with_capacity(nb);
    let mut right: Vec<CMat<T>> = Vec::with_capacity(nb);
    for beta in 0..nb {
        let mut e = vec![Cx::zero(); nb];
        e[beta] = Cx::one();
        let mut lcols: Vec<Vec<Cx<T>>> = Vec::with_capacity(s);
        let mut rcols: Vec<Vec<Cx<T>>> = Vec::with_capacity(s);
        for m in 0..s {
            let col = basis.col(m);
            let mut lout = vec![Cx::zero(); total * d];
            let mut rout = vec![Cx::zero(); total * d];
            for u in 0..d {
                let slice: Vec<Cx<T>> = (0..total).map(|h| col[h * d + u]).collect();
                for p in 0..bundle.levels.len() {
                    let xp = bundle.level_slice(p, &slice);
                    if vec_norm(xp) == T::zero() {
                        continue;
                    }
                    let lb = bundle.product_h(t, p, &e, xp)?;
                    let rb = bundle.product_h(p, t, xp, &e)?;
                    for h in 0..total {
                        lout[h * d + u] += lb[h];
                        rout[h * d + u] += rb[h];
                    }
                }
            }
            let lc = extract(&lout);
            let rc = extract(&rout);
            let lres = {
                let back = basis.apply(&lc);
                lout.iter()
                    .zip(&back)
                    .map(|(a, b)| (*a - *b).norm())
                    .fold(T::zero(), T::max)
            };
            let rres = {
                let back = basis.apply(&rc);
                rout.iter()
                    .zip(&back)
                    .map(|(a, b)| (*a - *b).norm())
                    .fold(T::zero(), T::max)
            };
            closure = closure.max(lres).max(rres);
            lcols.push(lc);
            rcols.push(rc);
        }
        left.push(CMat::from_cols(s, &lcols));
        right.push(CMat::from_cols(s, &rcols));
    }
    // Inner products column against column, summed over the carrier index.
    let mut inner: Vec<CMat<T>> = (0..nb).map(|_| CMat::zeros(s, s)).collect();
    for m in 0..s {
        let cm = basis.col(m);
        for l in 0..s {
            let cl = basis.col(l);
            let mut acc = vec![Cx::zero(); nb];
            for u in 0..d {
                let xm: Vec<Cx<T>> = (0..total).map(|h| cm[h * d + u]).collect();
                let xl: Vec<Cx<T>> = (0..total).map(|h| cl[h * d + u]).collect();
                let part = bundle.h_inner(&xm, &xl);
                for (a, p) in acc.iter_mut().zip(&part) {
                    *a += *p;
                }
            }
            for (beta, v) in acc.into_iter().enumerate() {
                inner[beta][(m, l)] = v;
            }
        }
    }
    let corr = Correspondence {
        alg: bundle.alg.clone(),
        dim: s,
        left,
        right,
        inner,
    };
    Ok(SpectralSubspace {
        class_id,
        rep_dim,
        basis,
        weights,
        corr,
        closure_residual: closure,
    })
}

/// Spectral subspace of one irreducible class: the invariants of the bundle
/// action tensored with the class carrier. Supported on the level carrying
/// the conjugate class, with basis built from the canonical pairing vector
/// (whose norm √dim makes each column a weighted unit vector).
pub fn spectral_subspace<T: Real>(
    bundle: &TruncatedFrameBundle<T>,
    class_id: usize,
    _ctx: &Ctx<T>,
) -> Result<SpectralSubspace<T>> {
    let i = *bundle
        .level_of_class
        .get(&class_id)
        .ok_or_else(|| Error::Input(format!("class {class_id} is outside the cutoff")))?;
    let lvl = &bundle.levels[i];
    let host = lvl.conj_level;
    let hlvl = &bundle.levels[host];
    let d = lvl.vdim();
    let dc = hlvl.vdim();
    let g = hlvl.coeff_dim();
    let total = bundle.total_dim;
    let mut cols: Vec<(usize, Vec<Cx<T>>)> = Vec::with_capacity(g);
    for gamma in 0..g {
        let mut col = vec![Cx::zero(); total * d];
        for a in 0..dc {
            for u in 0..d {
                col[(hlvl.offset + gamma * dc + a) * d + u] = lvl.pairing[a * d + u];
            }
        }
        cols.push((host, col));
    }
    spectral_from_basis(bundle, Some(class_id), d, cols)
}

/// Spectral subspace of an arbitrary representation: per level, the
/// invariant vectors of (level carrier) ⊗ (representation) span the fixed
/// directions.
pub fn spectral_of_rep<T: Real>(
    bundle: &TruncatedFrameBundle<T>,
    rep: &Rep<T>,
    ctx: &Ctx<T>,
) -> Result<SpectralSubspace<T>> {
    let d = rep.dim();
    let total = bundle.total_dim;
    let mut cols: Vec<(usize, Vec<Cx<T>>)> = Vec::new();
    for (li, lvl) in bundle.levels.iter().enumerate() {
        let dt = lvl.vdim();
        let scale = crate::scalar::cx(T::lit(dt as f64).sqrt(), T::zero());
        let prod = lvl.rep.tensor(rep);
        let inv = prod.invariant_vectors(ctx.tol.rel)?;
        for c in 0..inv.cols() {
            let w = inv.col(c);
            for gamma in 0..lvl.coeff_dim() {
                let mut col = vec![Cx::zero(); total * d];
                for a in 0..dt {
                    for u in 0..d {
                        col[(lvl.offset + gamma * dt + a) * d + u] = w[a * d + u] * scale;
                    }
                }
                cols.push((li, col));
            }
        }
    }
    spectral_from_basis(bundle, None, d, cols)
}

/// Outcome of comparing the spectral subspace of the defining class with a
/// reference correspondence.
#[derive(Clone, Debug)]
pub struct RecoveryReport<T: Real> {
    /// The spectral subspace used for the comparison.
    pub spectral: SpectralSubspace<T>,
    /// Explicit unitary from spectral coordinates onto the reference module.
    pub unitary: CMat<T>,
    /// Worst deviation from intertwining both module actions.
    pub action_residual: T,
    /// Worst deviation of the pulled-back inner product.
    pub inner_residual: T,
    /// True when both residuals meet the tolerance.
    pub success: bool,
}

/// Recover the original correspondence from the bundle: find an explicit
/// two-sided module unitary from the spectral subspace of the defining class
/// onto `m` and measure how well it preserves all structure.
pub fn check_recovery<T: Real>(
    bundle: &TruncatedFrameBundle<T>,
    m: &Correspondence<T>,
    ctx: &Ctx<T>,
) -> Result<RecoveryReport<T>> {
    let def_class = bundle.levels[bundle.defining_level].class_id;
    let s = spectral_subspace(bundle, def_class, ctx)?;
    let ds = s.corr.dim;
    let dm = m.dim;
    if ds != dm {
        return Err(Error::Dim(format!(
            "spectral subspace has dimension {ds}, the module has {dm}"
        )));
    }
    s.corr.validate(ctx)?;
    // Null space of the two-sided intertwining constraints.
    let idm = CMat::<T>::identity(dm);
    let ids = CMat::<T>::identity(ds);
    let mut acc = CMat::<T>::zeros(dm * ds, dm * ds);
    for (am, as_) in m
        .left
        .iter()
        .zip(&s.corr.left)
        .chain(m.right.iter().zip(&s.corr.right))
    {
        let op = am.kron(&ids).sub(&idm.kron(&as_.transpose()));
        let sq = op.adjoint().mul(&op);
        acc = acc.add(&sq);
    }
    let kern = psd_kernel(&acc, ctx.tol.rel)?;
    if kern.cols() == 0 {
        return Err(Error::Numerical(
            "no two-sided module map between the spectral subspace and the module".into(),
        ));
    }
    let combo = kern.apply(&gaussian_complex(
        ctx.sub_seed("recovery.combo", &[]),
        kern.cols(),
    ));
    let umat = CMat::from_vec(dm, ds, combo)?;
    let unitary = polar_unitary(&umat)?;
    let action_residual = s.corr.map_bimodule_residual(m, &unitary);
    let inner_residual = m
        .inner
        .iter()
        .zip(&s.corr.inner)
        .map(|(im, is)| unitary.adjoint().mul(im).mul(&unitary).max_abs_diff(is))
        .fold(T::zero(), T::max);
    let bound = ctx.tol.bound(T::one());
    let success = action_residual <= bound && inner_residual <= bound;
    Ok(RecoveryReport {
        spectral: s,
        unitary,
        action_residual,
        inner_residual,
        success,
    })
}

/// Fullness of the inner products of one spectral subspace.
#[derive(Clone, Debug)]
pub struct ClassFullness {
    pub class_id: usize,
    /// Dimension of the spectral subspace.
    pub spectral_dim: usize,
    /// Rank of the span of its inner products inside the coefficient algebra.
    pub rank: usize,
    /// True when the span is all of the coefficient algebra.
    pub full: bool,
}

/// Freeness report: the action is free at this truncation when every kept
/// class has a spectral subspace whose inner products span the whole
/// coefficient algebra.
#[derive(Clone, Debug)]
pub struct FreenessReport {
    pub per_class: Vec<ClassFullness>,
    pub free: bool,
}

/// Test freeness by fullness of the spectral inner products, class by class.
pub fn check_freeness<T: Real>(
    bundle: &TruncatedFrameBundle<T>,
    ctx: &Ctx<T>,
) -> Result<FreenessReport> {
    let nb = bundle.alg.dim();
    let mut per_class = Vec::with_capacity(bundle.levels.len());
    for lvl in &bundle.levels {
        let s = spectral_subspace(bundle, lvl.class_id, ctx)?;
        let sd = s.corr.dim;
        // Rows: coefficient coordinates of every pairwise inner product.
        let mut f = CMat::<T>::zeros(nb, sd * sd);
        for (beta, m) in s.corr.inner.iter().enumerate() {
            for r in 0..sd {
                for c in 0..sd {
                    f[(beta, r * sd + c)] = m[(r, c)];
                }
            }
        }
        let gram = f.mul(&f.adjoint());
        let rank = gram_rank(&gram, ctx.tol.rel)?;
        per_class.push(ClassFullness {
            class_id: lvl.class_id,
            spectral_dim: sd,
            rank,
            full: rank == nb,
        });
    }
    let free = per_class.iter().all(|c| c.full);
    Ok(FreenessReport { per_class, free })
}

/// Commutativity probe over the realized loss-free pairs, plus a dimension
/// count against the classical pattern (coefficient dimension × carrier
/// dimension squared per level).
#[derive(Clone, Debug)]
pub struct CommutativityReport<T: Real> {
    pub pairs_checked: usize,
    pub worst_residual: T,
    pub commutative: bool,
    /// Per level: (class id, level dimension, classical dimension, match).
    pub level_dims: Vec<(usize, usize, usize, bool)>,
    /// True when every level matches the classical dimension count.
    pub classical_dims: bool,
}

/// Probe whether the reconstructed algebra is commutative and whether its
/// level dimensions match the classical pattern.
pub fn check_classical<T: Real>(
    bundle: &TruncatedFrameBundle<T>,
    ctx: &Ctx<T>,
) -> Result<CommutativityReport<T>> {
    let nb = bundle.alg.dim();
    let mut worst = T::zero();
    let mut pairs_checked = 0usize;
    let nl = bundle.levels.len();
    for i in 0..nl {
        for j in i..nl {
            if !(bundle.lossless(i, j) && bundle.lossless(j, i)) {
                continue;
            }
            pairs_checked += 1;
            for salt in 0..2u64 {
                let x = probe(bundle, ctx, "classical", i, salt);
                let y = probe(bundle, ctx, "classical", j, salt + 11);
                let scale = (vec_norm(&x) * vec_norm(&y)).max(T::one());
                let xy = bundle.product_h(i, j, &x, &y)?;
                let yx = bundle.product_h(j, i, &y, &x)?;
                let diff = xy
                    .iter()
                    .zip(&yx)
                    .map(|(a, b)| (*a - *b).norm())
                    .fold(T::zero(), T::max);
                worst = worst.max(diff / scale);
            }
        }
    }
    let level_dims: Vec<(usize, usize, usize, bool)> = bundle
        .levels
        .iter()
        .map(|lvl| {
            let d = lvl.vdim();
            let classical = nb * d * d;
            (lvl.class_id, lvl.dim(), classical, lvl.dim() == classical)
        })
        .collect();
    let classical_dims = level_dims.iter().all(|&(_, _, _, ok)| ok);
    Ok(CommutativityReport {
        pairs_checked,
        worst_residual: worst,
        commutative: ctx.tol.ok(worst, T::one()),
        level_dims,
        classical_dims,
    })
}

/// Rebuild an action datum from the reconstructed bundle and verify that it
/// reproduces the original structure.
///
/// The spectral subspace of the defining class, identified with the original
/// module through the recovery unitary, is fed back as a fresh datum at
/// truncation two and re-validated. Independently, the intertwiner action
/// induced on spectral subspaces through the bundle's own multiplication is
/// compared with the rebuilt datum's action.
pub fn round_trip<T: Real>(
    action: &IntertwinerAction<T>,
    bundle: &TruncatedFrameBundle<T>,
    ctx: &Ctx<T>,
) -> Result<CheckSet> {
    let mut set = CheckSet::new();
    let n = action.group_parameter();
    let bound = ctx.tol.bound(T::one());
    let dl = bundle.defining_level;
    if !bundle.lossless(dl, dl) {
        return Err(Error::Input(
            "the cutoff drops channels of the squared defining class; the round trip needs them"
                .into(),
        ));
    }
    let m = action.power(1);
    let rec = check_recovery(bundle, m, ctx)?;
    set.record(
        "roundtrip.recovery-action",
        rec.action_residual,
        bound,
        "module actions through the recovery unitary",
    );
    set.record(
        "roundtrip.recovery-inner",
        rec.inner_residual,
        bound,
        "inner products through the recovery unitary",
    );
    set.record(
        "roundtrip.spectral-closure",
        rec.spectral.closure_residual,
        bound,
        "coefficient multiples stay inside the spectral subspace",
    );
    // The coefficient space of the level hosting the defining-class spectral
    // subspace is the full first power, so the canonical identification with
    // the source module is the identity on coordinates — the module
    // structure must come back on the nose, not merely up to a unitary.
    let mut canon = T::zero();
    for (a, b) in m
        .left
        .iter()
        .zip(&rec.spectral.corr.left)
        .chain(m.right.iter().zip(&rec.spectral.corr.right))
        .chain(m.inner.iter().zip(&rec.spectral.corr.inner))
    {
        canon = canon.max(a.max_abs_diff(b));
    }
    set.record(
        "roundtrip.canonical",
        canon,
        bound,
        "spectral module structure against the source module in shared coordinates",
    );
    let u1 = action.trivialization(1).ok_or_else(|| {
        Error::Input("the source action does not expose a level-one module identification".into())
    })?;
    let fresh =
        IntertwinerAction::from_trivialization(rec.spectral.corr.clone(), u1.clone(), n, 2, ctx)?;
    let validation = fresh.validate(ctx)?;
    let failed = validation.failed_names();
    set.record_flag(
        "roundtrip.datum",
        validation.all_pass(),
        &if failed.is_empty() {
            "rebuilt datum passes its full validation".to_string()
        } else {
            format!("rebuilt datum fails: {}", failed.join(", "))
        },
    );

    // Induced action on spectral subspaces through the bundle product.
    let ds = rec.spectral.corr.dim;
    let d = n;
    let total = bundle.total_dim;
    let host = bundle.levels[dl].conj_level;
    let s2 = spectral_of_rep(bundle, &Rep::<T>::standard(n).power(2), ctx)?;
    let mut zcols: Vec<Vec<Cx<T>>> = Vec::with_capacity(ds * ds);
    for a in 0..ds {
        let xa = rec.spectral.basis.col(a);
        for b in 0..ds {
            let yb = rec.spectral.basis.col(b);
            let mut z = vec![Cx::zero(); total * d * d];
            for u in 0..d {
                let xu: Vec<Cx<T>> = (0..total).map(|h| xa[h * d + u]).collect();
                let xs = bundle.level_slice(host, &xu).to_vec();
                for v in 0..d {
                    let yv: Vec<Cx<T>> = (0..total).map(|h| yb[h * d + v]).collect();
                    let ys = bundle.level_slice(host, &yv).to_vec();
                    let prod = bundle.product_h(host, host, &xs, &ys)?;
                    for h in 0..total {
                        z[h * d * d + u * d + v] += prod[h];
                    }
                }
            }
            zcols.push(z);
        }
    }
    let zmat = CMat::from_cols(total * d * d, &zcols);
    let coords = s2.coords_mat(&zmat);
    let closure = zmat.sub(&s2.basis.mul(&coords)).max_abs();
    set.record(
        "roundtrip.product-closure",
        closure,
        bound,
        "pairwise products of spectral elements stay inside the doubled spectral subspace",
    );
    let psi = coords.mul(&fresh.pair(1, 1)?.q);
    let iso_res = psi
        .adjoint()
        .mul(&psi)
        .max_abs_diff(&CMat::identity(psi.cols()));
    set.record(
        "roundtrip.product-isometry",
        iso_res,
        bound,
        "the balanced multiplication map between spectral subspaces is unitary",
    );

    // Compare the induced intertwiner action with the rebuilt datum's action.
    let apply_tensor = |sp: &SpectralSubspace<T>, t: &CMat<T>| -> Result<(CMat<T>, T)> {
        // (identity ⊗ t) applied to each basis column, re-expressed in the basis.
        let rows = sp.basis.rows();
        let hdim = rows / sp.rep_dim;
        let mut cols: Vec<Vec<Cx<T>>> = Vec::with_capacity(sp.basis.cols());
        for c in 0..sp.basis.cols() {
            let col = sp.basis.col(c);
            let x = CMat::from_vec(hdim, sp.rep_dim, col)?;
            cols.push(x.mul(&t.transpose()).into_data());
        }
        let moved = CMat::from_cols(rows, &cols);
        let inside = sp.coords_mat(&moved);
        let res = moved.sub(&sp.basis.mul(&inside)).max_abs();
        Ok((inside, res))
    };
    let mut worst2 = T::zero();
    let mut closure2 = T::zero();
    for idx in 0..action.cspace_dim(2, 2) {
        let t = action.basis_element(2, 2, idx);
        let (phi, cres) = apply_tensor(&s2, &t)?;
        closure2 = closure2.max(cres);
        let lhs = phi.mul(&psi);
        let rhs = psi.mul(&fresh.act(2, 2, &t)?);
        worst2 = worst2.max(lhs.max_abs_diff(&rhs));
    }
    set.record(
        "roundtrip.induced",
        worst2,
        bound,
        "induced doubled-level intertwiners against the rebuilt datum",
    );
    set.record(
        "roundtrip.induced-closure",
        closure2,
        bound,
        "intertwiners preserve the doubled spectral subspace",
    );
    let mut worst1 = T::zero();
    for idx in 0..action.cspace_dim(1, 1) {
        let t = action.basis_element(1, 1, idx);
        let (phi, cres) = apply_tensor(&rec.spectral, &t)?;
        closure2 = closure2.max(cres);
        worst1 = worst1.max(phi.max_abs_diff(&fresh.act(1, 1, &t)?));
    }
    set.record(
        "roundtrip.induced-unit-power",
        worst1,
        bound,
        "induced level-one intertwiners against the rebuilt datum",
    );
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::IntertwinerAction;
    use crate::hilbmod::AlgebraShape;
    use crate::repcat::build_registry;
    use crate::scalar::cx;

    fn ctx() -> Ctx<f64> {
        Ctx::default()
    }

    fn scalar_bundle(k: usize, cutoff_level: usize) -> TruncatedFrameBundle<f64> {
        let ctx = ctx();
        let action = IntertwinerAction::trivial(&AlgebraShape::scalar(), 3, k, &ctx).unwrap();
        let reg = build_registry::<f64>(3, k, &ctx).unwrap();
        let cutoff = cutoff_through_level(&reg, cutoff_level);
        build_algebra(&action, &reg, &cutoff, &ctx).unwrap()
    }

    fn twisted_action(k: usize) -> IntertwinerAction<f64> {
        let ctx = ctx();
        IntertwinerAction::twisted(
            3,
            &[vec![0.0, 0.0, 0.0], vec![0.4, -0.3, 0.9]],
            k,
            &ctx,
        )
        .unwrap()
    }

    #[test]
    fn scalar_levels_have_classical_dimensions() {
        let bundle = scalar_bundle(2, 2);
        assert_eq!(bundle.levels.len(), 3);
        let dims: Vec<usize> = (0..3).map(|i| bundle.level_dim(i)).collect();
        assert_eq!(dims, vec![1, 9, 25]);
        assert_eq!(bundle.total_dim, 35);
        assert_eq!(bundle.trivial_level, 0);
        assert_eq!(bundle.defining_level, 1);
        // Pairs of realization level beyond the truncation are skipped but
        // remembered.
        assert!(bundle.products.contains_key(&(1, 1)));
        assert!(!bundle.products.contains_key(&(1, 2)));
        assert!(bundle.skipped.contains(&(1, 2)));
        // The squared defining class keeps all three channels.
        assert!(bundle.lossless(1, 1));
        let report = check_classical(&bundle, &ctx()).unwrap();
        assert!(report.classical_dims);
        assert!(report.commutative, "worst {:.3e}", report.worst_residual);
    }

    #[test]
    fn bundle_laws_hold_over_scalars() {
        let bundle = scalar_bundle(2, 2);
        let report = verify_bundle(&bundle, &ctx()).unwrap();
        assert!(
            report.all_pass(),
            "failed: {:?}",
            report.failed_names()
        );
        // The trivial and defining levels both carry involutions at this
        // truncation; the top level pairing would need level four.
        assert!(bundle.involutions.contains_key(&0));
        assert!(bundle.involutions.contains_key(&1));
        assert!(!bundle.involutions.contains_key(&2));
    }

    #[test]
    fn bundle_laws_hold_with_matrix_coefficients() {
        let ctx = ctx();
        let action = twisted_action(2);
        let reg = build_registry::<f64>(3, 2, &ctx).unwrap();
        let cutoff = cutoff_through_level(&reg, 2);
        let bundle = build_algebra(&action, &reg, &cutoff, &ctx).unwrap();
        let dims: Vec<usize> = (0..3).map(|i| bundle.level_dim(i)).collect();
        assert_eq!(dims, vec![2, 18, 50]);
        let report = verify_bundle(&bundle, &ctx).unwrap();
        assert!(report.all_pass(), "failed: {:?}", report.failed_names());
        let classical = check_classical(&bundle, &ctx).unwrap();
        assert!(classical.commutative);
        assert!(classical.classical_dims);
    }

    #[test]
    fn left_multiplication_is_adjointable_and_faithful() {
        let ctx = ctx();
        let bundle = scalar_bundle(2, 1);
        // Full matrix of left multiplication by a probe of the defining
        // level; its adjoint for the weighted inner product is left
        // multiplication by the involute: λ(x)†·W = W·λ(x⁺) with W the
        // diagonal of level weights.
        let x = probe(&bundle, &ctx, "test.lambda", 1, 3);
        let lam = bundle.lambda(1, &x).unwrap();
        let (tgt, xstar) = bundle.involute(1, &x).unwrap();
        assert_eq!(tgt, 1);
        let lam_star = bundle.lambda(1, &xstar).unwrap();
        let mut wdiag = CMat::<f64>::zeros(bundle.total_dim, bundle.total_dim);
        for i in 0..bundle.levels.len() {
            let w = bundle.level_weight(i);
            let off = bundle.levels[i].offset;
            for k in 0..bundle.level_dim(i) {
                wdiag[(off + k, off + k)] = cx(w, 0.0);
            }
        }
        let lhs = lam.adjoint().mul(&wdiag);
        let rhs = wdiag.mul(&lam_star);
        let res = lhs.max_abs_diff(&rhs);
        assert!(res < 1e-9, "adjoint residual {res:.3e}");
        // Faithful on the truncated space: nonzero elements act nonzero.
        assert!(lam.max_abs() > 1e-8);
    }

    #[test]
    fn involution_squares_to_identity_and_matches_star() {
        let ctx = ctx();
        let bundle = scalar_bundle(2, 2);
        for lvl in [0usize, 1] {
            let x = probe(&bundle, &ctx, "test.invol", lvl, 5);
            let (tgt, x1) = bundle.involute(lvl, &x).unwrap();
            assert_eq!(tgt, lvl, "self-conjugate classes return to their level");
            let (_, x2) = bundle.involute(lvl, &x1).unwrap();
            let diff: f64 = x2
                .iter()
                .zip(&x)
                .map(|(a, b)| (*a - *b).norm())
                .fold(0.0, f64::max);
            assert!(diff < 1e-9, "level {lvl} double involution {diff:.3e}");
            let inv = &bundle.involutions[&lvl];
            assert!((inv.scale_hi - 1.0).abs() < 1e-7, "hi {}", inv.scale_hi);
            assert!((inv.scale_lo - 1.0).abs() < 1e-7, "lo {}", inv.scale_lo);
        }
    }

    #[test]
    fn recovery_finds_the_original_module() {
        let ctx = ctx();
        // Trivial scalar data.
        let bundle = scalar_bundle(2, 2);
        let action = IntertwinerAction::trivial(&AlgebraShape::scalar(), 3, 2, &ctx).unwrap();
        let rec = check_recovery(&bundle, action.power(1), &ctx).unwrap();
        assert_eq!(rec.spectral.corr.dim, 3);
        assert!(rec.success, "action {:.3e} inner {:.3e}", rec.action_residual, rec.inner_residual);
        assert!(rec.action_residual < 1e-8);
        assert!(rec.inner_residual < 1e-8);
        // Two-point twisted data.
        let action2 = twisted_action(2);
        let reg = build_registry::<f64>(3, 2, &ctx).unwrap();
        let cutoff = cutoff_through_level(&reg, 2);
        let bundle2 = build_algebra(&action2, &reg, &cutoff, &ctx).unwrap();
        let rec2 = check_recovery(&bundle2, action2.power(1), &ctx).unwrap();
        assert_eq!(rec2.spectral.corr.dim, 6);
        assert!(rec2.success, "action {:.3e} inner {:.3e}", rec2.action_residual, rec2.inner_residual);
    }

    #[test]
    fn recovery_survives_a_smaller_cutoff() {
        let ctx = ctx();
        // Keep only the trivial and defining classes: products of the
        // defining level lose their top channel but stay exact elsewhere.
        let action = twisted_action(2);
        let reg = build_registry::<f64>(3, 2, &ctx).unwrap();
        let bundle = build_algebra(&action, &reg, &cutoff_through_level(&reg, 1), &ctx).unwrap();
        assert_eq!(bundle.levels.len(), 2);
        let pp = &bundle.products[&(1, 1)];
        assert_eq!(pp.dropped.len(), 1, "one channel falls outside the cutoff");
        let rec = check_recovery(&bundle, action.power(1), &ctx).unwrap();
        assert!(rec.success, "action {:.3e} inner {:.3e}", rec.action_residual, rec.inner_residual);
    }

    #[test]
    fn freeness_holds_and_degenerate_levels_are_named() {
        let ctx = ctx();
        let bundle = scalar_bundle(2, 2);
        let report = check_freeness(&bundle, &ctx).unwrap();
        assert!(report.free);
        assert!(report.per_class.iter().all(|c| c.rank == 1));
        // Degenerate fixture: kill the inner product of the top level.
        let mut broken = bundle.clone();
        let top = 2usize;
        let dim = broken.levels[top].gamma.carrier.dim;
        for m in broken.levels[top].gamma.carrier.inner.iter_mut() {
            *m = CMat::zeros(dim, dim);
        }
        let report2 = check_freeness(&broken, &ctx).unwrap();
        assert!(!report2.free);
        let bad: Vec<usize> = report2
            .per_class
            .iter()
            .filter(|c| !c.full)
            .map(|c| c.class_id)
            .collect();
        assert_eq!(bad, vec![broken.levels[top].class_id]);
    }

    #[test]
    fn matrix_coefficients_are_not_commutative() {
        let ctx = ctx();
        let alg = AlgebraShape::new(vec![2]).unwrap();
        let action = IntertwinerAction::trivial(&alg, 3, 2, &ctx).unwrap();
        let reg = build_registry::<f64>(3, 2, &ctx).unwrap();
        let bundle = build_algebra(&action, &reg, &cutoff_through_level(&reg, 2), &ctx).unwrap();
        let report = verify_bundle(&bundle, &ctx).unwrap();
        assert!(report.all_pass(), "failed: {:?}", report.failed_names());
        let classical = check_classical(&bundle, &ctx).unwrap();
        assert!(!classical.commutative);
        assert!(classical.worst_residual > 1e-3);
        // Dimensions still follow the free pattern.
        assert!(classical.classical_dims);
        let freeness = check_freeness(&bundle, &ctx).unwrap();
        assert!(freeness.free);
    }

    #[test]
    fn round_trip_rebuilds_a_valid_datum() {
        let ctx = ctx();
        let action = IntertwinerAction::trivial(&AlgebraShape::scalar(), 3, 2, &ctx).unwrap();
        let reg = build_registry::<f64>(3, 2, &ctx).unwrap();
        let bundle = build_algebra(&action, &reg, &cutoff_through_level(&reg, 2), &ctx).unwrap();
        let report = round_trip(&action, &bundle, &ctx).unwrap();
        assert!(report.all_pass(), "failed: {:?}", report.failed_names());
    }

    #[test]
    fn round_trip_rebuilds_twisted_data() {
        let ctx = ctx();
        let action = twisted_action(2);
        let reg = build_registry::<f64>(3, 2, &ctx).unwrap();
        let bundle = build_algebra(&action, &reg, &cutoff_through_level(&reg, 2), &ctx).unwrap();
        let report = round_trip(&action, &bundle, &ctx).unwrap();
        assert!(report.all_pass(), "failed: {:?}", report.failed_names());
    }

    #[test]
    fn spectral_subspace_matches_module_dimensions() {
        let ctx = ctx();
        let bundle = scalar_bundle(2, 2);
        let triv = bundle.levels[0].class_id;
        let s0 = spectral_subspace(&bundle, triv, &ctx).unwrap();
        assert_eq!(s0.corr.dim, 1);
        // The trivial spectral subspace is the coefficient algebra itself.
        assert!(s0.corr.inner[0].max_abs_diff(&CMat::identity(1)) < 1e-10);
        let def = bundle.levels[1].class_id;
        let s1 = spectral_subspace(&bundle, def, &ctx).unwrap();
        assert_eq!(s1.corr.dim, 3);
        assert!(s1.closure_residual < 1e-10);
    }

    #[test]
    fn invalid_cutoffs_are_rejected() {
        let ctx = ctx();
        let action = IntertwinerAction::trivial(&AlgebraShape::scalar(), 3, 2, &ctx).unwrap();
        let reg = build_registry::<f64>(3, 3, &ctx).unwrap();
        // Missing defining class.
        let triv = reg.levels[0][0].class_id;
        match build_algebra(&action, &reg, &[triv], &ctx) {
            Err(Error::Input(_)) => {}
            other => panic!("expected an input error, got {other:?}"),
        }
        // A class beyond the truncation.
        let deep = reg
            .classes
            .iter()
            .find(|c| c.source_level == 3)
            .expect("the depth-three registry has a new class at its top level")
            .id;
        let def = reg.levels[1][0].class_id;
        match build_algebra(&action, &reg, &[triv, def, deep], &ctx) {
            Err(Error::Truncation { needed: 3, cap: 2 }) => {}
            other => panic!("expected a truncation error, got {other:?}"),
        }
        // Unknown id.
        match build_algebra(&action, &reg, &[triv, def, 99], &ctx) {
            Err(Error::Input(_)) => {}
            other => panic!("expected an input error, got {other:?}"),
        }
    }

    #[test]
    fn products_respect_the_inner_grading() {
        // ⟨x·y, z⟩ pairs only matching levels; a product landing on several
        // levels decomposes orthogonally.
        let ctx = ctx();
        let bundle = scalar_bundle(2, 2);
        let x = probe(&bundle, &ctx, "test.grade", 1, 1);
        let y = probe(&bundle, &ctx, "test.grade", 1, 2);
        let parts = bundle.product(1, 1, &x, &y).unwrap();
        let levels: Vec<usize> = parts.iter().map(|(l, _)| *l).collect();
        assert_eq!(levels, vec![0, 1, 2]);
        let h = bundle.product_h(1, 1, &x, &y).unwrap();
        let norm_sq: f64 = h.iter().map(|c| c.norm_sqr()).sum();
        let part_sq: f64 = parts
            .iter()
            .flat_map(|(_, v)| v.iter())
            .map(|c| c.norm_sqr())
            .sum();
        assert!((norm_sq - part_sq).abs() < 1e-12);
        // Scalar sanity: the unit inner product is one.
        let one = bundle.unit_h();
        let ip = bundle.h_inner(&one, &one);
        assert!((ip[0] - cx(1.0, 0.0)).norm() < 1e-12);
    }
}
