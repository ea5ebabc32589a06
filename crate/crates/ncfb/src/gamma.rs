//! The functor induced by an intertwiner action on the category of
//! rotation-group representations.
//!
//! Every subrepresentation `σ ⊆ V^⊗k` (realized by an isometric embedding)
//! yields a correspondence: the range of the projection `φ_{k,k}(P_σ)` inside
//! `M^⊗k` with the inherited bimodule structure. Every intertwiner
//! `T: V_σ → V_τ` yields an adjointable operator between those ranges, and
//! every pair of objects carries a unitary multiplication map
//! `Γ(σ) ⊗_B Γ(τ) → Γ(σ ⊗ τ)` obtained by compressing the power-level
//! multiplication. [`verify_functor`] checks, over every registered
//! irreducible occurrence and every intertwiner-basis morphism between them,
//! that these assignments form a unitary tensor functor: functoriality,
//! adjoint compatibility, naturality, unit laws, unitarity, associativity,
//! and the kernel identity behind surjectivity.

use std::collections::BTreeMap;

use num_traits::Zero;
use rand::seq::SliceRandom;

use crate::action::IntertwinerAction;
use crate::check::CheckSet;
use crate::error::{Error, Result};
use crate::hilbmod::{associator, tensor_over_b, Correspondence, TensorProduct};
use crate::liegroup::{hom_basis, Rep};
use crate::linalg::{psd_kernel, CMat};
use crate::repcat::{ClassifiedBlock, Registry};
use crate::rng::{gaussian_complex, rng};
use crate::scalar::{Ctx, Cx, Real};

/// Morphism pairs sampled for the naturality law.
const NATURAL_CAP: usize = 24;
/// Object triples sampled for the associativity law.
const ASSOC_CAP: usize = 12;

/// A representation realized concretely as a subrepresentation of a tensor
/// power of the standard representation, via an isometric embedding.
#[derive(Clone, Debug)]
pub struct ConcreteRep<T: Real> {
    /// Tensor power the representation lives in.
    pub level: usize,
    /// Isometry from the abstract carrier into `V^⊗level` (columns
    /// orthonormal).
    pub embedding: CMat<T>,
}

impl<T: Real> ConcreteRep<T> {
    /// The full power `V^⊗level` with the identity embedding.
    pub fn full(level: usize, ambient_dim: usize) -> Self {
        ConcreteRep {
            level,
            embedding: CMat::identity(ambient_dim),
        }
    }

    /// A classified irreducible occurrence inside a decomposed power.
    pub fn from_block(block: &ClassifiedBlock<T>, level: usize) -> Self {
        ConcreteRep {
            level,
            embedding: block.embedding.clone(),
        }
    }

    /// Dimension of the abstract carrier.
    pub fn dim(&self) -> usize {
        self.embedding.cols()
    }

    /// Dimension of the ambient power.
    pub fn ambient_dim(&self) -> usize {
        self.embedding.rows()
    }

    /// The tensor product realization inside the summed power.
    pub fn tensor(&self, other: &Self) -> Self {
        ConcreteRep {
            level: self.level + other.level,
            embedding: self.embedding.kron(&other.embedding),
        }
    }

    /// Orthogonal projection of the ambient power onto the carrier.
    pub fn projection(&self) -> CMat<T> {
        self.embedding.mul(&self.embedding.adjoint())
    }

    /// The group representation restricted to the carrier.
    pub fn restricted(&self, ambient: &Rep<T>) -> Result<Rep<T>> {
        let ea = self.embedding.adjoint();
        let gens = ambient
            .gens()
            .iter()
            .map(|x| ea.mul(&x.mul(&self.embedding)))
            .collect();
        Rep::new(ambient.group_parameter(), gens)
    }
}

/// The correspondence attached to a concretely realized representation: the
/// range of `φ_{k,k}(P_σ)` inside `M^⊗k`.
#[derive(Clone, Debug)]
pub struct GammaObject<T: Real> {
    pub rep: ConcreteRep<T>,
    /// Isometry from the carrier coordinates into the ambient power `M^⊗k`
    /// (columns = orthonormal basis of the range).
    pub incl: CMat<T>,
    /// The range with the inherited bimodule structure and inner product.
    pub carrier: Correspondence<T>,
}

/// Realize the object attached to a concrete representation. Full powers are
/// identified with the ambient module exactly; proper subrepresentations get
/// the eigenbasis of the projection `φ_{k,k}(P_σ)` above the spectral gap.
pub fn gamma_object<T: Real>(
    action: &IntertwinerAction<T>,
    rep: ConcreteRep<T>,
    ctx: &Ctx<T>,
) -> Result<GammaObject<T>> {
    let k = rep.level;
    if k > action.truncation() {
        return Err(Error::Truncation {
            needed: k,
            cap: action.truncation(),
        });
    }
    let amb = action.power_rep(k).dim();
    if rep.ambient_dim() != amb {
        return Err(Error::Dim(format!(
            "embedding lives in dimension {}, power {k} has dimension {amb}",
            rep.ambient_dim()
        )));
    }
    let iso = rep
        .embedding
        .adjoint()
        .mul(&rep.embedding)
        .max_abs_diff(&CMat::identity(rep.dim()));
    if iso > ctx.tol.bound(T::one()) {
        return Err(Error::Input(format!(
            "embedding is not an isometry (residual {:.3e})",
            iso.as_f64()
        )));
    }
    let module = action.power(k);
    let incl = if rep.dim() == amb {
        CMat::identity(module.dim)
    } else {
        let phip = action.act(k, k, &rep.projection())?;
        let sym = phip
            .add(&phip.adjoint())
            .scale_re(T::lit(0.5));
        let (vals, vecs) = crate::linalg::eigh(&sym)?;
        let mut cols = Vec::new();
        for (i, &v) in vals.iter().enumerate() {
            if v > T::lit(0.1) && v < T::lit(0.9) {
                return Err(Error::Numerical(format!(
                    "projector spectrum is not separated (eigenvalue {:.3e})",
                    v.as_f64()
                )));
            }
            if v > T::lit(0.5) {
                cols.push(i);
            }
        }
        vecs.select_cols(&cols)
    };
    let ia = incl.adjoint();
    let compress = |fam: &[CMat<T>]| -> Vec<CMat<T>> {
        fam.iter().map(|m| ia.mul(&m.mul(&incl))).collect()
    };
    let carrier = Correspondence {
        alg: action.algebra().clone(),
        dim: incl.cols(),
        left: compress(&module.left),
        right: compress(&module.right),
        inner: compress(&module.inner),
    };
    carrier.validate(ctx)?;
    Ok(GammaObject { rep, incl, carrier })
}

/// The operator `Γ(T): Γ(σ) → Γ(τ)` induced by an abstract intertwiner
/// `t` between the carriers, in carrier coordinates. `t` is extended by zero
/// off the source carrier, pushed through the action, and compressed.
pub fn gamma_morphism<T: Real>(
    action: &IntertwinerAction<T>,
    src: &GammaObject<T>,
    tgt: &GammaObject<T>,
    t: &CMat<T>,
) -> Result<CMat<T>> {
    if t.rows() != tgt.rep.dim() || t.cols() != src.rep.dim() {
        return Err(Error::Dim(format!(
            "morphism must be {}x{}, got {}x{}",
            tgt.rep.dim(),
            src.rep.dim(),
            t.rows(),
            t.cols()
        )));
    }
    let w = tgt
        .rep
        .embedding
        .mul(t)
        .mul(&src.rep.embedding.adjoint());
    let phi = action.act(src.rep.level, tgt.rep.level, &w)?;
    Ok(tgt.incl.adjoint().mul(&phi.mul(&src.incl)))
}

/// The multiplication map of an object pair: the balanced tensor product of
/// the carriers, the canonical target object, and the unitary between them.
#[derive(Clone, Debug)]
pub struct MultMap<T: Real> {
    /// Balanced tensor product `Γ(σ) ⊗_B Γ(τ)` of the source carriers.
    pub tensor: TensorProduct<T>,
    /// The object realized by the Kronecker embedding of the sources.
    pub target: GammaObject<T>,
    /// Matrix of the map from quotient coordinates of `tensor` to target
    /// carrier coordinates.
    pub map: CMat<T>,
    /// How far the image of the uncompressed multiplication sticks out of
    /// the target range (zero when the tensor-compatibility law holds).
    pub range_residual: T,
}

/// Build the multiplication map onto a freshly realized canonical target.
pub fn mult_map<T: Real>(
    action: &IntertwinerAction<T>,
    a: &GammaObject<T>,
    b: &GammaObject<T>,
    ctx: &Ctx<T>,
) -> Result<MultMap<T>> {
    let target = gamma_object(action, a.rep.tensor(&b.rep), ctx)?;
    mult_map_onto(action, a, b, target, ctx)
}

/// Build the multiplication map into a caller-supplied realization of the
/// tensor object, so several maps can share one coordinate frame.
pub fn mult_map_onto<T: Real>(
    action: &IntertwinerAction<T>,
    a: &GammaObject<T>,
    b: &GammaObject<T>,
    target: GammaObject<T>,
    ctx: &Ctx<T>,
) -> Result<MultMap<T>> {
    let (k, l) = (a.rep.level, b.rep.level);
    let pair = action.pair(k, l)?;
    let want = a.rep.tensor(&b.rep);
    if target.rep.level != want.level
        || target.rep.embedding.max_abs_diff(&want.embedding) > ctx.tol.bound(T::one())
    {
        return Err(Error::Input(
            "target is not the tensor realization of the sources".into(),
        ));
    }
    let tensor = tensor_over_b(&a.carrier, &b.carrier, ctx)?;
    let j = pair
        .proj
        .mul(&a.incl.kron(&b.incl))
        .mul(&tensor.q);
    let m_raw = action.mult_map(k, l)?.mul(&j);
    let map = target.incl.adjoint().mul(&m_raw);
    let range_residual = m_raw.max_abs_diff(&target.incl.mul(&map));
    Ok(MultMap {
        tensor,
        target,
        map,
        range_residual,
    })
}

/// A formal direct sum of objects with the concatenated carrier.
#[derive(Clone, Debug)]
pub struct GammaSum<T: Real> {
    pub components: Vec<GammaObject<T>>,
    pub carrier: Correspondence<T>,
    /// Coordinate offsets of the components inside the carrier
    /// (length = components + 1).
    pub offsets: Vec<usize>,
}

/// Assemble a direct sum; all components must share the coefficient algebra.
pub fn sum_object<T: Real>(components: Vec<GammaObject<T>>) -> Result<GammaSum<T>> {
    let first = components
        .first()
        .ok_or_else(|| Error::Input("a direct sum needs at least one component".into()))?;
    let mut carrier = first.carrier.clone();
    let mut offsets = vec![0, carrier.dim];
    for c in &components[1..] {
        carrier = carrier.direct_sum(&c.carrier)?;
        offsets.push(carrier.dim);
    }
    Ok(GammaSum {
        components,
        carrier,
        offsets,
    })
}

/// Morphism between direct sums from blockwise abstract intertwiners:
/// `blocks[(i, j)]` maps source component `i` to target component `j`;
/// missing blocks are zero.
pub fn sum_morphism<T: Real>(
    action: &IntertwinerAction<T>,
    src: &GammaSum<T>,
    tgt: &GammaSum<T>,
    blocks: &BTreeMap<(usize, usize), CMat<T>>,
) -> Result<CMat<T>> {
    let mut out = CMat::zeros(tgt.carrier.dim, src.carrier.dim);
    for (&(i, j), t) in blocks {
        if i >= src.components.len() || j >= tgt.components.len() {
            return Err(Error::Input(format!(
                "block ({i},{j}) out of range for a {}x{} sum morphism",
                src.components.len(),
                tgt.components.len()
            )));
        }
        let g = gamma_morphism(action, &src.components[i], &tgt.components[j], t)?;
        for r in 0..g.rows() {
            for c in 0..g.cols() {
                out[(tgt.offsets[j] + r, src.offsets[i] + c)] = g[(r, c)];
            }
        }
    }
    Ok(out)
}

/// Multiplication map of two direct sums: componentwise maps assembled into
/// a unitary onto the sum of the component targets (ordered lexicographically
/// by component pair).
pub struct SumMultMap<T: Real> {
    pub tensor: TensorProduct<T>,
    pub target: GammaSum<T>,
    pub map: CMat<T>,
}

pub fn sum_mult_map<T: Real>(
    action: &IntertwinerAction<T>,
    a: &GammaSum<T>,
    b: &GammaSum<T>,
    ctx: &Ctx<T>,
) -> Result<SumMultMap<T>> {
    let tensor = tensor_over_b(&a.carrier, &b.carrier, ctx)?;
    let mut targets = Vec::new();
    let mut parts: Vec<CMat<T>> = Vec::new();
    for (i, ca) in a.components.iter().enumerate() {
        for (j, cb) in b.components.iter().enumerate() {
            let mm = mult_map(action, ca, cb, ctx)?;
            let ia = coordinate_isometry(a.carrier.dim, a.offsets[i], ca.carrier.dim);
            let ib = coordinate_isometry(b.carrier.dim, b.offsets[j], cb.carrier.dim);
            let e = tensor.proj.mul(&ia.kron(&ib)).mul(&mm.tensor.q);
            parts.push(mm.map.mul(&e.adjoint()));
            targets.push(mm.target);
        }
    }
    let target = sum_object(targets)?;
    let mut map = CMat::zeros(target.carrier.dim, tensor.corr.dim);
    for (idx, part) in parts.iter().enumerate() {
        for r in 0..part.rows() {
            for c in 0..part.cols() {
                map[(target.offsets[idx] + r, c)] = part[(r, c)];
            }
        }
    }
    Ok(SumMultMap {
        tensor,
        target,
        map,
    })
}

/// Columns `offset..offset+dim` of the identity: the coordinate inclusion of
/// a direct summand.
fn coordinate_isometry<T: Real>(total: usize, offset: usize, dim: usize) -> CMat<T> {
    CMat::from_fn(total, dim, |r, c| {
        if r == offset + c {
            Cx::new(T::one(), T::zero())
        } else {
            Cx::zero()
        }
    })
}

fn sample_at_most<X: Copy>(items: &[X], cap: usize, seed: u64) -> Vec<X> {
    if items.len() <= cap {
        return items.to_vec();
    }
    let mut idx: Vec<usize> = (0..items.len()).collect();
    idx.shuffle(&mut rng(seed));
    idx.truncate(cap);
    idx.sort_unstable();
    idx.into_iter().map(|i| items[i]).collect()
}

struct VerifyObject<T: Real> {
    level: usize,
    class_id: usize,
    g: GammaObject<T>,
    rest: Rep<T>,
}

struct Morphism<T: Real> {
    t: CMat<T>,
    g: CMat<T>,
}

/// Verify the unitary-tensor-functor laws over every registered irreducible
/// occurrence with level at most the truncation, and every intertwiner-basis
/// morphism between occurrences of the same class. Construction failures are
/// recorded as failed checks rather than aborting, so damaged inputs still
/// produce a full report.
pub fn verify_functor<T: Real>(
    action: &IntertwinerAction<T>,
    registry: &Registry<T>,
    ctx: &Ctx<T>,
) -> Result<CheckSet> {
    if registry.n != action.group_parameter() {
        return Err(Error::Input(
            "registry and action use different group parameters".into(),
        ));
    }
    let kk = action.truncation().min(registry.k_max);
    let bound = ctx.tol.bound(T::one());
    let mut set = CheckSet::new();

    // Objects: every classified occurrence at every level up to the cap.
    let mut objs: Vec<VerifyObject<T>> = Vec::new();
    for k in 0..=kk {
        for block in &registry.levels[k] {
            let rep = ConcreteRep::from_block(block, k);
            let rest = rep.restricted(action.power_rep(k))?;
            let label = format!("class {} at level {k}", block.class_id);
            match gamma_object(action, rep, ctx) {
                Ok(g) => {
                    set.record_flag("functor.object", true, &label);
                    objs.push(VerifyObject {
                        level: k,
                        class_id: block.class_id,
                        g,
                        rest,
                    });
                }
                Err(e) => set.record_flag("functor.object", false, &format!("{label}: {e}")),
            }
        }
    }
    for o in objs.iter().filter(|o| o.level == 0) {
        set.record_flag(
            "functor.unit-object",
            o.g.carrier.dim == action.algebra().dim(),
            "level-0 carrier matches the algebra",
        );
    }

    // Projection realization and the identity morphism, sharing one
    // evaluation of the projector per object.
    for o in &objs {
        let label = format!("class {} at level {}", o.class_id, o.level);
        let phip = match action.act(o.level, o.level, &o.g.rep.projection()) {
            Ok(m) => m,
            Err(e) => {
                set.record_flag("functor.projection", false, &format!("{label}: {e}"));
                continue;
            }
        };
        let idem = phip.mul(&phip).max_abs_diff(&phip);
        let herm = phip.hermitian_residual();
        let range = phip.max_abs_diff(&o.g.incl.mul(&o.g.incl.adjoint()));
        set.record("functor.projection", idem.max(herm).max(range), bound, &label);
        let iso = o
            .g
            .incl
            .adjoint()
            .mul(&o.g.incl)
            .max_abs_diff(&CMat::identity(o.g.carrier.dim));
        set.record("functor.inclusion", iso, bound, &label);
        let gid = o.g.incl.adjoint().mul(&phip.mul(&o.g.incl));
        set.record(
            "functor.identity",
            gid.max_abs_diff(&CMat::identity(o.g.carrier.dim)),
            bound,
            &label,
        );
    }

    // Intertwiner-basis morphisms between same-class occurrences, with the
    // range-containment law checked on the uncompressed operator.
    let mut morphisms: BTreeMap<(usize, usize), Morphism<T>> = BTreeMap::new();
    for i in 0..objs.len() {
        for j in 0..objs.len() {
            if objs[i].class_id != objs[j].class_id {
                continue;
            }
            let label = format!(
                "class {}: level {} → level {}",
                objs[i].class_id, objs[i].level, objs[j].level
            );
            let basis = hom_basis(&objs[j].rest, &objs[i].rest, ctx.tol.rel)?;
            set.record_flag(
                "functor.morphism-space",
                basis.cols() == 1,
                &format!("{label}: hom dimension {}", basis.cols()),
            );
            if basis.cols() != 1 {
                continue;
            }
            let t = CMat::from_vec(objs[j].rest.dim(), objs[i].rest.dim(), basis.col(0))?;
            let w = objs[j]
                .g
                .rep
                .embedding
                .mul(&t)
                .mul(&objs[i].g.rep.embedding.adjoint());
            let phi = match action.act(objs[i].level, objs[j].level, &w) {
                Ok(m) => m,
                Err(e) => {
                    set.record_flag("functor.morphism", false, &format!("{label}: {e}"));
                    continue;
                }
            };
            let g = objs[j].g.incl.adjoint().mul(&phi.mul(&objs[i].g.incl));
            let range = phi
                .mul(&objs[i].g.incl)
                .max_abs_diff(&objs[j].g.incl.mul(&g));
            set.record("functor.range", range, bound, &label);
            morphisms.insert((i, j), Morphism { t, g });
        }
    }

    // Linearity over a genuinely multi-dimensional morphism space.
    {
        let lvl = if kk >= 2 { 2 } else { 1 };
        let amb = action.power_rep(lvl).dim();
        let pw = gamma_object(action, ConcreteRep::full(lvl, amb), ctx)?;
        let t1 = action.basis_element(lvl, lvl, 0);
        let t2 = if action.cspace_dim(lvl, lvl) > 1 {
            action.basis_element(lvl, lvl, 1)
        } else {
            t1.clone()
        };
        let c = Cx::new(T::lit(0.7), T::lit(-0.4));
        let combo = t1.add(&t2.scale(c));
        let g1 = gamma_morphism(action, &pw, &pw, &t1)?;
        let g2 = gamma_morphism(action, &pw, &pw, &t2)?;
        let gc = gamma_morphism(action, &pw, &pw, &combo)?;
        set.record(
            "functor.linear",
            gc.max_abs_diff(&g1.add(&g2.scale(c))),
            bound,
            &format!("level-{lvl} endomorphisms"),
        );
    }

    // Composition within each class: expand the product in the
    // one-dimensional morphism space and compare compressions.
    let class_ids: Vec<usize> = {
        let mut seen = Vec::new();
        for o in &objs {
            if !seen.contains(&o.class_id) {
                seen.push(o.class_id);
            }
        }
        seen
    };
    for &cid in &class_ids {
        let occ: Vec<usize> = (0..objs.len()).filter(|&i| objs[i].class_id == cid).collect();
        for &i in &occ {
            for &j in &occ {
                for &h in &occ {
                    let (mij, mjh, mih) = match (
                        morphisms.get(&(i, j)),
                        morphisms.get(&(j, h)),
                        morphisms.get(&(i, h)),
                    ) {
                        (Some(a), Some(b), Some(c)) => (a, b, c),
                        _ => continue,
                    };
                    let prod = mjh.t.mul(&mij.t);
                    let cof = mih.t.hs_inner(&prod) / mih.t.hs_inner(&mih.t);
                    let expand = prod.max_abs_diff(&mih.t.scale(cof));
                    let resid = mjh.g.mul(&mij.g).max_abs_diff(&mih.g.scale(cof));
                    set.record(
                        "functor.compose",
                        resid.max(expand),
                        bound,
                        &format!("class {cid}: levels {} → {} → {}",
                            objs[i].level, objs[j].level, objs[h].level),
                    );
                }
            }
        }
    }

    // Adjoints: the carrier-coordinate adjoint against the morphism of the
    // adjoint intertwiner.
    for (&(i, j), m) in &morphisms {
        let back = match morphisms.get(&(j, i)) {
            Some(b) => b,
            None => continue,
        };
        let tadj = m.t.adjoint();
        let cof = back.t.hs_inner(&tadj) / back.t.hs_inner(&back.t);
        let expand = tadj.max_abs_diff(&back.t.scale(cof));
        let resid = m.g.adjoint().max_abs_diff(&back.g.scale(cof));
        set.record(
            "functor.adjoint",
            resid.max(expand),
            bound,
            &format!(
                "class {}: level {} → level {}",
                objs[i].class_id, objs[i].level, objs[j].level
            ),
        );
    }

    // Multiplication maps for every object pair within the truncation.
    let mut mults: BTreeMap<(usize, usize), MultMap<T>> = BTreeMap::new();
    for i in 0..objs.len() {
        for j in 0..objs.len() {
            if objs[i].level + objs[j].level > kk {
                continue;
            }
            let label = format!(
                "classes ({},{}) at levels ({},{})",
                objs[i].class_id, objs[j].class_id, objs[i].level, objs[j].level
            );
            let mm = match mult_map(action, &objs[i].g, &objs[j].g, ctx) {
                Ok(mm) => mm,
                Err(e) => {
                    set.record_flag("functor.mult", false, &format!("{label}: {e}"));
                    continue;
                }
            };
            let uin = mm
                .map
                .adjoint()
                .mul(&mm.map)
                .max_abs_diff(&CMat::identity(mm.map.cols()));
            let uout = mm
                .map
                .mul(&mm.map.adjoint())
                .max_abs_diff(&CMat::identity(mm.map.rows()));
            set.record("functor.mult-unitary", uin.max(uout), bound, &label);
            set.record(
                "functor.mult-bilinear",
                mm.tensor
                    .corr
                    .map_bimodule_residual(&mm.target.carrier, &mm.map),
                bound,
                &label,
            );
            set.record("functor.mult-range", mm.range_residual, bound, &label);
            mults.insert((i, j), mm);
        }
    }

    // Unit laws: multiplying with the level-0 object acts by the algebra.
    if let Some(i0) = (0..objs.len()).find(|&i| objs[i].level == 0) {
        let nb = action.algebra().dim();
        for (i, obj) in objs.iter().enumerate() {
            let gdim = obj.g.carrier.dim;
            let seed = ctx.sub_seed("functor.mult-unit", &[i as u64]);
            let b = gaussian_complex::<T>(seed, nb);
            let x = gaussian_complex::<T>(seed.wrapping_add(1), gdim);
            if let Some(mm) = mults.get(&(i0, i)) {
                let q = mm.tensor.simple(&b, &x);
                let got = mm.map.apply(&q);
                let want = objs[i].g.carrier.left_of(&b).apply(&x);
                set.record(
                    "functor.mult-unit",
                    vec_max_diff(&got, &want),
                    bound,
                    &format!("unit ⊗ class {} at level {}", objs[i].class_id, objs[i].level),
                );
            }
            if let Some(mm) = mults.get(&(i, i0)) {
                let q = mm.tensor.simple(&x, &b);
                let got = mm.map.apply(&q);
                let want = objs[i].g.carrier.right_of(&b).apply(&x);
                set.record(
                    "functor.mult-unit",
                    vec_max_diff(&got, &want),
                    bound,
                    &format!("class {} at level {} ⊗ unit", objs[i].class_id, objs[i].level),
                );
            }
        }
    }

    // Naturality: m(τ,τ′)(Γ(T) ⊗ Γ(T′)) = Γ(T ⊗ T′) m(σ,σ′) over sampled
    // morphism pairs.
    {
        let keys: Vec<(usize, usize)> = morphisms.keys().copied().collect();
        let mut quads = Vec::new();
        for &(i, j) in &keys {
            for &(ip, jp) in &keys {
                if mults.contains_key(&(i, ip)) && mults.contains_key(&(j, jp)) {
                    quads.push((i, j, ip, jp));
                }
            }
        }
        let chosen = sample_at_most(&quads, NATURAL_CAP, ctx.sub_seed("functor.natural", &[]));
        for (i, j, ip, jp) in chosen {
            let m1 = &morphisms[&(i, j)];
            let m2 = &morphisms[&(ip, jp)];
            let src_mm = &mults[&(i, ip)];
            let tgt_mm = &mults[&(j, jp)];
            let lift = tgt_mm
                .tensor
                .proj
                .mul(&m1.g.kron(&m2.g))
                .mul(&src_mm.tensor.q);
            let lhs = tgt_mm.map.mul(&lift);
            let label = format!(
                "({}→{}) ⊗ ({}→{}) [object indices]",
                i, j, ip, jp
            );
            let gtt = match gamma_morphism(
                action,
                &src_mm.target,
                &tgt_mm.target,
                &m1.t.kron(&m2.t),
            ) {
                Ok(g) => g,
                Err(e) => {
                    set.record_flag("functor.natural", false, &format!("{label}: {e}"));
                    continue;
                }
            };
            let rhs = gtt.mul(&src_mm.map);
            set.record("functor.natural", lhs.max_abs_diff(&rhs), bound, &label);
        }
    }

    // Associativity over sampled object triples, with both routes mapped
    // into one shared realization of the triple tensor object.
    {
        let mut triples = Vec::new();
        for i in 0..objs.len() {
            for j in 0..objs.len() {
                for h in 0..objs.len() {
                    if objs[i].level + objs[j].level + objs[h].level <= kk {
                        triples.push((i, j, h));
                    }
                }
            }
        }
        let chosen = sample_at_most(&triples, ASSOC_CAP, ctx.sub_seed("functor.mult-assoc", &[]));
        for (i, j, h) in chosen {
            let label = format!(
                "classes ({},{},{}) at levels ({},{},{})",
                objs[i].class_id,
                objs[j].class_id,
                objs[h].class_id,
                objs[i].level,
                objs[j].level,
                objs[h].level
            );
            let (m_ij, m_jh) = match (mults.get(&(i, j)), mults.get(&(j, h))) {
                (Some(a), Some(b)) => (a, b),
                _ => {
                    set.record_flag(
                        "functor.mult-assoc",
                        false,
                        &format!("{label}: a factor multiplication is unavailable"),
                    );
                    continue;
                }
            };
            let trip = objs[i].g.rep.tensor(&objs[j].g.rep).tensor(&objs[h].g.rep);
            let outcome = (|| -> Result<T> {
                let target = gamma_object(action, trip, ctx)?;
                let m_ij_h =
                    mult_map_onto(action, &m_ij.target, &objs[h].g, target.clone(), ctx)?;
                let m_i_jh = mult_map_onto(action, &objs[i].g, &m_jh.target, target, ctx)?;
                let t_ab_c = tensor_over_b(&m_ij.tensor.corr, &objs[h].g.carrier, ctx)?;
                let t_a_bc = tensor_over_b(&objs[i].g.carrier, &m_jh.tensor.corr, ctx)?;
                let alpha = associator(&m_ij.tensor, &t_ab_c, &m_jh.tensor, &t_a_bc)?;
                let lift1 = m_ij_h
                    .tensor
                    .proj
                    .mul(&m_ij.map.kron(&CMat::identity(objs[h].g.carrier.dim)))
                    .mul(&t_ab_c.q);
                let p1 = m_ij_h.map.mul(&lift1);
                let lift2 = m_i_jh
                    .tensor
                    .proj
                    .mul(&CMat::identity(objs[i].g.carrier.dim).kron(&m_jh.map))
                    .mul(&t_a_bc.q);
                let p2 = m_i_jh.map.mul(&lift2).mul(&alpha);
                Ok(p1.max_abs_diff(&p2))
            })();
            match outcome {
                Ok(res) => set.record("functor.mult-assoc", res, bound, &label),
                Err(e) => {
                    set.record_flag("functor.mult-assoc", false, &format!("{label}: {e}"))
                }
            }
        }
    }

    // Kernel identity behind surjectivity, over first occurrences of each
    // class: ker(φ(P_σ⊗P_τ) ∘ m) = ker(φ(P_σ) ⊗_B φ(P_τ)).
    {
        let mut first = Vec::new();
        for &cid in &class_ids {
            if let Some(i) = (0..objs.len()).find(|&i| objs[i].class_id == cid) {
                first.push(i);
            }
        }
        for &i in &first {
            for &j in &first {
                let (k, l) = (objs[i].level, objs[j].level);
                if k + l > kk {
                    continue;
                }
                let label = format!("classes ({},{})", objs[i].class_id, objs[j].class_id);
                let outcome = (|| -> Result<(bool, T)> {
                    let pair = action.pair(k, l)?;
                    let pst = objs[i].g.rep.projection().kron(&objs[j].g.rep.projection());
                    let phipst = action.act(k + l, k + l, &pst)?;
                    let a = phipst.mul(action.mult_map(k, l)?);
                    let phip_i = action.act(k, k, &objs[i].g.rep.projection())?;
                    let phip_j = action.act(l, l, &objs[j].g.rep.projection())?;
                    let b = pair.lift_pair(&phip_i, &phip_j);
                    let ka = psd_kernel(&a.adjoint().mul(&a), ctx.tol.rel)?;
                    let kb = psd_kernel(&b.adjoint().mul(&b), ctx.tol.rel)?;
                    let ranks = ka.cols() == kb.cols();
                    let cross = a.mul(&kb).max_abs().max(b.mul(&ka).max_abs());
                    Ok((ranks, cross))
                })();
                match outcome {
                    Ok((ranks, cross)) => {
                        set.record_flag(
                            "functor.kernel-rank",
                            ranks,
                            &format!("{label}: kernel dimensions"),
                        );
                        set.record("functor.kernel-identity", cross, bound, &label);
                    }
                    Err(e) => set.record_flag(
                        "functor.kernel-rank",
                        false,
                        &format!("{label}: {e}"),
                    ),
                }
            }
        }
    }

    Ok(set)
}

fn vec_max_diff<T: Real>(a: &[Cx<T>], b: &[Cx<T>]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (*x - *y).norm())
        .fold(T::zero(), T::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::mutations;
    use crate::hilbmod::AlgebraShape;
    use crate::repcat::build_registry;

    fn ctx() -> Ctx<f64> {
        Ctx::default()
    }

    fn scalar_action(k_max: usize) -> IntertwinerAction<f64> {
        IntertwinerAction::trivial(&AlgebraShape::scalar(), 3, k_max, &ctx()).unwrap()
    }

    fn first_block(reg: &Registry<f64>, level: usize, class_id: usize) -> ConcreteRep<f64> {
        let b = reg.levels[level]
            .iter()
            .find(|b| b.class_id == class_id)
            .expect("occurrence");
        ConcreteRep::from_block(b, level)
    }

    #[test]
    fn objects_match_frozen_dimensions_over_scalars() {
        let ctx = ctx();
        let action = scalar_action(3);
        let reg = build_registry::<f64>(3, 3, &ctx).unwrap();
        // Class ids: level-0 block is the trivial class.
        let triv_id = reg.levels[0][0].class_id;
        let pi_id = reg.levels[1][0].class_id;
        let unit = gamma_object(&action, first_block(&reg, 0, triv_id), &ctx).unwrap();
        assert_eq!(unit.carrier.dim, 1);
        let pi = gamma_object(&action, first_block(&reg, 1, pi_id), &ctx).unwrap();
        assert_eq!(pi.carrier.dim, 3);
        // Spin-2 appears at level 2 with a 5-dimensional carrier.
        let spin2_id = reg.levels[2]
            .iter()
            .map(|b| b.class_id)
            .find(|&c| reg.class(c).dim == 5)
            .unwrap();
        let spin2 = gamma_object(&action, first_block(&reg, 2, spin2_id), &ctx).unwrap();
        assert_eq!(spin2.carrier.dim, 5);
        // Full powers are identified with the module exactly.
        let pw2 = gamma_object(&action, ConcreteRep::full(2, 9), &ctx).unwrap();
        assert_eq!(pw2.carrier.dim, 9);
        assert!(pw2.incl.max_abs_diff(&CMat::identity(9)) == 0.0);
    }

    #[test]
    fn functor_laws_hold_for_the_free_module_over_scalars() {
        let ctx = ctx();
        let action = scalar_action(2);
        let reg = build_registry::<f64>(3, 2, &ctx).unwrap();
        let set = verify_functor(&action, &reg, &ctx).unwrap();
        assert!(
            set.all_pass(),
            "failed: {:?}\n{:?}",
            set.failed_names(),
            set.failed()
        );
    }

    #[test]
    fn functor_laws_hold_with_matrix_coefficients() {
        let ctx = ctx();
        let alg = AlgebraShape::new(vec![2]).unwrap();
        let action = IntertwinerAction::<f64>::trivial(&alg, 3, 2, &ctx).unwrap();
        let reg = build_registry::<f64>(3, 2, &ctx).unwrap();
        let set = verify_functor(&action, &reg, &ctx).unwrap();
        assert!(
            set.all_pass(),
            "failed: {:?}\n{:?}",
            set.failed_names(),
            set.failed()
        );
        // Frozen inventory: spin-2 carrier picks up the algebra dimension.
        let spin2_id = reg.levels[2]
            .iter()
            .map(|b| b.class_id)
            .find(|&c| reg.class(c).dim == 5)
            .unwrap();
        let spin2 = gamma_object(&action, first_block(&reg, 2, spin2_id), &ctx).unwrap();
        assert_eq!(spin2.carrier.dim, 4 * 5);
    }

    #[test]
    fn power_multiplication_is_recovered_exactly() {
        let ctx = ctx();
        let action = scalar_action(3);
        let pw1 = gamma_object(&action, ConcreteRep::full(1, 3), &ctx).unwrap();
        let mm = mult_map(&action, &pw1, &pw1, &ctx).unwrap();
        assert_eq!(mm.target.carrier.dim, 9);
        let direct = action.mult_map(1, 1).unwrap();
        assert!(mm.map.max_abs_diff(direct) < 1e-10);
        // Standard ⊗ spin-2 lands in a 15-dimensional carrier.
        let reg = build_registry::<f64>(3, 3, &ctx).unwrap();
        let pi_id = reg.levels[1][0].class_id;
        let spin2_id = reg.levels[2]
            .iter()
            .map(|b| b.class_id)
            .find(|&c| reg.class(c).dim == 5)
            .unwrap();
        let pi = gamma_object(&action, first_block(&reg, 1, pi_id), &ctx).unwrap();
        let spin2 = gamma_object(&action, first_block(&reg, 2, spin2_id), &ctx).unwrap();
        let mm = mult_map(&action, &pi, &spin2, &ctx).unwrap();
        assert_eq!(mm.target.carrier.dim, 15);
        let uin = mm
            .map
            .adjoint()
            .mul(&mm.map)
            .max_abs_diff(&CMat::identity(mm.map.cols()));
        assert!(uin < 1e-9, "not isometric: {uin:.3e}");
    }

    #[test]
    fn sums_compose_blockwise() {
        let ctx = ctx();
        let action = scalar_action(3);
        let reg = build_registry::<f64>(3, 3, &ctx).unwrap();
        let pi_id = reg.levels[1][0].class_id;
        let spin2_id = reg.levels[2]
            .iter()
            .map(|b| b.class_id)
            .find(|&c| reg.class(c).dim == 5)
            .unwrap();
        let pi = gamma_object(&action, first_block(&reg, 1, pi_id), &ctx).unwrap();
        let spin2 = gamma_object(&action, first_block(&reg, 2, spin2_id), &ctx).unwrap();
        let sum = sum_object(vec![pi.clone(), spin2]).unwrap();
        assert_eq!(sum.carrier.dim, 8);
        // One diagonal identity block, everything else zero.
        let mut blocks = BTreeMap::new();
        blocks.insert((0usize, 0usize), CMat::<f64>::identity(3));
        let m = sum_morphism(&action, &sum, &sum, &blocks).unwrap();
        assert!(m.submatrix(0, 0, 3, 3).max_abs_diff(&CMat::identity(3)) < 1e-10);
        assert!(m.submatrix(0, 3, 3, 5).max_abs() == 0.0);
        assert!(m.submatrix(3, 0, 5, 3).max_abs() == 0.0);
        assert!(m.submatrix(3, 3, 5, 5).max_abs() == 0.0);
        // Sum multiplication is unitary onto the component targets.
        let unit = gamma_object(
            &action,
            first_block(&reg, 0, reg.levels[0][0].class_id),
            &ctx,
        )
        .unwrap();
        let two_units = sum_object(vec![unit.clone(), unit]).unwrap();
        assert_eq!(two_units.carrier.dim, 2);
        let smm = sum_mult_map(&action, &two_units, &sum_object(vec![pi]).unwrap(), &ctx).unwrap();
        assert_eq!(smm.target.carrier.dim, 6);
        let uin = smm
            .map
            .adjoint()
            .mul(&smm.map)
            .max_abs_diff(&CMat::identity(smm.map.cols()));
        assert!(uin < 1e-9, "not unitary: {uin:.3e}");
    }

    #[test]
    fn broken_action_is_flagged_by_the_functor_report() {
        let ctx = ctx();
        let broken = mutations::mutated::<f64>(mutations::Mutation::Unit, &ctx).unwrap();
        let reg = build_registry::<f64>(3, 2, &ctx).unwrap();
        let set = verify_functor(&broken, &reg, &ctx).unwrap();
        assert!(!set.all_pass());
        assert!(
            set.failed_names().iter().any(|n| n == "functor.identity"),
            "expected the identity law to trip, failed: {:?}",
            set.failed_names()
        );
    }
}
