//! Finite-truncation toolkit for noncommutative special-orthogonal frame
//! bundles.
//!
//! The crate builds, over a finite-dimensional coefficient algebra, the full
//! chain from rotation-group representation theory to operator-algebraic
//! geometry:
//!
//! * [`liegroup`] — the special orthogonal Lie algebra, its representations,
//!   Casimir operators, and seeded random group elements;
//! * [`repcat`] — decomposition into irreducible blocks, intertwiner spaces,
//!   a registry of irreducible classes, and conjugation solutions;
//! * [`hilbmod`] — finite coefficient algebras, inner-product bimodules,
//!   balanced tensor products, and their associators;
//! * [`action`] — intertwiner actions on balanced tensor powers: the family
//!   of maps from intertwiner spaces into module operators, with validation
//!   of the composition, adjoint, unit, and tensor laws;
//! * [`gamma`] — the induced functor on group representations: objects as
//!   operator ranges, morphisms, and unitary multiplication maps;
//! * [`reconstruct`] — the graded algebra assembled from those ranges, its
//!   involution, represented form, spectral subspaces, and recovery of the
//!   original module;
//! * [`so2`] — the abelian specialization: self-Morita bimodules over the
//!   circle group, factor systems, and cocycle identities.
//!
//! All numerics run on a single dense complex kernel ([`linalg`]) that is
//! generic over the real scalar (`f64` for production, `f32` for smoke
//! coverage) and deterministic for a fixed seed. Law verification reports
//! through [`check`], which names every property it tests.

pub mod action;
pub mod check;
pub mod error;
pub mod gamma;
pub mod hilbmod;
pub mod liegroup;
pub mod linalg;
pub mod reconstruct;
pub mod repcat;
pub mod report;
pub mod rng;
pub mod scalar;
pub mod so2;

pub use action::IntertwinerAction;
pub use check::{CheckSet, LawCheck};
pub use gamma::{gamma_morphism, gamma_object, mult_map, verify_functor, ConcreteRep, GammaObject, MultMap};
pub use error::{Error, Result};
pub use reconstruct::{
    build_algebra, check_classical, check_freeness, check_recovery, cutoff_through_level,
    round_trip, spectral_of_rep, spectral_subspace, verify_bundle, SpectralSubspace,
    TruncatedFrameBundle,
};
pub use report::{
    bundle_structure_values, digest_stream, so2_structure_values, tensor_digest, CheckRecord,
    Environment, Report, Tables, TensorDigest,
};
pub use scalar::{cx, Ctx, Cx, Real, Tol};
pub use so2::{
    build_so2_algebra, cycle_bimodule, factor_system, make_morita, round_trip_so2, verify_so2,
    CircleAlgebra, FactorSystem, MoritaBimodule,
};

/// Default-precision matrix type.
pub type Mat = linalg::CMat<f64>;
/// Default-precision complex scalar.
pub type C64 = Cx<f64>;
/// Default-precision context (tolerance + seed).
pub type Context = Ctx<f64>;
