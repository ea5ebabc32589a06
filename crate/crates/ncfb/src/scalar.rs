//! Real scalar abstraction and tolerance policy.
//!
//! Every matrix in the crate has entries in `Complex<T>` for a real field
//! `T: Real`. The crate is generic over `T`; `f64` is the working default and
//! `f32` is supported for quick low-precision runs.

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};
use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

/// Real field underlying all complex matrix entries.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + 'static
{
    /// Default relative tolerance for residual, rank and null-space decisions.
    const DEFAULT_TOL: Self;

    /// Lossy conversion from an `f64` literal.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal conversion")
    }

    /// Lossy conversion to `f64` (for reports and digests).
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f64 {
    const DEFAULT_TOL: Self = 1e-9;
}

impl Real for f32 {
    const DEFAULT_TOL: Self = 1e-4;
}

/// Scale factor for internal sanity gates: 1 at double precision, the
/// machine-epsilon ratio for lower-precision scalars, so a gate keeps its
/// meaning in units of roundoff.
#[inline]
pub fn gate_scale<T: Real>() -> T {
    T::lit(T::epsilon().as_f64() / f64::EPSILON)
}

/// Scale factor for spectral decision thresholds (eigenvalue clustering,
/// class matching): the square root of [`gate_scale`], which stays between
/// roundoff noise and genuine spectral separation at every precision.
#[inline]
pub fn sep_scale<T: Real>() -> T {
    gate_scale::<T>().sqrt()
}

/// Complex scalar over the crate's real field.
pub type Cx<T> = Complex<T>;

/// Build a complex scalar from real and imaginary parts.
#[inline]
pub fn cx<T: Real>(re: T, im: T) -> Cx<T> {
    Complex::new(re, im)
}

/// Tolerance policy: all "within ε" tests compare a residual against
/// `rel * max(1, scale)` where `scale` is the relevant operand norm.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tol<T: Real> {
    pub rel: T,
}

impl<T: Real> Default for Tol<T> {
    fn default() -> Self {
        Tol { rel: T::DEFAULT_TOL }
    }
}

impl<T: Real> Tol<T> {
    pub fn new(rel: T) -> Self {
        Tol { rel }
    }

    /// Acceptance bound for a residual measured against operands of the given
    /// norm scale.
    #[inline]
    pub fn bound(&self, scale: T) -> T {
        self.rel * scale.max(T::one())
    }

    /// True if `residual` is acceptable at the given scale.
    #[inline]
    pub fn ok(&self, residual: T, scale: T) -> bool {
        residual <= self.bound(scale)
    }
}

/// Shared context: tolerance plus the seed from which every internal random
/// draw is derived. Two runs with equal context perform identical arithmetic.
#[derive(Clone, Copy, Debug)]
pub struct Ctx<T: Real> {
    pub tol: Tol<T>,
    pub seed: u64,
}

impl<T: Real> Default for Ctx<T> {
    fn default() -> Self {
        Ctx {
            tol: Tol::default(),
            seed: 0xC0FFEE,
        }
    }
}

impl<T: Real> Ctx<T> {
    pub fn new(rel_tol: T, seed: u64) -> Self {
        Ctx {
            tol: Tol::new(rel_tol),
            seed,
        }
    }

    /// Derive a sub-seed from a label and an index list. The derivation is a
    /// fixed hash, so it does not depend on call order; parallel callers get
    /// reproducible streams.
    pub fn sub_seed(&self, label: &str, indices: &[u64]) -> u64 {
        let mut h = self.seed ^ 0x9E37_79B9_7F4A_7C15;
        let mut mix = |v: u64| {
            h ^= v;
            h = h.wrapping_mul(0xBF58_476D_1CE4_E5B9);
            h ^= h >> 27;
            h = h.wrapping_mul(0x94D0_49BB_1331_11EB);
            h ^= h >> 31;
        };
        for b in label.bytes() {
            mix(b as u64);
        }
        for &v in indices {
            mix(v.wrapping_add(0x1234_5678_9ABC_DEF1));
        }
        h
    }
}
