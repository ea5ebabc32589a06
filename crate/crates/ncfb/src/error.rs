//! Crate-wide error type.
//!
//! Errors are split by how a caller should react: `Dim`/`Input`-class errors
//! mean the request itself was malformed, `Axiom` means supplied data failed a
//! structural law (with the law named and the residual recorded), and
//! `Numerical`/`Internal` mean a kernel could not certify its own result.

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Shape or dimension mismatch in the inputs.
    #[error("dimension error: {0}")]
    Dim(String),

    /// Structured input that is well-shaped but invalid (bad cutoff set,
    /// unknown identifier, inconsistent block data, ...).
    #[error("invalid input: {0}")]
    Input(String),

    /// Supplied data violates a named structural law.
    #[error("axiom violation [{law}]: residual {residual:.3e} exceeds bound {bound:.3e} ({context})")]
    Axiom {
        law: &'static str,
        residual: f64,
        bound: f64,
        context: String,
    },

    /// A map that was required to be equivariant is not.
    #[error("not equivariant: {context} (residual {residual:.3e})")]
    NotEquivariant { context: String, residual: f64 },

    /// A requested construction exceeds the configured tensor truncation.
    #[error("truncation exceeded: level {needed} requested but truncation is {cap}")]
    Truncation { needed: usize, cap: usize },

    /// A numerical kernel failed to certify its result (non-convergence,
    /// unexpected degeneracy, rank collapse).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Invariant broken inside the crate itself.
    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    /// Convenience constructor for axiom violations.
    pub fn axiom(law: &'static str, residual: f64, bound: f64, context: impl Into<String>) -> Self {
        Error::Axiom {
            law,
            residual,
            bound,
            context: context.into(),
        }
    }
}
