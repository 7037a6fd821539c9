use thiserror::Error;

/// Errors shared by all solver modules.
#[derive(Debug, Error)]
pub enum Error {
    /// Frequency outside the open interval where the requested quantity is
    /// defined. Both endpoints are excluded because downstream formulas
    /// divide by k and by chi.
    #[error("frequency {omega} outside the admissible open interval (0, {v0})")]
    OmegaOutOfRange { omega: f64, v0: f64 },

    #[error("invalid barrier system: {0}")]
    InvalidSystem(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The interface matching matrix degenerates; this happens only when
    /// k = 0 or the barrier decay constant vanishes (omega = V0).
    #[error("singular interface matrix at omega = {omega}: {reason}")]
    SingularInterface { omega: f64, reason: String },

    /// The dense matching system could not be solved reliably.
    #[error("dense matching system is numerically singular (condition estimate {condition_estimate:.3e})")]
    SingularSystem { condition_estimate: f64 },

    /// The opaque factorization diverges at a resonance of the structure;
    /// the offending denominator is reported instead of a huge value.
    #[error("opaque approximation invalid near resonance: |denominator| = {denominator:.6e} below guard {guard:.3e}")]
    NearResonance { denominator: f64, guard: f64 },

    #[error("double-barrier decomposition is singular: {0}")]
    DecompositionSingular(String),

    #[error("multiple-reflection series diverges: |r1*r2| = {ratio} >= 1")]
    SeriesDivergent { ratio: f64 },

    /// The transmitted amplitude is too small to carry phase information.
    #[error(
        "transmitted amplitude underflow (|T| = {magnitude:.3e}); reduce N or the barrier width"
    )]
    AmplitudeUnderflow { magnitude: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
