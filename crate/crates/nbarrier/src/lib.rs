//! Exact and asymptotic solvers for 1-D scattering through N equally
//! spaced rectangular barriers.
//!
//! The exact transfer-matrix solver (cross-checked by a dense linear-solve
//! oracle) is the ground truth; the opaque-barrier closed forms — the
//! factorized transmission amplitude, its structure-independent phase, the
//! resonance condition and the double-barrier multiple-reflection
//! decomposition — are evaluated against it. Natural units ħ = 1, 2m = 1,
//! so E = ω = k².
//!
//! ```
//! use nbarrier::{solve_exact, unitarity_defect, BarrierSystem, DispersionModel};
//!
//! let system = BarrierSystem::new(2, 1.0, 3.0, 10.0).unwrap();
//! let model = DispersionModel::particle(10.0).unwrap();
//! let solution = solve_exact(&system, &model, 5.0).unwrap();
//! assert!(unitarity_defect(&solution).abs() < 1e-10);
//! ```

pub mod dispersion;
pub mod double_barrier;
pub mod error;
pub mod exact;
pub mod opaque;
pub mod timing;
pub mod validate;

pub use dispersion::{DispersionKind, DispersionModel, Wavevectors};
pub use error::{Error, Result};
pub use exact::{
    brute_force_solve, evaluate_wavefunction, interface_residuals, solve_exact, unitarity_defect,
    BarrierSystem, ScatteringSolution,
};
pub use opaque::{
    antiresonance_frequencies, find_resonances, opaque_phase, opaque_phase_time,
    opaque_probability, opaque_transmission, resonance_time_budget, OpaqueFactorization,
    ResonanceReport, TimeBudget,
};
pub use timing::{phase_budget, phase_time, PhaseBudget, PhaseTimeMethod, PhaseTimeResult};
