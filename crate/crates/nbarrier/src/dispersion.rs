//! Frequency-to-wavevector mapping shared by every other module.
//!
//! Natural units ħ = 1, 2m = 1 throughout, so E = ω = k² in the
//! barrier-free regions and k² + χ² = V0 inside a barrier of height V0.
//! The group velocity is dω/dk = 2k and all lengths come out in units
//! where k is O(1).

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Supported dispersion laws.
///
/// Only the massive-particle mapping is implemented; the enumeration is the
/// extension point for waveguide-style laws with a different ω ↦ k.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DispersionKind {
    NonrelativisticParticle,
}

/// Dispersion law plus the barrier height it refers to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DispersionModel {
    kind: DispersionKind,
    barrier_height: f64,
}

/// Propagating and evanescent wavevectors at one frequency, in the
/// tunneling regime 0 < ω < V0 where both are real and positive.
#[derive(Debug, Clone, Copy)]
pub struct Wavevectors {
    /// Real wavevector k in the barrier-free regions.
    pub k: f64,
    /// Decay constant χ of the evanescent wave inside a barrier.
    pub chi: f64,
    /// dω/dk of the free-space dispersion.
    pub group_velocity: f64,
}

impl DispersionModel {
    /// Particle model with barrier height `v0`.
    ///
    /// `v0 = 0` is accepted so that free propagation can be modelled by the
    /// exact solver; it leaves the tunneling interval (0, V0) empty, so
    /// [`DispersionModel::eval`] rejects every frequency for such a model.
    pub fn particle(v0: f64) -> Result<Self> {
        if !v0.is_finite() || v0 < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "barrier height must be finite and non-negative, got {v0}"
            )));
        }
        Ok(Self {
            kind: DispersionKind::NonrelativisticParticle,
            barrier_height: v0,
        })
    }

    pub fn kind(&self) -> DispersionKind {
        self.kind
    }

    pub fn barrier_height(&self) -> f64 {
        self.barrier_height
    }

    /// Wavevectors in the tunneling regime 0 < ω < V0.
    ///
    /// Evaluation exactly at ω = 0 or ω = V0 is rejected rather than
    /// returning k = 0 or χ = 0, because downstream formulas divide by both.
    pub fn eval(&self, omega: f64) -> Result<Wavevectors> {
        if !omega.is_finite() || omega <= 0.0 || omega >= self.barrier_height {
            return Err(Error::OmegaOutOfRange {
                omega,
                v0: self.barrier_height,
            });
        }
        let k = match self.kind {
            DispersionKind::NonrelativisticParticle => omega.sqrt(),
        };
        let chi = (self.barrier_height - omega).sqrt();
        Ok(Wavevectors {
            k,
            chi,
            group_velocity: 2.0 * k,
        })
    }

    /// Free-space wavevector k(ω), valid for any ω > 0.
    pub fn free_wavevector(&self, omega: f64) -> Result<f64> {
        if !omega.is_finite() || omega <= 0.0 {
            return Err(Error::OmegaOutOfRange {
                omega,
                v0: self.barrier_height,
            });
        }
        Ok(match self.kind {
            DispersionKind::NonrelativisticParticle => omega.sqrt(),
        })
    }

    /// Complex decay constant inside a barrier of height `v0`:
    /// sqrt(V0 − ω), real and positive for tunneling, +i|q| above the
    /// barrier where the region becomes propagating.
    pub fn barrier_decay(v0: f64, omega: f64) -> Complex64 {
        Complex64::new(v0 - omega, 0.0).sqrt()
    }
}
