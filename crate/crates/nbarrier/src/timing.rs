//! Tunneling phase times and the headline timing claims.
//!
//! The phase time is τ = dφ/dω with φ = arg{T·e^{ika}}. It is computed from
//! the logarithmic derivative of the complex amplitude G(ω) = T(ω)·e^{ik(ω)a},
//!
//! ```text
//! τ ≈ Im[ (G(ω+h) − G(ω−h)) / (2h · G(ω)) ]
//! ```
//!
//! with one Richardson extrapolation level. Working on G itself avoids 2π
//! unwrapping failures where the phase winds rapidly near a resonance; the
//! unwrapped angle is kept for human-readable output only.

use num_complex::Complex64;

use crate::dispersion::{DispersionModel, Wavevectors};
use crate::double_barrier::{decompose_exact, PartialDecomposition};
use crate::error::{Error, Result};
use crate::exact::{solve_exact, BarrierSystem};
use crate::opaque;

/// Default finite-difference step, relative to ω.
pub const DEFAULT_FD_STEP_REL: f64 = 1e-6;

/// Off-resonance gate: independence claims hold only where
/// |D(ω)| > 0.1·|2χk|.
pub const RESONANCE_GATE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseTimeMethod {
    /// Central difference of G fed through the logarithmic derivative.
    LogDerivative,
    /// Central difference of the continuity-tracked phase angle.
    CentralDifference,
}

#[derive(Debug, Clone, Copy)]
pub struct PhaseTimeResult {
    pub omega: f64,
    /// Principal-value angle of T·e^{ika} at ω.
    pub phase: f64,
    /// dφ/dω.
    pub tau: f64,
    pub method: PhaseTimeMethod,
}

/// Wraps an angle to (−π, π].
pub fn wrap_angle(x: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let wrapped = x - two_pi * (x / two_pi).round();
    if wrapped <= -std::f64::consts::PI {
        wrapped + two_pi
    } else {
        wrapped
    }
}

/// Transmitted amplitude referenced to one barrier width, T(ω)·e^{ik(ω)a}.
pub fn transmission_amplitude(
    system: &BarrierSystem,
    model: &DispersionModel,
    omega: f64,
) -> Result<Complex64> {
    let sol = solve_exact(system, model, omega)?;
    let k = model.free_wavevector(omega)?;
    Ok(sol.transmission * Complex64::new(0.0, k * system.width()).exp())
}

/// Phase time via the logarithmic derivative (the default method).
pub fn phase_time(
    system: &BarrierSystem,
    model: &DispersionModel,
    omega: f64,
    step: Option<f64>,
) -> Result<PhaseTimeResult> {
    phase_time_with(system, model, omega, step, PhaseTimeMethod::LogDerivative)
}

/// Phase time with an explicit differentiation method.
pub fn phase_time_with(
    system: &BarrierSystem,
    model: &DispersionModel,
    omega: f64,
    step: Option<f64>,
    method: PhaseTimeMethod,
) -> Result<PhaseTimeResult> {
    let h = step.unwrap_or(DEFAULT_FD_STEP_REL * omega);
    if !h.is_finite() || h <= 0.0 || omega - h <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "step {h} leaves the admissible interval from omega = {omega}"
        )));
    }
    let v0 = system.height();
    if v0 > 0.0 && (omega - v0).abs() <= h {
        return Err(Error::InvalidArgument(format!(
            "step window [{}, {}] straddles the band edge V0 = {v0}",
            omega - h,
            omega + h
        )));
    }

    let g0 = transmission_amplitude(system, model, omega)?;
    if g0.norm() < 1e-300 {
        return Err(Error::AmplitudeUnderflow {
            magnitude: g0.norm(),
        });
    }

    let estimate = |hh: f64| -> Result<f64> {
        let gp = transmission_amplitude(system, model, omega + hh)?;
        let gm = transmission_amplitude(system, model, omega - hh)?;
        Ok(match method {
            PhaseTimeMethod::LogDerivative => ((gp - gm) / (2.0 * hh * g0)).im,
            PhaseTimeMethod::CentralDifference => {
                // relative angles keep each branch within (-pi, pi] of g0
                ((gp / g0).arg() - (gm / g0).arg()) / (2.0 * hh)
            }
        })
    };
    let coarse = estimate(h)?;
    let fine = estimate(0.5 * h)?;
    Ok(PhaseTimeResult {
        omega,
        phase: g0.arg(),
        tau: (4.0 * fine - coarse) / 3.0,
        method,
    })
}

/// One (χa, τ) sample per barrier width at fixed ω.
#[derive(Debug, Clone)]
pub struct HartmanScan {
    pub points: Vec<(f64, f64)>,
    /// (max − min)/|mean| of the τ samples.
    pub relative_spread: f64,
}

fn relative_spread(taus: &[f64]) -> f64 {
    let (mut lo, mut hi, mut sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
    for &t in taus {
        lo = lo.min(t);
        hi = hi.max(t);
        sum += t;
    }
    let mean = sum / taus.len() as f64;
    if mean == 0.0 {
        return if hi == lo { 0.0 } else { f64::INFINITY };
    }
    (hi - lo) / mean.abs()
}

/// Exact-solver phase time across barrier widths (N = 1). In the opaque
/// regime the spread collapses: the Hartman plateau.
pub fn hartman_scan_exact(
    model: &DispersionModel,
    omega: f64,
    widths: &[f64],
) -> Result<HartmanScan> {
    let w = model.eval(omega)?;
    let mut points = Vec::with_capacity(widths.len());
    for &a in widths {
        if w.chi * a < 4.0 {
            log::warn!(
                "chi*a = {:.3} below the opaque regime; spread is diagnostic only",
                w.chi * a
            );
        }
        let system = BarrierSystem::new(1, a, a, model.barrier_height())?;
        let tau = phase_time(&system, model, omega, None)?.tau;
        points.push((w.chi * a, tau));
    }
    let taus: Vec<f64> = points.iter().map(|p| p.1).collect();
    Ok(HartmanScan {
        relative_spread: relative_spread(&taus),
        points,
    })
}

/// Same scan in the closed-form opaque model, where τ = 1/(kχ) carries no
/// width dependence at all.
pub fn hartman_scan_opaque(
    model: &DispersionModel,
    omega: f64,
    widths: &[f64],
) -> Result<HartmanScan> {
    let w = model.eval(omega)?;
    let tau = opaque::opaque_phase_time(&w);
    let points = widths.iter().map(|&a| (w.chi * a, tau)).collect::<Vec<_>>();
    let taus: Vec<f64> = points.iter().map(|p| p.1).collect();
    Ok(HartmanScan {
        relative_spread: relative_spread(&taus),
        points,
    })
}

/// One (N, τ) sample per barrier count at fixed geometry.
#[derive(Debug, Clone)]
pub struct BarrierCountScan {
    pub points: Vec<(usize, f64)>,
    pub relative_spread: f64,
    /// True when ω fails the off-resonance gate; the spread is then a
    /// diagnostic of the resonant regime rather than a claim.
    pub resonant: bool,
}

/// Exact-solver phase time for each N in `n_values`.
pub fn n_independence_scan_exact(
    model: &DispersionModel,
    omega: f64,
    width: f64,
    period: f64,
    n_values: &[usize],
) -> Result<BarrierCountScan> {
    let w = model.eval(omega)?;
    if w.chi * width < 8.0 {
        log::warn!(
            "chi*a = {:.3} below 8; N-independence is asserted only deep in the opaque regime",
            w.chi * width
        );
    }
    let resonant = is_resonant(&w, period - width);
    let mut points = Vec::with_capacity(n_values.len());
    for &n in n_values {
        let system = BarrierSystem::new(n, width, period, model.barrier_height())?;
        let tau = phase_time(&system, model, omega, None)?.tau;
        points.push((n, tau));
    }
    let taus: Vec<f64> = points.iter().map(|p| p.1).collect();
    Ok(BarrierCountScan {
        relative_spread: relative_spread(&taus),
        points,
        resonant,
    })
}

/// Closed-form counterpart; τ = 1/(kχ) for every N.
pub fn n_independence_scan_opaque(
    model: &DispersionModel,
    omega: f64,
    width: f64,
    period: f64,
    n_values: &[usize],
) -> Result<BarrierCountScan> {
    let w = model.eval(omega)?;
    let tau = opaque::opaque_phase_time(&w);
    let points = n_values.iter().map(|&n| (n, tau)).collect::<Vec<_>>();
    let taus: Vec<f64> = points.iter().map(|p| p.1).collect();
    Ok(BarrierCountScan {
        relative_spread: relative_spread(&taus),
        points,
        resonant: is_resonant(&w, period - width),
    })
}

fn is_resonant(w: &Wavevectors, gap: f64) -> bool {
    if gap <= 0.0 {
        return false;
    }
    let d = 2.0 * w.chi * w.k * (w.k * gap).cos() - (w.k * w.k - w.chi * w.chi) * (w.k * gap).sin();
    d.abs() <= RESONANCE_GATE * (2.0 * w.chi * w.k).abs()
}

/// Split of the total tunneling phase into per-barrier and
/// multiple-reflection contributions, φ = φ1 + (φ2 − kL) + φS, together
/// with the opaque-limit predictions for each piece.
#[derive(Debug, Clone, Copy)]
pub struct PhaseBudget {
    /// arg{T1·e^{ika}}.
    pub phi1: f64,
    /// arg{T2·e^{ika}}.
    pub phi2: f64,
    /// arg{S·e^{ik(L−a)}}.
    pub phi_s: f64,
    /// One-barrier phase arg{T_OB·e^{ika}}.
    pub phi0: f64,
    /// φ1 + (φ2 − kL) + φS.
    pub total: f64,
    /// |total − arg(T·e^{ika})| mod 2π; an algebraic identity, zero to
    /// roundoff at every admissible ω.
    pub closure_residual: f64,
    /// Opaque predictions: φ1 → φ0 − kL/2 + ka, φ2 − kL → φ0,
    /// φS → −φ0 + kL/2 − ka.
    pub predicted_phi1: f64,
    pub predicted_phi2_minus_kl: f64,
    pub predicted_phi_s: f64,
    /// |φ1 + φS| mod 2π; vanishes in the opaque regime.
    pub phi1_plus_phi_s: f64,
}

/// Phase budget of an N = 2 structure at ω.
pub fn phase_budget(
    system: &BarrierSystem,
    model: &DispersionModel,
    omega: f64,
) -> Result<PhaseBudget> {
    let w = model.eval(omega)?;
    let sol = solve_exact(system, model, omega)?;
    let dec: PartialDecomposition = decompose_exact(&sol, system, &w)?;
    let k = w.k;
    let a = system.width();
    let l = system.period();
    let gap = system.gap();

    let phase_ref = |z: Complex64, shift: f64| (z * Complex64::new(0.0, shift).exp()).arg();
    let phi1 = phase_ref(dec.t1, k * a);
    let phi2 = phase_ref(dec.t2, k * a);
    let phi_s = phase_ref(dec.s, k * gap);
    let phi0 = phase_ref(dec.t_ob, k * a);
    let total = phi1 + (phi2 - k * l) + phi_s;
    let reference = phase_ref(sol.transmission, k * a);

    Ok(PhaseBudget {
        phi1,
        phi2,
        phi_s,
        phi0,
        total,
        closure_residual: wrap_angle(total - reference).abs(),
        predicted_phi1: phi0 - 0.5 * k * l + k * a,
        predicted_phi2_minus_kl: phi0,
        predicted_phi_s: -phi0 + 0.5 * k * l - k * a,
        phi1_plus_phi_s: wrap_angle(phi1 + phi_s).abs(),
    })
}
