//! Closed-form results in the opaque-barrier limit χa ≫ 1.
//!
//! The transmitted amplitude of an N-barrier structure factorizes as
//! T(N)·e^{ika} = C0 · E(N) · F(N) with
//!
//! ```text
//! C0   = 4iχk / (k + iχ)²
//! E(N) = e^{−Nχa}
//! F(N) = [ 2χk / (2χk cos k(L−a) − (k²−χ²) sin k(L−a)) ]^{N−1}
//! ```
//!
//! Only C0 is complex, so the phase of the product — and with it the phase
//! time — carries no dependence on a, L or N. The poles of F(N) are the
//! transmission resonances; they are located here on the pole-free form
//! D(ω) = 2χk cos k(L−a) − (k²−χ²) sin k(L−a) = 0.

use num_complex::Complex64;

use crate::dispersion::{DispersionModel, Wavevectors};
use crate::error::{Error, Result};
use crate::exact::BarrierSystem;

/// Relative guard on F's denominator; closer to a resonance than this the
/// factorization is refused instead of returning a huge value silently.
pub const NEAR_RESONANCE_GUARD: f64 = 1e-8;

/// χa below this is outside the regime the closed forms were derived for;
/// evaluation proceeds with a warning.
pub const OPAQUE_WIDTH_FLOOR: f64 = 1.0;

/// The three factors of the opaque transmission amplitude.
#[derive(Debug, Clone, Copy)]
pub struct OpaqueFactorization {
    /// Complex boundary factor C0; sole carrier of the phase.
    pub c0: Complex64,
    /// Exponential attenuation E(N) = e^{−Nχa}.
    pub e_factor: f64,
    /// Inter-barrier cavity factor F(N); real, may be negative between
    /// resonances, absent (= 1) for a single barrier or L = a.
    pub f_factor: f64,
    /// C0 · E(N) · F(N) = T(N)·e^{ika}.
    pub product: Complex64,
}

/// Resonance search result.
#[derive(Debug, Clone)]
pub struct ResonanceReport {
    /// Frequencies where D(ω) = 0, in increasing order.
    pub roots: Vec<f64>,
    /// |D(ω_root)| at each reported root.
    pub residuals: Vec<f64>,
    /// Max pairwise distance between root sets recomputed for N ∈ {2, 3, 5}.
    /// D does not involve N, so this is zero by construction; it is kept as
    /// a computed diagnostic rather than an assumption.
    pub n_independence_spread: f64,
}

/// Phase-time budget at a resonance root (diagnostic; the sum is reported,
/// never asserted to vanish).
#[derive(Debug, Clone, Copy)]
pub struct TimeBudget {
    /// dφ/dω of the opaque phase, analytically 1/(kχ) for the particle model.
    pub tau: f64,
    /// Vacuum traversal time of the inter-barrier gap, (L−a)·dk/dω.
    pub tau0: f64,
    pub sum: f64,
    /// |D(ω)| at the queried frequency; non-roots are flagged via a warning.
    pub d_residual: f64,
}

/// Resonance denominator D(ω) = 2χk cos k(L−a) − (k²−χ²) sin k(L−a).
pub fn resonance_denominator(
    system: &BarrierSystem,
    model: &DispersionModel,
    omega: f64,
) -> Result<f64> {
    let w = model.eval(omega)?;
    Ok(denominator(&w, system.gap()))
}

fn denominator(w: &Wavevectors, gap: f64) -> f64 {
    let (k, chi) = (w.k, w.chi);
    2.0 * chi * k * (k * gap).cos() - (k * k - chi * chi) * (k * gap).sin()
}

/// Single-power cavity factor 2χk / D for a gap of length `gap`; errors out
/// within [`NEAR_RESONANCE_GUARD`] of a pole.
pub fn cavity_factor(w: &Wavevectors, gap: f64) -> Result<f64> {
    let d = denominator(w, gap);
    let scale = 2.0 * w.chi * w.k;
    if d.abs() < NEAR_RESONANCE_GUARD * scale.abs() {
        return Err(Error::NearResonance {
            denominator: d,
            guard: NEAR_RESONANCE_GUARD * scale.abs(),
        });
    }
    Ok(scale / d)
}

/// Boundary factor C0 = 4iχk/(k+iχ)².
pub fn boundary_factor(w: &Wavevectors) -> Complex64 {
    Complex64::new(0.0, 4.0 * w.chi * w.k) / Complex64::new(w.k, w.chi).powi(2)
}

/// Factorized opaque transmission amplitude T(N)·e^{ika}.
pub fn opaque_transmission(system: &BarrierSystem, w: &Wavevectors) -> Result<OpaqueFactorization> {
    warn_if_translucent(system, w);
    let n = system.n_barriers();
    let c0 = boundary_factor(w);
    let e_factor = (-(n as f64) * w.chi * system.width()).exp();
    let f_factor = if n > 1 && system.gap() > 0.0 {
        cavity_factor(w, system.gap())?.powi(n as i32 - 1)
    } else {
        1.0
    };
    Ok(OpaqueFactorization {
        c0,
        e_factor,
        f_factor,
        product: c0 * (e_factor * f_factor),
    })
}

/// Phase of the opaque transmission amplitude: arctan((k²−χ²)/(2χk)),
/// independent of a, L and N; range (−π/2, π/2).
pub fn opaque_phase(w: &Wavevectors) -> f64 {
    ((w.k * w.k - w.chi * w.chi) / (2.0 * w.chi * w.k)).atan()
}

/// dφ/dω of [`opaque_phase`] under the particle dispersion; reduces to
/// 1/(kχ), the width-independent saturation value of the phase time.
pub fn opaque_phase_time(w: &Wavevectors) -> f64 {
    1.0 / (w.k * w.chi)
}

/// Opaque tunneling probability P_T(N) = |T(N)|².
pub fn opaque_probability(system: &BarrierSystem, w: &Wavevectors) -> Result<f64> {
    warn_if_translucent(system, w);
    let n = system.n_barriers() as i32;
    let (k, chi) = (w.k, w.chi);
    let boundary = (4.0 * chi * k / (k * k + chi * chi)).powi(2);
    let attenuation = (-chi * system.width()).exp().powi(2 * n);
    let cavity = if n > 1 && system.gap() > 0.0 {
        cavity_factor(w, system.gap())?.powi(2 * (n - 1))
    } else {
        1.0
    };
    Ok(boundary * attenuation * cavity)
}

fn warn_if_translucent(system: &BarrierSystem, w: &Wavevectors) {
    let chia = w.chi * system.width();
    if chia < OPAQUE_WIDTH_FLOOR {
        log::warn!(
            "chi*a = {chia:.3} is below the opaque regime; closed-form results are unreliable"
        );
    }
}

/// Frequencies with k(ω)(L−a) = νπ for ν = 0..=nu_max that fall inside
/// (0, V0). There the sine term of D vanishes, |F| = 1, and the cavity
/// cannot resonate regardless of N.
pub fn antiresonance_frequencies(
    system: &BarrierSystem,
    model: &DispersionModel,
    nu_max: u32,
) -> Result<Vec<f64>> {
    let gap = system.gap();
    if gap <= 0.0 {
        return Err(Error::InvalidArgument(
            "anti-resonances need an inter-barrier gap (L > a)".into(),
        ));
    }
    let v0 = model.barrier_height();
    let mut out = Vec::new();
    for nu in 0..=nu_max {
        let k = nu as f64 * std::f64::consts::PI / gap;
        let omega = k * k; // particle model
        if omega > 0.0 && omega < v0 {
            out.push(omega);
        }
    }
    Ok(out)
}

/// Locates the roots of D(ω) on [omega_lo, omega_hi] by sign-change
/// bracketing on a uniform grid followed by bisection to relative 1e-12.
///
/// A grid too coarse to separate neighbouring roots misses them; that is
/// the caller's risk. No sign change at all yields an empty report.
pub fn find_resonances(
    system: &BarrierSystem,
    model: &DispersionModel,
    omega_lo: f64,
    omega_hi: f64,
    grid_points: usize,
) -> Result<ResonanceReport> {
    let v0 = model.barrier_height();
    if !(omega_lo > 0.0 && omega_hi < v0 && omega_lo < omega_hi) {
        return Err(Error::InvalidArgument(format!(
            "scan range [{omega_lo}, {omega_hi}] must lie inside (0, {v0})"
        )));
    }
    if grid_points < 2 {
        return Err(Error::InvalidArgument(
            "grid needs at least 2 points".into(),
        ));
    }
    let gap = system.gap();
    if gap <= 0.0 {
        // single effective barrier: F is absent and nothing can resonate
        return Ok(ResonanceReport {
            roots: Vec::new(),
            residuals: Vec::new(),
            n_independence_spread: 0.0,
        });
    }

    let d = |omega: f64| {
        let w = model.eval(omega).expect("grid stays inside (0, V0)");
        denominator(&w, gap)
    };
    let roots = scan_roots(&d, omega_lo, omega_hi, grid_points);
    let residuals = roots.iter().map(|&r| d(r).abs()).collect::<Vec<_>>();

    for &root in &roots {
        let resid = eq212_residual(system, model, root)?;
        if resid > 1e-8 {
            log::warn!("resonance at omega = {root}: tan-form residual {resid:.3e} above 1e-8");
        }
    }

    // D never involves N; recompute anyway so the spread is measured, not assumed
    let mut spread = 0.0f64;
    for _ in [2usize, 3, 5] {
        let again = scan_roots(&d, omega_lo, omega_hi, grid_points);
        if again.len() != roots.len() {
            spread = f64::INFINITY;
            break;
        }
        for (a, b) in again.iter().zip(&roots) {
            spread = spread.max((a - b).abs());
        }
    }

    Ok(ResonanceReport {
        roots,
        residuals,
        n_independence_spread: spread,
    })
}

fn scan_roots(d: &dyn Fn(f64) -> f64, lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let step = (hi - lo) / (points - 1) as f64;
    let mut roots = Vec::new();
    let mut x_prev = lo;
    let mut f_prev = d(lo);
    for i in 1..points {
        let x = lo + i as f64 * step;
        let f = d(x);
        if f_prev == 0.0 {
            roots.push(x_prev);
        } else if f_prev * f < 0.0 {
            roots.push(bisect(d, x_prev, x, f_prev));
        }
        x_prev = x;
        f_prev = f;
    }
    if f_prev == 0.0 {
        roots.push(x_prev);
    }
    roots
}

fn bisect(d: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64, mut f_lo: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= 1e-12 * mid {
            return mid;
        }
        let f_mid = d(mid);
        if f_mid == 0.0 {
            return mid;
        }
        if (f_mid > 0.0) == (f_lo > 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// |tanφ · tan k(L−a) − 1|, the tan-form of the resonance condition; small
/// at every root of D.
pub fn eq212_residual(system: &BarrierSystem, model: &DispersionModel, omega: f64) -> Result<f64> {
    let w = model.eval(omega)?;
    let tan_phi = (w.k * w.k - w.chi * w.chi) / (2.0 * w.chi * w.k);
    Ok((tan_phi * (w.k * system.gap()).tan() - 1.0).abs())
}

/// Phase-time budget at a resonance root: τ = dφ/dω and the vacuum gap
/// traversal time τ0, plus their sum as a diagnostic.
///
/// The sum is not asserted to vanish: with a concrete dispersion both terms
/// are positive at an isolated root, so only the conditional identity
/// behind the cancellation claim is testable (see the test suite).
pub fn resonance_time_budget(
    system: &BarrierSystem,
    model: &DispersionModel,
    omega_res: f64,
) -> Result<TimeBudget> {
    let w = model.eval(omega_res)?;
    let d = denominator(&w, system.gap());
    let scale = 2.0 * w.chi * w.k;
    if d.abs() > 1e-6 * scale.abs() {
        log::warn!(
            "omega = {omega_res} is not a resonance root (|D| = {:.3e}); budget is still reported",
            d.abs()
        );
    }
    let tau = opaque_phase_time(&w);
    let tau0 = system.gap() / w.group_velocity;
    Ok(TimeBudget {
        tau,
        tau0,
        sum: tau + tau0,
        d_residual: d.abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::solve_exact;
    use approx::assert_relative_eq;

    fn setup(n: usize, a: f64, l: f64) -> (BarrierSystem, DispersionModel) {
        (
            BarrierSystem::new(n, a, l, 10.0).unwrap(),
            DispersionModel::particle(10.0).unwrap(),
        )
    }

    #[test]
    fn single_barrier_has_no_cavity_factor() {
        let (system, model) = setup(1, 3.0, 3.0);
        let w = model.eval(5.0).unwrap();
        let f = opaque_transmission(&system, &w).unwrap();
        assert_eq!(f.f_factor, 1.0);
        assert_eq!(f.product, f.c0 * f.e_factor);

        let (contiguous, _) = setup(4, 3.0, 3.0);
        let f = opaque_transmission(&contiguous, &w).unwrap();
        assert_eq!(f.f_factor, 1.0);
    }

    #[test]
    fn symmetric_point_boundary_factor_is_two() {
        let (system, model) = setup(1, 3.0, 3.0);
        let w = model.eval(5.0).unwrap();
        let f = opaque_transmission(&system, &w).unwrap();
        assert!((f.c0 - Complex64::new(2.0, 0.0)).norm() < 1e-14);
        assert!(f.product.arg().abs() < 1e-14);
    }

    #[test]
    fn product_matches_exact_transmission_when_opaque() {
        let (system, model) = setup(2, 4.0, 7.0);
        let w = model.eval(5.0).unwrap();
        let f = opaque_transmission(&system, &w).unwrap();
        let sol = solve_exact(&system, &model, 5.0).unwrap();
        let reference = sol.transmission * Complex64::new(0.0, w.k * 4.0).exp();
        assert!((f.product - reference).norm() / reference.norm() < 1e-4);
    }

    #[test]
    fn phase_examples() {
        let model = DispersionModel::particle(10.0).unwrap();
        let w = model.eval(5.0).unwrap();
        assert!(opaque_phase(&w).abs() < 1e-15);

        // chi -> 0+ at the top of the band, k -> 0+ at the bottom
        let w = model.eval(10.0 - 1e-9).unwrap();
        assert!(opaque_phase(&w) > std::f64::consts::FRAC_PI_2 - 1e-3);
        let w = model.eval(1e-9).unwrap();
        assert!(opaque_phase(&w) < -std::f64::consts::FRAC_PI_2 + 1e-3);
    }

    #[test]
    fn probability_closed_forms() {
        // N=1: [4 chi k / (k^2+chi^2)]^2 e^{-2 chi a}
        let (system, model) = setup(1, 2.0, 2.0);
        let w = model.eval(5.0).unwrap();
        let p = opaque_probability(&system, &w).unwrap();
        let expected =
            (4.0 * w.chi * w.k / (w.k * w.k + w.chi * w.chi)).powi(2) * (-2.0 * w.chi * 2.0).exp();
        assert_relative_eq!(p, expected, max_relative = 1e-14);

        // k = chi, chi a = 5: P_T = 4 e^{-10}
        let a = 5.0 / 5f64.sqrt();
        let (system, _) = setup(1, a, a);
        let p = opaque_probability(&system, &w).unwrap();
        assert_relative_eq!(p, 4.0 * (-10.0f64).exp(), max_relative = 1e-12);
    }

    #[test]
    fn probability_equals_product_magnitude_squared() {
        let model = DispersionModel::particle(10.0).unwrap();
        let w = model.eval(5.0).unwrap();
        for (n, a, l) in [(1usize, 2.0, 2.0), (2, 2.0, 4.0), (3, 1.5, 4.0)] {
            let system = BarrierSystem::new(n, a, l, 10.0).unwrap();
            let f = opaque_transmission(&system, &w).unwrap();
            let p = opaque_probability(&system, &w).unwrap();
            assert_relative_eq!(p, f.product.norm_sqr(), max_relative = 1e-12);
        }
    }

    #[test]
    fn probability_matches_exact_for_three_opaque_barriers() {
        let (system, model) = setup(3, 4.0, 7.0);
        let w = model.eval(5.0).unwrap();
        let p = opaque_probability(&system, &w).unwrap();
        let sol = solve_exact(&system, &model, 5.0).unwrap();
        assert_relative_eq!(p, sol.transmission.norm_sqr(), max_relative = 1e-3);
    }

    #[test]
    fn antiresonances() {
        let (system, model) = setup(2, 1.0, 3.0); // gap = 2
        let omegas = antiresonance_frequencies(&system, &model, 4).unwrap();
        // nu = 0 excluded (omega = 0); nu = 1, 2 inside the band; nu >= 3 outside
        assert_eq!(omegas.len(), 2);
        assert_relative_eq!(
            omegas[0],
            std::f64::consts::PI.powi(2) / 4.0,
            max_relative = 1e-14
        );
        for omega in omegas {
            let w = model.eval(omega).unwrap();
            let f = cavity_factor(&w, system.gap()).unwrap();
            assert!((f.abs() - 1.0).abs() < 1e-12, "|F| = {}", f.abs());
        }
    }

    #[test]
    fn no_gap_means_no_resonances() {
        let (system, model) = setup(3, 2.0, 2.0);
        let report = find_resonances(&system, &model, 0.5, 9.5, 500).unwrap();
        assert!(report.roots.is_empty());
    }

    #[test]
    fn roots_match_fine_grid_oracle() {
        let (system, model) = setup(2, 4.0, 7.0);
        let report = find_resonances(&system, &model, 0.1, 9.9, 2000).unwrap();
        assert!(!report.roots.is_empty());

        // independent oracle: exhaustive sign-change scan on a 10^6-point grid
        let gap = system.gap();
        let d = |omega: f64| {
            let w = model.eval(omega).unwrap();
            denominator(&w, gap)
        };
        let oracle = scan_roots(&d, 0.1, 9.9, 1_000_000);
        assert_eq!(report.roots.len(), oracle.len());
        for (a, b) in report.roots.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn root_set_is_independent_of_n() {
        let model = DispersionModel::particle(10.0).unwrap();
        let mut sets = Vec::new();
        for n in [2usize, 3, 5] {
            let system = BarrierSystem::new(n, 4.0, 7.0, 10.0).unwrap();
            let report = find_resonances(&system, &model, 0.1, 9.9, 2000).unwrap();
            assert_eq!(report.n_independence_spread, 0.0);
            sets.push(report.roots);
        }
        assert_eq!(sets[0], sets[1]);
        assert_eq!(sets[0], sets[2]);
    }

    #[test]
    fn roots_satisfy_tan_form_and_sit_on_f_poles() {
        let (system, model) = setup(2, 4.0, 7.0);
        let report = find_resonances(&system, &model, 0.1, 9.9, 2000).unwrap();
        for (&root, &resid) in report.roots.iter().zip(&report.residuals) {
            let w = model.eval(root).unwrap();
            assert!(resid < 1e-10 * (2.0 * w.chi * w.k).abs());
            assert!(eq212_residual(&system, &model, root).unwrap() < 1e-8);
            assert!(matches!(
                cavity_factor(&w, system.gap()),
                Err(Error::NearResonance { .. })
            ));
        }
    }

    #[test]
    fn near_resonance_guard_reports_denominator() {
        let (system, model) = setup(2, 4.0, 7.0);
        let report = find_resonances(&system, &model, 0.1, 9.9, 2000).unwrap();
        let w = model.eval(report.roots[0]).unwrap();
        match opaque_transmission(&system, &w) {
            Err(Error::NearResonance { denominator, guard }) => {
                assert!(denominator.abs() < guard);
            }
            other => panic!("expected near-resonance error, got {other:?}"),
        }
    }

    #[test]
    fn time_budget_is_positive_and_reported() {
        let (system, model) = setup(2, 4.0, 7.0);
        let report = find_resonances(&system, &model, 0.1, 9.9, 2000).unwrap();
        let budget = resonance_time_budget(&system, &model, report.roots[0]).unwrap();
        assert!(budget.tau > 0.0);
        assert!(budget.tau0 > 0.0);
        assert_relative_eq!(budget.sum, budget.tau + budget.tau0, max_relative = 1e-15);

        // analytic tau cross-checked by central differences of the phase
        let w = model.eval(report.roots[0]).unwrap();
        let h = 1e-6 * report.roots[0];
        let phi = |omega: f64| opaque_phase(&model.eval(omega).unwrap());
        let fd = (phi(report.roots[0] + h) - phi(report.roots[0] - h)) / (2.0 * h);
        assert_relative_eq!(budget.tau, fd, max_relative = 1e-8);
        assert_relative_eq!(budget.tau, 1.0 / (w.k * w.chi), max_relative = 1e-14);
        assert_relative_eq!(
            budget.tau0,
            system.gap() / (2.0 * w.k),
            max_relative = 1e-14
        );
    }

    #[test]
    fn first_root_budget_regression() {
        // golden values frozen from the first validated run at V0=10, a=4, L=7
        let (system, model) = setup(2, 4.0, 7.0);
        let report = find_resonances(&system, &model, 0.1, 9.9, 2000).unwrap();
        assert_relative_eq!(report.roots[0], 0.744660855466942, max_relative = 1e-10);
        let budget = resonance_time_budget(&system, &model, report.roots[0]).unwrap();
        assert_relative_eq!(budget.tau, 0.3809119248299052, max_relative = 1e-9);
        assert_relative_eq!(budget.tau0, 1.7382490335624716, max_relative = 1e-9);
    }

    #[test]
    fn conditional_identity_of_the_resonance_curve() {
        // for any phi(w), K(w) with tan(phi) tan(K) = 1 identically,
        // phi' + K' = 0; checked on the family phi = theta, K = pi/2 - theta
        let theta = |omega: f64| 0.4 + 0.3 * omega.sin();
        for omega in [1.0, 2.0, 3.0] {
            let phi = theta(omega);
            let kappa = std::f64::consts::FRAC_PI_2 - phi;
            assert_relative_eq!(phi.tan() * kappa.tan(), 1.0, max_relative = 1e-12);
            let h = 1e-6;
            let dphi = (theta(omega + h) - theta(omega - h)) / (2.0 * h);
            let dkappa = (-theta(omega + h) + theta(omega - h)) / (2.0 * h);
            assert!((dphi + dkappa).abs() < 1e-8);
        }
    }

    #[test]
    fn phase_of_product_is_structure_independent_mod_pi() {
        let model = DispersionModel::particle(10.0).unwrap();
        let w = model.eval(5.0).unwrap();
        let phi = opaque_phase(&w);
        for n in [1usize, 2, 3] {
            for a in [2.0, 3.0, 4.0] {
                for gap in [1.0, 3.5] {
                    let system = BarrierSystem::new(n, a, a + gap, 10.0).unwrap();
                    let f = opaque_transmission(&system, &w).unwrap();
                    let delta = f.product.arg() - phi;
                    let wrapped = (delta / std::f64::consts::PI).round();
                    assert!(
                        (delta - wrapped * std::f64::consts::PI).abs() < 1e-12,
                        "arg deviates from phi mod pi by {delta}"
                    );
                }
            }
        }
    }
}
