//! Transfer-matrix engine.
//!
//! Every region r carries an expansion A·e^{λ(x−x_r)} + B·e^{−λ(x−x_r)}
//! with λ = ik in free regions and λ = sqrt(V0 − ω) (complex in general)
//! inside barriers. Matching ψ and ψ′ at an interface maps one region's
//! (A, B) onto the next through a 2×2 complex matrix; the product over all
//! 2N interfaces relates (1, R) to (T, 0).
//!
//! Both outer media share λ = ik and the phase references drop out of the
//! determinant, so det M_tot = 1 exactly and T = 1/m22, R = −m21/m22.
//! Interior coefficients come from a backward sweep anchored at (T, 0):
//! sweeping in the direction where the field grows keeps the relative error
//! of the subdominant exponential bounded, which a forward sweep cannot do
//! for opaque barriers.

use std::sync::atomic::{AtomicUsize, Ordering};

use num_complex::Complex64;

use super::{BarrierSystem, ScatteringSolution};
use crate::dispersion::DispersionModel;
use crate::error::{Error, Result};

/// Warn once per solve when the composed product grows past this; the dense
/// oracle is the cross-check in that regime.
const NORM_WARN_THRESHOLD: f64 = 1e12;

/// Bulk scans over opaque structures trip the norm monitor on every solve;
/// after this many warnings the rest are counted silently.
const NORM_WARN_LIMIT: usize = 8;

static NORM_WARNINGS: AtomicUsize = AtomicUsize::new(0);

fn warn_norm(peak_norm: f64, omega: f64) {
    let seen = NORM_WARNINGS.fetch_add(1, Ordering::Relaxed);
    if seen < NORM_WARN_LIMIT {
        log::warn!(
            "transfer-matrix product norm reached {peak_norm:.3e} (omega = {omega}); \
             precision of interior coefficients may degrade"
        );
        if seen + 1 == NORM_WARN_LIMIT {
            log::warn!("suppressing further transfer-matrix norm warnings");
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Region {
    lambda: Complex64,
    reference: f64,
}

/// 2×2 complex matrix, row major.
#[derive(Debug, Clone, Copy)]
struct Mat2([Complex64; 4]);

impl Mat2 {
    fn identity() -> Self {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        Mat2([one, zero, zero, one])
    }

    fn mul(&self, rhs: &Mat2) -> Mat2 {
        let a = &self.0;
        let b = &rhs.0;
        Mat2([
            a[0] * b[0] + a[1] * b[2],
            a[0] * b[1] + a[1] * b[3],
            a[2] * b[0] + a[3] * b[2],
            a[2] * b[1] + a[3] * b[3],
        ])
    }

    fn apply(&self, v: (Complex64, Complex64)) -> (Complex64, Complex64) {
        (
            self.0[0] * v.0 + self.0[1] * v.1,
            self.0[2] * v.0 + self.0[3] * v.1,
        )
    }

    fn max_abs(&self) -> f64 {
        self.0.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }
}

/// Coefficient map across the interface at `x`, from `from`'s basis to
/// `to`'s basis; closed-form solution of the two matching conditions.
fn interface_step(from: Region, to: Region, x: f64) -> Mat2 {
    let d1 = x - from.reference;
    let d2 = x - to.reference;
    let ratio = from.lambda / to.lambda;
    let up1 = (from.lambda * d1).exp();
    let dn1 = (-from.lambda * d1).exp();
    let up2 = (to.lambda * d2).exp();
    let dn2 = (-to.lambda * d2).exp();
    let plus = 0.5 * (Complex64::new(1.0, 0.0) + ratio);
    let minus = 0.5 * (Complex64::new(1.0, 0.0) - ratio);
    Mat2([
        dn2 * up1 * plus,
        dn2 * dn1 * minus,
        up2 * up1 * minus,
        up2 * dn1 * plus,
    ])
}

/// Region table in left-to-right order plus the interface positions
/// separating consecutive entries.
fn region_table(system: &BarrierSystem, k: f64, decay: Complex64) -> (Vec<Region>, Vec<f64>) {
    let n = system.n_barriers();
    let l = system.period();
    let a = system.width();
    let ik = Complex64::new(0.0, k);

    let mut regions = Vec::with_capacity(2 * n + 1);
    let mut cuts = Vec::with_capacity(2 * n);
    regions.push(Region {
        lambda: ik,
        reference: 0.0,
    });
    for i in 0..n {
        let left = i as f64 * l;
        regions.push(Region {
            lambda: decay,
            reference: left,
        });
        cuts.push(left);
        cuts.push(left + a);
        if i + 1 < n {
            regions.push(Region {
                lambda: ik,
                reference: left,
            });
        }
    }
    regions.push(Region {
        lambda: ik,
        reference: (n - 1) as f64 * l,
    });
    (regions, cuts)
}

pub(super) fn solve(
    system: &BarrierSystem,
    model: &DispersionModel,
    omega: f64,
) -> Result<ScatteringSolution> {
    let k = model.free_wavevector(omega)?;
    let decay = DispersionModel::barrier_decay(system.height(), omega);
    if decay.norm() == 0.0 {
        // V0 = 0 would land here too, but barrier_decay(0, omega) = i*k != 0
        return Err(Error::SingularInterface {
            omega,
            reason: "barrier decay constant vanishes".into(),
        });
    }

    let (regions, cuts) = region_table(system, k, decay);
    let steps: Vec<Mat2> = (0..cuts.len())
        .map(|j| interface_step(regions[j], regions[j + 1], cuts[j]))
        .collect();

    let mut total = Mat2::identity();
    let mut peak_norm = 0.0f64;
    for step in &steps {
        total = step.mul(&total);
        peak_norm = peak_norm.max(total.max_abs());
    }
    if peak_norm > NORM_WARN_THRESHOLD {
        warn_norm(peak_norm, omega);
    }

    let m21 = total.0[2];
    let m22 = total.0[3];
    if !(m22.re.is_finite() && m22.im.is_finite()) {
        return Err(Error::AmplitudeUnderflow { magnitude: 0.0 });
    }
    // det(M_tot) = 1: incident and outgoing media share the same lambda
    let t_anchor = Complex64::new(1.0, 0.0) / m22;
    let _ = m21; // R is read off the normalized backward sweep below

    // backward sweep from (T, 0); growing-direction propagation is stable
    let mut coeffs = vec![(Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)); regions.len()];
    coeffs[regions.len() - 1] = (t_anchor, Complex64::new(0.0, 0.0));
    for j in (0..cuts.len()).rev() {
        let back = interface_step(regions[j + 1], regions[j], cuts[j]);
        coeffs[j] = back.apply(coeffs[j + 1]);
    }

    let incident = coeffs[0].0;
    if incident.norm() == 0.0 || !incident.re.is_finite() || !incident.im.is_finite() {
        return Err(Error::SingularInterface {
            omega,
            reason: format!("backward sweep lost the incident amplitude ({incident})"),
        });
    }
    let scale = Complex64::new(1.0, 0.0) / incident;

    let n = system.n_barriers();
    let mut barrier_coeffs = Vec::with_capacity(n);
    let mut gap_coeffs = Vec::with_capacity(n.saturating_sub(1));
    for i in 1..=n {
        let (a, b) = coeffs[2 * i - 1];
        barrier_coeffs.push((a * scale, b * scale));
        if i < n {
            let (a, b) = coeffs[2 * i];
            gap_coeffs.push((a * scale, b * scale));
        }
    }

    Ok(ScatteringSolution {
        omega,
        reflection: coeffs[0].1 * scale,
        transmission: t_anchor * scale,
        barrier_coeffs,
        gap_coeffs,
    })
}
