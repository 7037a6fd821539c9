//! Dense-solve oracle for the matching problem.
//!
//! Assembles all 4N matching conditions into one complex linear system and
//! hands it to an LU factorization. The growing exponential in each barrier
//! is column-scaled (the unknown becomes A·e^{χa}) so the assembled matrix
//! stays equilibrated no matter how opaque the barriers are; derivative rows
//! are scaled down by max(k, |χ|) for the same reason.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::{BarrierSystem, ScatteringSolution};
use crate::dispersion::DispersionModel;
use crate::error::{Error, Result};

pub(super) fn solve(
    system: &BarrierSystem,
    model: &DispersionModel,
    omega: f64,
) -> Result<ScatteringSolution> {
    let k = model.free_wavevector(omega)?;
    let decay = DispersionModel::barrier_decay(system.height(), omega);
    if decay.norm() == 0.0 {
        return Err(Error::SingularInterface {
            omega,
            reason: "barrier decay constant vanishes".into(),
        });
    }

    let n = system.n_barriers();
    let size = 4 * n;
    let a = system.width();
    let l = system.period();
    let ik = Complex64::new(0.0, k);
    let zero = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    // per-barrier column scale for the growing exponential
    let shrink = (-decay * a).exp();
    let deriv_scale = Complex64::new(1.0 / k.max(decay.norm()).max(1.0), 0.0);

    // unknown layout: [R, (A,B) barrier 1, (A,B) gap 1, ..., (A,B) barrier N, T]
    let col_r = 0;
    let col_t = size - 1;
    let barrier_col = |i: usize| 4 * i - 3; // i is 1-based; B at +1
    let gap_col = |i: usize| 4 * i - 1;

    let mut m = DMatrix::from_element(size, size, zero);
    let mut rhs = DVector::from_element(size, zero);

    let e_ikl = (ik * l).exp();
    let e_mikl = (-ik * l).exp();
    let e_ika = (ik * a).exp();
    let e_mika = (-ik * a).exp();

    for i in 1..=n {
        let base = 4 * (i - 1);
        let ca = barrier_col(i);
        let cb = ca + 1;

        // left edge: previous free region minus barrier expansion
        if i == 1 {
            m[(base, col_r)] = one;
            rhs[base] = -one;
            m[(base + 1, col_r)] = -ik * deriv_scale;
            rhs[base + 1] = -ik * deriv_scale;
        } else {
            let ga = gap_col(i - 1);
            m[(base, ga)] = e_ikl;
            m[(base, ga + 1)] = e_mikl;
            m[(base + 1, ga)] = ik * e_ikl * deriv_scale;
            m[(base + 1, ga + 1)] = -ik * e_mikl * deriv_scale;
        }
        m[(base, ca)] = -shrink;
        m[(base, cb)] = -one;
        m[(base + 1, ca)] = -decay * shrink * deriv_scale;
        m[(base + 1, cb)] = decay * deriv_scale;

        // right edge: barrier expansion minus next free region
        m[(base + 2, ca)] = one;
        m[(base + 2, cb)] = shrink;
        m[(base + 3, ca)] = decay * deriv_scale;
        m[(base + 3, cb)] = -decay * shrink * deriv_scale;
        if i < n {
            let ga = gap_col(i);
            m[(base + 2, ga)] = -e_ika;
            m[(base + 2, ga + 1)] = -e_mika;
            m[(base + 3, ga)] = -ik * e_ika * deriv_scale;
            m[(base + 3, ga + 1)] = ik * e_mika * deriv_scale;
        } else {
            m[(base + 2, col_t)] = -e_ika;
            m[(base + 3, col_t)] = -ik * e_ika * deriv_scale;
        }
    }

    let lu = m.lu();
    let u_diag = lu.u();
    let mut dmax = 0.0f64;
    let mut dmin = f64::INFINITY;
    for i in 0..size {
        let mag = u_diag[(i, i)].norm();
        dmax = dmax.max(mag);
        dmin = dmin.min(mag);
    }
    let condition_estimate = if dmin > 0.0 {
        dmax / dmin
    } else {
        f64::INFINITY
    };

    let x = lu
        .solve(&rhs)
        .ok_or(Error::SingularSystem { condition_estimate })?;
    if x.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
        return Err(Error::SingularSystem { condition_estimate });
    }

    let mut barrier_coeffs = Vec::with_capacity(n);
    let mut gap_coeffs = Vec::with_capacity(n.saturating_sub(1));
    for i in 1..=n {
        let ca = barrier_col(i);
        barrier_coeffs.push((x[ca] * shrink, x[ca + 1]));
        if i < n {
            let ga = gap_col(i);
            gap_coeffs.push((x[ga], x[ga + 1]));
        }
    }

    Ok(ScatteringSolution {
        omega,
        reflection: x[col_r],
        transmission: x[col_t],
        barrier_coeffs,
        gap_coeffs,
    })
}
