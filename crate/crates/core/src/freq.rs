//! Frequency response of the linearized delay system.
//!
//! The transfer function from stress input to cortisol is evaluated
//! directly on the delay dynamics: the delayed Jacobians enter through
//! `e^{-j omega tau}` factors, so no rational (Pade) approximation is
//! involved and the phase correctly accumulates without bound.

use crate::error::{GbaError, Result};
use crate::equilibrium::LinearizedSystem;
use crate::linalg;
use crate::model::STATE_DIM;
use num_complex::Complex64;
use serde::Serialize;

/// Condition number above which the resolvent solve is refused.
const CONDITION_LIMIT: f64 = 1e12;

/// One evaluated frequency point.
#[derive(Debug, Clone, Serialize)]
pub struct BodePoint {
    /// Angular frequency in rad/min.
    pub omega: f64,
    pub h_re: f64,
    pub h_im: f64,
    pub magnitude_db: f64,
    /// Unwrapped phase in degrees.
    pub phase_deg: f64,
}

/// Frequency sweep with the derived low-pass summary figures.
#[derive(Debug, Clone, Serialize)]
pub struct BodeData {
    pub points: Vec<BodePoint>,
    pub dc_gain: f64,
    /// First frequency where the magnitude falls 3 dB below DC, refined by
    /// bisection between grid neighbors. `None` when the grid never reaches
    /// the crossing.
    pub omega_3db: Option<f64>,
    pub omega_3db_note: Option<String>,
}

/// Evaluate `H(j omega) = C (j omega I - J0 - J_hpa e^{-j omega tau_hpa}
/// - J_gut e^{-j omega tau_gut})^{-1} B`.
///
/// Refuses systems whose stability probe failed: the frequency response of
/// an unstable operating point does not describe steady-state behavior.
pub fn transfer_function(sys: &LinearizedSystem, omega: f64) -> Result<Complex64> {
    if !sys.stable {
        return Err(GbaError::UnstableOperatingPoint { u_star: sys.u_star });
    }
    if !omega.is_finite() {
        return Err(GbaError::InvalidParameter(format!(
            "omega must be finite, got {omega}"
        )));
    }
    evaluate(sys, omega)
}

/// The resolvent solve without the stability gate; used internally and by
/// tests that construct synthetic systems.
#[allow(clippy::needless_range_loop)] // (r, c) assembly mirrors the matrix
fn evaluate(sys: &LinearizedSystem, omega: f64) -> Result<Complex64> {
    let jw = Complex64::new(0.0, omega);
    let e_hpa = (-jw * sys.tau_hpa).exp();
    let e_gut = (-jw * sys.tau_gut).exp();
    let mut m = [[Complex64::new(0.0, 0.0); STATE_DIM]; STATE_DIM];
    for r in 0..STATE_DIM {
        for c in 0..STATE_DIM {
            let delta = if r == c { jw } else { Complex64::new(0.0, 0.0) };
            m[r][c] = delta
                - Complex64::new(sys.j0[r][c], 0.0)
                - e_hpa * sys.j_hpa[r][c]
                - e_gut * sys.j_gut[r][c];
        }
    }
    let cond = linalg::condition_1(&m);
    if !cond.is_finite() || cond > CONDITION_LIMIT {
        return Err(GbaError::SingularMatrix {
            context: format!("resolvent at omega = {omega} rad/min"),
            cond,
        });
    }
    let b: [Complex64; STATE_DIM] = core::array::from_fn(|i| Complex64::new(sys.b[i], 0.0));
    let v = linalg::solve(&m, &b).ok_or_else(|| GbaError::SingularMatrix {
        context: format!("resolvent at omega = {omega} rad/min"),
        cond: f64::INFINITY,
    })?;
    let mut h = Complex64::new(0.0, 0.0);
    for i in 0..STATE_DIM {
        h += Complex64::new(sys.c_out[i], 0.0) * v[i];
    }
    Ok(h)
}

/// Zero-frequency gain magnitude `|H(0)|`.
pub fn dc_gain(sys: &LinearizedSystem) -> Result<f64> {
    transfer_function(sys, 0.0).map(|h| h.norm())
}

/// Log-spaced frequency sweep with unwrapped phase and the -3 dB corner.
pub fn bode(
    sys: &LinearizedSystem,
    omega_min: f64,
    omega_max: f64,
    n_points: usize,
) -> Result<BodeData> {
    if !(omega_min > 0.0 && omega_max > omega_min && omega_min.is_finite() && omega_max.is_finite())
    {
        return Err(GbaError::InvalidParameter(format!(
            "need 0 < omega_min < omega_max, got [{omega_min}, {omega_max}]"
        )));
    }
    if n_points < 2 {
        return Err(GbaError::InvalidParameter(format!(
            "need at least 2 frequency points, got {n_points}"
        )));
    }
    let h0 = transfer_function(sys, 0.0)?;
    let dc = h0.norm();

    let log_min = omega_min.ln();
    let log_max = omega_max.ln();
    let mut points = Vec::with_capacity(n_points);
    let mut prev_phase = 0.0f64;
    for i in 0..n_points {
        let frac = i as f64 / (n_points - 1) as f64;
        let omega = (log_min + frac * (log_max - log_min)).exp();
        let h = transfer_function(sys, omega)?;
        let mut phase = h.arg();
        if i > 0 {
            // Unwrap: shift by whole turns to stay within pi of the
            // previous point.
            while phase - prev_phase > std::f64::consts::PI {
                phase -= 2.0 * std::f64::consts::PI;
            }
            while phase - prev_phase < -std::f64::consts::PI {
                phase += 2.0 * std::f64::consts::PI;
            }
        }
        prev_phase = phase;
        points.push(BodePoint {
            omega,
            h_re: h.re,
            h_im: h.im,
            magnitude_db: 20.0 * h.norm().max(f64::MIN_POSITIVE).log10(),
            phase_deg: phase.to_degrees(),
        });
    }

    let target = dc / 2.0f64.sqrt();
    let mut omega_3db = None;
    for w in points.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let mag_a = (a.h_re.powi(2) + a.h_im.powi(2)).sqrt();
        let mag_b = (b.h_re.powi(2) + b.h_im.powi(2)).sqrt();
        if mag_a >= target && mag_b < target {
            omega_3db = Some(bisect_crossing(sys, a.omega, b.omega, target)?);
            break;
        }
    }
    let omega_3db_note = if omega_3db.is_none() {
        Some(format!(
            "magnitude never falls 3 dB below DC on [{omega_min}, {omega_max}] rad/min; \
             widen the grid to locate the corner"
        ))
    } else {
        None
    };

    Ok(BodeData {
        points,
        dc_gain: dc,
        omega_3db,
        omega_3db_note,
    })
}

/// Refine the first downward crossing of `|H|` through `target` inside
/// `[lo, hi]` by bisection.
fn bisect_crossing(sys: &LinearizedSystem, mut lo: f64, mut hi: f64, target: f64) -> Result<f64> {
    for _ in 0..80 {
        if (hi - lo) <= 1e-9 * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let mag = transfer_function(sys, mid)?.norm();
        if mag >= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::output_row;
    use crate::model::{default_initial_state, STATE_DIM};

    fn empty_system() -> LinearizedSystem {
        LinearizedSystem {
            x_star: default_initial_state(),
            u_star: 0.1,
            e_bar: 1.0,
            j0: [[0.0; STATE_DIM]; STATE_DIM],
            j_hpa: [[0.0; STATE_DIM]; STATE_DIM],
            j_gut: [[0.0; STATE_DIM]; STATE_DIM],
            b: [0.0; STATE_DIM],
            c_out: output_row(),
            tau_hpa: 10.0,
            tau_gut: 120.0,
            stable: true,
        }
    }

    /// One-state system placed in the measured (cortisol) slot:
    /// dx = -lambda x + u, so H = 1 / (lambda + j omega).
    fn one_state(lambda: f64) -> LinearizedSystem {
        let mut sys = empty_system();
        // The other diagonal entries are made stable too so the resolvent
        // stays well conditioned.
        for i in 0..STATE_DIM {
            sys.j0[i][i] = -1.0;
        }
        sys.j0[4][4] = -lambda;
        sys.b[4] = 1.0;
        sys
    }

    /// Pure-delay feedback in the measured slot: dx = -kappa x(t - tau) + u,
    /// so H = 1 / (j omega + kappa e^{-j omega tau}).
    fn pure_delay(kappa: f64, tau: f64) -> LinearizedSystem {
        let mut sys = empty_system();
        for i in 0..STATE_DIM {
            if i != 4 {
                sys.j0[i][i] = -1.0;
            }
        }
        sys.j_hpa[4][3] = 0.0;
        sys.j_hpa[3][4] = 0.0;
        // Self-feedback through the HPA delay channel lands on the (4, 4)
        // entry, which is off the physiological pattern; that pattern is
        // enforced by linearize, not by the resolvent, so a synthetic
        // system may use it freely.
        sys.j_hpa[4][4] = -kappa;
        sys.tau_hpa = tau;
        sys.b[4] = 1.0;
        sys
    }

    #[test]
    fn one_state_matches_closed_form() {
        let lambda = 0.035;
        let sys = one_state(lambda);
        for &omega in &[0.0, 1e-4, 3e-3, 0.02, 0.5, 1.0] {
            let h = transfer_function(&sys, omega).unwrap();
            let exact = Complex64::new(1.0, 0.0) / Complex64::new(lambda, omega);
            assert!(
                (h - exact).norm() <= 1e-12,
                "omega {omega}: {h} vs {exact}"
            );
        }
    }

    #[test]
    fn pure_delay_matches_closed_form() {
        let (kappa, tau) = (0.05, 10.0);
        let sys = pure_delay(kappa, tau);
        for &omega in &[0.0, 1e-3, 0.01, 0.1, 0.7] {
            let h = transfer_function(&sys, omega).unwrap();
            let jw = Complex64::new(0.0, omega);
            let exact = Complex64::new(1.0, 0.0) / (jw + kappa * (-jw * tau).exp());
            assert!(
                (h - exact).norm() <= 1e-12,
                "omega {omega}: {h} vs {exact}"
            );
        }
    }

    #[test]
    fn one_pole_corner_frequency() {
        let lambda = 0.012;
        let sys = one_state(lambda);
        let data = bode(&sys, 1e-5, 1.0, 400).unwrap();
        let w3 = data.omega_3db.expect("corner inside grid");
        assert!(
            ((w3 - lambda) / lambda).abs() <= 1e-3,
            "omega_3db {w3} vs lambda {lambda}"
        );
        assert!(data.omega_3db_note.is_none());
    }

    #[test]
    fn conjugate_symmetry() {
        let sys = pure_delay(0.04, 25.0);
        for i in 1..=20 {
            let omega = 1e-4 * 1.6f64.powi(i);
            let hp = transfer_function(&sys, omega).unwrap();
            let hm = transfer_function(&sys, -omega).unwrap();
            assert!((hp - hm.conj()).norm() <= 1e-12 * hp.norm().max(1.0));
        }
    }

    /// Cascade with the delay in the forward path: state 3 integrates the
    /// input, state 4 (the output) follows state 3 delayed by tau, so
    /// H = e^{-j omega tau} / (1 + j omega)^2.
    fn forward_delay_cascade(tau: f64) -> LinearizedSystem {
        let mut sys = empty_system();
        for i in 0..STATE_DIM {
            sys.j0[i][i] = -1.0;
        }
        sys.j_hpa[4][3] = 1.0;
        sys.tau_hpa = tau;
        sys.b[3] = 1.0;
        sys
    }

    #[test]
    fn forward_delay_shifts_phase_exactly() {
        // A delay in series multiplies the response by e^{-j omega tau}:
        // the ratio to the undelayed twin is exactly that rotation.
        let tau = 10.0;
        let delayed = forward_delay_cascade(tau);
        let undelayed = forward_delay_cascade(0.0);
        for &omega in &[0.002, 0.02, 0.3, 1.0] {
            let hd = transfer_function(&delayed, omega).unwrap();
            let h0 = transfer_function(&undelayed, omega).unwrap();
            let rotation = (-Complex64::new(0.0, omega * tau)).exp();
            assert!(
                (hd / h0 - rotation).norm() <= 1e-12,
                "omega {omega}: ratio {} vs {rotation}",
                hd / h0
            );
        }
    }

    #[test]
    fn low_frequency_limit_approaches_dc() {
        let sys = one_state(0.02);
        let data = bode(&sys, 1e-6, 1.0, 400).unwrap();
        let first = &data.points[0];
        let mag = (first.h_re.powi(2) + first.h_im.powi(2)).sqrt();
        assert!(((mag - data.dc_gain) / data.dc_gain).abs() <= 0.01);
        assert!(first.phase_deg.abs() <= 1.0, "phase {}", first.phase_deg);
    }

    #[test]
    fn phase_unwraps_against_closed_form() {
        // The cascade's exact phase -omega tau - 2 atan(omega) falls
        // through several full turns by omega = 1; the unwrapped sweep must
        // track it continuously instead of jumping back by 360 degrees.
        let tau = 40.0;
        let sys = forward_delay_cascade(tau);
        let data = bode(&sys, 1e-4, 1.0, 400).unwrap();
        for pt in &data.points {
            let exact = (-pt.omega * tau - 2.0 * pt.omega.atan()).to_degrees();
            assert!(
                (pt.phase_deg - exact).abs() <= 1e-6,
                "omega {}: {} vs {exact}",
                pt.omega,
                pt.phase_deg
            );
        }
        assert!(
            data.points.last().unwrap().phase_deg < -360.0,
            "a 40-minute delay should pass one full turn by 1 rad/min"
        );
    }

    #[test]
    fn unstable_system_is_refused() {
        let mut sys = one_state(0.02);
        sys.stable = false;
        let err = transfer_function(&sys, 0.1).unwrap_err();
        assert!(matches!(err, GbaError::UnstableOperatingPoint { .. }));
    }

    #[test]
    fn singular_resolvent_is_reported() {
        // All-zero dynamics make the resolvent singular at omega = 0.
        let mut sys = empty_system();
        sys.b[4] = 1.0;
        let err = transfer_function(&sys, 0.0).unwrap_err();
        assert!(matches!(err, GbaError::SingularMatrix { .. }));
    }

    #[test]
    fn corner_outside_grid_yields_note_not_error() {
        let sys = one_state(0.5);
        // Grid ends well before the corner.
        let data = bode(&sys, 1e-6, 1e-2, 50).unwrap();
        assert!(data.omega_3db.is_none());
        assert!(data
            .omega_3db_note
            .as_deref()
            .unwrap()
            .contains("widen the grid"));
    }
}
