//! Equilibria of the model under constant drive, their delay-aware
//! linearization, and a simulation-based stability probe.
//!
//! The linearization splits the Jacobian by argument: `J0` for the
//! instantaneous state, `J_hpa` for the state delayed by `tau_hpa`, and
//! `J_gut` for the state delayed by `tau_gut`. Both delayed matrices are
//! structurally sparse and the expected pattern is enforced exactly.

use crate::error::{GbaError, Result};
use crate::input::InputProfile;
use crate::integrator::{integrate, HistoryInit, IntegratorConfig};
use crate::linalg;
use crate::model::{
    default_initial_state, rhs, CircadianDrive, DelayedView, ModelParameters, StateVector,
    STATE_DIM, STATE_NAMES,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

const NEWTON_TOLERANCE: f64 = 1e-10;
const NEWTON_MAX_ITERATIONS: usize = 200;
/// Off-pattern Jacobian entries above this magnitude are structural errors.
const SPARSITY_TOLERANCE: f64 = 1e-8;

/// Linearized dynamics around an equilibrium:
/// `dx/dt = J0 x(t) + J_hpa x(t - tau_hpa) + J_gut x(t - tau_gut) + B u`,
/// with cortisol as the measured output `y = C_out x`.
#[derive(Debug, Clone, Serialize)]
pub struct LinearizedSystem {
    pub x_star: StateVector,
    pub u_star: f64,
    /// Mean drive level the equilibrium was computed at.
    pub e_bar: f64,
    pub j0: [[f64; STATE_DIM]; STATE_DIM],
    pub j_hpa: [[f64; STATE_DIM]; STATE_DIM],
    pub j_gut: [[f64; STATE_DIM]; STATE_DIM],
    pub b: [f64; STATE_DIM],
    pub c_out: [f64; STATE_DIM],
    pub tau_hpa: f64,
    pub tau_gut: f64,
    /// Set by the stability probe; frequency-domain analysis refuses
    /// systems not flagged stable.
    pub stable: bool,
}

/// Output selector: cortisol.
pub fn output_row() -> [f64; STATE_DIM] {
    [0.0, 0.0, 0.0, 0.0, 1.0, 0.0]
}

fn residual(p: &ModelParameters, x: &[f64; STATE_DIM], u: f64, e_bar: f64) -> Result<[f64; STATE_DIM]> {
    let xs = StateVector::from_array(*x);
    let delayed = DelayedView { x_hpa: xs, x_gut: xs };
    rhs(0.0, &xs, &delayed, u, e_bar, p).map(|d| d.as_array())
}

fn inf_norm(v: &[f64; STATE_DIM]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Combined Jacobian of the equilibrium residual (instantaneous and delayed
/// arguments perturbed together), by central differences.
fn newton_jacobian(
    p: &ModelParameters,
    x: &[f64; STATE_DIM],
    u: f64,
    e_bar: f64,
) -> Result<[[f64; STATE_DIM]; STATE_DIM]> {
    let mut j = [[0.0; STATE_DIM]; STATE_DIM];
    for col in 0..STATE_DIM {
        let h = fd_step(x[col]);
        let mut xp = *x;
        let mut xm = *x;
        xp[col] += h;
        xm[col] = (xm[col] - h).max(0.0);
        let span = xp[col] - xm[col];
        let gp = residual(p, &xp, u, e_bar)?;
        let gm = residual(p, &xm, u, e_bar)?;
        for row in 0..STATE_DIM {
            j[row][col] = (gp[row] - gm[row]) / span;
        }
    }
    Ok(j)
}

fn fd_step(x: f64) -> f64 {
    (1e-6f64).max(1e-6 * x.abs())
}

/// Find the equilibrium under constant input `u_star` and constant drive at
/// the drive's mean level.
///
/// The Newton start is the final state of a 20-day constant-input
/// simulation, so the iteration polishes a state already near the attractor
/// rather than hunting from an arbitrary guess.
pub fn find_equilibrium(
    p: &ModelParameters,
    drive: &CircadianDrive,
    u_star: f64,
) -> Result<StateVector> {
    p.validate()?;
    if !u_star.is_finite() || u_star < 0.0 {
        return Err(GbaError::InvalidParameter(format!(
            "u_star must be finite and nonnegative, got {u_star}"
        )));
    }
    let e_bar = drive.mean_level();
    let presim = integrate(
        p,
        &drive.frozen(),
        &InputProfile::Constant { baseline: u_star },
        &HistoryInit::Constant(default_initial_state().as_array()),
        &IntegratorConfig {
            horizon: 28_800.0,
            output_every: 1440.0,
            ..IntegratorConfig::default()
        },
    )?;
    let mut x = presim.states.last().unwrap().as_array();

    let mut g = residual(p, &x, u_star, e_bar)?;
    let mut best = inf_norm(&g);
    for _ in 0..NEWTON_MAX_ITERATIONS {
        if best <= NEWTON_TOLERANCE {
            return finish_equilibrium(x);
        }
        let j = newton_jacobian(p, &x, u_star, e_bar)?;
        let mut neg_g = [0.0; STATE_DIM];
        for i in 0..STATE_DIM {
            neg_g[i] = -g[i];
        }
        let delta = linalg::solve(&j, &neg_g).ok_or_else(|| GbaError::SingularMatrix {
            context: "Newton step for equilibrium".into(),
            cond: f64::INFINITY,
        })?;
        // Damped update: halve the step until the residual improves.
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let mut x_try = x;
            for i in 0..STATE_DIM {
                x_try[i] = (x[i] + lambda * delta[i]).max(0.0);
            }
            if let Ok(g_try) = residual(p, &x_try, u_star, e_bar) {
                let norm_try = inf_norm(&g_try);
                if norm_try < best {
                    x = x_try;
                    g = g_try;
                    best = norm_try;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if best <= NEWTON_TOLERANCE {
        return finish_equilibrium(x);
    }
    Err(GbaError::NewtonNoConvergence {
        iterations: NEWTON_MAX_ITERATIONS,
        best_residual: best,
    })
}

fn finish_equilibrium(mut x: [f64; STATE_DIM]) -> Result<StateVector> {
    for (i, v) in x.iter_mut().enumerate() {
        if *v < 0.0 {
            if *v >= -1e-12 {
                *v = 0.0;
            } else {
                return Err(GbaError::NonphysicalEquilibrium {
                    component: STATE_NAMES[i].to_string(),
                    value: *v,
                });
            }
        }
    }
    Ok(StateVector::from_array(x))
}

/// Which delayed-argument entries are structurally nonzero.
/// `J_hpa`: ACTH row reacts to delayed cortisol, cortisol row to delayed
/// ACTH. `J_gut`: the permeability row reacts to delayed cortisol.
const J_HPA_PATTERN: [(usize, usize); 2] = [(3, 4), (4, 3)];
const J_GUT_PATTERN: [(usize, usize); 1] = [(5, 4)];

enum Slot {
    Instant,
    Hpa,
    Gut,
}

fn slot_jacobian(
    p: &ModelParameters,
    x_star: &[f64; STATE_DIM],
    u: f64,
    e_bar: f64,
    slot: Slot,
) -> Result<[[f64; STATE_DIM]; STATE_DIM]> {
    let eval = |x: &[f64; STATE_DIM],
                xh: &[f64; STATE_DIM],
                xg: &[f64; STATE_DIM]|
     -> Result<[f64; STATE_DIM]> {
        let delayed = DelayedView {
            x_hpa: StateVector::from_array(*xh),
            x_gut: StateVector::from_array(*xg),
        };
        rhs(0.0, &StateVector::from_array(*x), &delayed, u, e_bar, p).map(|d| d.as_array())
    };
    let mut j = [[0.0; STATE_DIM]; STATE_DIM];
    for col in 0..STATE_DIM {
        let h = fd_step(x_star[col]);
        let mut plus = *x_star;
        let mut minus = *x_star;
        plus[col] += h;
        minus[col] = (minus[col] - h).max(0.0);
        let span = plus[col] - minus[col];
        let (gp, gm) = match slot {
            Slot::Instant => (
                eval(&plus, x_star, x_star)?,
                eval(&minus, x_star, x_star)?,
            ),
            Slot::Hpa => (
                eval(x_star, &plus, x_star)?,
                eval(x_star, &minus, x_star)?,
            ),
            Slot::Gut => (
                eval(x_star, x_star, &plus)?,
                eval(x_star, x_star, &minus)?,
            ),
        };
        for row in 0..STATE_DIM {
            j[row][col] = (gp[row] - gm[row]) / span;
        }
    }
    Ok(j)
}

#[allow(clippy::needless_range_loop)] // (row, col) pairs index the pattern
fn enforce_pattern(
    mut j: [[f64; STATE_DIM]; STATE_DIM],
    pattern: &[(usize, usize)],
    name: &'static str,
) -> Result<[[f64; STATE_DIM]; STATE_DIM]> {
    for row in 0..STATE_DIM {
        for col in 0..STATE_DIM {
            if pattern.contains(&(row, col)) {
                continue;
            }
            if j[row][col].abs() >= SPARSITY_TOLERANCE {
                return Err(GbaError::SparsityViolation {
                    matrix: name,
                    row,
                    col,
                    value: j[row][col],
                });
            }
            j[row][col] = 0.0;
        }
    }
    Ok(j)
}

/// Linearize the model around an equilibrium.
///
/// Delayed arguments are perturbed separately from the instantaneous one,
/// yielding the three Jacobians of the delay system. Entries outside the
/// structural pattern of the delayed matrices are verified below 1e-8 and
/// zeroed exactly. The input column `B` is the sensitivity to `u`; only the
/// endotoxin row is structurally nonzero and it equals the equilibrium
/// permeability.
pub fn linearize(
    p: &ModelParameters,
    x_star: &StateVector,
    u_star: f64,
    e_bar: f64,
) -> Result<LinearizedSystem> {
    p.validate()?;
    let xs = x_star.as_array();
    let j0 = slot_jacobian(p, &xs, u_star, e_bar, Slot::Instant)?;
    let j_hpa = enforce_pattern(
        slot_jacobian(p, &xs, u_star, e_bar, Slot::Hpa)?,
        &J_HPA_PATTERN,
        "J_hpa",
    )?;
    let j_gut = enforce_pattern(
        slot_jacobian(p, &xs, u_star, e_bar, Slot::Gut)?,
        &J_GUT_PATTERN,
        "J_gut",
    )?;

    // Input sensitivity by the same central-difference scheme.
    let hu = fd_step(u_star);
    let up = u_star + hu;
    let um = (u_star - hu).max(0.0);
    let gp = residual(p, &xs, up, e_bar)?;
    let gm = residual(p, &xs, um, e_bar)?;
    let mut b = [0.0; STATE_DIM];
    for row in 0..STATE_DIM {
        b[row] = (gp[row] - gm[row]) / (up - um);
    }
    for (row, v) in b.iter_mut().enumerate() {
        if row == 0 {
            continue;
        }
        if v.abs() >= SPARSITY_TOLERANCE {
            return Err(GbaError::SparsityViolation {
                matrix: "B",
                row,
                col: 0,
                value: *v,
            });
        }
        *v = 0.0;
    }

    Ok(LinearizedSystem {
        x_star: *x_star,
        u_star,
        e_bar,
        j0,
        j_hpa,
        j_gut,
        b,
        c_out: output_row(),
        tau_hpa: p.tau_hpa,
        tau_gut: p.tau_gut,
        stable: false,
    })
}

/// Simulation-based stability probe.
///
/// Perturbs every equilibrium component by 1e-3 relative with
/// deterministically seeded random signs, integrates under frozen drive,
/// and requires the maximum relative deviation to shrink over three
/// consecutive spans of three times the longest delay.
pub fn stability_probe(
    p: &ModelParameters,
    x_star: &StateVector,
    u_star: f64,
    e_bar: f64,
) -> Result<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6742_7261_696e);
    let xs = x_star.as_array();
    let mut x0 = xs;
    for v in x0.iter_mut() {
        let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
        *v *= 1.0 + 1e-3 * sign;
    }
    let span = 3.0 * p.tau_hpa.max(p.tau_gut);
    let drive = CircadianDrive::new(e_bar, 0.0, 1440.0, 0.0)?;
    let ts = integrate(
        p,
        &drive,
        &InputProfile::Constant { baseline: u_star },
        &HistoryInit::Constant(x0),
        &IntegratorConfig {
            horizon: 3.0 * span,
            ..IntegratorConfig::default()
        },
    )?;
    let scale: Vec<f64> = xs.iter().map(|v| v.abs().max(1e-9)).collect();
    let mut span_max = [0.0f64; 3];
    for (i, &t) in ts.times.iter().enumerate() {
        let k = ((t / span).floor() as usize).min(2);
        let state = ts.states[i].as_array();
        let mut dev = 0.0f64;
        for j in 0..STATE_DIM {
            dev = dev.max((state[j] - xs[j]).abs() / scale[j]);
        }
        span_max[k] = span_max[k].max(dev);
    }
    Ok(span_max[0] > span_max[1] && span_max[1] > span_max[2])
}

/// Equilibrium, linearization, and stability probe in one call.
pub fn analyze_operating_point(
    p: &ModelParameters,
    drive: &CircadianDrive,
    u_star: f64,
) -> Result<LinearizedSystem> {
    let x_star = find_equilibrium(p, drive, u_star)?;
    let e_bar = drive.mean_level();
    let mut sys = linearize(p, &x_star, u_star, e_bar)?;
    sys.stable = stability_probe(p, &x_star, u_star, e_bar)?;
    Ok(sys)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decoupled_params() -> ModelParameters {
        ModelParameters {
            d1: 0.0,
            d2: 0.0,
            d3: 0.0,
            d4: 0.0,
            d5: 0.0,
            d6: 0.0,
            k_damage: 0.0,
            ..ModelParameters::default()
        }
    }

    /// Independent 2-D HPA equilibrium by nested bisection: with all
    /// couplings removed, A is an explicit function of C and the cortisol
    /// balance becomes a scalar root problem.
    fn hpa_equilibrium_bisection(p: &ModelParameters, e_bar: f64) -> (f64, f64) {
        let a_of_c = |c: f64| {
            let cm = p.c.powi(p.m1 as i32);
            (p.h * e_bar / p.e_a) * cm / (cm + c.powi(p.m1 as i32))
        };
        let f = |c: f64| {
            let a = a_of_c(c);
            let am = a.powi(p.m2 as i32);
            p.alpha * am / (p.a.powi(p.m2 as i32) + am) - p.e_c * c
        };
        let (mut lo, mut hi) = (0.0, 200.0);
        assert!(f(lo) >= 0.0 && f(hi) < 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) >= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let c = 0.5 * (lo + hi);
        (a_of_c(c), c)
    }

    #[test]
    fn equilibrium_residual_is_tiny() {
        let p = ModelParameters::default();
        let drive = CircadianDrive::default();
        let x = find_equilibrium(&p, &drive, 0.1).unwrap();
        let g = residual(&p, &x.as_array(), 0.1, drive.mean_level()).unwrap();
        assert!(inf_norm(&g) <= 1e-10, "residual {}", inf_norm(&g));
        for v in x.as_array() {
            assert!(v >= 0.0);
        }
    }

    #[test]
    fn decoupled_equilibrium_matches_bisection_oracle() {
        let p = decoupled_params();
        let drive = CircadianDrive::default();
        let x = find_equilibrium(&p, &drive, 0.0).unwrap();
        assert!(x.p.abs() <= 1e-10);
        assert!(x.t.abs() <= 1e-10);
        assert!(x.s.abs() <= 1e-10);
        assert!((x.l - p.l_base).abs() <= 1e-10);
        let (a, c) = hpa_equilibrium_bisection(&p, drive.mean_level());
        assert!((x.a - a).abs() <= 1e-8, "A {} vs {a}", x.a);
        assert!((x.c - c).abs() <= 1e-8, "C {} vs {c}", x.c);
    }

    #[test]
    fn equilibrium_consistent_with_long_simulation() {
        let p = ModelParameters::default();
        let drive = CircadianDrive::default();
        let x = find_equilibrium(&p, &drive, 0.1).unwrap();
        let sim = integrate(
            &p,
            &drive.frozen(),
            &InputProfile::Constant { baseline: 0.1 },
            &HistoryInit::Constant(default_initial_state().as_array()),
            &IntegratorConfig {
                horizon: 28_800.0,
                ..IntegratorConfig::default()
            },
        )
        .unwrap();
        let last = sim.states.last().unwrap().as_array();
        let xs = x.as_array();
        for i in 0..STATE_DIM {
            assert!(
                (last[i] - xs[i]).abs() <= 1e-6,
                "component {i}: sim {} vs equilibrium {}",
                last[i],
                xs[i]
            );
        }
    }

    #[test]
    fn pure_decay_diagonal() {
        // With every coupling zeroed the instantaneous Jacobian diagonal
        // carries exactly the elimination rates (and the repair rate).
        let mut p = decoupled_params();
        p.k = 0.0;
        let drive = CircadianDrive::default();
        let x = find_equilibrium(&p, &drive, 0.0).unwrap();
        let sys = linearize(&p, &x, 0.0, drive.mean_level()).unwrap();
        let expect = [p.e_p, p.e_t, p.e_s, p.e_a, p.e_c, p.k_repair];
        for (i, &rate) in expect.iter().enumerate() {
            assert!(
                (sys.j0[i][i] + rate).abs() <= 1e-7,
                "diagonal {i}: {} vs {}",
                sys.j0[i][i],
                -rate
            );
        }
    }

    #[test]
    fn delayed_jacobians_have_expected_pattern() {
        let p = ModelParameters::default();
        let drive = CircadianDrive::default();
        let x = find_equilibrium(&p, &drive, 0.1).unwrap();
        let sys = linearize(&p, &x, 0.1, drive.mean_level()).unwrap();
        for row in 0..STATE_DIM {
            for col in 0..STATE_DIM {
                if !J_HPA_PATTERN.contains(&(row, col)) {
                    assert_eq!(sys.j_hpa[row][col], 0.0);
                }
                if !J_GUT_PATTERN.contains(&(row, col)) {
                    assert_eq!(sys.j_gut[row][col], 0.0);
                }
            }
        }
        assert!(sys.j_hpa[3][4] < 0.0, "delayed cortisol suppresses ACTH");
        assert!(sys.j_hpa[4][3] > 0.0, "delayed ACTH drives cortisol");
        assert!(sys.j_gut[5][4] > 0.0, "delayed cortisol damages the barrier");
        // Input column: endotoxin row only, equal to equilibrium permeability.
        assert!((sys.b[0] - x.l).abs() <= 1e-9);
        for row in 1..STATE_DIM {
            assert_eq!(sys.b[row], 0.0);
        }
        // The instantaneous Jacobian carries u_star in the P row, L column.
        assert!((sys.j0[0][5] - 0.1).abs() <= 1e-8);
    }

    #[test]
    fn gut_jacobian_half_saturation_closed_form() {
        // d/dC of k_damage C^n / (C_half^n + C^n) at C = C_half is
        // k_damage n / (4 C_half); probe the differentiation machinery at a
        // synthetic state pinned there.
        let p = ModelParameters::default();
        let drive = CircadianDrive::default();
        let mut x = find_equilibrium(&p, &drive, 0.1).unwrap();
        x.c = p.c_half;
        let sys = linearize(&p, &x, 0.1, drive.mean_level()).unwrap();
        let expect = p.k_damage * p.n_gut as f64 / (4.0 * p.c_half);
        let got = sys.j_gut[5][4];
        assert!(
            ((got - expect) / expect).abs() <= 1e-6,
            "{got} vs {expect}"
        );
    }

    #[test]
    fn healthy_point_is_stable_and_probe_flags_long_delay() {
        let p = ModelParameters::default();
        let drive = CircadianDrive::default();
        let sys = analyze_operating_point(&p, &drive, 0.1).unwrap();
        assert!(sys.stable, "healthy operating point should probe stable");

        let unstable = ModelParameters {
            tau_hpa: 40.0,
            ..ModelParameters::default()
        };
        let sys = analyze_operating_point(&unstable, &drive, 0.1).unwrap();
        assert!(!sys.stable, "tau_hpa = 40 destabilizes the HPA loop");
    }

    #[test]
    fn negative_u_star_rejected() {
        let p = ModelParameters::default();
        let drive = CircadianDrive::default();
        assert!(find_equilibrium(&p, &drive, -0.5).is_err());
    }
}
