//! Six-state closed-loop gut-brain model: state vector, parameters,
//! circadian drive, and the delayed right-hand side.
//!
//! State order is `[P, T, S, A, C, L]`:
//! endotoxin load P, TNF-alpha T, IL-6 S, ACTH A (pg/mL), cortisol C
//! (ug/dL), and gut permeability L (dimensionless). Two constant delays
//! act on the loop: `tau_hpa` on the ACTH/cortisol exchange and `tau_gut`
//! on cortisol's action on the gut barrier.

use crate::error::{GbaError, Result};
use crate::linalg::{powi, Scalar};
use serde::{Deserialize, Serialize};

pub const STATE_DIM: usize = 6;
pub const STATE_NAMES: [&str; STATE_DIM] = ["P", "T", "S", "A", "C", "L"];

/// Tolerance below zero treated as numerical noise rather than a model error.
pub const NEGATIVITY_TOLERANCE: f64 = 1e-12;

/// One point of the model state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    /// Endotoxin (LPS) load in circulation.
    pub p: f64,
    /// TNF-alpha concentration.
    pub t: f64,
    /// IL-6 concentration.
    pub s: f64,
    /// ACTH concentration, pg/mL.
    pub a: f64,
    /// Cortisol concentration, ug/dL.
    pub c: f64,
    /// Gut permeability (dimensionless leakiness).
    pub l: f64,
}

impl StateVector {
    pub fn from_array(x: [f64; STATE_DIM]) -> Self {
        Self {
            p: x[0],
            t: x[1],
            s: x[2],
            a: x[3],
            c: x[4],
            l: x[5],
        }
    }

    pub fn as_array(&self) -> [f64; STATE_DIM] {
        [self.p, self.t, self.s, self.a, self.c, self.l]
    }

    pub fn component(&self, index: usize) -> f64 {
        self.as_array()[index]
    }
}

/// Delayed states seen by the right-hand side.
#[derive(Debug, Clone, Copy)]
pub struct DelayedView {
    /// State at `t - tau_hpa`.
    pub x_hpa: StateVector,
    /// State at `t - tau_gut`.
    pub x_gut: StateVector,
}

/// Model constants. Rates are per minute, delays in minutes.
///
/// The HPA constants (`h` through `tau_hpa`) and the clearance/barrier
/// constants (`k` through `tau_gut`) are the published set; the interaction
/// constants `x1..x12` and `d1..d6` are calibrated here and are
/// parameter-contingent (results that depend on their numeric values are
/// flagged as such in the test suite).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelParameters {
    /// Maximal circadian-driven ACTH production.
    pub h: f64,
    /// Cortisol level giving half-maximal ACTH suppression.
    pub c: f64,
    /// Hill coefficient of cortisol->ACTH suppression.
    pub m1: u32,
    /// Maximal ACTH-driven cortisol production.
    pub alpha: f64,
    /// ACTH level giving half-maximal cortisol production.
    pub a: f64,
    /// Hill coefficient of ACTH->cortisol production.
    pub m2: u32,
    /// ACTH elimination rate.
    #[serde(rename = "eA")]
    pub e_a: f64,
    /// Cortisol elimination rate.
    #[serde(rename = "eC")]
    pub e_c: f64,
    /// HPA signalling delay, minutes.
    pub tau_hpa: f64,
    /// Endotoxin-driven TNF-alpha production gain.
    pub k: f64,
    /// Endotoxin clearance rate.
    #[serde(rename = "eP")]
    pub e_p: f64,
    /// TNF-alpha elimination rate.
    #[serde(rename = "eT")]
    pub e_t: f64,
    /// IL-6 elimination rate.
    #[serde(rename = "eS")]
    pub e_s: f64,
    /// Maximal cortisol-driven barrier damage rate.
    pub k_damage: f64,
    /// Barrier repair rate.
    pub k_repair: f64,
    /// Baseline gut permeability.
    #[serde(rename = "L_base")]
    pub l_base: f64,
    /// Cortisol level giving half-maximal barrier damage.
    #[serde(rename = "C_half")]
    pub c_half: f64,
    /// Hill coefficient of cortisol->barrier damage.
    pub n_gut: u32,
    /// Gut-barrier response delay, minutes.
    pub tau_gut: f64,
    /// TNF half-saturation in endotoxin killing.
    pub x1: f64,
    /// IL-6 half-saturation in endotoxin killing.
    pub x2: f64,
    /// Endotoxin half-saturation in TNF production.
    pub x3: f64,
    /// Cortisol shift in TNF self-stimulation.
    pub x4: f64,
    /// IL-6 shift in TNF self-stimulation.
    pub x5: f64,
    /// TNF half-saturation in TNF self-stimulation.
    pub x6: f64,
    /// Cortisol shift in IL-6 production.
    pub x7: f64,
    /// TNF half-saturation in IL-6 production.
    pub x8: f64,
    /// IL-6 half-saturation in cytokine->ACTH stimulation.
    pub x9: f64,
    /// TNF half-saturation in cytokine->ACTH stimulation.
    pub x10: f64,
    /// IL-6 half-saturation in cytokine->cortisol stimulation.
    pub x11: f64,
    /// TNF half-saturation in cytokine->cortisol stimulation.
    pub x12: f64,
    /// Cytokine-mediated endotoxin killing gain.
    pub d1: f64,
    /// Cortisol-suppressed TNF self-stimulation gain.
    pub d2: f64,
    /// IL-6-suppressed TNF self-stimulation gain.
    pub d3: f64,
    /// TNF-driven IL-6 production gain.
    pub d4: f64,
    /// Cytokine->ACTH stimulation gain.
    pub d5: f64,
    /// Cytokine->cortisol stimulation gain.
    pub d6: f64,
}

impl Default for ModelParameters {
    fn default() -> Self {
        Self {
            h: 7.66,
            c: 6.11,
            m1: 4,
            alpha: 0.28,
            a: 21.0,
            m2: 4,
            e_a: 0.04,
            e_c: 0.01,
            tau_hpa: 10.0,
            k: 0.0504,
            e_p: 0.05,
            e_t: 0.038,
            e_s: 0.02,
            k_damage: 0.002,
            k_repair: 0.05,
            l_base: 0.1,
            c_half: 15.0,
            n_gut: 2,
            tau_gut: 120.0,
            x1: 0.5,
            x2: 0.5,
            x3: 30.0,
            x4: 2.0,
            x5: 0.5,
            x6: 0.005,
            x7: 25.0,
            x8: 0.20,
            x9: 0.23,
            x10: 0.10,
            x11: 0.23,
            x12: 0.10,
            d1: 0.05,
            d2: 0.0279,
            d3: 0.0002,
            d4: 0.5,
            d5: 0.03,
            d6: 0.55,
        }
    }
}

impl ModelParameters {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("h", self.h),
            ("c", self.c),
            ("alpha", self.alpha),
            ("a", self.a),
            ("eA", self.e_a),
            ("eC", self.e_c),
            ("tau_hpa", self.tau_hpa),
            ("eP", self.e_p),
            ("eT", self.e_t),
            ("eS", self.e_s),
            ("k_repair", self.k_repair),
            ("C_half", self.c_half),
            ("tau_gut", self.tau_gut),
            ("x1", self.x1),
            ("x2", self.x2),
            ("x3", self.x3),
            ("x4", self.x4),
            ("x5", self.x5),
            ("x6", self.x6),
            ("x7", self.x7),
            ("x8", self.x8),
            ("x9", self.x9),
            ("x10", self.x10),
            ("x11", self.x11),
            ("x12", self.x12),
        ];
        for (name, v) in positive {
            if !v.is_finite() || v <= 0.0 {
                return Err(GbaError::InvalidParameter(format!(
                    "{name} must be finite and positive, got {v}"
                )));
            }
        }
        let nonnegative = [
            ("k", self.k),
            ("k_damage", self.k_damage),
            ("L_base", self.l_base),
            ("d1", self.d1),
            ("d2", self.d2),
            ("d3", self.d3),
            ("d4", self.d4),
            ("d5", self.d5),
            ("d6", self.d6),
        ];
        for (name, v) in nonnegative {
            if !v.is_finite() || v < 0.0 {
                return Err(GbaError::InvalidParameter(format!(
                    "{name} must be finite and nonnegative, got {v}"
                )));
            }
        }
        for (name, m) in [("m1", self.m1), ("m2", self.m2), ("n_gut", self.n_gut)] {
            if m == 0 {
                return Err(GbaError::InvalidParameter(format!(
                    "Hill coefficient {name} must be at least 1"
                )));
            }
        }
        Ok(())
    }
}

/// Default initial state: trace cytokine levels, mid-range HPA hormones,
/// baseline permeability. The trace TNF/IL-6 seed keeps simulations off the
/// degenerate dark branch where both cytokines are identically zero.
pub fn default_initial_state() -> StateVector {
    StateVector {
        p: 0.0,
        t: 0.01,
        s: 0.01,
        a: 10.0,
        c: 10.0,
        l: 0.1,
    }
}

/// Circadian drive `E(t) = mean * (1 + amplitude * cos(2 pi (t - phase) / period))`.
///
/// `amplitude` is relative and must lie in `[0, 1)` so the drive stays
/// positive; `amplitude = 0` freezes the drive at its mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CircadianConfig", into = "CircadianConfig")]
pub struct CircadianDrive {
    mean: f64,
    amplitude: f64,
    period: f64,
    phase: f64,
}

/// Plain serialized form of [`CircadianDrive`]; validated on construction.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CircadianConfig {
    pub mean: f64,
    pub amplitude: f64,
    pub period: f64,
    pub phase: f64,
}

impl Default for CircadianConfig {
    fn default() -> Self {
        Self {
            mean: 1.0,
            amplitude: 0.5,
            period: 1440.0,
            phase: 480.0,
        }
    }
}

impl TryFrom<CircadianConfig> for CircadianDrive {
    type Error = GbaError;
    fn try_from(c: CircadianConfig) -> Result<Self> {
        CircadianDrive::new(c.mean, c.amplitude, c.period, c.phase)
    }
}

impl From<CircadianDrive> for CircadianConfig {
    fn from(d: CircadianDrive) -> Self {
        Self {
            mean: d.mean,
            amplitude: d.amplitude,
            period: d.period,
            phase: d.phase,
        }
    }
}

impl Default for CircadianDrive {
    fn default() -> Self {
        Self::new(1.0, 0.5, 1440.0, 480.0).expect("default drive is valid")
    }
}

impl CircadianDrive {
    pub fn new(mean: f64, amplitude: f64, period: f64, phase: f64) -> Result<Self> {
        if !mean.is_finite() || mean <= 0.0 {
            return Err(GbaError::InvalidParameter(format!(
                "circadian mean must be finite and positive, got {mean}"
            )));
        }
        if !amplitude.is_finite() || !(0.0..1.0).contains(&amplitude) {
            return Err(GbaError::InvalidParameter(format!(
                "circadian amplitude must lie in [0, 1), got {amplitude}"
            )));
        }
        if !period.is_finite() || period <= 0.0 {
            return Err(GbaError::InvalidParameter(format!(
                "circadian period must be finite and positive, got {period}"
            )));
        }
        if !phase.is_finite() {
            return Err(GbaError::InvalidParameter(format!(
                "circadian phase must be finite, got {phase}"
            )));
        }
        Ok(Self {
            mean,
            amplitude,
            period,
            phase,
        })
    }

    /// Same mean with the oscillation removed.
    pub fn frozen(&self) -> Self {
        Self {
            amplitude: 0.0,
            ..*self
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.mean
            * (1.0
                + self.amplitude
                    * (2.0 * std::f64::consts::PI * (t - self.phase) / self.period).cos())
    }

    pub fn mean_level(&self) -> f64 {
        self.mean
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn phase(&self) -> f64 {
        self.phase
    }
}

/// Right-hand side over any scalar field (`f64` for simulation, `Complex64`
/// for complex-step differentiation). No validation; raw arithmetic only.
pub fn rhs_generic<F: Scalar>(
    x: &[F; STATE_DIM],
    x_hpa: &[F; STATE_DIM],
    x_gut: &[F; STATE_DIM],
    u: F,
    e: F,
    p: &ModelParameters,
) -> [F; STATE_DIM] {
    let [pp, tt, ss, aa, cc, ll] = *x;
    let a_hpa = x_hpa[3];
    let c_hpa = x_hpa[4];
    let c_gut = x_gut[4];

    let k = |v: f64| F::from_f64(v);
    // v / (x + v), the saturating gate used throughout.
    let gate = |v: F, half: f64| v / (k(half) + v);

    let d_p = u * ll - k(p.e_p) * pp - k(p.d1) * gate(tt, p.x1) * gate(ss, p.x2) * pp;

    let d_t = -k(p.e_t) * tt
        + k(p.k) * pp / (k(p.x3) + pp)
        + (k(p.d2) / (k(p.x4) + cc) + k(p.d3) / (k(p.x5) + ss)) * gate(tt, p.x6);

    let d_s = -k(p.e_s) * ss + k(p.d4) * (F::one() / (k(p.x7) + cc)) * gate(tt, p.x8);

    let c_m1 = k(p.c.powi(p.m1 as i32));
    let d_a = -k(p.e_a) * aa
        + k(p.h) * e * c_m1 / (c_m1 + powi(c_hpa, p.m1))
        + k(p.d5) * gate(ss, p.x9) * gate(tt, p.x10);

    let a_m2 = k(p.a.powi(p.m2 as i32));
    let ah_m2 = powi(a_hpa, p.m2);
    let d_c = -k(p.e_c) * cc
        + k(p.alpha) * ah_m2 / (a_m2 + ah_m2)
        + k(p.d6) * gate(ss, p.x11) * gate(tt, p.x12);

    let cg_n = powi(c_gut, p.n_gut);
    let d_l = k(p.k_damage) * cg_n / (k(p.c_half.powi(p.n_gut as i32)) + cg_n)
        - k(p.k_repair) * (ll - k(p.l_base));

    [d_p, d_t, d_s, d_a, d_c, d_l]
}

fn check_state(label: &str, x: &StateVector, t: f64) -> Result<[f64; STATE_DIM]> {
    let mut arr = x.as_array();
    for (i, v) in arr.iter_mut().enumerate() {
        if !v.is_finite() {
            return Err(GbaError::NonFiniteState {
                component: format!("{label}{}", STATE_NAMES[i]),
                t,
            });
        }
        if *v < 0.0 {
            if *v >= -NEGATIVITY_TOLERANCE {
                *v = 0.0;
            } else {
                return Err(GbaError::NegativeState {
                    component: format!("{label}{}", STATE_NAMES[i]),
                    value: *v,
                    t,
                });
            }
        }
    }
    Ok(arr)
}

/// Model right-hand side at time `t` with current state `x`, delayed states
/// `delayed`, leak input `u = k_leak(t)` and circadian drive value `e = E(t)`.
///
/// Components within [`NEGATIVITY_TOLERANCE`] below zero are treated as zero;
/// anything more negative, or non-finite, is rejected naming the component.
pub fn rhs(
    t: f64,
    x: &StateVector,
    delayed: &DelayedView,
    u: f64,
    e: f64,
    p: &ModelParameters,
) -> Result<StateVector> {
    let x = check_state("", x, t)?;
    let xh = check_state("delayed(hpa) ", &delayed.x_hpa, t)?;
    let xg = check_state("delayed(gut) ", &delayed.x_gut, t)?;
    if !u.is_finite() || u < 0.0 {
        return Err(GbaError::InvalidParameter(format!(
            "leak input u must be finite and nonnegative, got {u} at t = {t}"
        )));
    }
    if !e.is_finite() || e < 0.0 {
        return Err(GbaError::InvalidParameter(format!(
            "drive E must be finite and nonnegative, got {e} at t = {t}"
        )));
    }
    Ok(StateVector::from_array(rhs_generic(&x, &xh, &xg, u, e, p)))
}
