//! Time-varying leak-rate input profiles `u(t) = k_leak(t)`.
//!
//! All profiles are piecewise constant and right-continuous.

use crate::error::{GbaError, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InputProfile {
    /// `u(t) = baseline` everywhere.
    Constant { baseline: f64 },
    /// `baseline` outside `[t_on, t_off)`, `elevated` inside.
    Pulse {
        baseline: f64,
        elevated: f64,
        t_on: f64,
        t_off: f64,
    },
    /// `baseline` before `t_on`, `elevated` from `t_on` onward.
    Step {
        baseline: f64,
        elevated: f64,
        t_on: f64,
    },
    /// Right-continuous piecewise-constant profile; each segment is
    /// `(t_start, value)` and the first segment must cover the history span.
    CustomPiecewise { segments: Vec<(f64, f64)> },
}

impl InputProfile {
    pub fn validate(&self) -> Result<()> {
        let check_value = |name: &str, v: f64| -> Result<()> {
            if !v.is_finite() || v < 0.0 {
                return Err(GbaError::InvalidParameter(format!(
                    "input profile {name} must be finite and nonnegative, got {v}"
                )));
            }
            Ok(())
        };
        match self {
            InputProfile::Constant { baseline } => check_value("baseline", *baseline),
            InputProfile::Pulse {
                baseline,
                elevated,
                t_on,
                t_off,
            } => {
                check_value("baseline", *baseline)?;
                check_value("elevated", *elevated)?;
                if !t_on.is_finite() || !t_off.is_finite() || t_on >= t_off {
                    return Err(GbaError::InvalidParameter(format!(
                        "pulse needs finite t_on < t_off, got [{t_on}, {t_off})"
                    )));
                }
                Ok(())
            }
            InputProfile::Step {
                baseline,
                elevated,
                t_on,
            } => {
                check_value("baseline", *baseline)?;
                check_value("elevated", *elevated)?;
                if !t_on.is_finite() {
                    return Err(GbaError::InvalidParameter(format!(
                        "step needs finite t_on, got {t_on}"
                    )));
                }
                Ok(())
            }
            InputProfile::CustomPiecewise { segments } => {
                if segments.is_empty() {
                    return Err(GbaError::InvalidParameter(
                        "custom profile needs at least one segment".into(),
                    ));
                }
                for (i, (t, v)) in segments.iter().enumerate() {
                    if !t.is_finite() {
                        return Err(GbaError::InvalidParameter(format!(
                            "segment {i} start time must be finite, got {t}"
                        )));
                    }
                    check_value(&format!("segment {i} value"), *v)?;
                    if i > 0 && segments[i - 1].0 >= *t {
                        return Err(GbaError::InvalidParameter(format!(
                            "segment start times must be strictly increasing ({} then {t})",
                            segments[i - 1].0
                        )));
                    }
                }
                Ok(())
            }
        }
    }

    /// Value at time `t`; right-continuous at breakpoints. Times before the
    /// first custom segment take the first segment's value.
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            InputProfile::Constant { baseline } => *baseline,
            InputProfile::Pulse {
                baseline,
                elevated,
                t_on,
                t_off,
            } => {
                if t >= *t_on && t < *t_off {
                    *elevated
                } else {
                    *baseline
                }
            }
            InputProfile::Step {
                baseline,
                elevated,
                t_on,
            } => {
                if t >= *t_on {
                    *elevated
                } else {
                    *baseline
                }
            }
            InputProfile::CustomPiecewise { segments } => {
                let mut value = segments[0].1;
                for (start, v) in segments {
                    if t >= *start {
                        value = *v;
                    } else {
                        break;
                    }
                }
                value
            }
        }
    }
}
