//! Named stress scenarios, rhythm metrics, and recovery measurement.
//!
//! Three canonical runs: `healthy` (constant baseline leak), `acute`
//! (a 12-hour leak pulse starting on day 2), and `chronic` (a sustained
//! step at the same magnitude). Rhythm metrics are computed on the
//! post-transient window; acute recovery is measured against a healthy
//! twin trajectory.

use crate::error::{GbaError, Result};
use crate::input::InputProfile;
use crate::integrator::{integrate, HistoryInit, IntegratorConfig, TimeSeries};
use crate::model::{default_initial_state, CircadianDrive, ModelParameters, STATE_NAMES};
use serde::{Deserialize, Serialize};

pub const DEFAULT_HEALTHY_KLEAK: f64 = 0.1;
pub const DEFAULT_STRESS_KLEAK: f64 = 3.0;
pub const DEFAULT_STRESS_ONSET: f64 = 2880.0;
pub const DEFAULT_PULSE_MINUTES: f64 = 720.0;
/// Post-transient analysis window opens after three full days; healthy
/// metrics run on the remainder of the default 10-day horizon.
pub const ANALYSIS_WINDOW_START: f64 = 4320.0;
/// Final-stretch window length for mean-cortisol reporting: 3 days.
pub const FINAL_WINDOW_MINUTES: f64 = 4320.0;
/// Acute recovery: the 24 h rolling envelope of the cortisol deviation must
/// stay within this fraction of the healthy rhythm amplitude.
pub const RECOVERY_ENVELOPE_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Healthy,
    Acute,
    Chronic,
    Custom(InputProfile),
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Healthy => "healthy",
            Scenario::Acute => "acute",
            Scenario::Chronic => "chronic",
            Scenario::Custom(_) => "custom",
        }
    }

    pub fn input_profile(&self) -> InputProfile {
        match self {
            Scenario::Healthy => InputProfile::Constant {
                baseline: DEFAULT_HEALTHY_KLEAK,
            },
            Scenario::Acute => InputProfile::Pulse {
                baseline: DEFAULT_HEALTHY_KLEAK,
                elevated: DEFAULT_STRESS_KLEAK,
                t_on: DEFAULT_STRESS_ONSET,
                t_off: DEFAULT_STRESS_ONSET + DEFAULT_PULSE_MINUTES,
            },
            Scenario::Chronic => InputProfile::Step {
                baseline: DEFAULT_HEALTHY_KLEAK,
                elevated: DEFAULT_STRESS_KLEAK,
                t_on: DEFAULT_STRESS_ONSET,
            },
            Scenario::Custom(profile) => profile.clone(),
        }
    }
}

/// Rhythm metrics over a window: peaks by local-maximum detection with a
/// prominence floor of 1% of the window's value range.
#[derive(Debug, Clone, Serialize)]
pub struct RhythmMetrics {
    /// Mean inter-peak spacing; absent with fewer than two peaks.
    pub period: Option<f64>,
    /// mean(peaks) - mean(troughs); max - min when fewer than two peaks.
    pub amplitude: f64,
    /// Times of the detected peaks.
    pub peak_times: Vec<f64>,
}

/// Full scenario outcome.
#[derive(Debug, Clone, Serialize)]
pub struct ScenarioReport {
    pub trajectory: TimeSeries,
    /// Cortisol period over the analysis window; reported only when at
    /// least three peaks were detected.
    pub cortisol_period: Option<f64>,
    pub cortisol_amplitude: f64,
    /// Minutes from pulse end to sustained return within the healthy
    /// envelope; acute scenario only.
    pub recovery_time: Option<f64>,
    /// Mean cortisol over the final three days.
    pub final_mean_cortisol: f64,
}

fn state_index(channel: &str) -> Result<usize> {
    STATE_NAMES
        .iter()
        .position(|n| *n == channel)
        .ok_or_else(|| {
            GbaError::InvalidParameter(format!(
                "unknown state channel {channel:?}; expected one of {STATE_NAMES:?}"
            ))
        })
}

/// Detect peaks and rhythm metrics of one state channel over `[t0, t1]`.
pub fn measure_rhythm(ts: &TimeSeries, channel: &str, window: (f64, f64)) -> Result<RhythmMetrics> {
    let idx = state_index(channel)?;
    let (t0, t1) = window;
    let (first, last) = (*ts.times.first().unwrap_or(&0.0), *ts.times.last().unwrap_or(&0.0));
    if ts.is_empty() || t0 < first - 1e-9 || t1 > last + 1e-9 || t0 >= t1 {
        return Err(GbaError::InvalidParameter(format!(
            "analysis window [{t0}, {t1}] outside trajectory span [{first}, {last}]"
        )));
    }
    let lo = ts.index_at(t0);
    let hi = ts.index_at(t1 + 1e-9);
    let values: Vec<f64> = ts.states[lo..hi].iter().map(|x| x.component(idx)).collect();
    let times = &ts.times[lo..hi];

    let v_max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let v_min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let range = v_max - v_min;
    let min_prominence = 0.01 * range;

    let mut peaks = Vec::new();
    if range > 0.0 {
        for i in 1..values.len().saturating_sub(1) {
            if values[i] > values[i - 1] && values[i] > values[i + 1] {
                let prom = prominence(&values, i);
                if prom >= min_prominence {
                    peaks.push(i);
                }
            }
        }
    }

    if peaks.len() < 2 {
        return Ok(RhythmMetrics {
            period: None,
            amplitude: range,
            peak_times: peaks.iter().map(|&i| times[i]).collect(),
        });
    }

    let peak_times: Vec<f64> = peaks.iter().map(|&i| times[i]).collect();
    let period = (peak_times[peak_times.len() - 1] - peak_times[0]) / (peaks.len() - 1) as f64;
    let peak_mean = peaks.iter().map(|&i| values[i]).sum::<f64>() / peaks.len() as f64;
    let mut trough_sum = 0.0;
    for w in peaks.windows(2) {
        let mut t_min = f64::INFINITY;
        for v in &values[w[0]..=w[1]] {
            t_min = t_min.min(*v);
        }
        trough_sum += t_min;
    }
    let trough_mean = trough_sum / (peaks.len() - 1) as f64;

    Ok(RhythmMetrics {
        period: Some(period),
        amplitude: peak_mean - trough_mean,
        peak_times,
    })
}

/// Topographic prominence of a local maximum: height above the higher of
/// the two lowest saddles separating it from taller terrain (or the window
/// edge).
fn prominence(values: &[f64], peak: usize) -> f64 {
    let v = values[peak];
    let mut left_min = v;
    let mut i = peak;
    while i > 0 {
        i -= 1;
        left_min = left_min.min(values[i]);
        if values[i] > v {
            break;
        }
    }
    let mut right_min = v;
    let mut i = peak;
    while i + 1 < values.len() {
        i += 1;
        right_min = right_min.min(values[i]);
        if values[i] > v {
            break;
        }
    }
    v - left_min.max(right_min)
}

/// Run one scenario and extract its observables.
///
/// The horizon must cover at least ten days so the post-transient analysis
/// window exists. Acute runs also integrate a healthy twin to measure the
/// recovery of the cortisol rhythm.
pub fn run_scenario(
    scenario: &Scenario,
    p: &ModelParameters,
    drive: &CircadianDrive,
    cfg: &IntegratorConfig,
) -> Result<ScenarioReport> {
    if cfg.horizon < 14_400.0 {
        return Err(GbaError::InvalidParameter(format!(
            "scenario horizon must cover ten days (14400 min), got {}",
            cfg.horizon
        )));
    }
    let history = HistoryInit::Constant(default_initial_state().as_array());
    let input = scenario.input_profile();
    let trajectory = integrate(p, drive, &input, &history, cfg)?;

    // Metrics window: post-transient for healthy/custom, post-pulse for
    // acute, and the final three days for chronic so the settled
    // pathological rhythm is measured rather than the step transition.
    let window = match scenario {
        Scenario::Acute => (DEFAULT_STRESS_ONSET + DEFAULT_PULSE_MINUTES, cfg.horizon),
        Scenario::Chronic => (cfg.horizon - FINAL_WINDOW_MINUTES, cfg.horizon),
        _ => (ANALYSIS_WINDOW_START, cfg.horizon),
    };
    let metrics = measure_rhythm(&trajectory, "C", window)?;

    let recovery_time = match scenario {
        Scenario::Acute => {
            let healthy = integrate(
                p,
                drive,
                &Scenario::Healthy.input_profile(),
                &history,
                cfg,
            )?;
            measure_recovery(
                &trajectory,
                &healthy,
                DEFAULT_STRESS_ONSET + DEFAULT_PULSE_MINUTES,
            )?
        }
        _ => None,
    };

    let final_lo = trajectory.index_at(cfg.horizon - FINAL_WINDOW_MINUTES);
    let tail = &trajectory.states[final_lo..];
    let final_mean_cortisol = tail.iter().map(|x| x.c).sum::<f64>() / tail.len() as f64;

    let cortisol_period = if metrics.peak_times.len() >= 3 {
        metrics.period
    } else {
        None
    };

    Ok(ScenarioReport {
        cortisol_period,
        cortisol_amplitude: metrics.amplitude,
        recovery_time,
        final_mean_cortisol,
        trajectory,
    })
}

/// Recovery of the stressed cortisol trace toward its healthy twin.
///
/// The deviation envelope is the trailing 24 h maximum of |C_stressed -
/// C_healthy|. Recovery is declared at the end of the first full day the
/// envelope stays within 5% of the healthy rhythm amplitude; the returned
/// time is measured from `pulse_end`. `None` when the envelope never
/// settles within the horizon.
pub fn measure_recovery(
    stressed: &TimeSeries,
    healthy: &TimeSeries,
    pulse_end: f64,
) -> Result<Option<f64>> {
    if stressed.len() != healthy.len() {
        return Err(GbaError::InvalidParameter(
            "stressed and healthy trajectories must share sample times".into(),
        ));
    }
    let horizon = *stressed.times.last().unwrap();
    let healthy_rhythm = measure_rhythm(healthy, "C", (ANALYSIS_WINDOW_START, horizon))?;
    let tolerance = RECOVERY_ENVELOPE_FRACTION * healthy_rhythm.amplitude;

    let day = 1440.0;
    let start = stressed.index_at(pulse_end);
    // Sliding 24 h maximum of the absolute deviation via a monotone deque.
    let mut deque: std::collections::VecDeque<usize> = std::collections::VecDeque::new();
    let deviation: Vec<f64> = (0..stressed.len())
        .map(|i| (stressed.states[i].c - healthy.states[i].c).abs())
        .collect();
    for i in start..stressed.len() {
        while let Some(&back) = deque.back() {
            if deviation[back] <= deviation[i] {
                deque.pop_back();
            } else {
                break;
            }
        }
        deque.push_back(i);
        while let Some(&front) = deque.front() {
            if stressed.times[front] < stressed.times[i] - day {
                deque.pop_front();
            } else {
                break;
            }
        }
        // The envelope is meaningful once a full day has accumulated.
        if stressed.times[i] >= pulse_end + day {
            let envelope = deviation[*deque.front().unwrap()];
            if envelope <= tolerance {
                return Ok(Some(stressed.times[i] - pulse_end));
            }
        }
    }
    Ok(None)
}
