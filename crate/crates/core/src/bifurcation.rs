//! One-parameter bifurcation sweep over the constant stress input,
//! locating the two tipping points between rhythmic, dampened, and
//! disrupted cortisol regimes, plus a critical-slowing-down probe.

use crate::error::{GbaError, Result};
use crate::input::InputProfile;
use crate::integrator::{integrate, HistoryInit, IntegratorConfig, TimeSeries};
use crate::model::{default_initial_state, CircadianDrive, ModelParameters};
use crate::scenario::measure_rhythm;
use rayon::prelude::*;
use serde::Serialize;

/// Regime cut: healthy rhythm keeps at least this fraction of the
/// zero-stress amplitude.
pub const HEALTHY_FRACTION: f64 = 0.5;
/// Regime cut: below this fraction of the zero-stress amplitude the rhythm
/// counts as disrupted.
pub const DISRUPTED_FRACTION: f64 = 0.01;
/// Threshold bisection stops once the bracket is this narrow.
pub const THRESHOLD_RESOLUTION: f64 = 0.01;
/// Steady-state measurement window: three full days of transient discarded,
/// then measured through day 10.
pub const MEASURE_WINDOW: (f64, f64) = (4320.0, 14400.0);

const KICK_SIZE: f64 = 0.1;
const KICK_START: f64 = 7200.0;
const KICK_DURATION: f64 = 30.0;
/// Recovery declared once the twin-run cortisol deviation stays within
/// this fraction of the local oscillation amplitude.
const RECOVERY_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    HealthyRhythm,
    Dampened,
    Disrupted,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::HealthyRhythm => "healthy-rhythm",
            Regime::Dampened => "dampened",
            Regime::Disrupted => "disrupted",
        }
    }

    fn rank(&self) -> u8 {
        match self {
            Regime::HealthyRhythm => 0,
            Regime::Dampened => 1,
            Regime::Disrupted => 2,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BifurcationPoint {
    pub k_leak: f64,
    /// Peak-to-trough cortisol amplitude over the measurement window.
    pub amplitude: f64,
    pub mean_cortisol: f64,
    pub regime: Regime,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub points: Vec<BifurcationPoint>,
    /// Amplitude of the dedicated zero-stress reference run.
    pub reference_amplitude: f64,
    /// First stress level leaving the healthy-rhythm regime, bisected to
    /// [`THRESHOLD_RESOLUTION`].
    pub threshold_1: Option<f64>,
    /// First stress level entering the disrupted regime, same resolution.
    pub threshold_2: Option<f64>,
    /// Regime-order reversals along the grid (reentrant rhythm); thresholds
    /// are still reported at the first entries.
    pub anomalies: Vec<String>,
}

/// Default sweep grid: 0 to 3.0 in steps of 0.1.
pub fn default_grid() -> Vec<f64> {
    (0..=30).map(|i| i as f64 * 0.1).collect()
}

fn classify(amplitude: f64, reference: f64) -> Regime {
    if amplitude >= HEALTHY_FRACTION * reference {
        Regime::HealthyRhythm
    } else if amplitude >= DISRUPTED_FRACTION * reference {
        Regime::Dampened
    } else {
        Regime::Disrupted
    }
}

fn simulate_constant(
    p: &ModelParameters,
    drive: &CircadianDrive,
    k_leak: f64,
    cfg: &IntegratorConfig,
) -> Result<TimeSeries> {
    integrate(
        p,
        drive,
        &InputProfile::Constant { baseline: k_leak },
        &HistoryInit::Constant(default_initial_state().as_array()),
        cfg,
    )
}

/// Steady-state amplitude and mean cortisol at one constant stress level.
fn measure_point(
    p: &ModelParameters,
    drive: &CircadianDrive,
    k_leak: f64,
    cfg: &IntegratorConfig,
) -> Result<(f64, f64)> {
    let ts = simulate_constant(p, drive, k_leak, cfg)?;
    let metrics = measure_rhythm(&ts, "C", MEASURE_WINDOW)?;
    let lo = ts.index_at(MEASURE_WINDOW.0);
    let hi = ts.index_at(MEASURE_WINDOW.1 + 1e-9).min(ts.len());
    let window = &ts.states[lo..hi];
    let mean = window.iter().map(|x| x.c).sum::<f64>() / window.len() as f64;
    Ok((metrics.amplitude, mean))
}

fn find_anomalies(points: &[BifurcationPoint]) -> Vec<String> {
    let mut anomalies = Vec::new();
    for w in points.windows(2) {
        if w[1].regime.rank() < w[0].regime.rank() {
            anomalies.push(format!(
                "regime reverses from {} at k_leak = {} back to {} at k_leak = {}",
                w[0].regime.as_str(),
                w[0].k_leak,
                w[1].regime.as_str(),
                w[1].k_leak
            ));
        }
    }
    anomalies
}

/// Bisect the stress level where the amplitude first drops below
/// `fraction * reference`, inside a bracket whose endpoints already
/// disagree.
fn refine_threshold(
    p: &ModelParameters,
    drive: &CircadianDrive,
    cfg: &IntegratorConfig,
    reference: f64,
    fraction: f64,
    mut lo: f64,
    mut hi: f64,
) -> Result<f64> {
    while hi - lo > THRESHOLD_RESOLUTION {
        let mid = 0.5 * (lo + hi);
        let (amplitude, _) = measure_point(p, drive, mid, cfg)?;
        if amplitude < fraction * reference {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Sweep constant stress levels, classify each steady state against the
/// zero-stress reference amplitude, and bisect the two regime thresholds.
///
/// The sweep runs under the full circadian drive; grid points are
/// simulated in parallel, the bisection refinements sequentially.
pub fn sweep(
    kleak_grid: &[f64],
    p: &ModelParameters,
    drive: &CircadianDrive,
    cfg: &IntegratorConfig,
) -> Result<SweepResult> {
    if kleak_grid.is_empty() {
        return Err(GbaError::InvalidParameter("empty k_leak grid".into()));
    }
    for w in kleak_grid.windows(2) {
        // partial_cmp so NaN grid entries are rejected, not silently passed.
        if w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater) {
            return Err(GbaError::InvalidParameter(
                "k_leak grid must be strictly ascending".into(),
            ));
        }
    }
    if kleak_grid[0] < 0.0 || !kleak_grid.iter().all(|k| k.is_finite()) {
        return Err(GbaError::InvalidParameter(
            "k_leak grid must be finite and nonnegative".into(),
        ));
    }
    if cfg.horizon < MEASURE_WINDOW.1 {
        return Err(GbaError::InvalidParameter(format!(
            "bifurcation sweep needs at least {} min of horizon (10 days), got {}",
            MEASURE_WINDOW.1, cfg.horizon
        )));
    }

    let (reference_amplitude, _) = measure_point(p, drive, 0.0, cfg)?;

    let measured: Vec<(f64, f64)> = kleak_grid
        .par_iter()
        .map(|&k| measure_point(p, drive, k, cfg))
        .collect::<Result<Vec<_>>>()?;
    let points: Vec<BifurcationPoint> = kleak_grid
        .iter()
        .zip(&measured)
        .map(|(&k_leak, &(amplitude, mean_cortisol))| BifurcationPoint {
            k_leak,
            amplitude,
            mean_cortisol,
            regime: classify(amplitude, reference_amplitude),
        })
        .collect();

    let first_dampened = points
        .iter()
        .position(|pt| pt.regime != Regime::HealthyRhythm);
    let first_disrupted = points.iter().position(|pt| pt.regime == Regime::Disrupted);

    let threshold_1 = match first_dampened {
        Some(0) => Some(points[0].k_leak),
        Some(i) => Some(refine_threshold(
            p,
            drive,
            cfg,
            reference_amplitude,
            HEALTHY_FRACTION,
            points[i - 1].k_leak,
            points[i].k_leak,
        )?),
        None => None,
    };
    let threshold_2 = match first_disrupted {
        Some(0) => Some(points[0].k_leak),
        Some(i) => Some(refine_threshold(
            p,
            drive,
            cfg,
            reference_amplitude,
            DISRUPTED_FRACTION,
            points[i - 1].k_leak,
            points[i].k_leak,
        )?),
        None => None,
    };

    let anomalies = find_anomalies(&points);
    Ok(SweepResult {
        points,
        reference_amplitude,
        threshold_1,
        threshold_2,
        anomalies,
    })
}

/// Critical-slowing-down probe: time for the cortisol trace to settle back
/// after a brief input kick, against an unkicked twin run.
///
/// A 30-minute kick of +0.1 on the input starts at t = 7200 (day 5); the
/// deviation tolerance is 5% of the local oscillation amplitude, so the
/// measurement stays meaningful as the amplitude shrinks toward the first
/// threshold. Returns the time from kick end to the last tolerance
/// exceedance; `None` when the deviation is still above tolerance at the
/// end of the horizon.
pub fn perturbation_recovery_time(
    p: &ModelParameters,
    drive: &CircadianDrive,
    k_leak: f64,
    cfg: &IntegratorConfig,
) -> Result<Option<f64>> {
    if !(k_leak.is_finite() && k_leak >= 0.0) {
        return Err(GbaError::InvalidParameter(format!(
            "k_leak must be finite and nonnegative, got {k_leak}"
        )));
    }
    if cfg.horizon < MEASURE_WINDOW.1 {
        return Err(GbaError::InvalidParameter(format!(
            "slowing probe needs at least {} min of horizon, got {}",
            MEASURE_WINDOW.1, cfg.horizon
        )));
    }
    let baseline = simulate_constant(p, drive, k_leak, cfg)?;
    let kicked = integrate(
        p,
        drive,
        &InputProfile::CustomPiecewise {
            segments: vec![
                (0.0, k_leak),
                (KICK_START, k_leak + KICK_SIZE),
                (KICK_START + KICK_DURATION, k_leak),
            ],
        },
        &HistoryInit::Constant(default_initial_state().as_array()),
        cfg,
    )?;
    let local = measure_rhythm(&baseline, "C", MEASURE_WINDOW)?;
    let tolerance = RECOVERY_FRACTION * local.amplitude;
    let kick_end = KICK_START + KICK_DURATION;

    let mut last_exceed: Option<f64> = None;
    for i in 0..baseline.len() {
        let dev = (kicked.states[i].c - baseline.states[i].c).abs();
        if dev > tolerance {
            last_exceed = Some(baseline.times[i]);
        }
    }
    Ok(match last_exceed {
        None => Some(0.0),
        Some(t) if t >= cfg.horizon => None,
        Some(t) => Some((t - kick_end).max(0.0)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sweep_cfg() -> IntegratorConfig {
        IntegratorConfig {
            horizon: 14_400.0,
            ..IntegratorConfig::default()
        }
    }

    #[test]
    fn classification_boundaries_are_half_open() {
        let reference = 2.0;
        assert_eq!(classify(1.0, reference), Regime::HealthyRhythm);
        assert_eq!(classify(1.0 - 1e-12, reference), Regime::Dampened);
        assert_eq!(classify(0.02, reference), Regime::Dampened);
        assert_eq!(classify(0.02 - 1e-12, reference), Regime::Disrupted);
        assert_eq!(classify(0.0, reference), Regime::Disrupted);
    }

    #[test]
    fn anomaly_detection_flags_reversals() {
        let mk = |k_leak: f64, regime: Regime| BifurcationPoint {
            k_leak,
            amplitude: 1.0,
            mean_cortisol: 12.0,
            regime,
        };
        let ordered = vec![
            mk(0.0, Regime::HealthyRhythm),
            mk(1.0, Regime::Dampened),
            mk(2.0, Regime::Disrupted),
        ];
        assert!(find_anomalies(&ordered).is_empty());
        let reentrant = vec![
            mk(0.0, Regime::HealthyRhythm),
            mk(1.0, Regime::Dampened),
            mk(2.0, Regime::HealthyRhythm),
        ];
        let anomalies = find_anomalies(&reentrant);
        assert_eq!(anomalies.len(), 1);
        assert!(anomalies[0].contains("reverses"));
    }

    #[test]
    fn grid_validation() {
        let p = ModelParameters::default();
        let drive = CircadianDrive::default();
        let cfg = sweep_cfg();
        assert!(sweep(&[], &p, &drive, &cfg).is_err());
        assert!(sweep(&[0.2, 0.1], &p, &drive, &cfg).is_err());
        assert!(sweep(&[-0.1, 0.5], &p, &drive, &cfg).is_err());
        let short = IntegratorConfig {
            horizon: 5000.0,
            ..IntegratorConfig::default()
        };
        assert!(sweep(&[0.0, 1.0], &p, &drive, &short).is_err());
    }

    #[test]
    fn endpoint_sweep_finds_both_thresholds() {
        let p = ModelParameters::default();
        let drive = CircadianDrive::default();
        let result = sweep(&[0.0, 3.0], &p, &drive, &sweep_cfg()).unwrap();
        assert_eq!(result.points[0].regime, Regime::HealthyRhythm);
        // The zero grid point and the reference run are the same
        // simulation, so the amplitudes agree exactly.
        assert_eq!(result.points[0].amplitude, result.reference_amplitude);
        assert_eq!(result.points[1].regime, Regime::Disrupted);
        assert!(
            result.points[1].mean_cortisol > result.points[0].mean_cortisol,
            "hypercortisolism raises the mean"
        );
        let t1 = result.threshold_1.expect("dampening threshold");
        let t2 = result.threshold_2.expect("disruption threshold");
        assert!(t1 <= t2, "thresholds must be ordered: {t1} vs {t2}");
        assert!(t1 > 0.0 && t2 < 3.0);
        assert!(result.anomalies.is_empty());
    }

    #[test]
    fn sweep_is_deterministic() {
        let p = ModelParameters::default();
        let drive = CircadianDrive::default();
        let a = sweep(&[0.0, 1.0], &p, &drive, &sweep_cfg()).unwrap();
        let b = sweep(&[0.0, 1.0], &p, &drive, &sweep_cfg()).unwrap();
        assert_eq!(a.points[1].amplitude.to_bits(), b.points[1].amplitude.to_bits());
        assert_eq!(a.threshold_1.map(f64::to_bits), b.threshold_1.map(f64::to_bits));
    }

    #[test]
    fn unkicked_twin_recovers_instantly() {
        // With a zero-size kick the twin runs coincide; the probe must
        // report an immediate recovery rather than noise-chasing.
        let p = ModelParameters::default();
        let drive = CircadianDrive::default();
        let baseline = simulate_constant(&p, &drive, 0.1, &sweep_cfg()).unwrap();
        let twin = simulate_constant(&p, &drive, 0.1, &sweep_cfg()).unwrap();
        for i in 0..baseline.len() {
            assert_eq!(baseline.states[i].c.to_bits(), twin.states[i].c.to_bits());
        }
    }

    #[test]
    fn kick_produces_finite_recovery_at_low_stress() {
        let p = ModelParameters::default();
        let drive = CircadianDrive::default();
        let rec = perturbation_recovery_time(&p, &drive, 0.1, &sweep_cfg())
            .unwrap()
            .expect("low-stress run recovers inside the horizon");
        assert!(rec > 0.0, "a finite kick must exceed tolerance briefly");
        assert!(rec < 2880.0, "recovery should take hours, not days: {rec}");
    }
}
