//! Water-filling Shannon capacity of the linearized stress-to-cortisol
//! channel, plus the derived curves: spectral efficiency, cumulative
//! capacity, capacity versus stress level, and noise/power sweeps.
//!
//! Quadrature convention: integrals over the positive frequency grid are
//! trapezoidal with point weights `w_i = dOmega_i / (2 pi)`, so the band
//! measure `W` in the flat-channel closed form is exactly
//! `omega_max - omega_min`. Capacities are reported in bits per minute
//! (model time unit).

use crate::equilibrium::analyze_operating_point;
use crate::error::{GbaError, Result};
use crate::freq::{bode, BodeData};
use crate::model::{CircadianDrive, ModelParameters};
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::TAU;

/// Default white-noise PSD, squared-cortisol units per rad/min.
pub const DEFAULT_NOISE_LEVEL: f64 = 1e-4;
/// Default average input power budget, squared-leak-rate units.
pub const DEFAULT_POWER_BUDGET: f64 = 1e-2;

/// White output-noise model: a single PSD level, constant over the grid.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct NoiseModel {
    pub level: f64,
}

impl NoiseModel {
    pub fn white(level: f64) -> Result<Self> {
        if !(level.is_finite() && level > 0.0) {
            return Err(GbaError::InvalidParameter(format!(
                "noise PSD must be finite and positive, got {level}"
            )));
        }
        Ok(NoiseModel { level })
    }
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel {
            level: DEFAULT_NOISE_LEVEL,
        }
    }
}

/// Water-filling solution on a frequency grid.
#[derive(Debug, Clone, Serialize)]
pub struct CapacityResult {
    /// Angular frequencies, rad/min.
    pub grid: Vec<f64>,
    /// Channel power gains |H|^2 per point.
    pub gains: Vec<f64>,
    /// Optimal input PSD per point.
    pub s_u_star: Vec<f64>,
    /// Spectral efficiency log2(1 + |H|^2 S_u / S_n) per point.
    pub eta: Vec<f64>,
    /// Running capacity integral up to each grid point, bits/min.
    pub cumulative: Vec<f64>,
    /// Total capacity, bits/min.
    pub capacity_total: f64,
    /// Water level mu.
    pub water_level: f64,
    /// Power actually allocated; equals the budget whenever a bin is active.
    pub power_used: f64,
    pub active_bins: usize,
    /// Present when the budget was too small to activate any bin.
    pub note: Option<String>,
}

/// Trapezoidal point weights `dOmega_i / (2 pi)` for the grid.
fn quad_weights(omegas: &[f64]) -> Vec<f64> {
    let n = omegas.len();
    let mut w = vec![0.0; n];
    for i in 0..n {
        let left = if i == 0 { omegas[0] } else { omegas[i - 1] };
        let right = if i == n - 1 { omegas[n - 1] } else { omegas[i + 1] };
        w[i] = (right - left) / 2.0 / TAU;
    }
    w
}

fn validate_channel(omegas: &[f64], gains: &[f64]) -> Result<()> {
    if omegas.len() < 2 || omegas.len() != gains.len() {
        return Err(GbaError::InvalidParameter(format!(
            "channel grid needs at least 2 matching points, got {} omegas and {} gains",
            omegas.len(),
            gains.len()
        )));
    }
    for w in omegas.windows(2) {
        // partial_cmp so NaN grid points are rejected, not silently passed.
        if w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater) {
            return Err(GbaError::InvalidParameter(
                "frequency grid must be strictly increasing".into(),
            ));
        }
    }
    for (&omega, &g) in omegas.iter().zip(gains) {
        if !omega.is_finite() || !g.is_finite() || g <= 0.0 {
            return Err(GbaError::InvalidParameter(format!(
                "channel gain must be finite and positive, got {g} at omega = {omega}"
            )));
        }
    }
    Ok(())
}

/// Water-fill a channel given directly as power gains |H|^2 on a grid.
///
/// This is the computational core; [`water_fill`] adapts a Bode sweep onto
/// it. The water level is bisected until the allocated power matches the
/// budget, then polished by solving the power constraint exactly on the
/// active set, so the constraint is tight to machine precision whenever any
/// bin activates.
pub fn water_fill_on_grid(
    omegas: &[f64],
    gains: &[f64],
    noise: &NoiseModel,
    p_av: f64,
) -> Result<CapacityResult> {
    validate_channel(omegas, gains)?;
    NoiseModel::white(noise.level)?;
    if !(p_av.is_finite() && p_av > 0.0) {
        return Err(GbaError::InvalidParameter(format!(
            "power budget must be finite and positive, got {p_av}"
        )));
    }
    let n = omegas.len();
    let weights = quad_weights(omegas);
    let floor: Vec<f64> = gains.iter().map(|g| noise.level / g).collect();
    let total_weight: f64 = weights.iter().sum();

    let power_at = |mu: f64| -> f64 {
        let mut p = 0.0;
        for i in 0..n {
            if mu > floor[i] {
                p += weights[i] * (mu - floor[i]);
            }
        }
        p
    };

    let mut lo = floor.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut hi = floor.iter().cloned().fold(0.0f64, f64::max) + p_av / total_weight;
    while power_at(hi) < p_av {
        hi = hi * 2.0 + 1.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if power_at(mid) < p_av {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi.abs().max(1.0) {
            break;
        }
    }
    let mut mu = 0.5 * (lo + hi);

    // The power curve is piecewise linear in mu; solving on the bracketed
    // active set makes the constraint exact instead of bisection-limited.
    let active: Vec<usize> = (0..n).filter(|&i| mu > floor[i]).collect();
    if !active.is_empty() {
        let wsum: f64 = active.iter().map(|&i| weights[i]).sum();
        let fsum: f64 = active.iter().map(|&i| weights[i] * floor[i]).sum();
        let candidate = (p_av + fsum) / wsum;
        let same_set = (0..n).all(|i| (candidate > floor[i]) == active.contains(&i));
        if same_set {
            mu = candidate;
        }
    }

    let mut s = vec![0.0; n];
    let mut eta = vec![0.0; n];
    let mut power_used = 0.0;
    let mut active_bins = 0;
    for i in 0..n {
        if mu > floor[i] {
            s[i] = mu - floor[i];
            active_bins += 1;
        }
        power_used += weights[i] * s[i];
        eta[i] = (1.0 + gains[i] * s[i] / noise.level).log2();
    }

    // A budget below bisection resolution cannot be met by any positive
    // allocation; by convention it yields zero capacity with a warning
    // rather than a wildly overshot constraint.
    if active_bins > 0 && ((power_used - p_av) / p_av).abs() > 1e-9 {
        active_bins = 0;
        s.iter_mut().for_each(|v| *v = 0.0);
        eta.iter_mut().for_each(|v| *v = 0.0);
    }

    if active_bins == 0 {
        return Ok(CapacityResult {
            grid: omegas.to_vec(),
            gains: gains.to_vec(),
            s_u_star: s,
            eta,
            cumulative: vec![0.0; n],
            capacity_total: 0.0,
            water_level: mu,
            power_used: 0.0,
            active_bins: 0,
            note: Some(
                "power budget too small to activate any frequency bin at bisection resolution; \
                 capacity is zero"
                    .to_string(),
            ),
        });
    }

    // A positive allocation at the top of the grid is only an error when the
    // gain is still falling there: that means a low-pass roll-off was cut
    // off and the integral is truncated. A flat (or rising) tail is a
    // deliberate band edge, as in bandlimited flat channels.
    if s[n - 1] > 0.0 && gains[n - 1] < gains[n - 2] * (1.0 - 1e-12) {
        return Err(GbaError::ActiveBandTruncated);
    }

    let mut cumulative = vec![0.0; n];
    for i in 1..n {
        cumulative[i] = cumulative[i - 1]
            + (omegas[i] - omegas[i - 1]) * (eta[i] + eta[i - 1]) / 2.0 / TAU;
    }
    let capacity_total: f64 = (0..n).map(|i| weights[i] * eta[i]).sum();

    Ok(CapacityResult {
        grid: omegas.to_vec(),
        gains: gains.to_vec(),
        s_u_star: s,
        eta,
        cumulative,
        capacity_total,
        water_level: mu,
        power_used,
        active_bins,
        note: None,
    })
}

/// Water-fill the channel described by a Bode sweep. Only the magnitude
/// enters: the capacity is phase-independent.
pub fn water_fill(sweep: &BodeData, noise: &NoiseModel, p_av: f64) -> Result<CapacityResult> {
    let omegas: Vec<f64> = sweep.points.iter().map(|p| p.omega).collect();
    let gains: Vec<f64> = sweep
        .points
        .iter()
        .map(|p| p.h_re * p.h_re + p.h_im * p.h_im)
        .collect();
    water_fill_on_grid(&omegas, &gains, noise, p_av)
}

/// One stress level on the capacity-vs-stress curve. Unstable or otherwise
/// failing operating points are recorded as gaps instead of aborting the
/// curve.
#[derive(Debug, Clone, Serialize)]
pub struct StressCapacityPoint {
    pub k_leak: f64,
    pub capacity: Option<f64>,
    pub error: Option<String>,
}

/// Capacity as a function of constant stress level: equilibrium,
/// linearization, Bode sweep, and water-filling per point, in parallel.
pub fn capacity_vs_stress(
    kleak_values: &[f64],
    p: &ModelParameters,
    drive: &CircadianDrive,
    noise: &NoiseModel,
    p_av: f64,
    band: (f64, f64),
    grid_points: usize,
) -> Result<Vec<StressCapacityPoint>> {
    if kleak_values.is_empty() {
        return Err(GbaError::InvalidParameter(
            "capacity_vs_stress needs at least one k_leak value".into(),
        ));
    }
    Ok(kleak_values
        .par_iter()
        .map(|&k_leak| {
            let outcome = analyze_operating_point(p, drive, k_leak)
                .and_then(|sys| {
                    if !sys.stable {
                        return Err(GbaError::UnstableOperatingPoint { u_star: k_leak });
                    }
                    bode(&sys, band.0, band.1, grid_points)
                })
                .and_then(|sweep| water_fill(&sweep, noise, p_av));
            match outcome {
                Ok(result) => StressCapacityPoint {
                    k_leak,
                    capacity: Some(result.capacity_total),
                    error: None,
                },
                Err(e) => StressCapacityPoint {
                    k_leak,
                    capacity: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect())
}

/// Noise and power sweeps around a base operating point, plus the base
/// water-filling solution whose eta and cumulative curves describe the
/// operating point itself.
#[derive(Debug, Clone, Serialize)]
pub struct CapacitySweeps {
    pub base: CapacityResult,
    /// (noise level, capacity) at the base power budget.
    pub noise_curve: Vec<(f64, f64)>,
    /// (power budget, capacity) at the base noise level.
    pub power_curve: Vec<(f64, f64)>,
}

fn validate_range(values: &[f64], what: &str) -> Result<()> {
    if values.is_empty() {
        return Err(GbaError::InvalidParameter(format!("{what} range is empty")));
    }
    for w in values.windows(2) {
        // partial_cmp so NaN entries are rejected, not silently passed.
        if w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater) {
            return Err(GbaError::InvalidParameter(format!(
                "{what} range must be strictly ascending"
            )));
        }
    }
    if values[0] <= 0.0 || !values.iter().all(|v| v.is_finite()) {
        return Err(GbaError::InvalidParameter(format!(
            "{what} range must be positive and finite"
        )));
    }
    Ok(())
}

/// Sweep capacity over noise levels (fixed power) and power budgets (fixed
/// noise) for the channel in `sweep`.
pub fn capacity_sweeps(
    sweep: &BodeData,
    noise: &NoiseModel,
    p_av: f64,
    noise_levels: &[f64],
    power_levels: &[f64],
) -> Result<CapacitySweeps> {
    validate_range(noise_levels, "noise")?;
    validate_range(power_levels, "power")?;
    let base = water_fill(sweep, noise, p_av)?;
    let noise_curve = noise_levels
        .par_iter()
        .map(|&level| {
            water_fill(sweep, &NoiseModel::white(level)?, p_av)
                .map(|r| (level, r.capacity_total))
        })
        .collect::<Result<Vec<_>>>()?;
    let power_curve = power_levels
        .par_iter()
        .map(|&budget| water_fill(sweep, noise, budget).map(|r| (budget, r.capacity_total)))
        .collect::<Result<Vec<_>>>()?;
    Ok(CapacitySweeps {
        base,
        noise_curve,
        power_curve,
    })
}

/// `n` log-spaced values over `[lo, hi]` inclusive.
pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && n >= 2);
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// `n` linearly spaced values over `[lo, hi]` inclusive. The power sweep
/// uses linear spacing so concavity can be read off second differences.
pub fn linear_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(hi > lo && n >= 2);
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Default sweep ranges: three decades around the defaults, log-spaced for
/// noise and linear for power.
pub fn default_noise_levels() -> Vec<f64> {
    log_spaced(
        DEFAULT_NOISE_LEVEL / 10f64.powf(1.5),
        DEFAULT_NOISE_LEVEL * 10f64.powf(1.5),
        25,
    )
}

pub fn default_power_levels() -> Vec<f64> {
    linear_spaced(
        DEFAULT_POWER_BUDGET / 10f64.powf(1.5),
        DEFAULT_POWER_BUDGET * 10f64.powf(1.5),
        25,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn flat_grid(n: usize, omega_min: f64, omega_max: f64) -> Vec<f64> {
        linear_spaced(omega_min, omega_max, n)
    }

    #[test]
    fn flat_channel_matches_closed_form() {
        let (g, noise_level, p_av) = (2.5, 0.3, 0.8);
        let grid = flat_grid(64, 0.2, 1.7);
        let w = 1.7 - 0.2;
        let gains = vec![g; grid.len()];
        let noise = NoiseModel::white(noise_level).unwrap();
        let r = water_fill_on_grid(&grid, &gains, &noise, p_av).unwrap();
        let mu_exact = noise_level / g + TAU * p_av / w;
        let c_exact = (w / TAU) * (1.0 + TAU * p_av * g / (w * noise_level)).log2();
        assert!(
            ((r.water_level - mu_exact) / mu_exact).abs() <= 1e-9,
            "mu {} vs {mu_exact}",
            r.water_level
        );
        assert!(
            ((r.capacity_total - c_exact) / c_exact).abs() <= 1e-9,
            "C {} vs {c_exact}",
            r.capacity_total
        );
        assert!(((r.power_used - p_av) / p_av).abs() <= 1e-9);
        assert_eq!(r.active_bins, grid.len());
    }

    #[test]
    fn two_level_channel_matches_brute_force() {
        // Equal band measures: four points, two per gain level, so the
        // trapezoid measure of each level is 1.5 rad/min.
        let grid = vec![0.0, 1.0, 2.0, 3.0];
        let gains = vec![1.0, 1.0, 0.01, 0.01];
        let noise = NoiseModel::white(1.0).unwrap();
        let p_av = 5.0;
        let r = water_fill_on_grid(&grid, &gains, &noise, p_av).unwrap();

        // Brute force: allocate total power p1 to the high-gain band and
        // p_av - p1 to the low-gain band (uniform PSD within a band is
        // optimal for a constant gain); ternary-search the concave
        // objective.
        let w_band = 1.5 / TAU;
        let cap = |p1: f64| {
            let s1 = p1 / w_band;
            let s2 = (p_av - p1) / w_band;
            w_band * (1.0 + 1.0 * s1 / 1.0).log2() + w_band * (1.0 + 0.01 * s2 / 1.0).log2()
        };
        let (mut lo, mut hi) = (0.0, p_av);
        for _ in 0..300 {
            let m1 = lo + (hi - lo) / 3.0;
            let m2 = hi - (hi - lo) / 3.0;
            if cap(m1) < cap(m2) {
                lo = m1;
            } else {
                hi = m2;
            }
        }
        let c_brute = cap(0.5 * (lo + hi));
        assert!(
            (r.capacity_total - c_brute).abs() <= 1e-6,
            "{} vs {c_brute}",
            r.capacity_total
        );
    }

    #[test]
    fn inactive_water_level_gives_zero_capacity() {
        let grid = flat_grid(16, 0.1, 1.0);
        let gains = vec![1.0; grid.len()];
        let noise = NoiseModel::white(1.0).unwrap();
        let r = water_fill_on_grid(&grid, &gains, &noise, 1e-300).unwrap();
        assert_eq!(r.capacity_total, 0.0);
        assert!(r.s_u_star.iter().all(|&s| s == 0.0));
        assert!(r.note.is_some());
    }

    #[test]
    fn truncated_rolloff_is_an_error_but_flat_tail_is_not() {
        let grid = flat_grid(8, 0.1, 0.8);
        // Still falling at the edge with everything active: truncated.
        let falling: Vec<f64> = (0..8).map(|i| 1.0 / (1.0 + i as f64)).collect();
        let noise = NoiseModel::white(1e-3).unwrap();
        let err = water_fill_on_grid(&grid, &falling, &noise, 10.0).unwrap_err();
        assert!(matches!(err, GbaError::ActiveBandTruncated));

        // Same channel with a flat tail: a deliberate band edge.
        let mut flat_tail = falling;
        flat_tail[7] = flat_tail[6];
        let r = water_fill_on_grid(&grid, &flat_tail, &noise, 10.0).unwrap();
        assert!(r.capacity_total > 0.0);
    }

    #[test]
    fn power_constraint_is_tight() {
        let grid = flat_grid(40, 1e-3, 0.9);
        let gains: Vec<f64> = (0..40).map(|i| 3.0 / (1.0 + 0.05 * i as f64)).collect();
        // Flatten the tail so the band-edge guard stays quiet even at
        // generous budgets.
        let mut gains = gains;
        gains[39] = gains[38];
        let noise = NoiseModel::white(0.05).unwrap();
        for &p_av in &[1e-4, 1e-2, 1.0, 50.0] {
            let r = water_fill_on_grid(&grid, &gains, &noise, p_av).unwrap();
            assert!(
                ((r.power_used - p_av) / p_av).abs() <= 1e-9,
                "p_av {p_av}: used {}",
                r.power_used
            );
        }
    }

    #[test]
    fn never_beaten_by_random_feasible_allocations() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for case in 0..50 {
            let n = rng.gen_range(3..=8usize);
            let mut grid = vec![0.0f64; n];
            let mut acc = 0.1;
            for g in grid.iter_mut() {
                *g = acc;
                acc += rng.gen_range(0.05..0.5);
            }
            let mut gains: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..5.0)).collect();
            // Flat tail by construction so the band-edge guard never fires.
            gains[n - 1] = gains[n - 2];
            let noise = NoiseModel::white(rng.gen_range(0.01..1.0)).unwrap();
            let p_av = rng.gen_range(0.1..10.0);
            let r = water_fill_on_grid(&grid, &gains, &noise, p_av).unwrap();

            let weights = quad_weights(&grid);
            for _ in 0..1000 {
                // Random nonnegative allocation scaled onto the budget.
                let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
                let used: f64 = raw.iter().zip(&weights).map(|(s, w)| s * w).sum();
                let scale = p_av / used;
                let cap: f64 = (0..n)
                    .map(|i| weights[i] * (1.0 + gains[i] * raw[i] * scale / noise.level).log2())
                    .sum();
                assert!(
                    cap <= r.capacity_total + 1e-9,
                    "case {case}: random allocation {cap} beats water-filling {}",
                    r.capacity_total
                );
            }
        }
    }

    #[test]
    fn eta_zero_exactly_where_inactive() {
        let grid = flat_grid(20, 0.1, 2.0);
        let mut gains: Vec<f64> = (0..20).map(|i| 5.0 / (1.0 + i as f64)).collect();
        gains[19] = gains[18];
        let noise = NoiseModel::white(0.5).unwrap();
        let r = water_fill_on_grid(&grid, &gains, &noise, 0.05).unwrap();
        assert!(r.active_bins < 20, "budget should not light every bin");
        for i in 0..20 {
            if r.s_u_star[i] == 0.0 {
                assert_eq!(r.eta[i], 0.0);
            } else {
                assert!(r.eta[i] > 0.0);
            }
        }
    }

    #[test]
    fn cumulative_tops_out_at_total() {
        let grid = flat_grid(33, 0.01, 1.2);
        let mut gains: Vec<f64> = (0..33).map(|i| 2.0 / (1.0 + 0.2 * i as f64)).collect();
        gains[32] = gains[31];
        let noise = NoiseModel::default();
        let r = water_fill_on_grid(&grid, &gains, &noise, DEFAULT_POWER_BUDGET).unwrap();
        let top = *r.cumulative.last().unwrap();
        assert!(
            (top - r.capacity_total).abs() <= 1e-9 * r.capacity_total.max(1.0),
            "cumulative {top} vs total {}",
            r.capacity_total
        );
        for w in r.cumulative.windows(2) {
            assert!(w[1] >= w[0]);
        }
    }

    #[test]
    fn noise_monotone_and_power_concave_on_synthetic_channel() {
        let grid = flat_grid(50, 1e-3, 1.0);
        let mut gains: Vec<f64> = (0..50).map(|i| 4.0 / (1.0 + 0.3 * i as f64)).collect();
        gains[49] = gains[48];
        let omegas = grid;
        let sweep_points: Vec<crate::freq::BodePoint> = omegas
            .iter()
            .zip(&gains)
            .map(|(&omega, &g)| crate::freq::BodePoint {
                omega,
                h_re: g.sqrt(),
                h_im: 0.0,
                magnitude_db: 10.0 * g.log10(),
                phase_deg: 0.0,
            })
            .collect();
        let sweep = BodeData {
            points: sweep_points,
            dc_gain: gains[0].sqrt(),
            omega_3db: None,
            omega_3db_note: None,
        };
        let noise = NoiseModel::default();
        let sweeps = capacity_sweeps(
            &sweep,
            &noise,
            DEFAULT_POWER_BUDGET,
            &default_noise_levels(),
            &default_power_levels(),
        )
        .unwrap();
        for w in sweeps.noise_curve.windows(2) {
            assert!(w[1].1 < w[0].1, "capacity must fall as noise rises");
        }
        let caps: Vec<f64> = sweeps.power_curve.iter().map(|&(_, c)| c).collect();
        for w in caps.windows(2) {
            assert!(w[1] > w[0], "capacity must rise with power budget");
        }
        for i in 1..caps.len() - 1 {
            let second = caps[i + 1] - 2.0 * caps[i] + caps[i - 1];
            assert!(second <= 1e-9, "second difference {second} at {i}");
        }
    }

    #[test]
    fn rejects_bad_channels() {
        let noise = NoiseModel::default();
        assert!(water_fill_on_grid(&[0.1], &[1.0], &noise, 1.0).is_err());
        assert!(water_fill_on_grid(&[0.2, 0.1], &[1.0, 1.0], &noise, 1.0).is_err());
        assert!(water_fill_on_grid(&[0.1, 0.2], &[1.0, -1.0], &noise, 1.0).is_err());
        assert!(water_fill_on_grid(&[0.1, 0.2], &[1.0, 1.0], &noise, 0.0).is_err());
        assert!(NoiseModel::white(0.0).is_err());
    }
}
