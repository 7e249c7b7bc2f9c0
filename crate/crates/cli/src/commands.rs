//! One driver per subcommand: resolve inputs, run the core pipeline, emit
//! files. Every run command echoes the fully resolved configuration into the
//! output directory first, so a result directory is self-describing.

use crate::config::{self, Resolved, RunConfig};
use crate::output::{self, fmt};
use crate::plot::{self, PlotSpec, Series};
use crate::Failure;
use gutbrain_core::capacity::{
    self, default_noise_levels, default_power_levels, NoiseModel,
};
use gutbrain_core::equilibrium::analyze_operating_point;
use gutbrain_core::{bifurcation, freq, scenario, GbaError, LinearizedSystem};
use serde::Serialize;
use std::path::PathBuf;

/// Everything a run command needs: validated config plus the target
/// directory with the resolved-config echo already in place.
pub struct Workspace {
    pub cfg: RunConfig,
    pub resolved: Resolved,
    pub outdir: PathBuf,
    pub plots: bool,
}

/// Prepare the output directory and echo the resolved config into it.
pub fn prepare(cfg: RunConfig, outdir_flag: Option<PathBuf>) -> Result<Workspace, Failure> {
    let resolved = config::resolve(&cfg)?;
    let outdir = config::resolve_outdir(outdir_flag, &cfg);
    std::fs::create_dir_all(&outdir).map_err(|e| {
        Failure::usage(format!(
            "cannot create output directory {}: {e}",
            outdir.display()
        ))
    })?;
    let echo = config::to_toml(&cfg)?;
    output::atomic_write(&outdir.join("resolved-config.toml"), echo.as_bytes())?;
    let plots = cfg.output.plots;
    Ok(Workspace {
        cfg,
        resolved,
        outdir,
        plots,
    })
}

fn domain(stage: &str) -> impl Fn(GbaError) -> Failure + '_ {
    move |e| Failure::domain(format!("{stage}: {e}"))
}

fn maybe_plot(ws: &Workspace, name: &str, spec: &PlotSpec) -> Result<(), Failure> {
    if !ws.plots {
        return Ok(());
    }
    let svg = plot::render(spec)?;
    output::atomic_write(&ws.outdir.join(name), svg.as_bytes())
}

#[derive(Serialize)]
struct ScenarioSummary<'a> {
    scenario: &'a str,
    samples: usize,
    cortisol_period: Option<f64>,
    cortisol_amplitude: f64,
    recovery_time: Option<f64>,
    final_mean_cortisol: f64,
}

pub fn simulate(ws: &Workspace, scenario_flag: Option<&str>) -> Result<(), Failure> {
    let scen = ws.cfg.scenario.resolve(scenario_flag)?;
    let name = scen.name().to_string();
    let report = scenario::run_scenario(
        &scen,
        &ws.resolved.parameters,
        &ws.resolved.drive,
        &ws.resolved.integrator,
    )
    .map_err(domain("simulate"))?;

    let csv_path = ws.outdir.join(format!("{name}_timeseries.csv"));
    output::write_timeseries_csv(&csv_path, &report.trajectory)?;
    let summary = ScenarioSummary {
        scenario: &name,
        samples: report.trajectory.len(),
        cortisol_period: report.cortisol_period,
        cortisol_amplitude: report.cortisol_amplitude,
        recovery_time: report.recovery_time,
        final_mean_cortisol: report.final_mean_cortisol,
    };
    output::write_json(&ws.outdir.join(format!("{name}_report.json")), &summary)?;

    let ts = &report.trajectory;
    let take = |channel: usize| -> Vec<(f64, f64)> {
        ts.times
            .iter()
            .zip(&ts.states)
            .map(|(&t, s)| (t, s.as_array()[channel]))
            .collect()
    };
    maybe_plot(
        ws,
        &format!("{name}_timeseries.svg"),
        &PlotSpec {
            title: format!("{name}: cortisol and ACTH"),
            x_label: "t (min)".into(),
            y_label: "concentration".into(),
            x_log: false,
            series: vec![
                Series {
                    label: "C (cortisol)".into(),
                    points: take(4),
                },
                Series {
                    label: "A (ACTH)".into(),
                    points: take(3),
                },
            ],
            vlines: Vec::new(),
        },
    )?;

    println!(
        "simulate {name}: {} samples, amplitude {}, mean {}",
        ts.len(),
        fmt(report.cortisol_amplitude),
        fmt(report.final_mean_cortisol)
    );
    if let Some(r) = report.recovery_time {
        println!("simulate {name}: rhythm recovered {} min after the pulse", fmt(r));
    }
    Ok(())
}

#[derive(Serialize)]
struct ThresholdSummary {
    reference_amplitude: f64,
    threshold_1: Option<f64>,
    threshold_2: Option<f64>,
    anomalies: Vec<String>,
}

pub fn bifurcate(ws: &Workspace, grid_flag: Option<Vec<f64>>) -> Result<(), Failure> {
    let grid = match grid_flag {
        Some(g) => g,
        None => ws.cfg.analysis.sweep_grid()?,
    };
    let sweep = bifurcation::sweep(
        &grid,
        &ws.resolved.parameters,
        &ws.resolved.drive,
        &ws.resolved.integrator,
    )
    .map_err(domain("bifurcate"))?;

    output::write_bifurcation_csv(&ws.outdir.join("bifurcation.csv"), &sweep)?;
    output::write_json(
        &ws.outdir.join("thresholds.json"),
        &ThresholdSummary {
            reference_amplitude: sweep.reference_amplitude,
            threshold_1: sweep.threshold_1,
            threshold_2: sweep.threshold_2,
            anomalies: sweep.anomalies.clone(),
        },
    )?;

    let amp_points: Vec<(f64, f64)> = sweep
        .points
        .iter()
        .map(|p| (p.k_leak, p.amplitude))
        .collect();
    let mut vlines = Vec::new();
    if let Some(t1) = sweep.threshold_1 {
        vlines.push((t1, "threshold 1".to_string()));
    }
    if let Some(t2) = sweep.threshold_2 {
        vlines.push((t2, "threshold 2".to_string()));
    }
    maybe_plot(
        ws,
        "bifurcation.svg",
        &PlotSpec {
            title: "cortisol rhythm amplitude vs constant stress".into(),
            x_label: "k_leak".into(),
            y_label: "amplitude".into(),
            x_log: false,
            series: vec![Series {
                label: String::new(),
                points: amp_points,
            }],
            vlines,
        },
    )?;

    match (sweep.threshold_1, sweep.threshold_2) {
        (Some(t1), Some(t2)) => {
            println!("bifurcate: thresholds at {} and {}", fmt(t1), fmt(t2));
        }
        _ => println!("bifurcate: thresholds not bracketed by the grid"),
    }
    for a in &sweep.anomalies {
        println!("bifurcate: anomaly: {a}");
    }
    Ok(())
}

fn operating_point(ws: &Workspace, kleak: f64, stage: &str) -> Result<LinearizedSystem, Failure> {
    analyze_operating_point(&ws.resolved.parameters, &ws.resolved.drive, kleak)
        .map_err(domain(stage))
}

pub fn linearize(ws: &Workspace, kleak_flag: Option<f64>) -> Result<(), Failure> {
    let kleak = kleak_flag.unwrap_or(ws.cfg.analysis.kleak_healthy);
    let sys = operating_point(ws, kleak, "linearize")?;
    output::write_json(&ws.outdir.join("linearized.json"), &sys)?;
    println!(
        "linearize: k_leak {} -> equilibrium C {}, {}",
        fmt(kleak),
        fmt(sys.x_star.c),
        if sys.stable { "stable" } else { "UNSTABLE" }
    );
    Ok(())
}

pub fn bode(
    ws: &Workspace,
    kleak_flag: Option<f64>,
    points_flag: Option<usize>,
) -> Result<(), Failure> {
    let kleak = kleak_flag.unwrap_or(ws.cfg.analysis.kleak_healthy);
    let a = &ws.cfg.analysis;
    let n_points = points_flag.unwrap_or(a.grid_points);
    let sys = operating_point(ws, kleak, "bode")?;
    let sweep = freq::bode(&sys, a.omega_min, a.omega_max, n_points).map_err(domain("bode"))?;

    output::write_bode_csv(&ws.outdir.join("bode.csv"), &sweep)?;
    output::write_json(&ws.outdir.join("bode.json"), &sweep)?;

    let mag: Vec<(f64, f64)> = sweep.points.iter().map(|p| (p.omega, p.magnitude_db)).collect();
    let phase: Vec<(f64, f64)> = sweep.points.iter().map(|p| (p.omega, p.phase_deg)).collect();
    let vlines = match sweep.omega_3db {
        Some(w) => vec![(w, "omega_3dB".to_string())],
        None => Vec::new(),
    };
    maybe_plot(
        ws,
        "bode.svg",
        &PlotSpec {
            title: format!("|H| at k_leak = {kleak}"),
            x_label: "omega (rad/min)".into(),
            y_label: "magnitude (dB)".into(),
            x_log: true,
            series: vec![Series {
                label: String::new(),
                points: mag,
            }],
            vlines: vlines.clone(),
        },
    )?;
    maybe_plot(
        ws,
        "bode_phase.svg",
        &PlotSpec {
            title: format!("arg H at k_leak = {kleak}"),
            x_label: "omega (rad/min)".into(),
            y_label: "phase (deg)".into(),
            x_log: true,
            series: vec![Series {
                label: String::new(),
                points: phase,
            }],
            vlines,
        },
    )?;

    print!("bode: |H(0)| = {}", fmt(sweep.dc_gain));
    match sweep.omega_3db {
        Some(w) => println!(", omega_3dB = {} rad/min", fmt(w)),
        None => println!(
            ", no -3 dB crossing in band{}",
            sweep
                .omega_3db_note
                .as_deref()
                .map(|n| format!(" ({n})"))
                .unwrap_or_default()
        ),
    }
    Ok(())
}

pub fn capacity(ws: &Workspace, kleak_flag: Option<Vec<f64>>) -> Result<(), Failure> {
    let a = &ws.cfg.analysis;
    let kleaks = kleak_flag.unwrap_or_else(|| a.capacity_grid.clone());
    if kleaks.is_empty() {
        return Err(Failure::usage("capacity needs at least one k_leak value"));
    }
    let noise = NoiseModel::white(a.noise_level).map_err(|e| Failure::usage(e.to_string()))?;
    let points = capacity::capacity_vs_stress(
        &kleaks,
        &ws.resolved.parameters,
        &ws.resolved.drive,
        &noise,
        a.power_budget,
        (a.omega_min, a.omega_max),
        a.grid_points,
    )
    .map_err(domain("capacity"))?;

    let mut csv = String::from("kleak,capacity,error\n");
    for p in &points {
        csv.push_str(&fmt(p.k_leak));
        csv.push(',');
        if let Some(c) = p.capacity {
            csv.push_str(&fmt(c));
        }
        csv.push(',');
        if let Some(e) = &p.error {
            csv.push_str(&csv_quote(e));
        }
        csv.push('\n');
    }
    output::atomic_write(&ws.outdir.join("capacity_vs_stress.csv"), csv.as_bytes())?;
    output::write_json(&ws.outdir.join("capacity_vs_stress.json"), &points)?;

    let curve: Vec<(f64, f64)> = points
        .iter()
        .filter_map(|p| p.capacity.map(|c| (p.k_leak, c)))
        .collect();
    maybe_plot(
        ws,
        "capacity_vs_stress.svg",
        &PlotSpec {
            title: "channel capacity vs constant stress".into(),
            x_label: "k_leak".into(),
            y_label: "capacity (bits/min)".into(),
            x_log: false,
            series: vec![Series {
                label: String::new(),
                points: curve,
            }],
            vlines: Vec::new(),
        },
    )?;

    let failed = points.iter().filter(|p| p.capacity.is_none()).count();
    println!(
        "capacity: {} operating points, {} failed",
        points.len(),
        failed
    );
    for p in points.iter().filter(|p| p.error.is_some()) {
        println!(
            "capacity: k_leak {}: {}",
            fmt(p.k_leak),
            p.error.as_deref().unwrap_or("")
        );
    }
    Ok(())
}

pub fn capacity_sweep(ws: &Workspace, kleak_flag: Option<f64>) -> Result<(), Failure> {
    let a = &ws.cfg.analysis;
    let kleak = kleak_flag.unwrap_or(a.kleak_healthy);
    let noise = NoiseModel::white(a.noise_level).map_err(|e| Failure::usage(e.to_string()))?;
    let sys = operating_point(ws, kleak, "capacity-sweep")?;
    let sweep =
        freq::bode(&sys, a.omega_min, a.omega_max, a.grid_points).map_err(domain("capacity-sweep"))?;
    let noise_levels = if a.noise_levels.is_empty() {
        default_noise_levels()
    } else {
        a.noise_levels.clone()
    };
    let power_levels = if a.power_levels.is_empty() {
        default_power_levels()
    } else {
        a.power_levels.clone()
    };
    let sweeps = capacity::capacity_sweeps(
        &sweep,
        &noise,
        a.power_budget,
        &noise_levels,
        &power_levels,
    )
    .map_err(domain("capacity-sweep"))?;

    let base = &sweeps.base;
    let mut eta_csv = String::from("omega,gain,s_u,eta,cumulative\n");
    for i in 0..base.grid.len() {
        eta_csv.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt(base.grid[i]),
            fmt(base.gains[i]),
            fmt(base.s_u_star[i]),
            fmt(base.eta[i]),
            fmt(base.cumulative[i])
        ));
    }
    output::atomic_write(&ws.outdir.join("eta.csv"), eta_csv.as_bytes())?;
    output::write_curve_csv(
        &ws.outdir.join("noise_sweep.csv"),
        "noise_level",
        "capacity",
        &sweeps.noise_curve,
    )?;
    output::write_curve_csv(
        &ws.outdir.join("power_sweep.csv"),
        "power_budget",
        "capacity",
        &sweeps.power_curve,
    )?;
    output::write_json(&ws.outdir.join("capacity.json"), &sweeps)?;

    maybe_plot(
        ws,
        "spectral_efficiency.svg",
        &PlotSpec {
            title: format!("water-filling allocation at k_leak = {kleak}"),
            x_label: "omega (rad/min)".into(),
            y_label: "eta (bits/min per rad/min)".into(),
            x_log: true,
            series: vec![Series {
                label: String::new(),
                points: base.grid.iter().copied().zip(base.eta.iter().copied()).collect(),
            }],
            vlines: Vec::new(),
        },
    )?;
    maybe_plot(
        ws,
        "capacity_noise.svg",
        &PlotSpec {
            title: "capacity vs noise level".into(),
            x_label: "noise density".into(),
            y_label: "capacity (bits/min)".into(),
            x_log: true,
            series: vec![Series {
                label: String::new(),
                points: sweeps.noise_curve.clone(),
            }],
            vlines: Vec::new(),
        },
    )?;
    maybe_plot(
        ws,
        "capacity_power.svg",
        &PlotSpec {
            title: "capacity vs power budget".into(),
            x_label: "power budget".into(),
            y_label: "capacity (bits/min)".into(),
            x_log: false,
            series: vec![Series {
                label: String::new(),
                points: sweeps.power_curve.clone(),
            }],
            vlines: Vec::new(),
        },
    )?;

    println!(
        "capacity-sweep: k_leak {} -> capacity {} bits/min, {} of {} bins active",
        fmt(kleak),
        fmt(base.capacity_total),
        base.active_bins,
        base.grid.len()
    );
    if let Some(note) = &base.note {
        println!("capacity-sweep: note: {note}");
    }
    Ok(())
}

/// Validate the config and echo the resolved form to stdout. No files.
pub fn validate_config(cfg: &RunConfig) -> Result<(), Failure> {
    config::resolve(cfg)?;
    cfg.scenario.resolve(None)?;
    print!("{}", config::to_toml(cfg)?);
    Ok(())
}

/// Error strings embed no commas today, but quote defensively anyway.
fn csv_quote(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
