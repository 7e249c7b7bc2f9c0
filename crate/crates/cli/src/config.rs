//! Run configuration: one file describes a whole pipeline invocation.
//!
//! Every section has complete defaults, so an empty file (or no file at all)
//! resolves to the reference setup. Unknown keys are rejected rather than
//! silently ignored; a typo in a parameter name must not produce a quietly
//! different run.

use crate::Failure;
use gutbrain_core::model::CircadianConfig;
use gutbrain_core::{
    CircadianDrive, InputProfile, IntegratorConfig, ModelParameters, Scenario,
};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub parameters: ModelParameters,
    pub circadian: CircadianConfig,
    pub integrator: IntegratorConfig,
    pub scenario: ScenarioSection,
    pub analysis: AnalysisSection,
    pub output: OutputSection,
}

/// Which input scenario `simulate` runs by default.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSection {
    /// One of `healthy`, `acute`, `chronic`, or `custom`.
    pub name: String,
    /// Leak input profile; required when `name = "custom"`, ignored otherwise.
    pub profile: Option<InputProfile>,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        Self {
            name: "healthy".to_string(),
            profile: None,
        }
    }
}

impl ScenarioSection {
    pub fn resolve(&self, override_name: Option<&str>) -> Result<Scenario, Failure> {
        let name = override_name.unwrap_or(&self.name);
        match name {
            "healthy" => Ok(Scenario::Healthy),
            "acute" => Ok(Scenario::Acute),
            "chronic" => Ok(Scenario::Chronic),
            "custom" => match &self.profile {
                Some(profile) => Ok(Scenario::Custom(profile.clone())),
                None => Err(Failure::usage(
                    "scenario \"custom\" needs a [scenario.profile] table in the config",
                )),
            },
            other => Err(Failure::usage(format!(
                "unknown scenario {other:?} (expected healthy, acute, chronic, or custom)"
            ))),
        }
    }
}

/// Knobs shared by the analysis subcommands (operating points, frequency
/// band, channel budgets, sweep grids). Command-line flags override these
/// one invocation at a time.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSection {
    /// Operating-point leak for the healthy branch of the analyses.
    pub kleak_healthy: f64,
    /// Operating-point leak for the chronic branch.
    pub kleak_chronic: f64,
    /// Frequency band for Bode and capacity work, rad/min.
    pub omega_min: f64,
    pub omega_max: f64,
    /// Logarithmic frequency grid size.
    pub grid_points: usize,
    /// Flat noise density for the capacity calculations.
    pub noise_level: f64,
    /// Average input power budget for water-filling.
    pub power_budget: f64,
    /// Bifurcation sweep grid: `start`, `stop` inclusive, spacing `step`.
    pub sweep_start: f64,
    pub sweep_stop: f64,
    pub sweep_step: f64,
    /// Leak values for the capacity-versus-stress curve.
    pub capacity_grid: Vec<f64>,
    /// Noise densities for the capacity noise sweep; empty means the
    /// built-in log-spaced ladder around `noise_level`.
    pub noise_levels: Vec<f64>,
    /// Power budgets for the capacity power sweep; empty means the
    /// built-in linear ladder up to twice `power_budget`.
    pub power_levels: Vec<f64>,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self {
            kleak_healthy: 0.1,
            kleak_chronic: 3.0,
            omega_min: 1e-6,
            omega_max: 1.0,
            grid_points: 400,
            noise_level: gutbrain_core::capacity::DEFAULT_NOISE_LEVEL,
            power_budget: gutbrain_core::capacity::DEFAULT_POWER_BUDGET,
            sweep_start: 0.0,
            sweep_stop: 3.0,
            sweep_step: 0.1,
            capacity_grid: vec![
                0.1, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0, 2.25, 2.5, 2.75, 3.0,
            ],
            noise_levels: Vec::new(),
            power_levels: Vec::new(),
        }
    }
}

impl AnalysisSection {
    /// Materialize the bifurcation grid from the `start/stop/step` triple.
    pub fn sweep_grid(&self) -> Result<Vec<f64>, Failure> {
        if self.sweep_step <= 0.0 || !self.sweep_step.is_finite() {
            return Err(Failure::usage(format!(
                "analysis.sweep_step must be a positive number, got {}",
                self.sweep_step
            )));
        }
        if self.sweep_stop < self.sweep_start {
            return Err(Failure::usage(format!(
                "analysis sweep range is empty: start {} exceeds stop {}",
                self.sweep_start, self.sweep_stop
            )));
        }
        let n = ((self.sweep_stop - self.sweep_start) / self.sweep_step).round() as usize;
        let grid: Vec<f64> = (0..=n)
            .map(|i| self.sweep_start + self.sweep_step * i as f64)
            .filter(|k| *k <= self.sweep_stop + 1e-12)
            .collect();
        Ok(grid)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    /// Where result files land; the `--output-dir` flag and the
    /// `GBA_OUTPUT_DIR` environment variable take precedence (in that order).
    pub directory: Option<PathBuf>,
    /// Emit SVG plots alongside the CSV/JSON tables.
    pub plots: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            directory: None,
            plots: true,
        }
    }
}

/// Load a config file; `None` means "all defaults". The format is chosen by
/// extension: `.json` parses as JSON, anything else as TOML.
pub fn load(path: Option<&Path>) -> Result<RunConfig, Failure> {
    let Some(path) = path else {
        return Ok(RunConfig::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::usage(format!("cannot read config {}: {e}", path.display())))?;
    let is_json = path
        .extension()
        .is_some_and(|ext| ext.eq_ignore_ascii_case("json"));
    let parsed = if is_json {
        serde_json::from_str::<RunConfig>(&text)
            .map_err(|e| Failure::usage(format!("config {}: {e}", path.display())))?
    } else {
        toml::from_str::<RunConfig>(&text)
            .map_err(|e| Failure::usage(format!("config {}: {e}", path.display())))?
    };
    Ok(parsed)
}

/// Config sections cross-validated and turned into model-ready values.
pub struct Resolved {
    pub parameters: ModelParameters,
    pub drive: CircadianDrive,
    pub integrator: IntegratorConfig,
}

/// Validate the numeric sections together. Bad values in a config file are
/// usage errors: the pipeline never started.
pub fn resolve(cfg: &RunConfig) -> Result<Resolved, Failure> {
    cfg.parameters
        .validate()
        .map_err(|e| Failure::usage(format!("[parameters] {e}")))?;
    let drive = CircadianDrive::try_from(cfg.circadian)
        .map_err(|e| Failure::usage(format!("[circadian] {e}")))?;
    cfg.integrator
        .validate(&[cfg.parameters.tau_hpa, cfg.parameters.tau_gut])
        .map_err(|e| Failure::usage(format!("[integrator] {e}")))?;
    let analysis = &cfg.analysis;
    for (name, value) in [
        ("kleak_healthy", analysis.kleak_healthy),
        ("kleak_chronic", analysis.kleak_chronic),
        ("omega_min", analysis.omega_min),
        ("omega_max", analysis.omega_max),
        ("noise_level", analysis.noise_level),
        ("power_budget", analysis.power_budget),
    ] {
        if !value.is_finite() || value < 0.0 {
            return Err(Failure::usage(format!(
                "analysis.{name} must be finite and nonnegative, got {value}"
            )));
        }
    }
    if analysis.omega_min >= analysis.omega_max {
        return Err(Failure::usage(format!(
            "analysis band is empty: omega_min {} >= omega_max {}",
            analysis.omega_min, analysis.omega_max
        )));
    }
    if analysis.grid_points < 2 {
        return Err(Failure::usage(format!(
            "analysis.grid_points must be at least 2, got {}",
            analysis.grid_points
        )));
    }
    analysis.sweep_grid()?;
    Ok(Resolved {
        parameters: cfg.parameters.clone(),
        drive,
        integrator: cfg.integrator,
    })
}

/// Pick the output directory: flag, then config, then environment, then a
/// local `gba-out` fallback.
pub fn resolve_outdir(flag: Option<PathBuf>, cfg: &RunConfig) -> PathBuf {
    flag.or_else(|| cfg.output.directory.clone())
        .or_else(|| std::env::var_os("GBA_OUTPUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("gba-out"))
}

/// Serialize the fully resolved config for the echo file and
/// `validate-config`.
pub fn to_toml(cfg: &RunConfig) -> Result<String, Failure> {
    toml::to_string_pretty(cfg)
        .map_err(|e| Failure::domain(format!("serializing resolved config: {e}")))
}
