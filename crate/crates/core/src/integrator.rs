//! Fixed-step RK4 integration of delay differential equations by the method
//! of steps, with cubic Hermite dense output.
//!
//! The step is capped at a quarter of the shortest delay, so delayed lookups
//! inside a step always land in already-completed history and the scheme
//! stays a strict method of steps.

use crate::error::{GbaError, Result};
use crate::input::InputProfile;
use crate::model::{
    self, CircadianDrive, ModelParameters, StateVector, NEGATIVITY_TOLERANCE, STATE_DIM,
    STATE_NAMES,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Rk4Hermite,
}

/// Integrator settings. `clamp_tolerance = Some(tol)` zeroes state
/// components in `[-tol, 0)` before every right-hand-side evaluation and
/// errors on anything more negative; `None` disables clamping (for test
/// problems whose solutions legitimately change sign).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    pub step: f64,
    pub method: Method,
    pub clamp_tolerance: Option<f64>,
    pub horizon: f64,
    pub output_every: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            step: 0.5,
            method: Method::Rk4Hermite,
            clamp_tolerance: Some(NEGATIVITY_TOLERANCE),
            horizon: 14_400.0,
            output_every: 1.0,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self, delays: &[f64]) -> Result<()> {
        if !self.step.is_finite() || self.step <= 0.0 {
            return Err(GbaError::InvalidParameter(format!(
                "step must be finite and positive, got {}",
                self.step
            )));
        }
        if !self.horizon.is_finite() || self.horizon <= 0.0 {
            return Err(GbaError::InvalidParameter(format!(
                "horizon must be finite and positive, got {}",
                self.horizon
            )));
        }
        if !self.output_every.is_finite() || self.output_every <= 0.0 {
            return Err(GbaError::InvalidParameter(format!(
                "output spacing must be finite and positive, got {}",
                self.output_every
            )));
        }
        if let Some(tol) = self.clamp_tolerance {
            if !tol.is_finite() || tol < 0.0 {
                return Err(GbaError::InvalidParameter(format!(
                    "clamp tolerance must be finite and nonnegative, got {tol}"
                )));
            }
        }
        for &tau in delays {
            if !tau.is_finite() || tau <= 0.0 {
                return Err(GbaError::InvalidParameter(format!(
                    "delays must be finite and positive, got {tau}"
                )));
            }
            if self.step > tau / 4.0 {
                return Err(GbaError::InvalidParameter(format!(
                    "step {} exceeds a quarter of delay {tau}; delayed lookups would \
                     reference the step being computed",
                    self.step
                )));
            }
        }
        Ok(())
    }
}

/// Initial history on `[-max delay, 0]`.
pub enum HistoryInit<const N: usize> {
    Constant([f64; N]),
    Function(Box<dyn Fn(f64) -> [f64; N] + Send + Sync>),
}

impl<const N: usize> HistoryInit<N> {
    fn eval(&self, t: f64) -> [f64; N] {
        match self {
            HistoryInit::Constant(x) => *x,
            HistoryInit::Function(f) => f(t),
        }
    }
}

/// Dense solution history: knot times with states and derivatives,
/// interpolated with cubic Hermite polynomials between knots.
#[derive(Debug, Clone)]
pub struct HistoryBuffer<const N: usize> {
    times: Vec<f64>,
    states: Vec<[f64; N]>,
    derivs: Vec<[f64; N]>,
}

impl<const N: usize> HistoryBuffer<N> {
    pub fn new() -> Self {
        Self {
            times: Vec::new(),
            states: Vec::new(),
            derivs: Vec::new(),
        }
    }

    pub fn push_knot(&mut self, t: f64, state: [f64; N], deriv: [f64; N]) {
        debug_assert!(
            self.times.last().map_or(true, |&last| t > last),
            "knot times must be strictly increasing"
        );
        self.times.push(t);
        self.states.push(state);
        self.derivs.push(deriv);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn span(&self) -> (f64, f64) {
        (
            *self.times.first().unwrap_or(&f64::NAN),
            *self.times.last().unwrap_or(&f64::NAN),
        )
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn state_at_knot(&self, i: usize) -> &[f64; N] {
        &self.states[i]
    }

    /// Cubic Hermite interpolation; exact at knots, never extrapolates.
    pub fn interpolate(&self, t_query: f64) -> Result<[f64; N]> {
        let (t_min, t_max) = self.span();
        if self.is_empty() || t_query < t_min || t_query > t_max {
            return Err(GbaError::HistoryOutOfRange {
                t_query,
                t_min,
                t_max,
            });
        }
        // Bracketing cell [i, i+1] with times[i] <= t_query.
        let i = match self
            .times
            .binary_search_by(|probe| probe.partial_cmp(&t_query).expect("finite knot times"))
        {
            Ok(exact) => return Ok(self.states[exact]),
            Err(insert) => insert - 1,
        };
        let h = self.times[i + 1] - self.times[i];
        let theta = (t_query - self.times[i]) / h;
        let t2 = theta * theta;
        let t3 = t2 * theta;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + theta;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        let y0 = &self.states[i];
        let y1 = &self.states[i + 1];
        let m0 = &self.derivs[i];
        let m1 = &self.derivs[i + 1];
        let mut out = [0.0; N];
        for j in 0..N {
            out[j] = h00 * y0[j] + h10 * h * m0[j] + h01 * y1[j] + h11 * h * m1[j];
        }
        Ok(out)
    }
}

impl<const N: usize> Default for HistoryBuffer<N> {
    fn default() -> Self {
        Self::new()
    }
}

/// Raw integration output: the dense buffer plus uniform samples.
#[derive(Debug)]
pub struct DdeSolution<const N: usize> {
    pub buffer: HistoryBuffer<N>,
    pub times: Vec<f64>,
    pub states: Vec<[f64; N]>,
}

fn clamp_components<const N: usize>(
    x: &mut [f64; N],
    tol: f64,
    names: &[&'static str; N],
    t: f64,
) -> Result<()> {
    for (j, v) in x.iter_mut().enumerate() {
        if *v < 0.0 {
            if *v >= -tol {
                *v = 0.0;
            } else {
                return Err(GbaError::NegativeState {
                    component: names[j].to_string(),
                    value: *v,
                    t,
                });
            }
        }
    }
    Ok(())
}

/// Integrate a DDE with constant delays by the method of steps.
///
/// `f(t, x, delayed)` receives the delayed states in the order of `delays`.
/// The initial history must be defined on `[-max delay, 0]`; integration
/// runs on `[0, horizon]` and samples every `output_every` minutes.
pub fn integrate_dde<const N: usize, F>(
    mut f: F,
    delays: &[f64],
    names: &[&'static str; N],
    history: &HistoryInit<N>,
    cfg: &IntegratorConfig,
) -> Result<DdeSolution<N>>
where
    F: FnMut(f64, &[f64; N], &[[f64; N]]) -> Result<[f64; N]>,
{
    cfg.validate(delays)?;
    let h = cfg.step;

    let mut buffer = HistoryBuffer::new();
    let mut x = history.eval(0.0);
    if let Some(tol) = cfg.clamp_tolerance {
        clamp_components(&mut x, tol, names, 0.0)?;
    }

    let n_steps = (cfg.horizon / h - 1e-9).ceil() as usize;
    let mut delayed = vec![[0.0; N]; delays.len()];

    // Evaluates f with clamped current and delayed states. Delayed lookups
    // before the start of integration go straight to the history function,
    // which keeps the prescribed history exact instead of blending it with
    // the solution's initial derivative.
    let eval = |buffer: &HistoryBuffer<N>,
                t: f64,
                x: &[f64; N],
                delayed: &mut Vec<[f64; N]>,
                f: &mut F|
     -> Result<[f64; N]> {
        let mut xc = *x;
        if let Some(tol) = cfg.clamp_tolerance {
            clamp_components(&mut xc, tol, names, t)?;
        }
        for (slot, &tau) in delayed.iter_mut().zip(delays) {
            let t_lag = t - tau;
            *slot = if t_lag <= 0.0 {
                history.eval(t_lag)
            } else {
                buffer.interpolate(t_lag)?
            };
            if let Some(tol) = cfg.clamp_tolerance {
                clamp_components(slot, tol, names, t)?;
            }
        }
        f(t, &xc, delayed)
    };

    let mut deriv = eval(&buffer, 0.0, &x, &mut delayed, &mut f)?;
    buffer.push_knot(0.0, x, deriv);

    for n in 0..n_steps {
        let t_n = n as f64 * h;
        let t_next = ((n + 1) as f64 * h).min(cfg.horizon);
        let step = t_next - t_n;
        let half = 0.5 * step;

        let k1 = deriv;
        let mut xs = [0.0; N];
        for j in 0..N {
            xs[j] = x[j] + half * k1[j];
        }
        let k2 = eval(&buffer, t_n + half, &xs, &mut delayed, &mut f)?;
        for j in 0..N {
            xs[j] = x[j] + half * k2[j];
        }
        let k3 = eval(&buffer, t_n + half, &xs, &mut delayed, &mut f)?;
        for j in 0..N {
            xs[j] = x[j] + step * k3[j];
        }
        let k4 = eval(&buffer, t_next, &xs, &mut delayed, &mut f)?;

        for j in 0..N {
            x[j] += step / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        for (j, v) in x.iter().enumerate() {
            if !v.is_finite() {
                return Err(GbaError::NonFiniteState {
                    component: names[j].to_string(),
                    t: t_next,
                });
            }
        }
        if let Some(tol) = cfg.clamp_tolerance {
            clamp_components(&mut x, tol, names, t_next)?;
        }

        deriv = eval(&buffer, t_next, &x, &mut delayed, &mut f)?;
        buffer.push_knot(t_next, x, deriv);
    }

    // Uniform output samples from the dense buffer.
    let n_out = (cfg.horizon / cfg.output_every + 1e-9).floor() as usize;
    let mut times = Vec::with_capacity(n_out + 1);
    let mut states = Vec::with_capacity(n_out + 1);
    for m in 0..=n_out {
        let t = (m as f64 * cfg.output_every).min(cfg.horizon);
        times.push(t);
        states.push(buffer.interpolate(t)?);
    }

    Ok(DdeSolution {
        buffer,
        times,
        states,
    })
}

/// Simulated trajectory of the full model at uniform sample times.
#[derive(Debug, Clone, Serialize)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    pub states: Vec<StateVector>,
    /// Leak input u(t) at each sample.
    pub inputs: Vec<f64>,
    /// Circadian drive E(t) at each sample.
    pub drives: Vec<f64>,
    /// Snapshot of the parameters the run used.
    pub parameters: ModelParameters,
}

impl TimeSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// One state component over time, by state index (see [`STATE_NAMES`]).
    pub fn channel(&self, index: usize) -> Vec<f64> {
        self.states.iter().map(|x| x.component(index)).collect()
    }

    /// Index of the first sample with time >= t.
    pub fn index_at(&self, t: f64) -> usize {
        self.times.partition_point(|&s| s < t)
    }
}

/// Integrate the full gut-brain model.
pub fn integrate(
    p: &ModelParameters,
    drive: &CircadianDrive,
    input: &InputProfile,
    history: &HistoryInit<STATE_DIM>,
    cfg: &IntegratorConfig,
) -> Result<TimeSeries> {
    p.validate()?;
    input.validate()?;
    let delays = [p.tau_hpa, p.tau_gut];
    let f = |t: f64, x: &[f64; STATE_DIM], delayed: &[[f64; STATE_DIM]]| {
        let view = model::DelayedView {
            x_hpa: StateVector::from_array(delayed[0]),
            x_gut: StateVector::from_array(delayed[1]),
        };
        model::rhs(
            t,
            &StateVector::from_array(*x),
            &view,
            input.eval(t),
            drive.eval(t),
            p,
        )
        .map(|d| d.as_array())
    };
    let sol = integrate_dde(f, &delays, &STATE_NAMES, history, cfg)?;
    let states: Vec<StateVector> = sol
        .states
        .iter()
        .map(|x| StateVector::from_array(*x))
        .collect();
    let inputs = sol.times.iter().map(|&t| input.eval(t)).collect();
    let drives = sol.times.iter().map(|&t| drive.eval(t)).collect();
    Ok(TimeSeries {
        times: sol.times,
        states,
        inputs,
        drives,
        parameters: p.clone(),
    })
}
