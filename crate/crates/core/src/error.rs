use thiserror::Error;

/// Errors produced by the model, integrator, and analysis layers.
#[derive(Debug, Error)]
pub enum GbaError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite {component} at t = {t} min")]
    NonFiniteState { component: String, t: f64 },

    #[error("nonphysical negative {component} = {value:e} at t = {t} min")]
    NegativeState {
        component: String,
        value: f64,
        t: f64,
    },

    #[error("history lookup at t = {t_query} min outside span [{t_min}, {t_max}]")]
    HistoryOutOfRange {
        t_query: f64,
        t_min: f64,
        t_max: f64,
    },

    #[error("{context}: matrix numerically singular (condition estimate {cond:.3e})")]
    SingularMatrix { context: String, cond: f64 },

    #[error("Newton did not converge in {iterations} iterations (best residual {best_residual:.3e})")]
    NewtonNoConvergence {
        iterations: usize,
        best_residual: f64,
    },

    #[error("equilibrium has nonphysical negative component {component} = {value:e}")]
    NonphysicalEquilibrium { component: String, value: f64 },

    #[error("unstable operating point at u* = {u_star}: perturbation deviations grow over the probe window")]
    UnstableOperatingPoint { u_star: f64 },

    #[error("linearization sparsity violation: {matrix}[{row}][{col}] = {value:.3e} is outside the expected pattern")]
    SparsityViolation {
        matrix: &'static str,
        row: usize,
        col: usize,
        value: f64,
    },

    #[error("water-filling active band truncated: the allocation is still positive at the last grid point while |H| is falling; extend the frequency grid upward")]
    ActiveBandTruncated,
}

pub type Result<T> = std::result::Result<T, GbaError>;
