//! Closed-loop gut-brain axis model and analysis pipeline.
//!
//! The model couples gut permeability, circulating endotoxin, two cytokines
//! (TNF-alpha and IL-6), and the HPA hormones ACTH and cortisol in a
//! six-state delay differential equation with two feedback delays: a short
//! pituitary-adrenal delay and a long cortisol-to-barrier delay. On top of
//! the simulator sit the analysis layers:
//!
//! - [`scenario`]: healthy, acute-stress, and chronic-stress runs with
//!   rhythm metrics (period, amplitude, recovery time).
//! - [`equilibrium`]: Newton equilibria under constant drive, delay-aware
//!   linearization with enforced sparsity, and a simulation stability probe.
//! - [`freq`]: exact delay transfer function, Bode sweeps, DC gain, and the
//!   -3 dB bandwidth.
//! - [`capacity`]: water-filling Shannon capacity of the stress-to-cortisol
//!   channel with noise and power sweeps.
//! - [`bifurcation`]: stress sweeps locating the two tipping points between
//!   rhythmic, dampened, and disrupted cortisol regimes.
//!
//! Time is measured in minutes throughout; concentrations use the model's
//! nominal units (cortisol in ug/dL).

pub mod bifurcation;
pub mod capacity;
pub mod equilibrium;
pub mod error;
pub mod freq;
pub mod input;
pub mod integrator;
pub mod linalg;
pub mod model;
pub mod scenario;

pub use bifurcation::{BifurcationPoint, Regime, SweepResult};
pub use capacity::{CapacityResult, CapacitySweeps, NoiseModel, StressCapacityPoint};
pub use equilibrium::LinearizedSystem;
pub use error::{GbaError, Result};
pub use freq::{BodeData, BodePoint};
pub use input::InputProfile;
pub use integrator::{HistoryInit, IntegratorConfig, Method, TimeSeries};
pub use model::{CircadianDrive, ModelParameters, StateVector, STATE_DIM, STATE_NAMES};
pub use scenario::{RhythmMetrics, Scenario, ScenarioReport};
