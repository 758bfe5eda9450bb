//! Multi-objective ergodic coverage with sparse sensing.
//!
//! Agents follow smooth trajectories over the unit square while choosing, per
//! time step, which of their sensors to switch on. Coverage quality is
//! measured spectrally against one target map per sensor.

pub mod baselines;
pub mod bench;
pub mod error;
pub mod geo;
pub mod maps;
pub mod optimizer;
pub mod scenario;
pub mod sparse;
pub mod spectral;

pub use error::{Error, Result};
pub use maps::{ObjectiveMap, WeightVector};
pub use optimizer::{solve, DynamicsModel, PlanResult, SolverConfig};
pub use scenario::TeamScenario;
pub use sparse::{Budget, SensingSchedule, SensorMask};
pub use spectral::{BasisConfig, SpectralCoefficients, Trajectory};
