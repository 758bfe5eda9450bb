//! A fully specified planning instance shared by every planner.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maps::{scalarize, ObjectiveMap, WeightVector};
use crate::optimizer::DynamicsModel;
use crate::sparse::{Budget, SensorMask};
use crate::spectral::{map_coefficients, BasisConfig, SpectralCoefficients};

/// Default sparsity-penalty weight.
pub const DEFAULT_L1_WEIGHT: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeamScenario {
    /// One normalized objective map per sensor.
    pub maps: Vec<ObjectiveMap>,
    /// Start position of each agent.
    pub starts: Vec<Vec<f64>>,
    pub mask: SensorMask,
    pub budget_percent: f64,
    pub dynamics: DynamicsModel,
    /// Number of control steps `T`; trajectories have `T + 1` states.
    pub horizon: usize,
    pub seed: u64,
    pub basis: BasisConfig,
    pub l1_weight: f64,
    /// Weighting used to build the combined map.
    pub combination: WeightVector,
}

impl TeamScenario {
    pub fn validate(&self) -> Result<()> {
        self.basis.validate()?;
        if self.basis.dims != 2 {
            return Err(Error::Config("objective maps require a 2-D basis".into()));
        }
        if self.maps.is_empty() {
            return Err(Error::Config("scenario has no objective maps".into()));
        }
        if self.starts.is_empty() {
            return Err(Error::Config("scenario has no agents".into()));
        }
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        if self.mask.num_agents() != self.starts.len() || self.mask.num_sensors() != self.maps.len() {
            return Err(Error::Config(format!(
                "mask is {}x{}, scenario has {} agents and {} maps",
                self.mask.num_agents(),
                self.mask.num_sensors(),
                self.starts.len(),
                self.maps.len()
            )));
        }
        if self.combination.len() != self.maps.len() {
            return Err(Error::Config("combination weights do not match the maps".into()));
        }
        for s in &self.starts {
            if s.len() != 2 || s.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::Config(format!("start {s:?} outside the unit square")));
            }
        }
        if !(self.l1_weight >= 0.0 && self.l1_weight.is_finite()) {
            return Err(Error::Config("l1_weight must be nonnegative".into()));
        }
        self.dynamics.validate()?;
        for b in self.budgets()? {
            if !b.is_feasible(self.steps()) {
                return Err(Error::Config("budget exceeds the horizon".into()));
            }
        }
        Ok(())
    }

    pub fn num_agents(&self) -> usize {
        self.starts.len()
    }

    pub fn num_sensors(&self) -> usize {
        self.maps.len()
    }

    /// States per trajectory, `T + 1`.
    pub fn steps(&self) -> usize {
        self.horizon + 1
    }

    /// Per-agent budgets derived from the budget percent and the mask.
    pub fn budgets(&self) -> Result<Vec<Budget>> {
        (0..self.num_agents())
            .map(|m| Budget::from_percent(self.budget_percent, self.steps(), self.mask.agent_row(m)))
            .collect()
    }

    pub fn combined_map(&self) -> Result<ObjectiveMap> {
        scalarize(&self.maps, &self.combination)
    }

    pub fn objective_coefficients(&self) -> Result<Vec<SpectralCoefficients>> {
        self.maps
            .iter()
            .map(|m| map_coefficients(m, &self.basis))
            .collect()
    }

    pub fn combined_coefficients(&self) -> Result<SpectralCoefficients> {
        map_coefficients(&self.combined_map()?, &self.basis)
    }
}
