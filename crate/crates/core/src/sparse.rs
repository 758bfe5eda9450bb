//! Sensing schedules, the sparse and multi-objective sparse-sensing ergodic
//! metrics, sensor masks for heterogeneous teams, and budget projection.
//!
//! A schedule holds one decision row `lambda_i(t)` per sensor. Per-sensor
//! statistics pool every agent's `lambda`-weighted basis evaluations and divide
//! by the pool's total selected mass; the combined-map term uses the plain
//! pooled time average of all agents.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{
    weighted_distance, Basis, BasisConfig, BasisTable, SpectralCoefficients, Trajectory,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleMode {
    Continuous,
    Binary,
}

/// Per-sensor decision rows over the time grid, `sensors x steps`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensingSchedule {
    sensors: usize,
    steps: usize,
    lambda: Vec<f64>,
    mode: ScheduleMode,
}

impl SensingSchedule {
    /// Continuous schedule with entries in `[0, 1]`.
    pub fn continuous(rows: Vec<Vec<f64>>) -> Result<Self> {
        let (sensors, steps, lambda) = flatten_rows(rows)?;
        if let Some(bad) = lambda.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Constraint(format!(
                "decision value {bad} outside [0, 1]"
            )));
        }
        Ok(SensingSchedule {
            sensors,
            steps,
            lambda,
            mode: ScheduleMode::Continuous,
        })
    }

    /// Binary schedule: entries in `{0, 1}` and at most one sensor per time step.
    pub fn binary(rows: Vec<Vec<f64>>) -> Result<Self> {
        let (sensors, steps, lambda) = flatten_rows(rows)?;
        if lambda.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::Constraint("binary schedule entries must be 0 or 1".into()));
        }
        let sched = SensingSchedule {
            sensors,
            steps,
            lambda,
            mode: ScheduleMode::Binary,
        };
        for t in 0..steps {
            if sched.column_sum(t) > 1.0 {
                return Err(Error::Constraint(format!(
                    "more than one sensor active at t = {t}"
                )));
            }
        }
        Ok(sched)
    }

    pub fn zeros(sensors: usize, steps: usize, mode: ScheduleMode) -> Self {
        SensingSchedule {
            sensors,
            steps,
            lambda: vec![0.0; sensors * steps],
            mode,
        }
    }

    pub(crate) fn from_flat(sensors: usize, steps: usize, lambda: Vec<f64>, mode: ScheduleMode) -> Self {
        debug_assert_eq!(lambda.len(), sensors * steps);
        SensingSchedule {
            sensors,
            steps,
            lambda,
            mode,
        }
    }

    pub fn mode(&self) -> ScheduleMode {
        self.mode
    }

    pub fn num_sensors(&self) -> usize {
        self.sensors
    }

    /// Number of time steps, `T + 1`.
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn row(&self, sensor: usize) -> &[f64] {
        &self.lambda[sensor * self.steps..(sensor + 1) * self.steps]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.lambda.chunks(self.steps.max(1)).take(self.sensors)
    }

    pub fn get(&self, sensor: usize, t: usize) -> f64 {
        self.lambda[sensor * self.steps + t]
    }

    pub(crate) fn flat(&self) -> &[f64] {
        &self.lambda
    }

    pub fn column_sum(&self, t: usize) -> f64 {
        (0..self.sensors).map(|i| self.get(i, t)).sum()
    }

    pub fn sensor_mass(&self, sensor: usize) -> f64 {
        self.row(sensor).iter().sum()
    }

    pub fn total_mass(&self) -> f64 {
        self.lambda.iter().sum()
    }

    /// Time indices where `sensor` is selected (entries equal to 1).
    pub fn selected_times(&self, sensor: usize) -> Vec<usize> {
        self.row(sensor)
            .iter()
            .enumerate()
            .filter(|(_, &v)| v == 1.0)
            .map(|(t, _)| t)
            .collect()
    }

    /// True when this is a binary schedule spending exactly the budget of every sensor.
    pub fn satisfies_budget(&self, budget: &Budget) -> bool {
        self.mode == ScheduleMode::Binary
            && budget.per_sensor().len() == self.sensors
            && (0..self.sensors).all(|i| self.sensor_mass(i) == budget.per_sensor()[i] as f64)
            && (0..self.steps).all(|t| self.column_sum(t) <= 1.0)
    }

    /// Audit-log form: header `sensor_id,t0,...`, one row per sensor.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("sensor_id");
        for t in 0..self.steps {
            let _ = write!(out, ",t{t}");
        }
        out.push('\n');
        for i in 0..self.sensors {
            let _ = write!(out, "{i}");
            for v in self.row(i) {
                let _ = write!(out, ",{v:?}");
            }
            out.push('\n');
        }
        out
    }
}

fn flatten_rows(rows: Vec<Vec<f64>>) -> Result<(usize, usize, Vec<f64>)> {
    let sensors = rows.len();
    if sensors == 0 {
        return Err(Error::shape("schedule needs at least one sensor row"));
    }
    let steps = rows[0].len();
    if steps == 0 {
        return Err(Error::shape("schedule rows are empty"));
    }
    if rows.iter().any(|r| r.len() != steps) {
        return Err(Error::shape("schedule rows have different lengths"));
    }
    Ok((sensors, steps, rows.into_iter().flatten().collect()))
}

/// Which sensors each agent carries, `agents x sensors`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SensorMask {
    onboard: Vec<Vec<bool>>,
}

impl SensorMask {
    pub fn new(onboard: Vec<Vec<bool>>) -> Result<Self> {
        let sensors = onboard.first().map(Vec::len).unwrap_or(0);
        if onboard.is_empty() || sensors == 0 {
            return Err(Error::precondition("mask needs at least one agent and one sensor"));
        }
        if onboard.iter().any(|r| r.len() != sensors) {
            return Err(Error::shape("mask rows have different lengths"));
        }
        if let Some(m) = onboard.iter().position(|r| !r.iter().any(|&b| b)) {
            return Err(Error::precondition(format!("agent {m} carries no sensor")));
        }
        if let Some(i) = (0..sensors).find(|&i| !onboard.iter().any(|r| r[i])) {
            return Err(Error::precondition(format!("sensor {i} is on no agent")));
        }
        Ok(SensorMask { onboard })
    }

    /// Every agent carries every sensor.
    pub fn homogeneous(agents: usize, sensors: usize) -> Result<Self> {
        SensorMask::new(vec![vec![true; sensors]; agents])
    }

    /// Agent `m` carries only sensor `m mod sensors`.
    pub fn round_robin(agents: usize, sensors: usize) -> Result<Self> {
        SensorMask::new(
            (0..agents)
                .map(|m| (0..sensors).map(|i| i == m % sensors.max(1)).collect())
                .collect(),
        )
    }

    pub fn num_agents(&self) -> usize {
        self.onboard.len()
    }

    pub fn num_sensors(&self) -> usize {
        self.onboard[0].len()
    }

    pub fn is_onboard(&self, agent: usize, sensor: usize) -> bool {
        self.onboard[agent][sensor]
    }

    pub fn agent_row(&self, agent: usize) -> &[bool] {
        &self.onboard[agent]
    }

    pub fn is_homogeneous(&self) -> bool {
        self.onboard.iter().flatten().all(|&b| b)
    }

    /// Copy with agents reordered so that new agent `j` is old agent `order[j]`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        SensorMask::new(order.iter().map(|&m| self.onboard[m].clone()).collect())
    }
}

/// Exact number of measurements each sensor takes on one agent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budget {
    per_sensor: Vec<usize>,
}

impl Budget {
    pub fn new(per_sensor: Vec<usize>) -> Self {
        Budget { per_sensor }
    }

    /// `percent` of the agent's `steps` time slots, split evenly across its
    /// onboard sensors (rounded, at least one measurement each when
    /// `percent > 0`; floored if rounding would overfill the horizon).
    pub fn from_percent(percent: f64, steps: usize, onboard: &[bool]) -> Result<Self> {
        if !(0.0..=100.0).contains(&percent) {
            return Err(Error::precondition(format!(
                "budget percent {percent} outside [0, 100]"
            )));
        }
        let carried = onboard.iter().filter(|&&b| b).count();
        if carried == 0 {
            return Ok(Budget::new(vec![0; onboard.len()]));
        }
        let share = percent / 100.0 * steps as f64 / carried as f64;
        let mut each = share.round() as usize;
        if each * carried > steps {
            each = share.floor() as usize;
        }
        if percent > 0.0 && steps >= carried {
            each = each.max(1);
        }
        Ok(Budget::new(
            onboard.iter().map(|&b| if b { each } else { 0 }).collect(),
        ))
    }

    pub fn per_sensor(&self) -> &[usize] {
        &self.per_sensor
    }

    pub fn total(&self) -> usize {
        self.per_sensor.iter().sum()
    }

    /// Feasible under the one-sensor-at-a-time rule.
    pub fn is_feasible(&self, steps: usize) -> bool {
        self.total() <= steps
    }

    /// Per-sensor fraction of the horizon, `B_i / steps`.
    pub fn fractions(&self, steps: usize) -> Vec<f64> {
        self.per_sensor
            .iter()
            .map(|&b| b as f64 / steps as f64)
            .collect()
    }
}

/// `c_k = sum_t lambda(t) F_k(x(t)) / sum_t lambda(t)`.
pub fn sparse_time_average_coeffs(
    traj: &Trajectory,
    lam: &[f64],
    cfg: &BasisConfig,
) -> Result<SpectralCoefficients> {
    let basis = Basis::new(*cfg)?;
    sparse_coeffs_with(&basis, traj, lam)
}

fn sparse_coeffs_with(basis: &Basis, traj: &Trajectory, lam: &[f64]) -> Result<SpectralCoefficients> {
    if lam.len() != traj.len() {
        return Err(Error::shape(format!(
            "{} decision values for {} states",
            lam.len(),
            traj.len()
        )));
    }
    if traj.dims() != basis.config().dims {
        return Err(Error::shape("trajectory and basis dimensions differ"));
    }
    if lam.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::precondition("decision values must be nonnegative"));
    }
    let mass: f64 = lam.iter().sum();
    if mass <= 0.0 {
        return Err(Error::degenerate("decision vector selects no measurements"));
    }
    let table = basis.tabulate(traj.states(), false);
    let mut values = vec![0.0; basis.len()];
    for (t, &l) in lam.iter().enumerate() {
        if l == 0.0 {
            continue;
        }
        for (acc, f) in values.iter_mut().zip(table.point_values(t)) {
            *acc += l * f;
        }
    }
    values.iter_mut().for_each(|v| *v /= mass);
    basis.coefficients(values)
}

/// Spectral mismatch of the `lambda`-weighted statistics plus `l1_weight * sum |lambda|`.
pub fn sparse_ergodic_metric(
    traj: &Trajectory,
    lam: &[f64],
    xi: &SpectralCoefficients,
    cfg: &BasisConfig,
    l1_weight: f64,
) -> Result<f64> {
    let c = sparse_time_average_coeffs(traj, lam, cfg)?;
    let spectral = crate::spectral::ergodic_metric(&c, xi)?;
    let penalty: f64 = lam.iter().map(|v| v.abs()).sum();
    Ok(spectral + l1_weight * penalty)
}

/// The three parts of the multi-objective sparse-sensing metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MosseTerms {
    /// Spectral mismatch of each sensor's pooled statistics against its map.
    pub per_objective: Vec<f64>,
    /// `l1_weight` times total decision mass.
    pub penalty: f64,
    /// Mismatch of the pooled trajectory statistics against the combined map.
    pub combined: f64,
}

impl MosseTerms {
    pub fn total(&self) -> f64 {
        self.per_objective.iter().sum::<f64>() + self.penalty + self.combined
    }
}

/// Evaluates the multi-objective sparse-sensing ergodic metric for a team.
pub fn mosse_metric(
    trajs: &[Trajectory],
    schedules: &[SensingSchedule],
    xis: &[SpectralCoefficients],
    xi_combined: &SpectralCoefficients,
    mask: &SensorMask,
    l1_weight: f64,
) -> Result<f64> {
    Ok(mosse_terms(trajs, schedules, xis, xi_combined, mask, l1_weight)?.total())
}

/// [`mosse_metric`] broken into its terms.
pub fn mosse_terms(
    trajs: &[Trajectory],
    schedules: &[SensingSchedule],
    xis: &[SpectralCoefficients],
    xi_combined: &SpectralCoefficients,
    mask: &SensorMask,
    l1_weight: f64,
) -> Result<MosseTerms> {
    let cfg = *xi_combined.basis();
    let basis = Basis::new(cfg)?;
    for xi in xis {
        if xi.basis() != &cfg {
            return Err(Error::shape("objective coefficients use different bases"));
        }
    }
    check_team(trajs, schedules, xis.len(), mask)?;
    let tables: Vec<BasisTable> = trajs
        .iter()
        .map(|tr| {
            if tr.dims() != cfg.dims {
                return Err(Error::shape("trajectory and basis dimensions differ"));
            }
            Ok(basis.tabulate(tr.states(), false))
        })
        .collect::<Result<_>>()?;
    let agents: Vec<AgentView<'_>> = tables
        .iter()
        .zip(schedules)
        .map(|(table, s)| AgentView {
            table,
            steps: s.steps(),
            lambda: s.flat(),
        })
        .collect();
    let problem = MosseObjective {
        weights: basis.weights(),
        objectives: xis,
        combined: xi_combined,
        l1_weight,
        terms: TermSet::Full,
    };
    Ok(problem.evaluate(&agents, false)?.terms)
}

fn check_team(
    trajs: &[Trajectory],
    schedules: &[SensingSchedule],
    sensors: usize,
    mask: &SensorMask,
) -> Result<()> {
    if trajs.is_empty() {
        return Err(Error::precondition("team has no agents"));
    }
    if trajs.len() != schedules.len() || trajs.len() != mask.num_agents() {
        return Err(Error::shape(format!(
            "{} trajectories, {} schedules, {} mask rows",
            trajs.len(),
            schedules.len(),
            mask.num_agents()
        )));
    }
    if mask.num_sensors() != sensors {
        return Err(Error::shape(format!(
            "mask has {} sensors, {} objectives given",
            mask.num_sensors(),
            sensors
        )));
    }
    for (m, (tr, s)) in trajs.iter().zip(schedules).enumerate() {
        if s.num_sensors() != sensors || s.steps() != tr.len() {
            return Err(Error::shape(format!(
                "agent {m}: schedule is {}x{}, expected {sensors}x{}",
                s.num_sensors(),
                s.steps(),
                tr.len()
            )));
        }
        for i in 0..sensors {
            if !mask.is_onboard(m, i) && s.row(i).iter().any(|&v| v != 0.0) {
                return Err(Error::Constraint(format!(
                    "agent {m} schedules sensor {i}, which it does not carry"
                )));
            }
        }
    }
    Ok(())
}

/// Zeroes the rows of sensors `agent` does not carry.
pub fn apply_mask(sched: &SensingSchedule, mask: &SensorMask, agent: usize) -> Result<SensingSchedule> {
    if agent >= mask.num_agents() || sched.num_sensors() != mask.num_sensors() {
        return Err(Error::shape("mask and schedule do not line up"));
    }
    let mut out = sched.clone();
    for i in 0..sched.num_sensors() {
        if !mask.is_onboard(agent, i) {
            out.lambda[i * sched.steps..(i + 1) * sched.steps].fill(0.0);
        }
    }
    Ok(out)
}

/// Greedy rounding of a continuous schedule to a binary one that spends each
/// sensor's budget exactly, with at most one sensor per time step.
///
/// All `(sensor, t)` pairs are visited by decreasing `lambda` (ties: earlier
/// `t`, then lower sensor); a pair is accepted while its sensor has budget left
/// and its time slot is free.
pub fn project_budget(sched: &SensingSchedule, budget: &Budget) -> Result<SensingSchedule> {
    let (sensors, steps) = (sched.num_sensors(), sched.steps());
    if budget.per_sensor().len() != sensors {
        return Err(Error::shape(format!(
            "budget covers {} sensors, schedule has {sensors}",
            budget.per_sensor().len()
        )));
    }
    if !budget.is_feasible(steps) {
        return Err(Error::precondition(format!(
            "budget of {} measurements exceeds {steps} time slots",
            budget.total()
        )));
    }
    let mut pairs: Vec<(usize, usize)> = (0..steps)
        .flat_map(|t| (0..sensors).map(move |i| (i, t)))
        .collect();
    pairs.sort_by(|&(ia, ta), &(ib, tb)| {
        sched
            .get(ib, tb)
            .total_cmp(&sched.get(ia, ta))
            .then(ta.cmp(&tb))
            .then(ia.cmp(&ib))
    });
    let mut remaining = budget.per_sensor().to_vec();
    let mut taken = vec![false; steps];
    let mut out = vec![0.0; sensors * steps];
    let mut left = budget.total();
    for (i, t) in pairs {
        if left == 0 {
            break;
        }
        if remaining[i] > 0 && !taken[t] {
            remaining[i] -= 1;
            taken[t] = true;
            out[i * steps + t] = 1.0;
            left -= 1;
        }
    }
    debug_assert!(remaining.iter().all(|&r| r == 0));
    Ok(SensingSchedule::from_flat(sensors, steps, out, ScheduleMode::Binary))
}

/// Rounds a continuous schedule by systematic sampling of each row.
///
/// Row `i` is rescaled to mass `B_i` (uniform if it has none) and sensor `i`
/// measures at the first step where its cumulative mass reaches `j + 1/2`, for
/// `j < B_i`. Sensors claim slots in index order; a claimed slot moves to the
/// nearest free one, forward first on ties. Unlike [`project_budget`] this
/// keeps the spread of a smooth relaxed schedule instead of concentrating all
/// measurements where it peaks.
pub fn systematic_round(sched: &SensingSchedule, budget: &Budget) -> Result<SensingSchedule> {
    let (sensors, steps) = (sched.num_sensors(), sched.steps());
    if budget.per_sensor().len() != sensors {
        return Err(Error::shape(format!(
            "budget covers {} sensors, schedule has {sensors}",
            budget.per_sensor().len()
        )));
    }
    if !budget.is_feasible(steps) {
        return Err(Error::precondition(format!(
            "budget of {} measurements exceeds {steps} time slots",
            budget.total()
        )));
    }
    let mut taken = vec![false; steps];
    let mut out = vec![0.0; sensors * steps];
    for (i, &b) in budget.per_sensor().iter().enumerate() {
        if b == 0 {
            continue;
        }
        let row = sched.row(i);
        let mass: f64 = row.iter().map(|v| v.max(0.0)).sum();
        let scale = if mass > 0.0 { b as f64 / mass } else { 0.0 };
        let mut cum = 0.0;
        let mut j = 0usize;
        for (t, v) in row.iter().enumerate() {
            cum += if mass > 0.0 { v.max(0.0) * scale } else { b as f64 / steps as f64 };
            while j < b && cum >= j as f64 + 0.5 {
                let slot = nearest_free(&taken, t).expect("feasible budget leaves a free slot");
                taken[slot] = true;
                out[i * steps + slot] = 1.0;
                j += 1;
            }
        }
        // Rounding error can leave the last crossing unreached.
        while j < b {
            let slot = nearest_free(&taken, steps - 1).expect("feasible budget leaves a free slot");
            taken[slot] = true;
            out[i * steps + slot] = 1.0;
            j += 1;
        }
    }
    Ok(SensingSchedule::from_flat(sensors, steps, out, ScheduleMode::Binary))
}

/// Nearest unclaimed slot to `target`, forward first on ties.
pub(crate) fn nearest_free(taken: &[bool], target: usize) -> Option<usize> {
    let n = taken.len();
    (0..n).find_map(|off| {
        let fwd = target + off;
        if fwd < n && !taken[fwd] {
            return Some(fwd);
        }
        target.checked_sub(off).filter(|&b| !taken[b])
    })
}

/// Which terms of the objective are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum TermSet {
    /// Per-objective sparse terms, sparsity penalty and combined-map term.
    Full,
    /// Only the combined-map term with every state counted (standard ergodic).
    CombinedOnly,
}

/// One agent's basis table and flattened `sensors x steps` decision values.
pub(crate) struct AgentView<'a> {
    pub table: &'a BasisTable,
    pub steps: usize,
    pub lambda: &'a [f64],
}

pub(crate) struct MosseObjective<'a> {
    pub weights: &'a [f64],
    pub objectives: &'a [SpectralCoefficients],
    pub combined: &'a SpectralCoefficients,
    pub l1_weight: f64,
    pub terms: TermSet,
}

pub(crate) struct MosseEvaluation {
    pub terms: MosseTerms,
    /// Per agent, `steps x dims` partials with respect to the states.
    pub state_grads: Vec<Vec<f64>>,
    /// Per agent, `sensors x steps` partials with respect to `lambda`.
    pub lambda_grads: Vec<Vec<f64>>,
}

impl MosseObjective<'_> {
    pub fn evaluate(&self, agents: &[AgentView<'_>], with_gradient: bool) -> Result<MosseEvaluation> {
        let k_count = self.weights.len();
        let n = self.objectives.len();
        let full = self.terms == TermSet::Full;

        let mut pooled = vec![0.0; if full { n * k_count } else { 0 }];
        let mut masses = vec![0.0; if full { n } else { 0 }];
        let mut all = vec![0.0; k_count];
        let mut total_states = 0usize;
        let mut lambda_mass = 0.0;
        for a in agents {
            for t in 0..a.steps {
                let f = a.table.point_values(t);
                for (acc, v) in all.iter_mut().zip(f) {
                    *acc += v;
                }
                if full {
                    for i in 0..n {
                        let l = a.lambda[i * a.steps + t];
                        if l == 0.0 {
                            continue;
                        }
                        masses[i] += l;
                        let row = &mut pooled[i * k_count..(i + 1) * k_count];
                        for (acc, v) in row.iter_mut().zip(f) {
                            *acc += l * v;
                        }
                    }
                }
            }
            total_states += a.steps;
            if full {
                lambda_mass += a.lambda.iter().sum::<f64>();
            }
        }
        if full {
            if let Some(i) = masses.iter().position(|&w| w <= 0.0) {
                return Err(Error::degenerate(format!(
                    "no measurement mass for objective {i}"
                )));
            }
            for i in 0..n {
                let w = masses[i];
                pooled[i * k_count..(i + 1) * k_count]
                    .iter_mut()
                    .for_each(|v| *v /= w);
            }
        }
        let inv_states = 1.0 / total_states as f64;
        all.iter_mut().for_each(|v| *v *= inv_states);

        let per_objective: Vec<f64> = (0..if full { n } else { 0 })
            .map(|i| {
                weighted_distance(
                    self.weights,
                    &pooled[i * k_count..(i + 1) * k_count],
                    self.objectives[i].values(),
                )
            })
            .collect();
        let penalty = if full { self.l1_weight * lambda_mass } else { 0.0 };
        let combined = weighted_distance(self.weights, &all, self.combined.values());
        let terms = MosseTerms {
            per_objective,
            penalty,
            combined,
        };
        if !with_gradient {
            return Ok(MosseEvaluation {
                terms,
                state_grads: Vec::new(),
                lambda_grads: Vec::new(),
            });
        }

        // beta = 2 alpha (c - xi); dPhi/dc_k = beta_k.
        let beta_combined: Vec<f64> = (0..k_count)
            .map(|k| 2.0 * self.weights[k] * (all[k] - self.combined.values()[k]) * inv_states)
            .collect();
        let mut beta = vec![0.0; if full { n * k_count } else { 0 }];
        let mut beta_dot_c = vec![0.0; if full { n } else { 0 }];
        for i in 0..if full { n } else { 0 } {
            let xi = self.objectives[i].values();
            let mut dot = 0.0;
            for k in 0..k_count {
                let c = pooled[i * k_count + k];
                let b = 2.0 * self.weights[k] * (c - xi[k]);
                beta[i * k_count + k] = b;
                dot += b * c;
            }
            beta_dot_c[i] = dot;
        }

        let mut state_grads = Vec::with_capacity(agents.len());
        let mut lambda_grads = Vec::with_capacity(agents.len());
        let mut point_beta = vec![0.0; k_count];
        for a in agents {
            let dims = a.table.dims;
            let mut sg = vec![0.0; a.steps * dims];
            let mut lg = vec![0.0; if full { n * a.steps } else { 0 }];
            for t in 0..a.steps {
                point_beta.copy_from_slice(&beta_combined);
                if full {
                    let f = a.table.point_values(t);
                    for i in 0..n {
                        let b = &beta[i * k_count..(i + 1) * k_count];
                        let bf: f64 = b.iter().zip(f).map(|(x, y)| x * y).sum();
                        lg[i * a.steps + t] = (bf - beta_dot_c[i]) / masses[i] + self.l1_weight;
                        let l = a.lambda[i * a.steps + t];
                        if l != 0.0 {
                            let s = l / masses[i];
                            for (pb, bk) in point_beta.iter_mut().zip(b) {
                                *pb += s * bk;
                            }
                        }
                    }
                }
                let g = a.table.point_gradients(t);
                let out = &mut sg[t * dims..(t + 1) * dims];
                for (k, pb) in point_beta.iter().enumerate() {
                    for j in 0..dims {
                        out[j] += pb * g[k * dims + j];
                    }
                }
            }
            state_grads.push(sg);
            lambda_grads.push(lg);
        }
        Ok(MosseEvaluation {
            terms,
            state_grads,
            lambda_grads,
        })
    }
}
