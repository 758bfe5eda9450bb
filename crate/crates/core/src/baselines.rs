//! Comparison planners and the shared coverage scoreboard.
//!
//! Both baselines reuse a standard ergodic trajectory optimized against the
//! combined map and differ only in where along it measurements are taken.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maps::ObjectiveMap;
use crate::optimizer::{solve_problem, PlanObjective, PlanResult, Problem, SolverConfig};
use crate::scenario::TeamScenario;
use crate::sparse::{nearest_free, Budget, ScheduleMode, SensingSchedule};
use crate::spectral::{weighted_distance, Basis, SpectralCoefficients, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Uniform,
    Probabilistic,
}

impl BaselineKind {
    pub fn label(self) -> &'static str {
        match self {
            BaselineKind::Uniform => "uniform",
            BaselineKind::Probabilistic => "probabilistic",
        }
    }
}

/// Standard ergodic optimization of the team against the combined map, with
/// every state counted and no sparsity penalty.
pub fn plan_standard_ergodic(scenario: &TeamScenario, cfg: &SolverConfig) -> Result<PlanResult> {
    solve_problem(&Problem::new(scenario, PlanObjective::StandardErgodic)?, cfg)
}

fn check_budget(steps: usize, budget: &Budget, sensors: usize) -> Result<()> {
    if budget.per_sensor().len() != sensors {
        return Err(Error::shape(format!(
            "budget covers {} sensors, expected {sensors}",
            budget.per_sensor().len()
        )));
    }
    if steps == 0 || !budget.is_feasible(steps) {
        return Err(Error::precondition(format!(
            "budget of {} measurements exceeds {steps} time slots",
            budget.total()
        )));
    }
    Ok(())
}

/// Evenly spaced measurements over `steps` states, endpoints included.
///
/// Sensor `i` targets `round(j (steps - 1) / (B_i - 1))`; a single measurement
/// goes to the midpoint. A target already claimed by an earlier sensor moves
/// to the nearest free slot, forward first on ties.
pub fn uniform_schedule(steps: usize, budget: &Budget, sensors: usize) -> Result<SensingSchedule> {
    check_budget(steps, budget, sensors)?;
    let last = (steps - 1) as f64;
    let mut taken = vec![false; steps];
    let mut out = vec![0.0; sensors * steps];
    for (i, &b) in budget.per_sensor().iter().enumerate() {
        for j in 0..b {
            let target = if b == 1 {
                (last / 2.0).round() as usize
            } else {
                (j as f64 * last / (b - 1) as f64).round() as usize
            };
            let slot = nearest_free(&taken, target).expect("feasible budget leaves a free slot");
            taken[slot] = true;
            out[i * steps + slot] = 1.0;
        }
    }
    Ok(SensingSchedule::from_flat(sensors, steps, out, ScheduleMode::Binary))
}

/// Measurements drawn without replacement with probability proportional to
/// each sensor's map value at the trajectory state. Sensors claim slots in
/// index order; once no positive-weight slot remains the rest are drawn
/// uniformly from the free slots.
pub fn probabilistic_schedule(
    traj: &Trajectory,
    maps: &[ObjectiveMap],
    budget: &Budget,
    seed: u64,
) -> Result<SensingSchedule> {
    if traj.dims() != 2 {
        return Err(Error::precondition("probabilistic sampling needs 2-D states"));
    }
    let steps = traj.len();
    let sensors = maps.len();
    check_budget(steps, budget, sensors)?;
    if let Some(m) = maps.iter().find(|m| !m.is_normalized()) {
        return Err(Error::precondition(format!("map '{}' is not normalized", m.name())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut taken = vec![false; steps];
    let mut out = vec![0.0; sensors * steps];
    for (i, (&b, map)) in budget.per_sensor().iter().zip(maps).enumerate() {
        if b == 0 {
            continue;
        }
        let weighted: Vec<(usize, f64)> = traj
            .states()
            .iter()
            .enumerate()
            .filter(|&(t, _)| !taken[t])
            .map(|(t, s)| (t, map.value_at(s[0], s[1])))
            .filter(|&(_, w)| w > 0.0)
            .collect();
        let mut picked: Vec<usize> = weighted
            .choose_multiple_weighted(&mut rng, b.min(weighted.len()), |&(_, w)| w)
            .map_err(|e| Error::degenerate(format!("sampling weights: {e}")))?
            .map(|&(t, _)| t)
            .collect();
        for &t in &picked {
            taken[t] = true;
        }
        if picked.len() < b {
            let free: Vec<usize> = (0..steps).filter(|&t| !taken[t]).collect();
            let extra: Vec<usize> = free.choose_multiple(&mut rng, b - picked.len()).copied().collect();
            for &t in &extra {
                taken[t] = true;
            }
            picked.extend(extra);
        }
        for t in picked {
            out[i * steps + t] = 1.0;
        }
    }
    Ok(SensingSchedule::from_flat(sensors, steps, out, ScheduleMode::Binary))
}

/// Scores each objective on the states where the team measured it.
///
/// Entry `i` is the ergodic metric between `xis[i]` and the average of the basis
/// functions over every selected sensor-`i` location of every agent, or `None`
/// when no agent measured objective `i`.
pub fn evaluate_coverage(
    trajs: &[Trajectory],
    schedules: &[SensingSchedule],
    xis: &[SpectralCoefficients],
) -> Result<Vec<Option<f64>>> {
    if trajs.len() != schedules.len() {
        return Err(Error::shape(format!(
            "{} trajectories and {} schedules",
            trajs.len(),
            schedules.len()
        )));
    }
    let Some(first) = xis.first() else {
        return Ok(Vec::new());
    };
    let cfg = *first.basis();
    if xis.iter().any(|x| x.basis() != &cfg) {
        return Err(Error::shape("objective coefficients use different bases"));
    }
    let basis = Basis::new(cfg)?;
    let k_count = basis.len();
    let n = xis.len();
    let mut sums = vec![0.0; n * k_count];
    let mut counts = vec![0.0; n];
    for (traj, sched) in trajs.iter().zip(schedules) {
        if sched.num_sensors() != n || sched.steps() != traj.len() {
            return Err(Error::shape("schedule does not match trajectory and objectives"));
        }
        if traj.dims() != cfg.dims {
            return Err(Error::shape("trajectory dimension differs from the basis"));
        }
        let table = basis.tabulate(traj.states(), false);
        for i in 0..n {
            let row = sched.row(i);
            for (t, &l) in row.iter().enumerate() {
                if l == 0.0 {
                    continue;
                }
                counts[i] += l;
                let f = table.point_values(t);
                for (acc, v) in sums[i * k_count..(i + 1) * k_count].iter_mut().zip(f) {
                    *acc += l * v;
                }
            }
        }
    }
    Ok((0..n)
        .map(|i| {
            (counts[i] > 0.0).then(|| {
                let c: Vec<f64> = sums[i * k_count..(i + 1) * k_count]
                    .iter()
                    .map(|v| v / counts[i])
                    .collect();
                weighted_distance(basis.weights(), &c, xis[i].values())
            })
        })
        .collect())
}

/// Per-agent schedules of one baseline on a shared standard ergodic plan.
pub fn baseline_schedules(
    kind: BaselineKind,
    scenario: &TeamScenario,
    trajs: &[Trajectory],
    seed: u64,
) -> Result<Vec<SensingSchedule>> {
    let budgets = scenario.budgets()?;
    trajs
        .iter()
        .zip(&budgets)
        .enumerate()
        .map(|(m, (traj, budget))| match kind {
            BaselineKind::Uniform => uniform_schedule(traj.len(), budget, scenario.num_sensors()),
            BaselineKind::Probabilistic => probabilistic_schedule(
                traj,
                &scenario.maps,
                budget,
                crate::optimizer::derive_seed(seed, m as u64),
            ),
        })
        .collect()
}
