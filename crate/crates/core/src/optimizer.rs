//! Joint first-order optimization of controls and continuous sensing
//! decisions: single-integrator rollout, adjoint gradients of the
//! multi-objective sparse-sensing metric, and projected gradient descent with
//! Armijo backtracking.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::TeamScenario;
use crate::sparse::{
    project_budget, systematic_round, AgentView, Budget, MosseObjective, MosseTerms, ScheduleMode, SensingSchedule,
    SensorMask, TermSet,
};
use crate::spectral::{Basis, SpectralCoefficients, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DynamicsKind {
    /// `x' = u`.
    #[default]
    SingleIntegrator,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicsModel {
    #[serde(default)]
    pub kind: DynamicsKind,
    pub u_max: f64,
    pub dt: f64,
}

impl Default for DynamicsModel {
    fn default() -> Self {
        DynamicsModel {
            kind: DynamicsKind::SingleIntegrator,
            u_max: 0.5,
            dt: 0.1,
        }
    }
}

impl DynamicsModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.u_max > 0.0 && self.u_max.is_finite()) {
            return Err(Error::Config("u_max must be positive".into()));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config("dt must be positive".into()));
        }
        Ok(())
    }
}

/// Feasible set used for the relaxed decisions during descent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaProjection {
    /// Clip each decision to `[0, 1]`.
    Box,
    /// Keep each row in `[0, 1]` with its mass equal to the sensor's budget.
    #[default]
    Budget,
}

/// How the relaxed decisions are turned into a binary schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rounding {
    /// [`project_budget`]: largest decisions first.
    Greedy,
    /// [`systematic_round`]: measurements spread by cumulative decision mass.
    #[default]
    Systematic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Trial step of the first line search.
    pub step_size: f64,
    pub backtrack_factor: f64,
    pub armijo: f64,
    /// Stop once an accepted step decreases the objective by less than this fraction.
    pub tol: f64,
    pub max_backtracks: usize,
    pub lambda_projection: LambdaProjection,
    pub rounding: Rounding,
    pub seed: u64,
    /// Explicit per-agent initialization seeds; derived from `seed` when absent.
    pub agent_seeds: Option<Vec<u64>>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iters: 300,
            step_size: 0.1,
            backtrack_factor: 0.5,
            armijo: 1e-4,
            tol: 1e-7,
            max_backtracks: 50,
            lambda_projection: LambdaProjection::Budget,
            rounding: Rounding::Systematic,
            seed: 0,
            agent_seeds: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::Config("step_size must be positive".into()));
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return Err(Error::Config("backtrack_factor must lie in (0, 1)".into()));
        }
        if !(self.armijo > 0.0 && self.armijo < 1.0) {
            return Err(Error::Config("armijo constant must lie in (0, 1)".into()));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::Config("tol must be positive".into()));
        }
        if self.max_backtracks == 0 {
            return Err(Error::Config("max_backtracks must be positive".into()));
        }
        Ok(())
    }
}

/// Integrates `x(t+1) = clamp(x(t) + dt * u(t))` after clipping each control
/// to `|u| <= u_max`.
pub fn rollout(x0: &[f64], controls: &[Vec<f64>], model: &DynamicsModel) -> Result<Trajectory> {
    if x0.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::Domain { point: x0.to_vec() });
    }
    if controls.iter().any(|u| u.len() != x0.len()) {
        return Err(Error::shape("control dimension differs from the start point"));
    }
    let d = x0.len();
    let flat: Vec<f64> = controls.iter().flatten().copied().collect();
    let (states, clipped, _) = integrate(x0, &flat, d, model);
    let states: Vec<Vec<f64>> = states.chunks(d).map(<[f64]>::to_vec).collect();
    let controls: Vec<Vec<f64>> = clipped.chunks(d).map(<[f64]>::to_vec).collect();
    Trajectory::new(states, controls, model.dt)
}

fn clip_to_ball(u: &mut [f64], radius: f64) {
    let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > radius {
        let s = radius / norm;
        u.iter_mut().for_each(|v| *v *= s);
    }
}

/// Returns flattened states, clipped controls and, per state component,
/// whether it was left unclamped.
fn integrate(x0: &[f64], controls: &[f64], d: usize, model: &DynamicsModel) -> (Vec<f64>, Vec<f64>, Vec<bool>) {
    let steps = controls.len() / d;
    let mut states = Vec::with_capacity((steps + 1) * d);
    let mut free = Vec::with_capacity((steps + 1) * d);
    let mut clipped = controls.to_vec();
    states.extend_from_slice(x0);
    free.extend(std::iter::repeat_n(true, d));
    for t in 0..steps {
        let u = &mut clipped[t * d..(t + 1) * d];
        clip_to_ball(u, model.u_max);
        for j in 0..d {
            let raw = states[t * d + j] + model.dt * u[j];
            free.push((0.0..=1.0).contains(&raw));
            states.push(raw.clamp(0.0, 1.0));
        }
    }
    (states, clipped, free)
}

/// Objective minimized by [`solve`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanObjective {
    /// Per-sensor sparse terms, sparsity penalty and the combined-map term.
    Mosse,
    /// Combined-map term only, every state counted (`lambda` fixed at 1, no penalty).
    StandardErgodic,
}

/// All decision variables of a team: controls (`agents x horizon x dims`) and
/// relaxed decisions (`agents x sensors x (horizon + 1)`), both flattened.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionVars {
    pub agents: usize,
    pub horizon: usize,
    pub dims: usize,
    pub sensors: usize,
    pub controls: Vec<f64>,
    pub lambda: Vec<f64>,
}

impl DecisionVars {
    pub fn zeros(agents: usize, horizon: usize, dims: usize, sensors: usize) -> Self {
        DecisionVars {
            agents,
            horizon,
            dims,
            sensors,
            controls: vec![0.0; agents * horizon * dims],
            lambda: vec![0.0; agents * sensors * (horizon + 1)],
        }
    }

    pub fn steps(&self) -> usize {
        self.horizon + 1
    }

    pub fn len(&self) -> usize {
        self.controls.len() + self.lambda.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn agent_controls(&self, m: usize) -> &[f64] {
        let n = self.horizon * self.dims;
        &self.controls[m * n..(m + 1) * n]
    }

    pub fn agent_lambda(&self, m: usize) -> &[f64] {
        let n = self.sensors * self.steps();
        &self.lambda[m * n..(m + 1) * n]
    }

    pub fn agent_lambda_mut(&mut self, m: usize) -> &mut [f64] {
        let n = self.sensors * self.steps();
        &mut self.lambda[m * n..(m + 1) * n]
    }

    pub fn get(&self, i: usize) -> f64 {
        if i < self.controls.len() {
            self.controls[i]
        } else {
            self.lambda[i - self.controls.len()]
        }
    }

    pub fn set(&mut self, i: usize, v: f64) {
        if i < self.controls.len() {
            self.controls[i] = v;
        } else {
            let off = self.controls.len();
            self.lambda[i - off] = v;
        }
    }

    pub fn dot(&self, other: &DecisionVars) -> f64 {
        let c: f64 = self.controls.iter().zip(&other.controls).map(|(a, b)| a * b).sum();
        let l: f64 = self.lambda.iter().zip(&other.lambda).map(|(a, b)| a * b).sum();
        c + l
    }

    pub fn schedule(&self, m: usize) -> SensingSchedule {
        SensingSchedule::from_flat(
            self.sensors,
            self.steps(),
            self.agent_lambda(m).to_vec(),
            ScheduleMode::Continuous,
        )
    }
}

/// A scenario compiled into the quantities the solver needs.
#[derive(Debug, Clone)]
pub struct Problem {
    basis: Basis,
    objectives: Vec<SpectralCoefficients>,
    combined: SpectralCoefficients,
    starts: Vec<Vec<f64>>,
    mask: SensorMask,
    budgets: Vec<Budget>,
    dynamics: DynamicsModel,
    horizon: usize,
    l1_weight: f64,
    objective: PlanObjective,
}

impl Problem {
    pub fn new(scenario: &TeamScenario, objective: PlanObjective) -> Result<Self> {
        scenario.validate()?;
        Ok(Problem {
            basis: Basis::new(scenario.basis)?,
            objectives: scenario.objective_coefficients()?,
            combined: scenario.combined_coefficients()?,
            starts: scenario.starts.clone(),
            mask: scenario.mask.clone(),
            budgets: scenario.budgets()?,
            dynamics: scenario.dynamics,
            horizon: scenario.horizon,
            l1_weight: scenario.l1_weight,
            objective,
        })
    }

    pub fn objective(&self) -> PlanObjective {
        self.objective
    }

    pub fn budgets(&self) -> &[Budget] {
        &self.budgets
    }

    pub fn num_agents(&self) -> usize {
        self.starts.len()
    }

    pub fn num_sensors(&self) -> usize {
        self.objectives.len()
    }

    pub fn dims(&self) -> usize {
        self.basis.config().dims
    }

    fn terms(&self) -> TermSet {
        match self.objective {
            PlanObjective::Mosse => TermSet::Full,
            PlanObjective::StandardErgodic => TermSet::CombinedOnly,
        }
    }

    fn check_shape(&self, vars: &DecisionVars) -> Result<()> {
        if vars.agents != self.num_agents()
            || vars.horizon != self.horizon
            || vars.dims != self.dims()
            || vars.sensors != self.num_sensors()
            || vars.controls.len() != vars.agents * vars.horizon * vars.dims
            || vars.lambda.len() != vars.agents * vars.sensors * vars.steps()
        {
            return Err(Error::shape("decision variables do not match the problem"));
        }
        Ok(())
    }

    /// Rolls out every agent.
    pub fn trajectories(&self, vars: &DecisionVars) -> Result<Vec<Trajectory>> {
        self.check_shape(vars)?;
        let d = self.dims();
        (0..self.num_agents())
            .map(|m| {
                let controls: Vec<Vec<f64>> =
                    vars.agent_controls(m).chunks(d).map(<[f64]>::to_vec).collect();
                rollout(&self.starts[m], &controls, &self.dynamics)
            })
            .collect()
    }

    fn rollouts(&self, vars: &DecisionVars) -> Vec<(Vec<Vec<f64>>, Vec<bool>)> {
        let d = self.dims();
        (0..self.num_agents())
            .map(|m| {
                let (states, _, free) = integrate(&self.starts[m], vars.agent_controls(m), d, &self.dynamics);
                (states.chunks(d).map(<[f64]>::to_vec).collect(), free)
            })
            .collect()
    }

    fn evaluate_inner(&self, vars: &DecisionVars, with_gradient: bool) -> Result<(MosseTerms, Option<DecisionVars>)> {
        self.check_shape(vars)?;
        let rolled = self.rollouts(vars);
        let tables: Vec<_> = rolled
            .iter()
            .map(|(states, _)| self.basis.tabulate(states, with_gradient))
            .collect();
        let agents: Vec<AgentView<'_>> = tables
            .iter()
            .enumerate()
            .map(|(m, table)| AgentView {
                table,
                steps: vars.steps(),
                lambda: vars.agent_lambda(m),
            })
            .collect();
        let objective = MosseObjective {
            weights: self.basis.weights(),
            objectives: &self.objectives,
            combined: &self.combined,
            l1_weight: self.l1_weight,
            terms: self.terms(),
        };
        let eval = objective.evaluate(&agents, with_gradient)?;
        if !with_gradient {
            return Ok((eval.terms, None));
        }
        let d = self.dims();
        let horizon = self.horizon;
        let mut grad = DecisionVars::zeros(vars.agents, horizon, d, vars.sensors);
        for (m, (_, free)) in rolled.iter().enumerate() {
            // Adjoint sweep: a(t) = g(t) + a(t+1) masked by unclamped components.
            let g = &eval.state_grads[m];
            let gu = &mut grad.controls[m * horizon * d..(m + 1) * horizon * d];
            let mut adj = g[horizon * d..(horizon + 1) * d].to_vec();
            for t in (0..horizon).rev() {
                for j in 0..d {
                    let pass = if free[(t + 1) * d + j] { adj[j] } else { 0.0 };
                    gu[t * d + j] = self.dynamics.dt * pass;
                    adj[j] = g[t * d + j] + pass;
                }
            }
            if self.objective == PlanObjective::Mosse {
                let lg = grad.agent_lambda_mut(m);
                lg.copy_from_slice(&eval.lambda_grads[m]);
                let steps = horizon + 1;
                for i in 0..vars.sensors {
                    if !self.mask.is_onboard(m, i) {
                        lg[i * steps..(i + 1) * steps].fill(0.0);
                    }
                }
            }
        }
        Ok((eval.terms, Some(grad)))
    }

    /// Objective terms at `vars`.
    pub fn terms_at(&self, vars: &DecisionVars) -> Result<MosseTerms> {
        Ok(self.evaluate_inner(vars, false)?.0)
    }

    /// Objective value; `+inf` when a measurement pool is empty.
    pub fn value(&self, vars: &DecisionVars) -> f64 {
        match self.evaluate_inner(vars, false) {
            Ok((terms, _)) => terms.total(),
            Err(_) => f64::INFINITY,
        }
    }

    /// Objective value and its gradient with respect to every decision variable.
    /// Clamped state components contribute zero partials; masked decision rows
    /// (and all decisions for the standard objective) get zero gradient.
    pub fn value_and_gradient(&self, vars: &DecisionVars) -> Result<(f64, DecisionVars)> {
        let (terms, grad) = self.evaluate_inner(vars, true)?;
        Ok((terms.total(), grad.expect("gradient requested")))
    }

    /// Projects onto the feasible set: control norm ball, decisions in `[0, 1]`
    /// (with budget mass under [`LambdaProjection::Budget`]), zero rows for
    /// sensors an agent does not carry.
    pub fn project(&self, vars: &mut DecisionVars, mode: LambdaProjection) {
        let d = vars.dims;
        for u in vars.controls.chunks_mut(d) {
            clip_to_ball(u, self.dynamics.u_max);
        }
        let steps = vars.steps();
        for m in 0..vars.agents {
            let sensors = vars.sensors;
            let lam = vars.agent_lambda_mut(m);
            for i in 0..sensors {
                let row = &mut lam[i * steps..(i + 1) * steps];
                if !self.mask.is_onboard(m, i) {
                    row.fill(0.0);
                } else if mode == LambdaProjection::Budget && self.objective == PlanObjective::Mosse {
                    project_capped_simplex(row, self.budgets[m].per_sensor()[i] as f64);
                } else {
                    row.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
                }
            }
        }
    }

    /// Decision values reset to each sensor's budget fraction (zero off-board).
    fn budget_fraction_lambda(&self, vars: &mut DecisionVars) {
        let steps = vars.steps();
        let sensors = vars.sensors;
        for m in 0..vars.agents {
            let fractions = match self.objective {
                PlanObjective::Mosse => self.budgets[m].fractions(steps),
                PlanObjective::StandardErgodic => vec![1.0; sensors],
            };
            let lam = vars.agent_lambda_mut(m);
            for i in 0..sensors {
                let v = if self.mask.is_onboard(m, i) { fractions[i] } else { 0.0 };
                lam[i * steps..(i + 1) * steps].fill(v);
            }
        }
    }

    /// Seeded initial point: controls uniform in `+-0.1 u_max` per component,
    /// decisions at the budget fraction (1 for the standard objective).
    pub fn initialize(&self, seed: u64, agent_seeds: Option<&[u64]>) -> Result<DecisionVars> {
        let agents = self.num_agents();
        let seeds: Vec<u64> = match agent_seeds {
            Some(s) if s.len() == agents => s.to_vec(),
            Some(s) => {
                return Err(Error::Config(format!(
                    "{} agent seeds for {agents} agents",
                    s.len()
                )))
            }
            None => (0..agents as u64).map(|m| derive_seed(seed, m)).collect(),
        };
        let mut vars = DecisionVars::zeros(agents, self.horizon, self.dims(), self.num_sensors());
        let bound = 0.1 * self.dynamics.u_max;
        let per_agent = self.horizon * self.dims();
        for (m, &s) in seeds.iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            for u in &mut vars.controls[m * per_agent..(m + 1) * per_agent] {
                *u = rng.gen_range(-bound..=bound);
            }
        }
        self.budget_fraction_lambda(&mut vars);
        Ok(vars)
    }
}

/// Euclidean projection onto `{0 <= v <= 1, sum v = mass}`, found by bisection
/// on the shift `tau` in `clamp(v - tau, 0, 1)`.
pub fn project_capped_simplex(row: &mut [f64], mass: f64) {
    let n = row.len() as f64;
    let mass = mass.clamp(0.0, n);
    let sum: f64 = row.iter().sum();
    if row.iter().all(|v| (0.0..=1.0).contains(v)) && (sum - mass).abs() <= 1e-12 * mass.max(1.0) {
        return;
    }
    let total = |tau: f64, row: &[f64]| row.iter().map(|v| (v - tau).clamp(0.0, 1.0)).sum::<f64>();
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = row.iter().copied().fold(f64::INFINITY, f64::min);
    // total(lo) = n >= mass, total(hi) = 0 <= mass.
    let (mut lo, mut hi) = (min - 1.0, max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if total(mid, row) > mass {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * (1.0 + hi.abs()) {
            break;
        }
    }
    let tau = 0.5 * (lo + hi);
    row.iter_mut().for_each(|v| *v = (*v - tau).clamp(0.0, 1.0));
}

/// Mixes a base seed with a stream index (SplitMix64 finalizer).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(stream.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seeded initialization of a scenario's decision variables.
pub fn initialize(scenario: &TeamScenario, seed: u64) -> Result<DecisionVars> {
    Problem::new(scenario, PlanObjective::Mosse)?.initialize(seed, None)
}

/// Gradient of the multi-objective sparse-sensing metric at `vars`.
pub fn mosse_gradient(vars: &DecisionVars, scenario: &TeamScenario) -> Result<DecisionVars> {
    Ok(Problem::new(scenario, PlanObjective::Mosse)?
        .value_and_gradient(vars)?
        .1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanResult {
    pub objective: PlanObjective,
    pub trajectories: Vec<Trajectory>,
    pub continuous_schedules: Vec<SensingSchedule>,
    pub binary_schedules: Vec<SensingSchedule>,
    /// Objective value at the initial point and after every accepted step.
    pub objective_trace: Vec<f64>,
    pub final_objective: f64,
    pub final_terms: MosseTerms,
    pub iterations: usize,
    pub restarted: bool,
}

/// Result of the descent loop alone.
#[derive(Debug, Clone)]
pub struct Descent {
    pub vars: DecisionVars,
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub restarted: bool,
}

/// Projected gradient descent with Armijo backtracking from `init`.
pub fn descend(problem: &Problem, init: DecisionVars, cfg: &SolverConfig) -> Result<Descent> {
    cfg.validate()?;
    let mut x = init;
    problem.project(&mut x, cfg.lambda_projection);
    let mut restarted = false;
    let mut current = problem.value_and_gradient(&x);
    if current.as_ref().map(|(f, _)| !f.is_finite()).unwrap_or(true) {
        restarted = true;
        problem.budget_fraction_lambda(&mut x);
        current = problem.value_and_gradient(&x);
    }
    let (mut f, mut g) = match current {
        Ok((f, g)) if f.is_finite() => (f, g),
        Ok(_) => return Err(Error::Solver("objective is not finite after restart".into())),
        Err(e) => return Err(Error::Solver(format!("objective undefined after restart: {e}"))),
    };
    let mut trace = vec![f];
    let mut step = cfg.step_size;
    let mut iterations = 0;
    'outer: for _ in 0..cfg.max_iters {
        let mut trial_step = step;
        let mut accepted = None;
        for _ in 0..cfg.max_backtracks {
            let mut trial = x.clone();
            for (v, gv) in trial.controls.iter_mut().zip(&g.controls) {
                *v -= trial_step * gv;
            }
            for (v, gv) in trial.lambda.iter_mut().zip(&g.lambda) {
                *v -= trial_step * gv;
            }
            problem.project(&mut trial, cfg.lambda_projection);
            let mut decrease_bound = 0.0;
            for i in 0..x.len() {
                decrease_bound += g.get(i) * (trial.get(i) - x.get(i));
            }
            if decrease_bound == 0.0 {
                // Projected step is null: stationary point of the constrained problem.
                break 'outer;
            }
            let f_trial = problem.value(&trial);
            if f_trial.is_finite() && f_trial <= f + cfg.armijo * decrease_bound {
                accepted = Some((trial, f_trial));
                break;
            }
            trial_step *= cfg.backtrack_factor;
        }
        let Some((trial, f_trial)) = accepted else {
            break;
        };
        iterations += 1;
        let rel = (f - f_trial) / f.abs().max(1e-300);
        x = trial;
        trace.push(f_trial);
        // Warm start: the next search begins from twice the accepted step.
        step = trial_step / cfg.backtrack_factor;
        if rel < cfg.tol {
            break;
        }
        let (f_new, g_new) = problem.value_and_gradient(&x)?;
        f = f_new;
        g = g_new;
    }
    Ok(Descent {
        vars: x,
        trace,
        iterations,
        restarted,
    })
}

/// Solves `problem` from its seeded initialization and rounds the decisions to
/// budget-feasible binary schedules.
pub fn solve_problem(problem: &Problem, cfg: &SolverConfig) -> Result<PlanResult> {
    let init = problem.initialize(cfg.seed, cfg.agent_seeds.as_deref())?;
    let descent = descend(problem, init, cfg)?;
    let trajectories = problem.trajectories(&descent.vars)?;
    let continuous: Vec<SensingSchedule> = (0..problem.num_agents())
        .map(|m| descent.vars.schedule(m))
        .collect();
    let binary = match problem.objective {
        PlanObjective::Mosse => continuous
            .iter()
            .zip(problem.budgets())
            .map(|(s, b)| match cfg.rounding {
                Rounding::Greedy => project_budget(s, b),
                Rounding::Systematic => systematic_round(s, b),
            })
            .collect::<Result<Vec<_>>>()?,
        PlanObjective::StandardErgodic => Vec::new(),
    };
    let final_terms = problem.terms_at(&descent.vars)?;
    Ok(PlanResult {
        objective: problem.objective,
        trajectories,
        continuous_schedules: continuous,
        binary_schedules: binary,
        final_objective: *descent.trace.last().expect("trace starts with the initial value"),
        objective_trace: descent.trace,
        final_terms,
        iterations: descent.iterations,
        restarted: descent.restarted,
    })
}

/// Minimizes the multi-objective sparse-sensing metric for a scenario.
pub fn solve(scenario: &TeamScenario, cfg: &SolverConfig) -> Result<PlanResult> {
    solve_problem(&Problem::new(scenario, PlanObjective::Mosse)?, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn model() -> DynamicsModel {
        DynamicsModel {
            kind: DynamicsKind::SingleIntegrator,
            u_max: 0.5,
            dt: 0.01,
        }
    }

    #[test]
    fn zero_controls_stay_put() {
        let tr = rollout(&[0.3, 0.6], &vec![vec![0.0, 0.0]; 5], &model()).unwrap();
        assert!(tr.states().iter().all(|s| s == &vec![0.3, 0.6]));
    }

    #[test]
    fn constant_max_control_moves_in_a_line() {
        let m = model();
        let tr = rollout(&[0.5, 0.5], &vec![vec![m.u_max, 0.0]; 10], &m).unwrap();
        let last = tr.states().last().unwrap();
        assert_abs_diff_eq!(last[0] - 0.5, 10.0 * m.dt * m.u_max, epsilon = 1e-12);
        assert_eq!(last[1], 0.5);
    }

    #[test]
    fn excess_controls_are_clipped() {
        let m = model();
        let tr = rollout(&[0.5, 0.5], &[vec![3.0, 4.0]], &m).unwrap();
        let u = &tr.controls()[0];
        assert_abs_diff_eq!((u[0] * u[0] + u[1] * u[1]).sqrt(), m.u_max, epsilon = 1e-12);
        assert_abs_diff_eq!(u[0] / u[1], 0.75, epsilon = 1e-12);
    }

    #[test]
    fn states_clamp_to_domain() {
        let m = DynamicsModel { u_max: 10.0, dt: 1.0, ..model() };
        let tr = rollout(&[0.9, 0.1], &[vec![1.0, -1.0]], &m).unwrap();
        assert_eq!(tr.states()[1], vec![1.0, 0.0]);
        assert!(rollout(&[1.5, 0.0], &[], &m).is_err());
    }

    #[test]
    fn seeds_are_mixed() {
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
        assert_eq!(derive_seed(7, 3), derive_seed(7, 3));
    }

    #[test]
    fn solver_config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        let bad = SolverConfig { backtrack_factor: 1.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = SolverConfig { step_size: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
