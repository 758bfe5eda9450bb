//! Experiment campaigns: seeded trial generation, TOPSIS weighting from pilot
//! solves, execution of every planner on identical scenarios, and CSV output.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baselines::{baseline_schedules, evaluate_coverage, plan_standard_ergodic, BaselineKind};
use crate::error::{Error, Result};
use crate::geo::{raycast_shade, slope_objective, sobel_slope, threshold_entropy, Dem, SlopeMode, SunVector};
use crate::maps::{synth_gaussian_map, topsis_select, weight_grid, GaussianPeak, ObjectiveMap, WeightVector};
use crate::optimizer::{derive_seed, solve, DynamicsModel, SolverConfig};
use crate::scenario::{TeamScenario, DEFAULT_L1_WEIGHT};
use crate::sparse::{SensingSchedule, SensorMask};
use crate::spectral::{BasisConfig, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Planner {
    Mosse,
    Uniform,
    Probabilistic,
}

impl Planner {
    pub const ALL: [Planner; 3] = [Planner::Mosse, Planner::Uniform, Planner::Probabilistic];

    pub fn label(self) -> &'static str {
        match self {
            Planner::Mosse => "mosse",
            Planner::Uniform => BaselineKind::Uniform.label(),
            Planner::Probabilistic => BaselineKind::Probabilistic.label(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TeamKind {
    /// One agent carrying every sensor.
    #[default]
    Single,
    /// Every agent carries every sensor.
    Homogeneous,
    /// Agent `m` carries sensor `m mod N`.
    Heterogeneous,
}

impl TeamKind {
    pub fn label(self) -> &'static str {
        match self {
            TeamKind::Single => "single",
            TeamKind::Homogeneous => "homogeneous",
            TeamKind::Heterogeneous => "heterogeneous",
        }
    }

    pub fn mask(self, agents: usize, sensors: usize) -> Result<SensorMask> {
        match self {
            TeamKind::Single if agents != 1 => {
                Err(Error::Config(format!("single-agent team with {agents} agents")))
            }
            TeamKind::Single | TeamKind::Homogeneous => SensorMask::homogeneous(agents, sensors),
            TeamKind::Heterogeneous => SensorMask::round_robin(agents, sensors),
        }
    }
}

/// Random Gaussian-mixture objective maps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticMaps {
    pub objectives: usize,
    pub resolution: usize,
    /// Inclusive range of peaks per map.
    pub peaks: [usize; 2],
    pub center_range: [f64; 2],
    pub sigma_range: [f64; 2],
    pub amplitude_range: [f64; 2],
}

impl Default for SyntheticMaps {
    fn default() -> Self {
        SyntheticMaps {
            objectives: 3,
            resolution: 50,
            peaks: [2, 4],
            center_range: [0.15, 0.85],
            sigma_range: [0.05, 0.15],
            amplitude_range: [0.5, 1.5],
        }
    }
}

impl SyntheticMaps {
    fn validate(&self) -> Result<()> {
        let ordered = |r: [f64; 2]| r[0] <= r[1];
        if self.objectives == 0 || self.resolution < 2 {
            return Err(Error::Config("synthetic maps need objectives >= 1 and resolution >= 2".into()));
        }
        if self.peaks[0] == 0 || self.peaks[0] > self.peaks[1] {
            return Err(Error::Config("peak range must be nonempty and start at 1 or more".into()));
        }
        if !ordered(self.center_range) || self.center_range[0] < 0.0 || self.center_range[1] > 1.0 {
            return Err(Error::Config("center range must lie in [0, 1]".into()));
        }
        if !ordered(self.sigma_range) || self.sigma_range[0] <= 0.0 {
            return Err(Error::Config("sigma range must be positive".into()));
        }
        if !ordered(self.amplitude_range) || self.amplitude_range[0] <= 0.0 {
            return Err(Error::Config("amplitude range must be positive".into()));
        }
        Ok(())
    }

    /// Draws one map set.
    pub fn generate(&self, seed: u64) -> Result<Vec<ObjectiveMap>> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let draw = |rng: &mut ChaCha8Rng, r: [f64; 2]| if r[0] == r[1] { r[0] } else { rng.gen_range(r[0]..r[1]) };
        (0..self.objectives)
            .map(|i| {
                let count = rng.gen_range(self.peaks[0]..=self.peaks[1]);
                let peaks: Vec<GaussianPeak> = (0..count)
                    .map(|_| GaussianPeak {
                        center: [draw(&mut rng, self.center_range), draw(&mut rng, self.center_range)],
                        sigma: draw(&mut rng, self.sigma_range),
                        amplitude: draw(&mut rng, self.amplitude_range),
                    })
                    .collect();
                synth_gaussian_map(&peaks, (self.resolution, self.resolution), format!("objective_{i}"))
            })
            .collect()
    }
}

/// Terrain-derived maps: thresholded entropy, shade and slope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeoMaps {
    pub dem: PathBuf,
    /// Entropy grid in the map text format.
    pub entropy: PathBuf,
    #[serde(default = "default_sun_azimuth")]
    pub sun_azimuth_deg: f64,
    #[serde(default = "default_sun_elevation")]
    pub sun_elevation_deg: f64,
    #[serde(default = "default_entropy_fraction")]
    pub entropy_fraction: f64,
    #[serde(default)]
    pub slope_mode: SlopeMode,
    /// Output maps are resampled to this square resolution.
    #[serde(default = "default_geo_resolution")]
    pub resolution: usize,
}

fn default_sun_azimuth() -> f64 {
    135.0
}
fn default_sun_elevation() -> f64 {
    30.0
}
fn default_entropy_fraction() -> f64 {
    0.75
}
fn default_geo_resolution() -> usize {
    50
}

impl GeoMaps {
    /// Builds `[entropy, shade, slope]` from files.
    pub fn load(&self) -> Result<Vec<ObjectiveMap>> {
        let dem = Dem::load(&self.dem)?;
        let entropy = ObjectiveMap::load(&self.entropy)?;
        build_geo_maps(
            &dem,
            &entropy,
            SunVector::from_degrees(self.sun_azimuth_deg, self.sun_elevation_deg)?,
            self.entropy_fraction,
            self.slope_mode,
            self.resolution,
        )
    }
}

/// Thresholded entropy, raycast shade and slope objective, resampled to
/// `resolution x resolution` and normalized.
pub fn build_geo_maps(
    dem: &Dem,
    entropy: &ObjectiveMap,
    sun: SunVector,
    entropy_fraction: f64,
    slope_mode: SlopeMode,
    resolution: usize,
) -> Result<Vec<ObjectiveMap>> {
    let maps = [
        threshold_entropy(entropy, entropy_fraction)?.with_name("entropy"),
        raycast_shade(dem, sun)?.with_name("shade"),
        slope_objective(&sobel_slope(dem), slope_mode)?.with_name("slope"),
    ];
    maps.iter()
        .map(|m| m.resample(resolution, resolution)?.normalized())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "source")]
pub enum MapSource {
    Synthetic(SyntheticMaps),
    Geo(GeoMaps),
}

impl Default for MapSource {
    fn default() -> Self {
        MapSource::Synthetic(SyntheticMaps::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub name: String,
    pub seed: u64,
    pub trials: usize,
    pub budgets: Vec<f64>,
    pub team: TeamKind,
    pub team_sizes: Vec<usize>,
    pub planners: Vec<Planner>,
    pub maps: MapSource,
    pub horizon: usize,
    pub dynamics: DynamicsModel,
    pub basis: BasisConfig,
    pub l1_weight: f64,
    /// Subdivisions of the weight simplex searched by TOPSIS.
    pub weight_steps: usize,
    /// Iteration cap of the pilot solves that score each weighting.
    pub pilot_iters: usize,
    /// Start positions are drawn uniformly from this square.
    pub start_range: [f64; 2],
    pub solver: SolverConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            name: "experiment".into(),
            seed: 0,
            trials: 25,
            budgets: vec![10.0, 25.0, 50.0, 85.0],
            team: TeamKind::Single,
            team_sizes: vec![1],
            planners: Planner::ALL.to_vec(),
            maps: MapSource::default(),
            horizon: 256,
            dynamics: DynamicsModel::default(),
            basis: BasisConfig::default(),
            l1_weight: DEFAULT_L1_WEIGHT,
            weight_steps: 4,
            pilot_iters: 50,
            start_range: [0.1, 0.9],
            solver: SolverConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.budgets.is_empty() || self.budgets.iter().any(|b| !(*b > 0.0 && *b <= 100.0)) {
            return Err(Error::Config("budgets must be percents in (0, 100]".into()));
        }
        if self.team_sizes.is_empty() || self.team_sizes.contains(&0) {
            return Err(Error::Config("team sizes must be positive".into()));
        }
        if self.planners.is_empty() {
            return Err(Error::Config("no planners selected".into()));
        }
        if self.weight_steps == 0 {
            return Err(Error::Config("weight_steps must be positive".into()));
        }
        if !(self.start_range[0] >= 0.0 && self.start_range[0] <= self.start_range[1] && self.start_range[1] <= 1.0) {
            return Err(Error::Config("start range must lie in [0, 1]".into()));
        }
        if let MapSource::Synthetic(s) = &self.maps {
            s.validate()?;
        }
        self.dynamics.validate()?;
        self.basis.validate()?;
        self.solver.validate()?;
        let sensors = self.num_objectives();
        for &m in &self.team_sizes {
            self.team.mask(m, sensors)?;
        }
        Ok(())
    }

    fn num_objectives(&self) -> usize {
        match &self.maps {
            MapSource::Synthetic(s) => s.objectives,
            MapSource::Geo(_) => 3,
        }
    }

    /// Short SHA-256 digest of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(&Sha256::digest(json.as_bytes())[..8])
    }

    pub fn trial_seed(&self, trial: usize) -> u64 {
        derive_seed(self.seed, trial as u64)
    }

    /// Maps of one trial; geo maps are the same in every trial.
    pub fn trial_maps(&self, trial: usize) -> Result<Vec<ObjectiveMap>> {
        match &self.maps {
            MapSource::Synthetic(s) => s.generate(derive_seed(self.trial_seed(trial), 1)),
            MapSource::Geo(g) => g.load(),
        }
    }

    /// Start positions of one trial; a team of `m` uses the first `m`.
    pub fn trial_starts(&self, trial: usize, agents: usize) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.trial_seed(trial), 2));
        let [lo, hi] = self.start_range;
        (0..agents)
            .map(|_| {
                (0..2)
                    .map(|_| if lo == hi { lo } else { rng.gen_range(lo..hi) })
                    .collect()
            })
            .collect()
    }

    /// Scenario with equal combination weights; [`prepare_trial`] replaces them.
    pub fn scenario(&self, maps: Vec<ObjectiveMap>, starts: Vec<Vec<f64>>, budget_percent: f64, seed: u64) -> Result<TeamScenario> {
        let n = maps.len();
        let scenario = TeamScenario {
            mask: self.team.mask(starts.len(), n)?,
            maps,
            starts,
            budget_percent,
            dynamics: self.dynamics,
            horizon: self.horizon,
            seed,
            basis: self.basis,
            l1_weight: self.l1_weight,
            combination: WeightVector::equal(n)?,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn solver_for(&self, seed: u64) -> SolverConfig {
        SolverConfig {
            seed,
            ..self.solver.clone()
        }
    }
}

fn full_schedules(trajs: &[Trajectory], sensors: usize) -> Vec<SensingSchedule> {
    trajs
        .iter()
        .map(|t| SensingSchedule::continuous(vec![vec![1.0; t.len()]; sensors]).expect("ones are a valid schedule"))
        .collect()
}

/// Per-objective cost of each candidate weighting: a short standard ergodic
/// solve on the weighted map, scored on the whole trajectory. Rows follow
/// `candidates`.
pub fn pilot_scores(
    scenario: &TeamScenario,
    candidates: &[WeightVector],
    cfg: &SolverConfig,
    pilot_iters: usize,
) -> Result<Vec<Vec<f64>>> {
    let xis = scenario.objective_coefficients()?;
    let pilot = SolverConfig {
        max_iters: pilot_iters,
        ..cfg.clone()
    };
    candidates
        .iter()
        .map(|w| {
            let sc = TeamScenario {
                combination: w.clone(),
                ..scenario.clone()
            };
            let plan = plan_standard_ergodic(&sc, &pilot)?;
            let full = full_schedules(&plan.trajectories, sc.num_sensors());
            evaluate_coverage(&plan.trajectories, &full, &xis)?
                .into_iter()
                .map(|v| v.ok_or_else(|| Error::degenerate("empty pilot pool")))
                .collect()
        })
        .collect()
}

/// TOPSIS choice of combination weights for a scenario.
pub fn select_weights(scenario: &TeamScenario, steps: usize, cfg: &SolverConfig, pilot_iters: usize) -> Result<WeightVector> {
    let candidates = weight_grid(scenario.num_sensors(), steps)?;
    if candidates.len() == 1 {
        return Ok(candidates[0].clone());
    }
    let criteria = pilot_scores(scenario, &candidates, cfg, pilot_iters)?;
    Ok(topsis_select(&candidates, &criteria)?.weights)
}

/// A trial ready to run: scenario with TOPSIS weights and the shared standard
/// ergodic plan the baselines sample from.
#[derive(Debug, Clone)]
pub struct PreparedTrial {
    pub scenario: TeamScenario,
    pub standard: Vec<Trajectory>,
    pub standard_trace: Vec<f64>,
}

pub fn prepare_trial(cfg: &ExperimentConfig, trial: usize, agents: usize) -> Result<PreparedTrial> {
    let seed = cfg.trial_seed(trial);
    let maps = cfg.trial_maps(trial)?;
    let starts = cfg.trial_starts(trial, agents);
    let mut scenario = cfg.scenario(maps, starts, cfg.budgets[0], seed)?;
    let solver = cfg.solver_for(seed);
    scenario.combination = select_weights(&scenario, cfg.weight_steps, &solver, cfg.pilot_iters)?;
    let plan = plan_standard_ergodic(&scenario, &solver)?;
    Ok(PreparedTrial {
        scenario,
        standard: plan.trajectories,
        standard_trace: plan.objective_trace,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub planner: Planner,
    pub team: TeamKind,
    pub team_size: usize,
    pub trial: usize,
    pub seed: u64,
    pub config_hash: String,
    pub budget_percent: f64,
    /// Per-objective score; `None` when the objective had no measurements or the run failed.
    pub phi: Vec<Option<f64>>,
    pub error: Option<String>,
    pub wall_time_s: f64,
}

impl TrialResult {
    pub fn succeeded(&self) -> bool {
        self.error.is_none() && self.phi.iter().all(Option::is_some)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub planner: String,
    pub team_size: usize,
    pub trial: usize,
    pub budget_percent: Option<f64>,
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config_hash: String,
    pub objective_names: Vec<String>,
    pub results: Vec<TrialResult>,
    pub traces: Vec<TraceRecord>,
}

/// Fraction of failed rows above which a campaign is deemed unreliable.
pub const MAX_FAILURE_FRACTION: f64 = 0.2;

impl ExperimentReport {
    pub fn failures(&self) -> usize {
        self.results.iter().filter(|r| !r.succeeded()).count()
    }

    pub fn failure_fraction(&self) -> f64 {
        if self.results.is_empty() {
            return 0.0;
        }
        self.failures() as f64 / self.results.len() as f64
    }

    pub fn excess_failures(&self) -> bool {
        self.failure_fraction() > MAX_FAILURE_FRACTION
    }
}

struct Unit {
    trial: usize,
    team_size: usize,
}

fn run_unit(cfg: &ExperimentConfig, hash: &str, unit: &Unit) -> (Vec<TrialResult>, Vec<TraceRecord>) {
    let seed = cfg.trial_seed(unit.trial);
    let sensors = cfg.num_objectives();
    let row = |planner: Planner, budget: f64, phi: Vec<Option<f64>>, error: Option<String>, secs: f64| TrialResult {
        planner,
        team: cfg.team,
        team_size: unit.team_size,
        trial: unit.trial,
        seed,
        config_hash: hash.to_string(),
        budget_percent: budget,
        phi,
        error,
        wall_time_s: secs,
    };
    let start = Instant::now();
    let prepared = match prepare_trial(cfg, unit.trial, unit.team_size) {
        Ok(p) => p,
        Err(e) => {
            log::warn!("trial {} (team {}) failed during setup: {e}", unit.trial, unit.team_size);
            let rows = cfg
                .budgets
                .iter()
                .flat_map(|&b| cfg.planners.iter().map(move |&p| (p, b)))
                .map(|(p, b)| row(p, b, vec![None; sensors], Some(e.to_string()), 0.0))
                .collect();
            return (rows, Vec::new());
        }
    };
    let setup_secs = start.elapsed().as_secs_f64();
    let mut results = Vec::new();
    let mut traces = vec![TraceRecord {
        planner: "standard_ergodic".into(),
        team_size: unit.team_size,
        trial: unit.trial,
        budget_percent: None,
        trace: prepared.standard_trace.clone(),
    }];
    let solver = cfg.solver_for(seed);
    for &budget in &cfg.budgets {
        let scenario = TeamScenario {
            budget_percent: budget,
            ..prepared.scenario.clone()
        };
        let xis = match scenario.validate().and_then(|_| scenario.objective_coefficients()) {
            Ok(x) => x,
            Err(e) => {
                for &p in &cfg.planners {
                    results.push(row(p, budget, vec![None; sensors], Some(e.to_string()), 0.0));
                }
                continue;
            }
        };
        for &planner in &cfg.planners {
            let t0 = Instant::now();
            let outcome = match planner {
                Planner::Mosse => solve(&scenario, &solver).and_then(|plan| {
                    traces.push(TraceRecord {
                        planner: planner.label().into(),
                        team_size: unit.team_size,
                        trial: unit.trial,
                        budget_percent: Some(budget),
                        trace: plan.objective_trace.clone(),
                    });
                    evaluate_coverage(&plan.trajectories, &plan.binary_schedules, &xis)
                }),
                Planner::Uniform | Planner::Probabilistic => {
                    let kind = if planner == Planner::Uniform {
                        BaselineKind::Uniform
                    } else {
                        BaselineKind::Probabilistic
                    };
                    baseline_schedules(kind, &scenario, &prepared.standard, seed)
                        .and_then(|s| evaluate_coverage(&prepared.standard, &s, &xis))
                }
            };
            // Baselines share the standard plan, so its cost is charged to them.
            let mut secs = t0.elapsed().as_secs_f64();
            if planner != Planner::Mosse {
                secs += setup_secs;
            }
            match outcome {
                Ok(phi) => {
                    let error = phi
                        .iter()
                        .position(Option::is_none)
                        .map(|i| format!("objective {i} has no measurements"));
                    results.push(row(planner, budget, phi, error, secs));
                }
                Err(e) => {
                    log::warn!("{} trial {} budget {budget}: {e}", planner.label(), unit.trial);
                    results.push(row(planner, budget, vec![None; sensors], Some(e.to_string()), secs));
                }
            }
        }
    }
    (results, traces)
}

/// Runs every (trial, team size) unit in parallel; failures are recorded per row.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let hash = cfg.hash();
    let names = cfg.trial_maps(0)?.iter().map(|m| m.name().to_string()).collect();
    let units: Vec<Unit> = cfg
        .team_sizes
        .iter()
        .flat_map(|&team_size| (0..cfg.trials).map(move |trial| Unit { trial, team_size }))
        .collect();
    let outputs: Vec<_> = units.par_iter().map(|u| run_unit(cfg, &hash, u)).collect();
    let mut results = Vec::new();
    let mut traces = Vec::new();
    for (r, t) in outputs {
        results.extend(r);
        traces.extend(t);
    }
    Ok(ExperimentReport {
        config_hash: hash,
        objective_names: names,
        results,
        traces,
    })
}

/// Mean score of one (planner, team size, budget, objective) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellMean {
    pub planner: Planner,
    pub team: TeamKind,
    pub team_size: usize,
    pub budget_percent: f64,
    pub objective: usize,
    pub mean: f64,
    pub count: usize,
}

/// Planner, team, team size, budget bits, objective.
type CellKey = (Planner, TeamKind, usize, u64, usize);

/// Averages scores over trials, skipping missing entries.
pub fn aggregate(results: &[TrialResult]) -> Result<Vec<CellMean>> {
    if results.is_empty() {
        return Err(Error::precondition("no results to aggregate"));
    }
    let mut cells: BTreeMap<CellKey, (f64, usize)> = BTreeMap::new();
    for r in results {
        for (i, v) in r.phi.iter().enumerate() {
            let key = (r.planner, r.team, r.team_size, r.budget_percent.to_bits(), i);
            let cell = cells.entry(key).or_insert((0.0, 0));
            if let Some(v) = v {
                cell.0 += v;
                cell.1 += 1;
            }
        }
    }
    Ok(cells
        .into_iter()
        .map(|((planner, team, team_size, bits, objective), (sum, count))| CellMean {
            planner,
            team,
            team_size,
            budget_percent: f64::from_bits(bits),
            objective,
            mean: if count > 0 { sum / count as f64 } else { f64::NAN },
            count,
        })
        .collect())
}

/// Looks up one aggregated cell.
pub fn cell_mean(cells: &[CellMean], planner: Planner, team_size: usize, budget: f64, objective: usize) -> Option<f64> {
    cells
        .iter()
        .find(|c| c.planner == planner && c.team_size == team_size && c.budget_percent == budget && c.objective == objective)
        .map(|c| c.mean)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.17e}")).unwrap_or_default()
}

fn fmt_budget(b: f64) -> String {
    format!("{b}")
}

/// Raw per-trial CSV (no timing column, so reruns are byte-identical).
pub fn results_csv(report: &ExperimentReport) -> String {
    let mut out = String::from("planner,team,team_size,trial,seed,config_hash,budget_percent,status");
    for name in &report.objective_names {
        let _ = write!(out, ",phi_{name}");
    }
    out.push('\n');
    for r in &report.results {
        let status = match &r.error {
            None => "ok".to_string(),
            Some(e) => format!("\"failed: {}\"", e.replace('"', "'")),
        };
        let _ = write!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.planner.label(),
            r.team.label(),
            r.team_size,
            r.trial,
            r.seed,
            r.config_hash,
            fmt_budget(r.budget_percent),
            status
        );
        for v in &r.phi {
            let _ = write!(out, ",{}", fmt_opt(*v));
        }
        out.push('\n');
    }
    out
}

/// Mean table: one row per (planner, team size), one column per (objective, budget).
pub fn summary_csv(report: &ExperimentReport) -> Result<String> {
    let cells = aggregate(&report.results)?;
    let mut budgets: Vec<f64> = cells.iter().map(|c| c.budget_percent).collect();
    budgets.sort_by(f64::total_cmp);
    budgets.dedup();
    let mut rows: Vec<(Planner, TeamKind, usize)> = cells.iter().map(|c| (c.planner, c.team, c.team_size)).collect();
    rows.sort();
    rows.dedup();
    let mut out = String::from("planner,team,team_size,config_hash");
    for name in &report.objective_names {
        for b in &budgets {
            let _ = write!(out, ",{name}@{}", fmt_budget(*b));
        }
    }
    out.push('\n');
    for (planner, team, size) in rows {
        let _ = write!(out, "{},{},{},{}", planner.label(), team.label(), size, report.config_hash);
        for i in 0..report.objective_names.len() {
            for &b in &budgets {
                let v = cells
                    .iter()
                    .find(|c| c.planner == planner && c.team == team && c.team_size == size && c.budget_percent == b && c.objective == i)
                    .map(|c| c.mean)
                    .filter(|m| m.is_finite());
                let _ = write!(out, ",{}", v.map(|m| format!("{m:.6}")).unwrap_or_default());
            }
        }
        out.push('\n');
    }
    Ok(out)
}

/// Long-format per-iteration objective traces.
pub fn traces_csv(report: &ExperimentReport) -> String {
    let mut out = String::from("planner,team_size,trial,budget_percent,iteration,objective\n");
    for t in &report.traces {
        let budget = t.budget_percent.map(fmt_budget).unwrap_or_default();
        for (k, v) in t.trace.iter().enumerate() {
            let _ = writeln!(out, "{},{},{},{},{},{:.17e}", t.planner, t.team_size, t.trial, budget, k, v);
        }
    }
    out
}

pub fn timings_csv(report: &ExperimentReport) -> String {
    let mut out = String::from("planner,team_size,trial,budget_percent,wall_time_s\n");
    for r in &report.results {
        let _ = writeln!(
            out,
            "{},{},{},{},{:.6}",
            r.planner.label(),
            r.team_size,
            r.trial,
            fmt_budget(r.budget_percent),
            r.wall_time_s
        );
    }
    out
}

/// Files written by [`emit_results`].
#[derive(Debug, Clone)]
pub struct EmittedFiles {
    pub results: PathBuf,
    pub summary: PathBuf,
    pub traces: PathBuf,
    pub timings: PathBuf,
}

/// Writes `results.csv`, `summary.csv`, `traces.csv` and `timings.csv` to `dir`.
pub fn emit_results(report: &ExperimentReport, dir: &Path) -> Result<EmittedFiles> {
    if report.results.is_empty() {
        return Err(Error::precondition("no results to emit"));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files = EmittedFiles {
        results: dir.join("results.csv"),
        summary: dir.join("summary.csv"),
        traces: dir.join("traces.csv"),
        timings: dir.join("timings.csv"),
    };
    let write = |path: &Path, text: String| std::fs::write(path, text).map_err(|e| Error::io(path, e));
    write(&files.results, results_csv(report))?;
    write(&files.summary, summary_csv(report)?)?;
    write(&files.traces, traces_csv(report))?;
    write(&files.timings, timings_csv(report))?;
    Ok(files)
}
