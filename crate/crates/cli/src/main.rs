use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use mosse::baselines::{baseline_schedules, evaluate_coverage, plan_standard_ergodic, BaselineKind};
use mosse::bench::{emit_results, prepare_trial, run_experiment, ExperimentConfig, MapSource};
use mosse::geo::{raycast_shade, slope_objective, sobel_slope, threshold_entropy, Dem, SlopeMode, SunVector};
use mosse::maps::ObjectiveMap;
use mosse::{solve, PlanResult, TeamScenario};

/// Exit code when a campaign loses too many trials.
const EXIT_EXCESS_FAILURES: u8 = 2;

#[derive(Parser)]
#[command(name = "mosse", version, about = "Multi-objective sparse ergodic coverage planner")]
struct Cli {
    /// Worker threads for trial-level parallelism (defaults to all cores).
    #[arg(long, global = true)]
    parallel: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (JSON). Defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configuration seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PlannerArg {
    Mosse,
    Uniform,
    Probabilistic,
}

#[derive(Clone, Copy, ValueEnum)]
enum SlopeArg {
    Invert,
    Cover,
}

#[derive(Subcommand)]
enum Command {
    /// Write one trial's synthetic objective maps as text grids.
    GenMaps {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        trial: usize,
    },
    /// Turn an ESRI ASCII DEM into shade and slope maps (and entropy, if given).
    IngestDem {
        #[arg(long)]
        dem: PathBuf,
        /// Entropy grid in the map text format.
        #[arg(long)]
        entropy: Option<PathBuf>,
        #[arg(long, default_value_t = 135.0)]
        sun_azimuth: f64,
        #[arg(long, default_value_t = 30.0)]
        sun_elevation: f64,
        #[arg(long, default_value_t = 0.75)]
        entropy_fraction: f64,
        #[arg(long, value_enum, default_value = "invert")]
        slope_mode: SlopeArg,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Plan one scenario; writes plan.json and scenario.json.
    Plan {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        trial: usize,
        /// Sensing budget percent; defaults to the first configured budget.
        #[arg(long)]
        budget: Option<f64>,
        #[arg(long, default_value_t = 1)]
        team_size: usize,
        #[arg(long, value_enum, default_value = "mosse")]
        planner: PlannerArg,
    },
    /// Run a full campaign and write CSV tables.
    Bench {
        #[command(flatten)]
        common: Common,
    },
    /// Score a stored plan against its scenario.
    Eval {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        scenario: PathBuf,
        /// Also write eval.json here.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn save_maps(maps: &[ObjectiveMap], dir: &Path) -> Result<()> {
    create_dir(dir)?;
    for m in maps {
        let path = dir.join(format!("{}.txt", m.name()));
        m.save(&path)?;
        println!("{}", path.display());
    }
    Ok(())
}

fn gen_maps(common: &Common, trial: usize) -> Result<()> {
    let cfg = common.load()?;
    if !matches!(cfg.maps, MapSource::Synthetic(_)) {
        bail!("gen-maps needs a synthetic map source");
    }
    save_maps(&cfg.trial_maps(trial)?, &common.out_dir)
}

fn plan(common: &Common, trial: usize, budget: Option<f64>, team_size: usize, planner: PlannerArg) -> Result<()> {
    let cfg = common.load()?;
    let prepared = prepare_trial(&cfg, trial, team_size)?;
    let scenario = TeamScenario {
        budget_percent: budget.unwrap_or(cfg.budgets[0]),
        ..prepared.scenario
    };
    scenario.validate()?;
    let seed = cfg.trial_seed(trial);
    let solver = cfg.solver_for(seed);
    let result = match planner {
        PlannerArg::Mosse => solve(&scenario, &solver)?,
        PlannerArg::Uniform | PlannerArg::Probabilistic => {
            let kind = match planner {
                PlannerArg::Uniform => BaselineKind::Uniform,
                _ => BaselineKind::Probabilistic,
            };
            let standard = plan_standard_ergodic(&scenario, &solver)?;
            let schedules = baseline_schedules(kind, &scenario, &standard.trajectories, seed)?;
            PlanResult {
                binary_schedules: schedules,
                ..standard
            }
        }
    };
    create_dir(&common.out_dir)?;
    write_json(&common.out_dir.join("plan.json"), &result)?;
    write_json(&common.out_dir.join("scenario.json"), &scenario)?;
    println!("final objective {:.6e} after {} iterations", result.final_objective, result.iterations);
    Ok(())
}

fn bench(common: &Common) -> Result<ExitCode> {
    let cfg = common.load()?;
    let report = run_experiment(&cfg)?;
    let files = emit_results(&report, &common.out_dir)?;
    println!("config {} : {} rows, {} failed", report.config_hash, report.results.len(), report.failures());
    println!("wrote {}", files.results.display());
    if report.excess_failures() {
        eprintln!("too many failed trials ({:.0}%)", 100.0 * report.failure_fraction());
        return Ok(ExitCode::from(EXIT_EXCESS_FAILURES));
    }
    Ok(ExitCode::SUCCESS)
}

fn eval(plan: &Path, scenario: &Path, out_dir: Option<&Path>) -> Result<()> {
    let plan: PlanResult = read_json(plan)?;
    let scenario: TeamScenario = read_json(scenario)?;
    scenario.validate()?;
    if plan.binary_schedules.is_empty() {
        bail!("plan has no binary schedules to score");
    }
    let xis = scenario.objective_coefficients()?;
    let phi = evaluate_coverage(&plan.trajectories, &plan.binary_schedules, &xis)?;
    let scores: serde_json::Map<String, serde_json::Value> = scenario
        .maps
        .iter()
        .zip(phi)
        .map(|(m, v)| (m.name().to_string(), serde_json::json!(v)))
        .collect();
    let text = serde_json::to_string_pretty(&scores)?;
    println!("{text}");
    if let Some(dir) = out_dir {
        create_dir(dir)?;
        fs::write(dir.join("eval.json"), text).context("writing eval.json")?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn ingest_dem(
    dem: &Path,
    entropy: Option<&Path>,
    azimuth: f64,
    elevation: f64,
    fraction: f64,
    mode: SlopeArg,
    out_dir: &Path,
) -> Result<()> {
    let dem = Dem::load(dem)?;
    let sun = SunVector::from_degrees(azimuth, elevation)?;
    let mode = match mode {
        SlopeArg::Invert => SlopeMode::Invert,
        SlopeArg::Cover => SlopeMode::Cover,
    };
    let mut maps = vec![
        raycast_shade(&dem, sun)?.with_name("shade"),
        slope_objective(&sobel_slope(&dem), mode)?.with_name("slope"),
    ];
    if let Some(path) = entropy {
        maps.insert(0, threshold_entropy(&ObjectiveMap::load(path)?, fraction)?.with_name("entropy"));
    }
    save_maps(&maps, out_dir)
}

fn run(cli: Cli) -> Result<ExitCode> {
    if let Some(n) = cli.parallel {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match cli.command {
        Command::GenMaps { common, trial } => gen_maps(&common, trial)?,
        Command::IngestDem {
            dem,
            entropy,
            sun_azimuth,
            sun_elevation,
            entropy_fraction,
            slope_mode,
            out_dir,
        } => ingest_dem(&dem, entropy.as_deref(), sun_azimuth, sun_elevation, entropy_fraction, slope_mode, &out_dir)?,
        Command::Plan { common, trial, budget, team_size, planner } => plan(&common, trial, budget, team_size, planner)?,
        Command::Bench { common } => return bench(&common),
        Command::Eval { plan, scenario, out_dir } => eval(&plan, &scenario, out_dir.as_deref())?,
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
