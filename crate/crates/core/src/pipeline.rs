//! Batch runs: one scenario tree, model, solve and report set per target day.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use chrono::{Datelike, NaiveDate};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bids::{all_price_accepting, extract_da_curve, write_curve_steps_csv, write_curves_csv, write_price_accepting_csv};
use crate::config::{AssetSettings, DemandInterval, DemandProfile, EcConfig};
use crate::fan::sample_fan;
use crate::history::{load_history, HistoricalWindow};
use crate::model::{build_model, feasibility_witness, BuildOptions, MilpModel};
use crate::reduction::{build_tree, ReductionPlan};
use crate::report::{
    behaviour_report, eecsw_decomposition, percentile_report, write_bands_csv, write_behaviour_csv, BandSeries,
    Decomposition,
};
use crate::schedule::{HourWindow, StageSchedule};
use crate::solver::mps::write_mps;
use crate::solver::{check_solution, solve_external_in, solve_reference_with, ExternalSolver, ReferenceLimits, Solution};
use crate::tree::ScenarioTree;
use crate::{Error, Result};

/// Tolerance used for the residual and nonanticipativity checks on every solved day.
pub const CHECK_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub assets: AssetSettings,
    pub demand: DemandSection,
    pub data: DataSection,
    pub fan: FanSection,
    /// Omit to solve the unreduced fan.
    #[serde(default)]
    pub reduction_plan: Option<ReductionPlan>,
    pub solver: SolverSection,
    pub days: DaysSection,
    #[serde(default)]
    pub window: HourWindow,
    #[serde(default = "default_workers")]
    pub workers: usize,
}

fn default_workers() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandSection {
    /// `hour,central,min,max` CSV; when absent `flat` is used.
    #[serde(default)]
    pub file: Option<PathBuf>,
    #[serde(default)]
    pub flat: Option<FlatDemand>,
    #[serde(default)]
    pub intervals: Vec<DemandInterval>,
    #[serde(default)]
    pub flex_cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlatDemand {
    pub central: f64,
    pub band: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub prices: PathBuf,
    pub renewables: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FanSection {
    pub size: usize,
    pub seed: u64,
    /// Only the most recent `history_days` days before the target are sampled.
    #[serde(default)]
    pub history_days: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SolverSection {
    /// `{config_dir}` in the command is replaced by the config file's directory.
    External(ExternalSolver),
    Reference(ReferenceLimits),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DaysSection {
    pub first: NaiveDate,
    pub last: NaiveDate,
}

impl DaysSection {
    pub fn dates(&self) -> Vec<NaiveDate> {
        self.first.iter_days().take_while(|d| *d <= self.last).collect()
    }
}

impl RunConfig {
    /// Reads a config and makes every relative path relative to its directory.
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config: RunConfig = serde_json::from_str(&text)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let base = if base.as_os_str().is_empty() { PathBuf::from(".") } else { base };
        config.resolve_paths(&base);
        config.check()?;
        Ok(config)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.data.prices);
        fix(&mut self.data.renewables);
        if let Some(f) = self.demand.file.as_mut() {
            fix(f);
        }
        if let SolverSection::External(s) = &mut self.solver {
            s.command = s.command.replace("{config_dir}", &base.to_string_lossy());
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.days.first > self.days.last {
            return Err(Error::Invalid(format!("days: first {} after last {}", self.days.first, self.days.last)));
        }
        if self.workers == 0 {
            return Err(Error::Invalid("workers must be >= 1".into()));
        }
        if self.fan.size == 0 {
            return Err(Error::Invalid("fan size must be >= 1".into()));
        }
        HourWindow::new(self.window.first, self.window.last)?;
        if let Some(plan) = &self.reduction_plan {
            plan.check(self.fan.size, &StageSchedule::standard())?;
        }
        if self.demand.file.is_none() && self.demand.flat.is_none() {
            return Err(Error::Invalid("demand needs either `file` or `flat`".into()));
        }
        Ok(())
    }

    pub fn demand_profile(&self) -> Result<DemandProfile> {
        let d = &self.demand;
        let mut profile = match (&d.file, d.flat) {
            (Some(file), _) => DemandProfile::load_csv(file, d.intervals.clone(), d.flex_cost)?,
            (None, Some(flat)) => DemandProfile::flat(flat.central, flat.band, d.flex_cost),
            (None, None) => return Err(Error::Invalid("demand needs either `file` or `flat`".into())),
        };
        profile.intervals = d.intervals.clone();
        profile.validate()?;
        Ok(profile)
    }
}

/// Seed of the fan sampler for one day, derived from the run seed and the date.
pub fn day_seed(seed: u64, date: NaiveDate) -> u64 {
    let day = date.num_days_from_ce() as u64;
    // splitmix64 finalizer
    let mut z = seed ^ day.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Inputs shared by every day of a run.
pub struct RunInputs {
    pub config: RunConfig,
    pub assets: EcConfig,
    pub demand: DemandProfile,
    pub history: HistoricalWindow,
}

impl RunInputs {
    pub fn load(config: RunConfig) -> Result<RunInputs> {
        let demand = config.demand_profile()?;
        let assets = config.assets.resolve(&demand)?;
        let history = load_history(&config.data.prices, &config.data.renewables)?;
        Ok(RunInputs { config, assets, demand, history })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DaySummary {
    pub date: NaiveDate,
    pub scenarios: usize,
    pub objective: f64,
    pub decomposition: Decomposition,
    pub max_residual: f64,
    pub wall_time_s: f64,
}

#[derive(Debug)]
pub struct DayOutcome {
    pub date: NaiveDate,
    pub result: std::result::Result<DaySummary, String>,
}

#[derive(Debug)]
pub struct RunReport {
    pub out_dir: PathBuf,
    pub days: Vec<DayOutcome>,
}

impl RunReport {
    pub fn failed(&self) -> usize {
        self.days.iter().filter(|d| d.result.is_err()).count()
    }

    pub fn all_succeeded(&self) -> bool {
        self.failed() == 0
    }
}

/// Appends timestamped lines to a day's log file and mirrors them to the logger.
struct DayLog {
    file: File,
    start: Instant,
    date: NaiveDate,
}

impl DayLog {
    fn create(path: &Path, date: NaiveDate) -> Result<DayLog> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        Ok(DayLog { file, start: Instant::now(), date })
    }

    fn line(&mut self, level: log::Level, message: &str) {
        let _ = writeln!(self.file, "{:9.3}s {level:<5} {message}", self.start.elapsed().as_secs_f64());
        log::log!(level, "{}: {message}", self.date);
    }

    fn info(&mut self, message: impl AsRef<str>) {
        self.line(log::Level::Info, message.as_ref());
    }
}

/// Builds the scenario tree of one day from the history strictly before it.
pub fn day_tree(inputs: &RunInputs, date: NaiveDate) -> Result<ScenarioTree> {
    let fan_cfg = inputs.config.fan;
    let mut history = inputs.history.before(date);
    if let Some(n) = fan_cfg.history_days {
        let skip = history.days.len().saturating_sub(n);
        history.days.drain(..skip);
    }
    let fan = sample_fan(&history, &inputs.assets, fan_cfg.size, day_seed(fan_cfg.seed, date), date)?;
    let schedule = StageSchedule::standard();
    match &inputs.config.reduction_plan {
        Some(plan) => build_tree(&fan, plan, &schedule),
        None => fan.into_tree(schedule),
    }
}

pub fn build_options(config: &RunConfig) -> BuildOptions {
    BuildOptions { window: config.window, elastic_penalty: None }
}

/// Solves with the configured backend, writing the MPS (and solver files) under `dir`.
///
/// `start` is handed to external solvers whose command has a `{start}` placeholder.
pub fn solve_in(model: &MilpModel, solver: &SolverSection, dir: &Path, start: Option<&[f64]>) -> Result<Solution> {
    let mps = dir.join("model.mps");
    match solver {
        SolverSection::External(s) => solve_external_in(model, s, &mps, &dir.join("model.sol"), start),
        SolverSection::Reference(limits) => {
            write_mps(model, &mps)?;
            solve_reference_with(model, *limits)
        }
    }
}

/// Day-ahead curves, their step form and the price-accepting bids.
pub fn write_bids(model: &MilpModel, solution: &Solution, tree: &ScenarioTree, dir: &Path) -> Result<()> {
    let curves = model
        .hours()
        .into_iter()
        .map(|t| extract_da_curve(model, solution, tree, t, CHECK_TOL))
        .collect::<Result<Vec<_>>>()?;
    write_curves_csv(&curves, &dir.join("da_curves.csv"))?;
    write_curve_steps_csv(&curves, &dir.join("da_curve_steps.csv"))?;
    let accepting = all_price_accepting(model, solution, tree, CHECK_TOL)?;
    write_price_accepting_csv(&accepting, &dir.join("price_accepting_bids.csv"))
}

/// Per-scenario behaviour, percentile bands and the welfare decomposition.
pub fn write_behaviour_reports(
    model: &MilpModel,
    solution: &Solution,
    tree: &ScenarioTree,
    demand: &DemandProfile,
    dir: &Path,
) -> Result<Decomposition> {
    let behaviour_dir = dir.join("behaviour");
    std::fs::create_dir_all(&behaviour_dir).map_err(|e| Error::io(&behaviour_dir, e))?;
    for w in 0..tree.num_scenarios() {
        let rows = behaviour_report(model, solution, tree, w)?;
        write_behaviour_csv(&rows, &behaviour_dir.join(format!("scenario_{w:03}.csv")))?;
    }
    let bands: Vec<_> = [BandSeries::Pv, BandSeries::Wind, BandSeries::FlexDemand, BandSeries::Soc]
        .into_iter()
        .flat_map(|s| percentile_report(model, solution, tree, s))
        .collect();
    write_bands_csv(&bands, &dir.join("percentiles.csv"))?;

    let decomposition = eecsw_decomposition(model, solution, tree, demand);
    write_json(&dir.join("decomposition.json"), &serde_json::to_value(decomposition)?)?;
    Ok(decomposition)
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Runs the full sequence for one day inside `dir`.
pub fn run_day(inputs: &RunInputs, date: NaiveDate, dir: &Path) -> Result<DaySummary> {
    let start = Instant::now();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let failed_marker = dir.join("FAILED");
    if failed_marker.exists() {
        std::fs::remove_file(&failed_marker).map_err(|e| Error::io(&failed_marker, e))?;
    }
    let mut log = DayLog::create(&dir.join("day.log"), date)?;
    let result = run_day_logged(inputs, date, dir, &mut log, start);
    if let Err(e) = &result {
        log.line(log::Level::Error, &format!("day failed: {e}"));
        std::fs::write(&failed_marker, format!("{e}\n")).map_err(|e| Error::io(&failed_marker, e))?;
    }
    result
}

fn run_day_logged(inputs: &RunInputs, date: NaiveDate, dir: &Path, log: &mut DayLog, start: Instant) -> Result<DaySummary> {
    let tree = day_tree(inputs, date)?;
    tree.write(&dir.join("tree.json"))?;
    log.info(format!("tree with {} scenarios, {} nodes", tree.num_scenarios(), tree.nodes().len()));

    let model = build_model(&tree, &inputs.assets, &inputs.demand, &build_options(&inputs.config))?;
    log.info(format!(
        "model with {} columns ({} binary), {} rows",
        model.variables.len(),
        model.num_binaries(),
        model.rows.len()
    ));
    let witness = feasibility_witness(&model, &tree, &inputs.assets, &inputs.demand, inputs.config.window);
    if witness.is_none() {
        log.line(log::Level::Warn, "no constructive start point; the imbalance caps may make the day infeasible");
    }
    let solution = solve_in(&model, &inputs.config.solver, dir, witness.as_deref())?;
    log.info(format!(
        "{} finished: {:?}, objective {}, {:.3}s",
        solution.meta.solver, solution.status, solution.objective, solution.meta.wall_time_s
    ));
    if !solution.status.has_values() {
        return Err(Error::Solver(format!("no feasible point: {:?}", solution.status)));
    }
    let residuals = check_solution(&model, &solution, CHECK_TOL);
    let mut json = solution.to_json(&model);
    json["max_residual"] = serde_json::json!(residuals.max_residual());
    write_json(&dir.join("solution.json"), &json)?;
    if !residuals.is_clean() {
        return Err(Error::Numerical(format!("max residual {:.3e} exceeds {CHECK_TOL:e}", residuals.max_residual())));
    }

    write_bids(&model, &solution, &tree, dir)?;
    let decomposition = write_behaviour_reports(&model, &solution, &tree, &inputs.demand, dir)?;
    log.info(format!("EECSW {:.4}", decomposition.eecsw));
    Ok(DaySummary {
        date,
        scenarios: tree.num_scenarios(),
        objective: solution.objective,
        decomposition,
        max_residual: residuals.max_residual(),
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

pub const SUMMARY_HEADER: [&str; 10] = ["date", "status", "scenarios", "objective", "eecsw", "da", "rm", "im", "ib", "fd"];

/// One row per day; failed days keep their row with empty numbers.
pub fn write_summary_csv(days: &[DayOutcome], path: &Path) -> Result<()> {
    let err = |e: csv::Error| Error::Invalid(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record(SUMMARY_HEADER).map_err(err)?;
    for day in days {
        let record: Vec<String> = match &day.result {
            Ok(s) => {
                let d = s.decomposition;
                let mut r = vec![day.date.to_string(), "ok".into(), s.scenarios.to_string()];
                r.extend([s.objective, d.eecsw, d.da, d.rm, d.im, d.ib(), d.fd].iter().map(|v| format!("{v:.6}")));
                r
            }
            Err(_) => {
                let mut r = vec![day.date.to_string(), "failed".into()];
                r.resize(SUMMARY_HEADER.len(), String::new());
                r
            }
        };
        w.write_record(&record).map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Runs every configured day and writes `summary.csv` into `out_dir`.
///
/// A failing day is recorded and does not stop the others.
pub fn run_pipeline(config: RunConfig, out_dir: &Path) -> Result<RunReport> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    write_json(&out_dir.join("config.json"), &serde_json::to_value(&config)?)?;
    let inputs = RunInputs::load(config)?;
    let dates = inputs.config.days.dates();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(inputs.config.workers)
        .build()
        .map_err(|e| Error::Invalid(format!("thread pool: {e}")))?;
    let days: Vec<DayOutcome> = pool.install(|| {
        dates
            .par_iter()
            .map(|&date| {
                let result = run_day(&inputs, date, &out_dir.join(date.to_string())).map_err(|e| e.to_string());
                match &result {
                    Ok(s) => log::info!("{date}: done, EECSW {:.4}", s.decomposition.eecsw),
                    Err(e) => log::error!("{date}: {e}"),
                }
                DayOutcome { date, result }
            })
            .collect()
    });
    write_summary_csv(&days, &out_dir.join("summary.csv"))?;
    Ok(RunReport { out_dir: out_dir.to_path_buf(), days })
}
