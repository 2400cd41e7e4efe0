use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use ecmarket::history::load_history;
use ecmarket::model::build_model;
use ecmarket::pipeline::{self, RunConfig, RunInputs, SolverSection};
use ecmarket::renewables::{write_renewables_csv, NinjaClient, RenewableKind, RenewablesQuery};
use ecmarket::solver::{check_solution, mps::write_mps, ExternalSolver, ReferenceLimits, Solution};
use ecmarket::synthetic::write_synthetic;
use ecmarket::tree::ScenarioTree;

#[derive(Parser)]
#[command(name = "ecmarket", version, about = "Energy-community market participation under uncertainty")]
struct Cli {
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the fan seed of the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Solver command template with {mps} and {sol}; switches to the external solver.
    #[arg(long, global = true)]
    solver_cmd: Option<String>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate history files, or download a year of renewables capacity factors.
    Ingest {
        #[arg(long)]
        prices: Option<PathBuf>,
        #[arg(long)]
        renewables: Option<PathBuf>,
        /// Download wind and PV for this site (`LAT,LON`) into a renewables CSV.
        #[arg(long, value_parser = parse_site)]
        fetch: Option<(f64, f64)>,
        #[arg(long, requires = "fetch")]
        year: Option<i32>,
    },
    /// Write a seeded synthetic history and demand profile.
    Synth {
        #[arg(long, default_value = "2022-01-01")]
        start: chrono::NaiveDate,
        #[arg(long, default_value = "2023-12-31")]
        end: chrono::NaiveDate,
        #[arg(long, default_value = "data")]
        dir: PathBuf,
    },
    /// Sample the unreduced scenario fan for a day and write it as a tree.
    Fan {
        #[arg(long)]
        date: chrono::NaiveDate,
    },
    /// Sample and reduce the scenario tree for a day.
    Tree {
        #[arg(long)]
        date: chrono::NaiveDate,
    },
    /// Build the model for a tree and write MPS plus the column registry.
    Build {
        #[arg(long)]
        tree: PathBuf,
    },
    /// Build and solve the model for a tree.
    Solve {
        #[arg(long)]
        tree: PathBuf,
        /// Use the built-in exact solver regardless of the configuration.
        #[arg(long)]
        reference: bool,
    },
    /// Extract day-ahead curves and price-accepting bids from a solution.
    Bids {
        #[arg(long)]
        tree: PathBuf,
        #[arg(long)]
        solution: PathBuf,
    },
    /// Behaviour, percentile and welfare decomposition reports from a solution.
    Report {
        #[arg(long)]
        tree: PathBuf,
        #[arg(long)]
        solution: PathBuf,
    },
    /// Run every configured day end to end.
    Pipeline,
}

fn parse_site(s: &str) -> std::result::Result<(f64, f64), String> {
    let (lat, lon) = s.split_once(',').ok_or("expected LAT,LON")?;
    Ok((lat.trim().parse().map_err(|e| format!("{e}"))?, lon.trim().parse().map_err(|e| format!("{e}"))?))
}

impl Cli {
    fn run_config(&self) -> Result<RunConfig> {
        let path = self.config.as_deref().context("--config is required for this subcommand")?;
        let mut config = RunConfig::load(path).with_context(|| format!("loading {}", path.display()))?;
        if let Some(seed) = self.seed {
            config.fan.seed = seed;
        }
        if let Some(cmd) = &self.solver_cmd {
            let timeout_s = match &config.solver {
                SolverSection::External(s) => s.timeout_s,
                SolverSection::Reference(_) => None,
            };
            config.solver = SolverSection::External(ExternalSolver { timeout_s, ..ExternalSolver::new(cmd.clone()) });
        }
        if let Some(w) = self.workers {
            config.workers = w;
        }
        config.check()?;
        Ok(config)
    }

    fn inputs(&self) -> Result<RunInputs> {
        Ok(RunInputs::load(self.run_config()?)?)
    }

    fn out(&self, name: &str) -> Result<PathBuf> {
        std::fs::create_dir_all(&self.out_dir).with_context(|| format!("creating {}", self.out_dir.display()))?;
        Ok(self.out_dir.join(name))
    }
}

fn load_solution(model: &ecmarket::model::MilpModel, path: &Path) -> Result<Solution> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let solution = Solution::from_json(model, &value)?;
    if !solution.status.has_values() {
        bail!("solution {} has no values ({:?})", path.display(), solution.status);
    }
    Ok(solution)
}

fn run(cli: &Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::Synth { start, end, dir } => {
            write_synthetic(dir, *start, *end, cli.seed.unwrap_or(2023))?;
            eprintln!("wrote prices.csv, renewables.csv and demand.csv to {}", dir.display());
        }
        Command::Ingest { prices, renewables, fetch, year } => {
            if let Some((lat, lon)) = fetch {
                let year = year.context("--year is required with --fetch")?;
                let config = cli.run_config().ok();
                let cap = |f: fn(&ecmarket::config::AssetSettings) -> f64| config.as_ref().map_or(1.0, |c| f(&c.assets));
                let client = NinjaClient::from_env();
                let mut series = Vec::new();
                for (kind, capacity) in [
                    (RenewableKind::Wind, cap(|a| a.wind_capacity)),
                    (RenewableKind::Pv, cap(|a| a.pv_capacity)),
                ] {
                    series.push(client.fetch(&RenewablesQuery { lat: *lat, lon: *lon, year, capacity, kind })?);
                }
                let path = renewables.clone().map_or_else(|| cli.out(&format!("renewables_{year}.csv")), Ok)?;
                write_renewables_csv(year, &series[0], &series[1], &path)?;
                eprintln!("wrote {}", path.display());
                return Ok(ExitCode::SUCCESS);
            }
            let (p, r) = match (prices, renewables) {
                (Some(p), Some(r)) => (p.clone(), r.clone()),
                _ => {
                    let c = cli.run_config()?;
                    (c.data.prices, c.data.renewables)
                }
            };
            let window = load_history(&p, &r)?;
            let summary = serde_json::json!({
                "days": window.len(),
                "first": window.first_date(),
                "last": window.last_date(),
                "dropped": window.dropped.iter().map(|d| serde_json::json!({"date": d.date, "reason": d.reason})).collect::<Vec<_>>(),
            });
            println!("{}", serde_json::to_string_pretty(&summary)?);
        }
        Command::Fan { date } => {
            let inputs = cli.inputs()?;
            let mut config = inputs.config.clone();
            config.reduction_plan = None;
            let inputs = RunInputs { config, ..inputs };
            let tree = pipeline::day_tree(&inputs, *date)?;
            let path = cli.out(&format!("fan_{date}.json"))?;
            tree.write(&path)?;
            eprintln!("{} scenarios -> {}", tree.num_scenarios(), path.display());
        }
        Command::Tree { date } => {
            let inputs = cli.inputs()?;
            let tree = pipeline::day_tree(&inputs, *date)?;
            let path = cli.out(&format!("tree_{date}.json"))?;
            tree.write(&path)?;
            eprintln!("{} scenarios, {} nodes -> {}", tree.num_scenarios(), tree.nodes().len(), path.display());
        }
        Command::Build { tree } => {
            let inputs = cli.inputs()?;
            let tree = ScenarioTree::read(tree)?;
            let model = build_model(&tree, &inputs.assets, &inputs.demand, &pipeline::build_options(&inputs.config))?;
            let mps = cli.out("model.mps")?;
            write_mps(&model, &mps)?;
            std::fs::write(cli.out("registry.json")?, serde_json::to_string_pretty(&model.registry_json())?)?;
            eprintln!("{} columns ({} binary), {} rows -> {}", model.variables.len(), model.num_binaries(), model.rows.len(), mps.display());
        }
        Command::Solve { tree, reference } => {
            let inputs = cli.inputs()?;
            let tree = ScenarioTree::read(tree)?;
            let model = build_model(&tree, &inputs.assets, &inputs.demand, &pipeline::build_options(&inputs.config))?;
            let solver = if *reference {
                SolverSection::Reference(ReferenceLimits::default())
            } else {
                inputs.config.solver.clone()
            };
            cli.out("model.mps")?;
            let start = ecmarket::model::feasibility_witness(&model, &tree, &inputs.assets, &inputs.demand, inputs.config.window);
            let solution = pipeline::solve_in(&model, &solver, &cli.out_dir, start.as_deref())?;
            let residuals = check_solution(&model, &solution, pipeline::CHECK_TOL);
            let mut json = solution.to_json(&model);
            if solution.status.has_values() {
                json["max_residual"] = serde_json::json!(residuals.max_residual());
            }
            std::fs::write(cli.out("solution.json")?, serde_json::to_string_pretty(&json)? + "\n")?;
            eprintln!("{:?}, objective {}", solution.status, solution.objective);
            if !solution.status.has_values() {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Bids { tree, solution } | Command::Report { tree, solution } => {
            let inputs = cli.inputs()?;
            let tree = ScenarioTree::read(tree)?;
            let model = build_model(&tree, &inputs.assets, &inputs.demand, &pipeline::build_options(&inputs.config))?;
            let solution = load_solution(&model, solution)?;
            cli.out("")?;
            if matches!(cli.command, Command::Bids { .. }) {
                pipeline::write_bids(&model, &solution, &tree, &cli.out_dir)?;
            } else {
                let d = pipeline::write_behaviour_reports(&model, &solution, &tree, &inputs.demand, &cli.out_dir)?;
                println!("{}", serde_json::to_string_pretty(&d)?);
            }
        }
        Command::Pipeline => {
            let config = cli.run_config()?;
            let report = pipeline::run_pipeline(config, &cli.out_dir)?;
            eprintln!(
                "{} of {} days succeeded; summary in {}",
                report.days.len() - report.failed(),
                report.days.len(),
                report.out_dir.join("summary.csv").display()
            );
            if !report.all_succeeded() {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
