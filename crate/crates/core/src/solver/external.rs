//! External MILP solver adapter: write MPS, run a command, parse its solution file.
//!
//! Supported solution formats:
//! - [`SolutionFormat::Highs`]: the HiGHS raw solution file (`Highs::writeSolution`
//!   with style 0, or `highs --solution_file`). The file starts with a
//!   `Model status` block, followed by `# Primal solution values`, a
//!   `Feasible`/`None` marker, `Objective <v>`, `# Columns <n>` and one
//!   `<name> <value>` line per column.
//!
//! The bundled `scripts/highs_solve.py` wraps the `highspy` package and writes
//! this format.

use std::collections::HashMap;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::mps::{fmt_num, write_mps};
use super::{Solution, SolveMeta, Status};
use crate::model::{MilpModel, VarId};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolutionFormat {
    #[default]
    Highs,
}

/// Command template with `{mps}` and `{sol}` placeholders, split on whitespace.
///
/// An optional `{start}` placeholder receives a HiGHS-format file holding a
/// feasible starting point, or an empty file when none is known.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExternalSolver {
    pub command: String,
    pub format: SolutionFormat,
    /// Wall-clock limit for the subprocess; it is killed when exceeded.
    pub timeout_s: Option<f64>,
}

impl Default for ExternalSolver {
    fn default() -> Self {
        ExternalSolver {
            command: "python3 scripts/highs_solve.py {mps} {sol}".into(),
            format: SolutionFormat::Highs,
            timeout_s: None,
        }
    }
}

impl ExternalSolver {
    pub fn new(command: impl Into<String>) -> Self {
        ExternalSolver { command: command.into(), ..Default::default() }
    }

    fn argv(&self, mps: &Path, sol: &Path, start: &Path) -> Result<Vec<String>> {
        if !self.command.contains("{mps}") || !self.command.contains("{sol}") {
            return Err(Error::Invalid(format!(
                "solver command {:?} must contain {{mps}} and {{sol}} placeholders",
                self.command
            )));
        }
        let argv: Vec<String> = self
            .command
            .split_whitespace()
            .map(|a| {
                a.replace("{mps}", &mps.to_string_lossy())
                    .replace("{sol}", &sol.to_string_lossy())
                    .replace("{start}", &start.to_string_lossy())
            })
            .collect();
        if argv.is_empty() {
            return Err(Error::Invalid("empty solver command".into()));
        }
        Ok(argv)
    }
}

/// Solves `model` in a scratch directory that is removed afterwards.
pub fn solve_external(model: &MilpModel, solver: &ExternalSolver) -> Result<Solution> {
    let dir = tempfile::Builder::new()
        .prefix("ecmarket-solve")
        .tempdir()
        .map_err(|e| Error::io(std::env::temp_dir(), e))?;
    solve_external_in(model, solver, &dir.path().join("model.mps"), &dir.path().join("model.sol"), None)
}

/// Solves `model`, keeping the MPS, solution and solver log at the given paths.
/// The log goes next to the solution file with a `.log` extension, the start
/// point (when the command asks for one) with `.start`.
pub fn solve_external_in(
    model: &MilpModel,
    solver: &ExternalSolver,
    mps: &Path,
    sol: &Path,
    start: Option<&[f64]>,
) -> Result<Solution> {
    write_mps(model, mps)?;
    if sol.exists() {
        std::fs::remove_file(sol).map_err(|e| Error::io(sol, e))?;
    }
    let start_path = sol.with_extension("start");
    if solver.command.contains("{start}") {
        let text = start.map(|x| highs_start(model, x)).unwrap_or_default();
        std::fs::write(&start_path, text).map_err(|e| Error::io(&start_path, e))?;
    }
    let argv = solver.argv(mps, sol, &start_path)?;
    let log_path: PathBuf = sol.with_extension("log");
    let log = File::create(&log_path).map_err(|e| Error::io(&log_path, e))?;
    let log_err = log.try_clone().map_err(|e| Error::io(&log_path, e))?;
    let start = Instant::now();
    let mut child = Command::new(&argv[0])
        .args(&argv[1..])
        .stdin(Stdio::null())
        .stdout(log)
        .stderr(log_err)
        .spawn()
        .map_err(|e| Error::Solver(format!("cannot start {:?}: {e}", argv[0])))?;
    let limit = solver.timeout_s.map(Duration::from_secs_f64);
    let status = loop {
        if let Some(status) = child.try_wait().map_err(|e| Error::Solver(e.to_string()))? {
            break status;
        }
        if let Some(limit) = limit {
            if start.elapsed() > limit {
                let _ = child.kill();
                let _ = child.wait();
                return Err(Error::Timeout(limit));
            }
        }
        std::thread::sleep(Duration::from_millis(5));
    };
    let wall = start.elapsed().as_secs_f64();
    if !status.success() {
        let tail = std::fs::read_to_string(&log_path).unwrap_or_default();
        let tail: String = tail.lines().rev().take(5).collect::<Vec<_>>().into_iter().rev().collect::<Vec<_>>().join("\n");
        return Err(Error::Solver(format!("solver exited with {status}: {tail}")));
    }
    let text = std::fs::read_to_string(sol).map_err(|e| Error::io(sol, e))?;
    let mut solution = match solver.format {
        SolutionFormat::Highs => parse_highs_solution(model, &text)?,
    };
    solution.meta.wall_time_s = wall;
    if let Some(gap) = parse_gap(&std::fs::read_to_string(&log_path).unwrap_or_default()) {
        solution.meta.gap = Some(gap);
    }
    Ok(solution)
}

/// A HiGHS raw solution with column values only, in the MPS objective sense.
fn highs_start(model: &MilpModel, values: &[f64]) -> String {
    let sign = if model.maximize { -1.0 } else { 1.0 };
    let mut out = format!(
        "Model status\nUnknown\n\n# Primal solution values\nFeasible\nObjective {}\n# Columns {}\n",
        fmt_num(sign * model.objective_value(values)),
        values.len()
    );
    for (j, v) in values.iter().enumerate() {
        out.push_str(&format!("{} {}\n", model.column_name(VarId(j)), fmt_num(*v)));
    }
    out.push_str("# Rows 0\n");
    out
}

fn parse_gap(log: &str) -> Option<f64> {
    log.split_whitespace()
        .find_map(|tok| tok.strip_prefix("gap="))
        .and_then(|g| g.parse::<f64>().ok())
        .filter(|g| g.is_finite())
}

/// Parses a HiGHS raw solution file against `model`'s column names.
pub fn parse_highs_solution(model: &MilpModel, text: &str) -> Result<Solution> {
    let bad = |message: String| Error::Solver(format!("unparseable HiGHS solution: {message}"));
    let mut lines = text.lines().map(str::trim);
    if lines.next() != Some("Model status") {
        return Err(bad("missing 'Model status' header".into()));
    }
    let status_text = lines.next().ok_or_else(|| bad("missing model status".into()))?;
    let meta = SolveMeta { solver: "highs".into(), ..Default::default() };
    let status = match status_text {
        "Optimal" => Status::Optimal,
        "Infeasible" => Status::Infeasible,
        "Unbounded" => Status::Unbounded,
        // Presolve may stop at this when the model is infeasible; the builder
        // bounds every column, so unboundedness cannot occur in our models.
        "Primal infeasible or unbounded" => Status::Infeasible,
        "Time limit reached" | "Iteration limit reached" | "Solution limit reached" | "Interrupted by user" => {
            Status::Limit
        }
        other => return Err(bad(format!("unexpected model status {other:?}"))),
    };
    let mut rest = lines.skip_while(|l| *l != "# Primal solution values");
    if rest.next().is_none() {
        return if status.has_values() {
            Err(bad("missing primal solution block".into()))
        } else {
            Ok(Solution::without_values(status, meta))
        };
    }
    match rest.next() {
        Some("Feasible") => {}
        Some("None") | Some("Infeasible") => {
            return match status {
                Status::Optimal => Err(bad("optimal status without a feasible point".into())),
                Status::Unbounded => Ok(Solution::without_values(status, meta)),
                s => Ok(Solution::without_values(s, meta)),
            };
        }
        other => return Err(bad(format!("unexpected primal marker {other:?}"))),
    }
    if !status.has_values() {
        return Ok(Solution::without_values(status, meta));
    }
    let reported: f64 = rest
        .next()
        .and_then(|l| l.strip_prefix("Objective "))
        .and_then(|v| v.trim().parse().ok())
        .ok_or_else(|| bad("missing objective line".into()))?;
    let count: usize = rest
        .next()
        .and_then(|l| l.strip_prefix("# Columns "))
        .and_then(|v| v.trim().parse().ok())
        .ok_or_else(|| bad("missing column count".into()))?;
    if count != model.variables.len() {
        return Err(bad(format!("{count} columns in file, model has {}", model.variables.len())));
    }
    let index: HashMap<String, usize> =
        (0..model.variables.len()).map(|j| (model.column_name(crate::model::VarId(j)), j)).collect();
    let mut values = vec![f64::NAN; count];
    for _ in 0..count {
        let line = rest.next().ok_or_else(|| bad("truncated column block".into()))?;
        let (name, value) = line.split_once(char::is_whitespace).ok_or_else(|| bad(format!("bad column line {line:?}")))?;
        let &j = index.get(name).ok_or_else(|| bad(format!("unknown column {name}")))?;
        values[j] = value.trim().parse().map_err(|_| bad(format!("bad value in {line:?}")))?;
    }
    let objective = model.objective_value(&values);
    let sign = if model.maximize { -1.0 } else { 1.0 };
    let reported = sign * reported;
    if (objective - reported).abs() > 1e-6 * (1.0 + reported.abs()) {
        log::warn!("HiGHS reported objective {reported}, recomputed {objective}");
    }
    Ok(Solution { status, values, objective, meta })
}
