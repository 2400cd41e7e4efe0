//! Acceptance suite. Every criterion prints one `PASS`/`FAIL` line to stderr
//! (bypassing the test harness capture) and then asserts.
//!
//! `ECMARKET_ACCEPTANCE_TIME_LIMIT` sets the per-day HiGHS time limit of the
//! 31-day external pipeline run (seconds, default 5).

mod common;

use std::io::Write;
use std::path::Path;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use chrono::NaiveDate;
use ecmarket::bids::extract_da_curve;
use ecmarket::config::{AssetSettings, DemandProfile, EcConfig};
use ecmarket::instances::random_tiny;
use ecmarket::model::{build_model, BuildOptions, MilpModel, Symbol, VarKey};
use ecmarket::pipeline::{day_tree, run_pipeline, RunConfig, RunInputs, SolverSection};
use ecmarket::reduction::{build_tree, forward_select, forward_select_matrix, ReductionPlan};
use ecmarket::report::eecsw_decomposition;
use ecmarket::scenario::{ScenarioData, SeriesWeights};
use ecmarket::schedule::{HourWindow, StageSchedule, HOURS, IM_COUNT};
use ecmarket::solver::mps::to_mps_string;
use ecmarket::solver::{check_solution, solve_external, solve_reference, ExternalSolver, Solution};
use ecmarket::tree::ScenarioTree;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const RESIDUAL_TOL: f64 = 1e-7;
const NAC_TOL: f64 = 1e-7;
const ORACLE_REL: f64 = 1e-6;
const DECOMP_REL: f64 = 1e-6;
const TINY_INSTANCES: u64 = 24;

fn verdict(id: &str, title: &str, pass: bool, detail: &str) {
    let line = format!("{} [{id}] {title}: {detail}\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(pass, "[{id}] {title}: {detail}");
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / (1.0 + a.abs().max(b.abs()))
}

struct Solved {
    name: String,
    tree: ScenarioTree,
    demand: DemandProfile,
    model: MilpModel,
    solution: Solution,
}

struct Corpus {
    solved: Vec<Solved>,
    /// (instance, reference objective, external objective)
    oracle: Vec<(String, f64, f64)>,
    oracle_time: Duration,
    highs: bool,
}

fn window_model(tree: &ScenarioTree, config: &EcConfig, demand: &DemandProfile, window: HourWindow) -> MilpModel {
    build_model(tree, config, demand, &BuildOptions { window, elastic_penalty: None }).unwrap()
}

fn ymd(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).unwrap()
}

/// Zero renewables and demand, with intraday prices copying the day-ahead ones.
fn price_only_scenario(da: &[(usize, f64)]) -> ScenarioData {
    let mut s = ScenarioData::zeros();
    for t in 1..=HOURS {
        s.da_price[t - 1] = 50.0;
        s.ib_pos_price[t - 1] = 0.0;
        s.ib_neg_price[t - 1] = 1000.0;
    }
    for &(t, p) in da {
        s.da_price[t - 1] = p;
    }
    let schedule = StageSchedule::standard();
    for i in 1..=IM_COUNT {
        let first = schedule.im_first_hour(i);
        for (k, p) in s.im_price[i - 1].iter_mut().enumerate() {
            *p = s.da_price[first - 1 + k];
        }
    }
    s
}

fn bess_only(power: f64) -> (EcConfig, DemandProfile) {
    let demand = DemandProfile::flat(0.0, 0.0, 1.0);
    let assets = AssetSettings {
        pv_capacity: 0.0,
        wind_capacity: 0.0,
        bess_energy: 10.0,
        bess_power: power,
        bess_efficiency: 1.0,
        soc_min: 0.0,
        soc_max: 1.0,
        soc_init: 0.5,
        soc_final: 0.5,
        min_da_bid: 0.1,
        ib_cap_fraction: 0.0,
        ib_pos_cap: Some(vec![5.0; HOURS]),
        ib_neg_cap: Some(vec![5.0; HOURS]),
        ..AssetSettings::default()
    };
    (assets.resolve(&demand).unwrap(), demand)
}

/// Two equally likely price paths: cheap-then-dear and dear-then-cheap.
fn combined_instance() -> (ScenarioTree, EcConfig, DemandProfile, HourWindow) {
    let (config, demand) = bess_only(2.0);
    let a = price_only_scenario(&[(23, 10.0), (24, 100.0)]);
    let b = price_only_scenario(&[(23, 100.0), (24, 10.0)]);
    let tree = ScenarioTree::uniform_fan(StageSchedule::standard(), vec![a, b]).unwrap();
    (tree, config, demand, HourWindow::new(23, 24).unwrap())
}

fn synthetic_inputs(dir: &Path, fan: usize, plan: &[(usize, usize)], window: HourWindow) -> RunInputs {
    let mut config = RunConfig::load(&common::repo_root().join("configs/small.json")).unwrap();
    config.fan.size = fan;
    config.reduction_plan = Some(ReductionPlan::new(plan.iter().copied()));
    config.window = window;
    config.demand.intervals.clear();
    let _ = dir;
    RunInputs::load(config).unwrap()
}

fn corpus() -> &'static Corpus {
    static CORPUS: OnceLock<Corpus> = OnceLock::new();
    CORPUS.get_or_init(|| {
        let highs = common::highs_available();
        let solver = common::highs();
        let mut solved = Vec::new();
        let mut oracle = Vec::new();
        let start = Instant::now();
        for seed in 0..TINY_INSTANCES {
            let inst = random_tiny(seed);
            let model = inst.build().unwrap();
            let reference = solve_reference(&model).unwrap();
            if highs {
                let external = solve_external(&model, &solver).unwrap();
                oracle.push((format!("tiny-{seed}"), reference.objective, external.objective));
                solved.push(Solved {
                    name: format!("tiny-{seed}/highs"),
                    tree: inst.tree.clone(),
                    demand: inst.demand.clone(),
                    model: inst.build().unwrap(),
                    solution: external,
                });
            }
            solved.push(Solved { name: format!("tiny-{seed}/reference"), tree: inst.tree, demand: inst.demand, model, solution: reference });
        }
        let oracle_time = start.elapsed();

        let (tree, config, demand, window) = combined_instance();
        let model = window_model(&tree, &config, &demand, window);
        let solution = solve_reference(&model).unwrap();
        solved.push(Solved { name: "combined".into(), tree, demand, model, solution });

        // Reduced trees from the bundled synthetic history, afternoon/evening window.
        if highs {
            let tmp = tempfile::tempdir().unwrap();
            let inputs = synthetic_inputs(tmp.path(), 40, &[(1, 2), (3, 2)], HourWindow::new(19, 24).unwrap());
            for day in [4u32, 9] {
                let date = ymd(2023, 12, day);
                let tree = day_tree(&inputs, date).unwrap();
                let model = window_model(&tree, &inputs.assets, &inputs.demand, inputs.config.window);
                let solution = solve_external(&model, &solver).unwrap();
                solved.push(Solved { name: format!("synthetic-{date}"), tree, demand: inputs.demand.clone(), model, solution });
            }
        }
        Corpus { solved, oracle, oracle_time, highs }
    })
}

#[test]
fn c1_oracle_equivalence() {
    let c = corpus();
    let title = "oracle equivalence (reference vs HiGHS on random tiny instances)";
    if !c.highs {
        verdict("C1", title, false, "python3 with highspy is not available");
        return;
    }
    let worst = c.oracle.iter().map(|(_, r, e)| rel(*r, *e)).fold(0.0, f64::max);
    let bad: Vec<&String> = c.oracle.iter().filter(|(_, r, e)| rel(*r, *e) > ORACLE_REL).map(|o| &o.0).collect();
    let binaries_ok = (0..TINY_INSTANCES).all(|s| random_tiny(s).build().unwrap().num_binaries() <= 30);
    let pass = c.oracle.len() >= 20 && bad.is_empty() && binaries_ok && c.oracle_time < Duration::from_secs(60);
    verdict(
        "C1",
        title,
        pass,
        &format!(
            "{} instances, max rel diff {worst:.2e} (tol {ORACLE_REL:e}), {:.1}s total (limit 60s), mismatches {bad:?}",
            c.oracle.len(),
            c.oracle_time.as_secs_f64()
        ),
    );
}

#[test]
fn c2_deterministic_equivalence() {
    // BESS arbitrage toy: buy P^B at hour 23 for 40, sell at hour 24 for 40 + Δ.
    let mut toy = Vec::new();
    for (power, delta) in [(2.0, 15.0), (1.5, 60.0), (3.0, 0.5)] {
        let (config, demand) = bess_only(power);
        let data = price_only_scenario(&[(23, 40.0), (24, 40.0 + delta)]);
        let tree = ScenarioTree::single(StageSchedule::standard(), data);
        let model = window_model(&tree, &config, &demand, HourWindow::new(23, 24).unwrap());
        let sol = solve_reference(&model).unwrap();
        let eecsw = eecsw_decomposition(&model, &sol, &tree, &demand).eecsw;
        toy.push((power, delta, eecsw, (eecsw - delta * power).abs()));
    }
    let toy_ok = toy.iter().all(|t| t.3 <= 1e-6);

    // One-scenario synthetic days: EECSW of the stochastic machinery equals the
    // optimum of the same deterministic model solved independently.
    let tmp = tempfile::tempdir().unwrap();
    let inputs = synthetic_inputs(tmp.path(), 1, &[], HourWindow::new(21, 24).unwrap());
    let mut det = Vec::new();
    for day in [5u32, 16, 23] {
        let date = ymd(2023, 12, day);
        let tree = day_tree(&inputs, date).unwrap();
        assert_eq!(tree.num_scenarios(), 1);
        let model = window_model(&tree, &inputs.assets, &inputs.demand, inputs.config.window);
        let sol = solve_reference(&model).unwrap();
        let eecsw = eecsw_decomposition(&model, &sol, &tree, &inputs.demand).eecsw;
        let copies = ScenarioTree::uniform_fan(tree.schedule().clone(), vec![tree.scenario(0).clone(); 3]).unwrap();
        let copies_model = window_model(&copies, &inputs.assets, &inputs.demand, inputs.config.window);
        let other = if common::highs_available() {
            solve_external(&copies_model, &common::highs()).unwrap().objective
        } else {
            f64::NAN
        };
        det.push((date, eecsw, sol.objective, other));
    }
    let det_ok = det.iter().all(|(_, e, o, x)| rel(*e, *o) <= 1e-6 && rel(*e, *x) <= 1e-6);
    verdict(
        "C2",
        "deterministic equivalence and BESS arbitrage toy",
        toy_ok && det_ok,
        &format!(
            "toy (P^B, Δ, EECSW, |EECSW-Δ·P^B|) = {:?}; 1-scenario days (EECSW, optimum, 3-copy HiGHS optimum) = {:?}",
            toy.iter().map(|t| (t.0, t.1, t.2, t.3)).collect::<Vec<_>>(),
            det.iter().map(|d| (d.0.to_string(), d.1, d.2, d.3)).collect::<Vec<_>>()
        ),
    );
}

#[test]
fn c3_constraint_residuals() {
    let c = corpus();
    let mut worst = (0.0f64, String::new());
    let mut dirty = Vec::new();
    for s in &c.solved {
        let report = check_solution(&s.model, &s.solution, RESIDUAL_TOL);
        if report.max_residual() > worst.0 {
            worst = (report.max_residual(), s.name.clone());
        }
        if !report.is_clean() {
            dirty.push(s.name.clone());
        }
    }
    verdict(
        "C3",
        "constraint residual suite",
        dirty.is_empty(),
        &format!(
            "{} solved instances, max residual {:.2e} ({}), tol {RESIDUAL_TOL:e}, failing {dirty:?}",
            c.solved.len(),
            worst.0,
            worst.1
        ),
    );
}

/// Largest intra-cluster spread of every nonanticipative variable, derived
/// from the stage table rather than from the model's own rows.
fn nac_disagreement(model: &MilpModel, sol: &Solution, tree: &ScenarioTree) -> f64 {
    let schedule = tree.schedule();
    let value = |key: VarKey| model.var(key).map(|v| sol.value(v));
    let spread = |stage: usize, key: &dyn Fn(usize) -> VarKey| -> f64 {
        let mut worst = 0.0f64;
        for cluster in tree.clusters_at(stage).unwrap() {
            let vals: Vec<f64> = cluster.scenarios.iter().filter_map(|&w| value(key(w))).collect();
            if let (Some(lo), Some(hi)) = (
                vals.iter().copied().reduce(f64::min),
                vals.iter().copied().reduce(f64::max),
            ) {
                worst = worst.max(hi - lo);
            }
        }
        worst
    };
    let mut worst = 0.0f64;
    for t in model.hours() {
        use Symbol::*;
        for s in [DaSell, DaBuy, DaSellOn, DaBuyOn, ReserveUp, ReserveDown, ReserveUpBess, ReserveDownBess, ReserveUpFd, ReserveDownFd] {
            worst = worst.max(spread(1, &|w| VarKey::new(s, t, w)));
        }
        for i in schedule.markets_at(t) {
            worst = worst.max(spread(schedule.im_stage(i) - 1, &|w| VarKey::intraday(i, t, w)));
        }
        let sr = schedule.renewable_stage(t);
        for s in [F, FPos, FNeg, Charge, Discharge, Id, Soc] {
            worst = worst.max(spread(sr - 1, &|w| VarKey::new(s, t, w)));
        }
        for s in [ImbalancePos, ImbalanceNeg] {
            worst = worst.max(spread(sr, &|w| VarKey::new(s, t, w)));
        }
    }
    worst
}

#[test]
fn c4_nonanticipativity() {
    let c = corpus();
    let mut worst = (0.0f64, String::new());
    let mut multi = 0;
    for s in &c.solved {
        if s.tree.num_scenarios() > 1 {
            multi += 1;
        }
        let d = nac_disagreement(&s.model, &s.solution, &s.tree);
        if d >= worst.0 {
            worst = (d, s.name.clone());
        }
    }
    verdict(
        "C4",
        "nonanticipativity suite",
        worst.0 <= NAC_TOL,
        &format!(
            "{} solved instances ({multi} with several scenarios), max intra-cluster disagreement {:.2e} ({}), tol {NAC_TOL:e}",
            c.solved.len(),
            worst.0,
            worst.1
        ),
    );
}

#[test]
fn c5_bid_monotonicity() {
    let c = corpus();
    let mut curves = 0;
    let mut problems = Vec::new();
    let mut combined = Vec::new();
    for s in &c.solved {
        for t in s.model.hours() {
            match extract_da_curve(&s.model, &s.solution, &s.tree, t, NAC_TOL) {
                Ok(curve) => {
                    curves += 1;
                    problems.extend(curve.violations(1e-7).into_iter().map(|v| format!("{}: {v}", s.name)));
                    if curve.is_combined(1e-7) {
                        combined.push(format!("{} h{t}", s.name));
                    }
                }
                Err(e) => problems.push(format!("{}: {e}", s.name)),
            }
        }
    }
    let constructed = combined.iter().any(|n| n.starts_with("combined "));
    verdict(
        "C5",
        "bid monotonicity suite",
        problems.is_empty() && constructed,
        &format!(
            "{curves} DA curves, violations {problems:?}; combined buy/sell curves: {combined:?}"
        ),
    );
}

#[test]
fn c6_reduction_oracle() {
    let points = [0.0f64, 1.0, 10.0];
    let dist: Vec<Vec<f64>> = points.iter().map(|a| points.iter().map(|b| (a - b).abs()).collect()).collect();
    let probs = vec![1.0 / 3.0; 3];
    let k1 = forward_select_matrix(&dist, &probs, 1);
    let k2 = forward_select_matrix(&dist, &probs, 2);
    let k3 = forward_select_matrix(&dist, &probs, 3);
    let ok1 = k1.kept == [1] && (k1.probabilities[0] - 1.0).abs() < 1e-12;
    let ok2 = k2.kept == [1, 2]
        && (k2.probabilities[0] - 2.0 / 3.0).abs() < 1e-12
        && (k2.probabilities[1] - 1.0 / 3.0).abs() < 1e-12;
    let ok3 = k3.kept == [0, 1, 2] && k3.probabilities == probs;

    let schedule = StageSchedule::standard();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.gen_range(2..=30);
        let fan = common::random_fan(&mut rng, n);
        let k = rng.gen_range(1..=n);
        let stage = rng.gen_range(1..=schedule.last_stage());
        let sel = forward_select(&fan, k, stage, &SeriesWeights::inverse_std(&fan.scenarios), &schedule).unwrap();
        worst = worst.max((sel.probabilities.iter().sum::<f64>() - 1.0).abs());
        let tree = build_tree(&fan, &ReductionPlan::new([(1, k.min(3)), (stage.max(2), 1)]), &schedule).unwrap();
        worst = worst.max((tree.probabilities().iter().sum::<f64>() - 1.0).abs());
    }
    verdict(
        "C6",
        "reduction oracle",
        ok1 && ok2 && ok3 && worst <= 1e-12,
        &format!(
            "k=1 kept {:?} p {:?}; k=2 kept {:?} p {:?}; k=N identity {ok3}; max mass error over 100 random fans {worst:.1e}",
            k1.kept, k1.probabilities, k2.kept, k2.probabilities
        ),
    );
}

#[test]
fn c7_decomposition_identity() {
    let c = corpus();
    let mut worst = (0.0f64, String::new());
    for s in &c.solved {
        let d = eecsw_decomposition(&s.model, &s.solution, &s.tree, &s.demand);
        let sum = d.da + d.rm + d.im + d.ib_pos - d.ib_neg - d.fd;
        let e = rel(sum, s.solution.objective).max(rel(d.eecsw, s.solution.objective));
        if e >= worst.0 {
            worst = (e, s.name.clone());
        }
    }
    verdict(
        "C7",
        "decomposition identity",
        worst.0 <= DECOMP_REL,
        &format!(
            "{} solved instances, max rel |DA+RM+IM+IB+−IB−−FD − objective| {:.2e} ({}), tol {DECOMP_REL:e}",
            c.solved.len(),
            worst.0,
            worst.1
        ),
    );
}

fn day_dirs_complete(out: &Path, days: &[NaiveDate]) -> Vec<String> {
    let mut missing = Vec::new();
    for d in days {
        let dir = out.join(d.to_string());
        for name in [
            "tree.json",
            "model.mps",
            "solution.json",
            "da_curves.csv",
            "da_curve_steps.csv",
            "price_accepting_bids.csv",
            "behaviour/scenario_000.csv",
            "percentiles.csv",
            "decomposition.json",
            "day.log",
        ] {
            if !dir.join(name).is_file() {
                missing.push(format!("{d}/{name}"));
            }
        }
    }
    missing
}

fn summary_rows(out: &Path) -> Vec<Vec<String>> {
    let text = std::fs::read_to_string(out.join("summary.csv")).unwrap_or_default();
    text.lines().skip(1).map(|l| l.split(',').map(str::to_owned).collect()).collect()
}

#[test]
fn c8_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let configs = common::repo_root().join("configs");
    let mut details = Vec::new();
    let mut pass = true;

    // Reference-solver mode on the reduced preset.
    let config = RunConfig::load(&configs.join("reference.json")).unwrap();
    let max_leaves = config.reduction_plan.as_ref().unwrap().max_leaves();
    let days = config.days.dates();
    let out = tmp.path().join("reference");
    let start = Instant::now();
    let report = run_pipeline(config, &out).unwrap();
    let rows = summary_rows(&out);
    let missing = day_dirs_complete(&out, &days);
    let scen_ok = rows.iter().all(|r| r[2].parse::<usize>().is_ok_and(|n| n <= 3));
    let ok = report.all_succeeded() && rows.len() == 31 && missing.is_empty() && scen_ok && max_leaves <= 3;
    pass &= ok;
    details.push(format!(
        "reference preset: {} rows, {} failed, ≤3 scenarios {scen_ok}, missing artifacts {}, {:.1}s",
        rows.len(),
        report.failed(),
        missing.len(),
        start.elapsed().as_secs_f64()
    ));

    // External solver on the full preset: fan of 200 reduced to at most 48 scenarios.
    if common::highs_available() {
        let limit: f64 = std::env::var("ECMARKET_ACCEPTANCE_TIME_LIMIT").ok().and_then(|v| v.parse().ok()).unwrap_or(5.0);
        let mut config = RunConfig::load(&configs.join("full.json")).unwrap();
        let fan_size = config.fan.size;
        let max_leaves = config.reduction_plan.as_ref().unwrap().max_leaves();
        let hard = limit + 60.0;
        if let SolverSection::External(s) = &mut config.solver {
            s.command = s.command.replace("--time-limit 120", &format!("--time-limit {limit}"));
            assert!(s.command.contains(&format!("--time-limit {limit}")));
            s.timeout_s = Some(hard);
        }
        let out = tmp.path().join("full");
        let start = Instant::now();
        let report = run_pipeline(config, &out).unwrap();
        let rows = summary_rows(&out);
        let missing = day_dirs_complete(&out, &days);
        let mut statuses = std::collections::BTreeMap::<String, usize>::new();
        let mut slowest = 0.0f64;
        let mut max_residual = 0.0f64;
        for d in &days {
            let Ok(text) = std::fs::read_to_string(out.join(d.to_string()).join("solution.json")) else { continue };
            let v: serde_json::Value = serde_json::from_str(&text).unwrap();
            *statuses.entry(v["status"].as_str().unwrap_or("?").to_owned()).or_default() += 1;
            slowest = slowest.max(v["meta"]["wall_time_s"].as_f64().unwrap_or(f64::INFINITY));
            max_residual = max_residual.max(v["max_residual"].as_f64().unwrap_or(f64::INFINITY));
        }
        let scenarios: Vec<usize> = rows.iter().filter_map(|r| r[2].parse().ok()).collect();
        let ok = report.all_succeeded()
            && rows.len() == 31
            && missing.is_empty()
            && fan_size == 200
            && max_leaves <= 48
            && scenarios.iter().all(|&n| n <= 48)
            && slowest <= hard
            && max_residual <= RESIDUAL_TOL;
        pass &= ok;
        details.push(format!(
            "external preset (fan 200, plan ≤{max_leaves} leaves, HiGHS limit {limit}s): {} rows, {} failed, scenarios {}..={}, statuses {statuses:?}, slowest solve {slowest:.1}s (hard limit {hard}s), max residual {max_residual:.1e}, missing artifacts {}, {:.0}s",
            rows.len(),
            report.failed(),
            scenarios.iter().min().unwrap_or(&0),
            scenarios.iter().max().unwrap_or(&0),
            missing.len(),
            start.elapsed().as_secs_f64()
        ));
    } else {
        details.push("external preset skipped: no external MILP solver installed".into());
    }
    verdict("C8", "31-day pipeline on bundled synthetic data", pass, &details.join("; "));
}

#[test]
fn c9_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let configs = common::repo_root().join("configs");
    let mut details = Vec::new();

    // MPS of the full preset, built twice from scratch for a few days.
    let mut mps_same = true;
    for day in [1u32, 15, 31] {
        let date = ymd(2023, 12, day);
        let texts: Vec<String> = (0..2)
            .map(|_| {
                let inputs = RunInputs::load(RunConfig::load(&configs.join("full.json")).unwrap()).unwrap();
                let tree = day_tree(&inputs, date).unwrap();
                to_mps_string(&window_model(&tree, &inputs.assets, &inputs.demand, inputs.config.window))
            })
            .collect();
        mps_same &= texts[0] == texts[1];
    }
    details.push(format!("full-preset MPS for 3 days byte-identical: {mps_same}"));

    // Whole runs twice: every MPS file and the summary must match.
    let mut runs_same = true;
    let mut presets: Vec<(&str, RunConfig)> = vec![("reference", RunConfig::load(&configs.join("reference.json")).unwrap())];
    if common::highs_available() {
        let mut small = RunConfig::load(&configs.join("small.json")).unwrap();
        small.window = HourWindow::new(19, 24).unwrap();
        small.demand.intervals.clear();
        small.days.last = small.days.first.succ_opt().unwrap();
        if let SolverSection::External(s) = &mut small.solver {
            *s = ExternalSolver { timeout_s: s.timeout_s, ..common::highs() };
        }
        presets.push(("small-external", small));
    }
    for (name, config) in presets {
        let days = config.days.dates();
        let outs: Vec<_> = (0..2).map(|k| tmp.path().join(format!("{name}-{k}"))).collect();
        let mut failed = 0;
        for out in &outs {
            failed += run_pipeline(config.clone(), out).unwrap().failed();
        }
        let read = |p: &Path| std::fs::read(p).unwrap_or_default();
        let summary_same = read(&outs[0].join("summary.csv")) == read(&outs[1].join("summary.csv"));
        let mps_same = days.iter().all(|d| {
            let f = |o: &Path| read(&o.join(d.to_string()).join("model.mps"));
            let a = f(&outs[0]);
            !a.is_empty() && a == f(&outs[1])
        });
        runs_same &= summary_same && mps_same && failed == 0;
        details.push(format!(
            "{name} preset x2 ({} days): summary identical {summary_same}, MPS identical {mps_same}, failed days {failed}",
            days.len()
        ));
    }
    verdict("C9", "determinism", mps_same && runs_same, &details.join("; "));
}
