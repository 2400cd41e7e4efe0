#![allow(dead_code)]

use std::path::PathBuf;
use std::process::Command;

use ecmarket::reduction::ScenarioFan;
use ecmarket::scenario::ScenarioData;
use ecmarket::solver::ExternalSolver;
use rand::Rng;

pub fn repo_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn highs_available() -> bool {
    Command::new("python3")
        .args(["-c", "import highspy"])
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

/// HiGHS through the bundled script, solving to a 1e-9 gap.
pub fn highs() -> ExternalSolver {
    let script = repo_root().join("scripts/highs_solve.py");
    ExternalSolver::new(format!("python3 {} {{mps}} {{sol}}", script.display()))
}

/// A fan of `n` scenarios with independent uniform values and random probabilities.
pub fn random_fan(rng: &mut impl Rng, n: usize) -> ScenarioFan {
    let scenarios: Vec<ScenarioData> = (0..n)
        .map(|_| {
            let mut s = ScenarioData::zeros();
            for t in 0..24 {
                s.da_price[t] = rng.gen_range(0.0..150.0);
                s.rm_price[t] = rng.gen_range(0.0..30.0);
                s.wind[t] = rng.gen_range(0.0..30.0);
                s.pv[t] = rng.gen_range(0.0..20.0);
                s.ib_pos_price[t] = rng.gen_range(0.0..100.0);
                s.ib_neg_price[t] = rng.gen_range(50.0..200.0);
            }
            for market in s.im_price.iter_mut() {
                market.iter_mut().for_each(|p| *p = rng.gen_range(0.0..150.0));
            }
            s
        })
        .collect();
    let weights: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
    let total: f64 = weights.iter().sum();
    ScenarioFan { scenarios, probabilities: weights.iter().map(|w| w / total).collect() }
}
