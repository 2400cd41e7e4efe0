//! Small randomized problem instances for oracle comparisons and property tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{AssetSettings, DemandInterval, DemandProfile, EcConfig};
use crate::model::{build_model, BuildOptions, MilpModel};
use crate::scenario::ScenarioData;
use crate::schedule::{HourWindow, StageSchedule};
use crate::tree::ScenarioTree;
use crate::Result;

/// Everything needed to build one model.
#[derive(Debug, Clone)]
pub struct Instance {
    pub tree: ScenarioTree,
    pub config: EcConfig,
    pub demand: DemandProfile,
    pub window: HourWindow,
}

impl Instance {
    pub fn build(&self) -> Result<MilpModel> {
        let options = BuildOptions { window: self.window, elastic_penalty: None };
        build_model(&self.tree, &self.config, &self.demand, &options)
    }
}

fn random_scenario(rng: &mut ChaCha8Rng, schedule: &StageSchedule, base: Option<(&ScenarioData, usize)>) -> ScenarioData {
    let mut fresh = ScenarioData::zeros();
    for t in 0..24 {
        let da = rng.gen_range(20.0..80.0);
        fresh.da_price[t] = da;
        fresh.rm_price[t] = rng.gen_range(0.0..20.0);
        fresh.wind[t] = rng.gen_range(0.0..30.0);
        fresh.pv[t] = rng.gen_range(0.0..15.0);
        fresh.ib_pos_price[t] = rng.gen_range(0.0..da);
        fresh.ib_neg_price[t] = rng.gen_range(da..1.5 * da);
    }
    for prices in fresh.im_price.iter_mut() {
        for p in prices.iter_mut() {
            *p = rng.gen_range(15.0..85.0);
        }
    }
    let Some((parent, split)) = base else {
        return fresh;
    };
    // Keep everything the parent has revealed before the split stage.
    let mut data = parent.clone();
    fresh.for_each_observation(schedule, |series, k, stage, v| {
        if stage >= split {
            data.series_mut(series)[k] = v;
        }
    });
    data
}

/// A random instance with 1–3 scenarios and 2–4 hours, at most 30 binaries.
///
/// Scenario ω ≥ 1 shares its history with ω − 1 up to a random split stage,
/// so the tree mixes fans and deeper branching.
pub fn random_tiny(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let schedule = StageSchedule::standard();
    let scenarios = rng.gen_range(1..=3usize);
    let max_hours = (10 / scenarios).min(4);
    let hours = rng.gen_range(2..=max_hours);
    let first = rng.gen_range(1..=25 - hours);
    let window = HourWindow::new(first, first + hours - 1).expect("window within the day");

    let last = schedule.last_stage();
    let mut data: Vec<ScenarioData> = Vec::new();
    let mut labels: Vec<Vec<usize>> = Vec::new();
    for w in 0..scenarios {
        if w == 0 {
            data.push(random_scenario(&mut rng, &schedule, None));
            labels.push(vec![0; schedule.total_stages]);
            continue;
        }
        let split = rng.gen_range(1..=last);
        let d = random_scenario(&mut rng, &schedule, Some((&data[w - 1], split)));
        let l = (0..schedule.total_stages).map(|s| if s < split { labels[w - 1][s] } else { w }).collect();
        data.push(d);
        labels.push(l);
    }
    let weights: Vec<f64> = (0..scenarios).map(|_| rng.gen_range(0.2..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let probabilities = weights.iter().map(|w| w / total).collect();
    let tree = ScenarioTree::from_labels(schedule, data, probabilities, &labels).expect("consistent labels");

    let central: Vec<f64> = (0..24).map(|_| rng.gen_range(2.0..8.0)).collect();
    let band: Vec<f64> = (0..24).map(|_| rng.gen_range(0.5..3.0)).collect();
    let mut demand = DemandProfile {
        min: central.iter().zip(&band).map(|(c, b)| (c - b).max(0.0)).collect(),
        max: central.iter().zip(&band).map(|(c, b)| c + b).collect(),
        central,
        intervals: Vec::new(),
        flex_cost: rng.gen_range(1.0..10.0),
    };
    if rng.gen_bool(0.5) {
        demand.intervals.push(DemandInterval { first: window.first, last: window.first + 1, fraction: 0.5 });
    }
    let assets = AssetSettings {
        bess_energy: rng.gen_range(4.0..12.0),
        bess_power: rng.gen_range(1.0..4.0),
        bess_efficiency: rng.gen_range(0.8..1.0),
        im_ratio: rng.gen_range(0.1..0.5),
        ib_cap_fraction: 1.0,
        ..AssetSettings::default()
    };
    let config = assets.resolve(&demand).expect("valid random assets");
    Instance { tree, config, demand, window }
}
