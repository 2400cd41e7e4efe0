//! Day-block bootstrap of scenario fans from a historical window.

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::EcConfig;
use crate::history::{DayClass, DayRecord, HistoricalWindow};
use crate::reduction::ScenarioFan;
use crate::scenario::ScenarioData;
use crate::schedule::{HOURS, IM_COUNT, IM_PERIODS};
use crate::{Error, Result};

/// Turns one historical day into a scenario, scaling capacity factors by the
/// installed capacities. A missing last intraday market takes the prices of
/// the second market over the same hours.
pub fn day_to_scenario(day: &DayRecord, config: &EcConfig) -> ScenarioData {
    let mut im_price: Vec<Vec<f64>> = Vec::with_capacity(IM_COUNT);
    for (i, prices) in day.im_price.iter().enumerate() {
        let values = match prices {
            Some(v) => v.clone(),
            None => {
                let d = IM_PERIODS[i];
                let second = day.im_price[1].as_ref().expect("second market is always complete");
                second[second.len() - d..].to_vec()
            }
        };
        im_price.push(values);
    }
    ScenarioData {
        da_price: day.da_price.clone(),
        rm_price: day.rm_price.clone(),
        im_price,
        wind: day.wind_cf.iter().map(|cf| cf * config.wind_capacity).collect(),
        pv: day.pv_cf.iter().map(|cf| cf * config.pv_capacity).collect(),
        ib_pos_price: day.ib_pos_price.clone(),
        ib_neg_price: day.ib_neg_price.clone(),
    }
}

/// Samples `n` scenarios for `target`, each copying one historical day of the
/// same weekday class drawn uniformly with replacement.
pub fn sample_fan(window: &HistoricalWindow, config: &EcConfig, n: usize, seed: u64, target: NaiveDate) -> Result<ScenarioFan> {
    if n == 0 {
        return Err(Error::Invalid("fan size must be at least 1".into()));
    }
    let (_, scenarios) = sample_days(window, config, n, seed, target)?;
    Ok(ScenarioFan::uniform(scenarios))
}

/// Like [`sample_fan`] but also returns the drawn day indices into `window.days`.
pub fn sample_days(
    window: &HistoricalWindow,
    config: &EcConfig,
    n: usize,
    seed: u64,
    target: NaiveDate,
) -> Result<(Vec<usize>, Vec<ScenarioData>)> {
    let class = DayClass::of(target);
    let pool = window.class_indices(class);
    if pool.is_empty() {
        return Err(Error::EmptyDayClass(class.as_str()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let drawn: Vec<usize> = (0..n).map(|_| pool[rng.gen_range(0..pool.len())]).collect();
    let scenarios = drawn.iter().map(|&k| day_to_scenario(&window.days[k], config)).collect();
    Ok((drawn, scenarios))
}

/// Historical mean of each hour of `series` over the days of `class`.
pub fn class_mean(window: &HistoricalWindow, class: DayClass, series: impl Fn(&DayRecord) -> &[f64]) -> Vec<f64> {
    let pool = window.class_indices(class);
    let mut mean = vec![0.0; HOURS];
    for &k in &pool {
        for (m, v) in mean.iter_mut().zip(series(&window.days[k])) {
            *m += v / pool.len() as f64;
        }
    }
    mean
}
