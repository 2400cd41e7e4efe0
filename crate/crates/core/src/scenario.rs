//! Per-scenario realizations of the random vectors.

use serde::{Deserialize, Serialize};

use crate::schedule::{StageSchedule, HOURS, IM_COUNT, IM_PERIODS};

/// One realization of every random series for a single day.
///
/// Hourly vectors are indexed by `t - 1`. Intraday prices of market `i` are
/// stored at `im_price[i - 1]` and cover only that market's bidding hours.
/// Wind and PV are energies in MWh per hour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioData {
    pub da_price: Vec<f64>,
    pub rm_price: Vec<f64>,
    pub im_price: Vec<Vec<f64>>,
    pub wind: Vec<f64>,
    pub pv: Vec<f64>,
    pub ib_pos_price: Vec<f64>,
    pub ib_neg_price: Vec<f64>,
}

/// A random series, used to address observation components and distance weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Series {
    DayAhead,
    Reserve,
    Intraday(u8),
    Wind,
    Pv,
    ImbalancePos,
    ImbalanceNeg,
}

impl Series {
    pub fn name(&self) -> String {
        match self {
            Series::DayAhead => "da".into(),
            Series::Reserve => "rm".into(),
            Series::Intraday(i) => format!("im{i}"),
            Series::Wind => "wind".into(),
            Series::Pv => "pv".into(),
            Series::ImbalancePos => "ib_pos".into(),
            Series::ImbalanceNeg => "ib_neg".into(),
        }
    }
}

/// Nonnegative per-series weights for scenario distances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesWeights {
    pub da: f64,
    pub rm: f64,
    pub im: [f64; IM_COUNT],
    pub wind: f64,
    pub pv: f64,
    pub ib_pos: f64,
    pub ib_neg: f64,
}

impl Default for SeriesWeights {
    fn default() -> Self {
        SeriesWeights::uniform(1.0)
    }
}

impl SeriesWeights {
    pub fn uniform(w: f64) -> Self {
        SeriesWeights {
            da: w,
            rm: w,
            im: [w; IM_COUNT],
            wind: w,
            pv: w,
            ib_pos: w,
            ib_neg: w,
        }
    }

    pub fn get(&self, series: Series) -> f64 {
        match series {
            Series::DayAhead => self.da,
            Series::Reserve => self.rm,
            Series::Intraday(i) => self.im[i as usize - 1],
            Series::Wind => self.wind,
            Series::Pv => self.pv,
            Series::ImbalancePos => self.ib_pos,
            Series::ImbalanceNeg => self.ib_neg,
        }
    }

    pub fn get_mut(&mut self, series: Series) -> &mut f64 {
        match series {
            Series::DayAhead => &mut self.da,
            Series::Reserve => &mut self.rm,
            Series::Intraday(i) => &mut self.im[i as usize - 1],
            Series::Wind => &mut self.wind,
            Series::Pv => &mut self.pv,
            Series::ImbalancePos => &mut self.ib_pos,
            Series::ImbalanceNeg => &mut self.ib_neg,
        }
    }

    /// Weights `1/σ` from the spread of each series across the given scenarios.
    /// Series with zero spread get weight 1.
    pub fn inverse_std(scenarios: &[ScenarioData]) -> Self {
        let mut weights = SeriesWeights::default();
        if scenarios.len() < 2 {
            return weights;
        }
        for series in all_series() {
            let values: Vec<f64> = scenarios
                .iter()
                .flat_map(|s| s.series(series).iter().copied())
                .collect();
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            let sd = var.sqrt();
            *weights.get_mut(series) = if sd > 1e-12 { 1.0 / sd } else { 1.0 };
        }
        weights
    }
}

/// Every series in canonical order.
pub fn all_series() -> impl Iterator<Item = Series> {
    [Series::DayAhead, Series::Reserve]
        .into_iter()
        .chain((1..=IM_COUNT as u8).map(Series::Intraday))
        .chain([
            Series::Wind,
            Series::Pv,
            Series::ImbalancePos,
            Series::ImbalanceNeg,
        ])
}

impl ScenarioData {
    /// A scenario with every value set to zero.
    pub fn zeros() -> Self {
        ScenarioData {
            da_price: vec![0.0; HOURS],
            rm_price: vec![0.0; HOURS],
            im_price: IM_PERIODS.iter().map(|&d| vec![0.0; d]).collect(),
            wind: vec![0.0; HOURS],
            pv: vec![0.0; HOURS],
            ib_pos_price: vec![0.0; HOURS],
            ib_neg_price: vec![0.0; HOURS],
        }
    }

    pub fn series(&self, series: Series) -> &[f64] {
        match series {
            Series::DayAhead => &self.da_price,
            Series::Reserve => &self.rm_price,
            Series::Intraday(i) => &self.im_price[i as usize - 1],
            Series::Wind => &self.wind,
            Series::Pv => &self.pv,
            Series::ImbalancePos => &self.ib_pos_price,
            Series::ImbalanceNeg => &self.ib_neg_price,
        }
    }

    pub fn series_mut(&mut self, series: Series) -> &mut Vec<f64> {
        match series {
            Series::DayAhead => &mut self.da_price,
            Series::Reserve => &mut self.rm_price,
            Series::Intraday(i) => &mut self.im_price[i as usize - 1],
            Series::Wind => &mut self.wind,
            Series::Pv => &mut self.pv,
            Series::ImbalancePos => &mut self.ib_pos_price,
            Series::ImbalanceNeg => &mut self.ib_neg_price,
        }
    }

    pub fn da(&self, t: usize) -> f64 {
        self.da_price[t - 1]
    }

    pub fn rm(&self, t: usize) -> f64 {
        self.rm_price[t - 1]
    }

    pub fn wind_at(&self, t: usize) -> f64 {
        self.wind[t - 1]
    }

    pub fn pv_at(&self, t: usize) -> f64 {
        self.pv[t - 1]
    }

    pub fn ib_pos(&self, t: usize) -> f64 {
        self.ib_pos_price[t - 1]
    }

    pub fn ib_neg(&self, t: usize) -> f64 {
        self.ib_neg_price[t - 1]
    }

    /// Price of intraday market `market` at hour `t`, if `t` is one of its bidding hours.
    pub fn im(&self, market: usize, t: usize) -> Option<f64> {
        let first = HOURS + 1 - IM_PERIODS[market - 1];
        (t >= first && t <= HOURS).then(|| self.im_price[market - 1][t - first])
    }

    /// Stage at which component `index` (0-based) of `series` is revealed.
    pub fn reveal_stage(schedule: &StageSchedule, series: Series, index: usize) -> usize {
        match series {
            Series::DayAhead => schedule.da_stage,
            Series::Reserve => schedule.rm_stage,
            Series::Intraday(i) => schedule.im_stage(i as usize),
            Series::Wind | Series::Pv | Series::ImbalancePos | Series::ImbalanceNeg => {
                schedule.renewable_stage(index + 1)
            }
        }
    }

    /// Visits every observation component with its series, position and reveal stage.
    pub fn for_each_observation(
        &self,
        schedule: &StageSchedule,
        mut visit: impl FnMut(Series, usize, usize, f64),
    ) {
        for series in all_series() {
            for (k, &v) in self.series(series).iter().enumerate() {
                visit(series, k, Self::reveal_stage(schedule, series, k), v);
            }
        }
    }

    /// Shape problems: wrong vector lengths or non-finite values.
    pub fn shape_problems(&self) -> Vec<String> {
        let mut problems = Vec::new();
        for series in all_series() {
            let expected = match series {
                Series::Intraday(i) => IM_PERIODS[i as usize - 1],
                _ => HOURS,
            };
            let values = match series {
                Series::Intraday(i) if self.im_price.len() < i as usize => {
                    problems.push(format!("missing {} prices", series.name()));
                    continue;
                }
                _ => self.series(series),
            };
            if values.len() != expected {
                problems.push(format!(
                    "{} has {} entries, expected {expected}",
                    series.name(),
                    values.len()
                ));
            }
            if values.iter().any(|v| !v.is_finite()) {
                problems.push(format!("{} has non-finite values", series.name()));
            }
        }
        if self.im_price.len() != IM_COUNT {
            problems.push(format!(
                "{} intraday price vectors, expected {IM_COUNT}",
                self.im_price.len()
            ));
        }
        problems
    }
}
