//! Asset behaviour tables, percentile bands and the welfare decomposition.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::{csv_error, DemandProfile};
use crate::model::{MilpModel, Symbol, VarKey};
use crate::schedule::IM_COUNT;
use crate::solver::Solution;
use crate::tree::ScenarioTree;
use crate::{Error, Result};

fn get(model: &MilpModel, solution: &Solution, key: VarKey) -> f64 {
    model.var(key).map_or(0.0, |v| solution.values[v.0])
}

/// Schedule of every asset in one scenario and hour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviourRow {
    pub hour: usize,
    pub da_sell: f64,
    pub da_buy: f64,
    /// Position in each intraday market; `None` outside its trading hours.
    pub intraday: [Option<f64>; IM_COUNT],
    pub ib_pos: f64,
    pub ib_neg: f64,
    pub flex_demand: f64,
    pub charge: f64,
    pub discharge: f64,
    pub soc: f64,
    pub wind: f64,
    pub pv: f64,
    pub reserve_up_bess: f64,
    pub reserve_down_bess: f64,
    pub reserve_up_fd: f64,
    pub reserve_down_fd: f64,
}

impl BehaviourRow {
    /// Left minus right side of the imbalance definition.
    pub fn balance_residual(&self) -> f64 {
        let im: f64 = self.intraday.iter().flatten().sum();
        (self.ib_pos - self.ib_neg)
            - (self.da_buy + self.wind + self.pv + self.discharge - (self.da_sell + im + self.flex_demand + self.charge))
    }
}

pub fn behaviour_report(model: &MilpModel, solution: &Solution, tree: &ScenarioTree, w: usize) -> Result<Vec<BehaviourRow>> {
    if w >= tree.num_scenarios() {
        return Err(Error::Invalid(format!("scenario {w} outside 0..{}", tree.num_scenarios())));
    }
    let data = tree.scenario(w);
    let v = |s, t| get(model, solution, VarKey::new(s, t, w));
    Ok(model
        .hours()
        .into_iter()
        .map(|t| {
            let mut intraday = [None; IM_COUNT];
            for i in tree.schedule().markets_at(t) {
                intraday[i - 1] = Some(get(model, solution, VarKey::intraday(i, t, w)));
            }
            BehaviourRow {
                hour: t,
                da_sell: v(Symbol::DaSell, t),
                da_buy: v(Symbol::DaBuy, t),
                intraday,
                ib_pos: v(Symbol::ImbalancePos, t),
                ib_neg: v(Symbol::ImbalanceNeg, t),
                flex_demand: v(Symbol::F, t),
                charge: v(Symbol::Charge, t),
                discharge: v(Symbol::Discharge, t),
                soc: v(Symbol::Soc, t),
                wind: data.wind_at(t),
                pv: data.pv_at(t),
                reserve_up_bess: v(Symbol::ReserveUpBess, t),
                reserve_down_bess: v(Symbol::ReserveDownBess, t),
                reserve_up_fd: v(Symbol::ReserveUpFd, t),
                reserve_down_fd: v(Symbol::ReserveDownFd, t),
            }
        })
        .collect())
}

pub fn write_behaviour_csv(rows: &[BehaviourRow], path: &Path) -> Result<()> {
    let err = |e| csv_error(path, e);
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    let mut header: Vec<String> = ["hour", "da_sell", "da_buy"].map(String::from).to_vec();
    header.extend((1..=IM_COUNT).map(|i| format!("im{i}")));
    header.extend(
        [
            "ib_pos", "ib_neg", "f", "c", "d", "soc", "wind", "pv", "r_up_bess", "r_down_bess", "r_up_fd", "r_down_fd",
        ]
        .map(String::from),
    );
    w.write_record(&header).map_err(err)?;
    for r in rows {
        let mut rec = vec![r.hour.to_string(), r.da_sell.to_string(), r.da_buy.to_string()];
        rec.extend(r.intraday.iter().map(|v| v.map(|x| x.to_string()).unwrap_or_default()));
        rec.extend(
            [
                r.ib_pos,
                r.ib_neg,
                r.flex_demand,
                r.charge,
                r.discharge,
                r.soc,
                r.wind,
                r.pv,
                r.reserve_up_bess,
                r.reserve_down_bess,
                r.reserve_up_fd,
                r.reserve_down_fd,
            ]
            .map(|x| x.to_string()),
        );
        w.write_record(&rec).map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandSeries {
    Pv,
    Wind,
    FlexDemand,
    Soc,
}

impl BandSeries {
    pub const ALL: [BandSeries; 4] = [BandSeries::Pv, BandSeries::Wind, BandSeries::FlexDemand, BandSeries::Soc];

    pub fn as_str(&self) -> &'static str {
        match self {
            BandSeries::Pv => "pv",
            BandSeries::Wind => "wind",
            BandSeries::FlexDemand => "f",
            BandSeries::Soc => "soc",
        }
    }
}

pub const PERCENTILES: [f64; 5] = [0.10, 0.25, 0.50, 0.75, 0.90];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub series: BandSeries,
    pub hour: usize,
    /// Values at [`PERCENTILES`].
    pub percentiles: [f64; 5],
    pub min: f64,
    pub max: f64,
}

/// Lower weighted quantile: the smallest value whose cumulative probability reaches `q`.
pub fn weighted_quantile(values: &[(f64, f64)], q: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = sorted.iter().map(|v| v.1).sum();
    let mut cum = 0.0;
    for &(v, p) in &sorted {
        cum += p / total;
        if cum >= q - 1e-12 {
            return v;
        }
    }
    sorted.last().map_or(f64::NAN, |v| v.0)
}

pub fn percentile_report(model: &MilpModel, solution: &Solution, tree: &ScenarioTree, series: BandSeries) -> Vec<Band> {
    model
        .hours()
        .into_iter()
        .map(|t| {
            let values: Vec<(f64, f64)> = (0..tree.num_scenarios())
                .map(|w| {
                    let data = tree.scenario(w);
                    let v = match series {
                        BandSeries::Pv => data.pv_at(t),
                        BandSeries::Wind => data.wind_at(t),
                        BandSeries::FlexDemand => get(model, solution, VarKey::new(Symbol::F, t, w)),
                        BandSeries::Soc => get(model, solution, VarKey::new(Symbol::Soc, t, w)),
                    };
                    (v, tree.probability(w))
                })
                .collect();
            Band {
                series,
                hour: t,
                percentiles: PERCENTILES.map(|q| weighted_quantile(&values, q)),
                min: values.iter().map(|v| v.0).fold(f64::INFINITY, f64::min),
                max: values.iter().map(|v| v.0).fold(f64::NEG_INFINITY, f64::max),
            }
        })
        .collect()
}

pub fn write_bands_csv(bands: &[Band], path: &Path) -> Result<()> {
    let err = |e| csv_error(path, e);
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record(["series", "hour", "min", "p10", "p25", "p50", "p75", "p90", "max"]).map_err(err)?;
    for b in bands {
        let mut rec = vec![b.series.as_str().to_string(), b.hour.to_string(), b.min.to_string()];
        rec.extend(b.percentiles.iter().map(|v| v.to_string()));
        rec.push(b.max.to_string());
        w.write_record(&rec).map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Expected welfare split by market. `eecsw = da + rm + im + ib_pos − ib_neg − fd`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub eecsw: f64,
    pub da: f64,
    pub rm: f64,
    pub im: f64,
    pub ib_pos: f64,
    pub ib_neg: f64,
    pub fd: f64,
}

impl Decomposition {
    /// Net imbalance settlement.
    pub fn ib(&self) -> f64 {
        self.ib_pos - self.ib_neg
    }
}

pub fn eecsw_decomposition(model: &MilpModel, solution: &Solution, tree: &ScenarioTree, demand: &DemandProfile) -> Decomposition {
    let mut d = Decomposition::default();
    for w in 0..tree.num_scenarios() {
        let p = tree.probability(w);
        let data = tree.scenario(w);
        let v = |s, t| get(model, solution, VarKey::new(s, t, w));
        for t in model.hours() {
            d.da += p * data.da(t) * (v(Symbol::DaSell, t) - v(Symbol::DaBuy, t));
            d.rm += p * data.rm(t) * (v(Symbol::ReserveUp, t) + v(Symbol::ReserveDown, t));
            for i in tree.schedule().markets_at(t) {
                let price = data.im(i, t).expect("market trades hour t");
                d.im += p * price * get(model, solution, VarKey::intraday(i, t, w));
            }
            d.ib_pos += p * data.ib_pos(t) * v(Symbol::ImbalancePos, t);
            d.ib_neg += p * data.ib_neg(t) * v(Symbol::ImbalanceNeg, t);
            d.fd += p * demand.flex_cost * (v(Symbol::FPos, t) + v(Symbol::FNeg, t));
        }
    }
    d.eecsw = d.da + d.rm + d.im + d.ib_pos - d.ib_neg - d.fd;
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lower_weighted_quantile() {
        assert_eq!(weighted_quantile(&[(0.0, 0.5), (10.0, 0.5)], 0.5), 0.0);
        assert_eq!(weighted_quantile(&[(10.0, 0.5), (0.0, 0.5)], 0.75), 10.0);
        assert_eq!(weighted_quantile(&[(3.0, 1.0)], 0.1), 3.0);
        let v = [(1.0, 0.1), (2.0, 0.2), (3.0, 0.7)];
        assert_eq!(PERCENTILES.map(|q| weighted_quantile(&v, q)), [1.0, 2.0, 3.0, 3.0, 3.0]);
    }

    #[test]
    fn balance_residual_of_identity_row() {
        let mut intraday = [None; IM_COUNT];
        intraday[0] = Some(0.5);
        let row = BehaviourRow {
            hour: 1,
            da_sell: 0.0,
            da_buy: 1.0,
            intraday,
            ib_pos: 0.5,
            ib_neg: 0.0,
            flex_demand: 3.0,
            charge: 0.0,
            discharge: 0.0,
            soc: 0.5,
            wind: 2.0,
            pv: 1.0,
            reserve_up_bess: 0.0,
            reserve_down_bess: 0.0,
            reserve_up_fd: 0.0,
            reserve_down_fd: 0.0,
        };
        assert_eq!(row.balance_residual(), 0.0);
    }
}
