//! Energy-community assets, market limits and the flexible demand profile.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::schedule::HOURS;
use crate::{Error, Result};

/// Fully resolved parameters of the energy community.
///
/// Time-indexed vectors hold one entry per hour (`t - 1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EcConfig {
    /// PV nameplate capacity [MW].
    pub pv_capacity: f64,
    /// Wind nameplate capacity [MW].
    pub wind_capacity: f64,
    /// BESS energy capacity [MWh].
    pub bess_energy: f64,
    /// BESS charge/discharge power limit [MW].
    pub bess_power: f64,
    pub bess_efficiency: f64,
    pub soc_min: f64,
    pub soc_max: f64,
    pub soc_init: f64,
    pub soc_final: f64,
    /// Minimum matched day-ahead quantity when a position is taken [MWh].
    pub min_da_bid: f64,
    /// Bound on intraday volume relative to the day-ahead position.
    pub im_ratio: f64,
    /// Reserve delivery duration [h].
    pub reserve_duration: f64,
    /// Upward reserve power available from flexible demand [MW].
    pub fd_reserve_up: Vec<f64>,
    /// Downward reserve power available from flexible demand [MW].
    pub fd_reserve_down: Vec<f64>,
    /// Cap on positive imbalance [MWh].
    pub ib_pos_cap: Vec<f64>,
    /// Cap on negative imbalance [MWh].
    pub ib_neg_cap: Vec<f64>,
}

impl EcConfig {
    /// Lists every violated invariant.
    pub fn problems(&self) -> Vec<String> {
        let mut p = Vec::new();
        let scalars = [
            ("pv_capacity", self.pv_capacity),
            ("wind_capacity", self.wind_capacity),
            ("bess_energy", self.bess_energy),
            ("bess_power", self.bess_power),
            ("min_da_bid", self.min_da_bid),
            ("im_ratio", self.im_ratio),
        ];
        for (name, v) in scalars {
            if !(v >= 0.0 && v.is_finite()) {
                p.push(format!("{name} = {v} must be finite and >= 0"));
            }
        }
        if self.bess_energy <= 0.0 {
            p.push("bess_energy must be > 0".into());
        }
        if !(self.bess_efficiency > 0.0 && self.bess_efficiency <= 1.0) {
            p.push(format!("bess_efficiency = {} not in (0, 1]", self.bess_efficiency));
        }
        if !(self.reserve_duration > 0.0) {
            p.push("reserve_duration must be > 0".into());
        }
        for (name, v) in [
            ("soc_min", self.soc_min),
            ("soc_max", self.soc_max),
            ("soc_init", self.soc_init),
            ("soc_final", self.soc_final),
        ] {
            if !(0.0..=1.0).contains(&v) {
                p.push(format!("{name} = {v} not in [0, 1]"));
            }
        }
        for (name, v) in [("soc_init", self.soc_init), ("soc_final", self.soc_final)] {
            if v < self.soc_min || v > self.soc_max {
                p.push(format!("{name} = {v} outside [soc_min, soc_max]"));
            }
        }
        for (name, v) in [
            ("fd_reserve_up", &self.fd_reserve_up),
            ("fd_reserve_down", &self.fd_reserve_down),
            ("ib_pos_cap", &self.ib_pos_cap),
            ("ib_neg_cap", &self.ib_neg_cap),
        ] {
            if v.len() != HOURS {
                p.push(format!("{name} has {} entries, expected {HOURS}", v.len()));
            }
            if v.iter().any(|x| !(*x >= 0.0)) {
                p.push(format!("{name} has negative entries"));
            }
        }
        p
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::Invalid(p.join("; ")))
        }
    }
}

/// The `assets` section of a run configuration; unset fields take documented defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssetSettings {
    pub pv_capacity: f64,
    pub wind_capacity: f64,
    pub bess_energy: f64,
    pub bess_power: f64,
    pub bess_efficiency: f64,
    pub soc_min: f64,
    pub soc_max: f64,
    pub soc_init: f64,
    pub soc_final: f64,
    pub min_da_bid: f64,
    pub im_ratio: f64,
    pub reserve_duration: f64,
    /// MW ceiling applied to the demand-derived flexible reserve defaults.
    pub fd_reserve_limit: f64,
    /// Hourly imbalance cap as a fraction of total renewable capacity.
    pub ib_cap_fraction: f64,
    pub fd_reserve_up: Option<Vec<f64>>,
    pub fd_reserve_down: Option<Vec<f64>>,
    pub ib_pos_cap: Option<Vec<f64>>,
    pub ib_neg_cap: Option<Vec<f64>>,
}

impl Default for AssetSettings {
    fn default() -> Self {
        AssetSettings {
            pv_capacity: 30.0,
            wind_capacity: 30.0,
            bess_energy: 10.0,
            bess_power: 3.0,
            bess_efficiency: 0.9,
            soc_min: 0.1,
            soc_max: 0.9,
            soc_init: 0.5,
            soc_final: 0.5,
            min_da_bid: 0.1,
            im_ratio: 0.3,
            reserve_duration: 0.25,
            fd_reserve_limit: 5.0,
            ib_cap_fraction: 0.1,
            fd_reserve_up: None,
            fd_reserve_down: None,
            ib_pos_cap: None,
            ib_neg_cap: None,
        }
    }
}

impl AssetSettings {
    /// Fills time-indexed parameters that were not given explicitly.
    ///
    /// Flexible reserve defaults to the headroom of the demand band over the
    /// reserve duration, capped at `fd_reserve_limit`; imbalance caps default to
    /// `ib_cap_fraction` of the total renewable capacity.
    pub fn resolve(&self, demand: &DemandProfile) -> Result<EcConfig> {
        let limit = self.fd_reserve_limit;
        let dur = self.reserve_duration;
        let up_default: Vec<f64> = (0..HOURS)
            .map(|k| ((demand.central[k] - demand.min[k]) / dur).clamp(0.0, limit))
            .collect();
        let down_default: Vec<f64> = (0..HOURS)
            .map(|k| ((demand.max[k] - demand.central[k]) / dur).clamp(0.0, limit))
            .collect();
        let ib = self.ib_cap_fraction * (self.pv_capacity + self.wind_capacity);
        let config = EcConfig {
            pv_capacity: self.pv_capacity,
            wind_capacity: self.wind_capacity,
            bess_energy: self.bess_energy,
            bess_power: self.bess_power,
            bess_efficiency: self.bess_efficiency,
            soc_min: self.soc_min,
            soc_max: self.soc_max,
            soc_init: self.soc_init,
            soc_final: self.soc_final,
            min_da_bid: self.min_da_bid,
            im_ratio: self.im_ratio,
            reserve_duration: self.reserve_duration,
            fd_reserve_up: self.fd_reserve_up.clone().unwrap_or(up_default),
            fd_reserve_down: self.fd_reserve_down.clone().unwrap_or(down_default),
            ib_pos_cap: self.ib_pos_cap.clone().unwrap_or_else(|| vec![ib; HOURS]),
            ib_neg_cap: self.ib_neg_cap.clone().unwrap_or_else(|| vec![ib; HOURS]),
        };
        config.validate()?;
        Ok(config)
    }
}

/// Interval over which a fraction of the central demand must be served.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DemandInterval {
    pub first: usize,
    pub last: usize,
    pub fraction: f64,
}

/// Central, minimum and maximum hourly demand [MWh] plus flexibility terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandProfile {
    pub central: Vec<f64>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    #[serde(default)]
    pub intervals: Vec<DemandInterval>,
    /// Penalty per MWh of demand shifted away from the central profile [€/MWh].
    #[serde(default)]
    pub flex_cost: f64,
}

impl DemandProfile {
    /// Flat profile: `central` every hour with a symmetric band of `band`.
    pub fn flat(central: f64, band: f64, flex_cost: f64) -> Self {
        DemandProfile {
            central: vec![central; HOURS],
            min: vec![(central - band).max(0.0); HOURS],
            max: vec![central + band; HOURS],
            intervals: Vec::new(),
            flex_cost,
        }
    }

    pub fn central_at(&self, t: usize) -> f64 {
        self.central[t - 1]
    }

    pub fn min_at(&self, t: usize) -> f64 {
        self.min[t - 1]
    }

    pub fn max_at(&self, t: usize) -> f64 {
        self.max[t - 1]
    }

    pub fn problems(&self) -> Vec<String> {
        let mut p = Vec::new();
        for (name, v) in [("central", &self.central), ("min", &self.min), ("max", &self.max)] {
            if v.len() != HOURS {
                p.push(format!("demand {name} has {} entries, expected {HOURS}", v.len()));
                return p;
            }
        }
        for k in 0..HOURS {
            let (lo, mid, hi) = (self.min[k], self.central[k], self.max[k]);
            if !(0.0 <= lo && lo <= mid && mid <= hi) {
                p.push(format!(
                    "hour {}: need 0 <= min <= central <= max, got ({lo}, {mid}, {hi})",
                    k + 1
                ));
            }
        }
        for (n, iv) in self.intervals.iter().enumerate() {
            if !(1 <= iv.first && iv.first <= iv.last && iv.last <= HOURS) {
                p.push(format!("interval {n}: hours {}..={} invalid", iv.first, iv.last));
            }
            if !(0.0..=1.0).contains(&iv.fraction) {
                p.push(format!("interval {n}: fraction {} not in [0, 1]", iv.fraction));
            }
        }
        if !(self.flex_cost >= 0.0) {
            p.push("flex_cost must be >= 0".into());
        }
        p
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::Invalid(p.join("; ")))
        }
    }

    /// Reads the `hour,central,min,max` CSV; intervals and cost come from the run config.
    pub fn load_csv(
        path: &Path,
        intervals: Vec<DemandInterval>,
        flex_cost: f64,
    ) -> Result<DemandProfile> {
        #[derive(Deserialize)]
        struct Row {
            hour: usize,
            central: f64,
            min: f64,
            max: f64,
        }
        let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
        let mut profile = DemandProfile {
            central: vec![f64::NAN; HOURS],
            min: vec![f64::NAN; HOURS],
            max: vec![f64::NAN; HOURS],
            intervals,
            flex_cost,
        };
        for (n, row) in reader.deserialize::<Row>().enumerate() {
            let row = row.map_err(|e| csv_error(path, e))?;
            if !(1..=HOURS).contains(&row.hour) {
                return Err(Error::Parse {
                    path: path.into(),
                    line: n + 2,
                    message: format!("hour {} out of range", row.hour),
                });
            }
            let k = row.hour - 1;
            profile.central[k] = row.central;
            profile.min[k] = row.min;
            profile.max[k] = row.max;
        }
        if profile.central.iter().any(|v| v.is_nan()) {
            return Err(Error::Invalid(format!(
                "{}: demand file does not cover all {HOURS} hours",
                path.display()
            )));
        }
        profile.validate()?;
        Ok(profile)
    }
}

impl DemandProfile {
    /// Writes the `hour,central,min,max` CSV.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        w.write_record(["hour", "central", "min", "max"]).map_err(|e| csv_error(path, e))?;
        for k in 0..HOURS {
            w.write_record([(k + 1).to_string(), self.central[k].to_string(), self.min[k].to_string(), self.max[k].to_string()])
                .map_err(|e| csv_error(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

pub(crate) fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    Error::Parse {
        path: path.into(),
        line,
        message: e.to_string(),
    }
}
