//! Seeded synthetic market and renewable history with realistic daily shapes.
//!
//! Used for the bundled example data and for end-to-end tests when no real
//! market data is available.

use std::path::Path;

use chrono::{Datelike, NaiveDate, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::config::DemandProfile;
use crate::history::{write_history_except, DayRecord, HistoricalWindow};
use crate::schedule::{HOURS, IM_COUNT, IM_PERIODS};
use crate::{Error, Result};

fn round(v: f64, digits: i32) -> f64 {
    let f = 10f64.powi(digits);
    (v * f).round() / f
}

/// True on the last Sunday of March, when the local day has 23 hours.
pub fn is_spring_dst(date: NaiveDate) -> bool {
    date.month() == 3 && date.weekday() == Weekday::Sun && date.day() + 7 > 31
}

/// Generates complete days from `start` to `end` inclusive.
///
/// The last intraday market is left without history, as it belongs to the
/// next day's session.
pub fn synthetic_window(start: NaiveDate, end: NaiveDate, seed: u64) -> HistoricalWindow {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let mut level_noise = 0.0f64;
    let mut wind_state = 0.0f64;
    let mut days = Vec::new();
    for date in start.iter_days().take_while(|d| *d <= end) {
        let doy = date.ordinal() as f64;
        let winter = (2.0 * std::f64::consts::PI * (doy - 15.0) / 365.25).cos(); // +1 mid-January
        let weekend = matches!(date.weekday(), Weekday::Sat | Weekday::Sun);
        let year_level = if date.year() <= 2022 { 170.0 } else { 95.0 };
        level_noise = 0.8 * level_noise + 12.0 * unit.sample(&mut rng);
        let level = year_level + 20.0 * winter - if weekend { 18.0 } else { 0.0 } + level_noise;

        wind_state = 0.7 * wind_state + 0.7 * unit.sample(&mut rng);
        let wind_mean = 1.0 / (1.0 + (-(wind_state - 0.6)).exp());
        let cloud = rng.gen_range(0.35..1.0f64);
        let daylight = 12.0 - 3.0 * winter;
        let (sunrise, sunset) = (12.5 - daylight / 2.0, 12.5 + daylight / 2.0);

        let mut pv_cf = vec![0.0; HOURS];
        let mut wind_cf = vec![0.0; HOURS];
        let mut da = vec![0.0; HOURS];
        for k in 0..HOURS {
            let h = k as f64 + 0.5;
            let sun = if h > sunrise && h < sunset {
                (std::f64::consts::PI * (h - sunrise) / (sunset - sunrise)).sin()
            } else {
                0.0
            };
            pv_cf[k] = round((0.85 - 0.15 * winter) * cloud * sun.powf(1.3), 4).clamp(0.0, 1.0);
            let w = wind_mean * (1.0 + 0.25 * ((h - 4.0) * std::f64::consts::PI / 12.0).cos()) + 0.05 * unit.sample(&mut rng);
            wind_cf[k] = round(w.clamp(0.0, 0.98), 4);
            let peaks = 0.22 * (-((h - 9.0) / 2.0).powi(2)).exp() + 0.3 * (-((h - 21.0) / 2.0).powi(2)).exp();
            let night = -0.12 * (-((h - 4.0) / 2.5).powi(2)).exp();
            let shape = 1.0 + peaks + night - 0.35 * pv_cf[k] - 0.2 * (wind_cf[k] - 0.35);
            da[k] = round((level * shape + 6.0 * unit.sample(&mut rng)).max(-5.0), 2);
        }
        let rm: Vec<f64> = da
            .iter()
            .map(|&p| round((8.0 + 0.12 * p + 4.0 * unit.sample(&mut rng)).max(0.0), 2))
            .collect();
        let mut im_price: Vec<Option<Vec<f64>>> = Vec::with_capacity(IM_COUNT);
        for (i, &d) in IM_PERIODS.iter().enumerate() {
            if i + 1 == IM_COUNT {
                im_price.push(None);
                continue;
            }
            let spread = 4.0 + 1.5 * i as f64;
            let drift = spread * unit.sample(&mut rng);
            im_price.push(Some(
                (HOURS - d..HOURS)
                    .map(|k| round(da[k] + drift + spread * unit.sample(&mut rng), 2))
                    .collect(),
            ));
        }
        let ib_pos = da.iter().map(|&p| round(p * rng.gen_range(0.55..0.95), 2)).collect();
        let ib_neg = da.iter().map(|&p| round(p.max(0.0) * rng.gen_range(1.05..1.45) + 2.0, 2)).collect();
        days.push(DayRecord {
            date,
            da_price: da,
            rm_price: rm,
            im_price,
            ib_pos_price: ib_pos,
            ib_neg_price: ib_neg,
            wind_cf,
            pv_cf,
        });
    }
    HistoricalWindow { days, dropped: Vec::new() }
}

/// A residential-scale demand profile with morning and evening peaks.
pub fn synthetic_demand() -> DemandProfile {
    let central: Vec<f64> = (0..HOURS)
        .map(|k| {
            let h = k as f64 + 0.5;
            let v = 4.0 + 1.5 * (-((h - 8.5) / 2.0).powi(2)).exp() + 2.5 * (-((h - 20.5) / 2.5).powi(2)).exp();
            round(v, 3)
        })
        .collect();
    DemandProfile {
        min: central.iter().map(|c| round(0.75 * c, 3)).collect(),
        max: central.iter().map(|c| round(1.25 * c, 3)).collect(),
        central,
        intervals: Vec::new(),
        flex_cost: 5.0,
    }
}

/// Writes prices, renewables and demand CSVs into `dir`.
///
/// Spring daylight-saving days lose hour 3 in the price file, as in real
/// market data, so loading exercises the gap rule.
pub fn write_synthetic(dir: &Path, start: NaiveDate, end: NaiveDate, seed: u64) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let window = synthetic_window(start, end, seed);
    write_history_except(&window, &dir.join("prices.csv"), &dir.join("renewables.csv"), |date, hour| {
        is_spring_dst(date) && hour == 3
    })?;
    synthetic_demand().write_csv(&dir.join("demand.csv"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::history::load_history;

    #[test]
    fn deterministic_and_bounded() {
        let (a, b) = (NaiveDate::from_ymd_opt(2023, 1, 1).unwrap(), NaiveDate::from_ymd_opt(2023, 1, 31).unwrap());
        let w = synthetic_window(a, b, 1);
        assert_eq!(w, synthetic_window(a, b, 1));
        assert_eq!(w.len(), 31);
        for d in &w.days {
            assert!(d.pv_cf.iter().chain(&d.wind_cf).all(|v| (0.0..=1.0).contains(v)));
            assert!(d.rm_price.iter().all(|&v| v >= 0.0));
            assert!(d.pv_cf[0] == 0.0 && d.pv_cf[12] > 0.0);
        }
        assert!(synthetic_demand().validate().is_ok());
    }

    #[test]
    fn written_files_load_and_drop_dst_day() {
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (NaiveDate::from_ymd_opt(2023, 3, 20).unwrap(), NaiveDate::from_ymd_opt(2023, 4, 2).unwrap());
        write_synthetic(dir.path(), a, b, 5).unwrap();
        let w = load_history(&dir.path().join("prices.csv"), &dir.path().join("renewables.csv")).unwrap();
        assert_eq!(w.len(), 13);
        assert_eq!(w.dropped[0].date, NaiveDate::from_ymd_opt(2023, 3, 26).unwrap());
        let full = synthetic_window(a, b, 5);
        assert_eq!(w.days[0], full.days[0]);
    }
}
