//! Historical price and renewable records, aligned per calendar day.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{Datelike, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};

use crate::config::csv_error;
use crate::schedule::{HOURS, IM_COUNT, IM_PERIODS};
use crate::{Error, Result};

pub const PRICE_HEADER: [&str; 13] =
    ["date", "hour", "da", "rm", "im1", "im2", "im3", "im4", "im5", "im6", "im7", "ib_pos", "ib_neg"];
pub const RENEWABLE_HEADER: [&str; 4] = ["date", "hour", "wind_cf", "pv_cf"];

/// One complete historical day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayRecord {
    pub date: NaiveDate,
    pub da_price: Vec<f64>,
    pub rm_price: Vec<f64>,
    /// Prices over each market's trading hours; `None` when the market has no
    /// complete record that day (only tolerated for the last market).
    pub im_price: Vec<Option<Vec<f64>>>,
    pub ib_pos_price: Vec<f64>,
    pub ib_neg_price: Vec<f64>,
    pub wind_cf: Vec<f64>,
    pub pv_cf: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DayClass {
    Weekday,
    Weekend,
}

impl DayClass {
    pub fn of(date: NaiveDate) -> Self {
        match date.weekday() {
            Weekday::Sat | Weekday::Sun => DayClass::Weekend,
            _ => DayClass::Weekday,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            DayClass::Weekday => "weekday",
            DayClass::Weekend => "weekend",
        }
    }
}

/// A day excluded during loading and why.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedDay {
    pub date: NaiveDate,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoricalWindow {
    /// Complete days in ascending date order.
    pub days: Vec<DayRecord>,
    pub dropped: Vec<DroppedDay>,
}

impl HistoricalWindow {
    pub fn len(&self) -> usize {
        self.days.len()
    }

    pub fn is_empty(&self) -> bool {
        self.days.is_empty()
    }

    pub fn first_date(&self) -> Option<NaiveDate> {
        self.days.first().map(|d| d.date)
    }

    pub fn last_date(&self) -> Option<NaiveDate> {
        self.days.last().map(|d| d.date)
    }

    /// Days strictly before `date`.
    pub fn before(&self, date: NaiveDate) -> HistoricalWindow {
        HistoricalWindow {
            days: self.days.iter().filter(|d| d.date < date).cloned().collect(),
            dropped: self.dropped.iter().filter(|d| d.date < date).cloned().collect(),
        }
    }

    pub fn day(&self, date: NaiveDate) -> Option<&DayRecord> {
        self.days.binary_search_by_key(&date, |d| d.date).ok().map(|k| &self.days[k])
    }

    /// Indices of the days in `class`.
    pub fn class_indices(&self, class: DayClass) -> Vec<usize> {
        (0..self.days.len()).filter(|&k| DayClass::of(self.days[k].date) == class).collect()
    }
}

#[derive(Default)]
struct PartialPrices {
    hours: [Option<[Option<f64>; 11]>; HOURS],
}

#[derive(Default)]
struct PartialRenewables {
    hours: [Option<(f64, f64)>; HOURS],
}

fn parse_err(path: &Path, line: u64, message: String) -> Error {
    Error::Parse { path: path.into(), line: line as usize, message }
}

fn check_header(path: &Path, reader: &mut csv::Reader<std::fs::File>, expected: &[&str]) -> Result<()> {
    let header = reader.headers().map_err(|e| csv_error(path, e))?;
    let got: Vec<&str> = header.iter().map(str::trim).collect();
    if got != expected {
        return Err(parse_err(path, 1, format!("expected header {}, found {}", expected.join(","), got.join(","))));
    }
    Ok(())
}

fn parse_key(path: &Path, line: u64, record: &csv::StringRecord) -> Result<(NaiveDate, usize)> {
    let date = NaiveDate::parse_from_str(record[0].trim(), "%Y-%m-%d")
        .map_err(|e| parse_err(path, line, format!("bad date {:?}: {e}", &record[0])))?;
    let hour: usize = record[1]
        .trim()
        .parse()
        .map_err(|_| parse_err(path, line, format!("bad hour {:?}", &record[1])))?;
    if !(1..=HOURS).contains(&hour) {
        return Err(parse_err(path, line, format!("hour {hour} outside 1..={HOURS}")));
    }
    Ok((date, hour))
}

fn parse_cell(path: &Path, line: u64, column: &str, cell: &str) -> Result<Option<f64>> {
    let cell = cell.trim();
    if cell.is_empty() {
        return Ok(None);
    }
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        _ => Err(parse_err(path, line, format!("column {column}: cannot parse {cell:?} as a finite number"))),
    }
}

fn read_prices(path: &Path) -> Result<BTreeMap<NaiveDate, PartialPrices>> {
    let mut reader = csv::ReaderBuilder::new().flexible(false).from_path(path).map_err(|e| csv_error(path, e))?;
    check_header(path, &mut reader, &PRICE_HEADER)?;
    let mut days: BTreeMap<NaiveDate, PartialPrices> = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let (date, hour) = parse_key(path, line, &record)?;
        let mut cells = [None; 11];
        for (k, cell) in cells.iter_mut().enumerate() {
            *cell = parse_cell(path, line, PRICE_HEADER[k + 2], &record[k + 2])?;
        }
        let slot = &mut days.entry(date).or_default().hours[hour - 1];
        if slot.is_some() {
            return Err(parse_err(path, line, format!("duplicate record for {date} hour {hour}")));
        }
        *slot = Some(cells);
    }
    Ok(days)
}

fn read_renewables(path: &Path) -> Result<BTreeMap<NaiveDate, PartialRenewables>> {
    let mut reader = csv::ReaderBuilder::new().flexible(false).from_path(path).map_err(|e| csv_error(path, e))?;
    check_header(path, &mut reader, &RENEWABLE_HEADER)?;
    let mut days: BTreeMap<NaiveDate, PartialRenewables> = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let (date, hour) = parse_key(path, line, &record)?;
        let mut cf = [0.0; 2];
        for (k, v) in cf.iter_mut().enumerate() {
            let column = RENEWABLE_HEADER[k + 2];
            *v = parse_cell(path, line, column, &record[k + 2])?
                .ok_or_else(|| parse_err(path, line, format!("column {column} is empty")))?;
            if !(0.0..=1.0).contains(v) {
                return Err(parse_err(path, line, format!("{column} = {v} outside [0, 1]")));
            }
        }
        let slot = &mut days.entry(date).or_default().hours[hour - 1];
        if slot.is_some() {
            return Err(parse_err(path, line, format!("duplicate record for {date} hour {hour}")));
        }
        *slot = Some((cf[0], cf[1]));
    }
    Ok(days)
}

fn assemble(date: NaiveDate, prices: &PartialPrices, renewables: &PartialRenewables) -> std::result::Result<DayRecord, String> {
    let missing: Vec<usize> = (0..HOURS).filter(|&k| prices.hours[k].is_none()).map(|k| k + 1).collect();
    if !missing.is_empty() {
        return Err(format!("price hours missing: {missing:?}"));
    }
    let missing: Vec<usize> = (0..HOURS).filter(|&k| renewables.hours[k].is_none()).map(|k| k + 1).collect();
    if !missing.is_empty() {
        return Err(format!("renewable hours missing: {missing:?}"));
    }
    let cell = |k: usize, col: usize| prices.hours[k].expect("checked")[col];
    let required = |col: usize, name: &str| -> std::result::Result<Vec<f64>, String> {
        (0..HOURS).map(|k| cell(k, col).ok_or_else(|| format!("{name} missing at hour {}", k + 1))).collect()
    };
    let mut im_price = Vec::with_capacity(IM_COUNT);
    for (i, &d) in IM_PERIODS.iter().enumerate() {
        let first = HOURS - d;
        let values: Option<Vec<f64>> = (first..HOURS).map(|k| cell(k, 2 + i)).collect();
        match values {
            Some(v) => im_price.push(Some(v)),
            None if i + 1 == IM_COUNT => im_price.push(None),
            None => return Err(format!("im{} missing within its trading hours", i + 1)),
        }
    }
    Ok(DayRecord {
        date,
        da_price: required(0, "da")?,
        rm_price: required(1, "rm")?,
        im_price,
        ib_pos_price: required(9, "ib_pos")?,
        ib_neg_price: required(10, "ib_neg")?,
        wind_cf: (0..HOURS).map(|k| renewables.hours[k].expect("checked").0).collect(),
        pv_cf: (0..HOURS).map(|k| renewables.hours[k].expect("checked").1).collect(),
    })
}

/// Loads and aligns the price and renewable files over their common date range.
///
/// Incomplete days inside the common range are dropped with a warning and
/// listed in [`HistoricalWindow::dropped`].
pub fn load_history(price_file: &Path, renewable_file: &Path) -> Result<HistoricalWindow> {
    let prices = read_prices(price_file)?;
    let renewables = read_renewables(renewable_file)?;
    let (Some((&p0, _)), Some((&p1, _))) = (prices.first_key_value(), prices.last_key_value()) else {
        return Err(Error::EmptyIntersection);
    };
    let (Some((&r0, _)), Some((&r1, _))) = (renewables.first_key_value(), renewables.last_key_value()) else {
        return Err(Error::EmptyIntersection);
    };
    let (start, end) = (p0.max(r0), p1.min(r1));
    if start > end {
        return Err(Error::EmptyIntersection);
    }
    let empty_p = PartialPrices::default();
    let empty_r = PartialRenewables::default();
    let mut window = HistoricalWindow { days: Vec::new(), dropped: Vec::new() };
    for date in start.iter_days().take_while(|d| *d <= end) {
        let p = prices.get(&date).unwrap_or(&empty_p);
        let r = renewables.get(&date).unwrap_or(&empty_r);
        match assemble(date, p, r) {
            Ok(day) => window.days.push(day),
            Err(reason) => {
                log::warn!("dropping {date}: {reason}");
                window.dropped.push(DroppedDay { date, reason });
            }
        }
    }
    Ok(window)
}

/// Writes a window back to the two CSV schemas.
pub fn write_history(window: &HistoricalWindow, price_file: &Path, renewable_file: &Path) -> Result<()> {
    write_history_except(window, price_file, renewable_file, |_, _| false)
}

/// Like [`write_history`], leaving out the price rows for which `skip(date, hour)` holds.
pub(crate) fn write_history_except(
    window: &HistoricalWindow,
    price_file: &Path,
    renewable_file: &Path,
    skip: impl Fn(NaiveDate, usize) -> bool,
) -> Result<()> {
    let mut p = csv::Writer::from_path(price_file).map_err(|e| csv_error(price_file, e))?;
    p.write_record(PRICE_HEADER).map_err(|e| csv_error(price_file, e))?;
    let mut r = csv::Writer::from_path(renewable_file).map_err(|e| csv_error(renewable_file, e))?;
    r.write_record(RENEWABLE_HEADER).map_err(|e| csv_error(renewable_file, e))?;
    for day in &window.days {
        let date = day.date.format("%Y-%m-%d").to_string();
        for k in 0..HOURS {
            let mut rec = vec![date.clone(), (k + 1).to_string(), day.da_price[k].to_string(), day.rm_price[k].to_string()];
            for (i, &d) in IM_PERIODS.iter().enumerate() {
                let first = HOURS - d;
                rec.push(match &day.im_price[i] {
                    Some(v) if k >= first => v[k - first].to_string(),
                    _ => String::new(),
                });
            }
            rec.push(day.ib_pos_price[k].to_string());
            rec.push(day.ib_neg_price[k].to_string());
            if !skip(day.date, k + 1) {
                p.write_record(&rec).map_err(|e| csv_error(price_file, e))?;
            }
            r.write_record([date.clone(), (k + 1).to_string(), day.wind_cf[k].to_string(), day.pv_cf[k].to_string()])
                .map_err(|e| csv_error(renewable_file, e))?;
        }
    }
    p.flush().map_err(|e| Error::io(price_file, e))?;
    r.flush().map_err(|e| Error::io(renewable_file, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fmt::Write as _;

    fn price_rows(out: &mut String, date: &str, hours: impl Iterator<Item = usize>) {
        for h in hours {
            let mut im = Vec::new();
            for &d in &IM_PERIODS {
                im.push(if h > HOURS - d { format!("{}", 40 + h) } else { String::new() });
            }
            let _ = writeln!(out, "{date},{h},{},{},{},{},{}", 50 + h, 10, im.join(","), 30, 70);
        }
    }

    fn renewable_rows(out: &mut String, date: &str) {
        for h in 1..=24 {
            let _ = writeln!(out, "{date},{h},0.5,{}", if (8..=18).contains(&h) { 0.4 } else { 0.0 });
        }
    }

    fn files(prices: &str, renewables: &str) -> (tempfile::TempDir, std::path::PathBuf, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("prices.csv");
        let r = dir.path().join("renewables.csv");
        std::fs::write(&p, format!("{}\n{prices}", PRICE_HEADER.join(","))).unwrap();
        std::fs::write(&r, format!("{}\n{renewables}", RENEWABLE_HEADER.join(","))).unwrap();
        (dir, p, r)
    }

    #[test]
    fn two_complete_days() {
        let (mut p, mut r) = (String::new(), String::new());
        for date in ["2023-01-01", "2023-01-02"] {
            price_rows(&mut p, date, 1..=24);
            renewable_rows(&mut r, date);
        }
        let (_d, pf, rf) = files(&p, &r);
        let w = load_history(&pf, &rf).unwrap();
        assert_eq!(w.len(), 2);
        assert_eq!(w.days[0].im_price[2].as_ref().unwrap().len(), 20);
        assert_eq!(w.days[0].da_price[3], 54.0);
    }

    #[test]
    fn short_day_is_dropped() {
        let (mut p, mut r) = (String::new(), String::new());
        price_rows(&mut p, "2023-01-01", 1..=24);
        price_rows(&mut p, "2023-01-02", 1..=23);
        price_rows(&mut p, "2023-01-03", 1..=24);
        for date in ["2023-01-01", "2023-01-02", "2023-01-03"] {
            renewable_rows(&mut r, date);
        }
        let (_d, pf, rf) = files(&p, &r);
        let w = load_history(&pf, &rf).unwrap();
        assert_eq!(w.len(), 2);
        assert_eq!(w.dropped.len(), 1);
        assert_eq!(w.dropped[0].date, NaiveDate::from_ymd_opt(2023, 1, 2).unwrap());
    }

    #[test]
    fn ranges_intersect() {
        let (mut p, mut r) = (String::new(), String::new());
        for day in 1..=10 {
            price_rows(&mut p, &format!("2023-01-{day:02}"), 1..=24);
        }
        for day in 5..=20 {
            renewable_rows(&mut r, &format!("2023-01-{day:02}"));
        }
        let (_d, pf, rf) = files(&p, &r);
        let w = load_history(&pf, &rf).unwrap();
        assert_eq!(w.first_date(), NaiveDate::from_ymd_opt(2023, 1, 5));
        assert_eq!(w.last_date(), NaiveDate::from_ymd_opt(2023, 1, 10));
        assert_eq!(w.len(), 6);

        let (mut p, mut r) = (String::new(), String::new());
        price_rows(&mut p, "2023-01-01", 1..=24);
        renewable_rows(&mut r, "2023-02-01");
        let (_d, pf, rf) = files(&p, &r);
        assert!(matches!(load_history(&pf, &rf), Err(Error::EmptyIntersection)));
    }

    #[test]
    fn bad_row_reports_position() {
        let mut p = String::new();
        price_rows(&mut p, "2023-01-01", 1..=2);
        p.push_str("2023-01-01,3,abc,1,,,,,,,,1,1\n");
        let mut r = String::new();
        renewable_rows(&mut r, "2023-01-01");
        let (_d, pf, rf) = files(&p, &r);
        match load_history(&pf, &rf) {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 4);
                assert!(message.contains("da"), "{message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn missing_last_market_is_tolerated() {
        let mut p = String::new();
        for h in 1..=24 {
            let im: Vec<String> = IM_PERIODS
                .iter()
                .enumerate()
                .map(|(i, &d)| if h > HOURS - d && i < 6 { "45".to_string() } else { String::new() })
                .collect();
            let _ = writeln!(p, "2023-01-01,{h},50,10,{},30,70", im.join(","));
        }
        let mut r = String::new();
        renewable_rows(&mut r, "2023-01-01");
        let (_d, pf, rf) = files(&p, &r);
        let w = load_history(&pf, &rf).unwrap();
        assert!(w.days[0].im_price[6].is_none());
    }

    #[test]
    fn write_then_load_round_trips() {
        let (mut p, mut r) = (String::new(), String::new());
        price_rows(&mut p, "2023-03-04", 1..=24);
        renewable_rows(&mut r, "2023-03-04");
        let (dir, pf, rf) = files(&p, &r);
        let w = load_history(&pf, &rf).unwrap();
        let (p2, r2) = (dir.path().join("p2.csv"), dir.path().join("r2.csv"));
        write_history(&w, &p2, &r2).unwrap();
        assert_eq!(load_history(&p2, &r2).unwrap(), w);
    }
}
