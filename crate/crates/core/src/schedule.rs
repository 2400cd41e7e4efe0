//! Stage layout of the decision process.
//!
//! Stage 0 is the root. Stage 1 reveals day-ahead prices, stage 2 reserve
//! prices, and the remaining 31 stages interleave the seven intraday auctions
//! with the hourly observation of renewable output and imbalance prices.

use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

/// Hours in the daily horizon.
pub const HOURS: usize = 24;
/// Number of intraday auctions, including the D+1 session tail (market 7).
pub const IM_COUNT: usize = 7;
/// Bidding periods per intraday market.
pub const IM_PERIODS: [usize; IM_COUNT] = [24, 24, 20, 17, 13, 9, 4];

const IM_STAGES: [usize; IM_COUNT] = [3, 4, 7, 11, 16, 21, 28];
const LAST_STAGE: usize = 33;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageSchedule {
    /// Number of stages including the root.
    pub total_stages: usize,
    pub da_stage: usize,
    pub rm_stage: usize,
    /// Stage revealing the price of intraday market `i`, stored at `i - 1`.
    pub im_stage: [usize; IM_COUNT],
    /// Stage revealing renewables and imbalance prices of hour `t`, stored at `t - 1`.
    pub renewable_stage: [usize; HOURS],
}

impl Default for StageSchedule {
    fn default() -> Self {
        Self::standard()
    }
}

impl StageSchedule {
    /// The 34-stage layout of the Iberian day-ahead / reserve / intraday sequence.
    pub fn standard() -> Self {
        let mut renewable_stage = [0; HOURS];
        let mut stages = (IM_STAGES[1] + 1..=LAST_STAGE).filter(|s| !IM_STAGES.contains(s));
        for slot in renewable_stage.iter_mut() {
            *slot = stages.next().expect("31 trailing stages minus 5 auctions leave 24 hours");
        }
        debug_assert!(stages.next().is_none());
        StageSchedule {
            total_stages: LAST_STAGE + 1,
            da_stage: 1,
            rm_stage: 2,
            im_stage: IM_STAGES,
            renewable_stage,
        }
    }

    pub fn last_stage(&self) -> usize {
        self.total_stages - 1
    }

    /// Stage at which intraday market `market` (1-based) clears.
    pub fn im_stage(&self, market: usize) -> usize {
        self.im_stage[market - 1]
    }

    /// Stage at which renewables of hour `t` (1-based) are observed.
    pub fn renewable_stage(&self, t: usize) -> usize {
        self.renewable_stage[t - 1]
    }

    /// Bidding hours of intraday market `market`: the trailing `d_i` hours of the day.
    pub fn im_periods(&self, market: usize) -> RangeInclusive<usize> {
        HOURS + 1 - IM_PERIODS[market - 1]..=HOURS
    }

    pub fn im_first_hour(&self, market: usize) -> usize {
        HOURS + 1 - IM_PERIODS[market - 1]
    }

    /// Intraday markets in which hour `t` is a bidding period, ascending.
    pub fn markets_at(&self, t: usize) -> impl Iterator<Item = usize> + '_ {
        (1..=IM_COUNT).filter(move |&i| self.im_periods(i).contains(&t))
    }

    /// Lists every violated layout invariant.
    pub fn check(&self) -> Vec<String> {
        let mut problems = Vec::new();
        if self.total_stages < 2 {
            problems.push(format!("total_stages = {} is too small", self.total_stages));
            return problems;
        }
        if !self.im_stage.windows(2).all(|w| w[0] < w[1]) {
            problems.push("intraday stages are not strictly increasing".into());
        }
        if !self.renewable_stage.windows(2).all(|w| w[0] < w[1]) {
            problems.push("renewable stages are not strictly increasing".into());
        }
        let last = self.last_stage();
        let mut seen = vec![false; self.total_stages];
        let all = [self.da_stage, self.rm_stage]
            .into_iter()
            .chain(self.im_stage)
            .chain(self.renewable_stage);
        for s in all {
            if s == 0 || s > last {
                problems.push(format!("stage {s} outside 1..={last}"));
            } else if std::mem::replace(&mut seen[s], true) {
                problems.push(format!("stage {s} assigned twice"));
            }
        }
        problems
    }
}

/// Contiguous block of hours the model is built over (1-based, inclusive).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HourWindow {
    pub first: usize,
    pub last: usize,
}

impl Default for HourWindow {
    fn default() -> Self {
        HourWindow { first: 1, last: HOURS }
    }
}

impl HourWindow {
    pub fn new(first: usize, last: usize) -> crate::Result<Self> {
        if first == 0 || first > last || last > HOURS {
            return Err(crate::Error::Invalid(format!(
                "hour window {first}..={last} not within 1..={HOURS}"
            )));
        }
        Ok(HourWindow { first, last })
    }

    pub fn hours(&self) -> RangeInclusive<usize> {
        self.first..=self.last
    }

    pub fn len(&self) -> usize {
        self.last + 1 - self.first
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, t: usize) -> bool {
        self.hours().contains(&t)
    }
}
