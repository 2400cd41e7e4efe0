//! Assembly of the stochastic market-participation MILP from a scenario tree.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Family, MilpModel, RowId, Sense, Symbol, VarId, VarKey, VarKind};
use crate::config::{DemandProfile, EcConfig};
use crate::schedule::HourWindow;
use crate::solver::Solution;
use crate::tree::ScenarioTree;
use crate::Result;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BuildOptions {
    pub window: HourWindow,
    /// When set, every row gets penalized slack columns so infeasible inputs
    /// still solve and the violated families can be located.
    pub elastic_penalty: Option<f64>,
}

/// Builds the complete model: variables, every constraint family and the
/// expected-welfare objective.
pub fn build_model(
    tree: &ScenarioTree,
    config: &EcConfig,
    demand: &DemandProfile,
    options: &BuildOptions,
) -> Result<MilpModel> {
    tree.validate(Some(config)).into_result()?;
    config.validate()?;
    demand.validate()?;
    let mut b = ModelBuilder::new(tree, config, demand, options.window)?;
    b.add_flexible_demand();
    b.add_bess();
    b.add_day_ahead();
    b.add_reserve();
    b.add_intraday();
    b.add_imbalance();
    b.add_nonanticipativity();
    b.build_objective();
    let mut model = b.finish();
    if let Some(penalty) = options.elastic_penalty {
        add_elastic_slacks(&mut model, penalty);
    }
    Ok(model)
}

/// Holds the inputs while the constraint families are emitted one by one.
pub struct ModelBuilder<'a> {
    tree: &'a ScenarioTree,
    config: &'a EcConfig,
    demand: &'a DemandProfile,
    window: HourWindow,
    model: MilpModel,
}

impl<'a> ModelBuilder<'a> {
    /// Declares every column with its bounds and integrality.
    pub fn new(
        tree: &'a ScenarioTree,
        config: &'a EcConfig,
        demand: &'a DemandProfile,
        window: HourWindow,
    ) -> Result<Self> {
        HourWindow::new(window.first, window.last)?;
        let mut model = MilpModel::new(true);
        let schedule = tree.schedule();
        let inf = f64::INFINITY;
        for w in 0..tree.num_scenarios() {
            model.add_var(VarKey::new(Symbol::Soc, window.first - 1, w), 0.0, 1.0, VarKind::Continuous);
            for t in window.hours() {
                let cont = |m: &mut MilpModel, s: Symbol, lo: f64, hi: f64| {
                    m.add_var(VarKey::new(s, t, w), lo, hi, VarKind::Continuous);
                };
                cont(&mut model, Symbol::F, 0.0, inf);
                cont(&mut model, Symbol::FPos, 0.0, inf);
                cont(&mut model, Symbol::FNeg, 0.0, inf);
                cont(&mut model, Symbol::Charge, 0.0, inf);
                cont(&mut model, Symbol::Discharge, 0.0, inf);
                model.add_var(VarKey::new(Symbol::Id, t, w), 0.0, 1.0, VarKind::Binary);
                cont(&mut model, Symbol::Soc, config.soc_min, config.soc_max);
                cont(&mut model, Symbol::DaSell, 0.0, inf);
                cont(&mut model, Symbol::DaBuy, 0.0, inf);
                model.add_var(VarKey::new(Symbol::DaSellOn, t, w), 0.0, 1.0, VarKind::Binary);
                model.add_var(VarKey::new(Symbol::DaBuyOn, t, w), 0.0, 1.0, VarKind::Binary);
                for s in [
                    Symbol::ReserveUp,
                    Symbol::ReserveDown,
                    Symbol::ReserveUpBess,
                    Symbol::ReserveDownBess,
                    Symbol::ReserveUpFd,
                    Symbol::ReserveDownFd,
                ] {
                    cont(&mut model, s, 0.0, inf);
                }
                for i in schedule.markets_at(t) {
                    model.add_var(VarKey::intraday(i, t, w), -inf, inf, VarKind::Continuous);
                }
                cont(&mut model, Symbol::ImbalancePos, 0.0, inf);
                cont(&mut model, Symbol::ImbalanceNeg, 0.0, inf);
            }
        }
        Ok(ModelBuilder { tree, config, demand, window, model })
    }

    fn v(&self, symbol: Symbol, t: usize, w: usize) -> VarId {
        self.model
            .var(VarKey::new(symbol, t, w))
            .unwrap_or_else(|| panic!("missing column {}", VarKey::new(symbol, t, w)))
    }

    fn im(&self, market: usize, t: usize, w: usize) -> VarId {
        self.model.var(VarKey::intraday(market, t, w)).expect("intraday column")
    }

    fn scenarios(&self) -> std::ops::Range<usize> {
        0..self.tree.num_scenarios()
    }

    fn row(&mut self, family: Family, terms: Vec<(VarId, f64)>, sense: Sense, rhs: f64, out: &mut Vec<RowId>) {
        out.push(self.model.add_row(family, terms, sense, rhs));
    }

    /// Daily energy balance, interval service fractions and the split of the
    /// demand shift into positive and negative parts.
    pub fn add_flexible_demand(&mut self) -> Vec<RowId> {
        let mut rows = Vec::new();
        let d = self.demand;
        let hours: Vec<usize> = self.window.hours().collect();
        let total: f64 = hours.iter().map(|&t| d.central_at(t)).sum();
        for w in self.scenarios() {
            let terms = hours.iter().map(|&t| (self.v(Symbol::F, t, w), 1.0)).collect();
            self.row(Family::FdDailyBalance, terms, Sense::Eq, total, &mut rows);
            for iv in &d.intervals {
                let first = iv.first.max(self.window.first);
                let last = iv.last.min(self.window.last);
                if first > last {
                    continue;
                }
                let terms = (first..=last).map(|t| (self.v(Symbol::F, t, w), 1.0)).collect();
                let need = iv.fraction * (first..=last).map(|t| d.central_at(t)).sum::<f64>();
                self.row(Family::FdInterval, terms, Sense::Ge, need, &mut rows);
            }
            for &t in &hours {
                // D_t - f = f+ - f-
                let terms = vec![
                    (self.v(Symbol::F, t, w), 1.0),
                    (self.v(Symbol::FPos, t, w), 1.0),
                    (self.v(Symbol::FNeg, t, w), -1.0),
                ];
                self.row(Family::FdSplit, terms, Sense::Eq, d.central_at(t), &mut rows);
            }
        }
        rows
    }

    /// Charge/discharge exclusivity, state-of-charge recursion and its end points.
    pub fn add_bess(&mut self) -> Vec<RowId> {
        let mut rows = Vec::new();
        let c = self.config;
        let (first, last) = (self.window.first, self.window.last);
        for w in self.scenarios() {
            for t in self.window.hours() {
                let (ch, dis, id) = (self.v(Symbol::Charge, t, w), self.v(Symbol::Discharge, t, w), self.v(Symbol::Id, t, w));
                self.row(Family::BessDischargeCap, vec![(dis, 1.0), (id, -c.bess_power)], Sense::Le, 0.0, &mut rows);
                self.row(Family::BessChargeCap, vec![(ch, 1.0), (id, c.bess_power)], Sense::Le, c.bess_power, &mut rows);
                let terms = vec![
                    (self.v(Symbol::Soc, t, w), 1.0),
                    (self.v(Symbol::Soc, t - 1, w), -1.0),
                    (ch, -1.0 / c.bess_energy),
                    (dis, 1.0 / (c.bess_efficiency * c.bess_energy)),
                ];
                self.row(Family::SocRecursion, terms, Sense::Eq, 0.0, &mut rows);
            }
            let init = self.v(Symbol::Soc, first - 1, w);
            self.row(Family::SocInit, vec![(init, 1.0)], Sense::Eq, c.soc_init, &mut rows);
            let fin = self.v(Symbol::Soc, last, w);
            self.row(Family::SocFinal, vec![(fin, 1.0)], Sense::Eq, c.soc_final, &mut rows);
        }
        rows
    }

    /// Minimum and technical bid sizes, buy/sell exclusivity and monotonicity
    /// of the matched quantities along ascending day-ahead prices.
    pub fn add_day_ahead(&mut self) -> Vec<RowId> {
        let mut rows = Vec::new();
        let c = self.config;
        let d = self.demand;
        for t in self.window.hours() {
            let sell_cap = c.wind_capacity + c.pv_capacity + c.bess_power - d.min_at(t);
            let buy_cap = c.bess_power + d.max_at(t);
            for w in self.scenarios() {
                let (sell, buy) = (self.v(Symbol::DaSell, t, w), self.v(Symbol::DaBuy, t, w));
                let (on_sell, on_buy) = (self.v(Symbol::DaSellOn, t, w), self.v(Symbol::DaBuyOn, t, w));
                self.row(Family::DaSellBounds, vec![(sell, 1.0), (on_sell, -c.min_da_bid)], Sense::Ge, 0.0, &mut rows);
                self.row(Family::DaSellBounds, vec![(sell, 1.0), (on_sell, -sell_cap)], Sense::Le, 0.0, &mut rows);
                self.row(Family::DaBuyBounds, vec![(buy, 1.0), (on_buy, -c.min_da_bid)], Sense::Ge, 0.0, &mut rows);
                self.row(Family::DaBuyBounds, vec![(buy, 1.0), (on_buy, -buy_cap)], Sense::Le, 0.0, &mut rows);
                self.row(Family::DaExclusive, vec![(on_sell, 1.0), (on_buy, 1.0)], Sense::Le, 1.0, &mut rows);
            }
            let order = self.tree.da_price_order(t);
            for pair in order.windows(2) {
                let (lo, hi) = (pair[0], pair[1]);
                // Sold quantity grows with the price, bought quantity shrinks.
                let terms = vec![(self.v(Symbol::DaSell, t, lo), 1.0), (self.v(Symbol::DaSell, t, hi), -1.0)];
                self.row(Family::DaMonotoneSell, terms, Sense::Le, 0.0, &mut rows);
                let terms = vec![(self.v(Symbol::DaBuy, t, hi), 1.0), (self.v(Symbol::DaBuy, t, lo), -1.0)];
                self.row(Family::DaMonotoneBuy, terms, Sense::Le, 0.0, &mut rows);
                if self.tree.scenario(lo).da(t) == self.tree.scenario(hi).da(t) {
                    // Equal prices must map to one curve point.
                    let terms = vec![(self.v(Symbol::DaSell, t, hi), 1.0), (self.v(Symbol::DaSell, t, lo), -1.0)];
                    self.row(Family::DaMonotoneSell, terms, Sense::Le, 0.0, &mut rows);
                    let terms = vec![(self.v(Symbol::DaBuy, t, lo), 1.0), (self.v(Symbol::DaBuy, t, hi), -1.0)];
                    self.row(Family::DaMonotoneBuy, terms, Sense::Le, 0.0, &mut rows);
                }
            }
        }
        rows
    }

    /// Reserve composition and deliverability by flexible demand and the BESS.
    /// Wind and PV do not provide reserve.
    pub fn add_reserve(&mut self) -> Vec<RowId> {
        let mut rows = Vec::new();
        let c = self.config;
        let d = self.demand;
        let tr = c.reserve_duration;
        for w in self.scenarios() {
            for t in self.window.hours() {
                let k = t - 1;
                let v = |s| self.v(s, t, w);
                let (ru, rd, rub, rdb, rufd, rdfd) = (
                    v(Symbol::ReserveUp),
                    v(Symbol::ReserveDown),
                    v(Symbol::ReserveUpBess),
                    v(Symbol::ReserveDownBess),
                    v(Symbol::ReserveUpFd),
                    v(Symbol::ReserveDownFd),
                );
                let (f, ch, dis, soc) = (v(Symbol::F), v(Symbol::Charge), v(Symbol::Discharge), v(Symbol::Soc));
                self.row(Family::ReserveComposition, vec![(ru, 1.0), (rub, -1.0), (rufd, -1.0)], Sense::Eq, 0.0, &mut rows);
                self.row(Family::ReserveComposition, vec![(rd, 1.0), (rdb, -1.0), (rdfd, -1.0)], Sense::Eq, 0.0, &mut rows);
                self.row(Family::FdReserveEnergy, vec![(f, 1.0), (rdfd, tr)], Sense::Le, d.max_at(t), &mut rows);
                self.row(Family::FdReserveEnergy, vec![(f, 1.0), (rufd, -tr)], Sense::Ge, d.min_at(t), &mut rows);
                self.row(Family::FdReservePower, vec![(rdfd, 1.0)], Sense::Le, c.fd_reserve_down[k], &mut rows);
                self.row(Family::FdReservePower, vec![(rufd, 1.0)], Sense::Le, c.fd_reserve_up[k], &mut rows);
                self.row(Family::BessReservePower, vec![(rub, 1.0), (ch, -1.0), (dis, 1.0)], Sense::Le, c.bess_power, &mut rows);
                self.row(Family::BessReservePower, vec![(rdb, 1.0), (ch, 1.0), (dis, -1.0)], Sense::Le, c.bess_power, &mut rows);
                let up = tr / (c.bess_efficiency * c.bess_energy);
                self.row(Family::BessReserveSoc, vec![(soc, 1.0), (rub, -up)], Sense::Ge, c.soc_min, &mut rows);
                let down = tr / c.bess_energy;
                self.row(Family::BessReserveSoc, vec![(soc, 1.0), (rdb, down)], Sense::Le, c.soc_max, &mut rows);
            }
        }
        rows
    }

    /// Intraday volume bounded by a ratio of the day-ahead position, in
    /// aggregate and per market.
    pub fn add_intraday(&mut self) -> Vec<RowId> {
        let mut rows = Vec::new();
        let ratio = self.config.im_ratio;
        let schedule = self.tree.schedule().clone();
        for w in self.scenarios() {
            for t in self.window.hours() {
                let da = [(self.v(Symbol::DaSell, t, w), ratio), (self.v(Symbol::DaBuy, t, w), ratio)];
                let markets: Vec<usize> = schedule.markets_at(t).collect();
                let ims: Vec<(VarId, f64)> = markets.iter().map(|&i| (self.im(i, t, w), 1.0)).collect();
                let upper = ims.iter().copied().chain(da.iter().map(|&(v, r)| (v, -r))).collect();
                self.row(Family::ImAggregateRatio, upper, Sense::Le, 0.0, &mut rows);
                let lower = ims.iter().copied().chain(da).collect();
                self.row(Family::ImAggregateRatio, lower, Sense::Ge, 0.0, &mut rows);
                for &(im, _) in &ims {
                    let upper = std::iter::once((im, 1.0)).chain(da.iter().map(|&(v, r)| (v, -r))).collect();
                    self.row(Family::ImMarketRatio, upper, Sense::Le, 0.0, &mut rows);
                    let lower = std::iter::once((im, 1.0)).chain(da).collect();
                    self.row(Family::ImMarketRatio, lower, Sense::Ge, 0.0, &mut rows);
                }
            }
        }
        rows
    }

    /// Imbalance definition from the energy balance, and its caps.
    pub fn add_imbalance(&mut self) -> Vec<RowId> {
        let mut rows = Vec::new();
        let schedule = self.tree.schedule().clone();
        for w in self.scenarios() {
            let data = self.tree.scenario(w);
            for t in self.window.hours() {
                // eIB+ - eIB- - eDA- - d + eDA+ + Σ eIM + f + c = W + PV
                let mut terms = vec![
                    (self.v(Symbol::ImbalancePos, t, w), 1.0),
                    (self.v(Symbol::ImbalanceNeg, t, w), -1.0),
                    (self.v(Symbol::DaBuy, t, w), -1.0),
                    (self.v(Symbol::Discharge, t, w), -1.0),
                    (self.v(Symbol::DaSell, t, w), 1.0),
                ];
                terms.extend(schedule.markets_at(t).map(|i| (self.im(i, t, w), 1.0)));
                terms.push((self.v(Symbol::F, t, w), 1.0));
                terms.push((self.v(Symbol::Charge, t, w), 1.0));
                let rhs = data.wind_at(t) + data.pv_at(t);
                self.row(Family::ImbalanceDefinition, terms, Sense::Eq, rhs, &mut rows);
                let k = t - 1;
                let pos = self.v(Symbol::ImbalancePos, t, w);
                self.row(Family::ImbalanceCap, vec![(pos, 1.0)], Sense::Le, self.config.ib_pos_cap[k], &mut rows);
                let neg = self.v(Symbol::ImbalanceNeg, t, w);
                self.row(Family::ImbalanceCap, vec![(neg, 1.0)], Sense::Le, self.config.ib_neg_cap[k], &mut rows);
            }
        }
        rows
    }

    fn chain(&mut self, family: Family, members: &[usize], column: impl Fn(&Self, usize) -> VarId, out: &mut Vec<RowId>) {
        for pair in members.windows(2) {
            let terms = vec![(column(self, pair[0]), 1.0), (column(self, pair[1]), -1.0)];
            self.row(family, terms, Sense::Eq, 0.0, out);
        }
    }

    /// Chained equalities inside each cluster of the stage at which a decision is taken:
    /// day-ahead and reserve at stage 1, intraday market i at its clearing stage − 1,
    /// demand and battery operation at the hour's observation stage − 1, and
    /// imbalances at the observation stage itself.
    pub fn add_nonanticipativity(&mut self) -> Vec<RowId> {
        let mut rows = Vec::new();
        let schedule = self.tree.schedule().clone();
        let hours: Vec<usize> = self.window.hours().collect();
        let stage1 = self.tree.clusters_unchecked(schedule.da_stage);
        for cluster in &stage1 {
            for &t in &hours {
                for s in [Symbol::DaSell, Symbol::DaBuy, Symbol::DaSellOn, Symbol::DaBuyOn] {
                    self.chain(Family::NacDayAhead, &cluster.scenarios, |b, w| b.v(s, t, w), &mut rows);
                }
                for s in [
                    Symbol::ReserveUp,
                    Symbol::ReserveDown,
                    Symbol::ReserveUpBess,
                    Symbol::ReserveDownBess,
                    Symbol::ReserveUpFd,
                    Symbol::ReserveDownFd,
                ] {
                    self.chain(Family::NacReserve, &cluster.scenarios, |b, w| b.v(s, t, w), &mut rows);
                }
            }
        }
        for i in 1..=crate::schedule::IM_COUNT {
            let clusters = self.tree.clusters_unchecked(schedule.im_stage(i) - 1);
            let window = self.window;
            for cluster in &clusters {
                for t in schedule.im_periods(i).filter(|t| window.contains(*t)) {
                    self.chain(Family::NacIntraday, &cluster.scenarios, |b, w| b.im(i, t, w), &mut rows);
                }
            }
        }
        for &t in &hours {
            let stage = schedule.renewable_stage(t);
            for cluster in &self.tree.clusters_unchecked(stage - 1) {
                for s in [
                    Symbol::F,
                    Symbol::FPos,
                    Symbol::FNeg,
                    Symbol::Charge,
                    Symbol::Discharge,
                    Symbol::Id,
                    Symbol::Soc,
                ] {
                    self.chain(Family::NacOperation, &cluster.scenarios, |b, w| b.v(s, t, w), &mut rows);
                }
            }
            for cluster in &self.tree.clusters_unchecked(stage) {
                for s in [Symbol::ImbalancePos, Symbol::ImbalanceNeg] {
                    self.chain(Family::NacImbalance, &cluster.scenarios, |b, w| b.v(s, t, w), &mut rows);
                }
            }
        }
        rows
    }

    /// Expected welfare: day-ahead, reserve and intraday income, imbalance
    /// settlement and the demand-flexibility penalty.
    pub fn build_objective(&mut self) {
        let schedule = self.tree.schedule().clone();
        let cost = self.demand.flex_cost;
        for w in self.scenarios() {
            let p = self.tree.probability(w);
            let data = self.tree.scenario(w);
            for t in self.window.hours() {
                let terms = [
                    (Symbol::DaSell, data.da(t)),
                    (Symbol::DaBuy, -data.da(t)),
                    (Symbol::ReserveDown, data.rm(t)),
                    (Symbol::ReserveUp, data.rm(t)),
                    (Symbol::ImbalancePos, data.ib_pos(t)),
                    (Symbol::ImbalanceNeg, -data.ib_neg(t)),
                    (Symbol::FPos, -cost),
                    (Symbol::FNeg, -cost),
                ];
                for (s, coef) in terms {
                    let v = self.v(s, t, w);
                    self.model.add_objective(v, p * coef);
                }
                for i in schedule.markets_at(t) {
                    let price = data.im(i, t).expect("market active at t");
                    let v = self.im(i, t, w);
                    self.model.add_objective(v, p * price);
                }
            }
        }
    }

    pub fn finish(self) -> MilpModel {
        self.model
    }
}

fn add_elastic_slacks(model: &mut MilpModel, penalty: f64) {
    let original = model.rows.len();
    for r in 0..original {
        let row = RowId(r);
        let sense = model.rows[r].sense;
        let slack = |m: &mut MilpModel, upward: bool, sign: f64| {
            let s = m.add_var(VarKey::slack(row, upward), 0.0, f64::INFINITY, VarKind::Continuous);
            m.rows[r].terms.push((s, sign));
            m.add_objective(s, -penalty);
        };
        match sense {
            Sense::Le => slack(model, false, -1.0),
            Sense::Ge => slack(model, true, 1.0),
            Sense::Eq => {
                slack(model, true, 1.0);
                slack(model, false, -1.0);
            }
        }
    }
}

/// Total slack per family in an elastic solve; empty when the original model is feasible.
pub fn elastic_report(model: &MilpModel, solution: &Solution, tol: f64) -> BTreeMap<Family, f64> {
    let mut out = BTreeMap::new();
    for (key, id) in model.registry().keys() {
        if key.symbol == Symbol::Slack {
            let v = solution.values[id.0];
            if v > tol {
                *out.entry(model.rows[key.omega as usize].family).or_insert(0.0) += v;
            }
        }
    }
    out
}


/// A constructive feasible point: demand at its central profile, the battery
/// idle at SoC₀, no reserve or intraday trading, and per hour one day-ahead
/// position shared by all scenarios with imbalances absorbing the rest.
///
/// Returns `None` when the imbalance caps leave no such position or when
/// SoC_T differs from SoC₀.
pub fn feasibility_witness(
    model: &MilpModel,
    tree: &ScenarioTree,
    config: &EcConfig,
    demand: &DemandProfile,
    window: HourWindow,
) -> Option<Vec<f64>> {
    if (config.soc_final - config.soc_init).abs() > 1e-12 {
        return None;
    }
    let mut x = vec![0.0; model.variables.len()];
    let mut set = |key: VarKey, v: f64| {
        if let Some(id) = model.var(key) {
            x[id.0] = v;
        }
    };
    let n = tree.num_scenarios();
    for w in 0..n {
        set(VarKey::new(Symbol::Soc, window.first - 1, w), config.soc_init);
    }
    for t in window.hours() {
        let k = t - 1;
        let d = demand.central_at(t);
        let net: Vec<f64> = (0..n).map(|w| tree.scenario(w).wind_at(t) + tree.scenario(w).pv_at(t) - d).collect();
        let lo = net.iter().fold(f64::NEG_INFINITY, |a, &v| a.max(v - config.ib_pos_cap[k]));
        let hi = net.iter().fold(f64::INFINITY, |a, &v| a.min(v + config.ib_neg_cap[k]));
        if lo > hi + 1e-12 {
            return None;
        }
        let mut q = 0.5 * (lo + hi);
        if q.abs() < config.min_da_bid {
            q = if lo <= 0.0 && 0.0 <= hi {
                0.0
            } else if lo <= config.min_da_bid && config.min_da_bid <= hi {
                config.min_da_bid
            } else if lo <= -config.min_da_bid && -config.min_da_bid <= hi {
                -config.min_da_bid
            } else {
                return None;
            };
        }
        for w in 0..n {
            set(VarKey::new(Symbol::F, t, w), d);
            set(VarKey::new(Symbol::Soc, t, w), config.soc_init);
            if q > 0.0 {
                set(VarKey::new(Symbol::DaSell, t, w), q);
                set(VarKey::new(Symbol::DaSellOn, t, w), 1.0);
            } else if q < 0.0 {
                set(VarKey::new(Symbol::DaBuy, t, w), -q);
                set(VarKey::new(Symbol::DaBuyOn, t, w), 1.0);
            }
            let ib = net[w] - q;
            if ib >= 0.0 {
                set(VarKey::new(Symbol::ImbalancePos, t, w), ib);
            } else {
                set(VarKey::new(Symbol::ImbalanceNeg, t, w), -ib);
            }
        }
    }
    Some(x)
}
