//! Day-ahead bid curves and price-accepting reserve and intraday quantities.

use std::fmt;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::model::{MilpModel, Symbol, VarKey};
use crate::schedule::IM_COUNT;
use crate::solver::Solution;
use crate::tree::{Cluster, ScenarioTree};
use crate::{Error, Result};

/// One price-quantity pair; positive quantities sell, negative buy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BidPoint {
    pub quantity: f64,
    pub price: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BidCurve {
    pub hour: usize,
    pub points: Vec<BidPoint>,
}

impl BidCurve {
    /// Ordering problems: prices not ascending, quantities decreasing, or more
    /// than one change of sign.
    pub fn violations(&self, tol: f64) -> Vec<String> {
        let mut out = Vec::new();
        for (k, pair) in self.points.windows(2).enumerate() {
            if pair[1].price <= pair[0].price {
                out.push(format!("hour {}: price not ascending at point {}", self.hour, k + 1));
            }
            if pair[1].quantity < pair[0].quantity - tol {
                out.push(format!(
                    "hour {}: quantity drops from {} to {} between prices {} and {}",
                    self.hour, pair[0].quantity, pair[1].quantity, pair[0].price, pair[1].price
                ));
            }
        }
        let signs: Vec<i8> = self
            .points
            .iter()
            .filter(|p| p.quantity.abs() > tol)
            .map(|p| if p.quantity > 0.0 { 1 } else { -1 })
            .collect();
        let changes = signs.windows(2).filter(|w| w[0] != w[1]).count();
        if changes > 1 {
            out.push(format!("hour {}: curve changes sign {changes} times", self.hour));
        }
        out
    }

    pub fn is_monotone(&self, tol: f64) -> bool {
        self.violations(tol).is_empty()
    }

    /// True when the curve both buys and sells.
    pub fn is_combined(&self, tol: f64) -> bool {
        self.points.iter().any(|p| p.quantity < -tol) && self.points.iter().any(|p| p.quantity > tol)
    }
}

fn value(model: &MilpModel, solution: &Solution, key: VarKey) -> Result<f64> {
    let id = model.var(key).ok_or_else(|| Error::Invalid(format!("model has no column {key}")))?;
    solution
        .values
        .get(id.0)
        .copied()
        .ok_or_else(|| Error::Invalid("solution carries no values".into()))
}

/// Value of `key(ω)` shared by every scenario in `members`.
fn common_value(
    model: &MilpModel,
    solution: &Solution,
    members: &[usize],
    key: impl Fn(usize) -> VarKey,
    tol: f64,
) -> Result<f64> {
    let first = value(model, solution, key(members[0]))?;
    for &w in &members[1..] {
        let v = value(model, solution, key(w))?;
        if (v - first).abs() > tol {
            return Err(Error::Nonanticipativity(format!(
                "{} = {first} but {} = {v} (tolerance {tol})",
                key(members[0]),
                key(w)
            )));
        }
    }
    Ok(first)
}

/// Day-ahead curve for hour `t`: one point per stage-1 cluster, sorted by
/// price, with equal prices merged.
pub fn extract_da_curve(model: &MilpModel, solution: &Solution, tree: &ScenarioTree, t: usize, tol: f64) -> Result<BidCurve> {
    let stage = tree.schedule().da_stage;
    let mut points = Vec::new();
    for cluster in tree.clusters_at(stage)? {
        let members = &cluster.scenarios;
        let sell = common_value(model, solution, members, |w| VarKey::new(Symbol::DaSell, t, w), tol)?;
        let buy = common_value(model, solution, members, |w| VarKey::new(Symbol::DaBuy, t, w), tol)?;
        points.push(BidPoint { quantity: sell - buy, price: tree.scenario(members[0]).da(t) });
    }
    points.sort_by(|a, b| a.price.total_cmp(&b.price));
    let mut merged: Vec<BidPoint> = Vec::with_capacity(points.len());
    for p in points {
        match merged.last() {
            Some(last) if last.price == p.price => {
                if (last.quantity - p.quantity).abs() > tol {
                    return Err(Error::Invalid(format!(
                        "hour {t}: quantities {} and {} offered at the same price {}",
                        last.quantity, p.quantity, p.price
                    )));
                }
            }
            _ => merged.push(p),
        }
    }
    Ok(BidCurve { hour: t, points: merged })
}

/// Markets cleared as price-taking quantities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriceAcceptingMarket {
    ReserveUp,
    ReserveDown,
    Intraday(u8),
}

impl fmt::Display for PriceAcceptingMarket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PriceAcceptingMarket::ReserveUp => f.write_str("RM-up"),
            PriceAcceptingMarket::ReserveDown => f.write_str("RM-down"),
            PriceAcceptingMarket::Intraday(i) => write!(f, "IM{i}"),
        }
    }
}

impl PriceAcceptingMarket {
    pub fn all() -> impl Iterator<Item = Self> {
        [PriceAcceptingMarket::ReserveUp, PriceAcceptingMarket::ReserveDown]
            .into_iter()
            .chain((1..=IM_COUNT as u8).map(PriceAcceptingMarket::Intraday))
    }

    /// Stage whose clusters share one decision for this market.
    pub fn decision_stage(&self, tree: &ScenarioTree) -> usize {
        let s = tree.schedule();
        match self {
            PriceAcceptingMarket::ReserveUp | PriceAcceptingMarket::ReserveDown => s.da_stage,
            PriceAcceptingMarket::Intraday(i) => s.im_stage(*i as usize) - 1,
        }
    }

    fn key(&self, t: usize, w: usize) -> VarKey {
        match self {
            PriceAcceptingMarket::ReserveUp => VarKey::new(Symbol::ReserveUp, t, w),
            PriceAcceptingMarket::ReserveDown => VarKey::new(Symbol::ReserveDown, t, w),
            PriceAcceptingMarket::Intraday(i) => VarKey::intraday(*i as usize, t, w),
        }
    }

    /// Hours this market trades.
    pub fn hours(&self, tree: &ScenarioTree) -> Vec<usize> {
        match self {
            PriceAcceptingMarket::Intraday(i) => tree.schedule().im_periods(*i as usize).collect(),
            _ => (1..=crate::schedule::HOURS).collect(),
        }
    }
}

/// Quantity of `market` at hour `t` for `cluster`, checked to agree across its scenarios.
pub fn price_accepting_quantity(
    model: &MilpModel,
    solution: &Solution,
    tree: &ScenarioTree,
    market: PriceAcceptingMarket,
    cluster: &Cluster,
    t: usize,
    tol: f64,
) -> Result<f64> {
    let stage = market.decision_stage(tree);
    let node_stage = tree.nodes()[cluster.node].stage;
    if node_stage != stage {
        return Err(Error::Invalid(format!(
            "{market} decisions are taken on stage-{stage} clusters, got a stage-{node_stage} cluster"
        )));
    }
    if !market.hours(tree).contains(&t) {
        return Err(Error::Invalid(format!("{market} does not trade hour {t}")));
    }
    common_value(model, solution, &cluster.scenarios, |w| market.key(t, w), tol)
}

/// Per-hour quantities of `market` for `cluster` over the hours the model covers.
pub fn extract_price_accepting(
    model: &MilpModel,
    solution: &Solution,
    tree: &ScenarioTree,
    market: PriceAcceptingMarket,
    cluster: &Cluster,
    tol: f64,
) -> Result<Vec<(usize, f64)>> {
    let trades = market.hours(tree);
    model
        .hours()
        .into_iter()
        .filter(|t| trades.contains(t))
        .map(|t| Ok((t, price_accepting_quantity(model, solution, tree, market, cluster, t, tol)?)))
        .collect()
}

/// Writes the curves in long format: `hour,point,price,quantity`.
pub fn write_curves_csv(curves: &[BidCurve], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| crate::config::csv_error(path, e))?;
    w.write_record(["hour", "point", "price", "quantity"]).map_err(|e| crate::config::csv_error(path, e))?;
    for c in curves {
        for (j, p) in c.points.iter().enumerate() {
            w.write_record([c.hour.to_string(), (j + 1).to_string(), p.price.to_string(), p.quantity.to_string()])
                .map_err(|e| crate::config::csv_error(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Step-interpolated plot data: the quantity offered holds from each price
/// up to the next point's price.
pub fn write_curve_steps_csv(curves: &[BidCurve], path: &Path) -> Result<()> {
    let mut out = Vec::new();
    let io = |e| Error::io(path, e);
    writeln!(out, "# step interpolation: quantity q_j applies for prices in [p_j, p_(j+1))").map_err(io)?;
    writeln!(out, "hour,price,quantity").map_err(io)?;
    for c in curves {
        for (j, p) in c.points.iter().enumerate() {
            writeln!(out, "{},{},{}", c.hour, p.price, p.quantity).map_err(io)?;
            if let Some(next) = c.points.get(j + 1) {
                writeln!(out, "{},{},{}", c.hour, next.price, p.quantity).map_err(io)?;
            }
        }
    }
    std::fs::write(path, out).map_err(io)
}

/// One row per (market, cluster, hour) for every price-accepting market.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceAcceptingBid {
    pub market: PriceAcceptingMarket,
    pub stage: usize,
    pub node: usize,
    pub hour: usize,
    pub quantity: f64,
}

pub fn all_price_accepting(model: &MilpModel, solution: &Solution, tree: &ScenarioTree, tol: f64) -> Result<Vec<PriceAcceptingBid>> {
    let mut out = Vec::new();
    for market in PriceAcceptingMarket::all() {
        let stage = market.decision_stage(tree);
        for cluster in tree.clusters_at(stage)? {
            for (hour, quantity) in extract_price_accepting(model, solution, tree, market, &cluster, tol)? {
                out.push(PriceAcceptingBid { market, stage, node: cluster.node, hour, quantity });
            }
        }
    }
    Ok(out)
}

pub fn write_price_accepting_csv(bids: &[PriceAcceptingBid], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| crate::config::csv_error(path, e))?;
    w.write_record(["market", "stage", "node", "hour", "quantity"]).map_err(|e| crate::config::csv_error(path, e))?;
    for b in bids {
        w.write_record([b.market.to_string(), b.stage.to_string(), b.node.to_string(), b.hour.to_string(), b.quantity.to_string()])
            .map_err(|e| crate::config::csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
