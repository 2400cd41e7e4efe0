//! Canonical mixed-integer linear program with a registry that maps every
//! column back to its model symbol and every row to its constraint family.

mod builder;

use std::fmt;

use indexmap::IndexMap;
use serde::Serialize;

pub use builder::{build_model, elastic_report, feasibility_witness, BuildOptions, ModelBuilder};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct RowId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Symbol {
    /// Served flexible demand.
    F,
    FPos,
    FNeg,
    Charge,
    Discharge,
    /// 1 when the battery discharges.
    Id,
    Soc,
    DaSell,
    DaBuy,
    DaSellOn,
    DaBuyOn,
    ReserveUp,
    ReserveDown,
    ReserveUpBess,
    ReserveDownBess,
    ReserveUpFd,
    ReserveDownFd,
    Intraday,
    ImbalancePos,
    ImbalanceNeg,
    /// Elastic slack attached to a row (diagnostic mode).
    Slack,
    /// Free-form column for hand-built models.
    Aux,
}

impl Symbol {
    pub const MODEL: [Symbol; 20] = [
        Symbol::F,
        Symbol::FPos,
        Symbol::FNeg,
        Symbol::Charge,
        Symbol::Discharge,
        Symbol::Id,
        Symbol::Soc,
        Symbol::DaSell,
        Symbol::DaBuy,
        Symbol::DaSellOn,
        Symbol::DaBuyOn,
        Symbol::ReserveUp,
        Symbol::ReserveDown,
        Symbol::ReserveUpBess,
        Symbol::ReserveDownBess,
        Symbol::ReserveUpFd,
        Symbol::ReserveDownFd,
        Symbol::Intraday,
        Symbol::ImbalancePos,
        Symbol::ImbalanceNeg,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Symbol::F => "f",
            Symbol::FPos => "f+",
            Symbol::FNeg => "f-",
            Symbol::Charge => "c",
            Symbol::Discharge => "d",
            Symbol::Id => "id",
            Symbol::Soc => "soc",
            Symbol::DaSell => "eDA+",
            Symbol::DaBuy => "eDA-",
            Symbol::DaSellOn => "ieDA+",
            Symbol::DaBuyOn => "ieDA-",
            Symbol::ReserveUp => "rU",
            Symbol::ReserveDown => "rD",
            Symbol::ReserveUpBess => "rUB",
            Symbol::ReserveDownBess => "rDB",
            Symbol::ReserveUpFd => "rUFD",
            Symbol::ReserveDownFd => "rDFD",
            Symbol::Intraday => "eIM",
            Symbol::ImbalancePos => "eIB+",
            Symbol::ImbalanceNeg => "eIB-",
            Symbol::Slack => "slack",
            Symbol::Aux => "x",
        }
    }
}

/// Registry key of a column: symbol plus hour, scenario and (for intraday) market.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarKey {
    pub symbol: Symbol,
    /// Intraday market index, or slack direction for [`Symbol::Slack`]; 0 otherwise.
    pub market: u8,
    pub t: u8,
    /// Scenario index, or row index for [`Symbol::Slack`] / free index for [`Symbol::Aux`].
    pub omega: u32,
}

impl VarKey {
    pub fn new(symbol: Symbol, t: usize, omega: usize) -> Self {
        VarKey { symbol, market: 0, t: t as u8, omega: omega as u32 }
    }

    pub fn intraday(market: usize, t: usize, omega: usize) -> Self {
        VarKey { symbol: Symbol::Intraday, market: market as u8, t: t as u8, omega: omega as u32 }
    }

    pub fn aux(index: usize) -> Self {
        VarKey { symbol: Symbol::Aux, market: 0, t: 0, omega: index as u32 }
    }

    pub fn slack(row: RowId, upward: bool) -> Self {
        VarKey { symbol: Symbol::Slack, market: u8::from(upward), t: 0, omega: row.0 as u32 }
    }
}

impl fmt::Display for VarKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.symbol {
            Symbol::Intraday => write!(f, "eIM[{}][{}][{}]", self.market, self.t, self.omega),
            Symbol::Slack => write!(f, "slack[{}][{}]", self.omega, if self.market == 1 { "+" } else { "-" }),
            Symbol::Aux => write!(f, "x[{}]", self.omega),
            s => write!(f, "{}[{}][{}]", s.as_str(), self.t, self.omega),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    FdDailyBalance,
    FdInterval,
    FdSplit,
    BessDischargeCap,
    BessChargeCap,
    SocRecursion,
    SocInit,
    SocFinal,
    DaSellBounds,
    DaBuyBounds,
    DaExclusive,
    DaMonotoneSell,
    DaMonotoneBuy,
    ReserveComposition,
    FdReserveEnergy,
    FdReservePower,
    BessReservePower,
    BessReserveSoc,
    ImAggregateRatio,
    ImMarketRatio,
    ImbalanceDefinition,
    ImbalanceCap,
    NacDayAhead,
    NacReserve,
    NacIntraday,
    NacOperation,
    NacImbalance,
    /// Rows of hand-built models.
    User,
}

impl Family {
    pub fn as_str(&self) -> &'static str {
        match self {
            Family::FdDailyBalance => "fd_daily_balance",
            Family::FdInterval => "fd_interval",
            Family::FdSplit => "fd_split",
            Family::BessDischargeCap => "bess_discharge_cap",
            Family::BessChargeCap => "bess_charge_cap",
            Family::SocRecursion => "soc_recursion",
            Family::SocInit => "soc_init",
            Family::SocFinal => "soc_final",
            Family::DaSellBounds => "da_sell_bounds",
            Family::DaBuyBounds => "da_buy_bounds",
            Family::DaExclusive => "da_exclusive",
            Family::DaMonotoneSell => "da_monotone_sell",
            Family::DaMonotoneBuy => "da_monotone_buy",
            Family::ReserveComposition => "reserve_composition",
            Family::FdReserveEnergy => "fd_reserve_energy",
            Family::FdReservePower => "fd_reserve_power",
            Family::BessReservePower => "bess_reserve_power",
            Family::BessReserveSoc => "bess_reserve_soc",
            Family::ImAggregateRatio => "im_aggregate_ratio",
            Family::ImMarketRatio => "im_market_ratio",
            Family::ImbalanceDefinition => "imbalance_definition",
            Family::ImbalanceCap => "imbalance_cap",
            Family::NacDayAhead => "nac_day_ahead",
            Family::NacReserve => "nac_reserve",
            Family::NacIntraday => "nac_intraday",
            Family::NacOperation => "nac_operation",
            Family::NacImbalance => "nac_imbalance",
            Family::User => "user",
        }
    }

    pub fn is_nonanticipativity(&self) -> bool {
        matches!(
            self,
            Family::NacDayAhead
                | Family::NacReserve
                | Family::NacIntraday
                | Family::NacOperation
                | Family::NacImbalance
        )
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub key: VarKey,
    pub lower: f64,
    pub upper: f64,
    pub kind: VarKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub family: Family,
    pub terms: Vec<(VarId, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Row {
    pub fn activity(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, a)| a * values[v.0]).sum()
    }

    /// Amount by which `values` violate the row (0 when satisfied).
    pub fn residual(&self, values: &[f64]) -> f64 {
        let lhs = self.activity(values);
        match self.sense {
            Sense::Le => (lhs - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - lhs).max(0.0),
            Sense::Eq => (lhs - self.rhs).abs(),
        }
    }
}

/// Maps symbols to columns and families to rows.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Registry {
    columns: IndexMap<VarKey, VarId>,
    families: IndexMap<Family, Vec<RowId>>,
}

impl Registry {
    pub fn get(&self, key: &VarKey) -> Option<VarId> {
        self.columns.get(key).copied()
    }

    pub fn rows(&self, family: Family) -> &[RowId] {
        self.families.get(&family).map_or(&[], Vec::as_slice)
    }

    pub fn families(&self) -> impl Iterator<Item = (Family, &[RowId])> {
        self.families.iter().map(|(f, r)| (*f, r.as_slice()))
    }

    pub fn keys(&self) -> impl Iterator<Item = (&VarKey, VarId)> {
        self.columns.iter().map(|(k, v)| (k, *v))
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MilpModel {
    pub maximize: bool,
    pub variables: Vec<Variable>,
    pub rows: Vec<Row>,
    pub objective: Vec<(VarId, f64)>,
    registry: Registry,
}

impl Default for MilpModel {
    fn default() -> Self {
        MilpModel::new(true)
    }
}

impl MilpModel {
    pub fn new(maximize: bool) -> Self {
        MilpModel { maximize, variables: Vec::new(), rows: Vec::new(), objective: Vec::new(), registry: Registry::default() }
    }

    /// Adds a column. Panics if the key is already registered.
    pub fn add_var(&mut self, key: VarKey, lower: f64, upper: f64, kind: VarKind) -> VarId {
        let id = VarId(self.variables.len());
        let (lower, upper) = match kind {
            VarKind::Binary => (lower.max(0.0), upper.min(1.0)),
            VarKind::Continuous => (lower, upper),
        };
        let previous = self.registry.columns.insert(key, id);
        assert!(previous.is_none(), "duplicate registry key {key}");
        self.variables.push(Variable { key, lower, upper, kind });
        id
    }

    pub fn add_row(&mut self, family: Family, terms: Vec<(VarId, f64)>, sense: Sense, rhs: f64) -> RowId {
        let id = RowId(self.rows.len());
        debug_assert!(terms.iter().all(|(v, _)| v.0 < self.variables.len()));
        self.rows.push(Row { family, terms, sense, rhs });
        self.registry.families.entry(family).or_default().push(id);
        id
    }

    pub fn add_objective(&mut self, var: VarId, coef: f64) {
        if coef != 0.0 {
            self.objective.push((var, coef));
        }
    }

    pub fn var(&self, key: VarKey) -> Option<VarId> {
        self.registry.get(&key)
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn column_name(&self, v: VarId) -> String {
        format!("C{:07}", v.0 + 1)
    }

    pub fn row_name(&self, r: RowId) -> String {
        format!("R{:07}", r.0 + 1)
    }

    /// Hours covered by the model, read from the demand columns of scenario 0.
    pub fn hours(&self) -> Vec<usize> {
        self.registry
            .keys()
            .filter(|(k, _)| k.symbol == Symbol::F && k.omega == 0)
            .map(|(k, _)| k.t as usize)
            .collect()
    }

    pub fn num_binaries(&self) -> usize {
        self.variables.iter().filter(|v| v.kind == VarKind::Binary).count()
    }

    /// Objective coefficients merged per column, in column order.
    pub fn dense_objective(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.variables.len()];
        for &(v, a) in &self.objective {
            c[v.0] += a;
        }
        c
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective.iter().map(|&(v, a)| a * values[v.0]).sum()
    }

    /// `symbol[t][ω]` → column name, plus the rows of each family.
    pub fn registry_json(&self) -> serde_json::Value {
        let columns: serde_json::Map<String, serde_json::Value> = self
            .registry
            .keys()
            .map(|(k, v)| (k.to_string(), self.column_name(v).into()))
            .collect();
        let families: serde_json::Map<String, serde_json::Value> = self
            .registry
            .families()
            .map(|(f, rows)| {
                let names: Vec<serde_json::Value> = rows.iter().map(|&r| self.row_name(r).into()).collect();
                (f.as_str().to_string(), names.into())
            })
            .collect();
        serde_json::json!({ "columns": columns, "families": families })
    }
}
