//! Solving the canonical MILP: MPS export, an external solver adapter, a
//! small exact reference solver, and an independent residual checker.

mod check;
mod external;
pub mod mps;
mod reference;
mod simplex;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::model::MilpModel;

pub use check::{check_solution, FamilyResidual, ResidualReport};
pub use external::{parse_highs_solution, solve_external, solve_external_in, ExternalSolver, SolutionFormat};
pub use reference::{solve_reference, solve_reference_with, ReferenceLimits};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
    /// A time or node limit stopped the solver; values hold the best feasible point found.
    Limit,
}

impl Status {
    pub fn has_values(&self) -> bool {
        matches!(self, Status::Optimal | Status::Limit)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveMeta {
    pub solver: String,
    pub wall_time_s: f64,
    pub gap: Option<f64>,
    pub nodes: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub status: Status,
    /// Column values indexed by [`crate::model::VarId`]; empty without a feasible point.
    pub values: Vec<f64>,
    /// Objective in the model's own sense.
    pub objective: f64,
    pub meta: SolveMeta,
}

impl Solution {
    pub fn without_values(status: Status, meta: SolveMeta) -> Self {
        Solution { status, values: Vec::new(), objective: f64::NAN, meta }
    }

    pub fn value(&self, v: crate::model::VarId) -> f64 {
        self.values[v.0]
    }

    /// JSON with status, objective, metadata and values keyed by registry name.
    pub fn to_json(&self, model: &MilpModel) -> serde_json::Value {
        let values: BTreeMap<String, f64> = if self.values.is_empty() {
            BTreeMap::new()
        } else {
            model.registry().keys().map(|(k, v)| (k.to_string(), self.values[v.0])).collect()
        };
        serde_json::json!({
            "status": self.status,
            "objective": if self.objective.is_finite() { Some(self.objective) } else { None },
            "meta": self.meta,
            "values": values,
        })
    }

    /// Reads the output of [`Solution::to_json`] back against the same model.
    pub fn from_json(model: &MilpModel, value: &serde_json::Value) -> crate::Result<Solution> {
        let bad = |m: String| crate::Error::Invalid(format!("solution JSON: {m}"));
        let status: Status = serde_json::from_value(value["status"].clone())?;
        let meta: SolveMeta = serde_json::from_value(value["meta"].clone())?;
        let objective = value["objective"].as_f64().unwrap_or(f64::NAN);
        let map = value["values"].as_object().ok_or_else(|| bad("missing `values`".into()))?;
        if map.is_empty() {
            return Ok(Solution::without_values(status, meta));
        }
        let mut values = vec![f64::NAN; model.variables.len()];
        for (key, id) in model.registry().keys() {
            let name = key.to_string();
            values[id.0] = map
                .get(&name)
                .and_then(|v| v.as_f64())
                .ok_or_else(|| bad(format!("no value for {name}")))?;
        }
        if map.len() != values.len() {
            return Err(bad(format!("{} values for a model with {} columns", map.len(), values.len())));
        }
        Ok(Solution { status, values, objective, meta })
    }
}
