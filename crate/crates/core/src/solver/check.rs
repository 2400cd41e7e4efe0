use std::collections::BTreeMap;

use crate::model::{Family, MilpModel, RowId, VarId, VarKind};

use super::Solution;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FamilyResidual {
    pub max: f64,
    /// Rows whose residual exceeds the tolerance.
    pub violated: Vec<RowId>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResidualReport {
    pub tolerance: f64,
    pub families: BTreeMap<Family, FamilyResidual>,
    /// Columns outside their bounds by more than the tolerance, with the excess.
    pub bounds: Vec<(VarId, f64)>,
    /// Binary columns farther than the tolerance from {0, 1}, with their value.
    pub integrality: Vec<(VarId, f64)>,
}

impl ResidualReport {
    pub fn max_residual(&self) -> f64 {
        self.families.values().map(|f| f.max).fold(0.0, f64::max)
    }

    pub fn is_clean(&self) -> bool {
        self.families.values().all(|f| f.violated.is_empty())
            && self.bounds.is_empty()
            && self.integrality.is_empty()
    }

    pub fn violated_rows(&self) -> Vec<RowId> {
        let mut rows: Vec<RowId> = self.families.values().flat_map(|f| f.violated.iter().copied()).collect();
        rows.sort();
        rows
    }
}

/// Evaluates every row, bound and integrality requirement at the solution's values.
///
/// Works from the model alone, independent of whichever solver produced the values.
pub fn check_solution(model: &MilpModel, solution: &Solution, tol: f64) -> ResidualReport {
    let x = &solution.values;
    assert_eq!(x.len(), model.variables.len(), "solution does not cover every column");
    let mut report = ResidualReport { tolerance: tol, ..Default::default() };
    for (family, rows) in model.registry().families() {
        let entry = report.families.entry(family).or_default();
        for &r in rows {
            let res = model.rows[r.0].residual(x);
            entry.max = entry.max.max(res);
            if res > tol {
                entry.violated.push(r);
            }
        }
    }
    for (j, var) in model.variables.iter().enumerate() {
        let v = x[j];
        let excess = (var.lower - v).max(v - var.upper).max(0.0);
        if excess > tol || v.is_nan() {
            report.bounds.push((VarId(j), excess));
        }
        if var.kind == VarKind::Binary && (v - v.round()).abs() > tol {
            report.integrality.push((VarId(j), v));
        }
    }
    report
}
