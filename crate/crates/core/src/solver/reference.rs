//! Exact branch-and-bound over the dense simplex, for tiny oracle instances.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::simplex::{solve_lp, LpOutcome, LpProblem};
use super::{Solution, SolveMeta, Status};
use crate::model::{MilpModel, VarKind};
use crate::{Error, Result};

const INT_TOL: f64 = 1e-7;

/// Size guard for [`solve_reference`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReferenceLimits {
    pub max_binaries: usize,
    pub max_continuous: usize,
}

impl Default for ReferenceLimits {
    fn default() -> Self {
        ReferenceLimits { max_binaries: 30, max_continuous: 2000 }
    }
}

impl ReferenceLimits {
    pub fn check(&self, model: &MilpModel) -> Result<()> {
        let binaries = model.num_binaries();
        let continuous = model.variables.len() - binaries;
        if binaries > self.max_binaries {
            return Err(Error::SizeGuard(format!(
                "{binaries} binary variables exceed the reference limit of {}",
                self.max_binaries
            )));
        }
        if continuous > self.max_continuous {
            return Err(Error::SizeGuard(format!(
                "{continuous} continuous variables exceed the reference limit of {}",
                self.max_continuous
            )));
        }
        Ok(())
    }
}

fn relaxation(model: &MilpModel) -> LpProblem {
    let sign = if model.maximize { -1.0 } else { 1.0 };
    LpProblem {
        cost: model.dense_objective().into_iter().map(|c| sign * c).collect(),
        lower: model.variables.iter().map(|v| v.lower).collect(),
        upper: model.variables.iter().map(|v| v.upper).collect(),
        rows: model
            .rows
            .iter()
            .map(|r| (r.terms.iter().map(|&(v, a)| (v.0, a)).collect(), r.sense, r.rhs))
            .collect(),
    }
}

/// Solves `model` exactly with depth-first branch-and-bound on its binaries.
///
/// Branching picks the most fractional binary (ties by registry order) and
/// explores the child nearest the LP value first.
pub fn solve_reference(model: &MilpModel) -> Result<Solution> {
    solve_reference_with(model, ReferenceLimits::default())
}

pub fn solve_reference_with(model: &MilpModel, limits: ReferenceLimits) -> Result<Solution> {
    limits.check(model)?;
    let start = Instant::now();
    let base = relaxation(model);
    let binaries: Vec<usize> = model
        .variables
        .iter()
        .enumerate()
        .filter(|(_, v)| v.kind == VarKind::Binary)
        .map(|(j, _)| j)
        .collect();

    let mut incumbent: Option<(Vec<f64>, f64)> = None;
    let mut nodes = 0u64;
    let mut unbounded = false;
    // Each open node carries its parent's LP bound so it can be pruned unsolved.
    let mut stack: Vec<(Vec<(usize, f64)>, f64)> = vec![(Vec::new(), f64::NEG_INFINITY)];
    let prunable = |bound: f64, incumbent: &Option<(Vec<f64>, f64)>| match incumbent {
        Some((_, best)) => bound >= best - 1e-9 * (1.0 + best.abs()),
        None => false,
    };
    while let Some((fixings, parent_bound)) = stack.pop() {
        if prunable(parent_bound, &incumbent) {
            continue;
        }
        nodes += 1;
        let mut lp = base.clone();
        for &(j, v) in &fixings {
            lp.lower[j] = v;
            lp.upper[j] = v;
        }
        let (x, obj) = match solve_lp(&lp)? {
            LpOutcome::Optimal { x, objective } => (x, objective),
            LpOutcome::Infeasible => continue,
            LpOutcome::Unbounded => {
                unbounded = true;
                break;
            }
        };
        if prunable(obj, &incumbent) {
            continue;
        }
        let branch = binaries
            .iter()
            .map(|&j| (j, (x[j] - x[j].round()).abs()))
            .filter(|&(_, frac)| frac > INT_TOL)
            .fold(None, |acc: Option<(usize, f64)>, (j, frac)| match acc {
                Some((_, f)) if f >= frac => acc,
                _ => Some((j, frac)),
            });
        match branch {
            None => incumbent = Some((x, obj)),
            Some((j, _)) => {
                let near = if x[j] >= 0.5 { 1.0 } else { 0.0 };
                for v in [1.0 - near, near] {
                    let mut child = fixings.clone();
                    child.push((j, v));
                    stack.push((child, obj));
                }
            }
        }
    }
    let meta = |nodes| SolveMeta {
        solver: "reference".into(),
        wall_time_s: start.elapsed().as_secs_f64(),
        gap: Some(0.0),
        nodes: Some(nodes),
    };
    if unbounded {
        return Ok(Solution::without_values(Status::Unbounded, meta(nodes)));
    }
    let Some((mut x, _)) = incumbent else {
        return Ok(Solution::without_values(Status::Infeasible, meta(nodes)));
    };

    // Snap binaries and re-solve the remaining LP so continuous values match
    // the integral assignment exactly.
    let mut lp = base;
    for &j in &binaries {
        let v = x[j].round();
        lp.lower[j] = v;
        lp.upper[j] = v;
    }
    if let LpOutcome::Optimal { x: polished, .. } = solve_lp(&lp)? {
        x = polished;
    }
    let objective = model.objective_value(&x);
    Ok(Solution { status: Status::Optimal, values: x, objective, meta: meta(nodes) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Family, Sense, VarKey};

    #[test]
    fn rounding_infeasible_branch_is_pruned() {
        let mut m = MilpModel::new(true);
        let b = m.add_var(VarKey::aux(0), 0.0, 1.0, VarKind::Binary);
        m.add_row(Family::User, vec![(b, 1.0)], Sense::Le, 0.5);
        m.add_objective(b, 2.0);
        let s = solve_reference(&m).unwrap();
        assert_eq!(s.status, Status::Optimal);
        assert_eq!(s.values[b.0], 0.0);
        assert!(s.objective.abs() < 1e-12);
    }

    #[test]
    fn pure_lp_matches_simplex() {
        let mut m = MilpModel::new(true);
        let x = m.add_var(VarKey::aux(0), 0.0, f64::INFINITY, VarKind::Continuous);
        m.add_row(Family::User, vec![(x, 1.0)], Sense::Le, 3.0);
        m.add_objective(x, 1.0);
        let s = solve_reference(&m).unwrap();
        assert!((s.objective - 3.0).abs() < 1e-12);
    }

    #[test]
    fn knapsack_enumeration() {
        // max 5a + 4b + 3c s.t. 2a + 3b + c <= 4 over binaries -> a, c: 8
        let mut m = MilpModel::new(true);
        let v: Vec<_> = (0..3).map(|i| m.add_var(VarKey::aux(i), 0.0, 1.0, VarKind::Binary)).collect();
        m.add_row(Family::User, vec![(v[0], 2.0), (v[1], 3.0), (v[2], 1.0)], Sense::Le, 4.0);
        for (var, c) in v.iter().zip([5.0, 4.0, 3.0]) {
            m.add_objective(*var, c);
        }
        let s = solve_reference(&m).unwrap();
        assert!((s.objective - 8.0).abs() < 1e-9);
        assert_eq!(s.values, vec![1.0, 0.0, 1.0]);
    }

    #[test]
    fn guard_and_infeasible() {
        let mut m = MilpModel::new(false);
        for i in 0..31 {
            m.add_var(VarKey::aux(i), 0.0, 1.0, VarKind::Binary);
        }
        assert!(matches!(solve_reference(&m), Err(Error::SizeGuard(_))));

        let mut m = MilpModel::new(false);
        let b = m.add_var(VarKey::aux(0), 0.0, 1.0, VarKind::Binary);
        m.add_row(Family::User, vec![(b, 1.0)], Sense::Eq, 0.5);
        assert_eq!(solve_reference(&m).unwrap().status, Status::Infeasible);
    }
}
