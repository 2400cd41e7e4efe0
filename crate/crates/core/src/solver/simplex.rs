//! Dense bounded-variable primal simplex (two phases) used by the reference solver.
//!
//! Columns are shifted so every structural variable lives in `[0, u]`; upper
//! bounds are handled implicitly by letting nonbasic columns sit at either
//! bound. Pricing is Dantzig's largest reduced cost, switching to Bland's
//! smallest-index rule while pivots stay degenerate so the method cannot cycle.

use crate::model::Sense;
use crate::{Error, Result};

const PIVOT_TOL: f64 = 1e-9;
const OPT_TOL: f64 = 1e-9;
const DEGENERATE_STREAK: usize = 20;

/// `min cost·x` subject to rows and column bounds.
#[derive(Debug, Clone)]
pub(crate) struct LpProblem {
    pub cost: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub rows: Vec<(Vec<(usize, f64)>, Sense, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum LpOutcome {
    Optimal { x: Vec<f64>, objective: f64 },
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, Copy)]
enum ColumnMap {
    /// x = offset + y
    Shift { y: usize, offset: f64 },
    /// x = offset - y
    Mirror { y: usize, offset: f64 },
    /// x = y⁺ - y⁻
    Split { pos: usize, neg: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum At {
    Lower,
    Upper,
    Basic,
}

struct Tableau {
    m: usize,
    n: usize,
    /// Current `B⁻¹A`, row-major.
    t: Vec<f64>,
    /// Constraint matrix after sign normalization, row-major.
    a: Vec<f64>,
    b: Vec<f64>,
    upper: Vec<f64>,
    state: Vec<At>,
    basis: Vec<usize>,
    beta: Vec<f64>,
    /// Column that formed the initial identity basis in each row.
    identity: Vec<usize>,
    pivots: usize,
}

enum PhaseEnd {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * self.n + j]
    }

    fn value(&self, j: usize) -> f64 {
        match self.state[j] {
            At::Lower => 0.0,
            At::Upper => self.upper[j],
            At::Basic => self.beta[self.basis.iter().position(|&c| c == j).expect("basic")],
        }
    }

    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let mut d = cost.to_vec();
        for i in 0..self.m {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                let row = &self.t[i * self.n..(i + 1) * self.n];
                for (dj, &tij) in d.iter_mut().zip(row) {
                    *dj -= cb * tij;
                }
            }
        }
        d
    }

    fn pivot(&mut self, r: usize, j: usize, d: &mut [f64]) {
        let n = self.n;
        let p = self.t[r * n + j];
        for k in 0..n {
            self.t[r * n + k] /= p;
        }
        let pivot_row: Vec<f64> = self.t[r * n..(r + 1) * n].to_vec();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.t[i * n + j];
            if f != 0.0 {
                let row = &mut self.t[i * n..(i + 1) * n];
                for (x, &pr) in row.iter_mut().zip(&pivot_row) {
                    *x -= f * pr;
                }
                row[j] = 0.0;
            }
        }
        let f = d[j];
        if f != 0.0 {
            for (x, &pr) in d.iter_mut().zip(&pivot_row) {
                *x -= f * pr;
            }
            d[j] = 0.0;
        }
        self.pivots += 1;
    }

    /// Recomputes basic values as `B⁻¹(b − N·x_N)` to shed accumulated drift.
    fn refresh_beta(&mut self) {
        let mut rhs = self.b.clone();
        for j in 0..self.n {
            if self.state[j] == At::Upper {
                let u = self.upper[j];
                for (i, r) in rhs.iter_mut().enumerate() {
                    *r -= self.a[i * self.n + j] * u;
                }
            }
        }
        for i in 0..self.m {
            self.beta[i] = (0..self.m).map(|k| self.at(i, self.identity[k]) * rhs[k]).sum();
        }
    }

    fn run_phase(&mut self, cost: &[f64], max_pivots: usize) -> Result<PhaseEnd> {
        let mut d = self.reduced_costs(cost);
        let mut degenerate = 0usize;
        loop {
            if self.pivots > max_pivots {
                return Err(Error::Numerical(format!("iteration limit of {max_pivots} pivots reached")));
            }
            let bland = degenerate >= DEGENERATE_STREAK;
            let mut entering: Option<(usize, f64)> = None;
            for j in 0..self.n {
                let score = match self.state[j] {
                    At::Basic => continue,
                    _ if self.upper[j] <= 0.0 => continue,
                    At::Lower if d[j] < -OPT_TOL => -d[j],
                    At::Upper if d[j] > OPT_TOL => d[j],
                    _ => continue,
                };
                if bland {
                    entering = Some((j, score));
                    break;
                }
                if entering.is_none_or(|(_, s)| score > s) {
                    entering = Some((j, score));
                }
            }
            let Some((j, _)) = entering else {
                return Ok(PhaseEnd::Optimal);
            };
            let dir = if self.state[j] == At::Lower { 1.0 } else { -1.0 };

            // Ratio test: the step θ ≥ 0 along x_B(θ) = β − dir·θ·T[:, j].
            let mut theta = self.upper[j];
            let mut leave: Option<(usize, bool)> = None;
            let mut best_alpha = 0.0;
            for i in 0..self.m {
                let alpha = dir * self.at(i, j);
                let (limit, to_upper) = if alpha > PIVOT_TOL {
                    (self.beta[i].max(0.0) / alpha, false)
                } else if alpha < -PIVOT_TOL && self.upper[self.basis[i]].is_finite() {
                    ((self.upper[self.basis[i]] - self.beta[i]).max(0.0) / -alpha, true)
                } else {
                    continue;
                };
                let better = if limit < theta - 1e-12 {
                    true
                } else if limit <= theta + 1e-12 {
                    match leave {
                        Some((l, _)) if bland => self.basis[i] < self.basis[l],
                        Some(_) => alpha.abs() > best_alpha,
                        None => false,
                    }
                } else {
                    false
                };
                if better {
                    theta = limit.min(theta);
                    leave = Some((i, to_upper));
                    best_alpha = alpha.abs();
                }
            }
            if theta.is_infinite() {
                return Ok(PhaseEnd::Unbounded);
            }
            degenerate = if theta < 1e-12 { degenerate + 1 } else { 0 };
            for i in 0..self.m {
                let tij = self.at(i, j);
                if tij != 0.0 {
                    self.beta[i] -= dir * theta * tij;
                }
            }
            match leave {
                None => {
                    // Bound flip: the entering column runs into its own bound.
                    self.state[j] = if dir > 0.0 { At::Upper } else { At::Lower };
                }
                Some((r, to_upper)) => {
                    let leaving = self.basis[r];
                    self.state[leaving] = if to_upper { At::Upper } else { At::Lower };
                    let entering_value = if dir > 0.0 { theta } else { self.upper[j] - theta };
                    self.pivot(r, j, &mut d);
                    self.basis[r] = j;
                    self.state[j] = At::Basic;
                    self.beta[r] = entering_value;
                }
            }
            if self.pivots % 200 == 0 {
                self.refresh_beta();
            }
        }
    }
}

/// Solves an LP to optimality, or proves it infeasible or unbounded.
pub(crate) fn solve_lp(p: &LpProblem) -> Result<LpOutcome> {
    let ncols = p.cost.len();
    let mut maps = Vec::with_capacity(ncols);
    let mut y_upper: Vec<f64> = Vec::new();
    let mut y_cost: Vec<f64> = Vec::new();
    for j in 0..ncols {
        let (l, u) = (p.lower[j], p.upper[j]);
        if l > u + 1e-12 {
            return Ok(LpOutcome::Infeasible);
        }
        let y = y_upper.len();
        if l.is_finite() {
            maps.push(ColumnMap::Shift { y, offset: l });
            y_upper.push((u - l).max(0.0));
            y_cost.push(p.cost[j]);
        } else if u.is_finite() {
            maps.push(ColumnMap::Mirror { y, offset: u });
            y_upper.push(f64::INFINITY);
            y_cost.push(-p.cost[j]);
        } else {
            maps.push(ColumnMap::Split { pos: y, neg: y + 1 });
            y_upper.extend([f64::INFINITY, f64::INFINITY]);
            y_cost.extend([p.cost[j], -p.cost[j]]);
        }
    }
    let ny = y_upper.len();
    let m = p.rows.len();
    let nslack = p.rows.iter().filter(|r| r.1 != Sense::Eq).count();

    // Rows in y-space with slack, normalized to a nonnegative right-hand side.
    let mut dense: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut rhs = Vec::with_capacity(m);
    let mut slack_of_row = Vec::with_capacity(m);
    let mut next_slack = ny;
    for (terms, sense, b) in &p.rows {
        let mut row = vec![0.0; ny + nslack];
        let mut b = *b;
        for &(j, a) in terms {
            match maps[j] {
                ColumnMap::Shift { y, offset } => {
                    row[y] += a;
                    b -= a * offset;
                }
                ColumnMap::Mirror { y, offset } => {
                    row[y] -= a;
                    b -= a * offset;
                }
                ColumnMap::Split { pos, neg } => {
                    row[pos] += a;
                    row[neg] -= a;
                }
            }
        }
        let slack = match sense {
            Sense::Le => Some((next_slack, 1.0)),
            Sense::Ge => Some((next_slack, -1.0)),
            Sense::Eq => None,
        };
        if let Some((s, coef)) = slack {
            row[s] = coef;
            next_slack += 1;
        }
        if b < 0.0 {
            row.iter_mut().for_each(|x| *x = -*x);
            b = -b;
        }
        slack_of_row.push(slack.map(|(s, _)| s));
        dense.push(row);
        rhs.push(b);
    }
    let artificial_rows: Vec<usize> = (0..m)
        .filter(|&i| !matches!(slack_of_row[i], Some(s) if dense[i][s] > 0.0))
        .collect();
    let n = ny + nslack + artificial_rows.len();
    let artificial_from = ny + nslack;
    let mut a = vec![0.0; m * n];
    let mut identity = vec![0; m];
    for i in 0..m {
        a[i * n..i * n + ny + nslack].copy_from_slice(&dense[i]);
        if let Some(s) = slack_of_row[i] {
            if dense[i][s] > 0.0 {
                identity[i] = s;
            }
        }
    }
    for (k, &i) in artificial_rows.iter().enumerate() {
        a[i * n + artificial_from + k] = 1.0;
        identity[i] = artificial_from + k;
    }
    let mut upper = y_upper.clone();
    upper.extend(std::iter::repeat_n(f64::INFINITY, nslack + artificial_rows.len()));
    let mut state = vec![At::Lower; n];
    for &c in &identity {
        state[c] = At::Basic;
    }
    let mut tab = Tableau {
        m,
        n,
        t: a.clone(),
        a,
        b: rhs.clone(),
        upper,
        state,
        basis: identity.clone(),
        beta: rhs,
        identity,
        pivots: 0,
    };
    let max_pivots = 50_000 + 50 * (m + n);

    if !artificial_rows.is_empty() {
        let mut cost1 = vec![0.0; n];
        cost1[artificial_from..].iter_mut().for_each(|c| *c = 1.0);
        tab.run_phase(&cost1, max_pivots)?;
        tab.refresh_beta();
        let infeasibility: f64 = (0..m)
            .filter(|&i| tab.basis[i] >= artificial_from)
            .map(|i| tab.beta[i])
            .sum();
        let scale = 1.0 + tab.b.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if infeasibility > 1e-9 * scale {
            return Ok(LpOutcome::Infeasible);
        }
        // Drive zero-valued artificials out of the basis where possible.
        let mut dummy = vec![0.0; n];
        for r in 0..m {
            if tab.basis[r] < artificial_from {
                continue;
            }
            let candidate = (0..artificial_from)
                .filter(|&j| tab.state[j] != At::Basic)
                .map(|j| (j, tab.at(r, j).abs()))
                .filter(|&(_, v)| v > PIVOT_TOL)
                .max_by(|x, y| x.1.total_cmp(&y.1));
            if let Some((j, _)) = candidate {
                let value = tab.value(j);
                let leaving = tab.basis[r];
                tab.pivot(r, j, &mut dummy);
                tab.state[leaving] = At::Lower;
                tab.basis[r] = j;
                tab.state[j] = At::Basic;
                tab.beta[r] = value;
            }
        }
        for k in artificial_from..n {
            tab.upper[k] = 0.0;
        }
        tab.refresh_beta();
    }

    let mut cost2 = y_cost.clone();
    cost2.resize(n, 0.0);
    match tab.run_phase(&cost2, max_pivots)? {
        PhaseEnd::Unbounded => return Ok(LpOutcome::Unbounded),
        PhaseEnd::Optimal => {}
    }
    tab.refresh_beta();

    let mut yv = vec![0.0; n];
    for j in 0..n {
        if tab.state[j] == At::Upper {
            yv[j] = tab.upper[j];
        }
    }
    for (i, &c) in tab.basis.iter().enumerate() {
        yv[c] = tab.beta[i];
    }
    let x: Vec<f64> = maps
        .iter()
        .enumerate()
        .map(|(j, map)| {
            let v = match *map {
                ColumnMap::Shift { y, offset } => offset + yv[y].clamp(0.0, y_upper[y]),
                ColumnMap::Mirror { y, offset } => offset - yv[y].max(0.0),
                ColumnMap::Split { pos, neg } => yv[pos] - yv[neg],
            };
            v.clamp(p.lower[j], p.upper[j])
        })
        .collect();
    let objective = x.iter().zip(&p.cost).map(|(a, b)| a * b).sum();
    Ok(LpOutcome::Optimal { x, objective })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lp(cost: Vec<f64>, lower: Vec<f64>, upper: Vec<f64>, rows: Vec<(Vec<(usize, f64)>, Sense, f64)>) -> LpProblem {
        LpProblem { cost, lower, upper, rows }
    }

    fn optimum(o: LpOutcome) -> (Vec<f64>, f64) {
        match o {
            LpOutcome::Optimal { x, objective } => (x, objective),
            other => panic!("expected optimum, got {other:?}"),
        }
    }

    #[test]
    fn textbook_max() {
        // max 3x + 5y s.t. x <= 4, 2y <= 12, 3x + 2y <= 18
        let p = lp(
            vec![-3.0, -5.0],
            vec![0.0, 0.0],
            vec![f64::INFINITY; 2],
            vec![
                (vec![(0, 1.0)], Sense::Le, 4.0),
                (vec![(1, 2.0)], Sense::Le, 12.0),
                (vec![(0, 3.0), (1, 2.0)], Sense::Le, 18.0),
            ],
        );
        let (x, obj) = optimum(solve_lp(&p).unwrap());
        assert!((obj + 36.0).abs() < 1e-9);
        assert!((x[0] - 2.0).abs() < 1e-9 && (x[1] - 6.0).abs() < 1e-9);
    }

    #[test]
    fn equality_and_ge_rows_with_free_and_bounded_columns() {
        // min x + y with x free, y in [1, 3], x + y = 2, x - y >= -4
        let p = lp(
            vec![1.0, 2.0],
            vec![f64::NEG_INFINITY, 1.0],
            vec![f64::INFINITY, 3.0],
            vec![(vec![(0, 1.0), (1, 1.0)], Sense::Eq, 2.0), (vec![(0, 1.0), (1, -1.0)], Sense::Ge, -4.0)],
        );
        let (x, obj) = optimum(solve_lp(&p).unwrap());
        assert!((x[1] - 1.0).abs() < 1e-9 && (x[0] - 1.0).abs() < 1e-9, "{x:?}");
        assert!((obj - 3.0).abs() < 1e-9);
    }

    #[test]
    fn upper_bound_flip() {
        // min -x - y, x in [0, 2], y in [0, 5], x + y <= 4
        let p = lp(vec![-1.0, -2.0], vec![0.0, 0.0], vec![2.0, 5.0], vec![(vec![(0, 1.0), (1, 1.0)], Sense::Le, 4.0)]);
        let (x, obj) = optimum(solve_lp(&p).unwrap());
        assert!((obj + 8.0).abs() < 1e-9, "{x:?}");
    }

    #[test]
    fn infeasible_and_unbounded() {
        let p = lp(vec![1.0], vec![0.0], vec![f64::INFINITY], vec![(vec![(0, 1.0)], Sense::Le, -1.0)]);
        assert_eq!(solve_lp(&p).unwrap(), LpOutcome::Infeasible);
        let p = lp(vec![-1.0], vec![0.0], vec![f64::INFINITY], vec![(vec![(0, 1.0)], Sense::Ge, 1.0)]);
        assert_eq!(solve_lp(&p).unwrap(), LpOutcome::Unbounded);
        let p = lp(vec![1.0], vec![2.0], vec![1.0], vec![]);
        assert_eq!(solve_lp(&p).unwrap(), LpOutcome::Infeasible);
    }

    #[test]
    fn redundant_equalities() {
        // x + y = 1 stated twice; min x.
        let p = lp(
            vec![1.0, 0.0],
            vec![0.0, 0.0],
            vec![f64::INFINITY; 2],
            vec![(vec![(0, 1.0), (1, 1.0)], Sense::Eq, 1.0), (vec![(0, 2.0), (1, 2.0)], Sense::Eq, 2.0)],
        );
        let (x, obj) = optimum(solve_lp(&p).unwrap());
        assert!(obj.abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_cycling_example() {
        // Beale's example, which cycles under naive Dantzig pricing.
        let p = lp(
            vec![-0.75, 150.0, -0.02, 6.0],
            vec![0.0; 4],
            vec![f64::INFINITY; 4],
            vec![
                (vec![(0, 0.25), (1, -60.0), (2, -0.04), (3, 9.0)], Sense::Le, 0.0),
                (vec![(0, 0.5), (1, -90.0), (2, -0.02), (3, 3.0)], Sense::Le, 0.0),
                (vec![(2, 1.0)], Sense::Le, 1.0),
            ],
        );
        let (_, obj) = optimum(solve_lp(&p).unwrap());
        assert!((obj + 0.05).abs() < 1e-9, "{obj}");
    }
}
