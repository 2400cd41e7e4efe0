//! Scenario reduction by greedy forward selection, applied recursively over
//! the branching stages to turn a fan into a multi-stage tree.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::scenario::{ScenarioData, SeriesWeights};
use crate::schedule::StageSchedule;
use crate::tree::ScenarioTree;
use crate::{Error, Result};

/// Equally weighted set of sampled scenarios (a one-stage tree).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFan {
    pub scenarios: Vec<ScenarioData>,
    pub probabilities: Vec<f64>,
}

impl ScenarioFan {
    pub fn uniform(scenarios: Vec<ScenarioData>) -> Self {
        let p = 1.0 / scenarios.len().max(1) as f64;
        let probabilities = vec![p; scenarios.len()];
        ScenarioFan { scenarios, probabilities }
    }

    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }

    pub fn into_tree(self, schedule: StageSchedule) -> Result<ScenarioTree> {
        ScenarioTree::fan(schedule, self.scenarios, self.probabilities)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchLevel {
    pub stage: usize,
    pub children: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionPlan {
    pub levels: Vec<BranchLevel>,
    /// Per-series distance weights; `None` means inverse standard deviation over the fan.
    #[serde(default)]
    pub weights: Option<SeriesWeights>,
}

impl ReductionPlan {
    pub fn new(levels: impl IntoIterator<Item = (usize, usize)>) -> Self {
        ReductionPlan {
            levels: levels
                .into_iter()
                .map(|(stage, children)| BranchLevel { stage, children })
                .collect(),
            weights: None,
        }
    }

    /// Upper bound on the number of leaves.
    pub fn max_leaves(&self) -> usize {
        self.levels.iter().map(|l| l.children).product()
    }

    pub fn check(&self, fan_size: usize, schedule: &StageSchedule) -> Result<()> {
        let last = schedule.last_stage();
        let mut prev = 0;
        for l in &self.levels {
            if l.children == 0 {
                return Err(Error::Invalid(format!("branch count at stage {} must be >= 1", l.stage)));
            }
            if l.stage <= prev || l.stage > last {
                return Err(Error::Invalid(format!(
                    "branching stages must be strictly increasing within 1..={last}, got {}",
                    l.stage
                )));
            }
            prev = l.stage;
        }
        let leaves = self.levels.iter().try_fold(1usize, |acc, l| acc.checked_mul(l.children));
        match leaves {
            Some(n) if n <= fan_size => {}
            _ => {
                return Err(Error::Invalid(format!(
                    "plan product of branch counts exceeds fan size {fan_size}"
                )))
            }
        }
        if let Some(w) = &self.weights {
            if crate::scenario::all_series().any(|s| !(w.get(s) >= 0.0)) {
                return Err(Error::Invalid("distance weights must be nonnegative".into()));
            }
        }
        Ok(())
    }
}

/// Weighted Euclidean distance over observation components revealed at stages `<= upto_stage`.
pub fn scenario_distance(
    a: &ScenarioData,
    b: &ScenarioData,
    upto_stage: usize,
    weights: &SeriesWeights,
    schedule: &StageSchedule,
) -> f64 {
    let mut left = Vec::new();
    a.for_each_observation(schedule, |series, _, stage, v| {
        if stage <= upto_stage {
            left.push(weights.get(series) * v);
        }
    });
    let mut sum = 0.0;
    let mut k = 0;
    b.for_each_observation(schedule, |series, _, stage, v| {
        if stage <= upto_stage {
            let d = left[k] - weights.get(series) * v;
            sum += d * d;
            k += 1;
        }
    });
    sum.sqrt()
}

/// Outcome of a forward selection.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    /// Kept scenario indices, ascending.
    pub kept: Vec<usize>,
    /// Redistributed probability of each kept scenario, aligned with `kept`.
    pub probabilities: Vec<f64>,
    /// For every input scenario, the position in `kept` of its nearest kept scenario.
    pub assignment: Vec<usize>,
    /// Kept scenarios in the order they were selected.
    pub order: Vec<usize>,
    /// Σ over unkept scenarios of probability × distance to the kept set, after each pick.
    pub residuals: Vec<f64>,
}

/// Greedy forward selection on a precomputed symmetric distance matrix.
///
/// Each step adds the scenario that minimizes the probability-weighted
/// distance of the remaining scenarios to the kept set. Ties go to the lowest
/// index. Unkept probability moves to the nearest kept scenario.
pub fn forward_select_matrix(dist: &[Vec<f64>], probs: &[f64], k: usize) -> Selection {
    let n = probs.len();
    assert!(k >= 1 && k <= n, "forward selection needs 1 <= k <= n (k = {k}, n = {n})");
    let mut kept_flag = vec![false; n];
    let mut mind = vec![f64::INFINITY; n];
    let mut order = Vec::with_capacity(k);
    let mut residuals = Vec::with_capacity(k);
    for _ in 0..k {
        let mut best: Option<(usize, f64)> = None;
        for u in (0..n).filter(|&u| !kept_flag[u]) {
            let cost: f64 = (0..n)
                .filter(|&w| !kept_flag[w] && w != u)
                .map(|w| probs[w] * mind[w].min(dist[w][u]))
                .sum();
            if best.is_none_or(|(_, c)| cost < c) {
                best = Some((u, cost));
            }
        }
        let (u, cost) = best.expect("candidates remain while picks < n");
        kept_flag[u] = true;
        order.push(u);
        residuals.push(cost);
        for w in 0..n {
            mind[w] = mind[w].min(dist[w][u]);
        }
    }
    let kept: Vec<usize> = (0..n).filter(|&w| kept_flag[w]).collect();
    let mut probabilities = vec![0.0; kept.len()];
    let assignment: Vec<usize> = (0..n)
        .map(|w| {
            let mut best = 0;
            for (pos, &s) in kept.iter().enumerate() {
                if dist[w][s] < dist[w][kept[best]] {
                    best = pos;
                }
            }
            if kept_flag[w] {
                best = kept.binary_search(&w).expect("kept");
            }
            probabilities[best] += probs[w];
            best
        })
        .collect();
    Selection { kept, probabilities, assignment, order, residuals }
}

/// Forward selection of `k` scenarios of a fan using observations up to `upto_stage`.
pub fn forward_select(
    fan: &ScenarioFan,
    k: usize,
    upto_stage: usize,
    weights: &SeriesWeights,
    schedule: &StageSchedule,
) -> Result<Selection> {
    if k == 0 || k > fan.len() {
        return Err(Error::Invalid(format!("k = {k} must lie in 1..={}", fan.len())));
    }
    let features = Features::new(&fan.scenarios, weights, schedule);
    let members: Vec<usize> = (0..fan.len()).collect();
    let dist = features.matrix(&members, upto_stage);
    Ok(forward_select_matrix(&dist, &fan.probabilities, k))
}

/// Weighted observation vectors ordered by reveal stage, so that the
/// components revealed up to stage `s` form a prefix.
struct Features {
    values: Vec<Vec<f64>>,
    /// `prefix[s]` = number of components revealed at stages `<= s`.
    prefix: Vec<usize>,
}

impl Features {
    fn new(scenarios: &[ScenarioData], weights: &SeriesWeights, schedule: &StageSchedule) -> Self {
        let mut stages = Vec::new();
        if let Some(first) = scenarios.first() {
            first.for_each_observation(schedule, |_, _, s, _| stages.push(s));
        }
        let mut perm: Vec<usize> = (0..stages.len()).collect();
        perm.sort_by_key(|&k| stages[k]);
        let mut prefix = vec![0; schedule.total_stages];
        for &s in &stages {
            prefix[s] += 1;
        }
        for s in 1..prefix.len() {
            prefix[s] += prefix[s - 1];
        }
        let values = scenarios
            .iter()
            .map(|d| {
                let mut raw = Vec::with_capacity(stages.len());
                d.for_each_observation(schedule, |series, _, _, v| raw.push(weights.get(series) * v));
                perm.iter().map(|&k| raw[k]).collect()
            })
            .collect();
        Features { values, prefix }
    }

    fn matrix(&self, members: &[usize], upto_stage: usize) -> Vec<Vec<f64>> {
        let len = self.prefix[upto_stage.min(self.prefix.len() - 1)];
        let m = members.len();
        let mut dist = vec![vec![0.0; m]; m];
        for i in 0..m {
            for j in i + 1..m {
                let a = &self.values[members[i]][..len];
                let b = &self.values[members[j]][..len];
                let d = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
                dist[i][j] = d;
                dist[j][i] = d;
            }
        }
        dist
    }
}

struct Group {
    id: usize,
    members: Vec<usize>,
    probability: f64,
    representative: usize,
    /// Group ids of this group's ancestors, one per level (level 0 first).
    lineage: Vec<usize>,
}

/// Builds a scenario tree from a fan by recursive forward selection.
///
/// At each branching level the scenarios of every group are reduced to the
/// requested number of representatives using observations up to that level's
/// stage; every member joins its nearest representative and the recursion
/// continues inside the resulting subgroups. Observations revealed between two
/// branching stages are taken from the representative of the enclosing group.
pub fn build_tree(fan: &ScenarioFan, plan: &ReductionPlan, schedule: &StageSchedule) -> Result<ScenarioTree> {
    if fan.is_empty() {
        return Err(Error::Invalid("cannot reduce an empty fan".into()));
    }
    plan.check(fan.len(), schedule)?;
    let weights = plan
        .weights
        .clone()
        .unwrap_or_else(|| SeriesWeights::inverse_std(&fan.scenarios));
    let features = Features::new(&fan.scenarios, &weights, schedule);

    let all: Vec<usize> = (0..fan.len()).collect();
    let first_stage = plan.levels.first().map_or(schedule.total_stages, |l| l.stage);
    let root_rep = {
        let dist = features.matrix(&all, first_stage - 1);
        let sel = forward_select_matrix(&dist, &fan.probabilities, 1);
        sel.kept[0]
    };
    let mut next_id = 1;
    let mut groups = vec![Group {
        id: 0,
        members: all,
        probability: 1.0,
        representative: root_rep,
        lineage: vec![0],
    }];
    let mut representatives = vec![root_rep];

    for level in &plan.levels {
        let split: Vec<Vec<(Vec<usize>, f64, usize)>> = groups
            .par_iter()
            .map(|g| {
                let k = level.children.min(g.members.len());
                let probs: Vec<f64> = g.members.iter().map(|&w| fan.probabilities[w]).collect();
                let dist = features.matrix(&g.members, level.stage);
                let sel = forward_select_matrix(&dist, &probs, k);
                sel.kept
                    .iter()
                    .enumerate()
                    .map(|(pos, &local)| {
                        let members: Vec<usize> = g
                            .members
                            .iter()
                            .zip(&sel.assignment)
                            .filter(|(_, &a)| a == pos)
                            .map(|(&w, _)| w)
                            .collect();
                        (members, sel.probabilities[pos], g.members[local])
                    })
                    .collect()
            })
            .collect();
        let mut children = Vec::new();
        for (parent, subgroups) in groups.iter().zip(split) {
            let total: f64 = subgroups.iter().map(|s| s.1).sum();
            debug_assert!((total - parent.probability).abs() < 1e-9);
            for (members, probability, representative) in subgroups {
                assert!(!members.is_empty(), "forward selection produced an empty group");
                let mut lineage = parent.lineage.clone();
                lineage.push(next_id);
                representatives.push(representative);
                children.push(Group { id: next_id, members, probability, representative, lineage });
                next_id += 1;
            }
        }
        groups = children;
    }

    // Level whose group supplies the observations revealed at each stage.
    let level_of_stage: Vec<usize> = (0..schedule.total_stages)
        .map(|s| plan.levels.iter().take_while(|l| l.stage <= s).count())
        .collect();

    let mut data = Vec::with_capacity(groups.len());
    let mut probabilities = Vec::with_capacity(groups.len());
    let mut labels = Vec::with_capacity(groups.len());
    for g in &groups {
        debug_assert_eq!(representatives[g.id], g.representative);
        let mut leaf = fan.scenarios[g.representative].clone();
        for series in crate::scenario::all_series() {
            let source: Vec<f64> = (0..leaf.series(series).len())
                .map(|k| {
                    let stage = ScenarioData::reveal_stage(schedule, series, k);
                    let rep = representatives[g.lineage[level_of_stage[stage]]];
                    fan.scenarios[rep].series(series)[k]
                })
                .collect();
            *leaf.series_mut(series) = source;
        }
        data.push(leaf);
        probabilities.push(g.probability);
        labels.push(
            (0..schedule.total_stages)
                .map(|s| g.lineage[level_of_stage[s]])
                .collect::<Vec<_>>(),
        );
    }
    let tree = ScenarioTree::from_labels(schedule.clone(), data, probabilities, &labels)?;
    debug_assert!(tree.validate(None).is_valid(), "{:?}", tree.validate(None));
    Ok(tree)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_fan(values: &[f64]) -> ScenarioFan {
        ScenarioFan::uniform(
            values
                .iter()
                .map(|&v| {
                    let mut d = ScenarioData::zeros();
                    d.da_price[0] = v;
                    d
                })
                .collect(),
        )
    }

    fn da_only() -> SeriesWeights {
        let mut w = SeriesWeights::uniform(0.0);
        w.da = 1.0;
        w
    }

    #[test]
    fn distance_basics() {
        let s = StageSchedule::standard();
        let w = SeriesWeights::default();
        let a = ScenarioData::zeros();
        assert_eq!(scenario_distance(&a, &a, 33, &w, &s), 0.0);
        let mut b = a.clone();
        // Hour-2 wind is revealed at stage 6.
        b.wind[1] = 3.0;
        assert_eq!(scenario_distance(&a, &b, 5, &w, &s), 0.0);
        assert_eq!(scenario_distance(&a, &b, 6, &w, &s), 3.0);
        assert_eq!(scenario_distance(&b, &a, 33, &w, &s), 3.0);
    }

    #[test]
    fn three_point_selection() {
        let s = StageSchedule::standard();
        let fan = scalar_fan(&[0.0, 1.0, 10.0]);
        let one = forward_select(&fan, 1, 1, &da_only(), &s).unwrap();
        assert_eq!(one.kept, vec![1]);
        assert!((one.probabilities[0] - 1.0).abs() < 1e-15);
        assert!((one.residuals[0] - 10.0 / 3.0).abs() < 1e-12);

        let two = forward_select(&fan, 2, 1, &da_only(), &s).unwrap();
        assert_eq!(two.kept, vec![1, 2]);
        assert!((two.probabilities[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((two.probabilities[1] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(two.order, vec![1, 2]);

        let all = forward_select(&fan, 3, 1, &da_only(), &s).unwrap();
        assert_eq!(all.kept, vec![0, 1, 2]);
        assert_eq!(all.probabilities, fan.probabilities);
        assert!(forward_select(&fan, 4, 1, &da_only(), &s).is_err());
    }

    #[test]
    fn plan_checks() {
        let s = StageSchedule::standard();
        assert!(ReductionPlan::new([(1, 2), (2, 3)]).check(6, &s).is_ok());
        assert!(ReductionPlan::new([(1, 2), (2, 3)]).check(5, &s).is_err());
        assert!(ReductionPlan::new([(2, 2), (2, 1)]).check(5, &s).is_err());
        assert!(ReductionPlan::new([(1, 0)]).check(5, &s).is_err());
        assert!(ReductionPlan::new([(34, 1)]).check(5, &s).is_err());
    }

    #[test]
    fn all_ones_plan_gives_single_scenario() {
        let s = StageSchedule::standard();
        let fan = scalar_fan(&[0.0, 1.0, 10.0]);
        let mut plan = ReductionPlan::new([(1, 1), (2, 1), (3, 1)]);
        plan.weights = Some(da_only());
        let tree = build_tree(&fan, &plan, &s).unwrap();
        assert_eq!(tree.num_scenarios(), 1);
        assert_eq!(tree.scenario(0).da_price[0], 1.0);
        assert_eq!(tree.probability(0), 1.0);
    }

    #[test]
    fn full_first_stage_plan_is_identity() {
        let s = StageSchedule::standard();
        let fan = scalar_fan(&[3.0, 1.0, 10.0, 7.0]);
        let tree = build_tree(&fan, &ReductionPlan::new([(1, 4), (2, 1)]), &s).unwrap();
        assert_eq!(tree.scenarios(), fan.scenarios.as_slice());
        assert_eq!(tree.probabilities(), fan.probabilities.as_slice());
        assert_eq!(tree.clusters_at(1).unwrap().len(), 4);
    }

    #[test]
    fn separated_pairs_form_stage_one_clusters() {
        let s = StageSchedule::standard();
        // Pairs {0, 2} and {1, 3}: 0.1 apart within, 100 apart across.
        let mut fan = scalar_fan(&[0.0, 100.0, 0.1, 100.1]);
        for (w, d) in fan.scenarios.iter_mut().enumerate() {
            d.rm_price[0] = w as f64;
        }
        let mut plan = ReductionPlan::new([(1, 2), (2, 2)]);
        plan.weights = Some(SeriesWeights::uniform(1.0));
        let tree = build_tree(&fan, &plan, &s).unwrap();
        assert_eq!(tree.num_scenarios(), 4);
        let c1 = tree.clusters_at(1).unwrap();
        assert_eq!(c1.len(), 2);
        for c in &c1 {
            let das: Vec<f64> = c.scenarios.iter().map(|&w| tree.scenario(w).da_price[0]).collect();
            assert!((das[0] - das[1]).abs() < 1e-12, "cluster members share stage-1 data");
        }
        let mut rm: Vec<f64> = tree.scenarios().iter().map(|d| d.rm_price[0]).collect();
        rm.sort_by(f64::total_cmp);
        assert_eq!(rm, vec![0.0, 1.0, 2.0, 3.0]);
        assert!(tree.validate(None).is_valid());
    }
}
