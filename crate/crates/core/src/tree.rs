//! Staged scenario trees, clusters and the JSON tree document.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::EcConfig;
use crate::scenario::ScenarioData;
use crate::schedule::StageSchedule;
use crate::{Error, Result};

const PROB_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: usize,
    pub stage: usize,
    pub parent: Option<usize>,
    /// Probability of reaching this node given its parent.
    pub probability: f64,
}

/// Scenarios sharing one tree node at a given stage.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cluster {
    pub node: usize,
    pub scenarios: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioTree {
    schedule: StageSchedule,
    nodes: Vec<Node>,
    leaves: Vec<usize>,
    probabilities: Vec<f64>,
    data: Vec<ScenarioData>,
    /// `paths[ω][s]` is the node of scenario ω at stage s.
    paths: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, msg: impl Into<String>) {
        self.violations.push(msg.into());
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_valid() {
            Ok(())
        } else {
            Err(Error::Invalid(self.violations.join("; ")))
        }
    }
}

impl ScenarioTree {
    /// Builds a tree from per-stage labels: scenarios ω and ω' share the node
    /// at stage s iff `labels[ω][1..=s] == labels[ω'][1..=s]`.
    ///
    /// Conditional node probabilities are derived from the scenario probabilities.
    pub fn from_labels(
        schedule: StageSchedule,
        data: Vec<ScenarioData>,
        probabilities: Vec<f64>,
        labels: &[Vec<usize>],
    ) -> Result<Self> {
        let n = data.len();
        if n == 0 || probabilities.len() != n || labels.len() != n {
            return Err(Error::Invalid(format!(
                "tree needs matching nonempty data ({n}), probabilities ({}) and labels ({})",
                probabilities.len(),
                labels.len()
            )));
        }
        let stages = schedule.total_stages;
        if let Some(bad) = labels.iter().position(|l| l.len() != stages) {
            return Err(Error::Invalid(format!(
                "labels of scenario {bad} cover {} stages, expected {stages}",
                labels[bad].len()
            )));
        }
        let mut nodes = vec![Node { id: 0, stage: 0, parent: None, probability: 1.0 }];
        let mut mass = vec![1.0];
        let mut paths = vec![vec![0usize; stages]; n];
        for s in 1..stages {
            let mut index: HashMap<(usize, usize), usize> = HashMap::new();
            for w in 0..n {
                let parent = paths[w][s - 1];
                let id = *index.entry((parent, labels[w][s])).or_insert_with(|| {
                    nodes.push(Node { id: nodes.len(), stage: s, parent: Some(parent), probability: 0.0 });
                    mass.push(0.0);
                    nodes.len() - 1
                });
                paths[w][s] = id;
            }
        }
        for w in 0..n {
            for s in 1..stages {
                mass[paths[w][s]] += probabilities[w];
            }
        }
        for node in nodes.iter_mut().skip(1) {
            let parent_mass = mass[node.parent.expect("non-root")];
            node.probability = if parent_mass > 0.0 { mass[node.id] / parent_mass } else { 0.0 };
        }
        let leaves = paths.iter().map(|p| p[stages - 1]).collect();
        Ok(ScenarioTree { schedule, nodes, leaves, probabilities, data, paths })
    }

    /// Degenerate tree branching entirely at stage 1.
    pub fn fan(schedule: StageSchedule, data: Vec<ScenarioData>, probabilities: Vec<f64>) -> Result<Self> {
        let labels: Vec<Vec<usize>> = (0..data.len())
            .map(|w| vec![w; schedule.total_stages])
            .collect();
        Self::from_labels(schedule, data, probabilities, &labels)
    }

    /// Fan with uniform probabilities.
    pub fn uniform_fan(schedule: StageSchedule, data: Vec<ScenarioData>) -> Result<Self> {
        let n = data.len().max(1);
        Self::fan(schedule, data, vec![1.0 / n as f64; n])
    }

    pub fn single(schedule: StageSchedule, data: ScenarioData) -> Self {
        Self::fan(schedule, vec![data], vec![1.0]).expect("single scenario tree")
    }

    pub fn schedule(&self) -> &StageSchedule {
        &self.schedule
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn leaves(&self) -> &[usize] {
        &self.leaves
    }

    pub fn num_scenarios(&self) -> usize {
        self.data.len()
    }

    pub fn probability(&self, w: usize) -> f64 {
        self.probabilities[w]
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn scenario(&self, w: usize) -> &ScenarioData {
        &self.data[w]
    }

    pub fn scenarios(&self) -> &[ScenarioData] {
        &self.data
    }

    /// Node of scenario `w` at `stage`.
    pub fn node_at(&self, w: usize, stage: usize) -> usize {
        self.paths[w][stage]
    }

    /// Partition of the scenarios by shared node at `stage`, ordered by lowest member.
    pub fn clusters_at(&self, stage: usize) -> Result<Vec<Cluster>> {
        let max = self.schedule.last_stage();
        if stage == 0 || stage > max {
            return Err(Error::StageOutOfRange { stage, max });
        }
        Ok(self.clusters_unchecked(stage))
    }

    pub(crate) fn clusters_unchecked(&self, stage: usize) -> Vec<Cluster> {
        let mut index: HashMap<usize, usize> = HashMap::new();
        let mut clusters: Vec<Cluster> = Vec::new();
        for w in 0..self.num_scenarios() {
            let node = self.paths[w][stage];
            match index.get(&node) {
                Some(&k) => clusters[k].scenarios.push(w),
                None => {
                    index.insert(node, clusters.len());
                    clusters.push(Cluster { node, scenarios: vec![w] });
                }
            }
        }
        clusters
    }

    /// Scenarios sorted by ascending day-ahead price at hour `t`; ties keep index order.
    pub fn da_price_order(&self, t: usize) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.num_scenarios()).collect();
        order.sort_by(|&a, &b| self.data[a].da(t).total_cmp(&self.data[b].da(t)));
        order
    }

    /// Checks every structural, probabilistic and data invariant.
    pub fn validate(&self, config: Option<&EcConfig>) -> ValidationReport {
        let mut report = ValidationReport::default();
        for p in self.schedule.check() {
            report.push(format!("schedule: {p}"));
        }
        check_structure(&self.nodes, &self.leaves, self.schedule.total_stages, &mut report);

        let total: f64 = self.probabilities.iter().sum();
        if (total - 1.0).abs() > PROB_TOL {
            report.push(format!("scenario probabilities sum to {total}"));
        }
        for (w, &p) in self.probabilities.iter().enumerate() {
            if !(p > 0.0) {
                report.push(format!("scenario {w} has non-positive probability {p}"));
            }
        }
        let mut child_sum = vec![0.0; self.nodes.len()];
        let mut has_child = vec![false; self.nodes.len()];
        for node in &self.nodes {
            if let Some(parent) = node.parent {
                if parent < self.nodes.len() {
                    child_sum[parent] += node.probability;
                    has_child[parent] = true;
                }
            }
        }
        for (id, (&sum, &has)) in child_sum.iter().zip(&has_child).enumerate() {
            if has && (sum - 1.0).abs() > PROB_TOL {
                report.push(format!("children of node {id} have conditional probabilities summing to {sum}"));
            }
        }
        if report.is_valid() {
            for w in 0..self.num_scenarios() {
                let along: f64 = self.paths[w].iter().map(|&n| self.nodes[n].probability).product();
                if (along - self.probabilities[w]).abs() > PROB_TOL {
                    report.push(format!(
                        "scenario {w}: probability {} differs from path product {along}",
                        self.probabilities[w]
                    ));
                }
            }
        }

        for (w, d) in self.data.iter().enumerate() {
            for p in d.shape_problems() {
                report.push(format!("scenario {w}: {p}"));
            }
        }
        if !report.is_valid() {
            return report;
        }

        self.check_shared_history(&mut report);

        if let Some(config) = config {
            const TOL: f64 = 1e-9;
            for (w, d) in self.data.iter().enumerate() {
                for (name, values, cap) in [("wind", &d.wind, config.wind_capacity), ("pv", &d.pv, config.pv_capacity)] {
                    if let Some(k) = values.iter().position(|&v| v < -TOL || v > cap + TOL) {
                        report.push(format!(
                            "scenario {w}: {name}[{}] = {} outside [0, {cap}]",
                            k + 1,
                            values[k]
                        ));
                    }
                }
            }
        }
        report
    }

    fn check_shared_history(&self, report: &mut ValidationReport) {
        let stages = self.schedule.total_stages;
        let by_stage: Vec<Vec<Vec<f64>>> = self
            .data
            .iter()
            .map(|d| {
                let mut grouped = vec![Vec::new(); stages];
                d.for_each_observation(&self.schedule, |_, _, s, v| grouped[s].push(v));
                grouped
            })
            .collect();
        for s in 1..stages {
            for cluster in self.clusters_unchecked(s) {
                let first = cluster.scenarios[0];
                for &w in &cluster.scenarios[1..] {
                    if by_stage[w][s] != by_stage[first][s] {
                        report.push(format!(
                            "shared-history mismatch at stage {s} between scenarios {first} and {w}"
                        ));
                    }
                }
            }
        }
    }

    pub fn to_document(&self) -> TreeDocument {
        TreeDocument {
            schedule: self.schedule.clone(),
            nodes: self.nodes.clone(),
            scenarios: self
                .leaves
                .iter()
                .zip(&self.probabilities)
                .zip(&self.data)
                .map(|((&leaf, &probability), data)| ScenarioEntry { leaf, probability, data: data.clone() })
                .collect(),
        }
    }

    pub fn from_document(doc: TreeDocument) -> Result<Self> {
        let mut report = ValidationReport::default();
        let leaves: Vec<usize> = doc.scenarios.iter().map(|s| s.leaf).collect();
        check_structure(&doc.nodes, &leaves, doc.schedule.total_stages, &mut report);
        if doc.scenarios.is_empty() {
            report.push("tree has no scenarios");
        }
        report.into_result()?;
        let stages = doc.schedule.total_stages;
        let paths = leaves
            .iter()
            .map(|&leaf| {
                let mut path = vec![0; stages];
                let mut node = leaf;
                for s in (0..stages).rev() {
                    path[s] = node;
                    node = doc.nodes[node].parent.unwrap_or(0);
                }
                path
            })
            .collect();
        let (probabilities, data) = doc.scenarios.into_iter().map(|s| (s.probability, s.data)).unzip();
        Ok(ScenarioTree { schedule: doc.schedule, nodes: doc.nodes, leaves, probabilities, data, paths })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_document(serde_json::from_str(text)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Parent links must form a single rooted tree whose depth equals the stage index.
fn check_structure(nodes: &[Node], leaves: &[usize], stages: usize, report: &mut ValidationReport) {
    let roots = nodes.iter().filter(|n| n.parent.is_none()).count();
    if roots != 1 {
        report.push(format!("tree has {roots} roots, expected exactly one"));
    }
    for (k, node) in nodes.iter().enumerate() {
        if node.id != k {
            report.push(format!("node at position {k} has id {}", node.id));
        }
        match node.parent {
            None if node.stage != 0 => report.push(format!("root node {k} is at stage {}", node.stage)),
            Some(p) if p >= nodes.len() => report.push(format!("node {k} has unknown parent {p}")),
            Some(p) if nodes[p].stage + 1 != node.stage => report.push(format!(
                "node {k} at stage {} has parent at stage {}",
                node.stage, nodes[p].stage
            )),
            _ => {}
        }
    }
    for (w, &leaf) in leaves.iter().enumerate() {
        match nodes.get(leaf) {
            None => report.push(format!("scenario {w} has unknown leaf {leaf}")),
            Some(n) if n.stage + 1 != stages => {
                report.push(format!("leaf of scenario {w} is at stage {}, expected {}", n.stage, stages - 1))
            }
            _ => {}
        }
    }
    let mut sorted = leaves.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        report.push("two scenarios share a leaf");
    }
}

/// Serialized form of a tree: `schedule`, `nodes` and `scenarios` sections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeDocument {
    pub schedule: StageSchedule,
    pub nodes: Vec<Node>,
    pub scenarios: Vec<ScenarioEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioEntry {
    pub leaf: usize,
    pub probability: f64,
    pub data: ScenarioData,
}
