//! Gradient-boosted regression trees with a cross-entropy objective that
//! accepts soft labels in `[0, 1]`.
//!
//! Trees are grown leaf-wise (best gain first) with exact split search over
//! presorted feature values. A row goes left when `value <= threshold`.

mod train;

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

pub use train::{best_split, logit, sigmoid, split_gain, train, train_weighted, xentropy, xentropy_grad_hess, Split};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub num_trees: usize,
    pub max_leaves: usize,
    pub min_data_in_leaf: usize,
    pub learning_rate: f64,
    pub l2_reg: f64,
    pub min_split_gain: f64,
    /// Recorded for provenance; training itself draws no random numbers.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            num_trees: 60,
            max_leaves: 9,
            min_data_in_leaf: 10,
            learning_rate: 0.04,
            l2_reg: 0.0,
            min_split_gain: 0.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_leaves < 2 {
            return Err(Error::invalid("max_leaves must be at least 2"));
        }
        if self.min_data_in_leaf < 1 {
            return Err(Error::invalid("min_data_in_leaf must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::invalid("learning_rate must be in (0, 1]"));
        }
        if !(self.l2_reg >= 0.0) || !(self.min_split_gain >= 0.0) {
            return Err(Error::invalid("l2_reg and min_split_gain must be non-negative"));
        }
        Ok(())
    }
}

/// Column layout a model was trained on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    pub feature_names: Vec<String>,
    pub registry_version: String,
}

impl Schema {
    pub fn of(m: &FeatureMatrix) -> Self {
        Schema {
            feature_names: m.names(),
            registry_version: m.registry.version.clone(),
        }
    }

    /// Anonymous `f0, f1, ...` columns, for tests and ad-hoc data.
    pub fn anonymous(n_features: usize) -> Self {
        Schema {
            feature_names: (0..n_features).map(|i| format!("f{i}")).collect(),
            registry_version: "anonymous".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        gain: f64,
        count: usize,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
        count: usize,
    },
}

/// Nodes in creation order; the root is node 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf_index(&self, row: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { .. } => return i,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => i = if row[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn predict_raw(&self, row: &[f64]) -> f64 {
        match self.nodes[self.leaf_index(row)] {
            Node::Leaf { value, .. } => value,
            Node::Split { .. } => unreachable!("leaf_index returns a leaf"),
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn leaf_counts(&self) -> Vec<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Leaf { count, .. } => Some(*count),
                _ => None,
            })
            .collect()
    }

    fn check(&self, n_features: usize) -> Result<()> {
        let bad = |m: &str| Err(Error::invalid(format!("malformed tree: {m}")));
        if self.nodes.is_empty() {
            return bad("no nodes");
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            if std::mem::replace(&mut seen[i], true) {
                return bad("node reached twice");
            }
            if let Node::Split {
                feature,
                threshold,
                left,
                right,
                ..
            } = self.nodes[i]
            {
                if feature >= n_features || !threshold.is_finite() {
                    return bad("bad split");
                }
                if left >= self.nodes.len() || right >= self.nodes.len() {
                    return bad("child out of range");
                }
                stack.extend([left, right]);
            }
        }
        if seen.iter().any(|s| !s) {
            return bad("unreachable node");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbmModel {
    pub format_version: u32,
    pub registry_version: String,
    pub feature_names: Vec<String>,
    /// Raw log-odds added before the trees.
    pub base_score: f64,
    pub config: TrainConfig,
    pub trees: Vec<Tree>,
}

/// One tree's contribution when scoring a row.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    pub tree: usize,
    pub leaf: usize,
    pub value: f64,
}

impl GbmModel {
    pub fn predict_raw(&self, row: &[f64]) -> f64 {
        self.base_score + self.trees.iter().map(|t| t.predict_raw(row)).sum::<f64>()
    }

    pub fn predict_proba(&self, row: &[f64]) -> f64 {
        sigmoid(self.predict_raw(row))
    }

    pub fn trace(&self, row: &[f64]) -> Vec<TraceStep> {
        self.trees
            .iter()
            .enumerate()
            .map(|(tree, t)| {
                let leaf = t.leaf_index(row);
                TraceStep {
                    tree,
                    leaf,
                    value: t.predict_raw(row),
                }
            })
            .collect()
    }

    pub fn check_schema(&self, names: &[String], version: &str) -> Result<()> {
        if version != self.registry_version || names != self.feature_names.as_slice() {
            return Err(Error::RegistryMismatch {
                expected: self.registry_version.clone(),
                actual: version.to_string(),
            });
        }
        Ok(())
    }

    /// Scores every row of a matrix whose layout must match the model's.
    pub fn predict_matrix(&self, m: &FeatureMatrix) -> Result<Vec<f64>> {
        self.check_schema(&m.names(), &m.registry.version)?;
        Ok(m.rows.iter().map(|r| self.predict_proba(r)).collect())
    }

    /// Total split gain per feature, normalized to sum to 1; sorted by
    /// descending importance, then name. Empty when no tree splits.
    pub fn feature_importance(&self) -> Vec<(String, f64)> {
        let mut totals = vec![0.0; self.feature_names.len()];
        for t in &self.trees {
            for n in &t.nodes {
                if let Node::Split { feature, gain, .. } = n {
                    totals[*feature] += gain;
                }
            }
        }
        let sum: f64 = totals.iter().sum();
        if sum <= 0.0 {
            return Vec::new();
        }
        let mut out: Vec<(String, f64)> = self
            .feature_names
            .iter()
            .zip(&totals)
            .filter(|(_, g)| **g > 0.0)
            .map(|(n, g)| (n.clone(), g / sum))
            .collect();
        out.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        out
    }

    /// Indented if/else rendering of every tree.
    pub fn dump_trees(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "base_score {}", self.base_score);
        for (i, t) in self.trees.iter().enumerate() {
            let _ = writeln!(s, "tree {i}:");
            self.dump_node(t, 0, 1, &mut s);
        }
        s
    }

    fn dump_node(&self, t: &Tree, i: usize, depth: usize, s: &mut String) {
        let pad = "  ".repeat(depth);
        match &t.nodes[i] {
            Node::Leaf { value, count } => {
                let _ = writeln!(s, "{pad}leaf {value} (n={count})");
            }
            Node::Split {
                feature,
                threshold,
                gain,
                count,
                left,
                right,
            } => {
                let name = &self.feature_names[*feature];
                let _ = writeln!(s, "{pad}if {name} <= {threshold}: (gain={gain}, n={count})");
                self.dump_node(t, *left, depth + 1, s);
                let _ = writeln!(s, "{pad}else:");
                self.dump_node(t, *right, depth + 1, s);
            }
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: GbmModel = serde_json::from_str(text)?;
        if m.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::invalid(format!(
                "unsupported model format version {}",
                m.format_version
            )));
        }
        for t in &m.trees {
            t.check(m.feature_names.len())?;
        }
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_reference_points() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert_eq!(format!("{:.3}", sigmoid(-0.76)), "0.319");
        assert_eq!(format!("{:.3}", sigmoid(-0.6)), "0.354");
    }

    #[test]
    fn constant_labels_give_no_trees() {
        let data: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64, (i % 7) as f64]).collect();
        let rows: Vec<&[f64]> = data.iter().map(Vec::as_slice).collect();
        let y = vec![0.328; 50];
        let m = train(&rows, &y, &Schema::anonymous(2), &TrainConfig::default()).unwrap();
        assert!(m.trees.is_empty());
        for r in &rows {
            assert!((m.predict_proba(r) - 0.328).abs() < 1e-9);
        }
        assert!(m.feature_importance().is_empty());
    }

    #[test]
    fn rejects_bad_input() {
        let data = vec![vec![1.0]; 5];
        let rows: Vec<&[f64]> = data.iter().map(Vec::as_slice).collect();
        let cfg = TrainConfig::default();
        assert!(train(&[], &[], &Schema::anonymous(1), &cfg).is_err());
        assert!(train(&rows, &[0.5; 5], &Schema::anonymous(1), &cfg).is_err());
        let small = TrainConfig {
            min_data_in_leaf: 1,
            ..cfg.clone()
        };
        assert!(train(&rows, &[0.5, 0.5, 2.0, 0.1, 0.0], &Schema::anonymous(1), &small).is_err());
        assert!(TrainConfig {
            max_leaves: 1,
            ..cfg
        }
        .validate()
        .is_err());
    }

    #[test]
    fn single_leaf_tree_dumps_one_line() {
        let m = GbmModel {
            format_version: MODEL_FORMAT_VERSION,
            registry_version: "x".into(),
            feature_names: vec!["a".into()],
            base_score: 0.0,
            config: TrainConfig::default(),
            trees: vec![Tree {
                nodes: vec![Node::Leaf { value: 0.25, count: 3 }],
            }],
        };
        assert_eq!(m.dump_trees(), "base_score 0\ntree 0:\n  leaf 0.25 (n=3)\n");
    }

    #[test]
    fn malformed_tree_rejected_on_load() {
        let m = GbmModel {
            format_version: MODEL_FORMAT_VERSION,
            registry_version: "x".into(),
            feature_names: vec!["a".into()],
            base_score: 0.0,
            config: TrainConfig::default(),
            trees: vec![Tree {
                nodes: vec![Node::Split {
                    feature: 0,
                    threshold: 1.0,
                    gain: 1.0,
                    count: 2,
                    left: 0,
                    right: 5,
                }],
            }],
        };
        assert!(GbmModel::from_json(&m.to_json().unwrap()).is_err());
    }
}
