//! Axis-aligned binary classification trees (Gini impurity).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeConfig {
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self { max_depth: 5, min_leaf: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Leaf {
        faulty: usize,
        normal: usize,
    },
    /// Samples with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<TreeNode>,
    pub feature_count: usize,
    /// Set when the training labels were all identical.
    pub degenerate: bool,
}

fn gini(faulty: usize, total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let p = faulty as f64 / total as f64;
    2.0 * p * (1.0 - p)
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [bool],
    cfg: TreeConfig,
    nodes: Vec<TreeNode>,
}

impl Builder<'_> {
    fn grow(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let faulty = idx.iter().filter(|&&i| self.y[i]).count();
        let n = idx.len();
        let id = self.nodes.len();
        self.nodes.push(TreeNode::Leaf { faulty, normal: n - faulty });
        if depth >= self.cfg.max_depth || faulty == 0 || faulty == n || n < 2 * self.cfg.min_leaf {
            return id;
        }
        let Some((feature, threshold)) = self.best_split(&idx, faulty) else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx.into_iter().partition(|&i| self.x[i][feature] <= threshold);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[id] = TreeNode::Split { feature, threshold, left, right };
        id
    }

    fn best_split(&self, idx: &[usize], faulty: usize) -> Option<(usize, f64)> {
        let n = idx.len();
        let parent = gini(faulty, n);
        let mut best: Option<(f64, usize, f64)> = None;
        let features = self.x.first().map_or(0, Vec::len);
        let mut order: Vec<usize> = idx.to_vec();
        for f in 0..features {
            order.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]).then(a.cmp(&b)));
            let mut left_faulty = 0;
            for k in 0..n - 1 {
                if self.y[order[k]] {
                    left_faulty += 1;
                }
                let (lo, hi) = (self.x[order[k]][f], self.x[order[k + 1]][f]);
                let left_n = k + 1;
                if lo == hi || left_n < self.cfg.min_leaf || n - left_n < self.cfg.min_leaf {
                    continue;
                }
                let impurity = (left_n as f64 * gini(left_faulty, left_n)
                    + (n - left_n) as f64 * gini(faulty - left_faulty, n - left_n))
                    / n as f64;
                let gain = parent - impurity;
                if gain > 1e-12 && best.is_none_or(|(g, _, _)| gain > g + 1e-12) {
                    best = Some((gain, f, lo + (hi - lo) / 2.0));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }
}

impl DecisionTree {
    /// Fits a tree; labels are `true` for faulty.
    pub fn fit(x: &[Vec<f64>], y: &[bool], cfg: TreeConfig) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::Shape(format!("{} samples, {} labels", x.len(), y.len())));
        }
        if x.is_empty() {
            return Err(Error::InvalidArgument("no samples to fit".into()));
        }
        let feature_count = x[0].len();
        if x.iter().any(|r| r.len() != feature_count) {
            return Err(Error::Shape("samples have different feature counts".into()));
        }
        if x.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Validation("non-finite feature value".into()));
        }
        let degenerate = y.iter().all(|&v| v) || y.iter().all(|&v| !v);
        let mut b = Builder { x, y, cfg, nodes: Vec::new() };
        b.grow((0..x.len()).collect(), 0);
        Ok(Self { nodes: b.nodes, feature_count, degenerate })
    }

    /// Index of the leaf a sample falls into.
    pub fn leaf_of(&self, sample: &[f64]) -> usize {
        let mut id = 0;
        while let TreeNode::Split { feature, threshold, left, right } = &self.nodes[id] {
            id = if sample[*feature] <= *threshold { *left } else { *right };
        }
        id
    }

    /// Share of faulty training samples in the sample's leaf.
    pub fn faulty_fraction(&self, sample: &[f64]) -> f64 {
        match self.nodes[self.leaf_of(sample)] {
            TreeNode::Leaf { faulty, normal } => faulty as f64 / (faulty + normal).max(1) as f64,
            TreeNode::Split { .. } => unreachable!("leaf_of returns leaves"),
        }
    }

    /// Majority verdict; ties count as normal.
    pub fn predict(&self, sample: &[f64]) -> bool {
        match self.nodes[self.leaf_of(sample)] {
            TreeNode::Leaf { faulty, normal } => faulty > normal,
            TreeNode::Split { .. } => unreachable!("leaf_of returns leaves"),
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[TreeNode], id: usize) -> usize {
            match &nodes[id] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        go(&self.nodes, 0)
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, TreeNode::Leaf { .. })).count()
    }
}
