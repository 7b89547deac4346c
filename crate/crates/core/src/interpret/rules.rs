use std::fmt;

use serde::{Deserialize, Serialize};

use super::tree::{DecisionTree, TreeNode};
use super::FeatureKey;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    AtMost,
    Above,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Faulty,
    Normal,
}

impl Verdict {
    pub fn from_label(faulty: bool) -> Self {
        if faulty {
            Verdict::Faulty
        } else {
            Verdict::Normal
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub feature: String,
    pub metric: String,
    /// Position of the feature in the tree's input vector.
    pub index: usize,
    pub threshold: f64,
    pub direction: Direction,
}

impl Condition {
    pub fn holds(&self, sample: &[f64]) -> bool {
        match self.direction {
            Direction::AtMost => sample[self.index] <= self.threshold,
            Direction::Above => sample[self.index] > self.threshold,
        }
    }
}

/// A root-to-leaf path whose leaf holds a single verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRule {
    pub class_id: String,
    pub conditions: Vec<Condition>,
    pub verdict: Verdict,
    pub support: usize,
}

impl DecisionRule {
    pub fn matches(&self, sample: &[f64]) -> bool {
        self.conditions.iter().all(|c| c.holds(sample))
    }
}

impl fmt::Display for DecisionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .conditions
            .iter()
            .map(|c| {
                let op = match c.direction {
                    Direction::AtMost => "<=",
                    Direction::Above => ">",
                };
                format!("{}({}) {op} {:.4}", c.feature, c.metric, c.threshold)
            })
            .collect();
        let lhs = if parts.is_empty() { "always".to_string() } else { parts.join(" AND ") };
        let verdict = match self.verdict {
            Verdict::Faulty => "faulty",
            Verdict::Normal => "normal",
        };
        write!(f, "{lhs} -> {verdict} (support {})", self.support)
    }
}

/// Every pure root-to-leaf path as a rule, by descending support.
pub fn extract_rules(tree: &DecisionTree, keys: &[FeatureKey], class_id: &str) -> Vec<DecisionRule> {
    let mut rules = Vec::new();
    let mut stack = vec![(0usize, Vec::<Condition>::new())];
    while let Some((id, path)) = stack.pop() {
        match &tree.nodes[id] {
            TreeNode::Leaf { faulty, normal } => {
                if (*faulty == 0) != (*normal == 0) {
                    rules.push(DecisionRule {
                        class_id: class_id.to_string(),
                        conditions: path,
                        verdict: Verdict::from_label(*faulty > 0),
                        support: faulty + normal,
                    });
                }
            }
            TreeNode::Split { feature, threshold, left, right } => {
                let key = &keys[*feature];
                let cond = |direction| Condition {
                    feature: key.feature.clone(),
                    metric: key.metric.clone(),
                    index: *feature,
                    threshold: *threshold,
                    direction,
                };
                let mut r = path.clone();
                r.push(cond(Direction::Above));
                stack.push((*right, r));
                let mut l = path;
                l.push(cond(Direction::AtMost));
                stack.push((*left, l));
            }
        }
    }
    rules.sort_by_key(|r| std::cmp::Reverse(r.support));
    rules
}
