//! Interpretation of a trained localizer: per-class surrogate trees with
//! readable rules, and retrieval of similar historical failures.

pub mod baseline;
pub mod decoder;
pub mod features;
pub mod global;
pub mod local;
pub mod rules;
pub mod tree;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use baseline::TreeBaseline;
pub use global::{categorize, GlobalConfig, GlobalInterpretation, ScoreCategory};
pub use local::{class_signature, find_similar, ClassSignature, SimilarFailure};
pub use rules::{DecisionRule, Verdict};
pub use tree::{DecisionTree, TreeConfig};

/// A catalog feature applied to one metric column.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FeatureKey {
    pub feature: String,
    pub metric: String,
}

impl fmt::Display for FeatureKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.feature, self.metric)
    }
}
