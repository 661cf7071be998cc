//! From-scratch classifiers over binary import-presence features.
//!
//! A greedy information-gain decision tree, a Bernoulli naive-Bayes
//! baseline, and a random forest of bootstrap-sampled trees with randomized
//! per-split feature candidates. Predictions carry a risk score in `[0, 1]`
//! used to rank files by security risk; the score 0.5 tie and leaf-majority
//! ties both resolve to malware.

mod forest;
mod io;
mod naive_bayes;
mod tree;

pub use forest::{train_forest, ForestConfig, ForestModel};
pub use io::{load_model, save_model, vocabulary_hash, ModelFile, TrainedModel};
pub use naive_bayes::{train_nb, NaiveBayesModel};
pub use tree::{train_tree, DecisionTreeModel, TreeNode};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datamine::Label;

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("training corpus contains a single class")]
    SingleClassCorpus,
    #[error("bad configuration: {0}")]
    BadConfig(String),
    #[error("feature vector does not match the model vocabulary: {0}")]
    VocabularyMismatch(String),
    #[error("unsupported model file format or version: {0}")]
    FormatVersionMismatch(String),
    #[error("corrupt model file: {0}")]
    CorruptModelFile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A classification outcome: the voted label plus the risk scalar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: Label,
    /// Fraction of trees voting malware (forest) or the malware posterior
    /// (naive Bayes); always in `[0, 1]`.
    pub risk_score: f64,
    /// `(malware_votes, benign_votes)`, forest only.
    pub per_tree_votes: Option<(u32, u32)>,
}

impl Prediction {
    fn from_risk(risk_score: f64, per_tree_votes: Option<(u32, u32)>) -> Self {
        let label = if risk_score >= 0.5 {
            Label::Malware
        } else {
            Label::Benign
        };
        Self {
            label,
            risk_score,
            per_tree_votes,
        }
    }
}
