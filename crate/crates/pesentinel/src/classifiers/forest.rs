//! Random forest: bootstrap-sampled information-gain trees with randomized
//! per-split feature candidates, majority-vote prediction.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{grow, SplitCandidates, TreeNode};
use super::{ClassifierError, Prediction};
use crate::datamine::{Bitset, FeatureMatrix, FunctionId};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: u32,
    /// Bootstrap draw size as a fraction of the training set; each tree sees
    /// `ceil(sample_fraction * N)` samples.
    pub sample_fraction: f64,
    /// Split candidates drawn per node. 0 means `ceil(sqrt(#features))`,
    /// resolved at training time.
    pub features_per_split: u32,
    pub max_depth: Option<u32>,
    pub seed: u64,
    /// When false, trees train on a seeded permutation without replacement
    /// instead of a bootstrap.
    pub bootstrap: bool,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            sample_fraction: 0.632,
            features_per_split: 0,
            max_depth: None,
            seed: 42,
            bootstrap: true,
        }
    }
}

impl ForestConfig {
    fn validate(&self) -> Result<(), ClassifierError> {
        if self.n_trees == 0 {
            return Err(ClassifierError::BadConfig("n_trees must be >= 1".into()));
        }
        if !(self.sample_fraction > 0.0 && self.sample_fraction <= 1.0) {
            return Err(ClassifierError::BadConfig(format!(
                "sample_fraction must be in (0, 1], got {}",
                self.sample_fraction
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<TreeNode>,
    pub config: ForestConfig,
    /// Digest binding the model to the vocabulary it was trained against.
    pub vocabulary_hash: String,
    pub vocab_len: usize,
    pub retained_features: Vec<FunctionId>,
}

/// Train `config.n_trees` independent trees. Each tree gets its own
/// SplitMix64 stream derived from `(seed, tree_index)`, consumed in a fixed
/// order (bootstrap draws, then per-split candidate draws depth-first), so
/// the model is bit-identical across runs and thread counts.
pub fn train_forest(
    matrix: &FeatureMatrix,
    retained_features: &[FunctionId],
    config: &ForestConfig,
) -> Result<ForestModel, ClassifierError> {
    config.validate()?;
    if matrix.samples.is_empty() {
        return Err(ClassifierError::EmptyTrainingSet);
    }
    let (malware, benign) = matrix.class_counts();
    if malware == 0 || benign == 0 {
        return Err(ClassifierError::SingleClassCorpus);
    }
    if retained_features.is_empty() {
        return Err(ClassifierError::BadConfig("no retained features".into()));
    }

    let n = matrix.samples.len();
    let draw = ((config.sample_fraction * n as f64).ceil() as usize).clamp(1, n.max(1));
    let per_split = if config.features_per_split == 0 {
        (retained_features.len() as f64).sqrt().ceil() as usize
    } else {
        (config.features_per_split as usize).min(retained_features.len())
    };
    let max_depth = config.max_depth.map(|d| d as usize);

    let trees: Vec<TreeNode> = (0..config.n_trees as u64)
        .into_par_iter()
        .map(|tree_index| {
            let mut rng = SplitMix64::stream(config.seed, tree_index);
            let rows: Vec<usize> = if config.bootstrap {
                (0..draw).map(|_| rng.next_below(n as u64) as usize).collect()
            } else {
                rng.sample_without_replacement(n, draw)
            };
            let mut candidates = SplitCandidates::Random {
                rng: &mut rng,
                per_split,
            };
            grow(matrix, &rows, retained_features, &mut candidates, 0, max_depth)
        })
        .collect();

    Ok(ForestModel {
        trees,
        config: config.clone(),
        vocabulary_hash: super::io::vocabulary_hash(&matrix.vocabulary),
        vocab_len: matrix.vocabulary.len(),
        retained_features: retained_features.to_vec(),
    })
}

impl ForestModel {
    /// Majority vote over the trees. `risk_score = malware_votes / n_trees`;
    /// a score of exactly 0.5 classifies as malware.
    pub fn predict(&self, features: &Bitset) -> Result<Prediction, ClassifierError> {
        if features.len() != self.vocab_len {
            return Err(ClassifierError::VocabularyMismatch(format!(
                "expected {} features, got {}",
                self.vocab_len,
                features.len()
            )));
        }
        let malware_votes = self
            .trees
            .iter()
            .filter(|t| t.predict(features).is_malware())
            .count() as u32;
        let benign_votes = self.trees.len() as u32 - malware_votes;
        let risk = malware_votes as f64 / self.trees.len() as f64;
        Ok(Prediction::from_risk(risk, Some((malware_votes, benign_votes))))
    }
}
