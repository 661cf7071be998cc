//! Greedy information-gain decision tree induction.

use serde::{Deserialize, Serialize};

use super::{ClassifierError, Prediction};
use crate::datamine::{Bitset, FeatureMatrix, FunctionId, Label};
use crate::feature_selection::entropy;
use crate::rng::SplitMix64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Leaf {
        label: Label,
        /// `(malware, benign)` training counts at the leaf.
        class_counts: (u64, u64),
    },
    Split {
        feature: FunctionId,
        present_child: Box<TreeNode>,
        absent_child: Box<TreeNode>,
    },
}

impl TreeNode {
    pub fn predict(&self, features: &Bitset) -> Label {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { label, .. } => return *label,
                TreeNode::Split {
                    feature,
                    present_child,
                    absent_child,
                } => {
                    node = if features.get(*feature as usize) {
                        present_child
                    } else {
                        absent_child
                    };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split {
                present_child,
                absent_child,
                ..
            } => 1 + present_child.depth().max(absent_child.depth()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTreeModel {
    pub root: TreeNode,
    pub vocab_len: usize,
    pub vocabulary_hash: String,
}

impl DecisionTreeModel {
    pub fn predict(&self, features: &Bitset) -> Result<Prediction, ClassifierError> {
        if features.len() != self.vocab_len {
            return Err(ClassifierError::VocabularyMismatch(format!(
                "expected {} features, got {}",
                self.vocab_len,
                features.len()
            )));
        }
        let label = self.root.predict(features);
        let risk = if label.is_malware() { 1.0 } else { 0.0 };
        Ok(Prediction::from_risk(risk, None))
    }
}

fn class_counts(matrix: &FeatureMatrix, rows: &[usize]) -> (u64, u64) {
    let malware = rows
        .iter()
        .filter(|&&i| matrix.samples[i].label.is_malware())
        .count() as u64;
    (malware, rows.len() as u64 - malware)
}

fn majority(counts: (u64, u64)) -> Label {
    // Tie goes to malware, the conservative call for a security tool.
    if counts.0 >= counts.1 {
        Label::Malware
    } else {
        Label::Benign
    }
}

/// Information gain of splitting `rows` on `feature`, given the node's label
/// entropy.
fn gain_at_node(
    matrix: &FeatureMatrix,
    rows: &[usize],
    feature: FunctionId,
    node_entropy: f64,
) -> f64 {
    // counts[present][is_malware]
    let mut counts = [[0u64; 2]; 2];
    for &i in rows {
        let s = &matrix.samples[i];
        counts[s.features.get(feature as usize) as usize][s.label.is_malware() as usize] += 1;
    }
    let total = rows.len() as f64;
    let mut conditional = 0.0;
    for part in counts {
        let n = part[0] + part[1];
        if n > 0 {
            conditional += (n as f64 / total) * entropy(&part).unwrap();
        }
    }
    (node_entropy - conditional).max(0.0)
}

/// Per-split candidate selection: the whole feature list for a plain tree,
/// or a fresh random draw of `k` features for forest trees.
pub(super) enum SplitCandidates<'a> {
    All,
    Random {
        rng: &'a mut SplitMix64,
        per_split: usize,
    },
}

pub(super) fn grow(
    matrix: &FeatureMatrix,
    rows: &[usize],
    features: &[FunctionId],
    candidates: &mut SplitCandidates,
    depth: usize,
    max_depth: Option<usize>,
) -> TreeNode {
    let counts = class_counts(matrix, rows);
    let leaf = |counts| TreeNode::Leaf {
        label: majority(counts),
        class_counts: counts,
    };
    if counts.0 == 0 || counts.1 == 0 || features.is_empty() {
        return leaf(counts);
    }
    if let Some(cap) = max_depth {
        if depth >= cap {
            return leaf(counts);
        }
    }

    let node_entropy = entropy(&[counts.0, counts.1]).unwrap();
    let drawn;
    let pool: &[FunctionId] = match candidates {
        SplitCandidates::All => features,
        SplitCandidates::Random { rng, per_split } => {
            drawn = rng
                .sample_without_replacement(features.len(), *per_split)
                .into_iter()
                .map(|i| features[i])
                .collect::<Vec<_>>();
            &drawn
        }
    };

    let mut best: Option<(FunctionId, f64)> = None;
    for &f in pool {
        let g = gain_at_node(matrix, rows, f, node_entropy);
        best = match best {
            Some((bf, bg)) if g < bg || (g == bg && f >= bf) => Some((bf, bg)),
            _ => Some((f, g)),
        };
    }
    let Some((feature, gain)) = best else {
        return leaf(counts);
    };
    if gain <= 0.0 {
        return leaf(counts);
    }

    let (present, absent): (Vec<usize>, Vec<usize>) = rows
        .iter()
        .partition(|&&i| matrix.samples[i].features.get(feature as usize));
    // A zero-entropy-reduction split never gets here, so both sides are
    // non-empty.
    debug_assert!(!present.is_empty() && !absent.is_empty());

    let present_child = grow(matrix, &present, features, candidates, depth + 1, max_depth);
    let absent_child = grow(matrix, &absent, features, candidates, depth + 1, max_depth);
    TreeNode::Split {
        feature,
        present_child: Box::new(present_child),
        absent_child: Box::new(absent_child),
    }
}

/// Train a single decision tree on the full matrix using every feature in
/// `features` as a split candidate at every node.
pub fn train_tree(
    matrix: &FeatureMatrix,
    features: &[FunctionId],
    max_depth: Option<usize>,
) -> Result<DecisionTreeModel, ClassifierError> {
    if matrix.samples.is_empty() {
        return Err(ClassifierError::EmptyTrainingSet);
    }
    let rows: Vec<usize> = (0..matrix.samples.len()).collect();
    let root = grow(
        matrix,
        &rows,
        features,
        &mut SplitCandidates::All,
        0,
        max_depth,
    );
    Ok(DecisionTreeModel {
        root,
        vocab_len: matrix.vocabulary.len(),
        vocabulary_hash: super::io::vocabulary_hash(&matrix.vocabulary),
    })
}
