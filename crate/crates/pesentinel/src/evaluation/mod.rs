//! Train/test splitting, confusion-matrix metrics, and the four-way
//! classifier comparison. Malware is the positive class throughout.

mod synthetic;

pub use synthetic::{generate_synthetic_corpus, SyntheticCorpus, SyntheticSample, SyntheticSpec};

use std::fmt::Write as _;

use thiserror::Error;

use crate::classifiers::{
    train_forest, train_nb, train_tree, ClassifierError, ForestConfig, TrainedModel,
};
use crate::datamine::{FeatureMatrix, FunctionId, Label};
use crate::feature_selection::{select_top, SelectionError};
use crate::rng::SplitMix64;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("test fraction must be in (0, 1), got {0}")]
    BadFraction(f64),
    #[error("class {0} has fewer than 2 samples; cannot split")]
    ClassTooSmall(Label),
    #[error("empty test set")]
    EmptyTestSet,
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Selection(#[from] SelectionError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn correct(&self) -> u64 {
        self.tp + self.tn
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub counts: ConfusionCounts,
}

impl MetricsReport {
    pub fn tp_rate(&self) -> f64 {
        ratio(self.counts.tp, self.counts.tp + self.counts.fn_)
    }

    pub fn fp_rate(&self) -> f64 {
        ratio(self.counts.fp, self.counts.fp + self.counts.tn)
    }

    /// Detection rate: the TP rate in percent.
    pub fn dr(&self) -> f64 {
        100.0 * self.tp_rate()
    }

    /// Overall accuracy in percent.
    pub fn acy(&self) -> f64 {
        100.0 * ratio(self.counts.correct(), self.counts.total())
    }

    /// The total/correct/incorrect layout with a 4-decimal percent column.
    pub fn render_instance_table(&self) -> String {
        let total = self.counts.total();
        let correct = self.counts.correct();
        let incorrect = total - correct;
        let pct = |n: u64| 100.0 * ratio(n, total);
        let mut out = String::new();
        let _ = writeln!(out, "Total Instances                  {total:>8}");
        let _ = writeln!(
            out,
            "Correctly Classified Instances   {correct:>8}   {:.4} %",
            pct(correct)
        );
        let _ = writeln!(
            out,
            "Incorrectly Classified Instances {incorrect:>8}   {:.4} %",
            pct(incorrect)
        );
        out
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Stratified split: each class is shuffled under its own seeded stream and
/// `round(test_fraction * n_class)` samples (at least 1, at most n−1) go to
/// the test side. Train and test are disjoint and cover the input.
pub fn split(
    matrix: &FeatureMatrix,
    test_fraction: f64,
    seed: u64,
) -> Result<(FeatureMatrix, FeatureMatrix), EvalError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(EvalError::BadFraction(test_fraction));
    }
    let mut train_idx = Vec::new();
    let mut test_idx = Vec::new();
    for (stream, label) in [(0u64, Label::Malware), (1, Label::Benign)] {
        let mut class: Vec<usize> = matrix
            .samples
            .iter()
            .enumerate()
            .filter(|(_, s)| s.label == label)
            .map(|(i, _)| i)
            .collect();
        if class.len() < 2 {
            return Err(EvalError::ClassTooSmall(label));
        }
        let mut rng = SplitMix64::stream(seed, stream);
        rng.shuffle(&mut class);
        let n_test = ((test_fraction * class.len() as f64).round() as usize)
            .clamp(1, class.len() - 1);
        test_idx.extend_from_slice(&class[..n_test]);
        train_idx.extend_from_slice(&class[n_test..]);
    }
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    Ok((matrix.subset(&train_idx), matrix.subset(&test_idx)))
}

/// Score every test sample and tally the confusion counts.
pub fn evaluate(model: &TrainedModel, test: &FeatureMatrix) -> Result<MetricsReport, EvalError> {
    if test.samples.is_empty() {
        return Err(EvalError::EmptyTestSet);
    }
    let mut counts = ConfusionCounts::default();
    for sample in &test.samples {
        let predicted = model.predict(&sample.features)?.label;
        match (sample.label.is_malware(), predicted.is_malware()) {
            (true, true) => counts.tp += 1,
            (true, false) => counts.fn_ += 1,
            (false, true) => counts.fp += 1,
            (false, false) => counts.tn += 1,
        }
    }
    Ok(MetricsReport { counts })
}

#[derive(Debug, Clone)]
pub struct ComparisonConfig {
    pub test_fraction: f64,
    /// Top fraction of functions the proposed pipeline retains.
    pub selection_fraction: f64,
    pub forest: ForestConfig,
    pub max_depth: Option<u32>,
}

impl Default for ComparisonConfig {
    fn default() -> Self {
        Self {
            test_fraction: 0.1,
            selection_fraction: 0.8,
            forest: ForestConfig::default(),
            max_depth: None,
        }
    }
}

/// One shared stratified split, four rows: decision tree, naive Bayes, and
/// random forest on all features, then the proposed pipeline (top-fraction
/// information-gain selection feeding the forest).
pub fn comparison_table(
    matrix: &FeatureMatrix,
    config: &ComparisonConfig,
    seed: u64,
) -> Result<Vec<(String, MetricsReport)>, EvalError> {
    let (train, test) = split(matrix, config.test_fraction, seed)?;
    let all_features: Vec<FunctionId> = (0..train.vocabulary.len() as FunctionId).collect();

    let tree = TrainedModel::DecisionTree(train_tree(
        &train,
        &all_features,
        config.max_depth.map(|d| d as usize),
    )?);
    let nb = TrainedModel::NaiveBayes(train_nb(&train, &all_features)?);
    let forest = TrainedModel::Forest(train_forest(&train, &all_features, &config.forest)?);
    let selection = select_top(&train, config.selection_fraction)?;
    let proposed = TrainedModel::Forest(train_forest(&train, &selection.retained, &config.forest)?);

    Ok(vec![
        ("Decision Tree".to_string(), evaluate(&tree, &test)?),
        ("Naive Bayes".to_string(), evaluate(&nb, &test)?),
        ("Random Forest".to_string(), evaluate(&forest, &test)?),
        ("Our Proposed Method".to_string(), evaluate(&proposed, &test)?),
    ])
}

/// Trim trailing zeros from a fixed-point rendering: `0.9700` → `0.97`,
/// `97.0000` → `97`.
pub fn fmt_trim(x: f64) -> String {
    let mut s = format!("{x:.4}");
    while s.ends_with('0') {
        s.pop();
    }
    if s.ends_with('.') {
        s.pop();
    }
    s
}

/// Aligned-text rendering of the comparison rows: TP and FP as rates, DR and
/// ACY as percents.
pub fn render_comparison_text(rows: &[(String, MetricsReport)]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<22} {:>6} {:>6} {:>8} {:>8}", "Algorithm", "TP", "FP", "DR", "ACY");
    for (name, r) in rows {
        let _ = writeln!(
            out,
            "{:<22} {:>6} {:>6} {:>8} {:>8}",
            name,
            fmt_trim(r.tp_rate()),
            fmt_trim(r.fp_rate()),
            format!("{} %", fmt_trim(r.dr())),
            format!("{} %", fmt_trim(r.acy())),
        );
    }
    out
}

pub fn render_comparison_csv(rows: &[(String, MetricsReport)]) -> String {
    let mut out = String::from("Algorithm,TP,FP,DR,ACY\n");
    for (name, r) in rows {
        let _ = writeln!(
            out,
            "{},{:.4},{:.4},{:.4},{:.4}",
            name,
            r.tp_rate(),
            r.fp_rate(),
            r.dr(),
            r.acy()
        );
    }
    out
}
