//! Information-gain feature selection.
//!
//! Per-function information gain against the malware label, measured in bits
//! (log base 2), followed by mean-centering of the scores and retention of
//! the top fraction of functions. Centering subtracts the average gain from
//! every score; it is rank-preserving, which [`corrected_scores`] asserts
//! rather than assumes.

use std::io::Write;

use rayon::prelude::*;
use thiserror::Error;

use crate::datamine::{Bitset, FeatureMatrix, FunctionId, Label};

#[derive(Debug, Error, PartialEq)]
pub enum SelectionError {
    #[error("entropy of all-zero counts is undefined")]
    AllZeroCounts,
    #[error("feature column has {column} bits but there are {labels} labels")]
    LengthMismatch { column: usize, labels: usize },
    #[error("empty score list")]
    EmptyScores,
    #[error("corpus contains a single class; information gain needs both labels")]
    SingleClassCorpus,
    #[error("fraction must be in (0, 1], got {0}")]
    BadFraction(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct IgScore {
    pub function_id: FunctionId,
    pub function_name: String,
    /// Information gain in bits, never negative.
    pub ig: f64,
    /// Mean-centered gain; may be negative.
    pub ig_corrected: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionReport {
    /// Sorted by `ig` descending, ties by ascending id.
    pub scores: Vec<IgScore>,
    /// Prefix of the sorted order, `ceil(fraction * n)` entries.
    pub retained: Vec<FunctionId>,
    pub fraction: f64,
    pub label_entropy: f64,
}

/// Shannon entropy in bits of a count distribution. Zero-probability terms
/// contribute 0 by the usual limit convention.
pub fn entropy(class_counts: &[u64]) -> Result<f64, SelectionError> {
    let total: u64 = class_counts.iter().sum();
    if total == 0 {
        return Err(SelectionError::AllZeroCounts);
    }
    let total = total as f64;
    Ok(class_counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total;
            -p * p.log2()
        })
        .sum())
}

/// Label entropy remaining after partitioning samples on the feature bit:
/// the partition-probability-weighted entropy of the label within each
/// partition. Empty partitions contribute 0.
pub fn conditional_entropy(
    feature_column: &Bitset,
    labels: &[Label],
) -> Result<f64, SelectionError> {
    if feature_column.len() != labels.len() {
        return Err(SelectionError::LengthMismatch {
            column: feature_column.len(),
            labels: labels.len(),
        });
    }
    if labels.is_empty() {
        return Err(SelectionError::AllZeroCounts);
    }
    // counts[feature_bit][is_malware]
    let mut counts = [[0u64; 2]; 2];
    for (i, label) in labels.iter().enumerate() {
        counts[feature_column.get(i) as usize][label.is_malware() as usize] += 1;
    }
    let total = labels.len() as f64;
    let mut h = 0.0;
    for part in counts {
        let n = part[0] + part[1];
        if n > 0 {
            h += (n as f64 / total) * entropy(&part)?;
        }
    }
    Ok(h)
}

/// `IG = H(label) − H(label | feature)`, clamped to 0 when rounding drives
/// it infinitesimally negative.
pub fn info_gain(feature_column: &Bitset, labels: &[Label]) -> Result<f64, SelectionError> {
    let malware = labels.iter().filter(|l| l.is_malware()).count() as u64;
    let benign = labels.len() as u64 - malware;
    let ig = entropy(&[malware, benign])? - conditional_entropy(feature_column, labels)?;
    if ig < 0.0 {
        debug_assert!(ig > -1e-12, "information gain {ig} below rounding tolerance");
        return Ok(0.0);
    }
    Ok(ig)
}

fn argsort(scores: &[IgScore], key: impl Fn(&IgScore) -> f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        key(&scores[b])
            .partial_cmp(&key(&scores[a]))
            .unwrap()
            .then(scores[a].function_id.cmp(&scores[b].function_id))
    });
    order
}

/// Fill `ig_corrected = ig − mean(ig)`, asserting that the centered order
/// equals the raw order.
pub fn corrected_scores(mut scores: Vec<IgScore>) -> Result<Vec<IgScore>, SelectionError> {
    if scores.is_empty() {
        return Err(SelectionError::EmptyScores);
    }
    let mean = scores.iter().map(|s| s.ig).sum::<f64>() / scores.len() as f64;
    for s in &mut scores {
        s.ig_corrected = s.ig - mean;
    }
    assert_eq!(
        argsort(&scores, |s| s.ig),
        argsort(&scores, |s| s.ig_corrected),
        "mean-centering must preserve ranking"
    );
    Ok(scores)
}

/// Score every function, apply the correction, and retain the top
/// `ceil(fraction * n)` by gain (ties broken by ascending id).
pub fn select_top(matrix: &FeatureMatrix, fraction: f64) -> Result<SelectionReport, SelectionError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(SelectionError::BadFraction(fraction));
    }
    let (malware, benign) = matrix.class_counts();
    if malware == 0 || benign == 0 {
        return Err(SelectionError::SingleClassCorpus);
    }
    let labels = matrix.labels();
    let label_entropy = entropy(&[malware as u64, benign as u64])?;

    let mut scores: Vec<IgScore> = (0..matrix.vocabulary.len() as FunctionId)
        .into_par_iter()
        .map(|id| {
            let ig = info_gain(&matrix.feature_column(id), &labels)?;
            Ok(IgScore {
                function_id: id,
                function_name: matrix.vocabulary.name_of(id).to_string(),
                ig,
                ig_corrected: 0.0,
            })
        })
        .collect::<Result<_, SelectionError>>()?;
    scores = corrected_scores(scores)?;

    let order = argsort(&scores, |s| s.ig);
    let sorted: Vec<IgScore> = order.into_iter().map(|i| scores[i].clone()).collect();
    let keep = ((fraction * sorted.len() as f64).ceil() as usize).min(sorted.len());
    let retained = sorted[..keep].iter().map(|s| s.function_id).collect();

    Ok(SelectionReport {
        scores: sorted,
        retained,
        fraction,
        label_entropy,
    })
}

/// CSV rendering of the score table:
/// `FunctionID,FunctionName,InfoGain,InfoGainCorrected`, descending gain.
pub fn export_report_csv<W: Write>(report: &SelectionReport, out: &mut W) -> std::io::Result<()> {
    writeln!(out, "FunctionID,FunctionName,InfoGain,InfoGainCorrected")?;
    for s in &report.scores {
        let name = if s.function_name.contains(',') || s.function_name.contains('"') {
            format!("\"{}\"", s.function_name.replace('"', "\"\""))
        } else {
            s.function_name.clone()
        };
        writeln!(out, "{},{},{:.12},{:.12}", s.function_id, name, s.ig, s.ig_corrected)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamine::Label::{Benign as B, Malware as M};

    fn bits(pattern: &[u8]) -> Bitset {
        let mut b = Bitset::new(pattern.len());
        for (i, &v) in pattern.iter().enumerate() {
            if v != 0 {
                b.set(i);
            }
        }
        b
    }

    #[test]
    fn entropy_cases() {
        assert_eq!(entropy(&[10, 0]).unwrap(), 0.0);
        assert_eq!(entropy(&[5, 5]).unwrap(), 1.0);
        let h = entropy(&[1, 3]).unwrap();
        assert!((h - 0.8112781244591328).abs() < 1e-12);
        assert_eq!(entropy(&[0, 0]), Err(SelectionError::AllZeroCounts));
    }

    #[test]
    fn conditional_entropy_cases() {
        let labels = [M, M, B, B];
        assert_eq!(conditional_entropy(&bits(&[1, 1, 0, 0]), &labels).unwrap(), 0.0);
        assert!(
            (conditional_entropy(&bits(&[1, 0, 1, 0]), &labels).unwrap() - 1.0).abs() < 1e-12
        );
        let h = conditional_entropy(&bits(&[1, 1, 1, 0]), &labels).unwrap();
        assert!((h - 0.6887218755408672).abs() < 1e-12);
        assert!(matches!(
            conditional_entropy(&bits(&[1, 0]), &labels),
            Err(SelectionError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn info_gain_cases() {
        let labels = [M, M, B, B];
        assert!((info_gain(&bits(&[1, 1, 0, 0]), &labels).unwrap() - 1.0).abs() < 1e-12);
        assert!(info_gain(&bits(&[1, 0, 1, 0]), &labels).unwrap().abs() < 1e-12);
        let ig = info_gain(&bits(&[1, 1, 1, 0]), &labels).unwrap();
        assert!((ig - 0.3112781244591328).abs() < 1e-12);
    }

    fn raw(igs: &[f64]) -> Vec<IgScore> {
        igs.iter()
            .enumerate()
            .map(|(i, &ig)| IgScore {
                function_id: i as FunctionId,
                function_name: format!("f{i}"),
                ig,
                ig_corrected: 0.0,
            })
            .collect()
    }

    #[test]
    fn correction_subtracts_mean() {
        let s = corrected_scores(raw(&[0.4, 0.2, 0.0])).unwrap();
        let corrected: Vec<f64> = s.iter().map(|x| x.ig_corrected).collect();
        for (got, want) in corrected.iter().zip([0.2, 0.0, -0.2]) {
            assert!((got - want).abs() < 1e-12);
        }
        let single = corrected_scores(raw(&[0.7])).unwrap();
        assert_eq!(single[0].ig_corrected, 0.0);
        assert_eq!(corrected_scores(vec![]), Err(SelectionError::EmptyScores));
    }

    #[test]
    fn correction_preserves_rank_on_random_scores() {
        let mut rng = crate::rng::SplitMix64::new(17);
        for _ in 0..100 {
            let igs: Vec<f64> = (0..50).map(|_| rng.next_f64()).collect();
            let scores = corrected_scores(raw(&igs)).unwrap();
            assert_eq!(
                argsort(&scores, |s| s.ig),
                argsort(&scores, |s| s.ig_corrected)
            );
        }
    }
}
