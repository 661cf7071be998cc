//! Bernoulli naive Bayes with Laplace add-1 smoothing.

use serde::{Deserialize, Serialize};

use super::{ClassifierError, Prediction};
use crate::datamine::{Bitset, FeatureMatrix, FunctionId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayesModel {
    /// `[malware, benign]` log priors.
    pub log_priors: [f64; 2],
    pub features: Vec<FunctionId>,
    /// Indexed `[class][feature position]`; `exp(present) + exp(absent) = 1`
    /// per cell pair.
    pub log_likelihood_present: [Vec<f64>; 2],
    pub log_likelihood_absent: [Vec<f64>; 2],
    pub vocab_len: usize,
    pub vocabulary_hash: String,
}

const MALWARE: usize = 0;
const BENIGN: usize = 1;

pub fn train_nb(
    matrix: &FeatureMatrix,
    features: &[FunctionId],
) -> Result<NaiveBayesModel, ClassifierError> {
    let (n_malware, n_benign) = matrix.class_counts();
    if matrix.samples.is_empty() {
        return Err(ClassifierError::EmptyTrainingSet);
    }
    if n_malware == 0 || n_benign == 0 {
        return Err(ClassifierError::SingleClassCorpus);
    }
    let n = matrix.samples.len() as f64;
    let class_n = [n_malware as f64, n_benign as f64];
    let log_priors = [
        (n_malware as f64 / n).ln(),
        (n_benign as f64 / n).ln(),
    ];

    let mut log_likelihood_present = [vec![0.0; features.len()], vec![0.0; features.len()]];
    let mut log_likelihood_absent = [vec![0.0; features.len()], vec![0.0; features.len()]];
    for (pos, &f) in features.iter().enumerate() {
        let mut present = [0u64; 2];
        for s in &matrix.samples {
            if s.features.get(f as usize) {
                present[if s.label.is_malware() { MALWARE } else { BENIGN }] += 1;
            }
        }
        for class in [MALWARE, BENIGN] {
            let p = (present[class] as f64 + 1.0) / (class_n[class] + 2.0);
            log_likelihood_present[class][pos] = p.ln();
            log_likelihood_absent[class][pos] = (1.0 - p).ln();
        }
    }

    Ok(NaiveBayesModel {
        log_priors,
        features: features.to_vec(),
        log_likelihood_present,
        log_likelihood_absent,
        vocab_len: matrix.vocabulary.len(),
        vocabulary_hash: super::io::vocabulary_hash(&matrix.vocabulary),
    })
}

impl NaiveBayesModel {
    /// Risk score is the malware posterior, normalized in log space.
    pub fn predict(&self, features: &Bitset) -> Result<Prediction, ClassifierError> {
        if features.len() != self.vocab_len {
            return Err(ClassifierError::VocabularyMismatch(format!(
                "expected {} features, got {}",
                self.vocab_len,
                features.len()
            )));
        }
        let mut log_posterior = self.log_priors;
        for (pos, &f) in self.features.iter().enumerate() {
            for class in [MALWARE, BENIGN] {
                log_posterior[class] += if features.get(f as usize) {
                    self.log_likelihood_present[class][pos]
                } else {
                    self.log_likelihood_absent[class][pos]
                };
            }
        }
        let max = log_posterior[MALWARE].max(log_posterior[BENIGN]);
        let em = (log_posterior[MALWARE] - max).exp();
        let eb = (log_posterior[BENIGN] - max).exp();
        Ok(Prediction::from_risk(em / (em + eb), None))
    }
}

#[cfg(test)]
mod tests {
    use super::super::tree::tests::matrix_from_rows;
    use super::*;
    use crate::datamine::Label::{Benign as B, Malware as M};

    #[test]
    fn likelihoods_normalize() {
        let m = matrix_from_rows(2, &[(&[0], M), (&[0, 1], M), (&[1], B), (&[], B)]);
        let nb = train_nb(&m, &[0, 1]).unwrap();
        for class in [MALWARE, BENIGN] {
            for pos in 0..2 {
                let sum = nb.log_likelihood_present[class][pos].exp()
                    + nb.log_likelihood_absent[class][pos].exp();
                assert!((sum - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn symmetric_corpus_gives_symmetric_risks() {
        // Feature present in all malware and no benign, balanced classes.
        let m = matrix_from_rows(1, &[(&[0], M), (&[0], M), (&[], B), (&[], B)]);
        let nb = train_nb(&m, &[0]).unwrap();
        let mut set = Bitset::new(1);
        set.set(0);
        let clear = Bitset::new(1);
        let r1 = nb.predict(&set).unwrap().risk_score;
        let r0 = nb.predict(&clear).unwrap().risk_score;
        assert!((r1 - 0.5 - (0.5 - r0)).abs() < 1e-9);
        assert!(r1 > 0.5 && r0 < 0.5);
    }

    #[test]
    fn empty_feature_list_predicts_prior() {
        // 3 malware, 1 benign: prior(M) = 0.75.
        let m = matrix_from_rows(1, &[(&[0], M), (&[], M), (&[0], M), (&[], B)]);
        let nb = train_nb(&m, &[]).unwrap();
        let p = nb.predict(&Bitset::new(1)).unwrap();
        assert!((p.risk_score - 0.75).abs() < 1e-9);
        assert_eq!(p.label, M);
    }

    #[test]
    fn hand_computed_posterior() {
        // 3 malware (feature present in 2), 3 benign (present in 1).
        // Laplace: p(present|M) = 3/5, p(present|B) = 2/5; priors 1/2.
        // posterior(M | present) = (1/2·3/5) / (1/2·3/5 + 1/2·2/5) = 3/5.
        let m = matrix_from_rows(
            1,
            &[(&[0], M), (&[0], M), (&[], M), (&[0], B), (&[], B), (&[], B)],
        );
        let nb = train_nb(&m, &[0]).unwrap();
        let mut set = Bitset::new(1);
        set.set(0);
        let p = nb.predict(&set).unwrap();
        assert!((p.risk_score - 0.6).abs() < 1e-9);
        // posterior(M | absent) = (2/5) / (2/5 + 3/5) = 2/5.
        let q = nb.predict(&Bitset::new(1)).unwrap();
        assert!((q.risk_score - 0.4).abs() < 1e-9);
    }

    #[test]
    fn posteriors_sum_to_one() {
        let m = matrix_from_rows(2, &[(&[0], M), (&[0, 1], M), (&[1], B), (&[], B)]);
        let nb = train_nb(&m, &[0, 1]).unwrap();
        for v in 0..4usize {
            let mut bits = Bitset::new(2);
            for f in 0..2 {
                if v & (1 << f) != 0 {
                    bits.set(f);
                }
            }
            let risk = nb.predict(&bits).unwrap().risk_score;
            assert!((0.0..=1.0).contains(&risk));
        }
    }
}
