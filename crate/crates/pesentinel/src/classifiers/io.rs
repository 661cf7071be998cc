//! Model persistence: a versioned JSON document with a checksummed payload.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ClassifierError, DecisionTreeModel, ForestModel, NaiveBayesModel};
use crate::datamine::Vocabulary;

const MODEL_FORMAT: &str = "pesentinel-model";
const MODEL_VERSION: u32 = 1;

/// Digest binding a model to the vocabulary it was trained against.
pub fn vocabulary_hash(vocabulary: &Vocabulary) -> String {
    let mut hasher = Sha256::new();
    for name in vocabulary.names() {
        hasher.update(name.as_bytes());
        hasher.update([0]);
    }
    hex::encode(hasher.finalize())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrainedModel {
    Forest(ForestModel),
    DecisionTree(DecisionTreeModel),
    NaiveBayes(NaiveBayesModel),
}

impl TrainedModel {
    pub fn vocab_len(&self) -> usize {
        match self {
            TrainedModel::Forest(m) => m.vocab_len,
            TrainedModel::DecisionTree(m) => m.vocab_len,
            TrainedModel::NaiveBayes(m) => m.vocab_len,
        }
    }

    pub fn vocabulary_hash(&self) -> &str {
        match self {
            TrainedModel::Forest(m) => &m.vocabulary_hash,
            TrainedModel::DecisionTree(m) => &m.vocabulary_hash,
            TrainedModel::NaiveBayes(m) => &m.vocabulary_hash,
        }
    }

    pub fn predict(
        &self,
        features: &crate::datamine::Bitset,
    ) -> Result<super::Prediction, ClassifierError> {
        match self {
            TrainedModel::Forest(m) => m.predict(features),
            TrainedModel::DecisionTree(m) => m.predict(features),
            TrainedModel::NaiveBayes(m) => m.predict(features),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    format: String,
    version: u32,
    /// SHA-256 of the canonical (sorted-key) JSON rendering of `payload`.
    checksum: String,
    provenance: String,
    payload: serde_json::Value,
}

/// A model together with everything needed to score fresh binaries: the
/// vocabulary that maps import names to feature ids, the training
/// provenance, and a version string (the payload checksum).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub model: TrainedModel,
    pub vocabulary: Vocabulary,
    pub provenance: String,
    pub model_version: String,
}

fn canonical_checksum(payload: &serde_json::Value) -> String {
    // serde_json::Value maps are sorted, so re-serializing the parsed value
    // gives a canonical byte string on both the save and load paths.
    hex::encode(Sha256::digest(payload.to_string().as_bytes()))
}

#[derive(Serialize, Deserialize)]
struct Payload {
    model: TrainedModel,
    vocabulary: Vec<String>,
}

pub fn save_model(
    model: &TrainedModel,
    vocabulary: &Vocabulary,
    provenance: &str,
    path: &Path,
) -> Result<(), ClassifierError> {
    if vocabulary_hash(vocabulary) != model.vocabulary_hash() {
        return Err(ClassifierError::VocabularyMismatch(
            "vocabulary does not match the model's training vocabulary".into(),
        ));
    }
    let payload = serde_json::to_value(Payload {
        model: model.clone(),
        vocabulary: vocabulary.names().to_vec(),
    })
    .map_err(|e| ClassifierError::CorruptModelFile(e.to_string()))?;
    let doc = ModelDoc {
        format: MODEL_FORMAT.to_string(),
        version: MODEL_VERSION,
        checksum: canonical_checksum(&payload),
        provenance: provenance.to_string(),
        payload,
    };
    let text = serde_json::to_string_pretty(&doc)
        .map_err(|e| ClassifierError::CorruptModelFile(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<ModelFile, ClassifierError> {
    let text = fs::read_to_string(path)?;
    let doc: ModelDoc = serde_json::from_str(&text)
        .map_err(|e| ClassifierError::CorruptModelFile(e.to_string()))?;
    if doc.format != MODEL_FORMAT || doc.version != MODEL_VERSION {
        return Err(ClassifierError::FormatVersionMismatch(format!(
            "{} v{}",
            doc.format, doc.version
        )));
    }
    if canonical_checksum(&doc.payload) != doc.checksum {
        return Err(ClassifierError::CorruptModelFile(
            "payload checksum mismatch".into(),
        ));
    }
    let payload: Payload = serde_json::from_value(doc.payload)
        .map_err(|e| ClassifierError::CorruptModelFile(e.to_string()))?;
    if let TrainedModel::Forest(f) = &payload.model {
        if f.trees.is_empty() || f.config.n_trees == 0 {
            return Err(ClassifierError::BadConfig("forest with zero trees".into()));
        }
    }
    let vocabulary = Vocabulary::from_names(payload.vocabulary)
        .ok_or_else(|| ClassifierError::CorruptModelFile("duplicate vocabulary entry".into()))?;
    if vocabulary_hash(&vocabulary) != payload.model.vocabulary_hash() {
        return Err(ClassifierError::VocabularyMismatch(
            "embedded vocabulary does not match the model's vocabulary hash".into(),
        ));
    }
    Ok(ModelFile {
        model: payload.model,
        vocabulary,
        provenance: doc.provenance,
        model_version: doc.checksum,
    })
}

#[cfg(test)]
mod tests {
    use super::super::tree::tests::matrix_from_rows;
    use super::super::{train_forest, ForestConfig};
    use super::*;
    use crate::datamine::{Bitset, Label};
    use crate::rng::SplitMix64;

    fn trained() -> (TrainedModel, Vocabulary) {
        let m = matrix_from_rows(
            4,
            &[
                (&[0, 1], Label::Malware),
                (&[0], Label::Malware),
                (&[2], Label::Benign),
                (&[3], Label::Benign),
                (&[2, 3], Label::Benign),
                (&[0, 3], Label::Malware),
            ],
        );
        let model = TrainedModel::Forest(
            train_forest(&m, &[0, 1, 2, 3], &ForestConfig { n_trees: 9, ..Default::default() })
                .unwrap(),
        );
        (model, m.vocabulary)
    }

    #[test]
    fn roundtrip_preserves_predictions() {
        let (model, vocab) = trained();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        save_model(&model, &vocab, "test run", &path).unwrap();
        let loaded_file = load_model(&path).unwrap();
        assert_eq!(loaded_file.provenance, "test run");
        assert_eq!(loaded_file.vocabulary, vocab);
        let loaded = loaded_file.model;
        let mut rng = SplitMix64::new(5);
        for _ in 0..100 {
            let mut bits = Bitset::new(4);
            for f in 0..4 {
                if rng.next_bool(0.5) {
                    bits.set(f);
                }
            }
            assert_eq!(model.predict(&bits).unwrap(), loaded.predict(&bits).unwrap());
        }
        assert_eq!(model, loaded);
    }

    #[test]
    fn tampered_payload_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let (model, vocab) = trained();
        save_model(&model, &vocab, "t", &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        // Flip a digit inside the checksummed payload region.
        let idx = text.find("\"vocab_len\": 4").unwrap();
        let tampered = text.replacen("\"vocab_len\": 4", "\"vocab_len\": 5", 1);
        assert_ne!(text, tampered, "fixture must change at {idx}");
        fs::write(&path, tampered).unwrap();
        assert!(matches!(
            load_model(&path),
            Err(ClassifierError::CorruptModelFile(_))
        ));
    }

    #[test]
    fn wrong_format_and_zero_trees_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let (model, vocab) = trained();
        save_model(&model, &vocab, "t", &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        fs::write(&path, text.replace("pesentinel-model", "other-format")).unwrap();
        assert!(matches!(
            load_model(&path),
            Err(ClassifierError::FormatVersionMismatch(_))
        ));

        // Zero-tree forest: rebuild the document around an emptied payload.
        let mut forest = match model {
            TrainedModel::Forest(f) => f,
            _ => unreachable!(),
        };
        forest.trees.clear();
        save_model(&TrainedModel::Forest(forest), &vocab, "t", &path).unwrap();
        assert!(matches!(load_model(&path), Err(ClassifierError::BadConfig(_))));
    }
}
