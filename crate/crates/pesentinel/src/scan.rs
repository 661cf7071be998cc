//! Shared scan path: bytes in, verdict out. The CLI `scan` subcommand and
//! the gateway service both go through [`Scanner`], so their verdicts are
//! identical by construction.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::classifiers::{load_model, ClassifierError, ModelFile};
use crate::datamine::Bitset;
use crate::pe::{parse_imports_with_limits, ParserLimits, RawBinary};

/// The outcome returned toward the network edge: one of `risk_score` or
/// `error` is present, and `label` is `error` exactly when `error` is.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanVerdict {
    pub content_hash: String,
    pub label: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub risk_score: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub model_version: String,
    pub duration_ms: u64,
    /// Imports present in the file but unseen at training time; they are
    /// ignored during vectorization.
    pub unknown_imports: u64,
}

pub struct Scanner {
    model_file: ModelFile,
    limits: ParserLimits,
}

impl Scanner {
    pub fn new(model_file: ModelFile, limits: ParserLimits) -> Self {
        Self { model_file, limits }
    }

    pub fn from_file(path: &Path) -> Result<Self, ClassifierError> {
        Ok(Self::new(load_model(path)?, ParserLimits::from_env()))
    }

    pub fn model_version(&self) -> &str {
        &self.model_file.model_version
    }

    pub fn model_file(&self) -> &ModelFile {
        &self.model_file
    }

    /// Parse, vectorize against the model vocabulary, and predict. Parse
    /// failures become `label = "error"` verdicts, not panics; the verdict
    /// for given bytes is deterministic.
    pub fn scan_bytes(&self, bytes: &[u8], source_name: &str) -> ScanVerdict {
        let start = Instant::now();
        let bin = RawBinary::new(bytes, source_name);
        match parse_imports_with_limits(&bin, &self.limits) {
            Err(e) => ScanVerdict {
                content_hash: crate::hash::content_hash(bytes),
                label: "error".to_string(),
                risk_score: None,
                error: Some(error_code(&e)),
                model_version: self.model_file.model_version.clone(),
                duration_ms: start.elapsed().as_millis() as u64,
                unknown_imports: 0,
            },
            Ok(profile) => {
                let mut features = Bitset::new(self.model_file.vocabulary.len());
                let mut unknown = 0u64;
                for name in profile.feature_names() {
                    match self.model_file.vocabulary.id_of(&name) {
                        Some(id) => features.set(id as usize),
                        None => unknown += 1,
                    }
                }
                // Vectorization always matches the embedded vocabulary.
                let prediction = self
                    .model_file
                    .model
                    .predict(&features)
                    .expect("vectorized against model vocabulary");
                ScanVerdict {
                    content_hash: profile.content_hash,
                    label: prediction.label.to_string(),
                    risk_score: Some(prediction.risk_score),
                    error: None,
                    model_version: self.model_file.model_version.clone(),
                    duration_ms: start.elapsed().as_millis() as u64,
                    unknown_imports: unknown,
                }
            }
        }
    }
}

fn error_code(e: &crate::pe::ParseError) -> String {
    use crate::pe::ParseError::*;
    match e {
        NotExecutable => "NotExecutable".to_string(),
        NoPEHeader => "NoPEHeader".to_string(),
        MalformedHeader(_) => "MalformedHeader".to_string(),
        TooLarge { .. } => "TooLarge".to_string(),
    }
}

/// Order verdicts for the risk ranking: descending risk, errors last, ties
/// broken by content hash for stable output.
pub fn sort_by_risk(verdicts: &mut [ScanVerdict]) {
    verdicts.sort_by(|a, b| {
        let ra = a.risk_score.unwrap_or(-1.0);
        let rb = b.risk_score.unwrap_or(-1.0);
        rb.partial_cmp(&ra)
            .unwrap()
            .then_with(|| a.content_hash.cmp(&b.content_hash))
    });
}
