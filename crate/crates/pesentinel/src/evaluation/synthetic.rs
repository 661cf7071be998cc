//! Seeded synthetic corpus generation.
//!
//! Each sample's import set is drawn per function: planted functions use a
//! label-dependent Bernoulli probability, all others the background
//! probability. Samples can be materialized as real PE bytes so the full
//! parser-to-matrix path is exercised; a short unique overlay is appended
//! after the image so equal import sets still hash distinctly.

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::datamine::{DatamineError, FeatureMatrix, FunctionId, Label};
use crate::pe::{build_minimal_pe, parse_imports_with_limits, ParserLimits, PeFlavor, RawBinary};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n_malware: usize,
    pub n_benign: usize,
    pub vocab_size: usize,
    /// `(function id, p(present | malware), p(present | benign))`.
    pub planted: Vec<(FunctionId, f64, f64)>,
    pub background_p: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    /// 500+500 samples over 200 functions, 20 planted at 0.9 in malware vs
    /// 0.1 in benign, background 0.3, seed 42.
    fn default() -> Self {
        Self {
            n_malware: 500,
            n_benign: 500,
            vocab_size: 200,
            planted: (0..20).map(|f| (f as FunctionId, 0.9, 0.1)).collect(),
            background_p: 0.3,
            seed: 42,
        }
    }
}

#[derive(Debug, Error)]
pub enum SyntheticError {
    #[error("bad synthetic spec: {0}")]
    BadSpec(String),
    #[error(transparent)]
    Datamine(#[from] DatamineError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl SyntheticSpec {
    fn validate(&self) -> Result<(), SyntheticError> {
        if self.n_malware == 0 || self.n_benign == 0 {
            return Err(SyntheticError::BadSpec("both classes need samples".into()));
        }
        if self.vocab_size == 0 {
            return Err(SyntheticError::BadSpec("vocab_size must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.background_p) {
            return Err(SyntheticError::BadSpec("background_p outside [0, 1]".into()));
        }
        for &(f, pm, pb) in &self.planted {
            if f as usize >= self.vocab_size {
                return Err(SyntheticError::BadSpec(format!(
                    "planted id {f} >= vocab_size {}",
                    self.vocab_size
                )));
            }
            if !(0.0..=1.0).contains(&pm) || !(0.0..=1.0).contains(&pb) {
                return Err(SyntheticError::BadSpec("planted probability outside [0, 1]".into()));
            }
        }
        Ok(())
    }

    pub fn function_name(id: FunctionId) -> String {
        format!("fn_{id:04}")
    }

    pub fn planted_names(&self) -> Vec<String> {
        self.planted.iter().map(|&(f, _, _)| Self::function_name(f)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSample {
    pub name: String,
    pub label: Label,
    /// Ground-truth import names, sorted.
    pub imports: Vec<String>,
    /// The materialized PE image (with the per-sample overlay).
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub spec: SyntheticSpec,
    pub samples: Vec<SyntheticSample>,
}

pub fn generate_synthetic_corpus(spec: &SyntheticSpec) -> Result<SyntheticCorpus, SyntheticError> {
    spec.validate()?;
    let mut planted_p = vec![None; spec.vocab_size];
    for &(f, pm, pb) in &spec.planted {
        planted_p[f as usize] = Some((pm, pb));
    }

    let mut samples = Vec::with_capacity(spec.n_malware + spec.n_benign);
    for index in 0..spec.n_malware + spec.n_benign {
        let (label, name) = if index < spec.n_malware {
            (Label::Malware, format!("mal_{index:04}.exe"))
        } else {
            (Label::Benign, format!("ben_{:04}.exe", index - spec.n_malware))
        };
        let mut rng = SplitMix64::stream(spec.seed, index as u64);
        let mut imports = Vec::new();
        for f in 0..spec.vocab_size {
            let p = match planted_p[f] {
                Some((pm, pb)) => {
                    if label.is_malware() {
                        pm
                    } else {
                        pb
                    }
                }
                None => spec.background_p,
            };
            if rng.next_bool(p) {
                imports.push(SyntheticSpec::function_name(f as FunctionId));
            }
        }
        let pairs: Vec<(String, String)> = imports
            .iter()
            .map(|n| ("synth.dll".to_string(), n.clone()))
            .collect();
        let mut bytes = build_minimal_pe(&pairs, PeFlavor::Pe32)
            .map_err(|e| SyntheticError::BadSpec(e.to_string()))?;
        bytes.extend_from_slice(name.as_bytes());
        samples.push(SyntheticSample {
            name,
            label,
            imports,
            bytes,
        });
    }
    Ok(SyntheticCorpus {
        spec: spec.clone(),
        samples,
    })
}

impl SyntheticCorpus {
    /// Run every sample through the real parser and assemble the matrix.
    pub fn to_matrix(&self) -> Result<FeatureMatrix, SyntheticError> {
        let limits = ParserLimits::default();
        let profiles = self
            .samples
            .iter()
            .map(|s| {
                let bin = RawBinary::new(&s.bytes, s.name.clone());
                let profile = parse_imports_with_limits(&bin, &limits)
                    .expect("generated PE must parse");
                (profile, s.label)
            })
            .collect();
        Ok(FeatureMatrix::from_profiles(
            profiles,
            format!(
                "synthetic corpus: {} malware + {} benign, vocab {}, seed {}",
                self.spec.n_malware, self.spec.n_benign, self.spec.vocab_size, self.spec.seed
            ),
        )?)
    }

    /// Write the samples to `<dir>/malware` and `<dir>/benign`, returning
    /// the two directories.
    pub fn write_pe_files(&self, dir: &Path) -> Result<(PathBuf, PathBuf), SyntheticError> {
        let malware_dir = dir.join("malware");
        let benign_dir = dir.join("benign");
        fs::create_dir_all(&malware_dir)?;
        fs::create_dir_all(&benign_dir)?;
        for s in &self.samples {
            let target = if s.label.is_malware() {
                malware_dir.join(&s.name)
            } else {
                benign_dir.join(&s.name)
            };
            fs::write(target, &s.bytes)?;
        }
        Ok((malware_dir, benign_dir))
    }
}
