//! Corpus ingestion and the binary feature matrix.
//!
//! Rows are binaries, columns are API function names drawn from a global
//! vocabulary, cells record presence (1) or absence (0) of the import. The
//! matrix persists as a versioned JSON document and exports as CSV.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pe::{parse_imports_with_limits, ImportProfile, ParserLimits, RawBinary};

pub type FunctionId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Malware,
    Benign,
}

impl Label {
    pub fn is_malware(self) -> bool {
        matches!(self, Label::Malware)
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Malware => write!(f, "malware"),
            Label::Benign => write!(f, "benign"),
        }
    }
}

impl std::str::FromStr for Label {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "malware" | "1" | "virus" => Ok(Label::Malware),
            "benign" | "0" | "clean" => Ok(Label::Benign),
            other => Err(format!("unknown label {other:?}")),
        }
    }
}

/// Fixed-length bit vector, one bit per vocabulary entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bitset {
    bytes: Vec<u8>,
    len: usize,
}

impl Bitset {
    pub fn new(len: usize) -> Self {
        Self {
            bytes: vec![0; len.div_ceil(8)],
            len,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn set(&mut self, bit: usize) {
        assert!(bit < self.len);
        self.bytes[bit / 8] |= 1 << (bit % 8);
    }

    pub fn get(&self, bit: usize) -> bool {
        bit < self.len && self.bytes[bit / 8] & (1 << (bit % 8)) != 0
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len).filter(|&i| self.get(i))
    }

    pub fn count_ones(&self) -> usize {
        self.bytes.iter().map(|b| b.count_ones() as usize).sum()
    }

    pub fn to_hex(&self) -> String {
        hex::encode(&self.bytes)
    }

    pub fn from_hex(s: &str, len: usize) -> Option<Self> {
        let bytes = hex::decode(s).ok()?;
        if bytes.len() != len.div_ceil(8) {
            return None;
        }
        // Bits past `len` in the last byte must be clear.
        if len % 8 != 0 {
            if let Some(&last) = bytes.last() {
                if last >> (len % 8) != 0 {
                    return None;
                }
            }
        }
        Some(Self { bytes, len })
    }
}

/// Global function identity space: dense ids in first-seen order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Vocabulary {
    names: Vec<String>,
    index: HashMap<String, FunctionId>,
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_names(names: Vec<String>) -> Option<Self> {
        let mut v = Self::new();
        for n in names {
            let id = v.names.len() as FunctionId;
            if v.index.insert(n.clone(), id).is_some() {
                return None; // duplicate
            }
            v.names.push(n);
        }
        Some(v)
    }

    pub fn intern(&mut self, name: &str) -> FunctionId {
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        let id = self.names.len() as FunctionId;
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), id);
        id
    }

    pub fn id_of(&self, name: &str) -> Option<FunctionId> {
        self.index.get(name).copied()
    }

    pub fn name_of(&self, id: FunctionId) -> &str {
        &self.names[id as usize]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    pub content_hash: String,
    pub source_name: String,
    pub label: Label,
    pub features: Bitset,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureMatrix {
    pub vocabulary: Vocabulary,
    pub samples: Vec<Sample>,
    pub provenance: String,
}

#[derive(Debug, Error)]
pub enum DatamineError {
    #[error("empty corpus: no file parsed successfully")]
    EmptyCorpus,
    #[error("label conflict: {hash} appears as both malware and benign ({a} vs {b})")]
    LabelConflict { hash: String, a: String, b: String },
    #[error("unsupported matrix file format or version: {0}")]
    FormatVersionMismatch(String),
    #[error("corrupt matrix file: {0}")]
    CorruptMatrixFile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

const MATRIX_FORMAT: &str = "pesentinel-matrix";
const MATRIX_VERSION: u32 = 1;

impl FeatureMatrix {
    /// Assemble a matrix from parsed profiles, in order. The vocabulary is
    /// built first-seen (feature names of each profile in sorted order), then
    /// every sample is materialized against the final vocabulary. Duplicate
    /// hashes with the same label are dropped; conflicting labels are a hard
    /// error.
    pub fn from_profiles(
        profiles: Vec<(ImportProfile, Label)>,
        provenance: impl Into<String>,
    ) -> Result<Self, DatamineError> {
        let mut vocabulary = Vocabulary::new();
        let mut seen: HashMap<String, (Label, String)> = HashMap::new();
        let mut rows: Vec<(ImportProfile, Label, Vec<FunctionId>)> = Vec::new();
        let mut notes = Vec::new();

        for (profile, label) in profiles {
            if let Some((prev_label, prev_name)) = seen.get(&profile.content_hash) {
                if *prev_label != label {
                    return Err(DatamineError::LabelConflict {
                        hash: profile.content_hash.clone(),
                        a: prev_name.clone(),
                        b: profile.source_name.clone(),
                    });
                }
                notes.push(format!(
                    "warning: duplicate of {} dropped: {}",
                    prev_name, profile.source_name
                ));
                continue;
            }
            seen.insert(
                profile.content_hash.clone(),
                (label, profile.source_name.clone()),
            );
            let ids: Vec<FunctionId> = profile
                .feature_names()
                .iter()
                .map(|n| vocabulary.intern(n))
                .collect();
            rows.push((profile, label, ids));
        }

        if rows.is_empty() {
            return Err(DatamineError::EmptyCorpus);
        }

        let width = vocabulary.len();
        let samples = rows
            .into_iter()
            .map(|(profile, label, ids)| {
                let mut bits = Bitset::new(width);
                for id in ids {
                    bits.set(id as usize);
                }
                Sample {
                    content_hash: profile.content_hash,
                    source_name: profile.source_name,
                    label,
                    features: bits,
                }
            })
            .collect();

        let mut provenance = provenance.into();
        for n in notes {
            provenance.push('\n');
            provenance.push_str(&n);
        }
        Ok(Self {
            vocabulary,
            samples,
            provenance,
        })
    }

    pub fn labels(&self) -> Vec<Label> {
        self.samples.iter().map(|s| s.label).collect()
    }

    pub fn class_counts(&self) -> (usize, usize) {
        let malware = self.samples.iter().filter(|s| s.label.is_malware()).count();
        (malware, self.samples.len() - malware)
    }

    /// The column of feature `id` across all samples.
    pub fn feature_column(&self, id: FunctionId) -> Bitset {
        let mut col = Bitset::new(self.samples.len());
        for (i, s) in self.samples.iter().enumerate() {
            if s.features.get(id as usize) {
                col.set(i);
            }
        }
        col
    }

    /// Row-subset view used by splitting and bootstrap sampling.
    pub fn subset(&self, indices: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            vocabulary: self.vocabulary.clone(),
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
            provenance: self.provenance.clone(),
        }
    }
}

/// Parse every regular file under each labeled directory into a matrix.
/// Files are processed in sorted path order; parse failures are recorded in
/// the provenance text and skipped.
pub fn ingest(
    dirs: &[(PathBuf, Label)],
    limits: &ParserLimits,
) -> Result<FeatureMatrix, DatamineError> {
    let mut files: Vec<(PathBuf, Label)> = Vec::new();
    for (dir, label) in dirs {
        let mut entries: Vec<PathBuf> = fs::read_dir(dir)?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.is_file())
            .collect();
        entries.sort();
        files.extend(entries.into_iter().map(|p| (p, *label)));
    }
    ingest_files(&files, limits)
}

/// Manifest alternative: one `path,label` per line.
pub fn ingest_manifest(
    manifest: &Path,
    limits: &ParserLimits,
) -> Result<FeatureMatrix, DatamineError> {
    let text = fs::read_to_string(manifest)?;
    let mut files = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (path, label) = line.rsplit_once(',').ok_or_else(|| {
            DatamineError::CorruptMatrixFile(format!(
                "manifest line {}: expected `path,label`",
                lineno + 1
            ))
        })?;
        let label: Label = label.parse().map_err(|e| {
            DatamineError::CorruptMatrixFile(format!("manifest line {}: {e}", lineno + 1))
        })?;
        files.push((PathBuf::from(path.trim()), label));
    }
    ingest_files(&files, limits)
}

fn ingest_files(
    files: &[(PathBuf, Label)],
    limits: &ParserLimits,
) -> Result<FeatureMatrix, DatamineError> {
    // Parsing is parallel; assembly stays in sorted path order so ids are
    // deterministic.
    let parsed: Vec<(PathBuf, Label, Result<ImportProfile, String>)> = files
        .par_iter()
        .map(|(path, label)| {
            let result = fs::read(path)
                .map_err(|e| e.to_string())
                .and_then(|bytes| {
                    let bin = RawBinary::new(&bytes, path.display().to_string());
                    parse_imports_with_limits(&bin, limits).map_err(|e| e.to_string())
                });
            (path.clone(), *label, result)
        })
        .collect();

    let mut profiles = Vec::new();
    let mut skipped = Vec::new();
    for (path, label, result) in parsed {
        match result {
            Ok(profile) => profiles.push((profile, label)),
            Err(e) => skipped.push(format!("skipped {}: {e}", path.display())),
        }
    }
    let mut provenance = format!(
        "ingested {} of {} files",
        profiles.len(),
        files.len()
    );
    for s in &skipped {
        provenance.push('\n');
        provenance.push_str(s);
    }
    FeatureMatrix::from_profiles(profiles, provenance)
}

#[derive(Serialize, Deserialize)]
struct MatrixDoc {
    format: String,
    version: u32,
    vocabulary: Vec<String>,
    provenance: String,
    samples: Vec<SampleDoc>,
}

#[derive(Serialize, Deserialize)]
struct SampleDoc {
    content_hash: String,
    source_name: String,
    label: Label,
    features_hex: String,
}

pub fn save_matrix(m: &FeatureMatrix, path: &Path) -> Result<(), DatamineError> {
    let doc = MatrixDoc {
        format: MATRIX_FORMAT.to_string(),
        version: MATRIX_VERSION,
        vocabulary: m.vocabulary.names().to_vec(),
        provenance: m.provenance.clone(),
        samples: m
            .samples
            .iter()
            .map(|s| SampleDoc {
                content_hash: s.content_hash.clone(),
                source_name: s.source_name.clone(),
                label: s.label,
                features_hex: s.features.to_hex(),
            })
            .collect(),
    };
    let mut f = fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut f, &doc)
        .map_err(|e| DatamineError::CorruptMatrixFile(e.to_string()))?;
    f.write_all(b"\n")?;
    Ok(())
}

pub fn load_matrix(path: &Path) -> Result<FeatureMatrix, DatamineError> {
    let text = fs::read_to_string(path)?;
    let doc: MatrixDoc = serde_json::from_str(&text)
        .map_err(|e| DatamineError::CorruptMatrixFile(e.to_string()))?;
    if doc.format != MATRIX_FORMAT || doc.version != MATRIX_VERSION {
        return Err(DatamineError::FormatVersionMismatch(format!(
            "{} v{}",
            doc.format, doc.version
        )));
    }
    let vocabulary = Vocabulary::from_names(doc.vocabulary)
        .ok_or_else(|| DatamineError::CorruptMatrixFile("duplicate vocabulary entry".into()))?;
    let width = vocabulary.len();
    let samples = doc
        .samples
        .into_iter()
        .map(|s| {
            let features = Bitset::from_hex(&s.features_hex, width).ok_or_else(|| {
                DatamineError::CorruptMatrixFile(format!("bad bitset for {}", s.content_hash))
            })?;
            Ok(Sample {
                content_hash: s.content_hash,
                source_name: s.source_name,
                label: s.label,
                features,
            })
        })
        .collect::<Result<Vec<_>, DatamineError>>()?;
    Ok(FeatureMatrix {
        vocabulary,
        samples,
        provenance: doc.provenance,
    })
}

fn csv_quote(name: &str) -> String {
    if name.contains(',') || name.contains('"') {
        format!("\"{}\"", name.replace('"', "\"\""))
    } else {
        name.to_string()
    }
}

/// Export the matrix as the executables-by-functions presence table:
/// `sample,is_virus,<function names...>` with 0/1 cells.
pub fn export_hashmap_csv<W: Write>(m: &FeatureMatrix, out: &mut W) -> std::io::Result<()> {
    let mut header = String::from("sample,is_virus");
    for name in m.vocabulary.names() {
        header.push(',');
        header.push_str(&csv_quote(name));
    }
    writeln!(out, "{header}")?;
    for s in &m.samples {
        let mut row = format!("{},{}", s.content_hash, if s.label.is_malware() { 1 } else { 0 });
        for f in 0..m.vocabulary.len() {
            row.push(',');
            row.push(if s.features.get(f) { '1' } else { '0' });
        }
        writeln!(out, "{row}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pe::{build_minimal_pe, parse_imports, PeFlavor};

    fn profile_of(imports: &[(&str, &str)], name: &str) -> ImportProfile {
        let pairs: Vec<(String, String)> = imports
            .iter()
            .map(|(d, n)| (d.to_string(), n.to_string()))
            .collect();
        let bytes = build_minimal_pe(&pairs, PeFlavor::Pe32).unwrap();
        parse_imports(&RawBinary::new(&bytes, name)).unwrap()
    }

    #[test]
    fn disjoint_vocabularies() {
        let m = FeatureMatrix::from_profiles(
            vec![
                (profile_of(&[("kernel32.dll", "ExitProcess")], "a"), Label::Malware),
                (profile_of(&[("kernel32.dll", "WriteFile")], "b"), Label::Benign),
            ],
            "test",
        )
        .unwrap();
        assert_eq!(m.vocabulary.len(), 2);
        assert_eq!(m.samples.len(), 2);
        assert!(m.samples[0].features.get(m.vocabulary.id_of("ExitProcess").unwrap() as usize));
        assert!(!m.samples[0].features.get(m.vocabulary.id_of("WriteFile").unwrap() as usize));
        assert!(m.samples[1].features.get(m.vocabulary.id_of("WriteFile").unwrap() as usize));
    }

    #[test]
    fn empty_profile_list_is_empty_corpus() {
        let err = FeatureMatrix::from_profiles(vec![], "test").unwrap_err();
        assert!(matches!(err, DatamineError::EmptyCorpus));
    }

    #[test]
    fn duplicate_same_label_dropped_conflict_errors() {
        let p = profile_of(&[("a.dll", "F")], "one");
        let mut q = p.clone();
        q.source_name = "two".into();
        let m = FeatureMatrix::from_profiles(
            vec![(p.clone(), Label::Malware), (q.clone(), Label::Malware)],
            "t",
        )
        .unwrap();
        assert_eq!(m.samples.len(), 1);
        assert!(m.provenance.contains("duplicate"));

        let err =
            FeatureMatrix::from_profiles(vec![(p, Label::Malware), (q, Label::Benign)], "t")
                .unwrap_err();
        assert!(matches!(err, DatamineError::LabelConflict { .. }));
    }

    #[test]
    fn matrix_roundtrip() {
        let m = FeatureMatrix::from_profiles(
            vec![
                (profile_of(&[("k.dll", "A"), ("k.dll", "B")], "a"), Label::Malware),
                (profile_of(&[("k.dll", "B"), ("u.dll", "C")], "b"), Label::Benign),
            ],
            "round-trip",
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        save_matrix(&m, &path).unwrap();
        let loaded = load_matrix(&path).unwrap();
        assert_eq!(m, loaded);
    }

    #[test]
    fn truncated_matrix_file_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        let m = FeatureMatrix::from_profiles(
            vec![(profile_of(&[("k.dll", "A")], "a"), Label::Malware)],
            "t",
        )
        .unwrap();
        save_matrix(&m, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        fs::write(&path, &text[..text.len() / 2]).unwrap();
        assert!(matches!(
            load_matrix(&path),
            Err(DatamineError::CorruptMatrixFile(_))
        ));
    }

    #[test]
    fn csv_export_layout() {
        let m = FeatureMatrix::from_profiles(
            vec![(profile_of(&[("kernel32.dll", "ExitProcess")], "a"), Label::Malware)],
            "t",
        )
        .unwrap();
        let mut out = Vec::new();
        export_hashmap_csv(&m, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "sample,is_virus,ExitProcess");
        let row = lines.next().unwrap();
        assert!(row.starts_with(&m.samples[0].content_hash));
        assert!(row.ends_with(",1,1"));
    }

    #[test]
    fn bitset_hex_roundtrip_rejects_stray_bits() {
        let mut b = Bitset::new(10);
        b.set(0);
        b.set(9);
        let h = b.to_hex();
        assert_eq!(Bitset::from_hex(&h, 10).unwrap(), b);
        assert!(Bitset::from_hex("ffff", 10).is_none());
    }
}
