//! Portable Executable import mining.
//!
//! [`parse_imports`] statically walks the import directory of an untrusted PE
//! file and returns the set of imported API symbols. The parser is total:
//! arbitrary bytes produce either an [`ImportProfile`] or a [`ParseError`],
//! never a panic, out-of-bounds read, or unbounded loop. [`build_minimal_pe`]
//! is the inverse used as a round-trip oracle and as the substrate for
//! synthetic corpora.

mod builder;
mod parser;

pub use builder::{build_minimal_pe, BuildError, PeFlavor};
pub use parser::{parse_imports, parse_imports_with_limits};

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// An unparsed binary plus a label for diagnostics.
pub struct RawBinary<'a> {
    pub bytes: &'a [u8],
    pub source_name: String,
}

impl<'a> RawBinary<'a> {
    pub fn new(bytes: &'a [u8], source_name: impl Into<String>) -> Self {
        Self {
            bytes,
            source_name: source_name.into(),
        }
    }
}

/// One import table entry: a function imported from a DLL either by name or
/// by ordinal, never both.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ImportedSymbol {
    /// Lowercased library name, e.g. `kernel32.dll`.
    pub dll: String,
    pub kind: ImportKind,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ImportKind {
    Name(String),
    Ordinal(u16),
}

impl ImportedSymbol {
    pub fn by_name(dll: impl Into<String>, name: impl Into<String>) -> Self {
        Self {
            dll: dll.into().to_ascii_lowercase(),
            kind: ImportKind::Name(name.into()),
        }
    }

    pub fn by_ordinal(dll: impl Into<String>, ordinal: u16) -> Self {
        Self {
            dll: dll.into().to_ascii_lowercase(),
            kind: ImportKind::Ordinal(ordinal),
        }
    }

    /// The feature key used throughout the pipeline. Named imports are keyed
    /// by bare function name (the DLL is kept for diagnostics only); ordinal
    /// imports become `ord:<dll>#<ordinal>` so they cannot collide with real
    /// names.
    pub fn feature_name(&self) -> String {
        match &self.kind {
            ImportKind::Name(n) => n.clone(),
            ImportKind::Ordinal(o) => format!("ord:{}#{}", self.dll, o),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Severity {
    Info,
    Warning,
}

/// A recoverable deviation or notable condition hit while parsing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseNote {
    pub severity: Severity,
    pub message: String,
    pub file_offset: Option<u64>,
}

impl ParseNote {
    fn info(message: impl Into<String>, file_offset: Option<u64>) -> Self {
        Self {
            severity: Severity::Info,
            message: message.into(),
            file_offset,
        }
    }

    fn warning(message: impl Into<String>, file_offset: Option<u64>) -> Self {
        Self {
            severity: Severity::Warning,
            message: message.into(),
            file_offset,
        }
    }
}

/// One binary's extracted import set plus identity and diagnostics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImportProfile {
    /// SHA-256 of the raw bytes, lowercase hex.
    pub content_hash: String,
    pub source_name: String,
    pub imports: BTreeSet<ImportedSymbol>,
    pub diagnostics: Vec<ParseNote>,
}

impl ImportProfile {
    /// Deduplicated feature names in sorted order.
    pub fn feature_names(&self) -> Vec<String> {
        let set: BTreeSet<String> = self.imports.iter().map(|s| s.feature_name()).collect();
        set.into_iter().collect()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("not an executable: missing MZ signature or file shorter than 64 bytes")]
    NotExecutable,
    #[error("no PE header: e_lfanew out of range or PE signature missing")]
    NoPEHeader,
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("input of {size} bytes exceeds the {limit}-byte cap")]
    TooLarge { size: u64, limit: u64 },
}

/// Hardening caps for hostile input. Defaults bound work on degenerate or
/// cyclic structures; all values are overridable.
#[derive(Debug, Clone, Copy)]
pub struct ParserLimits {
    pub max_input_bytes: u64,
    pub max_import_descriptors: usize,
    pub max_symbols_per_dll: usize,
    pub max_name_bytes: usize,
}

impl Default for ParserLimits {
    fn default() -> Self {
        Self {
            max_input_bytes: 256 * 1024 * 1024,
            max_import_descriptors: 4096,
            max_symbols_per_dll: 16_384,
            max_name_bytes: 4096,
        }
    }
}

impl ParserLimits {
    /// Default limits with the input-size cap taken from the
    /// `PESENTINEL_MAX_FILE_SIZE` environment variable when set.
    pub fn from_env() -> Self {
        let mut limits = Self::default();
        if let Ok(v) = std::env::var("PESENTINEL_MAX_FILE_SIZE") {
            if let Ok(n) = v.trim().parse::<u64>() {
                limits.max_input_bytes = n;
            }
        }
        limits
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(bytes: &[u8]) -> Result<ImportProfile, ParseError> {
        parse_imports_with_limits(
            &RawBinary::new(bytes, "test"),
            &ParserLimits::default(),
        )
    }

    #[test]
    fn zero_padded_non_mz_is_not_executable() {
        let mut bytes = vec![0u8; 64];
        bytes[..4].copy_from_slice(b"ZZZZ");
        assert_eq!(parse(&bytes).unwrap_err(), ParseError::NotExecutable);
        assert_eq!(parse(b"MZ").unwrap_err(), ParseError::NotExecutable);
    }

    #[test]
    fn bad_e_lfanew_or_signature_is_no_pe_header() {
        let mut bytes = vec![0u8; 128];
        bytes[0] = 0x4D;
        bytes[1] = 0x5A;
        bytes[0x3C..0x40].copy_from_slice(&0xFFFF_0000u32.to_le_bytes());
        assert_eq!(parse(&bytes).unwrap_err(), ParseError::NoPEHeader);
        bytes[0x3C..0x40].copy_from_slice(&0x40u32.to_le_bytes());
        bytes[0x40..0x44].copy_from_slice(b"XX\0\0");
        assert_eq!(parse(&bytes).unwrap_err(), ParseError::NoPEHeader);
    }

    #[test]
    fn truncated_headers_are_malformed() {
        let good = build_minimal_pe(&[], PeFlavor::Pe32).unwrap();
        // Cut inside the optional header.
        assert!(matches!(
            parse(&good[..0x80]).unwrap_err(),
            ParseError::MalformedHeader(_)
        ));
        // Unknown optional-header magic.
        let mut bad_magic = good.clone();
        bad_magic[0x58] = 0x0C; // optional header starts at 0x40 + 4 + 20
        assert!(matches!(
            parse(&bad_magic).unwrap_err(),
            ParseError::MalformedHeader(_)
        ));
    }

    #[test]
    fn size_cap_is_enforced() {
        let bytes = build_minimal_pe(&[], PeFlavor::Pe32).unwrap();
        let limits = ParserLimits {
            max_input_bytes: 100,
            ..Default::default()
        };
        assert!(matches!(
            parse_imports_with_limits(&RawBinary::new(&bytes, "t"), &limits).unwrap_err(),
            ParseError::TooLarge { .. }
        ));
    }

    #[test]
    fn absent_import_directory_yields_info_note() {
        let bytes = build_minimal_pe(&[], PeFlavor::Pe32).unwrap();
        let profile = parse(&bytes).unwrap();
        assert!(profile.imports.is_empty());
        assert_eq!(profile.diagnostics.len(), 1);
        assert_eq!(profile.diagnostics[0].severity, Severity::Info);
    }

    #[test]
    fn two_named_imports_roundtrip() {
        let imports = vec![
            ("kernel32.dll".to_string(), "ExitProcess".to_string()),
            ("kernel32.dll".to_string(), "WriteFile".to_string()),
        ];
        for flavor in [PeFlavor::Pe32, PeFlavor::Pe32Plus] {
            let bytes = build_minimal_pe(&imports, flavor).unwrap();
            let profile = parse(&bytes).unwrap();
            let expected: std::collections::BTreeSet<ImportedSymbol> = imports
                .iter()
                .map(|(d, n)| ImportedSymbol::by_name(d.clone(), n.clone()))
                .collect();
            assert_eq!(profile.imports, expected);
        }
    }

    #[test]
    fn builder_emits_format_constants() {
        let bytes = build_minimal_pe(&[("a.dll".into(), "F".into())], PeFlavor::Pe32).unwrap();
        assert_eq!(&bytes[..2], &[0x4D, 0x5A]);
        let e_lfanew = u32::from_le_bytes(bytes[0x3C..0x40].try_into().unwrap()) as usize;
        assert_eq!(&bytes[e_lfanew..e_lfanew + 4], b"PE\0\0");
    }

    #[test]
    fn builder_rejects_bad_names() {
        assert!(matches!(
            build_minimal_pe(&[("a.dll".into(), "bad\u{e9}".into())], PeFlavor::Pe32),
            Err(BuildError::InvalidSymbolName(_))
        ));
        assert!(matches!(
            build_minimal_pe(&[("".into(), "F".into())], PeFlavor::Pe32),
            Err(BuildError::InvalidSymbolName(_))
        ));
        assert!(matches!(
            build_minimal_pe(&[("a.dll".into(), "nul\0".into())], PeFlavor::Pe32),
            Err(BuildError::InvalidSymbolName(_))
        ));
    }

    #[test]
    fn ordinal_thunks_become_ordinal_features() {
        // One descriptor, one import: the ILT sits 40 bytes into the
        // section (after the 2-descriptor array), the IAT 8 bytes later.
        let mut bytes =
            build_minimal_pe(&[("a.dll".into(), "F".into())], PeFlavor::Pe32).unwrap();
        let ordinal = 0x8000_000Fu32.to_le_bytes();
        bytes[0x200 + 40..0x200 + 44].copy_from_slice(&ordinal);
        bytes[0x200 + 48..0x200 + 52].copy_from_slice(&ordinal);
        let profile = parse(&bytes).unwrap();
        let symbol = profile.imports.iter().next().unwrap();
        assert_eq!(symbol, &ImportedSymbol::by_ordinal("a.dll", 15));
        assert_eq!(symbol.feature_name(), "ord:a.dll#15");
    }

    #[test]
    fn zeroed_ilt_falls_back_to_iat() {
        let mut bytes =
            build_minimal_pe(&[("a.dll".into(), "F".into())], PeFlavor::Pe32).unwrap();
        // Descriptor 0's OriginalFirstThunk is the first field in the section.
        bytes[0x200..0x204].copy_from_slice(&0u32.to_le_bytes());
        let profile = parse(&bytes).unwrap();
        assert_eq!(
            profile.imports.iter().next().unwrap(),
            &ImportedSymbol::by_name("a.dll", "F")
        );
    }

    #[test]
    fn unmappable_rva_is_skipped_with_warning() {
        let mut bytes =
            build_minimal_pe(&[("a.dll".into(), "F".into())], PeFlavor::Pe32).unwrap();
        // Descriptor 0's Name RVA points outside every section.
        bytes[0x200 + 12..0x200 + 16].copy_from_slice(&0x00F0_0000u32.to_le_bytes());
        let profile = parse(&bytes).unwrap();
        assert!(profile.imports.is_empty());
        assert!(profile
            .diagnostics
            .iter()
            .any(|n| n.severity == Severity::Warning));
    }

    #[test]
    fn identical_bytes_identical_profile() {
        let bytes = build_minimal_pe(
            &[("a.dll".into(), "F".into()), ("b.dll".into(), "G".into())],
            PeFlavor::Pe32Plus,
        )
        .unwrap();
        let a = parse(&bytes).unwrap();
        let b = parse(&bytes).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.content_hash, crate::hash::content_hash(&bytes));
    }

    #[test]
    fn builder_is_deterministic() {
        let imports = vec![("x.dll".to_string(), "Func".to_string())];
        assert_eq!(
            build_minimal_pe(&imports, PeFlavor::Pe32).unwrap(),
            build_minimal_pe(&imports, PeFlavor::Pe32).unwrap()
        );
    }
}
