//! Import directory walker.
//!
//! Layout constants are the on-disk PE format: DOS header with `e_lfanew` at
//! 0x3C, `PE\0\0` signature, 20-byte COFF header, optional header (magic
//! 0x10B for PE32 with the data-directory array at offset 96, 0x20B for
//! PE32+ at offset 112), 40-byte section headers, and 20-byte import
//! descriptors terminated by an all-zero record. All fields little-endian.

use std::collections::BTreeSet;

use super::{
    ImportProfile, ImportedSymbol, ParseError, ParseNote, ParserLimits, RawBinary,
};
use crate::hash::content_hash;

const DOS_MAGIC: [u8; 2] = [0x4D, 0x5A];
const PE_SIGNATURE: [u8; 4] = [0x50, 0x45, 0x00, 0x00];
const E_LFANEW_OFFSET: usize = 0x3C;
const COFF_HEADER_LEN: usize = 20;
const SECTION_HEADER_LEN: usize = 40;
const IMPORT_DESCRIPTOR_LEN: usize = 20;
const MAGIC_PE32: u16 = 0x10B;
const MAGIC_PE32_PLUS: u16 = 0x20B;

struct Section {
    virtual_address: u32,
    size_of_raw_data: u32,
    pointer_to_raw_data: u32,
}

struct Reader<'a> {
    bytes: &'a [u8],
}

impl<'a> Reader<'a> {
    fn u16_at(&self, off: usize) -> Option<u16> {
        self.bytes
            .get(off..off + 2)
            .map(|b| u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32_at(&self, off: usize) -> Option<u32> {
        self.bytes
            .get(off..off + 4)
            .map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn u64_at(&self, off: usize) -> Option<u64> {
        self.bytes
            .get(off..off + 8)
            .map(|b| u64::from_le_bytes(b.try_into().unwrap()))
    }

    /// NUL-terminated byte string at `off`, at most `cap` bytes long.
    /// `None` if the terminator is past the cap or the end of file.
    fn cstr_at(&self, off: usize, cap: usize) -> Option<&'a [u8]> {
        let tail = self.bytes.get(off..)?;
        let search = &tail[..tail.len().min(cap + 1)];
        let nul = search.iter().position(|&b| b == 0)?;
        Some(&search[..nul])
    }
}

fn rva_to_offset(sections: &[Section], rva: u32) -> Option<usize> {
    for s in sections {
        if rva >= s.virtual_address && rva - s.virtual_address < s.size_of_raw_data {
            return Some(s.pointer_to_raw_data as usize + (rva - s.virtual_address) as usize);
        }
    }
    None
}

fn printable_ascii(bytes: &[u8]) -> bool {
    !bytes.is_empty() && bytes.iter().all(|&b| (0x20..0x7F).contains(&b))
}

/// Parse with default hardening limits (honoring `PESENTINEL_MAX_FILE_SIZE`).
pub fn parse_imports(bin: &RawBinary) -> Result<ImportProfile, ParseError> {
    parse_imports_with_limits(bin, &ParserLimits::from_env())
}

pub fn parse_imports_with_limits(
    bin: &RawBinary,
    limits: &ParserLimits,
) -> Result<ImportProfile, ParseError> {
    let bytes = bin.bytes;
    if bytes.len() as u64 > limits.max_input_bytes {
        return Err(ParseError::TooLarge {
            size: bytes.len() as u64,
            limit: limits.max_input_bytes,
        });
    }
    if bytes.len() < 64 || bytes[..2] != DOS_MAGIC {
        return Err(ParseError::NotExecutable);
    }
    let r = Reader { bytes };

    let e_lfanew = r.u32_at(E_LFANEW_OFFSET).ok_or(ParseError::NoPEHeader)? as usize;
    match bytes.get(e_lfanew..e_lfanew + 4) {
        Some(sig) if sig == PE_SIGNATURE => {}
        _ => return Err(ParseError::NoPEHeader),
    }

    let coff = e_lfanew + 4;
    let number_of_sections = r
        .u16_at(coff + 2)
        .ok_or_else(|| ParseError::MalformedHeader("COFF header truncated".into()))?
        as usize;
    let size_of_optional_header = r
        .u16_at(coff + 16)
        .ok_or_else(|| ParseError::MalformedHeader("COFF header truncated".into()))?
        as usize;

    let opt = coff + COFF_HEADER_LEN;
    if opt + size_of_optional_header > bytes.len() {
        return Err(ParseError::MalformedHeader("optional header truncated".into()));
    }
    let magic = r
        .u16_at(opt)
        .ok_or_else(|| ParseError::MalformedHeader("optional header truncated".into()))?;
    let (pe32_plus, data_dir_offset, num_dirs_offset) = match magic {
        MAGIC_PE32 => (false, 96, 92),
        MAGIC_PE32_PLUS => (true, 112, 108),
        other => {
            return Err(ParseError::MalformedHeader(format!(
                "unknown optional-header magic 0x{other:X}"
            )))
        }
    };

    let section_table = opt + size_of_optional_header;
    if section_table + number_of_sections * SECTION_HEADER_LEN > bytes.len() {
        return Err(ParseError::MalformedHeader("section table truncated".into()));
    }
    let mut sections = Vec::with_capacity(number_of_sections);
    for i in 0..number_of_sections {
        let base = section_table + i * SECTION_HEADER_LEN;
        sections.push(Section {
            virtual_address: r.u32_at(base + 12).unwrap_or(0),
            size_of_raw_data: r.u32_at(base + 16).unwrap_or(0),
            pointer_to_raw_data: r.u32_at(base + 20).unwrap_or(0),
        });
    }

    let mut imports: BTreeSet<ImportedSymbol> = BTreeSet::new();
    let mut notes: Vec<ParseNote> = Vec::new();

    // Data directory entry 1 is the import table.
    let import_dir = (|| {
        if size_of_optional_header < data_dir_offset + 16 {
            return None;
        }
        let num_dirs = r.u32_at(opt + num_dirs_offset)?;
        if num_dirs < 2 {
            return None;
        }
        let rva = r.u32_at(opt + data_dir_offset + 8)?;
        let size = r.u32_at(opt + data_dir_offset + 12)?;
        if rva == 0 || size == 0 {
            None
        } else {
            Some(rva)
        }
    })();

    match import_dir {
        None => {
            notes.push(ParseNote::info("no import directory", None));
        }
        Some(dir_rva) => match rva_to_offset(&sections, dir_rva) {
            None => notes.push(ParseNote::warning(
                format!("import directory RVA 0x{dir_rva:X} outside every section"),
                None,
            )),
            Some(dir_off) => walk_import_descriptors(
                &r, &sections, dir_off, pe32_plus, limits, &mut imports, &mut notes,
            ),
        },
    }

    Ok(ImportProfile {
        content_hash: content_hash(bytes),
        source_name: bin.source_name.clone(),
        imports,
        diagnostics: notes,
    })
}

#[allow(clippy::too_many_arguments)]
fn walk_import_descriptors(
    r: &Reader,
    sections: &[Section],
    dir_off: usize,
    pe32_plus: bool,
    limits: &ParserLimits,
    imports: &mut BTreeSet<ImportedSymbol>,
    notes: &mut Vec<ParseNote>,
) {
    for index in 0..limits.max_import_descriptors {
        let base = dir_off + index * IMPORT_DESCRIPTOR_LEN;
        let (Some(original_first_thunk), Some(name_rva), Some(first_thunk)) =
            (r.u32_at(base), r.u32_at(base + 12), r.u32_at(base + 16))
        else {
            notes.push(ParseNote::warning(
                "import descriptor array runs off the end of the file",
                Some(base as u64),
            ));
            return;
        };
        if original_first_thunk == 0 && name_rva == 0 && first_thunk == 0 {
            return; // terminator
        }

        let dll = match rva_to_offset(sections, name_rva)
            .and_then(|off| r.cstr_at(off, limits.max_name_bytes))
        {
            Some(raw) if printable_ascii(raw) => {
                String::from_utf8_lossy(raw).to_ascii_lowercase()
            }
            _ => {
                notes.push(ParseNote::warning(
                    format!("descriptor {index}: unresolvable DLL name RVA 0x{name_rva:X}"),
                    Some(base as u64),
                ));
                continue;
            }
        };

        // Prefer the import lookup table; fall back to the IAT when the
        // linker zeroed the ILT.
        let thunk_rva = if original_first_thunk != 0 {
            original_first_thunk
        } else {
            first_thunk
        };
        let Some(thunk_off) = rva_to_offset(sections, thunk_rva) else {
            notes.push(ParseNote::warning(
                format!("{dll}: thunk array RVA 0x{thunk_rva:X} outside every section"),
                Some(base as u64),
            ));
            continue;
        };

        walk_thunks(r, sections, thunk_off, &dll, pe32_plus, limits, imports, notes);
    }
    notes.push(ParseNote::warning(
        format!(
            "import descriptor cap of {} reached; remaining descriptors ignored",
            limits.max_import_descriptors
        ),
        None,
    ));
}

#[allow(clippy::too_many_arguments)]
fn walk_thunks(
    r: &Reader,
    sections: &[Section],
    thunk_off: usize,
    dll: &str,
    pe32_plus: bool,
    limits: &ParserLimits,
    imports: &mut BTreeSet<ImportedSymbol>,
    notes: &mut Vec<ParseNote>,
) {
    let thunk_size = if pe32_plus { 8 } else { 4 };
    let ordinal_flag: u64 = if pe32_plus { 1 << 63 } else { 1 << 31 };
    for i in 0..limits.max_symbols_per_dll {
        let off = thunk_off + i * thunk_size;
        let value = if pe32_plus {
            r.u64_at(off)
        } else {
            r.u32_at(off).map(u64::from)
        };
        let Some(value) = value else {
            notes.push(ParseNote::warning(
                format!("{dll}: thunk array runs off the end of the file"),
                Some(off as u64),
            ));
            return;
        };
        if value == 0 {
            return; // terminator
        }
        if value & ordinal_flag != 0 {
            imports.insert(ImportedSymbol::by_ordinal(dll, (value & 0xFFFF) as u16));
            continue;
        }
        // Hint/name entry: 2-byte hint then NUL-terminated ASCII name.
        let hint_name_rva = value as u32;
        match rva_to_offset(sections, hint_name_rva)
            .and_then(|o| r.cstr_at(o + 2, limits.max_name_bytes))
        {
            Some(raw) if printable_ascii(raw) => {
                imports.insert(ImportedSymbol::by_name(
                    dll,
                    String::from_utf8_lossy(raw).into_owned(),
                ));
            }
            _ => notes.push(ParseNote::warning(
                format!("{dll}: bad hint/name entry at RVA 0x{hint_name_rva:X}"),
                Some(off as u64),
            )),
        }
    }
    notes.push(ParseNote::warning(
        format!(
            "{dll}: symbol cap of {} reached; remaining thunks ignored",
            limits.max_symbols_per_dll
        ),
        None,
    ));
}
