//! Minimal PE emitter.
//!
//! Produces a structurally valid PE32 or PE32+ image with a single `.idata`
//! section encoding exactly the requested by-name imports. Deterministic for
//! identical input; `parse_imports(build_minimal_pe(s, f))` recovers `s`.

use thiserror::Error;

const FILE_ALIGN: usize = 0x200;
const SECTION_RVA: u32 = 0x1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PeFlavor {
    Pe32,
    Pe32Plus,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BuildError {
    #[error("invalid symbol name {0:?}: must be non-empty printable ASCII")]
    InvalidSymbolName(String),
}

fn check_name(s: &str) -> Result<(), BuildError> {
    if s.is_empty() || !s.bytes().all(|b| (0x20..0x7F).contains(&b)) {
        return Err(BuildError::InvalidSymbolName(s.to_string()));
    }
    Ok(())
}

struct Buf(Vec<u8>);

impl Buf {
    fn u16(&mut self, v: u16) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn zeros(&mut self, n: usize) {
        self.0.resize(self.0.len() + n, 0);
    }
    fn pad_to(&mut self, len: usize) {
        if self.0.len() < len {
            self.0.resize(len, 0);
        }
    }
}

/// Emit a minimal PE whose import directory names exactly the given
/// `(dll, function)` pairs, each imported by name with hint 0.
pub fn build_minimal_pe(
    imports: &[(String, String)],
    flavor: PeFlavor,
) -> Result<Vec<u8>, BuildError> {
    for (dll, name) in imports {
        check_name(dll)?;
        check_name(name)?;
    }

    // Group by DLL in first-seen order, deduplicating function names.
    let mut dlls: Vec<(String, Vec<String>)> = Vec::new();
    for (dll, name) in imports {
        match dlls.iter_mut().find(|(d, _)| d == dll) {
            Some((_, names)) => {
                if !names.contains(name) {
                    names.push(name.clone());
                }
            }
            None => dlls.push((dll.clone(), vec![name.clone()])),
        }
    }

    let section = build_import_section(&dlls, flavor);
    let has_imports = !dlls.is_empty();
    let import_dir_rva = if has_imports { SECTION_RVA } else { 0 };
    let import_dir_size = if has_imports {
        ((dlls.len() + 1) * 20) as u32
    } else {
        0
    };

    let raw_size = section.len().div_ceil(FILE_ALIGN) * FILE_ALIGN;
    let raw_size = raw_size.max(FILE_ALIGN);
    let virtual_size = section.len().max(1) as u32;
    let size_of_image = 0x1000 + virtual_size.div_ceil(0x1000) * 0x1000;

    let mut b = Buf(Vec::with_capacity(FILE_ALIGN + raw_size));

    // DOS header: MZ magic, e_lfanew = 0x40.
    b.u16(0x5A4D);
    b.zeros(0x3C - 2);
    b.u32(0x40);

    // PE signature + COFF header.
    b.0.extend_from_slice(b"PE\0\0");
    let (machine, opt_size, characteristics) = match flavor {
        PeFlavor::Pe32 => (0x014Cu16, 0xE0u16, 0x0102u16),
        PeFlavor::Pe32Plus => (0x8664, 0xF0, 0x0022),
    };
    b.u16(machine);
    b.u16(1); // one section
    b.u32(0); // timestamp
    b.u32(0); // symbol table pointer
    b.u32(0); // symbol count
    b.u16(opt_size);
    b.u16(characteristics);

    // Optional header.
    match flavor {
        PeFlavor::Pe32 => {
            b.u16(0x10B);
            b.zeros(26); // linker/code/data sizes, entry point, bases
            b.u32(0x0040_0000); // ImageBase
        }
        PeFlavor::Pe32Plus => {
            b.u16(0x20B);
            b.zeros(22);
            b.u64(0x0000_0001_4000_0000); // ImageBase
        }
    }
    b.u32(0x1000); // SectionAlignment
    b.u32(FILE_ALIGN as u32);
    b.zeros(16); // OS/image/subsystem versions, Win32VersionValue
    b.u32(size_of_image);
    b.u32(FILE_ALIGN as u32); // SizeOfHeaders
    b.u32(0); // CheckSum
    b.u16(3); // Subsystem: console
    b.u16(0); // DllCharacteristics
    match flavor {
        PeFlavor::Pe32 => b.zeros(16), // stack/heap reserve+commit, 4 bytes each
        PeFlavor::Pe32Plus => b.zeros(32),
    }
    b.u32(0); // LoaderFlags
    b.u32(16); // NumberOfRvaAndSizes
    for dir in 0..16u32 {
        if dir == 1 {
            b.u32(import_dir_rva);
            b.u32(import_dir_size);
        } else {
            b.u32(0);
            b.u32(0);
        }
    }

    // Section header: .idata
    b.0.extend_from_slice(b".idata\0\0");
    b.u32(virtual_size);
    b.u32(SECTION_RVA);
    b.u32(raw_size as u32);
    b.u32(FILE_ALIGN as u32); // PointerToRawData
    b.zeros(12); // relocations, line numbers
    b.u32(0xC000_0040); // readable, writable, initialized data

    b.pad_to(FILE_ALIGN);
    b.0.extend_from_slice(&section);
    b.pad_to(FILE_ALIGN + raw_size);
    Ok(b.0)
}

/// Section body: descriptor array, then per DLL the lookup table, the IAT,
/// the hint/name entries, and the DLL name string. All RVAs are relative to
/// `SECTION_RVA`.
fn build_import_section(dlls: &[(String, Vec<String>)], flavor: PeFlavor) -> Vec<u8> {
    if dlls.is_empty() {
        return Vec::new();
    }
    let thunk_size = match flavor {
        PeFlavor::Pe32 => 4,
        PeFlavor::Pe32Plus => 8,
    };

    let descriptors_len = (dlls.len() + 1) * 20;
    let mut cursor = descriptors_len;

    struct DllLayout {
        ilt_rva: u32,
        iat_rva: u32,
        hint_name_rvas: Vec<u32>,
        name_rva: u32,
    }

    let rva = |off: usize| SECTION_RVA + off as u32;
    let mut layouts = Vec::with_capacity(dlls.len());
    for (dll, names) in dlls {
        let ilt = cursor;
        cursor += (names.len() + 1) * thunk_size;
        let iat = cursor;
        cursor += (names.len() + 1) * thunk_size;
        let mut hint_name_rvas = Vec::with_capacity(names.len());
        for name in names {
            hint_name_rvas.push(rva(cursor));
            let mut len = 2 + name.len() + 1;
            len += len % 2; // keep entries 2-byte aligned
            cursor += len;
        }
        let name_rva = rva(cursor);
        cursor += dll.len() + 1 + (dll.len() + 1) % 2;
        layouts.push(DllLayout {
            ilt_rva: rva(ilt),
            iat_rva: rva(iat),
            hint_name_rvas,
            name_rva,
        });
    }

    let mut b = Buf(Vec::with_capacity(cursor));
    for layout in &layouts {
        b.u32(layout.ilt_rva); // OriginalFirstThunk
        b.u32(0); // TimeDateStamp
        b.u32(0); // ForwarderChain
        b.u32(layout.name_rva);
        b.u32(layout.iat_rva); // FirstThunk
    }
    b.zeros(20); // terminator descriptor

    for ((dll, names), layout) in dlls.iter().zip(&layouts) {
        for table in 0..2 {
            let _ = table; // ILT then IAT, identical on disk
            for &hn in &layout.hint_name_rvas {
                match flavor {
                    PeFlavor::Pe32 => b.u32(hn),
                    PeFlavor::Pe32Plus => b.u64(hn as u64),
                }
            }
            b.zeros(thunk_size); // terminator thunk
        }
        for name in names {
            b.u16(0); // hint
            b.0.extend_from_slice(name.as_bytes());
            b.0.push(0);
            if (2 + name.len() + 1) % 2 == 1 {
                b.0.push(0);
            }
        }
        b.0.extend_from_slice(dll.as_bytes());
        b.0.push(0);
        if (dll.len() + 1) % 2 == 1 {
            b.0.push(0);
        }
    }
    debug_assert_eq!(b.0.len(), cursor);
    b.0
}
