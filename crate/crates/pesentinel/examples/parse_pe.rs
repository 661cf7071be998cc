//! Build a minimal PE in memory, parse its import table back out, and show
//! how malformed input surfaces as a typed error instead of a panic.
//!
//! Run with `cargo run --example parse_pe`.

use pesentinel::pe::{build_minimal_pe, parse_imports, PeFlavor, RawBinary};

fn main() {
    let imports = vec![
        ("kernel32.dll".to_string(), "CreateFileA".to_string()),
        ("kernel32.dll".to_string(), "WriteFile".to_string()),
        ("ws2_32.dll".to_string(), "connect".to_string()),
    ];
    let bytes = build_minimal_pe(&imports, PeFlavor::Pe32).unwrap();
    println!("built a {}-byte PE32 image", bytes.len());

    let profile = parse_imports(&RawBinary::new(&bytes, "demo.exe")).unwrap();
    println!("content hash: {}", profile.content_hash);
    println!("imports:");
    for symbol in &profile.imports {
        println!("  {}", symbol.feature_name());
    }
    for note in &profile.diagnostics {
        println!("note: {note:?}");
    }

    // Arbitrary bytes never panic; they come back as a declared error.
    let err = parse_imports(&RawBinary::new(b"MZ but nothing else", "junk.bin")).unwrap_err();
    println!("junk input -> {err}");
}
