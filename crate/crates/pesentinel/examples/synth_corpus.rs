//! Generate a seeded synthetic corpus of real PE files and ingest it back
//! through the parser into a feature matrix.
//!
//! Run with `cargo run --example synth_corpus`.

use pesentinel::datamine::{ingest, Label};
use pesentinel::evaluation::{generate_synthetic_corpus, SyntheticSpec};
use pesentinel::pe::ParserLimits;

fn main() {
    let spec = SyntheticSpec {
        n_malware: 50,
        n_benign: 50,
        vocab_size: 60,
        planted: (0..8).map(|f| (f, 0.9, 0.1)).collect(),
        background_p: 0.3,
        seed: 42,
    };
    let corpus = generate_synthetic_corpus(&spec).unwrap();

    let dir = std::env::temp_dir().join("pesentinel_synth_example");
    let (malware_dir, benign_dir) = corpus.write_pe_files(&dir).unwrap();
    println!("wrote {} PE files under {}", corpus.samples.len(), dir.display());

    let matrix = ingest(
        &[(malware_dir, Label::Malware), (benign_dir, Label::Benign)],
        &ParserLimits::default(),
    )
    .unwrap();
    let (malware, benign) = matrix.class_counts();
    println!(
        "ingested {} samples ({malware} malware, {benign} benign) over {} functions",
        matrix.samples.len(),
        matrix.vocabulary.len()
    );
    println!("provenance: {}", matrix.provenance.lines().next().unwrap());
}
