//! Train a forest, persist it as a model file, and scan fresh binaries —
//! including one that is not a PE at all — printing ranked verdicts.
//!
//! Run with `cargo run --example scan_files`.

use pesentinel::classifiers::{save_model, train_forest, ForestConfig, TrainedModel};
use pesentinel::evaluation::{generate_synthetic_corpus, SyntheticSpec};
use pesentinel::feature_selection::select_top;
use pesentinel::scan::{sort_by_risk, Scanner};

fn main() {
    let spec = SyntheticSpec {
        n_malware: 100,
        n_benign: 100,
        vocab_size: 80,
        planted: (0..10).map(|f| (f, 0.9, 0.1)).collect(),
        background_p: 0.3,
        seed: 42,
    };
    let matrix = generate_synthetic_corpus(&spec).unwrap().to_matrix().unwrap();
    let retained = select_top(&matrix, 0.8).unwrap().retained;
    let forest = train_forest(&matrix, &retained, &ForestConfig::default()).unwrap();

    let model_path = std::env::temp_dir().join("pesentinel_scan_example_model.json");
    save_model(
        &TrainedModel::Forest(forest),
        &matrix.vocabulary,
        "scan example",
        &model_path,
    )
    .unwrap();
    let scanner = Scanner::from_file(&model_path).unwrap();

    // Fresh samples the model has never seen, plus a non-PE blob.
    let probe = generate_synthetic_corpus(&SyntheticSpec { seed: 7, ..spec }).unwrap();
    let mut verdicts: Vec<_> = probe
        .samples
        .iter()
        .take(6)
        .map(|s| scanner.scan_bytes(&s.bytes, &s.name))
        .collect();
    verdicts.push(scanner.scan_bytes(b"#!/bin/sh\necho not a pe\n", "script.sh"));

    sort_by_risk(&mut verdicts);
    for v in &verdicts {
        match (&v.risk_score, &v.error) {
            (Some(risk), _) => println!("{} {:<8} {risk:.4}", &v.content_hash[..16], v.label),
            (None, Some(code)) => println!("{} ERROR    {code}", &v.content_hash[..16]),
            _ => unreachable!(),
        }
    }
}
