//! Rank imported functions by information gain and print the top of the
//! table, including the mean-centered scores.
//!
//! Run with `cargo run --example rank_features`.

use pesentinel::evaluation::{generate_synthetic_corpus, SyntheticSpec};
use pesentinel::feature_selection::select_top;

fn main() {
    let corpus = generate_synthetic_corpus(&SyntheticSpec::default()).unwrap();
    let matrix = corpus.to_matrix().unwrap();

    let report = select_top(&matrix, 0.8).unwrap();
    println!(
        "label entropy {:.6} bits; retained {} of {} functions",
        report.label_entropy,
        report.retained.len(),
        report.scores.len()
    );
    println!("{:<6} {:<12} {:>12} {:>12}", "id", "function", "IG", "IG corrected");
    for s in report.scores.iter().take(25) {
        println!(
            "{:<6} {:<12} {:>12.6} {:>12.6}",
            s.function_id, s.function_name, s.ig, s.ig_corrected
        );
    }
}
