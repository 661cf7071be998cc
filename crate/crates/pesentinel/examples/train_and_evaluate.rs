//! Train all three classifiers plus the selection-fed forest on a shared
//! stratified split and print the comparison table.
//!
//! Run with `cargo run --release --example train_and_evaluate`.

use pesentinel::evaluation::{
    comparison_table, generate_synthetic_corpus, render_comparison_text, ComparisonConfig,
    SyntheticSpec,
};

fn main() {
    let corpus = generate_synthetic_corpus(&SyntheticSpec::default()).unwrap();
    let matrix = corpus.to_matrix().unwrap();

    let rows = comparison_table(&matrix, &ComparisonConfig::default(), 42).unwrap();
    print!("{}", render_comparison_text(&rows));

    let proposed = &rows.last().unwrap().1;
    println!();
    print!("{}", proposed.render_instance_table());
}
