//! Run the HTTP scan gateway against a model trained on the synthetic
//! corpus, then leave it serving until Ctrl-C.
//!
//! Run with `cargo run --example gateway`, then try:
//!
//! ```text
//! curl -s localhost:8080/health
//! curl -s localhost:8080/model/info
//! curl -s --data-binary @some.exe -H 'X-Filename: some.exe' localhost:8080/scan
//! ```

use pesentinel::classifiers::{save_model, train_forest, ForestConfig, TrainedModel};
use pesentinel::evaluation::{generate_synthetic_corpus, SyntheticSpec};
use pesentinel::feature_selection::select_top;

fn main() {
    let matrix = generate_synthetic_corpus(&SyntheticSpec::default())
        .unwrap()
        .to_matrix()
        .unwrap();
    let retained = select_top(&matrix, 0.8).unwrap().retained;
    let forest = train_forest(&matrix, &retained, &ForestConfig::default()).unwrap();

    let model_path = std::env::temp_dir().join("pesentinel_gateway_example_model.json");
    save_model(
        &TrainedModel::Forest(forest),
        &matrix.vocabulary,
        "gateway example",
        &model_path,
    )
    .unwrap();

    let bind = "127.0.0.1:8080".parse().unwrap();
    println!("serving on http://{bind} (Ctrl-C to stop)");
    pesentinel::service::serve(&model_path, bind).unwrap();
}
