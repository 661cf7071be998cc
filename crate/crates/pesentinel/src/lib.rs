//! pesentinel: static malware triage from PE import tables.
//!
//! The pipeline: parse untrusted PE binaries and mine their imported API
//! functions ([`pe`]), assemble labeled corpora into a binary feature matrix
//! ([`datamine`]), rank functions by information gain and keep the top
//! fraction ([`feature_selection`]), train a from-scratch random forest with
//! decision-tree and naive-Bayes baselines ([`classifiers`]), evaluate with
//! confusion-matrix metrics ([`evaluation`]), and serve verdicts from a
//! gateway scan service ([`service`]) or the CLI ([`cli`]).
//!
//! Every stochastic step is driven by the SplitMix64 generator in [`rng`],
//! so identical seeds give bit-identical models, corpora, and reports.

pub mod classifiers;
pub mod cli;
pub mod datamine;
pub mod evaluation;
pub mod feature_selection;
pub mod hash;
pub mod pe;
pub mod rng;
pub mod scan;
pub mod service;
