//! Command-line entry point covering the whole pipeline: ingest, feature
//! report, training, evaluation, scanning, synthetic corpus generation, and
//! the gateway service.
//!
//! Exit codes: 0 success, 1 operational error, 2 usage error.

use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::classifiers::{
    save_model, train_forest, train_nb, train_tree, ForestConfig, TrainedModel,
};
use crate::datamine::{
    export_hashmap_csv, ingest, ingest_manifest, load_matrix, save_matrix, Label,
};
use crate::evaluation::{
    comparison_table, generate_synthetic_corpus, render_comparison_csv, render_comparison_text,
    ComparisonConfig, SyntheticSpec,
};
use crate::feature_selection::{export_report_csv, select_top};
use crate::pe::ParserLimits;
use crate::scan::{sort_by_risk, Scanner};

#[derive(Parser)]
#[command(
    name = "pesentinel",
    version,
    about = "Static malware triage from PE import tables"
)]
struct Cli {
    /// Worker threads for parallel parsing and training (default: logical cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Text,
    Csv,
    JsonLines,
}

#[derive(Args)]
struct ForestArgs {
    /// Number of trees in the forest.
    #[arg(long, default_value_t = 100)]
    trees: u32,
    /// Bootstrap draw size as a fraction of the training set.
    #[arg(long, default_value_t = 0.632)]
    sample_fraction: f64,
    /// Split candidates per node; 0 means ceil(sqrt(#features)).
    #[arg(long, default_value_t = 0)]
    features_per_split: u32,
    /// Depth cap; unlimited when omitted.
    #[arg(long)]
    max_depth: Option<u32>,
    /// Train on seeded permutations instead of bootstrap samples.
    #[arg(long)]
    no_bootstrap: bool,
}

impl ForestArgs {
    fn to_config(&self, seed: u64) -> ForestConfig {
        ForestConfig {
            n_trees: self.trees,
            sample_fraction: self.sample_fraction,
            features_per_split: self.features_per_split,
            max_depth: self.max_depth,
            seed,
            bootstrap: !self.no_bootstrap,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Parse labeled corpora of PE files into a feature matrix.
    Ingest {
        /// Directory of malware samples; repeatable.
        #[arg(long = "malware-dir")]
        malware_dirs: Vec<PathBuf>,
        /// Directory of benign samples; repeatable.
        #[arg(long = "benign-dir")]
        benign_dirs: Vec<PathBuf>,
        /// Manifest file with one `path,label` per line, instead of directories.
        #[arg(long, conflicts_with_all = ["malware_dirs", "benign_dirs"])]
        manifest: Option<PathBuf>,
        /// Output matrix file.
        #[arg(long)]
        matrix: PathBuf,
        /// Also export the presence table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Rank functions by information gain and report the retained set.
    Features {
        #[arg(long)]
        matrix: PathBuf,
        /// Top fraction of functions to retain.
        #[arg(long, default_value_t = 0.8)]
        fraction: f64,
        #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
        format: OutputFormat,
        /// Write the report here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Train a classifier and write the model file.
    Train {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Top fraction of functions retained before training; 1.0 keeps all.
        #[arg(long, default_value_t = 0.8)]
        fraction: f64,
        #[arg(long, value_enum, default_value_t = ClassifierKind::Forest)]
        classifier: ClassifierKind,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[command(flatten)]
        forest: ForestArgs,
    },
    /// Run the four-way comparison on a shared stratified split.
    Evaluate {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        test_fraction: f64,
        /// Selection fraction for the proposed-pipeline row.
        #[arg(long, default_value_t = 0.8)]
        fraction: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
        format: OutputFormat,
        #[command(flatten)]
        forest: ForestArgs,
    },
    /// Scan files and print verdicts ranked by risk, highest first.
    Scan {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
        format: OutputFormat,
        /// Files to scan.
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Generate a seeded synthetic corpus of real PE files.
    Synth {
        /// Output directory; samples land in `malware/` and `benign/`.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 500)]
        malware: usize,
        #[arg(long, default_value_t = 500)]
        benign: usize,
        #[arg(long, default_value_t = 200)]
        vocab_size: usize,
        /// Number of planted discriminative functions (ids 0..n).
        #[arg(long, default_value_t = 20)]
        planted: usize,
        #[arg(long, default_value_t = 0.9)]
        p_malware: f64,
        #[arg(long, default_value_t = 0.1)]
        p_benign: f64,
        #[arg(long, default_value_t = 0.3)]
        background_p: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Also write the parsed feature matrix here.
        #[arg(long)]
        matrix: Option<PathBuf>,
    },
    /// Run the gateway scan service.
    Serve {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: SocketAddr,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ClassifierKind {
    Forest,
    Tree,
    NaiveBayes,
}

/// Run with `std::env::args`-style arguments, writing reports to `out`.
pub fn run_with_writer<I, S, W>(argv: I, out: &mut W) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
    W: Write,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders --help/--version through the same path.
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = write!(out, "{e}");
            return code;
        }
    };
    if let Some(threads) = cli.threads {
        // Ignored if a global pool already exists (e.g. in tests).
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    match dispatch(cli.command, out) {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            1
        }
    }
}

pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    run_with_writer(argv, &mut lock)
}

fn dispatch<W: Write>(command: Command, out: &mut W) -> Result<i32, String> {
    match command {
        Command::Ingest {
            malware_dirs,
            benign_dirs,
            manifest,
            matrix,
            csv,
        } => {
            let limits = ParserLimits::from_env();
            let m = match manifest {
                Some(path) => ingest_manifest(&path, &limits).map_err(|e| e.to_string())?,
                None => {
                    if malware_dirs.is_empty() && benign_dirs.is_empty() {
                        return Err("no input: pass --malware-dir/--benign-dir or --manifest".into());
                    }
                    let dirs: Vec<(PathBuf, Label)> = malware_dirs
                        .into_iter()
                        .map(|d| (d, Label::Malware))
                        .chain(benign_dirs.into_iter().map(|d| (d, Label::Benign)))
                        .collect();
                    ingest(&dirs, &limits).map_err(|e| e.to_string())?
                }
            };
            save_matrix(&m, &matrix).map_err(|e| e.to_string())?;
            if let Some(csv_path) = csv {
                let mut f = fs::File::create(&csv_path).map_err(|e| e.to_string())?;
                export_hashmap_csv(&m, &mut f).map_err(|e| e.to_string())?;
            }
            let (malware, benign) = m.class_counts();
            writeln!(
                out,
                "ingested {} samples ({malware} malware, {benign} benign), vocabulary {}",
                m.samples.len(),
                m.vocabulary.len()
            )
            .map_err(|e| e.to_string())?;
            Ok(0)
        }
        Command::Features {
            matrix,
            fraction,
            format,
            output,
        } => {
            let m = load_matrix(&matrix).map_err(|e| e.to_string())?;
            let report = select_top(&m, fraction).map_err(|e| e.to_string())?;
            let mut rendered = Vec::new();
            match format {
                OutputFormat::Csv => {
                    export_report_csv(&report, &mut rendered).map_err(|e| e.to_string())?
                }
                OutputFormat::JsonLines => {
                    for s in &report.scores {
                        let line = serde_json::json!({
                            "function_id": s.function_id,
                            "function_name": s.function_name,
                            "info_gain": s.ig,
                            "info_gain_corrected": s.ig_corrected,
                            "retained": report.retained.contains(&s.function_id),
                        });
                        rendered.extend_from_slice(line.to_string().as_bytes());
                        rendered.push(b'\n');
                    }
                }
                OutputFormat::Text => {
                    rendered.extend_from_slice(
                        format!(
                            "label entropy: {:.6} bits; retained {} of {} functions (fraction {})\n",
                            report.label_entropy,
                            report.retained.len(),
                            report.scores.len(),
                            report.fraction
                        )
                        .as_bytes(),
                    );
                    export_report_csv(&report, &mut rendered).map_err(|e| e.to_string())?;
                }
            }
            match output {
                Some(path) => fs::write(&path, rendered).map_err(|e| e.to_string())?,
                None => out.write_all(&rendered).map_err(|e| e.to_string())?,
            }
            Ok(0)
        }
        Command::Train {
            matrix,
            model,
            fraction,
            classifier,
            seed,
            forest,
        } => {
            let m = load_matrix(&matrix).map_err(|e| e.to_string())?;
            let all: Vec<u32> = (0..m.vocabulary.len() as u32).collect();
            let retained = if fraction < 1.0 {
                select_top(&m, fraction).map_err(|e| e.to_string())?.retained
            } else {
                all.clone()
            };
            let trained = match classifier {
                ClassifierKind::Forest => TrainedModel::Forest(
                    train_forest(&m, &retained, &forest.to_config(seed))
                        .map_err(|e| e.to_string())?,
                ),
                ClassifierKind::Tree => TrainedModel::DecisionTree(
                    train_tree(&m, &retained, forest.max_depth.map(|d| d as usize))
                        .map_err(|e| e.to_string())?,
                ),
                ClassifierKind::NaiveBayes => {
                    TrainedModel::NaiveBayes(train_nb(&m, &retained).map_err(|e| e.to_string())?)
                }
            };
            let provenance = format!(
                "trained on {} samples, vocabulary {}, retained {}, selection fraction {}, seed {}",
                m.samples.len(),
                m.vocabulary.len(),
                retained.len(),
                fraction,
                seed
            );
            save_model(&trained, &m.vocabulary, &provenance, &model)
                .map_err(|e| e.to_string())?;
            writeln!(out, "model written to {}", model.display()).map_err(|e| e.to_string())?;
            Ok(0)
        }
        Command::Evaluate {
            matrix,
            test_fraction,
            fraction,
            seed,
            format,
            forest,
        } => {
            let m = load_matrix(&matrix).map_err(|e| e.to_string())?;
            let config = ComparisonConfig {
                test_fraction,
                selection_fraction: fraction,
                forest: forest.to_config(seed),
                max_depth: forest.max_depth,
            };
            let rows = comparison_table(&m, &config, seed).map_err(|e| e.to_string())?;
            match format {
                OutputFormat::Csv => {
                    write!(out, "{}", render_comparison_csv(&rows)).map_err(|e| e.to_string())?
                }
                OutputFormat::JsonLines => {
                    for (name, r) in &rows {
                        let line = serde_json::json!({
                            "algorithm": name,
                            "tp_rate": r.tp_rate(),
                            "fp_rate": r.fp_rate(),
                            "dr": r.dr(),
                            "acy": r.acy(),
                            "counts": {
                                "tp": r.counts.tp, "fp": r.counts.fp,
                                "tn": r.counts.tn, "fn": r.counts.fn_,
                            },
                        });
                        writeln!(out, "{line}").map_err(|e| e.to_string())?;
                    }
                }
                OutputFormat::Text => {
                    write!(out, "{}", render_comparison_text(&rows)).map_err(|e| e.to_string())?;
                    let proposed = &rows.last().expect("four rows").1;
                    writeln!(out).map_err(|e| e.to_string())?;
                    write!(out, "{}", proposed.render_instance_table())
                        .map_err(|e| e.to_string())?;
                }
            }
            Ok(0)
        }
        Command::Scan {
            model,
            format,
            files,
        } => {
            let scanner = Scanner::from_file(&model).map_err(|e| e.to_string())?;
            let mut verdicts = Vec::with_capacity(files.len());
            for path in &files {
                match fs::read(path) {
                    Ok(bytes) => {
                        verdicts.push(scanner.scan_bytes(&bytes, &path.display().to_string()))
                    }
                    Err(e) => return Err(format!("{}: {e}", path.display())),
                }
            }
            sort_by_risk(&mut verdicts);
            let mut had_error = false;
            for v in &verdicts {
                match format {
                    OutputFormat::JsonLines => {
                        writeln!(out, "{}", serde_json::to_string(v).unwrap())
                            .map_err(|e| e.to_string())?;
                    }
                    _ => match (&v.risk_score, &v.error) {
                        (Some(risk), _) => writeln!(out, "{} {} {risk:.4}", v.content_hash, v.label)
                            .map_err(|e| e.to_string())?,
                        (None, Some(code)) => writeln!(out, "{} ERROR {code}", v.content_hash)
                            .map_err(|e| e.to_string())?,
                        (None, None) => unreachable!(),
                    },
                }
                if v.error.is_some() {
                    had_error = true;
                }
            }
            Ok(if had_error { 1 } else { 0 })
        }
        Command::Synth {
            out: out_dir,
            malware,
            benign,
            vocab_size,
            planted,
            p_malware,
            p_benign,
            background_p,
            seed,
            matrix,
        } => {
            let spec = SyntheticSpec {
                n_malware: malware,
                n_benign: benign,
                vocab_size,
                planted: (0..planted as u32).map(|f| (f, p_malware, p_benign)).collect(),
                background_p,
                seed,
            };
            let corpus = generate_synthetic_corpus(&spec).map_err(|e| e.to_string())?;
            corpus.write_pe_files(&out_dir).map_err(|e| e.to_string())?;
            if let Some(matrix_path) = matrix {
                let m = corpus.to_matrix().map_err(|e| e.to_string())?;
                save_matrix(&m, &matrix_path).map_err(|e| e.to_string())?;
            }
            writeln!(
                out,
                "wrote {} samples under {}",
                corpus.samples.len(),
                out_dir.display()
            )
            .map_err(|e| e.to_string())?;
            Ok(0)
        }
        Command::Serve { model, bind } => {
            crate::service::serve(&model, bind).map_err(|e| e.to_string())?;
            Ok(0)
        }
    }
}
