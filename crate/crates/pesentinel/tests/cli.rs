//! End-to-end CLI tests: every subcommand through `run_with_writer`,
//! checking output shape and exit codes.

use std::fs;
use std::path::Path;

use pesentinel::cli::run_with_writer;

fn run(args: &[&str]) -> (i32, String) {
    let mut argv = vec!["pesentinel"];
    argv.extend_from_slice(args);
    let mut out = Vec::new();
    let code = run_with_writer(argv, &mut out);
    (code, String::from_utf8(out).unwrap())
}

fn p(path: &Path) -> String {
    path.display().to_string()
}

#[test]
fn full_workflow_synth_ingest_features_train_evaluate_scan() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    let matrix = dir.path().join("matrix.json");
    let csv = dir.path().join("matrix.csv");
    let report = dir.path().join("features.csv");
    let model = dir.path().join("model.json");

    let (code, out) = run(&[
        "synth", "--out", &p(&corpus), "--malware", "30", "--benign", "30",
        "--vocab-size", "40", "--planted", "6", "--seed", "7",
    ]);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("wrote 60 samples"));
    assert_eq!(fs::read_dir(corpus.join("malware")).unwrap().count(), 30);
    assert_eq!(fs::read_dir(corpus.join("benign")).unwrap().count(), 30);

    let (code, out) = run(&[
        "ingest",
        "--malware-dir", &p(&corpus.join("malware")),
        "--benign-dir", &p(&corpus.join("benign")),
        "--matrix", &p(&matrix),
        "--csv", &p(&csv),
    ]);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("ingested 60 samples (30 malware, 30 benign)"));
    let csv_text = fs::read_to_string(&csv).unwrap();
    assert!(csv_text.starts_with("sample,is_virus,"));
    assert_eq!(csv_text.lines().count(), 61);

    let (code, _) = run(&[
        "features", "--matrix", &p(&matrix), "--format", "csv",
        "--output", &p(&report),
    ]);
    assert_eq!(code, 0);
    let report_text = fs::read_to_string(&report).unwrap();
    assert!(report_text.starts_with("FunctionID,FunctionName,InfoGain,InfoGainCorrected"));

    let (code, out) = run(&[
        "train", "--matrix", &p(&matrix), "--model", &p(&model),
        "--trees", "20",
    ]);
    assert_eq!(code, 0, "{out}");
    assert!(model.exists());

    let (code, out) = run(&[
        "evaluate", "--matrix", &p(&matrix), "--trees", "20",
    ]);
    assert_eq!(code, 0, "{out}");
    for row in ["Decision Tree", "Naive Bayes", "Random Forest", "Our Proposed Method"] {
        assert!(out.contains(row), "missing row {row} in:\n{out}");
    }
    assert!(out.contains("Total Instances"));
    assert!(out.contains("Correctly Classified Instances"));

    // Scan two real samples plus one non-PE file: verdict lines ranked by
    // risk, errors last, and exit code 1 because one file failed to parse.
    let sample_a = fs::read_dir(corpus.join("malware")).unwrap().next().unwrap().unwrap().path();
    let sample_b = fs::read_dir(corpus.join("benign")).unwrap().next().unwrap().unwrap().path();
    let junk = dir.path().join("junk.bin");
    fs::write(&junk, b"not a portable executable at all").unwrap();

    let (code, out) = run(&[
        "scan", "--model", &p(&model), &p(&sample_a), &p(&sample_b), &p(&junk),
    ]);
    assert_eq!(code, 1, "{out}");
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[2].contains("ERROR NotExecutable"), "{out}");
    for line in &lines[..2] {
        let fields: Vec<&str> = line.split_whitespace().collect();
        assert_eq!(fields.len(), 3);
        assert_eq!(fields[0].len(), 64);
        assert!(fields[1] == "malware" || fields[1] == "benign");
        let risk: f64 = fields[2].parse().unwrap();
        assert!((0.0..=1.0).contains(&risk));
    }

    let (code, out) = run(&[
        "scan", "--model", &p(&model), "--format", "json-lines", &p(&sample_a),
    ]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(out.trim()).unwrap();
    assert!(v["risk_score"].is_number());
    assert_eq!(v["content_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn manifest_ingest_matches_directory_ingest() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    let (code, _) = run(&[
        "synth", "--out", &p(&corpus), "--malware", "8", "--benign", "8",
        "--vocab-size", "20", "--planted", "4", "--seed", "3",
    ]);
    assert_eq!(code, 0);

    let mut manifest_lines = vec!["# labeled corpus".to_string()];
    for (sub, label) in [("malware", "malware"), ("benign", "benign")] {
        let mut paths: Vec<_> = fs::read_dir(corpus.join(sub))
            .unwrap()
            .map(|e| e.unwrap().path())
            .collect();
        paths.sort();
        manifest_lines.extend(paths.iter().map(|f| format!("{},{label}", f.display())));
    }
    let manifest = dir.path().join("manifest.csv");
    fs::write(&manifest, manifest_lines.join("\n")).unwrap();

    let via_manifest = dir.path().join("a.json");
    let via_dirs = dir.path().join("b.json");
    let (code, out) = run(&["ingest", "--manifest", &p(&manifest), "--matrix", &p(&via_manifest)]);
    assert_eq!(code, 0, "{out}");
    let (code, _) = run(&[
        "ingest",
        "--malware-dir", &p(&corpus.join("malware")),
        "--benign-dir", &p(&corpus.join("benign")),
        "--matrix", &p(&via_dirs),
    ]);
    assert_eq!(code, 0);

    // Same files, same order, so everything except free-text provenance is
    // identical.
    let strip = |path: &Path| {
        let mut v: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
        v.as_object_mut().unwrap().remove("provenance");
        v
    };
    assert_eq!(strip(&via_manifest), strip(&via_dirs));
}

#[test]
fn synth_is_deterministic_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out_dir in [&a, &b] {
        let (code, _) = run(&[
            "synth", "--out", &p(out_dir), "--malware", "5", "--benign", "5",
            "--vocab-size", "15", "--planted", "3", "--seed", "99",
        ]);
        assert_eq!(code, 0);
    }
    for sub in ["malware", "benign"] {
        let mut names: Vec<_> = fs::read_dir(a.join(sub))
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        names.sort();
        assert_eq!(names.len(), 5);
        for name in names {
            assert_eq!(
                fs::read(a.join(sub).join(&name)).unwrap(),
                fs::read(b.join(sub).join(&name)).unwrap(),
                "{sub}/{name:?} differs between runs"
            );
        }
    }
}

#[test]
fn exit_codes_for_usage_and_operational_errors() {
    let (code, _) = run(&["no-such-subcommand"]);
    assert_eq!(code, 2);
    let (code, out) = run(&["--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("ingest"));
    assert!(out.contains("serve"));
    // Missing matrix file is an operational error, not a usage error.
    let (code, _) = run(&["features", "--matrix", "/nonexistent/matrix.json"]);
    assert_eq!(code, 1);
}
