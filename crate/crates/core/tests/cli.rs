mod support;

use std::path::Path;
use std::process::{Command, Output};

use facetrec::synth::SynthConfig;

fn facetrec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_facetrec"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn error_line(out: &Output) -> String {
    assert!(!out.status.success());
    let stderr = String::from_utf8(out.stderr.clone()).unwrap();
    stderr.lines().last().unwrap_or_default().to_string()
}

fn small_fixture(dir: &Path) -> String {
    let cfg = SynthConfig {
        seed: 21,
        authors: 80,
        ..Default::default()
    };
    support::write_synthetic(dir, &cfg, 4)
        .to_str()
        .unwrap()
        .to_string()
}

fn read(p: impl AsRef<Path>) -> String {
    std::fs::read_to_string(p).unwrap()
}

#[test]
fn run_writes_reproducible_reports() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_fixture(dir.path());
    let stdout = ok(&facetrec(&["run", &config]));
    let out = dir.path().join("out");
    assert_eq!(stdout, read(out.join("report.txt")));
    let csv = read(out.join("report.csv"));
    let manifest = read(out.join("manifest.toml"));
    assert!(csv.starts_with("model,facet,fold,f1\n"));
    // 4 models x 10 facets x (4 folds + mean) + 4 x (overall + wins)
    assert_eq!(csv.lines().count(), 1 + 4 * 10 * 5 + 4 * 2);
    assert!(manifest.contains("seed = 21"));
    assert!(manifest.contains("folds = 4"));
    assert!(manifest.contains("training folds only"));

    let again = dir.path().join("again");
    ok(&facetrec(&[
        "run",
        &config,
        "--out",
        again.to_str().unwrap(),
        "--jobs",
        "3",
    ]));
    assert_eq!(read(again.join("report.csv")), csv);
    assert_eq!(read(again.join("report.txt")), stdout);

    // `report` re-renders the same table, minus the notes.
    let csv_path = out.join("report.csv");
    let table = ok(&facetrec(&["report", csv_path.to_str().unwrap()]));
    let body: String = stdout
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect();
    assert_eq!(table, body);
    let csv_again = ok(&facetrec(&[
        "report",
        csv_path.to_str().unwrap(),
        "--format",
        "csv",
    ]));
    assert_eq!(csv_again, csv);
}

#[test]
fn flags_override_config_values() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_fixture(dir.path());
    let out = dir.path().join("o");
    let out_s = out.to_str().unwrap();
    ok(&facetrec(&[
        "run",
        &config,
        "--folds",
        "3",
        "--seed",
        "5",
        "--smote-k",
        "2",
        "--vocab-size",
        "50",
        "--out",
        out_s,
    ]));
    let csv = read(out.join("report.csv"));
    assert!(csv.lines().any(|l| l.split(',').nth(2) == Some("2")));
    assert!(!csv.lines().any(|l| l.split(',').nth(2) == Some("3")));
    let manifest = read(out.join("manifest.toml"));
    for needle in ["folds = 3", "seed = 5", "k = 2", "vocab_size = 50"] {
        assert!(manifest.contains(needle), "{needle} missing from manifest");
    }
}

#[test]
fn errors_are_single_classified_lines() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_fixture(dir.path());
    let text = read(&config).replace("seed = 21\n", "");
    let no_seed = dir.path().join("no_seed.toml");
    std::fs::write(&no_seed, text).unwrap();
    let out = facetrec(&["run", no_seed.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let line = error_line(&out);
    assert!(line.starts_with("error[config]: "), "{line}");
    assert!(line.contains("seed"));

    let out = facetrec(&["run", dir.path().join("absent.toml").to_str().unwrap()]);
    assert!(error_line(&out).starts_with("error[io]: "));

    let bad = dir.path().join("bad.jsonl");
    let mut lines: Vec<String> = read(dir.path().join("corpus.jsonl"))
        .lines()
        .take(3)
        .map(String::from)
        .collect();
    lines[1] = "{not json".into();
    lines.push(lines[0].clone());
    std::fs::write(&bad, lines.join("\n")).unwrap();
    let out = facetrec(&["validate", "--corpus", bad.to_str().unwrap()]);
    let stderr = String::from_utf8(out.stderr.clone()).unwrap();
    assert!(stderr.contains("line 2"), "{stderr}");
    assert!(stderr.contains("line 4"), "{stderr}");
    let line = error_line(&out);
    assert!(
        line.starts_with("error[validation]: ") && line.contains("2 problem(s)"),
        "{line}"
    );
}

#[test]
fn validate_and_score_summaries() {
    let dir = tempfile::tempdir().unwrap();
    small_fixture(dir.path());
    let corpus = dir.path().join("corpus.jsonl");
    let summary = ok(&facetrec(&[
        "validate",
        "--corpus",
        corpus.to_str().unwrap(),
    ]));
    assert!(summary.contains("authors: 80"));
    assert!(summary.contains("SelfDiscipline"));
    assert!(summary.contains("degenerate facets: none"));

    let scores = ok(&facetrec(&["score", "--corpus", corpus.to_str().unwrap()]));
    let mut rows = csv::Reader::from_reader(scores.as_bytes());
    assert_eq!(rows.headers().unwrap().len(), 16);
    assert_eq!(&rows.headers().unwrap()[6], "Assertiveness");
    let rows: Vec<_> = rows.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 80);
    for r in &rows {
        for v in r.iter().skip(1) {
            let v: f64 = v.parse().unwrap();
            assert!((1.0..=5.0).contains(&v));
        }
    }
}

#[test]
fn train_then_predict() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_fixture(dir.path());
    let corpus = dir.path().join("corpus.jsonl");
    for (name, extra) in [("bow-nb", None), ("cbow-lr", Some("cbow.vec"))] {
        let model = dir.path().join(format!("{name}.json"));
        ok(&facetrec(&[
            "train",
            &config,
            "--model",
            name,
            "--facet",
            "Anxiety",
            "--out",
            model.to_str().unwrap(),
        ]));
        let mut args = vec![
            "predict",
            "--model",
            model.to_str().unwrap(),
            "--corpus",
            corpus.to_str().unwrap(),
        ];
        let emb = extra.map(|f| dir.path().join(f));
        if let Some(e) = &emb {
            args.extend(["--embeddings", e.to_str().unwrap()]);
        }
        let text = ok(&facetrec(&args));
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "author_id,label,score");
        assert_eq!(lines.len(), 81);
        assert!(lines[1..]
            .iter()
            .all(|l| l.contains(",0,") || l.contains(",1,")));
    }
    // An embedding model refuses a different embedding file.
    let model = dir.path().join("cbow-lr.json");
    let skip = dir.path().join("skip.vec");
    let out = facetrec(&[
        "predict",
        "--model",
        model.to_str().unwrap(),
        "--corpus",
        corpus.to_str().unwrap(),
        "--embeddings",
        skip.to_str().unwrap(),
    ]);
    assert!(error_line(&out).starts_with("error[data]: "));

    let out = facetrec(&[
        "train", &config, "--model", "nope", "--facet", "Anxiety", "--out", "x.json",
    ]);
    assert!(error_line(&out).starts_with("error[config]: "));
    let out = facetrec(&[
        "train", &config, "--model", "bow-nb", "--facet", "Bravery", "--out", "x.json",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn synth_subcommand_writes_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    ok(&facetrec(&[
        "synth",
        "--seed",
        "3",
        "--authors",
        "30",
        "--balanced",
        "--out",
        d,
    ]));
    for f in ["corpus.jsonl", "skip.vec", "cbow.vec", "experiment.toml"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    assert_eq!(read(dir.path().join("corpus.jsonl")).lines().count(), 30);
    let out = facetrec(&["synth", "--seed", "3", "--signal", "2", "--out", d]);
    assert!(error_line(&out).starts_with("error[config]: "));
}
