use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn fixture(rel: &str) -> String {
    root().join("fixtures").join(rel).display().to_string()
}

fn data(rel: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests")
        .join(rel)
        .display()
        .to_string()
}

fn morphbpe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_morphbpe"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = morphbpe(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap()
}

fn train(out: &Path, corpus: &str, vocab: &str) {
    ok(&[
        "train",
        "--corpus",
        corpus,
        "--vocab-size",
        vocab,
        "--out",
        out.to_str().unwrap(),
    ]);
}

#[test]
fn training_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = format!("{}=300KB", fixture("en/corpus.txt"));
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    train(&a, &corpus, "3000");
    train(&b, &corpus, "3000");
    for f in ["vocab.txt", "merges.txt"] {
        assert_eq!(read(&a, f), read(&b, f), "{f} differs");
    }
    assert!(read(&a, "merges.txt").lines().count() > 1000);
}

#[test]
fn zero_dropout_matches_regular_column() {
    let tmp = tempfile::tempdir().unwrap();
    let model = tmp.path().join("model");
    train(&model, &format!("{}=200KB", fixture("en/corpus.txt")), "1000");
    let out = tmp.path().join("eval");
    ok(&[
        "align-eval",
        "--model",
        model.to_str().unwrap(),
        "--gold",
        &fixture("en/gold.tsv"),
        "--language",
        "en",
        "--corpus",
        &format!("{}=30KB", fixture("en/corpus.txt")),
        "--dropout-p",
        "0",
        "--samples",
        "100",
        "--out",
        out.to_str().unwrap(),
    ]);
    let report = read(&out, "report.tsv");
    let rows: Vec<Vec<&str>> = report.lines().map(|l| l.split('\t').collect()).collect();
    assert_eq!(rows[0][5..], ["Regular", "Dropout", "Best>=100", "Best>=10"]);
    for row in &rows[1..] {
        assert_eq!(row[5], row[6]);
    }
}

#[test]
fn failures_emit_error_records() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("x");
    let cases: [(&[&str], &str); 4] = [
        (&["train", "--corpus", "/no/such/file.txt", "--vocab-size", "50"], "io"),
        (
            &[
                "sample",
                "--model",
                "/no/model",
                "--words",
                "/no/words",
                "--dropout-p",
                "2",
            ],
            "config",
        ),
        (&["train", "--corpus", "/no/such/file.txt=12XB"], "usage"),
        (&["encode", "--bogus"], "usage"),
    ];
    for (args, kind) in cases {
        let mut args = args.to_vec();
        args.extend(["--out", out.to_str().unwrap()]);
        let res = morphbpe(&args);
        assert!(!res.status.success(), "{args:?}");
        let stderr = String::from_utf8_lossy(&res.stderr);
        let record: serde_json::Value = serde_json::from_str(stderr.trim()).expect("one JSON record");
        assert_eq!(record["error"]["kind"], kind, "{stderr}");
        assert!(!record["error"]["message"].as_str().unwrap().is_empty());
    }
    let missing = morphbpe(&["train", "--corpus", "/no/such/file.txt", "--out", out.to_str().unwrap()]);
    assert!(String::from_utf8_lossy(&missing.stderr).contains("/no/such/file.txt"));
}

#[test]
fn replay_reproduces_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let model = tmp.path().join("model");
    train(&model, &format!("{}=100KB", fixture("de/corpus.txt")), "800");
    let enc = tmp.path().join("enc");
    ok(&[
        "encode",
        "--model",
        model.to_str().unwrap(),
        "--input",
        &data("data/input.txt"),
        "--dropout-p",
        "0.3",
        "--seed",
        "9",
        "--out",
        enc.to_str().unwrap(),
    ]);
    let again = tmp.path().join("again");
    ok(&[
        "replay",
        enc.join("manifest.json").to_str().unwrap(),
        "--out",
        again.to_str().unwrap(),
    ]);
    assert_eq!(read(&enc, "encoded.units.txt"), read(&again, "encoded.units.txt"));
    assert_eq!(read(&enc, "encoded.ids.txt"), read(&again, "encoded.ids.txt"));
}

#[test]
fn synth_is_seeded() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for d in [&a, &b] {
        ok(&[
            "synth",
            "--language",
            "de",
            "--lines",
            "300",
            "--seed",
            "4",
            "--out",
            d.to_str().unwrap(),
        ]);
    }
    assert_eq!(read(&a, "corpus.txt"), read(&b, "corpus.txt"));
    assert_eq!(read(&a, "gold.tsv"), read(&b, "gold.tsv"));
}

/// Full pipeline on the bundled fixtures against frozen outputs. Set
/// `MORPHBPE_BLESS=1` to rewrite the golden files after an intended change.
#[test]
fn pipeline_matches_golden_files() {
    let tmp = tempfile::tempdir().unwrap();
    let t = tmp.path();
    let p = |name: &str| t.join(name).display().to_string();
    let en = format!("{}=60KB", fixture("en/corpus.txt"));
    let de = format!("{}=60KB", fixture("de/corpus.txt"));
    let input = data("data/input.txt");
    ok(&[
        "train",
        "--corpus",
        &en,
        "--vocab-size",
        "500",
        "--seed",
        "3",
        "--out",
        &p("model"),
    ]);
    ok(&[
        "train",
        "--corpus",
        &en,
        "--corpus",
        &de,
        "--vocab-size",
        "500",
        "--out",
        &p("bilingual"),
    ]);
    ok(&[
        "encode",
        "--model",
        &p("model"),
        "--input",
        &input,
        "--dropout-p",
        "0.1",
        "--seed",
        "3",
        "--out",
        &p("encode"),
    ]);
    ok(&[
        "align-eval",
        "--model",
        &p("model"),
        "--gold",
        &fixture("en/gold.tsv"),
        "--language",
        "en",
        "--corpus",
        &format!("{}=3KB", fixture("en/corpus.txt")),
        "--dropout-p",
        "0.1",
        "--samples",
        "500",
        "--thresholds",
        "100,10",
        "--seed",
        "3",
        "--out",
        &p("eval"),
    ]);
    ok(&[
        "inject",
        "--model",
        &p("model"),
        "--gold",
        &fixture("en/gold.tsv"),
        "--input",
        &input,
        "--replace-prob",
        "0.25",
        "--seed",
        "3",
        "--out",
        &p("inject"),
    ]);
    ok(&[
        "inject",
        "--model",
        &p("model"),
        "--gold",
        &fixture("morphynet/eng.derivational.tsv"),
        "--gold-format",
        "morphynet-derivational",
        "--input",
        &input,
        "--seed",
        "3",
        "--out",
        &p("inject-morphynet"),
    ]);
    let manifest: serde_json::Value =
        serde_json::from_str(&read(&t.join("inject-morphynet"), "manifest.json")).unwrap();
    let ingest = &manifest["details"]["ingest"];
    assert_eq!(ingest["rows_read"], 11);
    assert_eq!(ingest["words"], 8);
    assert_eq!(ingest["rows_rejected"]["malformed"], 2);
    assert_eq!(ingest["rows_rejected"]["surface_mismatch"], 1);
    let row = format!("en:{}:{}:{}", p("model"), p("bilingual"), input);
    ok(&["stats", "--row", &row, "--out", &p("stats")]);

    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let bless = std::env::var_os("MORPHBPE_BLESS").is_some();
    let files = [
        "model/vocab.txt",
        "model/merges.txt",
        "encode/encoded.units.txt",
        "encode/encoded.ids.txt",
        "eval/report.tsv",
        "eval/records.jsonl",
        "inject/table.txt",
        "inject/injected.units.txt",
        "inject/injected.ids.txt",
        "stats/multi_token.tsv",
    ];
    for f in files {
        let actual = fs::read_to_string(t.join(f)).unwrap();
        let frozen = golden.join(f.replace('/', "__"));
        if bless {
            fs::write(&frozen, &actual).unwrap();
        } else {
            let expected =
                fs::read_to_string(&frozen).unwrap_or_else(|_| panic!("missing golden {}", frozen.display()));
            assert!(actual == expected, "{f} differs from {}", frozen.display());
        }
    }
}
