//! Reproducible runs: every command writes its outputs plus a
//! `manifest.json` holding the full configuration, the seed and digests of
//! all inputs and outputs. [`replay`] re-executes a manifest.

mod mixture;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use mixture::{build_mixture, parse_budget, stream_mixture, CorpusSource, MixtureEntry};

use crate::align::{self, Aggregation, EvalConfig};
use crate::bpe::{self, io as model_io, ModelSettings, TrainerConfig};
use crate::error::{Error, Result};
use crate::gold::{GoldFormat, GoldLexicon};
use crate::inject::{self, ReplacementTable};
use crate::normalize::{normalize_with, words};
use crate::par::{self, Exec};
use crate::sampling::sample_distribution_with;
use crate::seed;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const DEFAULT_VOCAB_SIZE: usize = 30_000;
pub const DEFAULT_SAMPLES: u64 = 2000;
pub const DEFAULT_PRETRAIN_DROPOUT: f64 = 0.05;
pub const DEFAULT_FINETUNE_DROPOUT: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReportFormat {
    #[default]
    Tsv,
    Records,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRun {
    pub corpus: Vec<CorpusSource>,
    pub vocab_size: usize,
    pub seed: u64,
    #[serde(flatten)]
    pub settings: ModelSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodeRun {
    pub model: PathBuf,
    pub input: PathBuf,
    pub dropout_p: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRun {
    pub model: PathBuf,
    /// Text file; its distinct normalized words are sampled.
    pub words: PathBuf,
    pub dropout_p: f64,
    pub samples: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignEvalRun {
    pub model: PathBuf,
    pub gold: PathBuf,
    pub gold_format: GoldFormat,
    pub language: String,
    /// Task corpus whose word types restrict the lexicon; none keeps it whole.
    pub corpus: Vec<CorpusSource>,
    pub dropout_p: f64,
    pub samples: u64,
    pub thresholds: Vec<u64>,
    pub aggregation: Aggregation,
    pub format: ReportFormat,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectRun {
    pub model: PathBuf,
    pub gold: PathBuf,
    pub gold_format: GoldFormat,
    pub input: PathBuf,
    pub replace_prob: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsRow {
    pub language: String,
    pub monolingual: PathBuf,
    pub bilingual: PathBuf,
    /// Text file whose distinct words are counted.
    pub words: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsRun {
    pub rows: Vec<StatsRow>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum RunConfig {
    Train(TrainRun),
    Encode(EncodeRun),
    Sample(SampleRun),
    AlignEval(AlignEvalRun),
    Inject(InjectRun),
    Stats(StatsRun),
}

impl RunConfig {
    pub fn seed(&self) -> u64 {
        match self {
            RunConfig::Train(c) => c.seed,
            RunConfig::Encode(c) => c.seed,
            RunConfig::Sample(c) => c.seed,
            RunConfig::AlignEval(c) => c.seed,
            RunConfig::Inject(c) => c.seed,
            RunConfig::Stats(c) => c.seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let prob = |name: &str, p: f64| bpe::check_probability(name, p);
        match self {
            RunConfig::Train(c) => {
                if c.corpus.is_empty() {
                    return Err(Error::Config("train needs at least one --corpus".into()));
                }
                c.settings.validate().map(|_| ())
            }
            RunConfig::Encode(c) => prob("dropout p", c.dropout_p),
            RunConfig::Sample(c) => {
                prob("dropout p", c.dropout_p)?;
                positive_samples(c.samples)
            }
            RunConfig::AlignEval(c) => {
                prob("dropout p", c.dropout_p)?;
                positive_samples(c.samples)?;
                if c.thresholds.contains(&0) {
                    return Err(Error::Config("thresholds must be at least 1".into()));
                }
                Ok(())
            }
            RunConfig::Inject(c) => prob("replacement probability", c.replace_prob),
            RunConfig::Stats(c) => {
                if c.rows.is_empty() {
                    return Err(Error::Config("stats needs at least one row".into()));
                }
                Ok(())
            }
        }
    }
}

fn positive_samples(n: u64) -> Result<()> {
    if n == 0 {
        Err(Error::Config("--samples must be at least 1".into()))
    } else {
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub config: RunConfig,
    pub inputs: Vec<FileDigest>,
    /// Output paths are relative to the run directory.
    pub outputs: Vec<FileDigest>,
    pub details: serde_json::Value,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

pub fn digest_file(path: &Path) -> Result<FileDigest> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(FileDigest {
        path: path.to_path_buf(),
        bytes: bytes.len() as u64,
        sha256: hex_digest(&bytes),
    })
}

fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

struct Outputs<'a> {
    dir: &'a Path,
    written: Vec<FileDigest>,
}

impl<'a> Outputs<'a> {
    fn new(dir: &'a Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Self {
            dir,
            written: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, contents: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
        self.written.push(FileDigest {
            path: PathBuf::from(name),
            bytes: contents.len() as u64,
            sha256: hex_digest(contents),
        });
        Ok(())
    }
}

fn read_text(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    String::from_utf8(bytes).map_err(|e| Error::Encoding {
        offset: e.utf8_error().valid_up_to(),
        message: format!("{}: {}", path.display(), e.utf8_error()),
    })
}

/// Distinct normalized words of a text, with their frequencies.
pub fn word_frequencies<'a>(lines: impl IntoIterator<Item = &'a str>, lowercase: bool) -> BTreeMap<String, u64> {
    let mut counts = BTreeMap::new();
    for line in lines {
        let norm = normalize_with(line, lowercase);
        for w in words(&norm) {
            *counts.entry(w.to_string()).or_insert(0) += 1;
        }
    }
    counts
}

fn to_json_line<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec(value)?;
    v.push(b'\n');
    Ok(v)
}

/// Execute a run, writing outputs and `manifest.json` into `out`.
pub fn run(config: &RunConfig, out: &Path) -> Result<Manifest> {
    config.validate()?;
    let mut outputs = Outputs::new(out)?;
    let (inputs, details) = match config {
        RunConfig::Train(c) => run_train(c, &mut outputs)?,
        RunConfig::Encode(c) => run_encode(c, &mut outputs)?,
        RunConfig::Sample(c) => run_sample(c, &mut outputs)?,
        RunConfig::AlignEval(c) => run_align_eval(c, &mut outputs)?,
        RunConfig::Inject(c) => run_inject(c, &mut outputs)?,
        RunConfig::Stats(c) => run_stats(c, &mut outputs)?,
    };
    let manifest = Manifest {
        tool: "morphbpe".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        seed: config.seed(),
        config: config.clone(),
        inputs: inputs.iter().map(|p| digest_file(p)).collect::<Result<_>>()?,
        outputs: outputs.written,
        details,
    };
    let mut text = serde_json::to_vec_pretty(&manifest)?;
    text.push(b'\n');
    let path = out.join(MANIFEST_FILE);
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

/// Re-run a manifest's configuration into `out`. Fails if any input changed
/// since the manifest was written.
pub fn replay(manifest: &Manifest, out: &Path) -> Result<Manifest> {
    for input in &manifest.inputs {
        let now = digest_file(&input.path)?;
        if now.sha256 != input.sha256 {
            return Err(Error::Data(format!(
                "input {} changed since the manifest was written",
                input.path.display()
            )));
        }
    }
    run(&manifest.config, out)
}

fn model_inputs(dir: &Path) -> Vec<PathBuf> {
    vec![dir.join(model_io::VOCAB_FILE), dir.join(model_io::MERGES_FILE)]
}

fn run_train(c: &TrainRun, out: &mut Outputs) -> Result<(Vec<PathBuf>, serde_json::Value)> {
    let mut counts = BTreeMap::new();
    let mixture = stream_mixture(&c.corpus, |line| {
        let norm = normalize_with(line, c.settings.lowercase);
        for w in words(&norm) {
            *counts.entry(w.to_string()).or_insert(0u64) += 1;
        }
    })?;
    let trainer = TrainerConfig {
        vocab_size: c.vocab_size,
        settings: c.settings.clone(),
    };
    let model = trainer.train_from_counts(&counts)?;
    out.write(model_io::VOCAB_FILE, model_io::vocab_to_string(&model).as_bytes())?;
    out.write(model_io::MERGES_FILE, model_io::merges_to_string(&model).as_bytes())?;
    log::info!(
        "trained {} merges, {} tokens from {} word types",
        model.num_merges(),
        model.vocab_size(),
        counts.len()
    );
    let details = serde_json::json!({
        "mixture": mixture,
        "word_types": counts.len(),
        "alphabet": model.alphabet_len(),
        "merges": model.num_merges(),
        "vocab_tokens": model.vocab_size(),
        "unit_inventory": model.unit_inventory_size(),
    });
    Ok((c.corpus.iter().map(|s| s.path.clone()).collect(), details))
}

fn run_encode(c: &EncodeRun, out: &mut Outputs) -> Result<(Vec<PathBuf>, serde_json::Value)> {
    let model = model_io::load(&c.model)?;
    let text = read_text(&c.input)?;
    let lines: Vec<&str> = text.lines().collect();
    let encoded = par::map_range(Exec::default(), lines.len(), |i| {
        let line = lines[i];
        if c.dropout_p == 0.0 {
            Ok(model.encode_deterministic(line))
        } else {
            let mut rng = seed::rng(seed::derive(c.seed, i as u64));
            model.encode_dropout_with_rng(line, c.dropout_p, &mut rng)
        }
    });
    let (mut units, mut ids) = (String::new(), String::new());
    let mut unknown = 0usize;
    for seg in encoded {
        let seg = seg?;
        unknown += seg.is_unknown.iter().filter(|&&u| u).count();
        units.push_str(&seg.units.join(" "));
        units.push('\n');
        ids.push_str(&inject::ids_line(&model, &seg)?);
        ids.push('\n');
    }
    out.write("encoded.units.txt", units.as_bytes())?;
    out.write("encoded.ids.txt", ids.as_bytes())?;
    let mut inputs = model_inputs(&c.model);
    inputs.push(c.input.clone());
    Ok((
        inputs,
        serde_json::json!({ "lines": lines.len(), "unknown_units": unknown }),
    ))
}

fn run_sample(c: &SampleRun, out: &mut Outputs) -> Result<(Vec<PathBuf>, serde_json::Value)> {
    let model = model_io::load(&c.model)?;
    let text = read_text(&c.words)?;
    let freqs = word_frequencies(text.lines(), model.lowercase());
    let word_list: Vec<&String> = freqs.keys().collect();
    let results = par::map(Exec::default(), &word_list, |w| {
        let word_seed = seed::derive(c.seed, seed::stream_of(w));
        sample_distribution_with(Exec::Sequential, &model, w, c.dropout_p, c.samples, word_seed)
    });
    let mut dump = Vec::new();
    let mut skipped = Vec::new();
    for (w, r) in word_list.iter().zip(results) {
        match r {
            Ok(d) => d.write_record(&mut dump)?,
            Err(e) if e.is_skip() => skipped.push(w.as_str()),
            Err(e) => return Err(e),
        }
    }
    out.write("distributions.jsonl", &dump)?;
    let mut sk = skipped.join("\n");
    if !sk.is_empty() {
        sk.push('\n');
    }
    out.write("skipped.txt", sk.as_bytes())?;
    let mut inputs = model_inputs(&c.model);
    inputs.push(c.words.clone());
    Ok((
        inputs,
        serde_json::json!({ "words": word_list.len() - skipped.len(), "skipped": skipped.len() }),
    ))
}

fn run_align_eval(c: &AlignEvalRun, out: &mut Outputs) -> Result<(Vec<PathBuf>, serde_json::Value)> {
    let model = model_io::load(&c.model)?;
    let (lexicon, ingest) = GoldLexicon::load(&c.gold, c.gold_format, &c.language)?;
    let (lexicon, overlap, freqs) = if c.corpus.is_empty() {
        (lexicon, None, None)
    } else {
        let (lines, _) = build_mixture(&c.corpus)?;
        let freqs = word_frequencies(lines.iter().map(String::as_str), model.lowercase());
        let (sub, overlap) = lexicon.intersect_vocabulary(freqs.keys().map(String::as_str));
        (sub, Some(overlap), Some(freqs))
    };
    let cfg = EvalConfig {
        p: c.dropout_p,
        samples: c.samples,
        seed: c.seed,
        thresholds: c.thresholds.clone(),
        aggregation: c.aggregation,
        exec: Exec::default(),
    };
    let tokenizer = c
        .model
        .file_name()
        .map_or_else(|| c.model.display().to_string(), |n| n.to_string_lossy().into_owned());
    let (report, records) = align::evaluate_language(&model, &lexicon, &cfg, &tokenizer, freqs.as_ref())?;
    let mut rec = Vec::new();
    align::write_records(&records, &mut rec)?;
    out.write("records.jsonl", &rec)?;
    match c.format {
        ReportFormat::Tsv => out.write("report.tsv", report.to_tsv().as_bytes())?,
        ReportFormat::Records => out.write("report.jsonl", &to_json_line(&report)?)?,
    }
    let mut inputs = model_inputs(&c.model);
    inputs.push(c.gold.clone());
    inputs.extend(c.corpus.iter().map(|s| s.path.clone()));
    Ok((inputs, serde_json::json!({ "ingest": ingest, "overlap": overlap })))
}

fn run_inject(c: &InjectRun, out: &mut Outputs) -> Result<(Vec<PathBuf>, serde_json::Value)> {
    let model = model_io::load(&c.model)?;
    let (lexicon, ingest) = GoldLexicon::load(&c.gold, c.gold_format, "")?;
    let (table, stats) = ReplacementTable::build(&model, &lexicon);
    out.write("table.txt", table.to_text().as_bytes())?;
    let text = read_text(&c.input)?;
    let lines: Vec<&str> = text.lines().collect();
    let injected = par::map_range(Exec::default(), lines.len(), |i| {
        inject::inject(&model, &table, lines[i], c.replace_prob, seed::derive(c.seed, i as u64))
    });
    let (mut units, mut ids) = (String::new(), String::new());
    let (mut eligible, mut replaced) = (0usize, 0usize);
    for r in injected {
        let r = r?;
        eligible += r.eligible;
        replaced += r.replaced;
        units.push_str(&r.segmentation.units.join(" "));
        units.push('\n');
        ids.push_str(&inject::ids_line(&model, &r.segmentation)?);
        ids.push('\n');
    }
    out.write("injected.units.txt", units.as_bytes())?;
    out.write("injected.ids.txt", ids.as_bytes())?;
    let mut inputs = model_inputs(&c.model);
    inputs.push(c.gold.clone());
    inputs.push(c.input.clone());
    Ok((
        inputs,
        serde_json::json!({
            "ingest": ingest,
            "table": stats,
            "eligible_occurrences": eligible,
            "replaced_occurrences": replaced,
        }),
    ))
}

fn run_stats(c: &StatsRun, out: &mut Outputs) -> Result<(Vec<PathBuf>, serde_json::Value)> {
    let mut table = String::from("language\tmonolingual %\tbilingual %\n");
    let mut inputs = Vec::new();
    let mut details = Vec::new();
    for row in &c.rows {
        let mono = model_io::load(&row.monolingual)?;
        let bi = model_io::load(&row.bilingual)?;
        let text = read_text(&row.words)?;
        let types: BTreeSet<String> = word_frequencies(text.lines(), mono.lowercase()).into_keys().collect();
        let m = align::multi_token_fraction(&mono, types.iter().map(String::as_str))?;
        let b = align::multi_token_fraction(&bi, types.iter().map(String::as_str))?;
        table.push_str(&format!(
            "{}\t{:.2}\t{:.2}\n",
            row.language,
            100.0 * m.fraction,
            100.0 * b.fraction
        ));
        details.push(serde_json::json!({ "language": row.language, "monolingual": m, "bilingual": b }));
        inputs.extend(model_inputs(&row.monolingual));
        inputs.extend(model_inputs(&row.bilingual));
        inputs.push(row.words.clone());
    }
    out.write("multi_token.tsv", table.as_bytes())?;
    Ok((inputs, serde_json::Value::Array(details)))
}

/// Write a machine-readable error record.
pub fn write_error_record<W: Write>(err: &Error, mut w: W) -> std::io::Result<()> {
    let record = serde_json::json!({ "error": { "kind": err.kind(), "message": err.to_string() } });
    writeln!(w, "{record}")
}
