use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use morphbpe::align::Aggregation;
use morphbpe::bpe::ModelSettings;
use morphbpe::gold::GoldFormat;
use morphbpe::pipeline::{
    self, AlignEvalRun, CorpusSource, EncodeRun, InjectRun, Manifest, ReportFormat, RunConfig, SampleRun, StatsRow,
    StatsRun, TrainRun,
};
use morphbpe::synthetic::{SyntheticLanguage, ENGLISH_LIKE, GERMAN_LIKE};
use morphbpe::{Error, Result};

#[derive(Parser)]
#[command(
    name = "morphbpe",
    version,
    about = "BPE tokenizer training, dropout sampling and morphological alignment"
)]
struct Cli {
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a tokenizer on a byte-budgeted corpus mixture.
    Train(TrainArgs),
    /// Encode a text file line by line, optionally with merge dropout.
    Encode(EncodeArgs),
    /// Sample segmentation distributions for the words of a file.
    Sample(SampleArgs),
    /// Score segmentations against a gold morphology lexicon.
    AlignEval(AlignEvalArgs),
    /// Encode text with morphology-aligned replacements.
    Inject(InjectArgs),
    /// Multi-token word fractions for monolingual and bilingual tokenizers.
    Stats(StatsArgs),
    /// Write a synthetic corpus and its gold lexicon.
    Synth(SynthArgs),
    /// Re-run a manifest.
    Replay(ReplayArgs),
}

#[derive(Args)]
struct Common {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// `path=BUDGET`, e.g. `en.txt=100MB`; repeatable, read in order.
    #[arg(long, required = true)]
    corpus: Vec<CorpusSource>,
    #[arg(long, default_value_t = pipeline::DEFAULT_VOCAB_SIZE)]
    vocab_size: usize,
    /// Keep case instead of lowercasing.
    #[arg(long)]
    cased: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct EncodeArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    dropout_p: f64,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    words: PathBuf,
    #[arg(long, default_value_t = pipeline::DEFAULT_FINETUNE_DROPOUT)]
    dropout_p: f64,
    #[arg(long, default_value_t = pipeline::DEFAULT_SAMPLES)]
    samples: u64,
    #[command(flatten)]
    common: Common,
}

#[derive(Clone, Copy, ValueEnum)]
enum AggregationArg {
    Macro,
    FrequencyWeighted,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Tsv,
    Records,
}

#[derive(Args)]
struct AlignEvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    gold: PathBuf,
    #[arg(long, default_value = "canonical")]
    gold_format: GoldFormat,
    #[arg(long, default_value = "")]
    language: String,
    /// Restrict the lexicon to word types of this corpus; repeatable.
    #[arg(long)]
    corpus: Vec<CorpusSource>,
    #[arg(long, default_value_t = pipeline::DEFAULT_FINETUNE_DROPOUT)]
    dropout_p: f64,
    #[arg(long, default_value_t = pipeline::DEFAULT_SAMPLES)]
    samples: u64,
    #[arg(long, value_delimiter = ',', default_values_t = [100, 10])]
    thresholds: Vec<u64>,
    #[arg(long, value_enum, default_value_t = AggregationArg::Macro)]
    aggregation: AggregationArg,
    #[arg(long, value_enum, default_value_t = FormatArg::Tsv)]
    format: FormatArg,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct InjectArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    gold: PathBuf,
    #[arg(long, default_value = "canonical")]
    gold_format: GoldFormat,
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = morphbpe::inject::DEFAULT_REPLACE_PROB)]
    replace_prob: f64,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct StatsArgs {
    /// `LANG:MONO_MODEL:BILINGUAL_MODEL:WORDS_FILE`; repeatable.
    #[arg(long = "row", required = true, value_parser = parse_row)]
    rows: Vec<StatsRow>,
    #[command(flatten)]
    common: Common,
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthLanguage {
    En,
    De,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_enum)]
    language: SynthLanguage,
    #[arg(long, default_value_t = 10_000)]
    lines: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct ReplayArgs {
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn parse_row(s: &str) -> std::result::Result<StatsRow, String> {
    let parts: Vec<&str> = s.splitn(4, ':').collect();
    match parts[..] {
        [language, mono, bi, words] => Ok(StatsRow {
            language: language.to_string(),
            monolingual: mono.into(),
            bilingual: bi.into(),
            words: words.into(),
        }),
        _ => Err(format!("expected LANG:MONO:BILINGUAL:WORDS, got {s:?}")),
    }
}

fn config_of(command: Command) -> Result<(Option<RunConfig>, PathBuf)> {
    Ok(match command {
        Command::Train(a) => (
            Some(RunConfig::Train(TrainRun {
                corpus: a.corpus,
                vocab_size: a.vocab_size,
                seed: a.common.seed,
                settings: ModelSettings {
                    lowercase: !a.cased,
                    ..ModelSettings::default()
                },
            })),
            a.common.out,
        ),
        Command::Encode(a) => (
            Some(RunConfig::Encode(EncodeRun {
                model: a.model,
                input: a.input,
                dropout_p: a.dropout_p,
                seed: a.common.seed,
            })),
            a.common.out,
        ),
        Command::Sample(a) => (
            Some(RunConfig::Sample(SampleRun {
                model: a.model,
                words: a.words,
                dropout_p: a.dropout_p,
                samples: a.samples,
                seed: a.common.seed,
            })),
            a.common.out,
        ),
        Command::AlignEval(a) => (
            Some(RunConfig::AlignEval(AlignEvalRun {
                model: a.model,
                gold: a.gold,
                gold_format: a.gold_format,
                language: a.language,
                corpus: a.corpus,
                dropout_p: a.dropout_p,
                samples: a.samples,
                thresholds: a.thresholds,
                aggregation: match a.aggregation {
                    AggregationArg::Macro => Aggregation::Macro,
                    AggregationArg::FrequencyWeighted => Aggregation::FrequencyWeighted,
                },
                format: match a.format {
                    FormatArg::Tsv => ReportFormat::Tsv,
                    FormatArg::Records => ReportFormat::Records,
                },
                seed: a.common.seed,
            })),
            a.common.out,
        ),
        Command::Inject(a) => (
            Some(RunConfig::Inject(InjectRun {
                model: a.model,
                gold: a.gold,
                gold_format: a.gold_format,
                input: a.input,
                replace_prob: a.replace_prob,
                seed: a.common.seed,
            })),
            a.common.out,
        ),
        Command::Stats(a) => (
            Some(RunConfig::Stats(StatsRun {
                rows: a.rows,
                seed: a.common.seed,
            })),
            a.common.out,
        ),
        Command::Synth(a) => {
            synth(&a)?;
            (None, a.common.out)
        }
        Command::Replay(a) => {
            let manifest = Manifest::load(&a.manifest)?;
            pipeline::replay(&manifest, &a.out)?;
            (None, a.out)
        }
    })
}

fn synth(a: &SynthArgs) -> Result<()> {
    let spec = match a.language {
        SynthLanguage::En => ENGLISH_LIKE,
        SynthLanguage::De => GERMAN_LIKE,
    };
    let lang = SyntheticLanguage::new(spec);
    let (lines, words) = lang.corpus(a.lines, a.common.seed);
    let out = &a.common.out;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let write = |name: &str, text: String| -> Result<()> {
        let path = out.join(name);
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    };
    let mut text = lines.join("\n");
    text.push('\n');
    write("corpus.txt", text)?;
    write("gold.tsv", lang.gold(&words).to_canonical())
}

fn configure_threads(threads: usize) {
    #[cfg(feature = "parallel")]
    if threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    #[cfg(not(feature = "parallel"))]
    if threads > 1 {
        log::warn!("built without the parallel feature; --threads {threads} is ignored");
    }
}

fn execute(cli: Cli) -> Result<PathBuf> {
    let (config, out) = config_of(cli.command)?;
    if let Some(config) = config {
        pipeline::run(&config, &out)?;
    }
    Ok(out)
}

fn usage_error(e: clap::Error) -> ExitCode {
    use clap::error::ErrorKind;
    if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
        let _ = e.print();
        return ExitCode::SUCCESS;
    }
    let message = e.render().to_string();
    let message = message.lines().next().unwrap_or_default().trim_start_matches("error: ");
    let record = serde_json::json!({ "error": { "kind": "usage", "message": message } });
    eprintln!("{record}");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => return usage_error(e),
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    configure_threads(cli.threads);
    match execute(cli) {
        Ok(out) => {
            log::info!("wrote {}", Path::new(&out).display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            let _ = pipeline::write_error_record(&e, std::io::stderr());
            ExitCode::FAILURE
        }
    }
}
