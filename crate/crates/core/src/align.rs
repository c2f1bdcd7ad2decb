//! Boundary-level F1 alignment between segmentations and gold morphology.
//!
//! For a word `w` with gold boundary sets `G(w)`, a segmentation scores
//! `phi = max over g in G(w) of F1(boundaries, g)`. Reports aggregate the
//! deterministic score, the expected score under merge dropout and the best
//! score among sampled segmentations seen at least `k` times.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::bpe::TokenizerModel;
use crate::error::{Error, Result};
use crate::gold::{boundaries_of_units, BoundarySet, GoldLexicon};
use crate::par::{self, Exec};
use crate::sampling::{key_of, sample_distribution_with, units_of, SegmentationDistribution};
use crate::seed;

/// Boundary F1. Both sets empty scores 1, exactly one empty scores 0.
pub fn boundary_f1(pred: &BoundarySet, gold: &BoundarySet) -> f64 {
    match (pred.is_empty(), gold.is_empty()) {
        (true, true) => 1.0,
        (true, false) | (false, true) => 0.0,
        (false, false) => {
            let tp = pred.intersection_len(gold);
            // 2PR / (P + R) with P = tp/|pred|, R = tp/|gold|
            (2 * tp) as f64 / (pred.len() + gold.len()) as f64
        }
    }
}

/// Score against the best-matching gold set.
pub fn phi<'a>(pred: &BoundarySet, gold_sets: impl IntoIterator<Item = &'a BoundarySet>) -> Result<f64> {
    gold_sets
        .into_iter()
        .map(|g| boundary_f1(pred, g))
        .reduce(f64::max)
        .ok_or_else(|| Error::Contract("phi needs at least one gold boundary set".into()))
}

/// `phi` of a unit sequence for one word.
pub fn phi_units<S: AsRef<str>>(units: &[S], prefix: &str, gold_sets: &BTreeSet<BoundarySet>) -> Result<f64> {
    phi(&boundaries_of_units(units, prefix), gold_sets)
}

fn deterministic_units(model: &TokenizerModel, word: &str) -> Result<Vec<String>> {
    model
        .segment_word(word)
        .map(|u| model.render_units(&u))
        .ok_or_else(|| Error::UnknownWord(word.to_string()))
}

/// Score of the deterministic segmentation.
pub fn f1_reg(model: &TokenizerModel, word: &str, gold_sets: &BTreeSet<BoundarySet>) -> Result<f64> {
    let units = deterministic_units(model, word)?;
    phi_units(&units, model.continuation_prefix(), gold_sets)
}

/// Per-segmentation scores of a distribution, in key order.
fn scored<'d>(
    dist: &'d SegmentationDistribution,
    prefix: &str,
    gold_sets: &BTreeSet<BoundarySet>,
) -> Result<Vec<(&'d str, u64, f64)>> {
    dist.counts
        .iter()
        .map(|(k, &c)| Ok((k.as_str(), c, phi_units(&units_of(k), prefix, gold_sets)?)))
        .collect()
}

/// Count-weighted mean of `phi`, kept inside the range of observed scores.
pub fn expected_phi(dist: &SegmentationDistribution, prefix: &str, gold_sets: &BTreeSet<BoundarySet>) -> Result<f64> {
    let rows = scored(dist, prefix, gold_sets)?;
    if rows.is_empty() || dist.total_samples == 0 {
        return Err(Error::Contract("empty distribution".into()));
    }
    let n = dist.total_samples as f64;
    let mean: f64 = rows.iter().map(|&(_, c, s)| (c as f64 / n) * s).sum();
    let lo = rows.iter().map(|r| r.2).fold(f64::INFINITY, f64::min);
    let hi = rows.iter().map(|r| r.2).fold(f64::NEG_INFINITY, f64::max);
    Ok(mean.clamp(lo, hi))
}

/// Expected score over `n` dropout samples.
pub fn f1_drop(
    model: &TokenizerModel,
    word: &str,
    gold_sets: &BTreeSet<BoundarySet>,
    p: f64,
    n: u64,
    seed: u64,
) -> Result<f64> {
    let dist = sample_distribution_with(Exec::default(), model, word, p, n, seed)?;
    expected_phi(&dist, model.continuation_prefix(), gold_sets)
}

/// Best score among segmentations observed at least `k` times; `None` when
/// nothing reaches `k`.
pub fn best_geq(
    dist: &SegmentationDistribution,
    prefix: &str,
    gold_sets: &BTreeSet<BoundarySet>,
    k: u64,
) -> Result<Option<f64>> {
    let kept = dist.filter_by_count(k)?;
    let mut best: Option<f64> = None;
    for (key, _) in kept {
        let s = phi_units(&units_of(key), prefix, gold_sets)?;
        best = Some(best.map_or(s, |b| b.max(s)));
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultiTokenStats {
    pub fraction: f64,
    pub multi_token: usize,
    pub scored: usize,
    pub unknown: usize,
}

/// Share of word types the deterministic encoder splits into two or more
/// units. Unknown words are left out of both counts.
pub fn multi_token_fraction<'a>(
    model: &TokenizerModel,
    words: impl IntoIterator<Item = &'a str>,
) -> Result<MultiTokenStats> {
    let types: BTreeSet<&str> = words.into_iter().collect();
    if types.is_empty() {
        return Err(Error::Data("empty word list".into()));
    }
    let (mut multi, mut scored, mut unknown) = (0, 0, 0);
    for w in types {
        match model.segment_word(w) {
            Some(units) => {
                scored += 1;
                if units.len() >= 2 {
                    multi += 1;
                }
            }
            None => unknown += 1,
        }
    }
    if scored == 0 {
        return Err(Error::Data(format!("all {unknown} words encode to the unknown token")));
    }
    Ok(MultiTokenStats {
        fraction: multi as f64 / scored as f64,
        multi_token: multi,
        scored,
        unknown,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregation {
    /// Every word type counts once.
    #[default]
    Macro,
    /// Words weighted by corpus frequency.
    FrequencyWeighted,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalConfig {
    pub p: f64,
    pub samples: u64,
    pub seed: u64,
    pub thresholds: Vec<u64>,
    pub aggregation: Aggregation,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            p: 0.1,
            samples: 2000,
            seed: 0,
            thresholds: vec![100, 10],
            aggregation: Aggregation::Macro,
            exec: Exec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordAlignmentRecord {
    pub word: String,
    pub n_gold_sets: usize,
    pub f1_reg: f64,
    pub f1_drop: f64,
    /// Threshold -> best score among segmentations seen at least that often.
    pub best_geq: BTreeMap<u64, Option<f64>>,
    /// Best score over every observed segmentation.
    pub max_phi: f64,
    pub n_unique_segmentations: usize,
    pub n_samples: u64,
    /// The deterministic segmentation and how often sampling produced it.
    pub regular: String,
    pub regular_count: u64,
    pub weight: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSummary {
    pub k: u64,
    /// Mean over words where the score is present.
    pub mean_present: Option<f64>,
    /// Mean over all words with absent scores counted as 0.
    pub mean_zero_filled: f64,
    pub absent: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub language: String,
    pub tokenizer: String,
    pub aggregation: Aggregation,
    pub p: f64,
    pub samples: u64,
    pub seed: u64,
    pub word_count: usize,
    pub skipped: usize,
    pub mean_regular: f64,
    pub mean_dropout: f64,
    pub best_geq: Vec<ThresholdSummary>,
    pub multi_token_fraction: f64,
}

fn score_word(
    model: &TokenizerModel,
    word: &str,
    gold_sets: &BTreeSet<BoundarySet>,
    cfg: &EvalConfig,
    weight: u64,
) -> Result<WordAlignmentRecord> {
    let prefix = model.continuation_prefix();
    let regular_units = deterministic_units(model, word)?;
    let f1_reg = phi_units(&regular_units, prefix, gold_sets)?;
    let word_seed = seed::derive(cfg.seed, seed::stream_of(word));
    let dist = sample_distribution_with(Exec::Sequential, model, word, cfg.p, cfg.samples, word_seed)?;
    let f1_drop = expected_phi(&dist, prefix, gold_sets)?;
    let max_phi = scored(&dist, prefix, gold_sets)?
        .into_iter()
        .map(|r| r.2)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut best = BTreeMap::new();
    for &k in &cfg.thresholds {
        best.insert(k, best_geq(&dist, prefix, gold_sets, k)?);
    }
    let regular = key_of(&regular_units);
    Ok(WordAlignmentRecord {
        word: word.to_string(),
        n_gold_sets: gold_sets.len(),
        f1_reg,
        f1_drop,
        best_geq: best,
        max_phi,
        n_unique_segmentations: dist.num_unique(),
        n_samples: dist.total_samples,
        regular_count: dist.count_of(&regular),
        regular,
        weight,
    })
}

fn weighted_mean(values: impl Iterator<Item = (f64, f64)>) -> Option<f64> {
    let (mut num, mut den) = (0.0, 0.0);
    for (v, w) in values {
        num += v * w;
        den += w;
    }
    (den > 0.0).then(|| (num / den).clamp(0.0, 1.0))
}

/// Score every lexicon word and aggregate. `frequencies` supplies weights for
/// [`Aggregation::FrequencyWeighted`]; words missing from it weigh 1.
pub fn evaluate_language(
    model: &TokenizerModel,
    lexicon: &GoldLexicon,
    cfg: &EvalConfig,
    tokenizer: &str,
    frequencies: Option<&BTreeMap<String, u64>>,
) -> Result<(AlignmentReport, Vec<WordAlignmentRecord>)> {
    if lexicon.is_empty() {
        return Err(Error::Data("gold lexicon is empty".into()));
    }
    if cfg.thresholds.contains(&0) {
        return Err(Error::Config("thresholds must be at least 1".into()));
    }
    let entries: Vec<(&String, &BTreeSet<BoundarySet>)> = lexicon.entries.iter().collect();
    let results = par::map(cfg.exec, &entries, |(word, gold)| {
        let weight = frequencies.and_then(|f| f.get(*word).copied()).unwrap_or(1);
        score_word(model, word, gold, cfg, weight)
    });
    let mut records = Vec::with_capacity(results.len());
    let mut skipped = 0;
    for r in results {
        match r {
            Ok(rec) => records.push(rec),
            Err(e) if e.is_skip() => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    if records.is_empty() {
        return Err(Error::Data(format!("no scoreable words ({skipped} skipped)")));
    }
    let report = aggregate(model, lexicon, cfg, tokenizer, &records, skipped)?;
    Ok((report, records))
}

/// Aggregate per-word records into a report.
pub fn aggregate(
    model: &TokenizerModel,
    lexicon: &GoldLexicon,
    cfg: &EvalConfig,
    tokenizer: &str,
    records: &[WordAlignmentRecord],
    skipped: usize,
) -> Result<AlignmentReport> {
    let weight = |r: &WordAlignmentRecord| match cfg.aggregation {
        Aggregation::Macro => 1.0,
        Aggregation::FrequencyWeighted => r.weight as f64,
    };
    let mean = |f: &dyn Fn(&WordAlignmentRecord) -> Option<f64>| {
        weighted_mean(records.iter().filter_map(|r| f(r).map(|v| (v, weight(r)))))
    };
    let best_geq = cfg
        .thresholds
        .iter()
        .map(|&k| ThresholdSummary {
            k,
            mean_present: mean(&|r| r.best_geq[&k]),
            mean_zero_filled: mean(&|r| Some(r.best_geq[&k].unwrap_or(0.0))).unwrap_or(0.0),
            absent: records.iter().filter(|r| r.best_geq[&k].is_none()).count(),
        })
        .collect();
    let multi = multi_token_fraction(model, records.iter().map(|r| r.word.as_str()))?;
    Ok(AlignmentReport {
        language: lexicon.language.clone(),
        tokenizer: tokenizer.to_string(),
        aggregation: cfg.aggregation,
        p: cfg.p,
        samples: cfg.samples,
        seed: cfg.seed,
        word_count: records.len(),
        skipped,
        mean_regular: mean(&|r| Some(r.f1_reg)).unwrap_or(0.0),
        mean_dropout: mean(&|r| Some(r.f1_drop)).unwrap_or(0.0),
        best_geq,
        multi_token_fraction: multi.fraction,
    })
}

fn fmt_score(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |v| format!("{v:.6}"))
}

impl AlignmentReport {
    /// Tab-separated summary with one row per absent-score mode:
    /// `language tokenizer mode words skipped Regular Dropout Best>=k...`.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("language\ttokenizer\tbest_mode\twords\tskipped\tRegular\tDropout");
        for t in &self.best_geq {
            out.push_str(&format!("\tBest>={}", t.k));
        }
        out.push('\n');
        for mode in ["exclude-absent", "zero-fill"] {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{:.6}\t{:.6}",
                self.language,
                self.tokenizer,
                mode,
                self.word_count,
                self.skipped,
                self.mean_regular,
                self.mean_dropout
            ));
            for t in &self.best_geq {
                let v = if mode == "zero-fill" {
                    Some(t.mean_zero_filled)
                } else {
                    t.mean_present
                };
                out.push('\t');
                out.push_str(&fmt_score(v));
            }
            out.push('\n');
        }
        out
    }
}

pub fn write_records<W: Write>(records: &[WordAlignmentRecord], mut out: W) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n").map_err(|e| Error::io("<output>", e))?;
    }
    Ok(())
}
