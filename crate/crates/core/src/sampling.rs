//! Empirical distribution of dropout segmentations of a single word.

use std::collections::BTreeMap;
use std::io::Write;

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::bpe::{check_probability, TokenizerModel, TypeId};
use crate::error::{Error, Result};
use crate::par::{self, Exec};
use crate::seed;

/// Separator between units in a distribution key. Words never contain
/// whitespace, so no unit can contain it.
pub const KEY_SEPARATOR: char = ' ';

const BATCH: usize = 256;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentationDistribution {
    pub word: String,
    pub total_samples: u64,
    /// Serialized segmentation -> number of draws that produced it.
    pub counts: BTreeMap<String, u64>,
}

pub fn key_of<S: AsRef<str>>(units: &[S]) -> String {
    let mut key = String::new();
    for (i, u) in units.iter().enumerate() {
        if i > 0 {
            key.push(KEY_SEPARATOR);
        }
        key.push_str(u.as_ref());
    }
    key
}

pub fn units_of(key: &str) -> Vec<&str> {
    key.split(KEY_SEPARATOR).collect()
}

impl SegmentationDistribution {
    /// Build directly from counts; `total_samples` is their sum.
    pub fn from_counts<K: Into<String>>(word: impl Into<String>, counts: impl IntoIterator<Item = (K, u64)>) -> Self {
        let mut map = BTreeMap::new();
        for (k, c) in counts {
            *map.entry(k.into()).or_insert(0) += c;
        }
        Self {
            word: word.into(),
            total_samples: map.values().sum(),
            counts: map,
        }
    }

    pub fn num_unique(&self) -> usize {
        self.counts.len()
    }

    pub fn count_of(&self, key: &str) -> u64 {
        self.counts.get(key).copied().unwrap_or(0)
    }

    /// All entries, most frequent first, ties in key order.
    pub fn sorted(&self) -> Vec<(&str, u64)> {
        let mut v: Vec<(&str, u64)> = self.counts.iter().map(|(k, &c)| (k.as_str(), c)).collect();
        v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        v
    }

    /// Segmentations observed at least `k` times, most frequent first.
    pub fn filter_by_count(&self, k: u64) -> Result<Vec<(&str, u64)>> {
        if k == 0 {
            return Err(Error::Config("count threshold must be at least 1".into()));
        }
        Ok(self.sorted().into_iter().filter(|&(_, c)| c >= k).collect())
    }

    /// Check count conservation and that every key spells the word.
    pub fn validate(&self, prefix: &str) -> Result<()> {
        let sum: u64 = self.counts.values().sum();
        if sum != self.total_samples {
            return Err(Error::Contract(format!(
                "counts sum to {sum}, expected {}",
                self.total_samples
            )));
        }
        for key in self.counts.keys() {
            let spelled: String = units_of(key)
                .iter()
                .enumerate()
                .map(|(i, u)| if i == 0 { u } else { u.strip_prefix(prefix).unwrap_or(u) })
                .collect();
            if spelled != self.word {
                return Err(Error::Contract(format!("{key:?} does not spell {:?}", self.word)));
            }
        }
        Ok(())
    }

    /// One line-delimited JSON record.
    pub fn write_record<W: Write>(&self, mut out: W) -> Result<()> {
        let record = DumpRecord {
            word: &self.word,
            n: self.total_samples,
            segmentations: self.sorted(),
        };
        serde_json::to_writer(&mut out, &record)?;
        out.write_all(b"\n").map_err(|e| Error::io("<output>", e))?;
        Ok(())
    }
}

#[derive(Serialize)]
struct DumpRecord<'a> {
    word: &'a str,
    n: u64,
    segmentations: Vec<(&'a str, u64)>,
}

/// Draw `n` dropout segmentations of `word`. Draw `i` uses the sub-seed
/// `derive(seed, i)`, so the result does not depend on how draws are split
/// across workers.
pub fn sample_distribution(
    model: &TokenizerModel,
    word: &str,
    p: f64,
    n: u64,
    seed: u64,
) -> Result<SegmentationDistribution> {
    sample_distribution_with(Exec::default(), model, word, p, n, seed)
}

pub fn sample_distribution_with(
    exec: Exec,
    model: &TokenizerModel,
    word: &str,
    p: f64,
    n: u64,
    seed: u64,
) -> Result<SegmentationDistribution> {
    let initial = prepare(model, word, p, n)?;
    let batches = (n as usize).div_ceil(BATCH);
    let parts = par::map_range(exec, batches, |b| {
        let start = (b * BATCH) as u64;
        let end = (start + BATCH as u64).min(n);
        count_draws(model, &initial, p, seed, start..end)
    });
    Ok(finish(model, word, n, parts))
}

/// Split the draws into `workers` contiguous shares, count each share on its
/// own, then merge.
pub fn sample_distribution_partitioned(
    model: &TokenizerModel,
    word: &str,
    p: f64,
    n: u64,
    seed: u64,
    workers: usize,
) -> Result<SegmentationDistribution> {
    let initial = prepare(model, word, p, n)?;
    let workers = workers.max(1) as u64;
    let share = n.div_ceil(workers);
    let parts = par::map_range(Exec::Parallel, workers as usize, |w| {
        let start = (w as u64 * share).min(n);
        let end = (start + share).min(n);
        count_draws(model, &initial, p, seed, start..end)
    });
    Ok(finish(model, word, n, parts))
}

fn prepare(model: &TokenizerModel, word: &str, p: f64, n: u64) -> Result<Vec<TypeId>> {
    check_probability("dropout p", p)?;
    if n == 0 {
        return Err(Error::Config("number of samples must be at least 1".into()));
    }
    if word.is_empty() || word.chars().any(char::is_whitespace) {
        return Err(Error::Contract(format!("{word:?} is not a single word")));
    }
    model
        .initial_units(word)
        .ok_or_else(|| Error::UnknownWord(word.to_string()))
}

fn count_draws(
    model: &TokenizerModel,
    initial: &[TypeId],
    p: f64,
    seed: u64,
    draws: std::ops::Range<u64>,
) -> FxHashMap<Vec<TypeId>, u64> {
    let mut counts: FxHashMap<Vec<TypeId>, u64> = FxHashMap::default();
    for i in draws {
        let mut rng = seed::rng(seed::derive(seed, i));
        let units = model.merge_units_dropout(initial.to_vec(), p, &mut rng);
        *counts.entry(units).or_insert(0) += 1;
    }
    counts
}

fn finish(
    model: &TokenizerModel,
    word: &str,
    n: u64,
    parts: Vec<FxHashMap<Vec<TypeId>, u64>>,
) -> SegmentationDistribution {
    let mut merged: FxHashMap<Vec<TypeId>, u64> = FxHashMap::default();
    for part in parts {
        for (k, c) in part {
            *merged.entry(k).or_insert(0) += c;
        }
    }
    let counts = merged
        .into_iter()
        .map(|(units, c)| (key_of(&model.render_units(&units)), c))
        .collect();
    SegmentationDistribution {
        word: word.to_string(),
        total_samples: n,
        counts,
    }
}
