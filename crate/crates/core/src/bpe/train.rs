//! BPE vocabulary training.
//!
//! Each word type starts as its characters. The most frequent adjacent pair
//! of surface units is merged until the unit inventory reaches the requested
//! size or no pair occurs at least twice. Ties go to the lexicographically
//! smallest `(left, right)` pair.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::model::{ModelSettings, TokenizerModel};
use crate::error::{Error, Result};
use crate::normalize::{normalize_with, words};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainerConfig {
    /// Target size of the unit inventory: special tokens plus distinct
    /// surface units (characters and merge outputs).
    pub vocab_size: usize,
    #[serde(flatten)]
    pub settings: ModelSettings,
}

impl TrainerConfig {
    pub fn new(vocab_size: usize) -> Self {
        Self {
            vocab_size,
            settings: ModelSettings::default(),
        }
    }

    pub fn train<I, S>(&self, corpus: I) -> Result<TokenizerModel>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let counts = count_words(corpus, self.settings.lowercase);
        self.train_from_counts(&counts)
    }

    /// Train from pre-counted normalized word types.
    pub fn train_from_counts(&self, counts: &BTreeMap<String, u64>) -> Result<TokenizerModel> {
        self.settings.validate()?;
        if counts.is_empty() {
            return Err(Error::Data("corpus is empty after normalization".into()));
        }
        let alphabet: BTreeSet<char> = counts.keys().flat_map(|w| w.chars()).collect();
        let floor = alphabet.len() + self.settings.special_tokens.len();
        if self.vocab_size <= floor {
            return Err(Error::Config(format!(
                "vocab_size {} must exceed alphabet ({}) plus special tokens ({})",
                self.vocab_size,
                alphabet.len(),
                self.settings.special_tokens.len()
            )));
        }
        let max_types = self.vocab_size - self.settings.special_tokens.len();
        let merges = learn_merges(counts, &alphabet, max_types, &self.settings);
        TokenizerModel::from_parts(self.settings.clone(), alphabet, merges)
    }
}

/// Train with default special tokens and lowercasing.
pub fn train_bpe<I, S>(
    corpus: I,
    vocab_size: usize,
    special_tokens: &[&str],
    continuation_prefix: &str,
) -> Result<TokenizerModel>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut cfg = TrainerConfig::new(vocab_size);
    cfg.settings.special_tokens = special_tokens.iter().map(|s| s.to_string()).collect();
    cfg.settings.continuation_prefix = continuation_prefix.to_string();
    cfg.train(corpus)
}

pub fn count_words<I, S>(corpus: I, lowercase: bool) -> BTreeMap<String, u64>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut counts = BTreeMap::new();
    for line in corpus {
        let norm = normalize_with(line.as_ref(), lowercase);
        for w in words(&norm) {
            *counts.entry(w.to_string()).or_insert(0) += 1;
        }
    }
    counts
}

type Pair = (u32, u32);

#[derive(Debug, PartialEq, Eq)]
struct Candidate {
    count: u64,
    pair: Pair,
    left: String,
    right: String,
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.count
            .cmp(&other.count)
            .then_with(|| (&other.left, &other.right).cmp(&(&self.left, &self.right)))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct State<'a> {
    surfaces: Vec<String>,
    ids: HashMap<String, u32>,
    words: Vec<Vec<u32>>,
    freqs: Vec<u64>,
    pair_counts: HashMap<Pair, u64>,
    pair_words: HashMap<Pair, HashSet<usize>>,
    heap: BinaryHeap<Candidate>,
    settings: &'a ModelSettings,
}

impl State<'_> {
    /// Merges producing these outputs would make two token strings collide.
    fn forbidden(&self, pair: Pair) -> bool {
        let prefix = &self.settings.continuation_prefix;
        let merged = format!("{}{}", self.surfaces[pair.0 as usize], self.surfaces[pair.1 as usize]);
        merged.starts_with(prefix.as_str())
            || self
                .settings
                .special_tokens
                .iter()
                .any(|s| *s == merged || s.strip_prefix(prefix.as_str()) == Some(merged.as_str()))
    }

    fn push(&mut self, pair: Pair, count: u64) {
        if count == 0 || self.forbidden(pair) {
            return;
        }
        self.heap.push(Candidate {
            count,
            pair,
            left: self.surfaces[pair.0 as usize].clone(),
            right: self.surfaces[pair.1 as usize].clone(),
        });
    }

    fn apply(&mut self, pair: Pair, out: u32) {
        let Some(affected) = self.pair_words.get(&pair).cloned() else {
            return;
        };
        let mut grown: HashSet<Pair> = HashSet::new();
        for wi in affected {
            let old = &self.words[wi];
            if !old.windows(2).any(|w| (w[0], w[1]) == pair) {
                continue;
            }
            let mut new = Vec::with_capacity(old.len());
            let mut i = 0;
            while i < old.len() {
                if i + 1 < old.len() && (old[i], old[i + 1]) == pair {
                    new.push(out);
                    i += 2;
                } else {
                    new.push(old[i]);
                    i += 1;
                }
            }
            let freq = self.freqs[wi];
            for w in old.windows(2) {
                let c = self.pair_counts.get_mut(&(w[0], w[1])).expect("counted pair");
                *c -= freq;
            }
            for w in new.windows(2) {
                let p = (w[0], w[1]);
                *self.pair_counts.entry(p).or_insert(0) += freq;
                self.pair_words.entry(p).or_default().insert(wi);
                grown.insert(p);
            }
            self.words[wi] = new;
        }
        let mut grown: Vec<Pair> = grown.into_iter().collect();
        grown.sort_unstable();
        for p in grown {
            let c = self.pair_counts[&p];
            self.push(p, c);
        }
    }
}

fn learn_merges(
    counts: &BTreeMap<String, u64>,
    alphabet: &BTreeSet<char>,
    max_types: usize,
    settings: &ModelSettings,
) -> Vec<(String, String)> {
    let surfaces: Vec<String> = alphabet.iter().map(|c| c.to_string()).collect();
    let ids: HashMap<String, u32> = surfaces
        .iter()
        .enumerate()
        .map(|(i, s)| (s.clone(), i as u32))
        .collect();
    let mut state = State {
        words: counts
            .keys()
            .map(|w| w.chars().map(|c| ids[&c.to_string()]).collect())
            .collect(),
        freqs: counts.values().copied().collect(),
        surfaces,
        ids,
        pair_counts: HashMap::new(),
        pair_words: HashMap::new(),
        heap: BinaryHeap::new(),
        settings,
    };
    for (wi, word) in state.words.iter().enumerate() {
        for w in word.windows(2) {
            let p = (w[0], w[1]);
            *state.pair_counts.entry(p).or_insert(0) += state.freqs[wi];
            state.pair_words.entry(p).or_default().insert(wi);
        }
    }
    let mut initial: Vec<(Pair, u64)> = state.pair_counts.iter().map(|(&p, &c)| (p, c)).collect();
    initial.sort_unstable();
    for (p, c) in initial {
        state.push(p, c);
    }

    let prefix = settings.continuation_prefix.clone();
    let mut merges = Vec::new();
    let mut learned: HashSet<Pair> = HashSet::new();
    while state.surfaces.len() < max_types {
        let Some(top) = state.heap.pop() else { break };
        let actual = state.pair_counts.get(&top.pair).copied().unwrap_or(0);
        if actual != top.count {
            state.push(top.pair, actual);
            continue;
        }
        if actual < 2 {
            break;
        }
        let merged = format!("{}{}", top.left, top.right);
        let out = match state.ids.get(&merged) {
            Some(&id) => id,
            None => {
                let id = state.surfaces.len() as u32;
                state.ids.insert(merged.clone(), id);
                state.surfaces.push(merged);
                id
            }
        };
        // A pair can reappear when another merge rebuilds one of its
        // operands; the encoder already applies it at its first rank.
        if learned.insert(top.pair) {
            merges.push((top.left.clone(), format!("{prefix}{}", top.right)));
        }
        state.apply(top.pair, out);
    }
    merges
}
