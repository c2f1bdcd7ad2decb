use std::ops::Range;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::model::{TokenId, TokenizerModel, TypeId};
use crate::error::{Error, Result};
use crate::normalize::{normalize_with, words};
use crate::seed;

/// Merge-dropout parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DropoutConfig {
    pub p: f64,
    pub seed: u64,
}

impl DropoutConfig {
    pub fn new(p: f64, seed: u64) -> Result<Self> {
        check_probability("dropout p", p)?;
        Ok(Self { p, seed })
    }
}

pub(crate) fn check_probability(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} = {p} is outside [0, 1]")))
    }
}

/// Token units for a sentence or a word.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Segmentation {
    pub units: Vec<String>,
    /// Which word of the normalized text each unit belongs to.
    pub word_index: Vec<usize>,
    pub is_unknown: Vec<bool>,
    /// Character range of each unit in the normalized text. UNK units span
    /// their whole word.
    pub spans: Vec<Range<usize>>,
}

impl Segmentation {
    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn num_words(&self) -> usize {
        self.word_index.last().map_or(0, |w| w + 1)
    }

    pub fn has_unknown(&self) -> bool {
        self.is_unknown.iter().any(|&u| u)
    }

    /// Reconstruct word membership from unit strings alone: a unit that
    /// starts with `prefix` continues the previous word. Spans are left empty.
    pub fn from_units<S: AsRef<str>>(units: &[S], prefix: &str, unk_token: &str) -> Self {
        let mut seg = Segmentation::default();
        let mut word = 0usize;
        for (i, u) in units.iter().enumerate() {
            let u = u.as_ref();
            if i > 0 && !u.starts_with(prefix) {
                word += 1;
            }
            seg.units.push(u.to_string());
            seg.word_index.push(word);
            seg.is_unknown.push(u == unk_token);
        }
        seg
    }

    /// Unit slices grouped by word.
    pub fn words(&self) -> Vec<&[String]> {
        let mut out = Vec::with_capacity(self.num_words());
        let mut start = 0;
        for i in 1..=self.units.len() {
            if i == self.units.len() || self.word_index[i] != self.word_index[start] {
                out.push(&self.units[start..i]);
                start = i;
            }
        }
        out
    }

    pub fn ids(&self, model: &TokenizerModel) -> Result<Vec<TokenId>> {
        self.units
            .iter()
            .map(|u| {
                model
                    .token_id(u)
                    .ok_or_else(|| Error::InvalidSegmentation(format!("{u:?} is not in the vocabulary")))
            })
            .collect()
    }

    fn push_word(&mut self, model: &TokenizerModel, word: usize, start: usize, units: &[TypeId]) {
        let mut pos = start;
        for (i, &ty) in units.iter().enumerate() {
            let len = model.surface(ty).chars().count();
            self.units.push(model.render(ty, i > 0).to_string());
            self.word_index.push(word);
            self.is_unknown.push(false);
            self.spans.push(pos..pos + len);
            pos += len;
        }
    }

    fn push_unknown(&mut self, model: &TokenizerModel, word: usize, span: Range<usize>) {
        self.units.push(model.unk_token().to_string());
        self.word_index.push(word);
        self.is_unknown.push(true);
        self.spans.push(span);
    }
}

impl TokenizerModel {
    pub fn normalize(&self, text: &str) -> String {
        normalize_with(text, self.lowercase())
    }

    /// Character units of a normalized word, or `None` if some character is
    /// outside the alphabet.
    pub fn initial_units(&self, word: &str) -> Option<Vec<TypeId>> {
        word.chars().map(|c| self.char_type(c)).collect()
    }

    /// Highest-priority applicable merge, leftmost on ties.
    fn best_merge(&self, units: &[TypeId]) -> Option<(usize, TypeId)> {
        let mut best: Option<(u32, usize, TypeId)> = None;
        for (i, w) in units.windows(2).enumerate() {
            if let Some((rank, out)) = self.merge_for(w[0], w[1]) {
                if best.is_none_or(|(r, _, _)| rank < r) {
                    best = Some((rank, i, out));
                }
            }
        }
        best.map(|(_, i, out)| (i, out))
    }

    /// Deterministic BPE over one normalized word's units.
    pub fn merge_units(&self, mut units: Vec<TypeId>) -> Vec<TypeId> {
        while let Some((i, out)) = self.best_merge(&units) {
            units[i] = out;
            units.remove(i + 1);
        }
        units
    }

    /// BPE with merge dropout over one word's units: at every step each
    /// applicable merge occurrence is dropped independently with probability
    /// `p`; the highest-priority survivor (leftmost on ties) is applied.
    /// Stops when no occurrence survives.
    pub fn merge_units_dropout<R: Rng + ?Sized>(&self, mut units: Vec<TypeId>, p: f64, rng: &mut R) -> Vec<TypeId> {
        if p <= 0.0 {
            return self.merge_units(units);
        }
        loop {
            let mut best: Option<(u32, usize, TypeId)> = None;
            for i in 0..units.len().saturating_sub(1) {
                if let Some((rank, out)) = self.merge_for(units[i], units[i + 1]) {
                    let dropped = rng.random::<f64>() < p;
                    if !dropped && best.is_none_or(|(r, _, _)| rank < r) {
                        best = Some((rank, i, out));
                    }
                }
            }
            match best {
                Some((_, i, out)) => {
                    units[i] = out;
                    units.remove(i + 1);
                }
                None => return units,
            }
        }
    }

    /// Deterministic segmentation of a single normalized word.
    pub fn segment_word(&self, word: &str) -> Option<Vec<TypeId>> {
        self.initial_units(word).map(|u| self.merge_units(u))
    }

    pub fn segment_word_dropout<R: Rng + ?Sized>(&self, word: &str, p: f64, rng: &mut R) -> Option<Vec<TypeId>> {
        self.initial_units(word).map(|u| self.merge_units_dropout(u, p, rng))
    }

    /// Render a word's units as token strings.
    pub fn render_units(&self, units: &[TypeId]) -> Vec<String> {
        units
            .iter()
            .enumerate()
            .map(|(i, &ty)| self.render(ty, i > 0).to_string())
            .collect()
    }

    fn encode_with<F>(&self, text: &str, mut segment: F) -> Segmentation
    where
        F: FnMut(&str) -> Option<Vec<TypeId>>,
    {
        let normalized = self.normalize(text);
        let mut seg = Segmentation::default();
        let mut pos = 0usize;
        for (wi, word) in words(&normalized).enumerate() {
            let len = word.chars().count();
            match segment(word) {
                Some(units) => seg.push_word(self, wi, pos, &units),
                None => seg.push_unknown(self, wi, pos..pos + len),
            }
            pos += len + 1;
        }
        seg
    }

    pub fn encode_deterministic(&self, text: &str) -> Segmentation {
        self.encode_with(text, |w| self.segment_word(w))
    }

    /// Dropout encoding seeded from `config.seed`.
    pub fn encode_dropout(&self, text: &str, config: &DropoutConfig) -> Result<Segmentation> {
        let mut rng = seed::rng(config.seed);
        self.encode_dropout_with_rng(text, config.p, &mut rng)
    }

    pub fn encode_dropout_with_rng<R: Rng + ?Sized>(&self, text: &str, p: f64, rng: &mut R) -> Result<Segmentation> {
        check_probability("dropout p", p)?;
        Ok(self.encode_with(text, |w| self.segment_word_dropout(w, p, rng)))
    }

    /// Strip continuation prefixes, join units within words and words with
    /// single spaces. UNK units decode to the UNK token string.
    pub fn decode(&self, seg: &Segmentation) -> Result<String> {
        if seg.word_index.len() != seg.units.len() {
            return Err(Error::InvalidSegmentation(
                "word_index and units differ in length".into(),
            ));
        }
        let prefix = self.continuation_prefix();
        let mut out = String::new();
        let mut prev_word = None;
        for (unit, &wi) in seg.units.iter().zip(&seg.word_index) {
            if !self.contains_token(unit) {
                return Err(Error::InvalidSegmentation(format!("{unit:?} is not in the vocabulary")));
            }
            if prev_word == Some(wi) {
                out.push_str(unit.strip_prefix(prefix).unwrap_or(unit));
            } else {
                if prev_word.is_some() {
                    out.push(' ');
                }
                out.push_str(unit);
            }
            prev_word = Some(wi);
        }
        Ok(out)
    }

    pub fn decode_ids(&self, ids: &[TokenId]) -> Result<String> {
        let units: Vec<&str> = ids
            .iter()
            .map(|&id| {
                self.token(id)
                    .ok_or_else(|| Error::InvalidSegmentation(format!("id {id} out of range")))
            })
            .collect::<Result<_>>()?;
        let seg = Segmentation::from_units(&units, self.continuation_prefix(), self.unk_token());
        self.decode(&seg)
    }
}
