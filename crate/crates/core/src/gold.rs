//! Gold morphological boundary lexicons.
//!
//! A boundary at position `i` splits a normalized word between its
//! characters `i - 1` and `i`. Every word maps to one or more alternative
//! boundary sets.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bpe::Segmentation;
use crate::error::{Error, Result};
use crate::normalize::normalize;

#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BoundarySet(BTreeSet<usize>);

impl BoundarySet {
    /// Positions must lie in `1..word_len`.
    pub fn new(positions: impl IntoIterator<Item = usize>, word_len: usize) -> Result<Self> {
        let set: BTreeSet<usize> = positions.into_iter().collect();
        if let Some(&bad) = set.iter().find(|&&p| p == 0 || p >= word_len) {
            return Err(Error::Contract(format!(
                "boundary {bad} is not inside a word of length {word_len}"
            )));
        }
        Ok(Self(set))
    }

    pub fn empty() -> Self {
        Self::default()
    }

    /// Every interior position of a word of length `word_len`.
    pub fn all(word_len: usize) -> Self {
        Self((1..word_len).collect())
    }

    /// Cumulative lengths of all pieces but the last.
    pub fn from_lengths(lengths: impl IntoIterator<Item = usize>) -> Self {
        let mut pos = 0;
        let mut set = BTreeSet::new();
        let mut last = None;
        for len in lengths {
            if let Some(p) = last {
                set.insert(p);
            }
            pos += len;
            last = Some(pos);
        }
        Self(set)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, pos: usize) -> bool {
        self.0.contains(&pos)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn intersection_len(&self, other: &BoundarySet) -> usize {
        self.0.intersection(&other.0).count()
    }

    pub fn last(&self) -> Option<usize> {
        self.0.last().copied()
    }

    /// Split `word` at these positions.
    pub fn split<'w>(&self, word: &'w str) -> Vec<&'w str> {
        let mut out = Vec::with_capacity(self.len() + 1);
        let mut start_byte = 0;
        for (ci, (bi, _)) in word.char_indices().enumerate() {
            if self.contains(ci) {
                out.push(&word[start_byte..bi]);
                start_byte = bi;
            }
        }
        out.push(&word[start_byte..]);
        out
    }
}

impl fmt::Display for BoundarySet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, p) in self.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{p}")?;
        }
        write!(f, "}}")
    }
}

/// Boundaries of a one-word unit sequence; continuation prefixes do not count
/// towards lengths.
pub fn boundaries_of_units<S: AsRef<str>>(units: &[S], prefix: &str) -> BoundarySet {
    BoundarySet::from_lengths(units.iter().enumerate().map(|(i, u)| {
        let u = u.as_ref();
        let surface = if i == 0 { u } else { u.strip_prefix(prefix).unwrap_or(u) };
        surface.chars().count()
    }))
}

/// Boundary set of a single-word segmentation.
pub fn boundaries_of(seg: &Segmentation, prefix: &str) -> Result<BoundarySet> {
    if seg.num_words() > 1 {
        return Err(Error::Contract(format!(
            "segmentation spans {} words, expected one",
            seg.num_words()
        )));
    }
    if seg.has_unknown() {
        return Err(Error::Contract("segmentation contains the unknown token".into()));
    }
    Ok(boundaries_of_units(&seg.units, prefix))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GoldFormat {
    /// `word<TAB>morph|morph|...`
    Canonical,
    /// MorphyNet inflectional table:
    /// `lemma<TAB>form<TAB>features<TAB>morph|morph|...`
    MorphynetInflectional,
    /// MorphyNet derivational table:
    /// `base<TAB>derived<TAB>base_pos<TAB>derived_pos<TAB>affix<TAB>prefix|suffix`
    MorphynetDerivational,
}

impl FromStr for GoldFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "canonical" => Ok(Self::Canonical),
            "morphynet-inflectional" => Ok(Self::MorphynetInflectional),
            "morphynet-derivational" => Ok(Self::MorphynetDerivational),
            _ => Err(Error::Config(format!("unknown gold format {s:?}"))),
        }
    }
}

impl fmt::Display for GoldFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Canonical => "canonical",
            Self::MorphynetInflectional => "morphynet-inflectional",
            Self::MorphynetDerivational => "morphynet-derivational",
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub rows_read: usize,
    pub rows_rejected: BTreeMap<String, usize>,
    pub words: usize,
    pub analyses: usize,
    pub mean_analyses_per_word: f64,
}

impl IngestReport {
    pub fn total_rejected(&self) -> usize {
        self.rows_rejected.values().sum()
    }

    fn reject(&mut self, reason: &str) {
        *self.rows_rejected.entry(reason.to_string()).or_insert(0) += 1;
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldLexicon {
    pub language: String,
    pub source: String,
    pub entries: BTreeMap<String, BTreeSet<BoundarySet>>,
}

impl GoldLexicon {
    pub fn new(language: impl Into<String>, source: impl Into<String>) -> Self {
        Self {
            language: language.into(),
            source: source.into(),
            entries: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn num_analyses(&self) -> usize {
        self.entries.values().map(BTreeSet::len).sum()
    }

    pub fn get(&self, word: &str) -> Option<&BTreeSet<BoundarySet>> {
        self.entries.get(word)
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Add one analysis given as morphemes; they must spell the word after
    /// normalization.
    pub fn add_morphemes<S: AsRef<str>>(&mut self, word: &str, morphemes: &[S]) -> Result<()> {
        let (word, set) = analysis(word, morphemes).map_err(|reason| Error::Data(format!("{word:?}: {reason}")))?;
        self.entries.entry(word).or_default().insert(set);
        Ok(())
    }

    pub fn add(&mut self, word: &str, boundaries: BoundarySet) -> Result<()> {
        let word = normalize(word);
        let len = word.chars().count();
        if let Some(max) = boundaries.last() {
            if max >= len {
                return Err(Error::Contract(format!("boundary {max} is not inside {word:?}")));
            }
        }
        self.entries.entry(word).or_default().insert(boundaries);
        Ok(())
    }

    /// Parse gold rows. Unusable rows are counted by reason and skipped.
    pub fn parse(text: &str, format: GoldFormat, language: &str, source: &str) -> Result<(Self, IngestReport)> {
        let mut lex = GoldLexicon::new(language, source);
        let mut report = IngestReport::default();
        for line in text.lines() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            report.rows_read += 1;
            let cols: Vec<&str> = line.split('\t').collect();
            let outcome = match format {
                GoldFormat::Canonical => match cols.as_slice() {
                    [word, morphs] => analysis(word, &split_morphs(morphs)),
                    _ => {
                        report.reject("malformed");
                        continue;
                    }
                },
                GoldFormat::MorphynetInflectional => match cols.as_slice() {
                    [_lemma, form, _features, segmentation, ..] => analysis(form, &split_morphs(segmentation)),
                    _ => {
                        report.reject("malformed");
                        continue;
                    }
                },
                GoldFormat::MorphynetDerivational => match cols.as_slice() {
                    [base, derived, _, _, affix, kind, ..] => match derivational_split(base, derived, affix, kind) {
                        Some(parts) => analysis(derived, &parts),
                        None => {
                            report.reject("malformed");
                            continue;
                        }
                    },
                    _ => {
                        report.reject("malformed");
                        continue;
                    }
                },
            };
            match outcome {
                Ok((word, set)) => {
                    lex.entries.entry(word).or_default().insert(set);
                }
                Err(reason) => report.reject(reason),
            }
        }
        if lex.is_empty() {
            return Err(Error::Data(format!(
                "no usable gold rows ({} read, {} rejected)",
                report.rows_read,
                report.total_rejected()
            )));
        }
        report.words = lex.len();
        report.analyses = lex.num_analyses();
        report.mean_analyses_per_word = report.analyses as f64 / report.words as f64;
        Ok((lex, report))
    }

    pub fn load(path: &Path, format: GoldFormat, language: &str) -> Result<(Self, IngestReport)> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let text = String::from_utf8(bytes).map_err(|e| Error::Encoding {
            offset: e.utf8_error().valid_up_to(),
            message: format!("{}: {}", path.display(), e.utf8_error()),
        })?;
        Self::parse(&text, format, language, &path.display().to_string())
    }

    /// Canonical format: one analysis per line, words and analyses sorted.
    pub fn to_canonical(&self) -> String {
        let mut out = String::new();
        for (word, sets) in &self.entries {
            for set in sets {
                out.push_str(word);
                out.push('\t');
                out.push_str(&set.split(word).join("|"));
                out.push('\n');
            }
        }
        out
    }

    /// Keep only words in `word_list` that have at least two characters.
    pub fn intersect_vocabulary<'a>(&self, word_list: impl IntoIterator<Item = &'a str>) -> (GoldLexicon, Overlap) {
        let vocab: HashSet<&str> = word_list.into_iter().collect();
        let mut out = GoldLexicon::new(self.language.clone(), self.source.clone());
        let mut short = 0;
        for (word, sets) in &self.entries {
            if !vocab.contains(word.as_str()) {
                continue;
            }
            if word.chars().count() < 2 {
                short += 1;
                continue;
            }
            out.entries.insert(word.clone(), sets.clone());
        }
        if out.is_empty() {
            log::warn!(
                "gold lexicon ({} words) and word list ({} types) do not overlap",
                self.len(),
                vocab.len()
            );
        }
        let overlap = Overlap {
            lexicon_words: self.len(),
            word_types: vocab.len(),
            overlap: out.len(),
            excluded_single_char: short,
        };
        (out, overlap)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Overlap {
    pub lexicon_words: usize,
    pub word_types: usize,
    pub overlap: usize,
    pub excluded_single_char: usize,
}

/// Normalized word and its boundary set, or the reject reason.
fn analysis<S: AsRef<str>>(word: &str, morphemes: &[S]) -> std::result::Result<(String, BoundarySet), &'static str> {
    let word = normalize(word);
    let parts: Vec<String> = morphemes.iter().map(|m| normalize(m.as_ref())).collect();
    if word.is_empty() || word.contains(' ') || word.contains('|') {
        return Err("malformed");
    }
    if parts.iter().any(|p| p.is_empty() || p.contains(' ')) {
        return Err("malformed");
    }
    if parts.concat() != word {
        return Err("surface_mismatch");
    }
    Ok((word, BoundarySet::from_lengths(parts.iter().map(|p| p.chars().count()))))
}

fn split_morphs(s: &str) -> Vec<&str> {
    s.split('|').collect()
}

fn derivational_split(base: &str, derived: &str, affix: &str, kind: &str) -> Option<Vec<String>> {
    let (base, affix) = (base.trim(), affix.trim());
    if base.is_empty() || affix.is_empty() || derived.trim().is_empty() {
        return None;
    }
    match kind.trim() {
        "prefix" => Some(vec![affix.to_string(), base.to_string()]),
        "suffix" => Some(vec![base.to_string(), affix.to_string()]),
        _ => None,
    }
}
