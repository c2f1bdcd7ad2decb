//! Seeded synthetic languages with known morphology.
//!
//! Produces running text together with the gold analysis of every word it
//! contains, for demos, fixtures and tests that need a corpus and a gold
//! lexicon that agree with each other.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::gold::GoldLexicon;
use crate::seed;

#[derive(Debug, Clone)]
pub struct LanguageSpec {
    pub name: &'static str,
    pub seed: u64,
    pub stems: usize,
    pub onsets: &'static [&'static str],
    pub nuclei: &'static [&'static str],
    pub codas: &'static [&'static str],
    pub prefixes: &'static [&'static str],
    pub derivational: &'static [&'static str],
    pub inflectional: &'static [&'static str],
    pub function_words: &'static [&'static str],
}

pub const ENGLISH_LIKE: LanguageSpec = LanguageSpec {
    name: "en",
    seed: 0x656e,
    stems: 1500,
    onsets: &[
        "b", "c", "d", "f", "g", "h", "l", "m", "n", "p", "r", "s", "t", "w", "st", "pl", "tr", "sh", "ch", "br",
    ],
    nuclei: &["a", "e", "i", "o", "u", "ea", "oo", "ai"],
    codas: &["", "", "n", "t", "r", "l", "k", "m", "nd", "st", "ck"],
    prefixes: &["un", "re", "dis", "pre", "mis"],
    derivational: &["er", "ness", "ful", "less", "ment", "ly", "able"],
    inflectional: &["s", "ed", "ing", "est"],
    function_words: &[
        "the", "a", "of", "and", "to", "in", "is", "it", "that", "was", "for", "on", "with", "as", "by",
    ],
};

pub const GERMAN_LIKE: LanguageSpec = LanguageSpec {
    name: "de",
    seed: 0x6465,
    stems: 1500,
    onsets: &[
        "b", "d", "f", "g", "h", "k", "l", "m", "n", "r", "s", "t", "w", "z", "sch", "st", "kr", "pf", "gr", "fl",
    ],
    nuclei: &["a", "e", "i", "o", "u", "ä", "ö", "ü", "ei", "au", "ie"],
    codas: &["", "n", "t", "r", "l", "ch", "ß", "nd", "ng", "rt", "ck"],
    prefixes: &["ver", "be", "ent", "zer", "ge", "un"],
    derivational: &["ung", "heit", "keit", "lich", "bar", "schaft", "chen"],
    inflectional: &["en", "e", "es", "er", "st", "t"],
    function_words: &[
        "der", "die", "das", "und", "ist", "nicht", "mit", "von", "zu", "auf", "den", "ein", "sich", "im",
    ],
};

/// A generated word and its morphemes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Word {
    pub surface: String,
    pub morphemes: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct SyntheticLanguage {
    pub spec: LanguageSpec,
    pub stems: Vec<String>,
}

impl SyntheticLanguage {
    pub fn new(spec: LanguageSpec) -> Self {
        let mut rng = seed::rng(spec.seed);
        let mut seen = BTreeSet::new();
        let mut stems = Vec::with_capacity(spec.stems);
        let function: BTreeSet<&str> = spec.function_words.iter().copied().collect();
        while stems.len() < spec.stems {
            let syllables = rng.random_range(1..=3);
            let mut s = String::new();
            for _ in 0..syllables {
                s.push_str(spec.onsets.choose(&mut rng).unwrap());
                s.push_str(spec.nuclei.choose(&mut rng).unwrap());
                s.push_str(spec.codas.choose(&mut rng).unwrap());
            }
            if s.chars().count() >= 2 && !function.contains(s.as_str()) && seen.insert(s.clone()) {
                stems.push(s);
            }
        }
        Self { spec, stems }
    }

    pub fn name(&self) -> &str {
        self.spec.name
    }

    fn zipf_index(&self, rng: &mut ChaCha8Rng) -> usize {
        // inverse-CDF sampling of a continuous 1/x law over ranks
        let n = self.stems.len() as f64;
        let u: f64 = rng.random();
        let idx = (n + 1.0).powf(u) - 1.0;
        (idx as usize).min(self.stems.len() - 1)
    }

    pub fn sample_word(&self, rng: &mut ChaCha8Rng) -> Word {
        let spec = &self.spec;
        if rng.random::<f64>() < 0.3 {
            let w = spec.function_words.choose(rng).unwrap().to_string();
            return Word {
                surface: w.clone(),
                morphemes: vec![w],
            };
        }
        let mut morphemes = Vec::new();
        if rng.random::<f64>() < 0.15 {
            morphemes.push(spec.prefixes.choose(rng).unwrap().to_string());
        }
        morphemes.push(self.stems[self.zipf_index(rng)].clone());
        if rng.random::<f64>() < 0.25 {
            morphemes.push(spec.derivational.choose(rng).unwrap().to_string());
        }
        if rng.random::<f64>() < 0.35 {
            morphemes.push(spec.inflectional.choose(rng).unwrap().to_string());
        }
        Word {
            surface: morphemes.concat(),
            morphemes,
        }
    }

    /// `lines` sentences of 6-18 words. The first word is capitalized and the
    /// last carries a full stop, so raw lines exercise normalization.
    pub fn corpus(&self, lines: usize, seed: u64) -> (Vec<String>, BTreeMap<String, Word>) {
        let mut rng = seed::rng(seed::derive(seed, seed::stream_of(self.spec.name)));
        let mut out = Vec::with_capacity(lines);
        let mut seen = BTreeMap::new();
        for _ in 0..lines {
            let n = rng.random_range(6..=18);
            let mut line = String::new();
            for i in 0..n {
                let w = self.sample_word(&mut rng);
                if i > 0 {
                    line.push(' ');
                }
                if i == 0 {
                    let mut chars = w.surface.chars();
                    let first = chars.next().unwrap();
                    line.extend(first.to_uppercase());
                    line.push_str(chars.as_str());
                } else {
                    line.push_str(&w.surface);
                }
                seen.entry(w.surface.clone()).or_insert(w);
            }
            line.push('.');
            out.push(line);
        }
        (out, seen)
    }

    /// Gold lexicon for the given words. Words with a derivational suffix
    /// followed by an inflection also get the analysis that keeps the
    /// derived stem whole.
    pub fn gold(&self, words: &BTreeMap<String, Word>) -> GoldLexicon {
        let mut lex = GoldLexicon::new(self.spec.name, "synthetic");
        let derivational: BTreeSet<&str> = self.spec.derivational.iter().copied().collect();
        for w in words.values() {
            lex.add_morphemes(&w.surface, &w.morphemes)
                .expect("generated morphemes spell the word");
            let m = &w.morphemes;
            if m.len() >= 3 && derivational.contains(m[m.len() - 2].as_str()) {
                let mut coarse: Vec<String> = m[..m.len() - 2].to_vec();
                let last = coarse.pop().unwrap();
                coarse.push(format!("{last}{}", m[m.len() - 2]));
                coarse.push(m[m.len() - 1].clone());
                lex.add_morphemes(&w.surface, &coarse)
                    .expect("coarse analysis spells the word");
            }
        }
        lex
    }
}
