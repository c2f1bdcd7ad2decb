//! Morphology-aligned replacements for fine-tuning token streams.
//!
//! A word is eligible when one of its gold analyses splits it into pieces
//! that are all vocabulary tokens. During injection each eligible
//! occurrence is replaced, with probability `r`, by one of its aligned
//! segmentations chosen uniformly.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bpe::{check_probability, Segmentation, TokenId, TokenizerModel};
use crate::error::{Error, Result};
use crate::gold::GoldLexicon;
use crate::seed;

pub const DEFAULT_REPLACE_PROB: f64 = 0.25;
/// Replacement probabilities compared alongside the default.
pub const REPLACE_PROB_GRID: [f64; 4] = [0.10, 0.25, 0.50, 1.00];

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplacementTable {
    /// word -> aligned segmentations as token strings
    pub entries: BTreeMap<String, Vec<Vec<String>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TableStats {
    pub lexicon_words: usize,
    pub eligible_words: usize,
    pub segmentations_kept: usize,
    pub segmentations_dropped: usize,
}

impl ReplacementTable {
    /// Keep every gold split whose pieces are all vocabulary tokens.
    pub fn build(model: &TokenizerModel, lexicon: &GoldLexicon) -> (Self, TableStats) {
        let prefix = model.continuation_prefix();
        let mut stats = TableStats {
            lexicon_words: lexicon.len(),
            ..TableStats::default()
        };
        let mut entries = BTreeMap::new();
        for (word, sets) in &lexicon.entries {
            let mut kept = Vec::new();
            for set in sets {
                let units: Vec<String> = set
                    .split(word)
                    .iter()
                    .enumerate()
                    .map(|(i, piece)| {
                        if i == 0 {
                            piece.to_string()
                        } else {
                            format!("{prefix}{piece}")
                        }
                    })
                    .collect();
                if units
                    .iter()
                    .all(|u| model.contains_token(u) && model.parse_token(u).is_some())
                {
                    kept.push(units);
                } else {
                    stats.segmentations_dropped += 1;
                }
            }
            if !kept.is_empty() {
                stats.segmentations_kept += kept.len();
                entries.insert(word.clone(), kept);
            }
        }
        stats.eligible_words = entries.len();
        (Self { entries }, stats)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<&[Vec<String>]> {
        self.entries.get(word).map(Vec::as_slice)
    }

    /// `word<TAB>units<TAB>units...` with units space-separated.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (word, segs) in &self.entries {
            out.push_str(word);
            for s in segs {
                out.push('\t');
                out.push_str(&s.join(" "));
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let mut cols = line.split('\t');
            let word = cols.next().unwrap_or_default();
            let segs: Vec<Vec<String>> = cols.map(|c| c.split(' ').map(str::to_string).collect()).collect();
            if word.is_empty() || segs.is_empty() {
                return Err(Error::Format {
                    what: "replacement table",
                    line: i + 1,
                    message: "expected word and at least one segmentation".into(),
                });
            }
            entries.insert(word.to_string(), segs);
        }
        Ok(Self { entries })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Injection {
    pub segmentation: Segmentation,
    pub eligible: usize,
    pub replaced: usize,
}

/// Deterministic encoding with eligible words replaced with probability `r`.
pub fn inject(model: &TokenizerModel, table: &ReplacementTable, text: &str, r: f64, seed: u64) -> Result<Injection> {
    let mut rng = seed::rng(seed);
    inject_with_rng(model, table, text, r, &mut rng)
}

pub fn inject_with_rng<R: Rng + ?Sized>(
    model: &TokenizerModel,
    table: &ReplacementTable,
    text: &str,
    r: f64,
    rng: &mut R,
) -> Result<Injection> {
    check_probability("replacement probability", r)?;
    let normalized = model.normalize(text);
    let base = model.encode_deterministic(&normalized);
    let words: Vec<&str> = crate::normalize::words(&normalized).collect();
    let mut out = Injection::default();
    let mut char_pos = 0usize;
    for (wi, units) in base.words().into_iter().enumerate() {
        let word = words[wi];
        let choice = match table.get(word) {
            Some(options) => {
                out.eligible += 1;
                if rng.random::<f64>() < r {
                    out.replaced += 1;
                    Some(&options[rng.random_range(0..options.len())])
                } else {
                    None
                }
            }
            None => None,
        };
        let units: &[String] = choice.map_or(units, Vec::as_slice);
        let seg = &mut out.segmentation;
        let mut pos = char_pos;
        for (i, u) in units.iter().enumerate() {
            let unknown = u == model.unk_token() && units.len() == 1;
            let len = if unknown {
                word.chars().count()
            } else if i == 0 {
                u.chars().count()
            } else {
                u.strip_prefix(model.continuation_prefix()).unwrap_or(u).chars().count()
            };
            seg.units.push(u.clone());
            seg.word_index.push(wi);
            seg.is_unknown.push(unknown);
            seg.spans.push(pos..pos + len);
            pos += len;
        }
        char_pos += word.chars().count() + 1;
    }
    Ok(out)
}

/// `id id id` line for a token stream.
pub fn ids_line(model: &TokenizerModel, seg: &Segmentation) -> Result<String> {
    let ids: Vec<TokenId> = seg.ids(model)?;
    Ok(ids.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(" "))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bpe::ModelSettings;
    use crate::gold::BoundarySet;

    fn model() -> TokenizerModel {
        TokenizerModel::from_parts(
            ModelSettings::default(),
            "acehinpstuy".chars(),
            [
                ("u", "##n"),
                ("h", "##a"),
                ("ha", "##p"),
                ("hap", "##p"),
                ("happ", "##i"),
                ("happ", "##y"),
                ("n", "##e"),
                ("ne", "##s"),
                ("nes", "##s"),
                ("c", "##a"),
                ("ca", "##t"),
                ("un", "##happy"),
            ],
        )
        .unwrap()
    }

    fn lexicon() -> GoldLexicon {
        let mut lex = GoldLexicon::new("en", "test");
        lex.add_morphemes("unhappiness", &["un", "happi", "ness"]).unwrap();
        lex.add_morphemes("unhappy", &["un", "happy"]).unwrap();
        lex.add_morphemes("unhappy", &["unh", "appy"]).unwrap();
        lex.add_morphemes("cats", &["cat", "s"]).unwrap();
        lex.add_morphemes("cat", &["ca", "t"]).unwrap();
        lex.add_morphemes("tin", &["ti", "n"]).unwrap();
        lex
    }

    #[test]
    fn table_keeps_vocabulary_compatible_splits() {
        let (table, stats) = ReplacementTable::build(&model(), &lexicon());
        assert_eq!(table.get("unhappiness").unwrap(), &[vec!["un", "##happi", "##ness"]]);
        assert_eq!(table.get("unhappy").unwrap(), &[vec!["un", "##happy"]]);
        assert!(table.get("tin").is_none());
        assert_eq!(stats.lexicon_words, 5);
        assert_eq!(stats.eligible_words, 4);
        assert_eq!(stats.segmentations_dropped, 2);
        assert_eq!(ReplacementTable::from_text(&table.to_text()).unwrap(), table);
    }

    #[test]
    fn table_segmentations_match_gold_exactly() {
        let m = model();
        let lex = lexicon();
        let (table, _) = ReplacementTable::build(&m, &lex);
        for (word, segs) in &table.entries {
            for s in segs {
                let b = crate::gold::boundaries_of_units(s, "##");
                assert!(lex.get(word).unwrap().contains(&b));
                let seg = Segmentation::from_units(s, "##", "[UNK]");
                assert_eq!(m.decode(&seg).unwrap(), *word);
            }
        }
    }

    #[test]
    fn zero_rate_is_deterministic_encoding() {
        let m = model();
        let (table, _) = ReplacementTable::build(&m, &lexicon());
        let text = "Unhappiness cats  unhappy xyz cat";
        let out = inject(&m, &table, text, 0.0, 4).unwrap();
        assert_eq!(out.segmentation, m.encode_deterministic(text));
        assert_eq!(out.eligible, 4);
        assert_eq!(out.replaced, 0);
    }

    #[test]
    fn full_rate_replaces_every_eligible_word() {
        let m = model();
        let (table, _) = ReplacementTable::build(&m, &lexicon());
        let text = "unhappiness tin cats";
        let out = inject(&m, &table, text, 1.0, 4).unwrap();
        assert_eq!(out.replaced, 2);
        let mut expected: Vec<String> = vec!["un".into(), "##happi".into(), "##ness".into()];
        expected.extend(m.encode_deterministic("tin").units);
        expected.extend(["cat".to_string(), "##s".to_string()]);
        assert_eq!(out.segmentation.units, expected);
        assert_eq!(m.decode(&out.segmentation).unwrap(), "unhappiness tin cats");
        assert_eq!(out.segmentation.spans.last().unwrap().clone(), 19..20);
    }

    #[test]
    fn empty_table_is_identity() {
        let m = model();
        let text = "unhappiness cats";
        let out = inject(&m, &ReplacementTable::default(), text, 1.0, 0).unwrap();
        assert_eq!(out.segmentation, m.encode_deterministic(text));
    }

    #[test]
    fn rejects_bad_rate() {
        let m = model();
        assert!(matches!(
            inject(&m, &ReplacementTable::default(), "cat", 1.5, 0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn single_unit_gold_uses_whole_token() {
        let m = model();
        let mut lex = GoldLexicon::new("en", "t");
        lex.add("cat", BoundarySet::empty()).unwrap();
        let (table, _) = ReplacementTable::build(&m, &lex);
        assert_eq!(table.get("cat").unwrap(), &[vec!["cat".to_string()]]);
    }
}
