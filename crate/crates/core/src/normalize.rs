//! Text normalization and whitespace pre-tokenization.
//!
//! Every string that reaches the tokenizer, the gold lexicon, or the
//! replacement table passes through [`normalize`] first, so all of them agree
//! on what a "word" and a "character" are.

use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

/// NFC-compose, lowercase, collapse whitespace runs and trim.
pub fn normalize(text: &str) -> String {
    normalize_with(text, true)
}

pub fn normalize_with(text: &str, lowercase: bool) -> String {
    let composed: String = text.nfc().collect();
    let cased = if lowercase {
        // Lowercasing can produce decomposed sequences, so compose again.
        composed.to_lowercase().nfc().collect()
    } else {
        composed
    };
    let mut out = String::with_capacity(cased.len());
    for word in cased.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

/// Like [`normalize`] but starting from raw bytes.
pub fn normalize_bytes(bytes: &[u8], lowercase: bool) -> Result<String> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Encoding {
        offset: e.valid_up_to(),
        message: e.to_string(),
    })?;
    Ok(normalize_with(text, lowercase))
}

/// Split normalized text into words.
pub fn words(normalized: &str) -> impl Iterator<Item = &str> {
    normalized.split(' ').filter(|w| !w.is_empty())
}

/// Number of characters (Unicode scalar values) in a normalized word.
pub fn char_len(word: &str) -> usize {
    word.chars().count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lowercases_and_collapses() {
        assert_eq!(normalize("Hello  World"), "hello world");
        assert_eq!(normalize("  a\t\nb  "), "a b");
    }

    #[test]
    fn empty_is_identity() {
        assert_eq!(normalize(""), "");
        assert_eq!(normalize("   "), "");
    }

    #[test]
    fn sharp_s_survives_lowercasing() {
        // U+1E9E CAPITAL SHARP S lowercases to U+00DF; U+00DF has no
        // single-character lowercase mapping other than itself.
        assert_eq!(normalize("Straße"), "straße");
        assert_eq!(normalize("STRA\u{1E9E}E"), "straße");
    }

    #[test]
    fn composes_combining_marks() {
        // "e" + COMBINING ACUTE -> U+00E9
        assert_eq!(normalize("Cafe\u{301}"), "caf\u{e9}");
        assert_eq!(char_len(&normalize("Cafe\u{301}")), 4);
    }

    #[test]
    fn uncased_mode_keeps_case() {
        assert_eq!(normalize_with("Hello  World", false), "Hello World");
    }

    #[test]
    fn rejects_invalid_utf8() {
        let err = normalize_bytes(b"ok \xff\xfe", true).unwrap_err();
        assert!(matches!(err, Error::Encoding { offset: 3, .. }));
    }
}
