//! Vocabulary and merge files.
//!
//! `vocab.txt`: one token per line, id = 0-based line number, special tokens
//! first, then every surface unit as its bare and prefixed rendering.
//!
//! `merges.txt`: a version comment, then one `LEFT RIGHT` merge per line in
//! priority order. The version line also carries the settings needed to
//! rebuild the model.

use std::fs;
use std::path::Path;

use super::model::{ModelSettings, TokenizerModel};
use crate::error::{Error, Result};

pub const MERGES_VERSION: &str = "morphbpe-merges/1";
pub const VOCAB_FILE: &str = "vocab.txt";
pub const MERGES_FILE: &str = "merges.txt";

pub fn vocab_to_string(model: &TokenizerModel) -> String {
    let mut out = String::new();
    for tok in model.vocab() {
        out.push_str(tok);
        out.push('\n');
    }
    out
}

pub fn merges_to_string(model: &TokenizerModel) -> String {
    let s = model.settings();
    let unk_index = s
        .special_tokens
        .iter()
        .position(|t| *t == s.unk_token)
        .expect("validated model");
    let mut out = format!(
        "#version: {MERGES_VERSION} continuation_prefix={} special_tokens={} unk_index={} lowercase={}\n",
        s.continuation_prefix,
        s.special_tokens.len(),
        unk_index,
        s.lowercase
    );
    for (l, r) in model.merges() {
        out.push_str(&l);
        out.push(' ');
        out.push_str(&r);
        out.push('\n');
    }
    out
}

struct Header {
    prefix: String,
    specials: usize,
    unk_index: usize,
    lowercase: bool,
}

fn parse_header(line: &str) -> Result<Header> {
    let fail = |message: String| Error::Format {
        what: "merges header",
        line: 1,
        message,
    };
    let rest = line
        .strip_prefix("#version: ")
        .ok_or_else(|| fail("missing '#version: ' comment".into()))?;
    let mut fields = rest.split(' ');
    let version = fields.next().unwrap_or_default();
    if version != MERGES_VERSION {
        return Err(fail(format!("unsupported version {version:?}")));
    }
    let (mut prefix, mut specials, mut unk_index, mut lowercase) = (None, None, None, None);
    for field in fields {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| fail(format!("bad field {field:?}")))?;
        let num = || value.parse::<usize>().map_err(|e| fail(format!("{key}: {e}")));
        match key {
            "continuation_prefix" => prefix = Some(value.to_string()),
            "special_tokens" => specials = Some(num()?),
            "unk_index" => unk_index = Some(num()?),
            "lowercase" => lowercase = Some(value.parse::<bool>().map_err(|e| fail(format!("{key}: {e}")))?),
            _ => return Err(fail(format!("unknown field {key:?}"))),
        }
    }
    Ok(Header {
        prefix: prefix.ok_or_else(|| fail("missing continuation_prefix".into()))?,
        specials: specials.ok_or_else(|| fail("missing special_tokens".into()))?,
        unk_index: unk_index.ok_or_else(|| fail("missing unk_index".into()))?,
        lowercase: lowercase.ok_or_else(|| fail("missing lowercase".into()))?,
    })
}

/// Rebuild a model from file contents, checking that the vocabulary is
/// exactly the one the merges imply.
pub fn model_from_strings(vocab: &str, merges: &str) -> Result<TokenizerModel> {
    let mut merge_lines = merges.lines();
    let header = parse_header(merge_lines.next().unwrap_or_default())?;
    let vocab_lines: Vec<&str> = vocab.lines().collect();
    if vocab_lines.len() < header.specials || header.unk_index >= header.specials {
        return Err(Error::Format {
            what: "vocab file",
            line: vocab_lines.len(),
            message: "fewer lines than special tokens".into(),
        });
    }
    let special_tokens: Vec<String> = vocab_lines[..header.specials].iter().map(|s| s.to_string()).collect();
    let settings = ModelSettings {
        unk_token: special_tokens[header.unk_index].clone(),
        special_tokens,
        continuation_prefix: header.prefix,
        lowercase: header.lowercase,
    };

    let mut alphabet = Vec::new();
    // Alphabet entries are the leading single-character units.
    for tok in vocab_lines[header.specials..].iter().step_by(2) {
        let mut chars = tok.chars();
        match (chars.next(), chars.next()) {
            (Some(c), None) => alphabet.push(c),
            _ => break,
        }
    }

    let mut pairs = Vec::new();
    for (i, line) in merge_lines.enumerate() {
        let (l, r) = line.split_once(' ').ok_or_else(|| Error::Format {
            what: "merges file",
            line: i + 2,
            message: format!("expected 'LEFT RIGHT', got {line:?}"),
        })?;
        pairs.push((l.to_string(), r.to_string()));
    }
    let model = TokenizerModel::from_parts(settings, alphabet, pairs)?;
    if model.vocab().len() != vocab_lines.len() || model.vocab().iter().zip(&vocab_lines).any(|(a, b)| a != b) {
        let line = model
            .vocab()
            .iter()
            .zip(&vocab_lines)
            .position(|(a, b)| a != b)
            .unwrap_or(model.vocab().len().min(vocab_lines.len()));
        return Err(Error::Format {
            what: "vocab file",
            line: line + 1,
            message: "vocabulary does not match the merge table".into(),
        });
    }
    Ok(model)
}

pub fn save(model: &TokenizerModel, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let vp = dir.join(VOCAB_FILE);
    fs::write(&vp, vocab_to_string(model)).map_err(|e| Error::io(&vp, e))?;
    let mp = dir.join(MERGES_FILE);
    fs::write(&mp, merges_to_string(model)).map_err(|e| Error::io(&mp, e))?;
    Ok(())
}

pub fn load(dir: &Path) -> Result<TokenizerModel> {
    let vp = dir.join(VOCAB_FILE);
    let mp = dir.join(MERGES_FILE);
    let vocab = fs::read_to_string(&vp).map_err(|e| Error::io(&vp, e))?;
    let merges = fs::read_to_string(&mp).map_err(|e| Error::io(&mp, e))?;
    model_from_strings(&vocab, &merges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bpe::train::TrainerConfig;

    #[test]
    fn files_roundtrip_bit_exactly() {
        let model = TrainerConfig::new(30)
            .train(["unhappiness is unhappy", "happiness happens", "ünïcode çase"])
            .unwrap();
        let v = vocab_to_string(&model);
        let m = merges_to_string(&model);
        assert!(m.starts_with("#version: morphbpe-merges/1 continuation_prefix=## "));
        let back = model_from_strings(&v, &m).unwrap();
        assert_eq!(vocab_to_string(&back), v);
        assert_eq!(merges_to_string(&back), m);
        assert_eq!(back.merges(), model.merges());
    }

    #[test]
    fn toy_merge_file_layout() {
        let model = TrainerConfig::new(9).train(["abab abab abab"]).unwrap();
        let m = merges_to_string(&model);
        let lines: Vec<&str> = m.lines().collect();
        assert_eq!(&lines[1..], &["a ##b", "ab ##ab"]);
        let v = vocab_to_string(&model);
        let vl: Vec<&str> = v.lines().collect();
        assert_eq!(
            vl,
            ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]", "a", "##a", "b", "##b", "ab", "##ab", "abab", "##abab"]
        );
    }

    #[test]
    fn rejects_tampered_files() {
        let model = TrainerConfig::new(9).train(["abab abab abab"]).unwrap();
        let v = vocab_to_string(&model);
        let m = merges_to_string(&model);
        assert!(model_from_strings(&v.replace("abab\n", "abba\n"), &m).is_err());
        assert!(model_from_strings(&v, &m.replace("#version", "#ver")).is_err());
        assert!(model_from_strings(&v, &format!("{m}oops\n")).is_err());
    }
}
