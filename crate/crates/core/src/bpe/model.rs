use std::collections::HashMap;

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_CONTINUATION_PREFIX: &str = "##";
pub const DEFAULT_UNK: &str = "[UNK]";
pub const DEFAULT_SPECIAL_TOKENS: [&str; 5] = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"];

/// Index of a surface unit (a character or a merged string) in the model.
pub type TypeId = u32;
/// Index of a token string in the vocabulary.
pub type TokenId = u32;

/// Settings that do not depend on the corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSettings {
    pub special_tokens: Vec<String>,
    pub unk_token: String,
    pub continuation_prefix: String,
    pub lowercase: bool,
}

impl Default for ModelSettings {
    fn default() -> Self {
        Self {
            special_tokens: DEFAULT_SPECIAL_TOKENS.iter().map(|s| s.to_string()).collect(),
            unk_token: DEFAULT_UNK.to_string(),
            continuation_prefix: DEFAULT_CONTINUATION_PREFIX.to_string(),
            lowercase: true,
        }
    }
}

impl ModelSettings {
    pub(crate) fn validate(&self) -> Result<usize> {
        if self.continuation_prefix.is_empty() || self.continuation_prefix.chars().any(char::is_whitespace) {
            return Err(Error::Config(format!(
                "continuation prefix {:?} must be non-empty and whitespace-free",
                self.continuation_prefix
            )));
        }
        for (i, tok) in self.special_tokens.iter().enumerate() {
            if tok.is_empty() || tok.chars().any(char::is_whitespace) {
                return Err(Error::Config(format!(
                    "special token {tok:?} must be non-empty and whitespace-free"
                )));
            }
            if self.special_tokens[..i].contains(tok) {
                return Err(Error::Config(format!("duplicate special token {tok:?}")));
            }
        }
        self.special_tokens
            .iter()
            .position(|t| *t == self.unk_token)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown token {:?} is not among the special tokens",
                    self.unk_token
                ))
            })
    }
}

/// A trained BPE tokenizer: vocabulary plus ranked merge table.
///
/// Merges operate on surface strings. Whether a unit starts its word is a
/// property of its position and is only made visible when the unit is
/// rendered as a token: word-initial units are written bare, word-internal
/// units carry the continuation prefix. Every surface unit therefore owns two
/// consecutive vocabulary ids, `specials + 2 * type` (initial) and
/// `specials + 2 * type + 1` (continuation).
#[derive(Debug, Clone)]
pub struct TokenizerModel {
    settings: ModelSettings,
    unk_id: TokenId,
    types: Vec<String>,
    type_ids: HashMap<String, TypeId>,
    char_types: FxHashMap<char, TypeId>,
    alphabet_len: usize,
    merges: Vec<(TypeId, TypeId)>,
    /// pair -> (rank, merged type)
    merge_table: FxHashMap<(TypeId, TypeId), (u32, TypeId)>,
    vocab: Vec<String>,
    token_ids: HashMap<String, TokenId>,
}

impl TokenizerModel {
    /// Build a model from an alphabet and merges written as in the merge
    /// file: `(left, prefix + right)`.
    pub fn from_parts<S: AsRef<str>>(
        settings: ModelSettings,
        alphabet: impl IntoIterator<Item = char>,
        merges: impl IntoIterator<Item = (S, S)>,
    ) -> Result<Self> {
        let unk_index = settings.validate()?;
        let prefix = settings.continuation_prefix.clone();

        let mut types: Vec<String> = Vec::new();
        let mut type_ids: HashMap<String, TypeId> = HashMap::new();
        let mut char_types = FxHashMap::default();
        for c in alphabet {
            if c.is_whitespace() {
                return Err(Error::Config(format!("whitespace {c:?} in alphabet")));
            }
            if char_types.contains_key(&c) {
                return Err(Error::Config(format!("duplicate alphabet character {c:?}")));
            }
            let id = types.len() as TypeId;
            char_types.insert(c, id);
            type_ids.insert(c.to_string(), id);
            types.push(c.to_string());
        }
        let alphabet_len = types.len();

        let mut merge_list = Vec::new();
        let mut merge_table = FxHashMap::default();
        for (left, right) in merges {
            let (left, right) = (left.as_ref(), right.as_ref());
            let right_surface = right.strip_prefix(prefix.as_str()).ok_or_else(|| {
                Error::Config(format!("merge right-hand side {right:?} lacks the continuation prefix"))
            })?;
            let lookup = |s: &str| {
                type_ids
                    .get(s)
                    .copied()
                    .ok_or_else(|| Error::Config(format!("merge operand {s:?} is not a known unit")))
            };
            let pair = (lookup(left)?, lookup(right_surface)?);
            if merge_table.contains_key(&pair) {
                return Err(Error::Config(format!("duplicate merge {left:?} {right:?}")));
            }
            let merged = format!("{left}{right_surface}");
            if merged.starts_with(prefix.as_str()) {
                return Err(Error::Config(format!(
                    "merge output {merged:?} starts with the continuation prefix"
                )));
            }
            let out = match type_ids.get(&merged) {
                Some(&id) => id,
                None => {
                    let id = types.len() as TypeId;
                    type_ids.insert(merged.clone(), id);
                    types.push(merged);
                    id
                }
            };
            merge_table.insert(pair, (merge_list.len() as u32, out));
            merge_list.push(pair);
        }

        let mut vocab: Vec<String> = settings.special_tokens.clone();
        for t in &types {
            vocab.push(t.clone());
            vocab.push(format!("{prefix}{t}"));
        }
        let mut token_ids = HashMap::with_capacity(vocab.len());
        for (i, tok) in vocab.iter().enumerate() {
            if token_ids.insert(tok.clone(), i as TokenId).is_some() {
                return Err(Error::Config(format!("token {tok:?} appears twice in the vocabulary")));
            }
        }

        Ok(Self {
            unk_id: unk_index as TokenId,
            settings,
            types,
            type_ids,
            char_types,
            alphabet_len,
            merges: merge_list,
            merge_table,
            vocab,
            token_ids,
        })
    }

    pub fn settings(&self) -> &ModelSettings {
        &self.settings
    }

    pub fn continuation_prefix(&self) -> &str {
        &self.settings.continuation_prefix
    }

    pub fn special_tokens(&self) -> &[String] {
        &self.settings.special_tokens
    }

    pub fn unk_token(&self) -> &str {
        &self.settings.unk_token
    }

    pub fn unk_id(&self) -> TokenId {
        self.unk_id
    }

    pub fn lowercase(&self) -> bool {
        self.settings.lowercase
    }

    /// Number of token strings (ids are `0..vocab_size()`).
    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    /// Special tokens plus distinct surface units; the quantity bounded by
    /// the trainer's `vocab_size`.
    pub fn unit_inventory_size(&self) -> usize {
        self.settings.special_tokens.len() + self.types.len()
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.vocab.get(id as usize).map(String::as_str)
    }

    pub fn token_id(&self, token: &str) -> Option<TokenId> {
        self.token_ids.get(token).copied()
    }

    pub fn contains_token(&self, token: &str) -> bool {
        self.token_ids.contains_key(token)
    }

    pub fn alphabet(&self) -> impl Iterator<Item = char> + '_ {
        self.types[..self.alphabet_len]
            .iter()
            .map(|s| s.chars().next().expect("alphabet entries are single characters"))
    }

    pub fn alphabet_len(&self) -> usize {
        self.alphabet_len
    }

    pub fn num_merges(&self) -> usize {
        self.merges.len()
    }

    /// Merges in priority order, rendered as `(left, prefix + right)`.
    pub fn merges(&self) -> Vec<(String, String)> {
        self.merges
            .iter()
            .map(|&(l, r)| {
                (
                    self.types[l as usize].clone(),
                    format!("{}{}", self.settings.continuation_prefix, self.types[r as usize]),
                )
            })
            .collect()
    }

    pub fn surface(&self, ty: TypeId) -> &str {
        &self.types[ty as usize]
    }

    pub fn surface_type(&self, surface: &str) -> Option<TypeId> {
        self.type_ids.get(surface).copied()
    }

    pub(crate) fn char_type(&self, c: char) -> Option<TypeId> {
        self.char_types.get(&c).copied()
    }

    /// `(rank, merged type)` for an adjacent pair, if a merge exists.
    pub(crate) fn merge_for(&self, left: TypeId, right: TypeId) -> Option<(u32, TypeId)> {
        self.merge_table.get(&(left, right)).copied()
    }

    pub fn token_id_of(&self, ty: TypeId, continuation: bool) -> TokenId {
        (self.settings.special_tokens.len() + 2 * ty as usize + usize::from(continuation)) as TokenId
    }

    /// Token string for a surface unit at a word-initial or word-internal
    /// position.
    pub fn render(&self, ty: TypeId, continuation: bool) -> &str {
        &self.vocab[self.token_id_of(ty, continuation) as usize]
    }

    /// Inverse of [`render`](Self::render) for non-special tokens.
    pub fn parse_token(&self, token: &str) -> Option<(TypeId, bool)> {
        let id = self.token_id(token)? as usize;
        let specials = self.settings.special_tokens.len();
        if id < specials {
            return None;
        }
        let k = id - specials;
        Some(((k / 2) as TypeId, k % 2 == 1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> TokenizerModel {
        TokenizerModel::from_parts(ModelSettings::default(), ['a', 'b'], [("a", "##b"), ("ab", "##ab")]).unwrap()
    }

    #[test]
    fn ids_are_dense_and_specials_first() {
        let m = toy();
        assert_eq!(m.vocab_size(), 5 + 2 * 4);
        for (i, s) in DEFAULT_SPECIAL_TOKENS.iter().enumerate() {
            assert_eq!(m.token_id(s), Some(i as TokenId));
        }
        for id in 0..m.vocab_size() as TokenId {
            assert_eq!(m.token_id(m.token(id).unwrap()), Some(id));
        }
        assert_eq!(m.unk_id(), 1);
    }

    #[test]
    fn merge_outputs_are_in_vocab() {
        let m = toy();
        for (l, r) in m.merges() {
            let joined = format!("{l}{}", r.trim_start_matches("##"));
            assert!(m.contains_token(&joined));
            assert!(m.contains_token(&format!("##{joined}")));
        }
        assert_eq!(m.merges()[1], ("ab".to_string(), "##ab".to_string()));
    }

    #[test]
    fn rejects_bad_parts() {
        let s = ModelSettings::default();
        assert!(TokenizerModel::from_parts(s.clone(), ['a'], [("a", "a")]).is_err());
        assert!(TokenizerModel::from_parts(s.clone(), ['a'], [("a", "##c")]).is_err());
        assert!(TokenizerModel::from_parts(s.clone(), ['a'], [("a", "##a"), ("a", "##a")]).is_err());
        assert!(TokenizerModel::from_parts(s.clone(), ['#'], [("#", "###")]).is_err());
        let no_unk = ModelSettings {
            special_tokens: vec!["[PAD]".into()],
            ..ModelSettings::default()
        };
        assert!(TokenizerModel::from_parts(no_unk, ['a'], Vec::<(&str, &str)>::new()).is_err());
    }

    #[test]
    fn parse_token_inverts_render() {
        let m = toy();
        for ty in 0..4 {
            for cont in [false, true] {
                assert_eq!(m.parse_token(m.render(ty, cont)), Some((ty, cont)));
            }
        }
        assert_eq!(m.parse_token("[UNK]"), None);
    }
}
