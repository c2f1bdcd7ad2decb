//! Byte-pair encoding with merge dropout.

mod encode;
pub mod io;
mod model;
mod train;

pub(crate) use encode::check_probability;
pub use encode::{DropoutConfig, Segmentation};
pub use model::{
    ModelSettings, TokenId, TokenizerModel, TypeId, DEFAULT_CONTINUATION_PREFIX, DEFAULT_SPECIAL_TOKENS, DEFAULT_UNK,
};
pub use train::{count_words, train_bpe, TrainerConfig};
