//! Stochastic BPE tokenization and morphological alignment analysis.
//!
//! * [`bpe`]: train a BPE vocabulary, encode deterministically or with merge
//!   dropout, decode.
//! * [`sampling`]: empirical distribution of dropout segmentations of a word.
//! * [`gold`]: gold morphological boundary lexicons.
//! * [`align`]: boundary F1 scoring and per-language reports.
//! * [`inject`]: morphology-aligned replacements in token streams.
//! * [`pipeline`]: corpus mixtures and reproducible runs behind the CLI.

pub mod align;
pub mod bpe;
pub mod error;
pub mod gold;
pub mod inject;
pub mod normalize;
pub mod par;
pub mod pipeline;
pub mod sampling;
pub mod seed;
pub mod synthetic;

pub use bpe::{DropoutConfig, Segmentation, TokenizerModel, TrainerConfig};
pub use error::{Error, Result};
pub use gold::{BoundarySet, GoldLexicon};
pub use par::Exec;
pub use sampling::SegmentationDistribution;
