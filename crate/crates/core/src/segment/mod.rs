//! Break insertion for plain sentences.
//!
//! Two segmenters share one output grammar: the character-counting
//! baseline ([`segment_count_char`]) and a linear gap classifier
//! ([`LinearSegmenterModel`]) trained with averaged-perceptron updates and
//! decoded by constrained beam search ([`segment_learned`]).

mod count_char;
mod decode;
mod features;
mod model;

use std::fmt;

use thiserror::Error;

use crate::annotate::BreakToken;

pub use count_char::{segment_count_char, segment_count_char_batch};
pub use decode::{
    decode, greedy_decode, raw_beam_search, segment_learned, segment_learned_batch, segment_text,
    DecodeMode, DecodeOptions, Decoded,
};
pub use features::{extract_features, GapContext};
pub use model::{fine_tune, train, LinearSegmenterModel, TrainingConfig, TrainingMeta, MODEL_FORMAT_VERSION};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SegmentError {
    #[error("empty sentence")]
    EmptySentence,
    #[error("word {word:?} is longer than the {limit}-character line limit")]
    WordTooLong { word: String, limit: usize },
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("sentence {index} of the fine-tuning subset has no <eol>")]
    SubsetViolation { index: usize },
    #[error("training sentence {index} is not strictly annotated: {reason}")]
    NotStrict { index: usize, reason: String },
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("model line {line}: {reason}")]
    ModelFormat { line: usize, reason: String },
    #[error("unsupported model format version {0:?}")]
    UnknownVersion(String),
}

/// The decision taken at one inter-word gap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GapLabel {
    NoBreak,
    Eol,
    Eob,
}

impl GapLabel {
    pub const ALL: [GapLabel; 3] = [GapLabel::NoBreak, GapLabel::Eol, GapLabel::Eob];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            GapLabel::NoBreak => "NONE",
            GapLabel::Eol => "EOL",
            GapLabel::Eob => "EOB",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        GapLabel::ALL.into_iter().find(|l| l.name() == s)
    }

    pub fn as_break(self) -> Option<BreakToken> {
        match self {
            GapLabel::NoBreak => None,
            GapLabel::Eol => Some(BreakToken::Eol),
            GapLabel::Eob => Some(BreakToken::Eob),
        }
    }
}

impl From<Option<BreakToken>> for GapLabel {
    fn from(b: Option<BreakToken>) -> Self {
        match b {
            None => GapLabel::NoBreak,
            Some(BreakToken::Eol) => GapLabel::Eol,
            Some(BreakToken::Eob) => GapLabel::Eob,
        }
    }
}

impl fmt::Display for GapLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}
