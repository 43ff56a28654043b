//! Statistical entity tagger.
//!
//! Tokens are embedded by summing four rows of a hashed table (Bloom
//! embeddings), contextualised by two residual width-3 convolutions, and
//! classified per token into BILOU tags. Greedy argmax tags are repaired into
//! well-formed spans; see [`repair`] for the rules.

mod decode;
mod embed;
mod io;
mod model;
pub mod synth;
mod train;

use thiserror::Error;

pub use decode::{decode, repair, TokenSpan};
pub use embed::{normalize_surface, xxh64_row};
pub use model::{ModelDims, TaggerModel, CONV_LAYERS, CONV_WINDOW, NUM_SEEDS};
pub use train::{
    examples_from, gradient_check, train, train_examples, Example, GradCheckReport, Optimizer, TrainConfig,
    TrainingMeta,
};

#[doc(hidden)]
pub use train::gradient_check_mutant;

#[derive(Debug, Error)]
pub enum NerError {
    #[error("training data contains no sentences")]
    EmptyDataset,
    #[error("label `{0}` is not a statistical type of the model's schema")]
    LabelOutsideSchema(String),
    #[error("document `{0}` is annotated but not in the corpus")]
    UnknownDoc(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("bad model file: {0}")]
    ModelFormat(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One BILOU tag. Type indices refer to [`LabelSet::types`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Tag {
    O,
    B(usize),
    I(usize),
    L(usize),
    U(usize),
}

/// The tag inventory: `O` at index 0, then `B, I, L, U` for each type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSet {
    types: Vec<String>,
}

impl LabelSet {
    pub fn new(types: Vec<String>) -> Self {
        LabelSet { types }
    }

    pub fn types(&self) -> &[String] {
        &self.types
    }

    pub fn len(&self) -> usize {
        1 + 4 * self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn tag(&self, index: usize) -> Tag {
        assert!(index < self.len(), "label index out of range");
        if index == 0 {
            return Tag::O;
        }
        let t = (index - 1) / 4;
        match (index - 1) % 4 {
            0 => Tag::B(t),
            1 => Tag::I(t),
            2 => Tag::L(t),
            _ => Tag::U(t),
        }
    }

    pub fn index(&self, tag: Tag) -> usize {
        match tag {
            Tag::O => 0,
            Tag::B(t) => 1 + 4 * t,
            Tag::I(t) => 2 + 4 * t,
            Tag::L(t) => 3 + 4 * t,
            Tag::U(t) => 4 + 4 * t,
        }
    }

    pub fn type_index(&self, name: &str) -> Option<usize> {
        self.types.iter().position(|t| t == name)
    }

    /// `O`, `B-T`, `I-T`, `L-T`, `U-T`, ... in index order.
    pub fn names(&self) -> Vec<String> {
        let mut out = vec!["O".to_string()];
        for t in &self.types {
            for p in ["B", "I", "L", "U"] {
                out.push(format!("{p}-{t}"));
            }
        }
        out
    }

    /// Inverse of [`LabelSet::names`]; rejects lists not closed under BILOU.
    pub fn from_names(names: &[String]) -> Result<Self, NerError> {
        let bad = || NerError::ModelFormat("label list must be O followed by B/I/L/U groups".into());
        if names.first().map(String::as_str) != Some("O") || (names.len() - 1) % 4 != 0 {
            return Err(bad());
        }
        let mut types = Vec::new();
        for group in names[1..].chunks(4) {
            let t = group[0].strip_prefix("B-").ok_or_else(bad)?;
            for (p, n) in ["I", "L", "U"].iter().zip(&group[1..]) {
                if *n != format!("{p}-{t}") {
                    return Err(bad());
                }
            }
            types.push(t.to_string());
        }
        let set = LabelSet { types };
        Ok(set)
    }
}
