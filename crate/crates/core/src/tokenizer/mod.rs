//! k-disc trajectory tokenization.
//!
//! Half-second segments are clustered into a codebook of canonical
//! prototypes. A trajectory is encoded greedily, one segment at a time, and
//! decoded by chaining prototypes head to tail from a start pose.

mod codebook;
mod codec;
mod embedding;
mod text;

pub use codebook::{fit_codebook, Codebook, CodebookFit};
pub use codec::{decode, encode, encode_from, endpoint_error};
pub use embedding::{init_token_embeddings, EmbeddingTable};
pub use text::{parse, serialize, FormatError, FormatReason, MAX_WIRE_ID};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::GeometryError;

/// Default desk-scale vocabulary size.
pub const DEFAULT_VOCAB: usize = 128;
/// Vocabulary size of the full-scale tokenizer.
pub const FULL_VOCAB: usize = 2048;

#[derive(Debug, Error)]
pub enum TokenizerError {
    #[error("need at least {needed} distinct segments to fit {needed} clusters, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("vocabulary size must be in 1..={MAX_WIRE_ID}+1, got {0}")]
    BadVocabSize(usize),
    #[error("token id {id} outside vocabulary of size {vocab}")]
    Vocabulary { id: usize, vocab: usize },
    #[error("cannot encode an empty trajectory")]
    EmptyTrajectory,
    #[error("embedding table needs at least 2 finite rows, got {0}")]
    DegenerateEmbeddings(usize),
    #[error("codebook file: {0}")]
    Persistence(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Token ids of one trajectory.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenSequence(Vec<usize>);

impl TokenSequence {
    pub fn new(ids: Vec<usize>) -> Self {
        TokenSequence(ids)
    }

    pub fn ids(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &usize> {
        self.0.iter()
    }

    pub fn validate(&self, vocab: usize) -> Result<(), TokenizerError> {
        match self.0.iter().find(|&&id| id >= vocab) {
            Some(&id) => Err(TokenizerError::Vocabulary { id, vocab }),
            None => Ok(()),
        }
    }
}

impl From<Vec<usize>> for TokenSequence {
    fn from(v: Vec<usize>) -> Self {
        TokenSequence(v)
    }
}
