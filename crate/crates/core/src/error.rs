use std::path::PathBuf;

use thiserror::Error;

use crate::alignment::AlignError;
use crate::embeddings::EmbeddingError;
use crate::evaluation::EvalError;
use crate::features::FeatureError;
use crate::lexicon::LexiconError;

/// Pipeline-level error. [`Error::exit_code`] maps it to the CLI exit
/// status: 2 configuration or contract error, 3 data or parse error,
/// 4 numeric error.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    File { path: PathBuf, source: Box<Error> },
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Align(#[from] AlignError),
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub const EXIT_CONTRACT: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

impl Error {
    pub fn in_file(self, path: impl Into<PathBuf>) -> Self {
        Error::File {
            path: path.into(),
            source: Box::new(self),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => EXIT_CONTRACT,
            Error::File { source, .. } => source.exit_code(),
            Error::Io(_) => EXIT_DATA,
            Error::Embedding(e) => embedding_code(e),
            Error::Align(e) => align_code(e),
            Error::Lexicon(e) => match e {
                LexiconError::Threshold(_) | LexiconError::Dimension { .. } => EXIT_CONTRACT,
                LexiconError::Align(a) => align_code(a),
                LexiconError::Embedding(x) => embedding_code(x),
                _ => EXIT_DATA,
            },
            Error::Feature(e) => match e {
                FeatureError::NgramOrder(_) | FeatureError::EmptyIndex => EXIT_CONTRACT,
                _ => EXIT_DATA,
            },
            Error::Eval(e) => match e {
                EvalError::Folds { .. } | EvalError::LengthMismatch { .. } => EXIT_CONTRACT,
                EvalError::NonFinite(_) => EXIT_NUMERIC,
                _ => EXIT_DATA,
            },
        }
    }
}

fn embedding_code(e: &EmbeddingError) -> i32 {
    match e {
        EmbeddingError::Dimension { .. } | EmbeddingError::Threshold(_) => EXIT_CONTRACT,
        EmbeddingError::ZeroNorm => EXIT_NUMERIC,
        _ => EXIT_DATA,
    }
}

fn align_code(e: &AlignError) -> i32 {
    match e {
        AlignError::Numeric(_) => EXIT_NUMERIC,
        AlignError::Dimension { .. } => EXIT_CONTRACT,
        AlignError::Embedding(x) => embedding_code(x),
        _ => EXIT_DATA,
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
