//! Post normalization: code and markup stripping, tokenization, stopword
//! removal and Porter stemming.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::ingest::{RawPost, Source};

mod html;
pub mod porter;
mod stopwords;
mod tokenize;

pub use html::strip_code_and_html;
pub use stopwords::StopwordList;
pub use tokenize::{split_words, tokenize_normalize, Normalizer, PhraseTable};

#[derive(Debug, thiserror::Error)]
pub enum PreprocessError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("stopword list {0} is empty")]
    EmptyStopwords(String),
}

/// A post reduced to its normalized token stream.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanPost {
    pub id: u64,
    pub source: Source,
    pub tokens: Vec<String>,
    pub tags: Vec<String>,
    pub token_count: usize,
}

impl CleanPost {
    /// Posts whose text normalizes to nothing are kept but cannot be embedded.
    pub fn is_empty(&self) -> bool {
        self.token_count == 0
    }
}

pub fn normalize_tag(tag: &str) -> String {
    tag.trim().to_lowercase()
}

impl Normalizer {
    /// Tokens of title, question and answers, in that order. Tags are only
    /// lowercased and trimmed.
    pub fn preprocess_post(&self, post: &RawPost) -> CleanPost {
        let mut tokens = self.tokenize(&post.title);
        tokens.extend(self.tokenize(&strip_code_and_html(&post.question_html)));
        for answer in &post.answers_html {
            tokens.extend(self.tokenize(&strip_code_and_html(answer)));
        }
        CleanPost {
            id: post.id,
            source: post.source,
            token_count: tokens.len(),
            tokens,
            tags: post.tags.iter().map(|t| normalize_tag(t)).collect(),
        }
    }
}
