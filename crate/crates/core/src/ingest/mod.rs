//! Loading Q&A threads from Stack Exchange XML dumps and JSONL files.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

mod jsonl;
mod stats;
mod xml;

pub use jsonl::{export_jsonl, parse_jsonl, write_jsonl};
pub use stats::{corpus_stats, CorpusStats, FieldSummary, SourceStats};
pub use xml::{parse_stackexchange_xml, parse_stackexchange_xml_str};

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed XML at line {line}: {message}")]
    Xml { line: usize, message: String },
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("unknown post source {0:?}")]
    UnknownSource(String),
    #[error("failed to serialize post {id}: {message}")]
    Export { id: u64, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Source {
    StackOverflow,
    SecurityStackExchange,
    Other,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::StackOverflow => "StackOverflow",
            Source::SecurityStackExchange => "SecurityStackExchange",
            Source::Other => "Other",
        })
    }
}

impl FromStr for Source {
    type Err = IngestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['-', '_', ' '], "").as_str() {
            "stackoverflow" | "so" => Ok(Source::StackOverflow),
            "securitystackexchange" | "sse" | "security" => Ok(Source::SecurityStackExchange),
            "other" => Ok(Source::Other),
            _ => Err(IngestError::UnknownSource(s.to_string())),
        }
    }
}

/// A question with its answers, as found in the dump.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawPost {
    pub id: u64,
    pub source: Source,
    pub title: String,
    pub question_html: String,
    pub answers_html: Vec<String>,
    pub tags: Vec<String>,
    #[serde(default)]
    pub score: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created: Option<DateTime<Utc>>,
}

/// A row or line that was skipped, with the reason.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IngestIssue {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct IngestOutcome {
    pub posts: Vec<RawPost>,
    pub linked_answers: usize,
    pub orphan_answers: usize,
    pub issues: Vec<IngestIssue>,
}

/// Ingest-time tag normalization: lowercase and trim, nothing else.
fn clean_tags<I: IntoIterator<Item = S>, S: AsRef<str>>(tags: I) -> Vec<String> {
    tags.into_iter()
        .map(|t| t.as_ref().trim().to_lowercase())
        .filter(|t| !t.is_empty())
        .collect()
}
