use std::collections::BTreeSet;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::preprocess::PreprocessError;

const BUILTIN_EN: &str = include_str!("../../data/stopwords_en.txt");

/// A frozen set of lowercase stopwords, identified by name and content hash.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StopwordList {
    name: String,
    words: BTreeSet<String>,
    sha256: String,
}

impl StopwordList {
    /// The vendored English list.
    pub fn english() -> Self {
        Self::parse("builtin:en", BUILTIN_EN).expect("builtin stopword list is valid")
    }

    pub fn from_file(path: &Path) -> Result<Self, PreprocessError> {
        let text = std::fs::read_to_string(path).map_err(|source| PreprocessError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&path.display().to_string(), &text)
    }

    /// Parses one word per line; blank lines and `#` comments are skipped.
    pub fn parse(name: &str, text: &str) -> Result<Self, PreprocessError> {
        let words: BTreeSet<String> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_lowercase)
            .collect();
        if words.is_empty() {
            return Err(PreprocessError::EmptyStopwords(name.to_string()));
        }
        Ok(StopwordList {
            name: name.to_string(),
            words,
            sha256: hex::encode(Sha256::digest(text.as_bytes())),
        })
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Hex SHA-256 of the source text.
    pub fn sha256(&self) -> &str {
        &self.sha256
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_loads() {
        let list = StopwordList::english();
        assert!(list.contains("the"));
        assert!(!list.contains("attack"));
        assert_eq!(list.sha256().len(), 64);
    }

    #[test]
    fn comments_and_case() {
        let list = StopwordList::parse("t", "# header\nThe\n\n  of \n").unwrap();
        assert_eq!(list.len(), 2);
        assert!(list.contains("the"));
    }

    #[test]
    fn empty_list_rejected() {
        assert!(StopwordList::parse("t", "# nothing\n").is_err());
    }
}
