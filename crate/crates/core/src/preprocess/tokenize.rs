use std::collections::HashMap;

use crate::heuristics::SecurityLexicon;
use crate::preprocess::porter::stem_fixed_point;
use crate::preprocess::StopwordList;

/// Splits lowercase text into raw word tokens.
///
/// Tokens are maximal alphanumeric runs; `-`, `.` and `_` are kept when
/// they sit between two alphanumeric characters, so `sql-injection`,
/// `x.509` and `private_key` stay whole.
pub fn split_words(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut current = String::new();
    for (i, &c) in chars.iter().enumerate() {
        if c.is_alphanumeric() {
            current.extend(c.to_lowercase());
            continue;
        }
        let joins = matches!(c, '-' | '.' | '_')
            && !current.is_empty()
            && chars.get(i + 1).is_some_and(|n| n.is_alphanumeric());
        if joins {
            current.push(c);
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// Fixed-point stem with trailing connectors removed, so that a stem such
/// as `a-` (from `a-s`) does not split differently on a second pass.
fn stem_word(word: &str) -> String {
    let mut current = word.to_string();
    loop {
        let next = stem_fixed_point(&current)
            .trim_end_matches(['-', '.', '_'])
            .to_string();
        if next == current {
            return next;
        }
        current = next;
    }
}

/// Multi-word lexicon phrases keyed by their normalized word sequence.
#[derive(Debug, Clone, Default)]
pub struct PhraseTable {
    joined: HashMap<Vec<String>, String>,
    max_len: usize,
}

impl PhraseTable {
    pub fn build(lexicon: &SecurityLexicon, stopwords: &StopwordList) -> Self {
        let mut table = PhraseTable::default();
        for variants in lexicon.variants().values() {
            for variant in variants {
                let key: Vec<String> = variant
                    .split_whitespace()
                    .flat_map(split_words)
                    .filter(|w| !stopwords.contains(w))
                    .map(|w| stem_word(&w))
                    .filter(|s| !s.is_empty() && !stopwords.contains(s))
                    .collect();
                if key.len() < 2 || !variant.contains(' ') {
                    continue;
                }
                let joined = stem_word(&key.join("-"));
                table.max_len = table.max_len.max(key.len());
                table.joined.entry(key).or_insert(joined);
            }
        }
        table
    }

    pub fn len(&self) -> usize {
        self.joined.len()
    }

    pub fn is_empty(&self) -> bool {
        self.joined.is_empty()
    }

    /// Greedy left-to-right, longest phrase first.
    fn join(&self, tokens: Vec<String>) -> Vec<String> {
        if self.joined.is_empty() {
            return tokens;
        }
        let mut out = Vec::with_capacity(tokens.len());
        let mut i = 0;
        'outer: while i < tokens.len() {
            let longest = self.max_len.min(tokens.len() - i);
            for n in (2..=longest).rev() {
                if let Some(joined) = self.joined.get(&tokens[i..i + n]) {
                    out.push(joined.clone());
                    i += n;
                    continue 'outer;
                }
            }
            out.push(tokens[i].clone());
            i += 1;
        }
        out
    }
}

/// Text normalizer: lowercase, split, drop stopwords, stem, join lexicon
/// phrases.
///
/// Stems are taken to their fixed point and stopwords are checked both
/// before and after stemming, which makes normalization idempotent.
#[derive(Debug, Clone)]
pub struct Normalizer {
    stopwords: StopwordList,
    phrases: PhraseTable,
}

impl Normalizer {
    pub fn new(stopwords: StopwordList, lexicon: &SecurityLexicon) -> Self {
        let phrases = PhraseTable::build(lexicon, &stopwords);
        Normalizer { stopwords, phrases }
    }

    /// Normalizer without phrase joining.
    pub fn without_phrases(stopwords: StopwordList) -> Self {
        Normalizer {
            stopwords,
            phrases: PhraseTable::default(),
        }
    }

    pub fn stopwords(&self) -> &StopwordList {
        &self.stopwords
    }

    pub fn tokenize(&self, text: &str) -> Vec<String> {
        let stems: Vec<String> = split_words(text)
            .into_iter()
            .filter(|w| !self.stopwords.contains(w))
            .map(|w| stem_word(&w))
            .filter(|s| !s.is_empty() && !self.stopwords.contains(s))
            .collect();
        self.phrases.join(stems)
    }
}

/// One-shot form of [`Normalizer::tokenize`].
pub fn tokenize_normalize(
    text: &str,
    stopwords: &StopwordList,
    lexicon: &SecurityLexicon,
) -> Vec<String> {
    Normalizer::new(stopwords.clone(), lexicon).tokenize(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn normalizer() -> Normalizer {
        Normalizer::new(StopwordList::english(), &SecurityLexicon::builtin())
    }

    #[test]
    fn split_keeps_inner_connectors() {
        assert_eq!(
            split_words("Use x.509, private-key and foo_bar. -dash end-"),
            vec!["use", "x.509", "private-key", "and", "foo_bar", "dash", "end"]
        );
    }

    #[test]
    fn plural_and_singular_agree() {
        let n = normalizer();
        assert_eq!(n.tokenize("Attacks"), vec!["attack"]);
        assert_eq!(n.tokenize("attack"), vec!["attack"]);
    }

    #[test]
    fn compound_tokens_survive() {
        let n = normalizer();
        assert_eq!(n.tokenize("x.509 private-key"), vec!["x.509", "private-kei"]);
    }

    #[test]
    fn empty_input() {
        assert!(normalizer().tokenize("").is_empty());
        assert!(normalizer().tokenize("the of and").is_empty());
    }

    #[test]
    fn phrases_are_joined() {
        let n = normalizer();
        assert_eq!(
            n.tokenize("How to prevent SQL injection in PHP"),
            vec!["prevent", "sql-inject", "php"]
        );
        assert_eq!(n.tokenize("a man in the middle attack"), vec!["man-middl", "attack"]);
    }

    #[test]
    fn apostrophes_split() {
        assert_eq!(normalizer().tokenize("don't hash"), vec!["hash"]);
    }
}
