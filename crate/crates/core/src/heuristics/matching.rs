use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use super::lexicon::{SecurityLexicon, SHORT_KEYWORD_LEN};
use crate::preprocess::{CleanPost, Normalizer};

/// Patterns up to this length must start at a token boundary, so that
/// `sign` does not fire inside `assign`.
pub const BOUNDARY_MAX_LEN: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct KeywordStats {
    pub kw_count: usize,
    pub kw_ratio: f64,
}

#[derive(Debug, Clone)]
struct Pattern {
    text: String,
    exact: bool,
    needs_boundary: bool,
}

#[derive(Debug, Clone)]
struct Entry {
    keyword: String,
    /// longest first
    patterns: Vec<Pattern>,
}

/// A normalized pattern claimed by more than one lexicon entry. The first
/// entry keeps it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternCollision {
    pub pattern: String,
    pub kept_by: String,
    pub dropped_from: String,
}

/// Lexicon variants compiled to normalized patterns for scanning token
/// streams.
#[derive(Debug, Clone)]
pub struct KeywordMatcher {
    entries: Vec<Entry>,
    collisions: Vec<PatternCollision>,
}

impl KeywordMatcher {
    pub fn new(lexicon: &SecurityLexicon, normalizer: &Normalizer) -> Self {
        let mut owner: BTreeMap<String, String> = BTreeMap::new();
        let mut collisions = Vec::new();
        let mut entries = Vec::new();
        for keyword in lexicon.distinct_keywords() {
            let mut texts: Vec<String> = lexicon.variants()[keyword]
                .iter()
                .map(|v| normalizer.tokenize(v).join(" "))
                .filter(|p| !p.is_empty())
                .collect();
            texts.sort();
            texts.dedup();
            let mut patterns = Vec::new();
            for text in texts {
                match owner.get(&text) {
                    Some(first) if first != keyword => collisions.push(PatternCollision {
                        pattern: text,
                        kept_by: first.clone(),
                        dropped_from: keyword.to_string(),
                    }),
                    _ => {
                        owner.insert(text.clone(), keyword.to_string());
                        let len = text.chars().count();
                        patterns.push(Pattern {
                            exact: len <= SHORT_KEYWORD_LEN,
                            needs_boundary: len <= BOUNDARY_MAX_LEN,
                            text,
                        });
                    }
                }
            }
            patterns.sort_by(|a, b| b.text.len().cmp(&a.text.len()).then(a.text.cmp(&b.text)));
            entries.push(Entry {
                keyword: keyword.to_string(),
                patterns,
            });
        }
        for c in &collisions {
            log::debug!(
                "pattern {:?} of {:?} already belongs to {:?}",
                c.pattern,
                c.dropped_from,
                c.kept_by
            );
        }
        KeywordMatcher {
            entries,
            collisions,
        }
    }

    pub fn collisions(&self) -> &[PatternCollision] {
        &self.collisions
    }

    /// Normalized patterns per entry, longest first.
    pub fn patterns(&self) -> impl Iterator<Item = (&str, Vec<&str>)> {
        self.entries.iter().map(|e| {
            (
                e.keyword.as_str(),
                e.patterns.iter().map(|p| p.text.as_str()).collect(),
            )
        })
    }

    /// Per-entry match counts over a normalized token stream.
    pub fn matches(&self, tokens: &[String]) -> Vec<(&str, usize)> {
        let stream = tokens.join(" ");
        let mut token_starts = Vec::with_capacity(tokens.len());
        let mut offset = 0;
        for t in tokens {
            token_starts.push(offset);
            offset += t.len() + 1;
        }
        let at_boundary = |pos: usize| pos == 0 || stream.as_bytes()[pos - 1] == b' ';

        let mut out = Vec::new();
        for entry in &self.entries {
            let mut claimed: HashSet<usize> = HashSet::new();
            for pattern in &entry.patterns {
                if pattern.exact {
                    for (t, &start) in tokens.iter().zip(&token_starts) {
                        if *t == pattern.text {
                            claimed.insert(start);
                        }
                    }
                    continue;
                }
                let mut from = 0;
                while let Some(rel) = stream[from..].find(&pattern.text) {
                    let pos = from + rel;
                    if pattern.needs_boundary && !at_boundary(pos) {
                        let step = stream[pos..].chars().next().map_or(1, char::len_utf8);
                        from = pos + step;
                        continue;
                    }
                    claimed.insert(pos);
                    from = pos + pattern.text.len();
                }
            }
            if !claimed.is_empty() {
                out.push((entry.keyword.as_str(), claimed.len()));
            }
        }
        out
    }

    pub fn count_tokens(&self, tokens: &[String]) -> KeywordStats {
        if tokens.is_empty() {
            return KeywordStats::default();
        }
        let kw_count: usize = self.matches(tokens).iter().map(|(_, n)| n).sum();
        KeywordStats {
            kw_count,
            kw_ratio: kw_count as f64 / tokens.len() as f64,
        }
    }
}

/// Keyword count and ratio of a preprocessed post.
pub fn count_keywords(post: &CleanPost, matcher: &KeywordMatcher) -> KeywordStats {
    if post.token_count == 0 {
        return KeywordStats::default();
    }
    let kw_count: usize = matcher.matches(&post.tokens).iter().map(|(_, n)| n).sum();
    KeywordStats {
        kw_count,
        kw_ratio: kw_count as f64 / post.token_count as f64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::StopwordList;

    fn setup(lexicon: &str) -> (Normalizer, KeywordMatcher) {
        let lex = SecurityLexicon::parse(lexicon);
        let norm = Normalizer::new(StopwordList::english(), &lex);
        let matcher = KeywordMatcher::new(&lex, &norm);
        (norm, matcher)
    }

    fn toks(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn empty_post() {
        let (_, m) = setup("sql injection\n");
        assert_eq!(m.count_tokens(&[]), KeywordStats::default());
    }

    #[test]
    fn compound_variant_matches() {
        let (_, m) = setup("sql injection\n");
        let stats = m.count_tokens(&toks(&["prevent", "sql-inject", "php"]));
        assert!(stats.kw_count >= 1);
        assert!((stats.kw_ratio - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn embedded_short_stem_needs_boundary() {
        let (norm, m) = setup("signed\n");
        assert_eq!(m.count_tokens(&norm.tokenize("assigned values")).kw_count, 0);
        assert_eq!(m.count_tokens(&norm.tokenize("signed jar")).kw_count, 1);
    }

    #[test]
    fn short_keywords_match_whole_tokens_only() {
        let (norm, m) = setup("ssh\nmd5\n");
        assert_eq!(m.count_tokens(&norm.tokenize("sshd config")).kw_count, 0);
        assert_eq!(m.count_tokens(&norm.tokenize("ssh md5 md5")).kw_count, 3);
    }

    #[test]
    fn longer_patterns_match_inside_tokens() {
        let (norm, m) = setup("encrypt\n");
        assert_eq!(m.count_tokens(&norm.tokenize("reencrypting encrypted data")).kw_count, 2);
    }

    #[test]
    fn one_count_per_position() {
        let (norm, m) = setup("improper synchronization\n");
        let tokens = norm.tokenize("improper synchronisation and improper synchronization");
        assert_eq!(m.count_tokens(&tokens).kw_count, 2);
    }

    #[test]
    fn duplicate_entries_count_once() {
        let (norm, m) = setup("openssl\nopenssl\nopenssl\n");
        assert_eq!(m.count_tokens(&norm.tokenize("openssl")).kw_count, 1);
    }

    #[test]
    fn collisions_are_recorded() {
        let (_, m) = setup("signed\nsigning\n");
        assert!(m
            .collisions()
            .iter()
            .any(|c| c.pattern == "sign" && c.kept_by == "signed"));
    }
}
