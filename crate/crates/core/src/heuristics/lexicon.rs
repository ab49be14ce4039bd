use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use sha2::{Digest, Sha256};

use super::HeuristicsError;
use crate::preprocess::porter::{stem, stem_fixed_point};

const BUILTIN: &str = include_str!("../../data/security_keywords.txt");

/// Variants of at most this many characters only match whole tokens.
pub const SHORT_KEYWORD_LEN: usize = 3;

/// The keyword list plus the spelling variants used for matching.
#[derive(Debug, Clone)]
pub struct SecurityLexicon {
    keywords: Vec<String>,
    variants: BTreeMap<String, BTreeSet<String>>,
    short_exact: BTreeSet<String>,
    sha256: String,
}

impl SecurityLexicon {
    /// The vendored security keyword list.
    pub fn builtin() -> Self {
        Self::parse(BUILTIN)
    }

    pub fn from_file(path: &Path) -> Result<Self, HeuristicsError> {
        let text = std::fs::read_to_string(path).map_err(|source| HeuristicsError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let lexicon = Self::parse(&text);
        if lexicon.keywords.is_empty() {
            return Err(HeuristicsError::EmptyLexicon(path.to_path_buf()));
        }
        Ok(lexicon)
    }

    /// One keyword per line; `#` starts a comment line. Entries are kept in
    /// file order, duplicates included.
    pub fn parse(text: &str) -> Self {
        let keywords: Vec<String> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_lowercase)
            .collect();
        let mut variants = BTreeMap::new();
        let mut short_exact = BTreeSet::new();
        for keyword in &keywords {
            let set = expand_variants(keyword);
            short_exact.extend(
                set.iter()
                    .filter(|v| v.chars().count() <= SHORT_KEYWORD_LEN)
                    .cloned(),
            );
            variants.insert(keyword.clone(), set);
        }
        SecurityLexicon {
            keywords,
            variants,
            short_exact,
            sha256: hex::encode(Sha256::digest(text.as_bytes())),
        }
    }

    /// Entries as listed, duplicates included.
    pub fn keywords(&self) -> &[String] {
        &self.keywords
    }

    /// Distinct entries in first-seen order.
    pub fn distinct_keywords(&self) -> Vec<&str> {
        let mut seen = BTreeSet::new();
        self.keywords
            .iter()
            .filter(|k| seen.insert(k.as_str()))
            .map(String::as_str)
            .collect()
    }

    pub fn variants(&self) -> &BTreeMap<String, BTreeSet<String>> {
        &self.variants
    }

    pub fn short_exact(&self) -> &BTreeSet<String> {
        &self.short_exact
    }

    pub fn sha256(&self) -> &str {
        &self.sha256
    }
}

/// British/American suffix swaps applied per word.
fn spellings(word: &str) -> Vec<String> {
    const SWAPS: &[(&str, &str)] = &[
        ("isation", "ization"),
        ("ization", "isation"),
        ("ising", "izing"),
        ("izing", "ising"),
        ("ised", "ized"),
        ("ized", "ised"),
        ("ise", "ize"),
        ("ize", "ise"),
    ];
    let mut out = vec![word.to_string()];
    if let Some((from, to)) = SWAPS.iter().find(|(from, _)| word.ends_with(from)) {
        out.push(format!("{}{}", &word[..word.len() - from.len()], to));
    }
    out
}

/// Every surface form a keyword is matched under: the keyword itself,
/// -ise/-ize spellings, hyphenated and joined forms of multi-word entries,
/// and Porter-stemmed forms of all of these.
pub fn expand_variants(keyword: &str) -> BTreeSet<String> {
    let keyword = keyword.trim().to_lowercase();
    let words: Vec<&str> = keyword.split_whitespace().collect();
    let mut out = BTreeSet::new();
    if words.is_empty() {
        return out;
    }
    if keyword.chars().count() <= SHORT_KEYWORD_LEN {
        out.insert(keyword);
        return out;
    }

    // cartesian product of per-word spellings
    let mut combos: Vec<Vec<String>> = vec![Vec::new()];
    for word in &words {
        let options = spellings(word);
        combos = combos
            .into_iter()
            .flat_map(|prefix| {
                options.iter().map(move |o| {
                    let mut next = prefix.clone();
                    next.push(o.clone());
                    next
                })
            })
            .collect();
    }

    // single-pass and fixed-point stems are both kept as surface forms
    let stemmers: [fn(&str) -> String; 2] = [stem, stem_fixed_point];
    for combo in combos {
        for stemmer in stemmers {
            let stemmed: Vec<String> = combo.iter().map(|w| stemmer(w)).collect();
            if combo.len() == 1 {
                out.insert(stemmed[0].clone());
                continue;
            }
            out.insert(stemmer(&combo.join("-")));
            out.insert(stemmer(&combo.concat()));
            out.insert(stemmed.join(" "));
            out.insert(stemmed.join("-"));
        }
        if combo.len() == 1 {
            out.insert(combo[0].clone());
        } else {
            out.insert(combo.join(" "));
            out.insert(combo.join("-"));
            out.insert(combo.concat());
        }
    }
    out.retain(|v| !v.is_empty());
    out
}
