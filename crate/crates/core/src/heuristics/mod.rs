//! Tag- and content-based bootstrapping of the positive set.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::PathBuf;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

mod lexicon;
mod matching;
mod tags;

pub use lexicon::{expand_variants, SecurityLexicon, SHORT_KEYWORD_LEN};
pub use matching::{count_keywords, KeywordMatcher, KeywordStats, PatternCollision, BOUNDARY_MAX_LEN};
pub use tags::{select_security_tags, select_tags_with_anchor, TagScore, TagSelection, DEFAULT_ANCHOR};

use crate::preprocess::CleanPost;

#[derive(Debug, thiserror::Error)]
pub enum HeuristicsError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("lexicon {0} has no keywords")]
    EmptyLexicon(PathBuf),
    #[error("no anchor-tagged posts (anchor {0:?})")]
    NoAnchorPosts(String),
    #[error("duplicate post id {0}")]
    DuplicateId(u64),
    #[error("invalid threshold {name} = {value}")]
    InvalidThreshold { name: &'static str, value: f64 },
    #[error("labels file: {0}")]
    Csv(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeuristicThresholds {
    /// minimum tag frequency within the anchor context (strict)
    pub thre1: f64,
    /// minimum tag popularity within the anchor context (strict)
    pub thre2: f64,
    /// minimum kw_ratio (inclusive)
    pub a: f64,
    /// minimum kw_count (inclusive)
    pub b: usize,
}

impl Default for HeuristicThresholds {
    fn default() -> Self {
        HeuristicThresholds {
            thre1: 0.1,
            thre2: 0.01,
            a: 0.053,
            b: 8,
        }
    }
}

impl HeuristicThresholds {
    pub fn validate(&self) -> Result<(), HeuristicsError> {
        for (name, value) in [("thre1", self.thre1), ("thre2", self.thre2), ("a", self.a)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(HeuristicsError::InvalidThreshold { name, value });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Positive,
    Unlabelled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Provenance {
    TagFilter,
    ContentFilter,
    ExternalPositive,
    None,
}

/// PU label with the rule that produced it. Positive iff provenance is set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PuLabel {
    provenance: Provenance,
}

impl PuLabel {
    pub const UNLABELLED: PuLabel = PuLabel {
        provenance: Provenance::None,
    };

    pub fn positive(provenance: Provenance) -> Self {
        PuLabel { provenance }
    }

    pub fn label(&self) -> Label {
        if self.provenance == Provenance::None {
            Label::Unlabelled
        } else {
            Label::Positive
        }
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn is_positive(&self) -> bool {
        self.label() == Label::Positive
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Positive => "positive",
            Label::Unlabelled => "unlabelled",
        })
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::TagFilter => "tag",
            Provenance::ContentFilter => "content",
            Provenance::ExternalPositive => "external",
            Provenance::None => "none",
        })
    }
}

impl FromStr for Provenance {
    type Err = HeuristicsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tag" => Ok(Provenance::TagFilter),
            "content" => Ok(Provenance::ContentFilter),
            "external" => Ok(Provenance::ExternalPositive),
            "none" => Ok(Provenance::None),
            _ => Err(HeuristicsError::Csv(format!("unknown provenance {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabelRecord {
    pub post_id: u64,
    pub label: PuLabel,
    pub keywords: KeywordStats,
}

#[derive(Debug, Clone)]
pub struct Labelling {
    pub records: Vec<LabelRecord>,
    pub tags: TagSelection,
}

impl Labelling {
    pub fn positives(&self) -> usize {
        self.records.iter().filter(|r| r.label.is_positive()).count()
    }

    pub fn count(&self, provenance: Provenance) -> usize {
        self.records
            .iter()
            .filter(|r| r.label.provenance() == provenance)
            .count()
    }
}

/// Labels every post Positive (tag filter, then content filter, then
/// external positive ids) or Unlabelled.
///
/// A corpus without any anchor-tagged post gets an empty tag selection
/// rather than an error, so the content filter still runs.
pub fn label_corpus(
    corpus: &[CleanPost],
    matcher: &KeywordMatcher,
    thresholds: &HeuristicThresholds,
    external_positive_ids: &HashSet<u64>,
) -> Result<Labelling, HeuristicsError> {
    thresholds.validate()?;
    let mut seen = HashSet::with_capacity(corpus.len());
    for post in corpus {
        if !seen.insert(post.id) {
            return Err(HeuristicsError::DuplicateId(post.id));
        }
    }
    let tags = match select_security_tags(corpus, thresholds) {
        Ok(sel) => sel,
        Err(HeuristicsError::NoAnchorPosts(anchor)) => {
            log::warn!("no posts carry an anchor tag containing {anchor:?}; tag filter disabled");
            TagSelection {
                anchors: BTreeSet::new(),
                selected: BTreeSet::new(),
                context_size: 0,
                scores: Default::default(),
            }
        }
        Err(e) => return Err(e),
    };

    let records = corpus
        .par_iter()
        .map(|post| {
            let keywords = count_keywords(post, matcher);
            let label = if tags.matches(&post.tags) {
                PuLabel::positive(Provenance::TagFilter)
            } else if keywords.kw_ratio >= thresholds.a && keywords.kw_count >= thresholds.b {
                PuLabel::positive(Provenance::ContentFilter)
            } else if external_positive_ids.contains(&post.id) {
                PuLabel::positive(Provenance::ExternalPositive)
            } else {
                PuLabel::UNLABELLED
            };
            LabelRecord {
                post_id: post.id,
                label,
                keywords,
            }
        })
        .collect();
    Ok(Labelling { records, tags })
}

#[derive(Debug, Serialize, Deserialize)]
struct LabelRow {
    post_id: u64,
    label: String,
    provenance: String,
    kw_count: usize,
    kw_ratio: f64,
}

/// `post_id,label,provenance,kw_count,kw_ratio`
pub fn write_labels_csv<W: Write>(records: &[LabelRecord], out: W) -> Result<(), HeuristicsError> {
    let mut writer = csv::Writer::from_writer(out);
    for r in records {
        writer
            .serialize(LabelRow {
                post_id: r.post_id,
                label: r.label.label().to_string(),
                provenance: r.label.provenance().to_string(),
                kw_count: r.keywords.kw_count,
                kw_ratio: r.keywords.kw_ratio,
            })
            .map_err(|e| HeuristicsError::Csv(e.to_string()))?;
    }
    writer.flush().map_err(|e| HeuristicsError::Csv(e.to_string()))
}

pub fn read_labels_csv<R: Read>(input: R) -> Result<Vec<LabelRecord>, HeuristicsError> {
    let mut reader = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for row in reader.deserialize::<LabelRow>() {
        let row = row.map_err(|e| HeuristicsError::Csv(e.to_string()))?;
        let provenance: Provenance = row.provenance.parse()?;
        let label = match (row.label.as_str(), provenance) {
            ("positive", p) if p != Provenance::None => PuLabel::positive(p),
            ("unlabelled", Provenance::None) => PuLabel::UNLABELLED,
            (l, p) => {
                return Err(HeuristicsError::Csv(format!(
                    "post {}: label {l:?} inconsistent with provenance {p}",
                    row.post_id
                )))
            }
        };
        out.push(LabelRecord {
            post_id: row.post_id,
            label,
            keywords: KeywordStats {
                kw_count: row.kw_count,
                kw_ratio: row.kw_ratio,
            },
        });
    }
    Ok(out)
}
