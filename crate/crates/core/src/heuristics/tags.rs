use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::{HeuristicThresholds, HeuristicsError};
use crate::preprocess::CleanPost;

pub const DEFAULT_ANCHOR: &str = "security";

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TagScore {
    /// posts carrying the tag
    pub count: usize,
    /// of those, posts also carrying an anchor tag
    pub in_context: usize,
    pub frequency: f64,
    pub popularity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TagSelection {
    pub anchors: BTreeSet<String>,
    pub selected: BTreeSet<String>,
    /// number of posts with at least one anchor tag
    pub context_size: usize,
    pub scores: BTreeMap<String, TagScore>,
}

impl TagSelection {
    /// Whether a post qualifies for the tag filter.
    pub fn matches(&self, tags: &[String]) -> bool {
        tags.iter()
            .any(|t| self.selected.contains(t) || self.anchors.contains(t))
    }
}

pub fn select_security_tags(
    corpus: &[CleanPost],
    thresholds: &HeuristicThresholds,
) -> Result<TagSelection, HeuristicsError> {
    select_tags_with_anchor(corpus, thresholds, DEFAULT_ANCHOR)
}

/// Tags co-occurring with anchor tags (those containing `anchor`).
///
/// A non-anchor tag `t` is selected when `|t ∩ ctx| / |t| > thre1` and
/// `|t ∩ ctx| / |ctx| > thre2`, where `ctx` is the set of posts carrying an
/// anchor tag.
pub fn select_tags_with_anchor(
    corpus: &[CleanPost],
    thresholds: &HeuristicThresholds,
    anchor: &str,
) -> Result<TagSelection, HeuristicsError> {
    let is_anchor = |t: &str| t.contains(anchor);
    let mut anchors: BTreeSet<String> = BTreeSet::from([anchor.to_string()]);
    let mut counts: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    let mut context_size = 0;

    for post in corpus {
        let tags: BTreeSet<&str> = post.tags.iter().map(String::as_str).collect();
        let in_context = tags.iter().any(|t| is_anchor(t));
        context_size += usize::from(in_context);
        for tag in tags {
            if is_anchor(tag) {
                anchors.insert(tag.to_string());
                continue;
            }
            let entry = counts.entry(tag).or_default();
            entry.0 += 1;
            entry.1 += usize::from(in_context);
        }
    }
    if context_size == 0 {
        return Err(HeuristicsError::NoAnchorPosts(anchor.to_string()));
    }

    let mut scores = BTreeMap::new();
    let mut selected = BTreeSet::new();
    for (tag, (count, in_context)) in counts {
        let frequency = in_context as f64 / count as f64;
        let popularity = in_context as f64 / context_size as f64;
        if frequency > thresholds.thre1 && popularity > thresholds.thre2 {
            selected.insert(tag.to_string());
        }
        scores.insert(
            tag.to_string(),
            TagScore {
                count,
                in_context,
                frequency,
                popularity,
            },
        );
    }
    Ok(TagSelection {
        anchors,
        selected,
        context_size,
        scores,
    })
}
