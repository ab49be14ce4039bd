use std::collections::BTreeMap;

use serde::Serialize;

use super::{IngestError, RawPost, Source};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FieldSummary {
    pub average: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

impl FieldSummary {
    fn from_counts(mut values: Vec<usize>) -> Self {
        values.sort_unstable();
        let n = values.len();
        let median = if n % 2 == 1 {
            values[n / 2] as f64
        } else {
            (values[n / 2 - 1] + values[n / 2]) as f64 / 2.0
        };
        FieldSummary {
            average: values.iter().sum::<usize>() as f64 / n as f64,
            median,
            min: values[0] as f64,
            max: values[n - 1] as f64,
        }
    }
}

/// Word-length statistics of one group of posts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SourceStats {
    pub posts: usize,
    pub tag: FieldSummary,
    pub title: FieldSummary,
    pub question: FieldSummary,
    /// Words over all answers of a post; 0 for unanswered posts.
    pub answer: FieldSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusStats {
    pub total: SourceStats,
    pub per_source: BTreeMap<Source, SourceStats>,
}

fn words(text: &str) -> usize {
    text.split_whitespace().count()
}

fn summarize(posts: &[&RawPost]) -> SourceStats {
    let field = |f: &dyn Fn(&RawPost) -> usize| {
        FieldSummary::from_counts(posts.iter().map(|p| f(p)).collect())
    };
    SourceStats {
        posts: posts.len(),
        tag: field(&|p| p.tags.len()),
        title: field(&|p| words(&p.title)),
        question: field(&|p| words(&p.question_html)),
        answer: field(&|p| p.answers_html.iter().map(|a| words(a)).sum()),
    }
}

/// Counts are taken on whitespace-separated raw text.
pub fn corpus_stats(posts: &[RawPost]) -> Result<CorpusStats, IngestError> {
    if posts.is_empty() {
        return Err(IngestError::EmptyCorpus);
    }
    let mut groups: BTreeMap<Source, Vec<&RawPost>> = BTreeMap::new();
    for post in posts {
        groups.entry(post.source).or_default().push(post);
    }
    let all: Vec<&RawPost> = posts.iter().collect();
    Ok(CorpusStats {
        total: summarize(&all),
        per_source: groups.iter().map(|(s, g)| (*s, summarize(g))).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn post(title: &str, answers: &[&str]) -> RawPost {
        RawPost {
            id: 1,
            source: Source::StackOverflow,
            title: title.into(),
            question_html: "q".into(),
            answers_html: answers.iter().map(|s| s.to_string()).collect(),
            tags: vec!["a".into()],
            score: 0,
            created: None,
        }
    }

    #[test]
    fn single_post() {
        let stats = corpus_stats(&[post("a b c", &[])]).unwrap();
        assert_eq!(stats.total.title.average, 3.0);
        assert_eq!(stats.total.title.median, 3.0);
        assert_eq!(stats.total.answer.min, 0.0);
    }

    #[test]
    fn even_median() {
        let stats = corpus_stats(&[post("a", &["x y"]), post("a b c d", &["z"])]).unwrap();
        assert_eq!(stats.total.title.median, 2.5);
        assert_eq!(stats.total.answer.max, 2.0);
    }

    #[test]
    fn empty_corpus() {
        assert!(matches!(corpus_stats(&[]), Err(IngestError::EmptyCorpus)));
    }
}
