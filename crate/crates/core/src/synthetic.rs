//! Seeded synthetic corpora for tests, demos and benchmarks.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ingest::{RawPost, Source};
use crate::preprocess::CleanPost;

/// Zipf-weighted sampler over `prefix0 .. prefix{n-1}`.
#[derive(Debug, Clone)]
pub struct ZipfVocab {
    words: Vec<String>,
    cumulative: Vec<f64>,
}

impl ZipfVocab {
    pub fn new(prefix: &str, n: usize) -> Self {
        Self::from_words((0..n).map(|i| format!("{prefix}{i}")).collect())
    }

    pub fn from_words(words: Vec<String>) -> Self {
        let mut acc = 0.0;
        let cumulative = (0..words.len())
            .map(|r| {
                acc += 1.0 / (r as f64 + 1.0);
                acc
            })
            .collect();
        ZipfVocab { words, cumulative }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> &str {
        let x = rng.gen::<f64>() * self.cumulative.last().copied().unwrap_or(0.0);
        let i = self.cumulative.partition_point(|&c| c <= x).min(self.words.len() - 1);
        &self.words[i]
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }
}

fn clean(id: u64, tokens: Vec<String>, tags: &[&str]) -> CleanPost {
    CleanPost {
        id,
        source: Source::StackOverflow,
        token_count: tokens.len(),
        tokens,
        tags: tags.iter().map(|t| t.to_string()).collect(),
    }
}

#[derive(Debug, Clone)]
pub struct TopicDoc {
    pub post: CleanPost,
    pub topic: usize,
}

/// Documents over `topics` disjoint vocabularies. Each document also repeats
/// a few words of its own, the way real posts mention specific names.
pub fn topic_corpus(topics: usize, docs_per_topic: usize, seed: u64) -> Vec<TopicDoc> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocabs: Vec<ZipfVocab> = (0..topics)
        .map(|t| ZipfVocab::new(&format!("t{t}w"), 60))
        .collect();
    let mut out = Vec::with_capacity(topics * docs_per_topic);
    for d in 0..docs_per_topic {
        for (t, vocab) in vocabs.iter().enumerate() {
            let id = (d * topics + t) as u64 + 1;
            let len = rng.gen_range(40..70);
            let mut tokens: Vec<String> = (0..len).map(|_| vocab.sample(&mut rng).to_string()).collect();
            for k in 0..3 {
                let w = format!("d{id}x{k}");
                for _ in 0..2 {
                    let pos = rng.gen_range(0..=tokens.len());
                    tokens.insert(pos, w.clone());
                }
            }
            let tag = format!("topic{t}");
            out.push(TopicDoc {
                post: clean(id, tokens, &[&tag]),
                topic: t,
            });
        }
    }
    out
}

/// Kind of a generated post in a PU corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PostKind {
    /// on topic, with many topic words: what heuristics would catch
    LabelledPositive,
    /// on topic but with fewer topic words and off-topic tags
    HiddenPositive,
    Negative,
}

impl PostKind {
    pub fn is_positive(self) -> bool {
        self != PostKind::Negative
    }
}

#[derive(Debug, Clone)]
pub struct PuCorpusSpec {
    pub positives: usize,
    pub unlabelled: usize,
    /// share of `unlabelled` that are hidden positives
    pub contamination: f64,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct PuCorpus {
    pub posts: Vec<CleanPost>,
    pub kinds: Vec<PostKind>,
}

impl PuCorpus {
    pub fn labelled(&self) -> Vec<bool> {
        self.kinds
            .iter()
            .map(|&k| k == PostKind::LabelledPositive)
            .collect()
    }

    pub fn truth(&self) -> Vec<bool> {
        self.kinds.iter().map(|k| k.is_positive()).collect()
    }
}

const SECURITY_TAGS: [&str; 5] = ["security", "encryption", "xss", "passwords", "sql-injection"];
const GENERAL_TAGS: [&str; 8] = ["php", "java", "python", "css", "javascript", "android", "c#", "mysql"];

/// Generator of security-vs-general posts as token streams.
#[derive(Debug, Clone)]
pub struct PuGenerator {
    topic: ZipfVocab,
    general: Vec<ZipfVocab>,
    shared: ZipfVocab,
}

impl Default for PuGenerator {
    fn default() -> Self {
        PuGenerator {
            topic: ZipfVocab::new("sec", 80),
            general: (0..4).map(|g| ZipfVocab::new(&format!("gen{g}w"), 80)).collect(),
            shared: ZipfVocab::new("com", 150),
        }
    }
}

impl PuGenerator {
    pub fn post(&self, id: u64, kind: PostKind, rng: &mut ChaCha8Rng) -> CleanPost {
        let topic_share = match kind {
            PostKind::LabelledPositive => rng.gen_range(0.30..0.50),
            PostKind::HiddenPositive => rng.gen_range(0.15..0.30),
            PostKind::Negative => rng.gen_range(0.0..0.06),
        };
        let general = &self.general[rng.gen_range(0..self.general.len())];
        let len = rng.gen_range(30..80);
        let tokens = (0..len)
            .map(|_| {
                let x: f64 = rng.gen();
                if x < topic_share {
                    self.topic.sample(rng)
                } else if x < topic_share + 0.35 {
                    general.sample(rng)
                } else {
                    self.shared.sample(rng)
                }
                .to_string()
            })
            .collect();
        let mut tags = vec![*GENERAL_TAGS.choose(rng).expect("tags")];
        if kind == PostKind::LabelledPositive {
            tags.push(SECURITY_TAGS.choose(rng).expect("tags"));
        }
        clean(id, tokens, &tags)
    }

    /// Posts with ids starting at `first_id`, in shuffled kind order.
    pub fn corpus(&self, spec: &PuCorpusSpec, first_id: u64) -> PuCorpus {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let hidden = (spec.unlabelled as f64 * spec.contamination).round() as usize;
        let mut kinds: Vec<PostKind> = std::iter::repeat(PostKind::LabelledPositive)
            .take(spec.positives)
            .chain(std::iter::repeat(PostKind::HiddenPositive).take(hidden))
            .chain(std::iter::repeat(PostKind::Negative).take(spec.unlabelled - hidden))
            .collect();
        kinds.shuffle(&mut rng);
        let posts = kinds
            .iter()
            .enumerate()
            .map(|(i, &k)| self.post(first_id + i as u64, k, &mut rng))
            .collect();
        PuCorpus { posts, kinds }
    }

    /// Ground-truth posts: half positive (labelled-style and hidden-style in
    /// equal parts), half negative.
    pub fn held_out(&self, n: usize, first_id: u64, seed: u64) -> (Vec<CleanPost>, Vec<bool>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut posts = Vec::with_capacity(n);
        let mut truth = Vec::with_capacity(n);
        for i in 0..n {
            let kind = match i % 4 {
                0 => PostKind::LabelledPositive,
                1 => PostKind::HiddenPositive,
                _ => PostKind::Negative,
            };
            posts.push(self.post(first_id + i as u64, kind, &mut rng));
            truth.push(kind.is_positive());
        }
        (posts, truth)
    }
}

/// Raw posts in Stack Exchange shape, for the heuristics and the CLI.
///
/// Security posts quote lexicon keywords; some carry security tags, some
/// only general ones. `keywords` should be taken from the lexicon in use.
pub fn raw_security_corpus(n: usize, keywords: &[String], seed: u64) -> Vec<RawPost> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let filler = ZipfVocab::from_words(
        [
            "application", "server", "function", "value", "error", "database", "request", "user",
            "page", "string", "table", "query", "method", "class", "object", "file", "button",
            "layout", "image", "loop", "array", "thread", "memory", "config", "deploy", "build",
            "version", "install", "test", "network",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect(),
    );
    let extra_tags = ["cryptography", "csrf", "authentication"];
    (0..n)
        .map(|i| {
            let id = 1000 + i as u64;
            let security = rng.gen_bool(0.4);
            let kw_share = if security { rng.gen_range(0.05..0.4) } else { rng.gen_range(0.0..0.04) };
            let words = |len: usize, rng: &mut ChaCha8Rng| -> String {
                (0..len)
                    .map(|_| {
                        if rng.gen_bool(kw_share) && !keywords.is_empty() {
                            keywords[rng.gen_range(0..keywords.len())].clone()
                        } else {
                            filler.sample(rng).to_string()
                        }
                    })
                    .collect::<Vec<_>>()
                    .join(" ")
            };
            let title = words(rng.gen_range(4..10), &mut rng);
            let body = format!(
                "<p>{}</p><pre><code>int x = 0;</code></pre><p>{}</p>",
                words(rng.gen_range(20..60), &mut rng),
                words(rng.gen_range(5..30), &mut rng)
            );
            let answers = (0..rng.gen_range(0..3))
                .map(|_| format!("<p>{}</p>", words(rng.gen_range(10..50), &mut rng)))
                .collect();
            let mut tags = vec![GENERAL_TAGS[rng.gen_range(0..GENERAL_TAGS.len())].to_string()];
            if security && rng.gen_bool(0.5) {
                tags.push(SECURITY_TAGS[rng.gen_range(0..SECURITY_TAGS.len())].to_string());
            } else if security && rng.gen_bool(0.3) {
                tags.push(extra_tags[rng.gen_range(0..extra_tags.len())].to_string());
            }
            tags.dedup();
            RawPost {
                id,
                source: if rng.gen_bool(0.1) {
                    Source::SecurityStackExchange
                } else {
                    Source::StackOverflow
                },
                title,
                question_html: body,
                answers_html: answers,
                tags,
                score: rng.gen_range(-2..50),
                created: None,
            }
        })
        .collect()
}
