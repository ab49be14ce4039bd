use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::weights::{Frozen, RowOps, SharedMatrix};
use super::{
    EmbeddingConfig, EmbeddingError, EmbeddingModel, LabelKey, TrainingDoc, TrainingMode, Vocab,
};

const UNIGRAM_POWER: f64 = 0.75;

/// Cumulative unigram^0.75 distribution for drawing negative words.
struct NegativeTable {
    cumulative: Vec<f64>,
}

impl NegativeTable {
    fn new(counts: &[u64]) -> Self {
        let mut acc = 0.0;
        let cumulative = counts
            .iter()
            .map(|&c| {
                acc += (c as f64).powf(UNIGRAM_POWER);
                acc
            })
            .collect();
        NegativeTable { cumulative }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> u32 {
        let total = *self.cumulative.last().expect("non-empty vocabulary");
        let x = rng.gen::<f64>() * total;
        self.cumulative.partition_point(|&c| c <= x).min(self.cumulative.len() - 1) as u32
    }
}

enum DocSlot<'a> {
    /// rows of the shared label matrix (training)
    Rows(&'a [u32]),
    /// a private vector being inferred
    Owned(&'a mut [f32]),
}

struct Layers<'a, W: RowOps> {
    words: &'a W,
    labels: Option<&'a W>,
    output: &'a W,
    table: &'a NegativeTable,
    negative: usize,
    /// update word and output weights
    learn_shared: bool,
}

#[inline]
fn sigmoid(x: f32) -> f32 {
    1.0 / (1.0 + (-x).exp())
}

/// `ln(1 + e^x)` without overflow.
#[inline]
fn softplus(x: f32) -> f64 {
    let x = x as f64;
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

impl<W: RowOps> Layers<'_, W> {
    /// One PV-DM update predicting `target` from the mean of the context
    /// words and the document slot. Returns the negative-sampling loss.
    #[allow(clippy::too_many_arguments)]
    fn step(
        &self,
        context: &[u32],
        mut doc: DocSlot<'_>,
        target: u32,
        lr: f32,
        rng: &mut ChaCha8Rng,
        hidden: &mut [f32],
        neu1e: &mut [f32],
    ) -> f64 {
        hidden.fill(0.0);
        let mut count = context.len();
        for &w in context {
            self.words.accumulate_row(w as usize, 1.0, hidden);
        }
        match &doc {
            DocSlot::Rows(rows) => {
                let labels = self.labels.expect("label matrix during training");
                for &r in rows.iter() {
                    labels.accumulate_row(r as usize, 1.0, hidden);
                }
                count += rows.len();
            }
            DocSlot::Owned(v) => {
                for (h, x) in hidden.iter_mut().zip(v.iter()) {
                    *h += x;
                }
                count += 1;
            }
        }
        if count == 0 {
            return 0.0;
        }
        let inv = 1.0 / count as f32;
        hidden.iter_mut().for_each(|h| *h *= inv);

        neu1e.fill(0.0);
        let mut loss = 0.0;
        for d in 0..=self.negative {
            let (t, label) = if d == 0 {
                (target, 1.0)
            } else {
                let s = self.table.sample(rng);
                if s == target {
                    continue;
                }
                (s, 0.0)
            };
            let f = self.output.dot_row(t as usize, hidden);
            loss += if label > 0.5 { softplus(-f) } else { softplus(f) };
            let g = (label - sigmoid(f)) * lr;
            self.output.accumulate_row(t as usize, g, neu1e);
            if self.learn_shared {
                self.output.add_to_row(t as usize, g, hidden);
            }
        }

        if self.learn_shared {
            for &w in context {
                self.words.add_to_row(w as usize, 1.0, neu1e);
            }
        }
        match &mut doc {
            DocSlot::Rows(rows) => {
                let labels = self.labels.expect("label matrix during training");
                for &r in rows.iter() {
                    labels.add_to_row(r as usize, 1.0, neu1e);
                }
            }
            DocSlot::Owned(v) => {
                for (x, e) in v.iter_mut().zip(neu1e.iter()) {
                    *x += e;
                }
            }
        }
        loss
    }
}

/// Context of position `i`: up to `b` words on each side, `b` drawn from
/// `1..=window`.
fn context_of(words: &[u32], i: usize, window: usize, rng: &mut ChaCha8Rng, out: &mut Vec<u32>) {
    let b = window - rng.gen_range(0..window);
    let lo = i.saturating_sub(b);
    let hi = (i + b + 1).min(words.len());
    out.clear();
    out.extend(words[lo..i].iter().chain(&words[i + 1..hi]));
}

fn linear_rate(config: &EmbeddingConfig, done: u64, total: u64) -> f32 {
    let progress = done as f64 / total.max(1) as f64;
    let lr = config.learning_rate as f64
        - (config.learning_rate - config.min_learning_rate) as f64 * progress;
    lr.max(config.min_learning_rate as f64) as f32
}

fn init_matrix(rows: usize, dim: usize, rng: &mut ChaCha8Rng) -> Vec<f32> {
    (0..rows * dim)
        .map(|_| (rng.gen::<f32>() - 0.5) / dim as f32)
        .collect()
}

fn doc_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn build_vocab(docs: &[TrainingDoc<'_>], min_count: usize) -> Vocab {
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for doc in docs {
        for t in doc.tokens {
            *counts.entry(t.as_str()).or_default() += 1;
        }
    }
    let mut kept: Vec<(&str, u64)> = counts
        .into_iter()
        .filter(|&(_, c)| c >= min_count as u64)
        .collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    let (words, counts) = kept.into_iter().map(|(w, c)| (w.to_string(), c)).unzip();
    Vocab::from_counts(words, counts)
}

/// Trains word, label and output weights with SGD over `config.epochs`
/// passes. The learning rate decays linearly per processed word.
pub fn train_pvdm(
    docs: &[TrainingDoc<'_>],
    config: &EmbeddingConfig,
) -> Result<EmbeddingModel, EmbeddingError> {
    config.validate()?;
    if docs.is_empty() {
        return Err(EmbeddingError::EmptyCorpus);
    }
    let vocab = build_vocab(docs, config.min_count);
    if vocab.len() == 0 {
        return Err(EmbeddingError::EmptyVocabulary {
            min_count: config.min_count,
        });
    }

    let mut labels: Vec<LabelKey> = Vec::new();
    let mut label_index: HashMap<LabelKey, usize> = HashMap::new();
    let mut doc_rows: Vec<Vec<u32>> = Vec::with_capacity(docs.len());
    for doc in docs {
        if label_index.contains_key(&LabelKey::Doc(doc.labels.id)) {
            return Err(EmbeddingError::DuplicateDoc(doc.labels.id));
        }
        let rows = doc
            .labels
            .keys()
            .map(|k| {
                *label_index.entry(k.clone()).or_insert_with(|| {
                    labels.push(k);
                    labels.len() - 1
                }) as u32
            })
            .collect();
        doc_rows.push(rows);
    }

    let encoded: Vec<Vec<u32>> = docs.iter().map(|d| vocab.encode(d.tokens)).collect();
    let words_per_epoch: u64 = encoded.iter().map(|e| e.len() as u64).sum();
    if words_per_epoch == 0 {
        return Err(EmbeddingError::EmptyVocabulary {
            min_count: config.min_count,
        });
    }
    // word offset of each document within an epoch, for the rate schedule
    let offsets: Vec<u64> = encoded
        .iter()
        .scan(0u64, |acc, e| {
            let start = *acc;
            *acc += e.len() as u64;
            Some(start)
        })
        .collect();
    let total_words = words_per_epoch * config.epochs as u64;

    let dim = config.dim;
    let mut init_rng = doc_rng(config.seed, 0);
    let words = SharedMatrix::from_vec(init_matrix(vocab.len(), dim, &mut init_rng), dim);
    let label_m = SharedMatrix::from_vec(init_matrix(labels.len(), dim, &mut init_rng), dim);
    let output = SharedMatrix::zeros(vocab.len(), dim);
    let table = NegativeTable::new(&vocab.counts);
    let layers = Layers {
        words: &words,
        labels: Some(&label_m),
        output: &output,
        table: &table,
        negative: config.negative_samples,
        learn_shared: true,
    };

    let n_docs = docs.len() as u64;
    let train_doc = |epoch: usize, d: usize| -> f64 {
        let words = &encoded[d];
        if words.is_empty() {
            return 0.0;
        }
        let mut rng = doc_rng(config.seed, 1 + epoch as u64 * n_docs + d as u64);
        let mut hidden = vec![0.0f32; dim];
        let mut neu1e = vec![0.0f32; dim];
        let mut context = Vec::with_capacity(2 * config.window);
        let base = epoch as u64 * words_per_epoch + offsets[d];
        let mut loss = 0.0;
        for i in 0..words.len() {
            let lr = linear_rate(config, base + i as u64, total_words);
            context_of(words, i, config.window, &mut rng, &mut context);
            loss += layers.step(
                &context,
                DocSlot::Rows(&doc_rows[d]),
                words[i],
                lr,
                &mut rng,
                &mut hidden,
                &mut neu1e,
            );
        }
        loss
    };

    let mut epoch_losses = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let per_doc: Vec<f64> = match config.mode {
            TrainingMode::Deterministic => (0..docs.len()).map(|d| train_doc(epoch, d)).collect(),
            TrainingMode::Parallel => (0..docs.len())
                .into_par_iter()
                .map(|d| train_doc(epoch, d))
                .collect(),
        };
        let loss = per_doc.iter().sum::<f64>() / words_per_epoch as f64;
        log::debug!("pvdm epoch {} loss {:.5}", epoch + 1, loss);
        epoch_losses.push(loss);
    }

    Ok(EmbeddingModel {
        config: config.clone(),
        vocab,
        word_vectors: words.into_vec(),
        output_weights: output.into_vec(),
        label_vectors: label_m.into_vec(),
        labels,
        label_index,
        epoch_losses,
        text_hashes: None,
    })
}

impl EmbeddingModel {
    /// Optimizes a fresh document vector for `tokens` with words and output
    /// weights frozen. Out-of-vocabulary tokens are ignored.
    pub fn infer_vector(&self, tokens: &[String], seed: u64) -> Result<Vec<f32>, EmbeddingError> {
        self.infer_vector_epochs(tokens, self.config.inference_epochs(), seed)
    }

    pub fn infer_vector_epochs(
        &self,
        tokens: &[String],
        epochs: usize,
        seed: u64,
    ) -> Result<Vec<f32>, EmbeddingError> {
        let words = self.vocab.encode(tokens);
        if words.is_empty() {
            return Err(EmbeddingError::Uninferable);
        }
        let epochs = epochs.max(1);
        let dim = self.dim();
        let word_m = Frozen {
            data: &self.word_vectors,
            cols: dim,
        };
        let output = Frozen {
            data: &self.output_weights,
            cols: dim,
        };
        let table = NegativeTable::new(&self.vocab.counts);
        let layers = Layers {
            words: &word_m,
            labels: None,
            output: &output,
            table: &table,
            negative: self.config.negative_samples,
            learn_shared: false,
        };

        let mut rng = doc_rng(seed, 0);
        let mut v = init_matrix(1, dim, &mut rng);
        let mut hidden = vec![0.0f32; dim];
        let mut neu1e = vec![0.0f32; dim];
        let mut context = Vec::with_capacity(2 * self.config.window);
        let total = (words.len() * epochs) as u64;
        let mut done = 0u64;
        for _ in 0..epochs {
            for i in 0..words.len() {
                let lr = linear_rate(&self.config, done, total);
                context_of(&words, i, self.config.window, &mut rng, &mut context);
                layers.step(
                    &context,
                    DocSlot::Owned(&mut v),
                    words[i],
                    lr,
                    &mut rng,
                    &mut hidden,
                    &mut neu1e,
                );
                done += 1;
            }
        }
        Ok(v)
    }

    /// Vocabulary counts keyed by word, for inspection.
    pub fn word_counts(&self) -> BTreeMap<&str, u64> {
        self.vocabulary().collect()
    }
}
