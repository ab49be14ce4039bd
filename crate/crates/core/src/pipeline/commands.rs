use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{DocFeatures, InputFormat, PipelineConfig, TextConfig};
use super::features::{document_vectors, infer_seed, inferred_vectors, split_pu, train_embedding, PuFoldTrainer};
use super::manifest::RunRecorder;
use super::PipelineError;
use crate::embedding::{EmbeddingModel, TextHashes};
use crate::evaluation::{
    pn_metrics, project_pca, projection_csv, pu_metrics, stratified_kfold_cv, ConfigStatus, ConfusionPn, ConfusionPu,
    CvPlan, FoldOutcome, MetricsReport, PuMetrics, SelectionMetric,
};
use crate::heuristics::{
    count_keywords, label_corpus, read_labels_csv, write_labels_csv, KeywordMatcher, LabelRecord, SecurityLexicon,
};
use crate::ingest::{corpus_stats, parse_jsonl, parse_stackexchange_xml, CorpusStats, RawPost};
use crate::preprocess::{CleanPost, Normalizer, StopwordList};
use crate::pu::{train_ppn_baseline, train_pu, Decision, Prediction, PuConfig, PuModel};

pub const POSTS_FILE: &str = "posts.jsonl";
pub const LABELS_FILE: &str = "labels.csv";
const LABEL_SUMMARY_FILE: &str = "label_summary.json";
pub const CV_REPORT_FILE: &str = "cv_report.json";
pub const BEST_CONFIG_FILE: &str = "best_config.json";
pub const PREDICTIONS_FILE: &str = "predictions.csv";
const EMBEDDING_DIR: &str = "embedding";
const PU_DIR: &str = "pu";

fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("serializes");
    s.push('\n');
    s.into_bytes()
}

/// Lexicon, normalizer and keyword matcher built from the text settings.
pub struct TextContext {
    pub lexicon: SecurityLexicon,
    pub normalizer: Normalizer,
    pub matcher: KeywordMatcher,
}

impl TextContext {
    pub fn from_config(text: &TextConfig) -> Result<Self, PipelineError> {
        let lexicon = match &text.lexicon {
            Some(p) => SecurityLexicon::from_file(p)?,
            None => SecurityLexicon::builtin(),
        };
        let stopwords = match &text.stopwords {
            Some(p) => StopwordList::from_file(p)?,
            None => StopwordList::english(),
        };
        let normalizer = if text.phrases {
            Normalizer::new(stopwords, &lexicon)
        } else {
            Normalizer::without_phrases(stopwords)
        };
        let matcher = KeywordMatcher::new(&lexicon, &normalizer);
        Ok(TextContext {
            lexicon,
            normalizer,
            matcher,
        })
    }

    pub fn hashes(&self) -> TextHashes {
        let sw = self.normalizer.stopwords();
        TextHashes {
            stopwords_name: sw.name().to_string(),
            stopwords_sha256: sw.sha256().to_string(),
            lexicon_sha256: self.lexicon.sha256().to_string(),
        }
    }

    fn record(text: &TextConfig, rec: &mut RunRecorder) -> Result<(), PipelineError> {
        for p in [&text.lexicon, &text.stopwords].into_iter().flatten() {
            rec.input(p)?;
        }
        Ok(())
    }
}

pub fn read_posts(path: &Path, format: InputFormat, source: &str) -> Result<Vec<RawPost>, PipelineError> {
    let format = match format {
        InputFormat::Auto => match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("xml") => InputFormat::Xml,
            Some("jsonl" | "json" | "ndjson") => InputFormat::Jsonl,
            _ => {
                return Err(PipelineError::Usage(format!(
                    "cannot tell the format of {} from its extension; set input.format",
                    path.display()
                )))
            }
        },
        f => f,
    };
    let outcome = match format {
        InputFormat::Xml => parse_stackexchange_xml(path, source.parse()?)?,
        _ => parse_jsonl(path)?,
    };
    for issue in &outcome.issues {
        log::warn!("{}:{}: {}", path.display(), issue.line, issue.message);
    }
    Ok(outcome.posts)
}

fn load_inputs(cfg: &PipelineConfig, rec: &mut RunRecorder) -> Result<Vec<RawPost>, PipelineError> {
    cfg.check_inputs()?;
    let mut posts = Vec::new();
    for p in &cfg.input.paths {
        rec.input(p)?;
        posts.extend(read_posts(p, cfg.input.format, &cfg.input.source)?);
    }
    Ok(posts)
}

fn read_id_list(path: &Path) -> Result<HashSet<u64>, PipelineError> {
    let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            l.parse::<u64>()
                .map_err(|_| PipelineError::Input(format!("{}: {l:?} is not a post id", path.display())))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelSummary {
    pub posts: usize,
    pub positives: usize,
    pub unlabelled: usize,
    pub by_provenance: BTreeMap<String, usize>,
    pub selected_tags: Vec<String>,
    /// posts whose text normalizes to nothing
    pub empty_posts: usize,
}

/// Ingest, normalize and label the configured inputs.
pub fn label(cfg: &PipelineConfig, out: &Path) -> Result<LabelSummary, PipelineError> {
    let mut rec = RunRecorder::new("label", cfg);
    TextContext::record(&cfg.text, &mut rec)?;
    let text = TextContext::from_config(&cfg.text)?;
    let start = std::time::Instant::now();
    let raw = load_inputs(cfg, &mut rec)?;
    rec.stage("ingest", || start.elapsed());
    let external = match &cfg.input.external_positives {
        Some(p) => {
            rec.input(p)?;
            read_id_list(p)?
        }
        None => HashSet::new(),
    };
    let clean: Vec<CleanPost> = rec.stage("preprocess", || {
        raw.par_iter().map(|p| text.normalizer.preprocess_post(p)).collect()
    });
    let labelling = rec.stage("heuristics", || label_corpus(&clean, &text.matcher, &cfg.heuristics, &external))?;

    let mut posts = String::new();
    for p in &clean {
        posts.push_str(&serde_json::to_string(p).expect("post serializes"));
        posts.push('\n');
    }
    rec.write(&out.join(POSTS_FILE), posts.as_bytes())?;
    let mut csv = Vec::new();
    write_labels_csv(&labelling.records, &mut csv)?;
    rec.write(&out.join(LABELS_FILE), &csv)?;

    let mut by_provenance = BTreeMap::new();
    for r in &labelling.records {
        *by_provenance.entry(r.label.provenance().to_string()).or_insert(0) += 1;
    }
    let positives = labelling.positives();
    let summary = LabelSummary {
        posts: clean.len(),
        positives,
        unlabelled: clean.len() - positives,
        by_provenance,
        selected_tags: labelling.tags.selected.iter().cloned().collect(),
        empty_posts: clean.iter().filter(|p| p.is_empty()).count(),
    };
    if positives == 0 {
        log::warn!("no post matched a tag or content filter");
        rec.note("no positives found");
    }
    rec.write(&out.join(LABEL_SUMMARY_FILE), &to_json(&summary))?;
    rec.finish(out)?;
    Ok(summary)
}

/// Output of `label`, read back.
#[derive(Debug, Clone)]
pub struct LabelledCorpus {
    pub posts: Vec<CleanPost>,
    pub records: Vec<LabelRecord>,
}

impl LabelledCorpus {
    pub fn labelled(&self) -> Vec<bool> {
        self.records.iter().map(|r| r.label.is_positive()).collect()
    }

    /// provenance of each post, used as the stratification key
    pub fn strata(&self) -> Vec<String> {
        self.records.iter().map(|r| r.label.provenance().to_string()).collect()
    }
}

pub fn load_labelled(dir: &Path) -> Result<LabelledCorpus, PipelineError> {
    let pp = dir.join(POSTS_FILE);
    let text = std::fs::read_to_string(&pp).map_err(|e| PipelineError::io(&pp, e))?;
    let posts = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str::<CleanPost>(l)
                .map_err(|e| PipelineError::Input(format!("{}:{}: {e}", pp.display(), i + 1)))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let lp = dir.join(LABELS_FILE);
    let file = std::fs::File::open(&lp).map_err(|e| PipelineError::io(&lp, e))?;
    let records = read_labels_csv(file)?;
    if posts.len() != records.len() || posts.iter().zip(&records).any(|(p, r)| p.id != r.post_id) {
        return Err(PipelineError::Input(format!(
            "{} and {} do not describe the same posts",
            pp.display(),
            lp.display()
        )));
    }
    Ok(LabelledCorpus { posts, records })
}

fn record_labelled(dir: &Path, rec: &mut RunRecorder) -> Result<LabelledCorpus, PipelineError> {
    let corpus = load_labelled(dir)?;
    rec.input(&dir.join(POSTS_FILE))?;
    rec.input(&dir.join(LABELS_FILE))?;
    Ok(corpus)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossvalRow {
    /// 1-based among usable configurations
    pub rank: Option<usize>,
    pub index: usize,
    pub config: PuConfig,
    pub status: ConfigStatus,
    pub score: Option<f64>,
    pub mean: Option<PuMetrics>,
    pub folds: Vec<FoldOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossvalReport {
    pub k: usize,
    pub seed: u64,
    pub selection: SelectionMetric,
    pub features: DocFeatures,
    pub fold_sizes: Vec<usize>,
    /// best first
    pub rows: Vec<CrossvalRow>,
    pub best: Option<PuConfig>,
}

/// Stratified k-fold grid search over `pu.grid`.
pub fn crossval(cfg: &PipelineConfig, labels_dir: &Path, out: &Path) -> Result<CrossvalReport, PipelineError> {
    let mut rec = RunRecorder::new("crossval", cfg);
    let corpus = record_labelled(labels_dir, &mut rec)?;
    let labelled = corpus.labelled();
    let strata = corpus.strata();
    let configs = cfg.pu.grid.configs(cfg.seed);
    let plan = CvPlan {
        k: cfg.cv.k,
        selection: cfg.cv.selection,
        seed: cfg.seed,
        eval: cfg.evaluation,
    };
    let trainer = PuFoldTrainer {
        posts: &corpus.posts,
        labelled: &labelled,
        embedding: cfg.embedding.clone(),
        features: cfg.pu.features,
        seed: cfg.seed,
        threshold: cfg.threshold,
        plugins: Vec::new(),
    };
    let outcome = rec.stage("cross_validation", || {
        stratified_kfold_cv(&labelled, &strata, &plan, &configs, &trainer)
    })?;

    let mut fold_sizes = vec![0; plan.k];
    for &f in &outcome.fold_of {
        fold_sizes[f] += 1;
    }
    let mut rank = 0;
    let rows: Vec<CrossvalRow> = outcome
        .ranking
        .iter()
        .map(|&i| {
            let r = &outcome.results[i];
            let usable = r.status == ConfigStatus::Ok;
            if usable {
                rank += 1;
            }
            CrossvalRow {
                rank: usable.then_some(rank),
                index: i,
                config: configs[i].clone(),
                status: r.status.clone(),
                score: r.score,
                mean: r.mean,
                folds: r.folds.clone(),
            }
        })
        .collect();
    let best = outcome.best().map(|r| configs[r.index].clone());
    let report = CrossvalReport {
        k: plan.k,
        seed: plan.seed,
        selection: plan.selection,
        features: cfg.pu.features,
        fold_sizes,
        rows,
        best: best.clone(),
    };
    rec.write(&out.join(CV_REPORT_FILE), &to_json(&report))?;
    match &best {
        Some(b) => rec.write(&out.join(BEST_CONFIG_FILE), &to_json(b))?,
        None => rec.note("no usable configuration"),
    }
    rec.finish(out)?;
    if best.is_none() {
        return Err(PipelineError::Degenerate(
            "every configuration failed or was degenerate in cross-validation".into(),
        ));
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub config: PuConfig,
    pub baseline: bool,
    pub positives: usize,
    pub unlabelled: usize,
    pub reliable_negatives: usize,
    /// posts without any in-vocabulary token
    pub skipped: usize,
    pub embedding_hash: String,
}

fn chosen_config(cfg: &PipelineConfig, explicit: Option<PuConfig>) -> Result<PuConfig, PipelineError> {
    if let Some(c) = explicit.or_else(|| cfg.pu.chosen.clone()) {
        return Ok(c);
    }
    let p = cfg.stage_dir("crossval").join(BEST_CONFIG_FILE);
    if p.is_file() {
        let text = std::fs::read_to_string(&p).map_err(|e| PipelineError::io(&p, e))?;
        return serde_json::from_str(&text).map_err(|e| PipelineError::Input(format!("{}: {e}", p.display())));
    }
    Err(PipelineError::Usage(
        "no PU configuration: run crossval, set pu.chosen or pass --pu-config".into(),
    ))
}

fn record_dir(dir: &Path, rec: &mut RunRecorder) -> Result<(), PipelineError> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| PipelineError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    files.sort();
    for f in files {
        rec.output(&f)?;
    }
    Ok(())
}

/// Embedding on every labelled post, then the PU model (or the PPN
/// baseline), both saved under `out`.
pub fn train(
    cfg: &PipelineConfig,
    labels_dir: &Path,
    out: &Path,
    chosen: Option<PuConfig>,
    baseline: bool,
) -> Result<TrainSummary, PipelineError> {
    let mut rec = RunRecorder::new("train", cfg);
    TextContext::record(&cfg.text, &mut rec)?;
    let text = TextContext::from_config(&cfg.text)?;
    let corpus = record_labelled(labels_dir, &mut rec)?;
    let mut config = chosen_config(cfg, chosen)?;
    config.seed = cfg.seed;
    config.validate()?;

    let posts: Vec<&CleanPost> = corpus.posts.iter().collect();
    let embedding = rec
        .stage("embedding", || train_embedding(&posts, &cfg.embedding))?
        .with_text_hashes(text.hashes());
    let vectors = rec.stage("features", || document_vectors(&embedding, &posts, cfg.pu.features, cfg.seed))?;
    let (p, u) = split_pu(&vectors, &corpus.labelled());
    let hash = embedding.content_hash();
    let model = rec.stage("pu_model", || {
        if baseline {
            train_ppn_baseline(&p, &u, &config, &[])
        } else {
            train_pu(&p, &u, &config, &[])
        }
    })?;
    let model = model.with_embedding_hash(hash.clone());
    if model.metadata.converged == Some(false) {
        log::warn!("stage-2 optimizer stopped before reaching its tolerance");
        rec.note("stage-2 optimizer did not converge");
    }

    let ed = out.join(EMBEDDING_DIR);
    let pd = out.join(PU_DIR);
    embedding.save(&ed)?;
    model.save(&pd)?;
    record_dir(&ed, &mut rec)?;
    record_dir(&pd, &mut rec)?;
    let summary = TrainSummary {
        config,
        baseline,
        positives: p.len(),
        unlabelled: u.len(),
        reliable_negatives: model.metadata.reliable_negatives,
        skipped: vectors.iter().filter(|v| v.is_none()).count(),
        embedding_hash: hash,
    };
    rec.note(format!(
        "{} positives, {} unlabelled, {} reliable negatives",
        summary.positives, summary.unlabelled, summary.reliable_negatives
    ));
    rec.finish(out)?;
    Ok(summary)
}

/// A trained model pair whose hashes agree.
pub struct LoadedModel {
    pub embedding: EmbeddingModel,
    pub pu: PuModel<f64>,
}

pub fn load_model(dir: &Path) -> Result<LoadedModel, PipelineError> {
    let embedding = EmbeddingModel::load(&dir.join(EMBEDDING_DIR))?;
    let pu = PuModel::<f64>::load(&dir.join(PU_DIR))?;
    let found = embedding.content_hash();
    match &pu.metadata.embedding_hash {
        Some(h) if *h == found => {}
        other => {
            return Err(PipelineError::Input(format!(
                "PU model was trained on embedding {}, but {} holds {found}",
                other.as_deref().unwrap_or("<unknown>"),
                dir.join(EMBEDDING_DIR).display()
            )))
        }
    }
    if pu.dim() != embedding.dim() {
        return Err(PipelineError::Input(format!(
            "PU model expects {}-dimensional vectors, embedding has {}",
            pu.dim(),
            embedding.dim()
        )));
    }
    Ok(LoadedModel { embedding, pu })
}

impl LoadedModel {
    fn check_text(&self, text: &TextContext) -> Result<(), PipelineError> {
        if let Some(h) = self.embedding.text_hashes() {
            if *h != text.hashes() {
                return Err(PipelineError::Input(
                    "the configured stopword list or lexicon differs from the one the model was trained with".into(),
                ));
            }
        }
        Ok(())
    }

    /// Tags never reach the model: only title, question and answer text.
    pub fn predict_posts(&self, text: &TextContext, posts: &[RawPost], threshold: f64) -> Result<Vec<PredictRow>, PipelineError> {
        let seed = self.pu.config.seed;
        posts
            .par_iter()
            .map(|raw| {
                let clean = text.normalizer.preprocess_post(raw);
                let p = self
                    .pu
                    .predict(&self.embedding, &clean.tokens, infer_seed(seed, clean.id), threshold)?;
                Ok(match p {
                    Prediction::Known { decision, score } => PredictRow {
                        post_id: clean.id,
                        label: Some(decision),
                        score: Some(score),
                    },
                    Prediction::Unknown => PredictRow {
                        post_id: clean.id,
                        label: None,
                        score: None,
                    },
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictRow {
    pub post_id: u64,
    /// `None` when the post is uninferable
    pub label: Option<Decision>,
    pub score: Option<f64>,
}

impl PredictRow {
    pub fn is_security(&self) -> bool {
        self.label == Some(Decision::Security)
    }
}

fn predictions_csv(rows: &[PredictRow]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["post_id", "label", "score", "status"]).expect("in-memory write");
    for r in rows {
        let (label, score, status) = match (r.label, r.score) {
            (Some(l), Some(s)) => (l.to_string(), format!("{s}"), "ok"),
            _ => (String::new(), String::new(), "uninferable"),
        };
        w.write_record([r.post_id.to_string(), label, score, status.to_string()])
            .expect("in-memory write");
    }
    w.into_inner().expect("flush")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictSummary {
    pub posts: usize,
    pub security: usize,
    pub non_security: usize,
    pub uninferable: usize,
}

fn summarize(rows: &[PredictRow]) -> PredictSummary {
    let count = |d: Option<Decision>| rows.iter().filter(|r| r.label == d).count();
    PredictSummary {
        posts: rows.len(),
        security: count(Some(Decision::Security)),
        non_security: count(Some(Decision::NonSecurity)),
        uninferable: count(None),
    }
}

fn open_model(
    cfg: &PipelineConfig,
    model_dir: &Path,
    rec: &mut RunRecorder,
) -> Result<(TextContext, LoadedModel), PipelineError> {
    TextContext::record(&cfg.text, rec)?;
    let text = TextContext::from_config(&cfg.text)?;
    let model = rec.stage("load_model", || load_model(model_dir))?;
    model.check_text(&text)?;
    for sub in [EMBEDDING_DIR, PU_DIR] {
        let d = model_dir.join(sub);
        let mut files: Vec<PathBuf> = std::fs::read_dir(&d)
            .map_err(|e| PipelineError::io(&d, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .collect();
        files.sort();
        for f in files {
            rec.input(&f)?;
        }
    }
    Ok((text, model))
}

pub fn predict(cfg: &PipelineConfig, model_dir: &Path, input: &Path, out: &Path) -> Result<PredictSummary, PipelineError> {
    let mut rec = RunRecorder::new("predict", cfg);
    let (text, model) = open_model(cfg, model_dir, &mut rec)?;
    rec.input(input)?;
    let posts = read_posts(input, cfg.input.format, &cfg.input.source)?;
    let rows = rec.stage("predict", || model.predict_posts(&text, &posts, cfg.threshold))?;
    rec.write(&out.join(PREDICTIONS_FILE), &predictions_csv(&rows))?;
    let summary = summarize(&rows);
    if summary.uninferable > 0 {
        log::warn!("{} posts had no in-vocabulary token", summary.uninferable);
    }
    rec.finish(out)?;
    Ok(summary)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    /// labels from `label`: positive vs unlabelled
    Pu,
    /// ground truth: a `truth` column of 1/0
    Pn,
}

impl FromStr for EvalMode {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pu" => Ok(EvalMode::Pu),
            "pn" => Ok(EvalMode::Pn),
            _ => Err(PipelineError::Usage(format!("mode must be pu or pn, got {s:?}"))),
        }
    }
}

fn parse_truth(v: &str) -> Option<bool> {
    match v.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "positive" | "security" => Some(true),
        "0" | "false" | "negative" | "non_security" => Some(false),
        _ => None,
    }
}

/// post id → positive flag, from a PU labels file or a ground-truth file.
fn read_eval_labels(path: &Path, mode: EvalMode) -> Result<HashMap<u64, bool>, PipelineError> {
    let file = std::fs::File::open(path).map_err(|e| PipelineError::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| PipelineError::Input(format!("{}: {e}", path.display())))?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let id_col = col("post_id").ok_or_else(|| PipelineError::Input(format!("{}: no post_id column", path.display())))?;
    let (value_col, mismatch) = match mode {
        EvalMode::Pu => (col("label").filter(|_| col("provenance").is_some()), "pu mode needs PU labels (label,provenance columns)"),
        EvalMode::Pn => (col("truth"), "pn mode needs ground-truth labels (a truth column)"),
    };
    let value_col = value_col.ok_or_else(|| PipelineError::Input(format!("{}: {mismatch}", path.display())))?;
    let mut out = HashMap::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| PipelineError::Input(format!("{}: {e}", path.display())))?;
        let bad = |what: &str| PipelineError::Input(format!("{} row {}: bad {what}", path.display(), i + 2));
        let id: u64 = row.get(id_col).and_then(|v| v.trim().parse().ok()).ok_or_else(|| bad("post_id"))?;
        let v = row.get(value_col).unwrap_or("");
        let flag = match mode {
            EvalMode::Pu => match v {
                "positive" => true,
                "unlabelled" => false,
                _ => return Err(bad("label")),
            },
            EvalMode::Pn => parse_truth(v).ok_or_else(|| bad("truth"))?,
        };
        out.insert(id, flag);
    }
    Ok(out)
}

/// Predict `input` with the model and score the predictions against `labels`.
pub fn evaluate(
    cfg: &PipelineConfig,
    model_dir: &Path,
    input: &Path,
    labels: &Path,
    mode: EvalMode,
    out: &Path,
) -> Result<MetricsReport, PipelineError> {
    let mut rec = RunRecorder::new("evaluate", cfg);
    let (text, model) = open_model(cfg, model_dir, &mut rec)?;
    rec.input(input)?;
    rec.input(labels)?;
    let truth_of = read_eval_labels(labels, mode)?;
    let posts = read_posts(input, cfg.input.format, &cfg.input.source)?;
    let truth = posts
        .iter()
        .map(|p| {
            truth_of
                .get(&p.id)
                .copied()
                .ok_or_else(|| PipelineError::Input(format!("post {} has no label in {}", p.id, labels.display())))
        })
        .collect::<Result<Vec<bool>, _>>()?;
    let rows = rec.stage("predict", || model.predict_posts(&text, &posts, cfg.threshold))?;
    let predicted: Vec<bool> = rows.iter().map(PredictRow::is_security).collect();
    let report = match mode {
        EvalMode::Pu => pu_metrics(&ConfusionPu::from_predictions(&truth, &predicted), &cfg.evaluation)?,
        EvalMode::Pn => pn_metrics(&ConfusionPn::from_predictions(&truth, &predicted))?,
    };
    let uninferable = rows.iter().filter(|r| r.label.is_none()).count();
    if uninferable > 0 {
        rec.note(format!("{uninferable} uninferable posts counted as not security"));
    }
    rec.write(&out.join(PREDICTIONS_FILE), &predictions_csv(&rows))?;
    rec.write(&out.join("metrics.json"), report.to_json().as_bytes())?;
    rec.write(&out.join("metrics.csv"), report.to_csv().as_bytes())?;
    rec.finish(out)?;
    Ok(report)
}

pub fn stats(cfg: &PipelineConfig, out: &Path) -> Result<CorpusStats, PipelineError> {
    let mut rec = RunRecorder::new("stats", cfg);
    let posts = load_inputs(cfg, &mut rec)?;
    let stats = rec.stage("stats", || corpus_stats(&posts))?;
    rec.write(&out.join("stats.json"), &to_json(&stats))?;
    rec.finish(out)?;
    Ok(stats)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaSummary {
    pub projected: usize,
    pub skipped: usize,
    pub explained_ratio: Vec<f64>,
    pub variances: Vec<f64>,
}

/// Two-component projection of the inferred vectors of `input` (or the
/// configured inputs) as `post_id,pc1,pc2,kw_count`.
pub fn pca(cfg: &PipelineConfig, model_dir: &Path, input: Option<&Path>, out: &Path) -> Result<PcaSummary, PipelineError> {
    let mut rec = RunRecorder::new("pca", cfg);
    let (text, model) = open_model(cfg, model_dir, &mut rec)?;
    let raw = match input {
        Some(p) => {
            rec.input(p)?;
            read_posts(p, cfg.input.format, &cfg.input.source)?
        }
        None => load_inputs(cfg, &mut rec)?,
    };
    let clean: Vec<CleanPost> = raw.iter().map(|p| text.normalizer.preprocess_post(p)).collect();
    let refs: Vec<&CleanPost> = clean.iter().collect();
    let vectors = rec.stage("infer", || inferred_vectors(&model.embedding, &refs, model.pu.config.seed))?;
    let mut ids = Vec::new();
    let mut kw = Vec::new();
    let mut rows = Vec::new();
    for (post, v) in clean.iter().zip(vectors) {
        if let Some(v) = v {
            ids.push(post.id);
            kw.push(count_keywords(post, &text.matcher).kw_count);
            rows.push(v);
        }
    }
    let projection = rec.stage("pca", || project_pca(&rows, 2))?;
    rec.write(&out.join("pca.csv"), projection_csv(&ids, &kw, &projection).as_bytes())?;
    let summary = PcaSummary {
        projected: ids.len(),
        skipped: clean.len() - ids.len(),
        explained_ratio: projection.explained_ratio.clone(),
        variances: projection.variances.clone(),
    };
    rec.write(&out.join("pca_summary.json"), &to_json(&summary))?;
    rec.finish(out)?;
    Ok(summary)
}
