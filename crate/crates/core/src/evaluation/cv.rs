use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{pu_metrics, ConfusionPu, MetricsReport, PuEvalConfig, PuMetrics};
use super::EvalError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMetric {
    #[default]
    GMeanPu,
    F1ScorePuLb,
    F1ScorePuUb,
    PrecisionPuLb,
    RecallPu,
}

impl SelectionMetric {
    pub fn of(self, m: &PuMetrics) -> f64 {
        match self {
            SelectionMetric::GMeanPu => m.g_mean_pu,
            SelectionMetric::F1ScorePuLb => m.f1_score_pu_lb,
            SelectionMetric::F1ScorePuUb => m.f1_score_pu_ub,
            SelectionMetric::PrecisionPuLb => m.precision_pu_lb,
            SelectionMetric::RecallPu => m.recall_pu,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvPlan {
    pub k: usize,
    pub selection: SelectionMetric,
    pub seed: u64,
    pub eval: PuEvalConfig,
}

impl Default for CvPlan {
    fn default() -> Self {
        CvPlan {
            k: 10,
            selection: SelectionMetric::GMeanPu,
            seed: 0,
            eval: PuEvalConfig::default(),
        }
    }
}

/// Assign each example to one of `k` folds, keeping every stratum's share
/// of each fold within one example.
///
/// Strata are visited in key order; members are shuffled with a seeded
/// generator and dealt round-robin, continuing the dealer position across
/// strata so that fold sizes also stay balanced overall.
pub fn stratified_folds(strata: &[String], k: usize, seed: u64) -> Result<Vec<usize>, EvalError> {
    if k < 2 {
        return Err(EvalError::InvalidParameter(format!("k must be at least 2, got {k}")));
    }
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, s) in strata.iter().enumerate() {
        groups.entry(s.as_str()).or_default().push(i);
    }
    if let Some((name, members)) = groups.iter().find(|(_, m)| m.len() < k) {
        return Err(EvalError::StratumTooSmall {
            stratum: name.to_string(),
            size: members.len(),
            k,
        });
    }
    let mut folds = vec![0; strata.len()];
    let mut dealer = 0;
    for (gi, members) in groups.values_mut().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(gi as u64);
        members.shuffle(&mut rng);
        for &i in members.iter() {
            folds[i] = dealer % k;
            dealer += 1;
        }
    }
    Ok(folds)
}

/// Why a configuration produced no predictions on a fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "message", rename_all = "snake_case")]
pub enum FoldFailure {
    /// too few reliable negatives
    Degenerate(String),
    Error(String),
}

/// Trains on the k-1 training folds and predicts the validation fold for
/// every configuration. Expensive shared state (the feature model) is
/// built once per call.
pub trait FoldTrainer: Sync {
    type Config: Sync;

    /// Returns, per configuration, one positive/negative decision per
    /// validation example (in the order given).
    fn run_fold(
        &self,
        fold: usize,
        train: &[usize],
        validation: &[usize],
        configs: &[Self::Config],
    ) -> Result<Vec<Result<Vec<bool>, FoldFailure>>, EvalError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfigStatus {
    Ok,
    /// more than half of the folds were degenerate
    Degenerate,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FoldOutcome {
    Report(MetricsReport),
    Failure(FoldFailure),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigResult {
    /// position in the grid
    pub index: usize,
    pub status: ConfigStatus,
    /// mean over the folds that produced predictions
    pub mean: Option<PuMetrics>,
    pub score: Option<f64>,
    pub folds: Vec<FoldOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvOutcome {
    pub k: usize,
    pub seed: u64,
    pub selection: SelectionMetric,
    pub fold_of: Vec<usize>,
    /// grid order
    pub results: Vec<ConfigResult>,
    /// indices into `results`: usable configs best first, then the rest in grid order
    pub ranking: Vec<usize>,
}

impl CvOutcome {
    pub fn best(&self) -> Option<&ConfigResult> {
        self.ranking
            .first()
            .map(|&i| &self.results[i])
            .filter(|r| r.status == ConfigStatus::Ok)
    }
}

pub fn mean_metrics(reports: &[&PuMetrics]) -> Option<PuMetrics> {
    if reports.is_empty() {
        return None;
    }
    let n = reports.len() as f64;
    let avg = |f: fn(&PuMetrics) -> f64| reports.iter().map(|m| f(m)).sum::<f64>() / n;
    Some(PuMetrics {
        precision_pu_lb: avg(|m| m.precision_pu_lb),
        precision_pu_ub: avg(|m| m.precision_pu_ub),
        recall_pu: avg(|m| m.recall_pu),
        f1_score_pu_lb: avg(|m| m.f1_score_pu_lb),
        f1_score_pu_ub: avg(|m| m.f1_score_pu_ub),
        g_mean_pu: avg(|m| m.g_mean_pu),
    })
}

/// Stratified k-fold grid search. `labelled[i]` marks example `i` as a
/// member of P; `strata[i]` is its stratification key.
pub fn stratified_kfold_cv<F: FoldTrainer>(
    labelled: &[bool],
    strata: &[String],
    plan: &CvPlan,
    configs: &[F::Config],
    trainer: &F,
) -> Result<CvOutcome, EvalError> {
    if configs.is_empty() {
        return Err(EvalError::InvalidParameter("the configuration grid is empty".into()));
    }
    if labelled.len() != strata.len() {
        return Err(EvalError::InvalidParameter(format!(
            "{} labels but {} stratum keys",
            labelled.len(),
            strata.len()
        )));
    }
    let fold_of = stratified_folds(strata, plan.k, plan.seed)?;

    let per_fold: Vec<Vec<Result<Vec<bool>, FoldFailure>>> = (0..plan.k)
        .into_par_iter()
        .map(|f| {
            let (validation, train): (Vec<usize>, Vec<usize>) = (0..labelled.len()).partition(|&i| fold_of[i] == f);
            log::info!("fold {}/{}: {} train, {} validation", f + 1, plan.k, train.len(), validation.len());
            let out = trainer.run_fold(f, &train, &validation, configs)?;
            if out.len() != configs.len() {
                return Err(EvalError::InvalidParameter(format!(
                    "trainer returned {} results for {} configurations",
                    out.len(),
                    configs.len()
                )));
            }
            let truth: Vec<bool> = validation.iter().map(|&i| labelled[i]).collect();
            for r in out.iter().flatten() {
                if r.len() != truth.len() {
                    return Err(EvalError::InvalidParameter("prediction count differs from the validation fold".into()));
                }
            }
            Ok(out)
        })
        .collect::<Result<_, EvalError>>()?;

    let mut results = Vec::with_capacity(configs.len());
    for c in 0..configs.len() {
        let mut folds = Vec::with_capacity(plan.k);
        for (f, fold_results) in per_fold.iter().enumerate() {
            let outcome = match &fold_results[c] {
                Ok(pred) => {
                    let truth: Vec<bool> = (0..labelled.len())
                        .filter(|&i| fold_of[i] == f)
                        .map(|i| labelled[i])
                        .collect();
                    let confusion = ConfusionPu::from_predictions(&truth, pred);
                    FoldOutcome::Report(pu_metrics(&confusion, &plan.eval)?)
                }
                Err(e) => FoldOutcome::Failure(e.clone()),
            };
            folds.push(outcome);
        }
        let ok: Vec<&PuMetrics> = folds
            .iter()
            .filter_map(|o| match o {
                FoldOutcome::Report(r) => r.pu.as_ref(),
                FoldOutcome::Failure(_) => None,
            })
            .collect();
        let degenerate = folds
            .iter()
            .filter(|o| matches!(o, FoldOutcome::Failure(FoldFailure::Degenerate(_))))
            .count();
        let status = if 2 * degenerate > plan.k {
            ConfigStatus::Degenerate
        } else if ok.is_empty() {
            ConfigStatus::Failed
        } else {
            ConfigStatus::Ok
        };
        let mean = mean_metrics(&ok);
        results.push(ConfigResult {
            index: c,
            score: mean.as_ref().map(|m| plan.selection.of(m)),
            status,
            mean,
            folds,
        });
    }

    let mut ranking: Vec<usize> = (0..results.len()).collect();
    ranking.sort_by(|&a, &b| {
        let (ra, rb) = (&results[a], &results[b]);
        let usable = |r: &ConfigResult| r.status == ConfigStatus::Ok;
        usable(rb)
            .cmp(&usable(ra))
            .then_with(|| {
                if !usable(ra) {
                    return std::cmp::Ordering::Equal;
                }
                let (ma, mb) = (ra.mean.as_ref().unwrap(), rb.mean.as_ref().unwrap());
                plan.selection
                    .of(mb)
                    .total_cmp(&plan.selection.of(ma))
                    .then(mb.precision_pu_lb.total_cmp(&ma.precision_pu_lb))
            })
            .then(a.cmp(&b))
    });

    Ok(CvOutcome {
        k: plan.k,
        seed: plan.seed,
        selection: plan.selection,
        fold_of,
        results,
        ranking,
    })
}
