use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::EvalError;

/// Predictions against labelled positives `P` and unlabelled posts `U`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionPu {
    /// predicted positive within P
    pub tp_p: usize,
    /// predicted negative within P
    pub fn_p: usize,
    /// predicted positive within U
    pub tp_u: usize,
    /// predicted positive among known negatives, if any exist
    pub fp: usize,
    pub u_size: usize,
    /// size of the evaluated set
    pub total: usize,
}

impl ConfusionPu {
    /// `labelled[i]` marks membership in P; everything else is U.
    pub fn from_predictions(labelled: &[bool], predicted: &[bool]) -> Self {
        let mut c = ConfusionPu {
            total: labelled.len(),
            ..Default::default()
        };
        for (&l, &p) in labelled.iter().zip(predicted) {
            match (l, p) {
                (true, true) => c.tp_p += 1,
                (true, false) => c.fn_p += 1,
                (false, true) => {
                    c.tp_u += 1;
                    c.u_size += 1
                }
                (false, false) => c.u_size += 1,
            }
        }
        c
    }

    pub fn predicted_pos(&self) -> usize {
        self.tp_p + self.tp_u + self.fp
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        if self.tp_u > self.u_size {
            return Err(EvalError::InvalidConfusion("tp_u exceeds |U|".into()));
        }
        if self.predicted_pos() > self.total || self.tp_p + self.fn_p + self.u_size > self.total {
            return Err(EvalError::InvalidConfusion("counts exceed the evaluated total".into()));
        }
        Ok(())
    }
}

/// Ground-truth confusion matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionPn {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionPn {
    pub fn from_predictions(truth: &[bool], predicted: &[bool]) -> Self {
        let mut c = ConfusionPn::default();
        for (&t, &p) in truth.iter().zip(predicted) {
            match (t, p) {
                (true, true) => c.tp += 1,
                (false, true) => c.fp += 1,
                (false, false) => c.tn += 1,
                (true, false) => c.fn_ += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PuEvalConfig {
    /// assumed share of positives in U
    pub r: f64,
    /// P(y = 1), for scaling G-mean_PU towards G-mean_PN
    pub prior: Option<f64>,
}

impl Default for PuEvalConfig {
    fn default() -> Self {
        PuEvalConfig { r: 0.025, prior: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PuMetrics {
    pub precision_pu_lb: f64,
    pub precision_pu_ub: f64,
    pub recall_pu: f64,
    pub f1_score_pu_lb: f64,
    pub f1_score_pu_ub: f64,
    pub g_mean_pu: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PnMetrics {
    pub precision_pn: f64,
    pub recall_pn: f64,
    pub f1_score_pn: f64,
    pub g_mean_pn: f64,
    pub mcc_pn: f64,
}

/// PU and/or PN metrics with the settings that produced them.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricsReport {
    #[serde(flatten, skip_serializing_if = "Option::is_none")]
    pub pu: Option<PuMetrics>,
    #[serde(flatten, skip_serializing_if = "Option::is_none")]
    pub pn: Option<PnMetrics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prior: Option<f64>,
    /// `sqrt(g_mean_pu * prior)` when a prior is given
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g_mean_pn_scaled: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub confusion_pu: Option<ConfusionPu>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub confusion_pn: Option<ConfusionPn>,
    /// metrics that hit 0/0 and were set to 0
    pub degenerate: Vec<String>,
}

impl MetricsReport {
    /// Metric name → value, in table order.
    pub fn values(&self) -> Vec<(&'static str, f64)> {
        let mut out = Vec::new();
        if let Some(m) = &self.pu {
            out.extend([
                ("precision_pu_lb", m.precision_pu_lb),
                ("precision_pu_ub", m.precision_pu_ub),
                ("recall_pu", m.recall_pu),
                ("f1_score_pu_lb", m.f1_score_pu_lb),
                ("f1_score_pu_ub", m.f1_score_pu_ub),
                ("g_mean_pu", m.g_mean_pu),
            ]);
        }
        if let Some(m) = &self.pn {
            out.extend([
                ("precision_pn", m.precision_pn),
                ("recall_pn", m.recall_pn),
                ("f1_score_pn", m.f1_score_pn),
                ("g_mean_pn", m.g_mean_pn),
                ("mcc_pn", m.mcc_pn),
            ]);
        }
        if let Some(g) = self.g_mean_pn_scaled {
            out.push(("g_mean_pn_scaled", g));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// `metric,value` rows.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["metric", "value"]).expect("in-memory write");
        for (name, v) in self.values() {
            w.write_record([name.to_string(), format!("{v}")]).expect("in-memory write");
        }
        for d in &self.degenerate {
            w.write_record(["degenerate".to_string(), d.clone()]).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }

    pub fn as_map(&self) -> BTreeMap<&'static str, f64> {
        self.values().into_iter().collect()
    }
}

/// `num / den`, or 0 with `name` recorded when `den` is 0.
fn ratio(num: f64, den: f64, name: &str, degenerate: &mut Vec<String>) -> f64 {
    if den == 0.0 {
        if !degenerate.iter().any(|d| d == name) {
            degenerate.push(name.to_string());
        }
        0.0
    } else {
        num / den
    }
}

fn harmonic(a: f64, b: f64, name: &str, degenerate: &mut Vec<String>) -> f64 {
    ratio(2.0 * a * b, a + b, name, degenerate)
}

pub fn pu_metrics(c: &ConfusionPu, cfg: &PuEvalConfig) -> Result<MetricsReport, EvalError> {
    c.validate()?;
    if !(0.0..=1.0).contains(&cfg.r) {
        return Err(EvalError::InvalidParameter(format!("r must lie in [0, 1], got {}", cfg.r)));
    }
    let mut deg = Vec::new();
    let pred = c.predicted_pos() as f64;
    let tp_p = c.tp_p as f64;
    let lb = ratio(tp_p, pred, "precision_pu_lb", &mut deg);
    let bonus = (cfg.r * c.u_size as f64).min((c.tp_u + c.fp) as f64);
    let ub = ratio(tp_p + bonus, pred, "precision_pu_ub", &mut deg);
    let recall = ratio(tp_p, (c.tp_p + c.fn_p) as f64, "recall_pu", &mut deg);
    let f1_lb = harmonic(lb, recall, "f1_score_pu_lb", &mut deg);
    let f1_ub = harmonic(ub, recall, "f1_score_pu_ub", &mut deg);
    let g = ratio(c.total as f64 * recall * recall, pred, "g_mean_pu", &mut deg);
    let scaled = match cfg.prior {
        Some(prior) => Some(gmean_scale(g, prior)?),
        None => None,
    };
    Ok(MetricsReport {
        pu: Some(PuMetrics {
            precision_pu_lb: lb,
            precision_pu_ub: ub,
            recall_pu: recall,
            f1_score_pu_lb: f1_lb,
            f1_score_pu_ub: f1_ub,
            g_mean_pu: g,
        }),
        r: Some(cfg.r),
        prior: cfg.prior,
        g_mean_pn_scaled: scaled,
        confusion_pu: Some(*c),
        degenerate: deg,
        ..Default::default()
    })
}

pub fn pn_metrics(c: &ConfusionPn) -> Result<MetricsReport, EvalError> {
    if c.total() == 0 {
        return Err(EvalError::InvalidConfusion("all counts are zero".into()));
    }
    let mut deg = Vec::new();
    let (tp, fp, tn, fn_) = (c.tp as f64, c.fp as f64, c.tn as f64, c.fn_ as f64);
    let precision = ratio(tp, tp + fp, "precision_pn", &mut deg);
    let recall = ratio(tp, tp + fn_, "recall_pn", &mut deg);
    let f1 = harmonic(precision, recall, "f1_score_pn", &mut deg);
    let g = (precision * recall).sqrt();
    let den = ((tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_)).sqrt();
    let mcc = ratio(tp * tn - fp * fn_, den, "mcc_pn", &mut deg);
    Ok(MetricsReport {
        pn: Some(PnMetrics {
            precision_pn: precision,
            recall_pn: recall,
            f1_score_pn: f1,
            g_mean_pn: g,
            mcc_pn: mcc.clamp(-1.0, 1.0),
        }),
        confusion_pn: Some(*c),
        degenerate: deg,
        ..Default::default()
    })
}

/// Approximate G-mean_PN from G-mean_PU: `sqrt(g * prior)`.
pub fn gmean_scale(gmean_pu: f64, prior: f64) -> Result<f64, EvalError> {
    if !(gmean_pu >= 0.0) {
        return Err(EvalError::InvalidParameter(format!("G-mean must be non-negative, got {gmean_pu}")));
    }
    if !(prior > 0.0 && prior <= 1.0) {
        return Err(EvalError::InvalidParameter(format!("prior must lie in (0, 1], got {prior}")));
    }
    Ok((gmean_pu * prior).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_pu_example() {
        let c = ConfusionPu {
            tp_p: 90,
            fn_p: 10,
            tp_u: 5,
            fp: 5,
            u_size: 1000,
            total: 1100,
        };
        let m = pu_metrics(&c, &PuEvalConfig::default()).unwrap().pu.unwrap();
        assert!((m.recall_pu - 0.9).abs() < 1e-12);
        assert!((m.precision_pu_lb - 0.9).abs() < 1e-12);
        assert!((m.precision_pu_ub - 1.0).abs() < 1e-12);
        assert!((m.g_mean_pu - 8.91).abs() < 1e-12);
    }

    #[test]
    fn perfect_p_only_predictor() {
        let c = ConfusionPu {
            tp_p: 50,
            fn_p: 0,
            tp_u: 0,
            fp: 0,
            u_size: 50,
            total: 100,
        };
        let m = pu_metrics(&c, &PuEvalConfig::default()).unwrap().pu.unwrap();
        assert_eq!(
            (m.precision_pu_lb, m.precision_pu_ub, m.recall_pu, m.f1_score_pu_lb),
            (1.0, 1.0, 1.0, 1.0)
        );
    }

    #[test]
    fn no_predicted_positives_is_flagged() {
        let c = ConfusionPu {
            tp_p: 0,
            fn_p: 10,
            tp_u: 0,
            fp: 0,
            u_size: 10,
            total: 20,
        };
        let r = pu_metrics(&c, &PuEvalConfig::default()).unwrap();
        assert_eq!(r.pu.unwrap().precision_pu_lb, 0.0);
        assert!(r.degenerate.contains(&"precision_pu_lb".to_string()));
    }

    #[test]
    fn mcc_conventions() {
        let perfect = ConfusionPn {
            tp: 50,
            tn: 50,
            fp: 0,
            fn_: 0,
        };
        assert_eq!(pn_metrics(&perfect).unwrap().pn.unwrap().mcc_pn, 1.0);
        let all_pos = ConfusionPn {
            tp: 50,
            fp: 50,
            tn: 0,
            fn_: 0,
        };
        let r = pn_metrics(&all_pos).unwrap();
        assert_eq!(r.pn.unwrap().mcc_pn, 0.0);
        assert!(pn_metrics(&ConfusionPn::default()).is_err());
    }

    #[test]
    fn scale_examples() {
        assert!((gmean_scale(1.611, 0.5125).unwrap() - 0.909).abs() < 5e-4);
        assert!((gmean_scale(1.454, 0.5125).unwrap() - 0.863).abs() < 5e-4);
        assert_eq!(gmean_scale(1.0, 1.0).unwrap(), 1.0);
        assert!(gmean_scale(1.0, 0.0).is_err());
    }

    #[test]
    fn report_formats() {
        let c = ConfusionPu::from_predictions(&[true, true, false, false], &[true, false, true, false]);
        assert_eq!(c.u_size, 2);
        let r = pu_metrics(&c, &PuEvalConfig::default()).unwrap();
        let json: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert!(json.get("g_mean_pu").is_some());
        assert!(json.get("mcc_pn").is_none());
        let csv = r.to_csv();
        assert!(csv.starts_with("metric,value\nprecision_pu_lb,0.5\n"));
    }
}
