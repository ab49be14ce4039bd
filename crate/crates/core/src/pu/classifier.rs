use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::optim::{minimize, Convergence};
use super::PuError;
use crate::scalar::{dot, Scalar};

pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_ITER: usize = 2000;

fn default_tol() -> f64 {
    DEFAULT_TOL
}

fn default_max_iter() -> usize {
    DEFAULT_MAX_ITER
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KnnWeights {
    Uniform,
    Distance,
}

impl fmt::Display for KnnWeights {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KnnWeights::Uniform => "uniform",
            KnnWeights::Distance => "distance",
        })
    }
}

/// Stage-2 classifier and its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassifierConfig {
    /// L2-regularized logistic regression, `C` as in the usual
    /// `C * sum(loss) + ||w||^2 / 2` scaling.
    LogisticRegression {
        c: f64,
        #[serde(default = "default_tol")]
        tol: f64,
        #[serde(default = "default_max_iter")]
        max_iter: usize,
    },
    /// L2-regularized squared-hinge linear SVM.
    LinearSvm {
        c: f64,
        #[serde(default = "default_tol")]
        tol: f64,
        #[serde(default = "default_max_iter")]
        max_iter: usize,
    },
    Knn {
        k: usize,
        weights: KnnWeights,
        /// Minkowski exponent, 1 or 2
        p: u8,
    },
    /// Resolved by name against the plugins passed to training.
    Plugin { name: String },
}

impl ClassifierConfig {
    pub fn logistic(c: f64) -> Self {
        ClassifierConfig::LogisticRegression {
            c,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }

    pub fn svm(c: f64) -> Self {
        ClassifierConfig::LinearSvm {
            c,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }

    pub fn knn(k: usize, weights: KnnWeights, p: u8) -> Self {
        ClassifierConfig::Knn { k, weights, p }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ClassifierConfig::LogisticRegression { .. } => "logistic_regression",
            ClassifierConfig::LinearSvm { .. } => "linear_svm",
            ClassifierConfig::Knn { .. } => "knn",
            ClassifierConfig::Plugin { .. } => "plugin",
        }
    }

    pub fn validate(&self) -> Result<(), PuError> {
        let bad = |m: String| Err(PuError::InvalidConfig(m));
        match self {
            ClassifierConfig::LogisticRegression { c, tol, max_iter }
            | ClassifierConfig::LinearSvm { c, tol, max_iter } => {
                if !(*c > 0.0 && c.is_finite()) {
                    return bad(format!("regularization coefficient must be positive, got {c}"));
                }
                if !(*tol > 0.0) || *max_iter == 0 {
                    return bad("tol and max_iter must be positive".into());
                }
            }
            ClassifierConfig::Knn { k, p, .. } => {
                if *k == 0 {
                    return bad("k must be at least 1".into());
                }
                if *p != 1 && *p != 2 {
                    return bad(format!("Minkowski p must be 1 or 2, got {p}"));
                }
            }
            ClassifierConfig::Plugin { name } => {
                if name.is_empty() {
                    return bad("plugin name is empty".into());
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for ClassifierConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClassifierConfig::LogisticRegression { c, .. } => write!(f, "lr(C={c})"),
            ClassifierConfig::LinearSvm { c, .. } => write!(f, "svm(C={c})"),
            ClassifierConfig::Knn { k, weights, p } => write!(f, "knn(k={k},{weights},p={p})"),
            ClassifierConfig::Plugin { name } => write!(f, "plugin({name})"),
        }
    }
}

/// A fitted binary scorer supplied by a plugin.
pub trait BinaryScorer<T: Scalar>: Send + Sync + fmt::Debug {
    /// Positive-class confidence in `[0, 1]`.
    fn score(&self, x: &[T]) -> T;
}

/// External classifier (tree ensembles and the like).
pub trait ClassifierPlugin<T: Scalar>: Send + Sync {
    fn name(&self) -> &str;
    fn fit(&self, x: &[Vec<T>], y: &[bool], seed: u64) -> Result<Arc<dyn BinaryScorer<T>>, PuError>;
}

pub(crate) fn sigmoid<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus<T: Scalar>(z: T) -> T {
    if z > T::zero() {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Weights followed by an unregularized bias.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel<T> {
    pub weights: Vec<T>,
    pub bias: T,
    pub convergence: Convergence,
}

impl<T: Scalar> LinearModel<T> {
    pub fn margin(&self, x: &[T]) -> T {
        dot(&self.weights, x) + self.bias
    }
}

/// Objective `(1/n) sum log(1 + exp(-s_i z_i)) + ||w||^2 / (2 C n)` with
/// `z_i = w.x_i + b`, `s_i = ±1`, and its gradient over `[w, b]`.
pub fn logistic_objective<T: Scalar>(params: &[T], x: &[Vec<T>], y: &[bool], c: f64, grad: &mut [T]) -> T {
    let d = params.len() - 1;
    let (w, b) = (&params[..d], params[d]);
    let n = T::from_usize(x.len()).expect("sample count");
    grad.iter_mut().for_each(|g| *g = T::zero());
    let mut loss = T::zero();
    for (xi, &yi) in x.iter().zip(y) {
        let z = dot(w, xi) + b;
        let target = if yi { T::one() } else { T::zero() };
        loss += if yi { softplus(-z) } else { softplus(z) };
        let r = sigmoid(z) - target;
        for (g, &v) in grad[..d].iter_mut().zip(xi) {
            *g += r * v;
        }
        grad[d] += r;
    }
    let lam = T::one() / (T::from_f64_lossy(c) * n);
    grad.iter_mut().for_each(|g| *g /= n);
    for (g, &wi) in grad[..d].iter_mut().zip(w) {
        *g += lam * wi;
    }
    loss / n + lam * dot(w, w) / (T::one() + T::one())
}

/// Objective `(1/n) sum max(0, 1 - s_i z_i)^2 + ||w||^2 / (2 C n)`.
pub fn squared_hinge_objective<T: Scalar>(params: &[T], x: &[Vec<T>], y: &[bool], c: f64, grad: &mut [T]) -> T {
    let d = params.len() - 1;
    let (w, b) = (&params[..d], params[d]);
    let n = T::from_usize(x.len()).expect("sample count");
    let two = T::one() + T::one();
    grad.iter_mut().for_each(|g| *g = T::zero());
    let mut loss = T::zero();
    for (xi, &yi) in x.iter().zip(y) {
        let s = if yi { T::one() } else { -T::one() };
        let slack = T::one() - s * (dot(w, xi) + b);
        if slack > T::zero() {
            loss += slack * slack;
            let r = -two * slack * s;
            for (g, &v) in grad[..d].iter_mut().zip(xi) {
                *g += r * v;
            }
            grad[d] += r;
        }
    }
    let lam = T::one() / (T::from_f64_lossy(c) * n);
    grad.iter_mut().for_each(|g| *g /= n);
    for (g, &wi) in grad[..d].iter_mut().zip(w) {
        *g += lam * wi;
    }
    loss / n + lam * dot(w, w) / two
}

fn fit_linear<T: Scalar>(
    x: &[Vec<T>],
    y: &[bool],
    c: f64,
    tol: f64,
    max_iter: usize,
    objective: fn(&[T], &[Vec<T>], &[bool], f64, &mut [T]) -> T,
    what: &str,
) -> LinearModel<T> {
    let d = x[0].len();
    let (params, convergence) = minimize(vec![T::zero(); d + 1], tol, max_iter, |p, g| {
        objective(p, x, y, c, g)
    });
    if !convergence.converged {
        log::warn!(
            "{what} did not converge in {max_iter} iterations (gradient norm {:.3e}); using best iterate",
            convergence.grad_norm
        );
    }
    LinearModel {
        bias: params[d],
        weights: params[..d].to_vec(),
        convergence,
    }
}

pub fn fit_logistic<T: Scalar>(x: &[Vec<T>], y: &[bool], c: f64, tol: f64, max_iter: usize) -> LinearModel<T> {
    fit_linear(x, y, c, tol, max_iter, logistic_objective, "logistic regression")
}

pub fn fit_svm<T: Scalar>(x: &[Vec<T>], y: &[bool], c: f64, tol: f64, max_iter: usize) -> LinearModel<T> {
    fit_linear(x, y, c, tol, max_iter, squared_hinge_objective, "linear SVM")
}

/// Stored training set scored by a neighbor vote.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnModel<T> {
    pub k: usize,
    pub weights: KnnWeights,
    pub p: u8,
    pub x: Vec<Vec<T>>,
    pub y: Vec<bool>,
}

impl<T: Scalar> KnnModel<T> {
    pub fn fit(x: &[Vec<T>], y: &[bool], k: usize, weights: KnnWeights, p: u8) -> Self {
        if k > x.len() {
            log::warn!("k = {k} exceeds the {} training points; using all of them", x.len());
        }
        KnnModel {
            k,
            weights,
            p,
            x: x.to_vec(),
            y: y.to_vec(),
        }
    }

    fn distance(&self, a: &[T], b: &[T]) -> T {
        if self.p == 1 {
            a.iter().zip(b).map(|(&u, &v)| (u - v).abs()).sum()
        } else {
            a.iter().zip(b).map(|(&u, &v)| (u - v) * (u - v)).sum::<T>().sqrt()
        }
    }

    /// Weighted fraction of positive neighbors. Ties in distance keep
    /// training order.
    pub fn score(&self, q: &[T]) -> T {
        let mut d: Vec<(T, usize)> = self
            .x
            .iter()
            .enumerate()
            .map(|(i, xi)| (self.distance(q, xi), i))
            .collect();
        d.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal).then(a.1.cmp(&b.1)));
        let near = &d[..self.k.min(d.len())];
        let (mut pos, mut total) = (T::zero(), T::zero());
        let exact = near.iter().any(|(dist, _)| *dist == T::zero());
        for &(dist, i) in near {
            let w = match self.weights {
                KnnWeights::Uniform => T::one(),
                // exact matches take all the weight
                KnnWeights::Distance if exact => {
                    if dist == T::zero() {
                        T::one()
                    } else {
                        T::zero()
                    }
                }
                KnnWeights::Distance => T::one() / dist,
            };
            total += w;
            if self.y[i] {
                pos += w;
            }
        }
        if total == T::zero() {
            T::zero()
        } else {
            pos / total
        }
    }
}

/// A fitted stage-2 classifier.
#[derive(Debug, Clone)]
pub enum Stage2Model<T: Scalar> {
    Logistic(LinearModel<T>),
    Svm(LinearModel<T>),
    Knn(KnnModel<T>),
    Plugin { name: String, scorer: Arc<dyn BinaryScorer<T>> },
}

impl<T: Scalar> Stage2Model<T> {
    /// Positive-class confidence in `[0, 1]`. The SVM margin goes through a
    /// logistic link.
    pub fn score(&self, x: &[T]) -> T {
        let s = match self {
            Stage2Model::Logistic(m) | Stage2Model::Svm(m) => sigmoid(m.margin(x)),
            Stage2Model::Knn(m) => m.score(x),
            Stage2Model::Plugin { scorer, .. } => scorer.score(x),
        };
        s.max(T::zero()).min(T::one())
    }

    pub fn convergence(&self) -> Option<Convergence> {
        match self {
            Stage2Model::Logistic(m) | Stage2Model::Svm(m) => Some(m.convergence),
            _ => None,
        }
    }
}

/// Fits the configured classifier on labelled vectors.
pub fn fit_classifier<T: Scalar>(
    config: &ClassifierConfig,
    x: &[Vec<T>],
    y: &[bool],
    seed: u64,
    plugins: &[Arc<dyn ClassifierPlugin<T>>],
) -> Result<Stage2Model<T>, PuError> {
    config.validate()?;
    if !y.iter().any(|&v| v) {
        return Err(PuError::ClassAbsent("positive"));
    }
    if y.iter().all(|&v| v) {
        return Err(PuError::ClassAbsent("negative"));
    }
    Ok(match config {
        ClassifierConfig::LogisticRegression { c, tol, max_iter } => {
            Stage2Model::Logistic(fit_logistic(x, y, *c, *tol, *max_iter))
        }
        ClassifierConfig::LinearSvm { c, tol, max_iter } => {
            Stage2Model::Svm(fit_svm(x, y, *c, *tol, *max_iter))
        }
        ClassifierConfig::Knn { k, weights, p } => Stage2Model::Knn(KnnModel::fit(x, y, *k, *weights, *p)),
        ClassifierConfig::Plugin { name } => {
            let plugin = plugins
                .iter()
                .find(|p| p.name() == name)
                .ok_or_else(|| PuError::Plugin(format!("no plugin named {name:?}")))?;
            Stage2Model::Plugin {
                name: name.clone(),
                scorer: plugin.fit(x, y, seed)?,
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn separable() -> (Vec<Vec<f64>>, Vec<bool>) {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..20 {
            let t = i as f64 * 0.1;
            x.push(vec![2.0 + t, 1.0 - t * 0.5]);
            y.push(true);
            x.push(vec![-2.0 - t, -1.0 + t * 0.3]);
            y.push(false);
        }
        (x, y)
    }

    #[test]
    fn logistic_separates() {
        let (x, y) = separable();
        let m = fit_logistic(&x, &y, 1.0, 1e-8, 5000);
        assert!(m.convergence.converged);
        let acc = x.iter().zip(&y).filter(|(xi, &yi)| (m.margin(xi) >= 0.0) == yi).count();
        assert_eq!(acc, x.len());
    }

    #[test]
    fn svm_separates() {
        let (x, y) = separable();
        let m = fit_svm(&x, &y, 1.0, 1e-8, 5000);
        assert!(m.convergence.converged);
        assert!(x.iter().zip(&y).all(|(xi, &yi)| (m.margin(xi) >= 0.0) == yi));
    }

    #[test]
    fn knn_single_class() {
        let x: Vec<Vec<f64>> = (0..11).map(|i| vec![i as f64, 1.0]).collect();
        let m = KnnModel::fit(&x, &[true; 11], 11, KnnWeights::Uniform, 2);
        assert_eq!(m.score(&[100.0, -3.0]), 1.0);
        let m = KnnModel::fit(&x, &[false; 11], 11, KnnWeights::Distance, 1);
        assert_eq!(m.score(&[0.5, 0.0]), 0.0);
    }

    #[test]
    fn knn_distance_weights() {
        let x = vec![vec![0.0f64], vec![1.0], vec![3.0]];
        let y = vec![true, false, false];
        let m = KnnModel::fit(&x, &y, 3, KnnWeights::Distance, 2);
        // weights 1/0.5, 1/0.5, 1/2.5
        let s = m.score(&[0.5]);
        assert!((s - 2.0 / 4.4).abs() < 1e-12);
        assert_eq!(m.score(&[1.0]), 0.0);
    }

    #[test]
    fn class_absent() {
        let x = vec![vec![1.0f64], vec![2.0]];
        assert!(matches!(
            fit_classifier(&ClassifierConfig::logistic(1.0), &x, &[true, true], 0, &[]),
            Err(PuError::ClassAbsent("negative"))
        ));
    }

    #[test]
    fn config_serde() {
        let c = ClassifierConfig::knn(11, KnnWeights::Distance, 1);
        let s = serde_json::to_string(&c).unwrap();
        assert_eq!(s, r#"{"kind":"knn","k":11,"weights":"distance","p":1}"#);
        let lr: ClassifierConfig = serde_json::from_str(r#"{"kind":"logistic_regression","c":10}"#).unwrap();
        assert_eq!(lr, ClassifierConfig::logistic(10.0));
        assert!(ClassifierConfig::knn(3, KnnWeights::Uniform, 3).validate().is_err());
    }
}
