//! Non-neural comparators: multinomial logistic regression and one-vs-rest
//! linear SVM over sparse TF-IDF features, trained by deterministic
//! epoch-shuffled (sub)gradient descent with L2 regularization.

use crate::error::{Error, Result};
use crate::features::SparseVec;
use crate::numerics::{softmax, Matrix, Rng};

pub const DEFAULT_EPOCHS: usize = 100;
pub const DEFAULT_LEARNING_RATE: f64 = 0.1;
pub const DEFAULT_L2: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinearKind {
    Logistic,
    SvmHinge,
}

impl LinearKind {
    pub fn tag(&self) -> &'static str {
        match self {
            LinearKind::Logistic => "logistic",
            LinearKind::SvmHinge => "svm_hinge",
        }
    }

    pub fn from_tag(tag: &str) -> Result<Self> {
        match tag {
            "logistic" => Ok(LinearKind::Logistic),
            "svm_hinge" => Ok(LinearKind::SvmHinge),
            other => Err(Error::invalid(format!("unknown linear model kind {other:?}"))),
        }
    }
}

/// K weight vectors plus biases over the fitted feature space.
#[derive(Debug, Clone)]
pub struct LinearModel {
    pub kind: LinearKind,
    /// K x dim.
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub l2_strength: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl LinearModel {
    pub fn num_classes(&self) -> usize {
        self.weights.rows()
    }

    pub fn dim(&self) -> usize {
        self.weights.cols()
    }
}

fn validate_inputs(
    x: &[SparseVec],
    y: &[usize],
    k: usize,
    learning_rate: f64,
    l2_strength: f64,
) -> Result<usize> {
    if x.is_empty() {
        return Err(Error::invalid("training data must be non-empty"));
    }
    if learning_rate <= 0.0 || l2_strength < 0.0 || learning_rate * l2_strength > 1.0 {
        return Err(Error::invalid(
            "require learning_rate > 0, l2_strength >= 0, and learning_rate * l2_strength <= 1",
        ));
    }
    if x.len() != y.len() {
        return Err(Error::invalid("feature and label counts differ"));
    }
    if k < 2 {
        return Err(Error::invalid("at least two classes are required"));
    }
    let dim = x[0].dim;
    for v in x {
        if v.dim != dim {
            return Err(Error::invalid("inconsistent feature dimensions"));
        }
    }
    for &label in y {
        if label >= k {
            return Err(Error::invalid(format!("label {label} out of range for {k} classes")));
        }
    }
    Ok(dim)
}

/// Raw decision scores `W x + b`. The weight matrix carries a lazy global
/// scale during training; callers outside this module always see it folded in.
fn scores_scaled(weights: &Matrix, bias: &[f64], scale: f64, x: &SparseVec) -> Vec<f64> {
    let mut scores = bias.to_vec();
    for (score, c) in scores.iter_mut().zip(0..weights.rows()) {
        let row = weights.row(c);
        let mut acc = 0.0;
        for &(col, v) in &x.entries {
            acc += row[col] * v;
        }
        *score += scale * acc;
    }
    scores
}

/// Fold the lazy decay scale into the weights when it gets tiny, keeping the
/// per-example update sparse without losing precision.
fn renormalize_if_needed(weights: &mut Matrix, scale: &mut f64) {
    if *scale < 1e-9 {
        for v in weights.data_mut() {
            *v *= *scale;
        }
        *scale = 1.0;
    }
}

/// Multinomial logistic regression: per-example softmax gradient steps on
/// W (1 - lr*l2) decay, bias unregularized.
pub fn train_logreg(
    x: &[SparseVec],
    y: &[usize],
    k: usize,
    epochs: usize,
    learning_rate: f64,
    l2_strength: f64,
    seed: u64,
) -> Result<LinearModel> {
    let dim = validate_inputs(x, y, k, learning_rate, l2_strength)?;
    let mut weights = Matrix::zeros(k, dim);
    let mut bias = vec![0.0; k];
    let mut scale = 1.0f64;
    let mut rng = Rng::new(seed);
    let mut order: Vec<usize> = (0..x.len()).collect();

    for epoch in 0..epochs {
        rng.shuffle(&mut order);
        for &i in &order {
            let probs = softmax(&scores_scaled(&weights, &bias, scale, &x[i]));
            if probs.iter().any(|p| !p.is_finite()) {
                return Err(Error::NonFiniteLoss { epoch: epoch + 1, batch: i + 1 });
            }
            scale *= 1.0 - learning_rate * l2_strength;
            renormalize_if_needed(&mut weights, &mut scale);
            for c in 0..k {
                let err = probs[c] - if y[i] == c { 1.0 } else { 0.0 };
                if err == 0.0 {
                    continue;
                }
                let step = learning_rate * err / scale;
                let row = weights.row_mut(c);
                for &(col, v) in &x[i].entries {
                    row[col] -= step * v;
                }
                bias[c] -= learning_rate * err;
            }
        }
    }
    for v in weights.data_mut() {
        *v *= scale;
    }
    Ok(LinearModel { kind: LinearKind::Logistic, weights, bias, l2_strength, epochs, seed })
}

/// One-vs-rest binary hinge classifiers trained by L2-regularized subgradient
/// descent; prediction is the argmax of the decision scores.
pub fn train_linear_svm(
    x: &[SparseVec],
    y: &[usize],
    k: usize,
    epochs: usize,
    learning_rate: f64,
    l2_strength: f64,
    seed: u64,
) -> Result<LinearModel> {
    let dim = validate_inputs(x, y, k, learning_rate, l2_strength)?;
    let mut weights = Matrix::zeros(k, dim);
    let mut bias = vec![0.0; k];
    let mut scale = 1.0f64;
    let mut rng = Rng::new(seed);
    let mut order: Vec<usize> = (0..x.len()).collect();

    for epoch in 0..epochs {
        rng.shuffle(&mut order);
        for &i in &order {
            let scores = scores_scaled(&weights, &bias, scale, &x[i]);
            if scores.iter().any(|s| !s.is_finite()) {
                return Err(Error::NonFiniteLoss { epoch: epoch + 1, batch: i + 1 });
            }
            scale *= 1.0 - learning_rate * l2_strength;
            renormalize_if_needed(&mut weights, &mut scale);
            for c in 0..k {
                let sign = if y[i] == c { 1.0 } else { -1.0 };
                if sign * scores[c] < 1.0 {
                    let step = learning_rate * sign / scale;
                    let row = weights.row_mut(c);
                    for &(col, v) in &x[i].entries {
                        row[col] += step * v;
                    }
                    bias[c] += learning_rate * sign;
                }
            }
        }
    }
    for v in weights.data_mut() {
        *v *= scale;
    }
    Ok(LinearModel { kind: LinearKind::SvmHinge, weights, bias, l2_strength, epochs, seed })
}

/// Predicted label and score vector: softmax probabilities for logistic, raw
/// decision scores for hinge. Ties break toward the smaller index.
pub fn predict_linear(model: &LinearModel, x: &SparseVec) -> Result<(usize, Vec<f64>)> {
    if x.dim != model.dim() {
        return Err(Error::invalid(format!(
            "feature dimension {} does not match the model's {}",
            x.dim,
            model.dim()
        )));
    }
    let raw = scores_scaled(&model.weights, &model.bias, 1.0, x);
    let scores = match model.kind {
        LinearKind::Logistic => softmax(&raw),
        LinearKind::SvmHinge => raw,
    };
    Ok((crate::cnn::argmax(&scores), scores))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_hot(dim: usize, col: usize) -> SparseVec {
        SparseVec { dim, entries: vec![(col, 1.0)] }
    }

    #[test]
    fn logreg_separates_one_hot_classes() {
        let x = vec![one_hot(2, 0), one_hot(2, 1)];
        let y = vec![0, 1];
        let model = train_logreg(&x, &y, 2, DEFAULT_EPOCHS, 0.1, 1e-4, 1).unwrap();
        for (xi, yi) in x.iter().zip(&y) {
            let (label, probs) = predict_linear(&model, xi).unwrap();
            assert_eq!(label, *yi);
            assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn logreg_weights_shrink_with_stronger_l2() {
        let x = vec![one_hot(2, 0), one_hot(2, 1), one_hot(2, 0), one_hot(2, 1)];
        let y = vec![0, 1, 0, 1];
        let norm = |l2: f64| {
            let m = train_logreg(&x, &y, 2, 50, 0.1, l2, 3).unwrap();
            m.weights.data().iter().map(|v| v * v).sum::<f64>().sqrt()
        };
        let n_small = norm(1e-4);
        let n_mid = norm(1e-1);
        let n_big = norm(10.0);
        assert!(n_small > n_mid && n_mid > n_big, "{n_small} {n_mid} {n_big}");
    }

    /// Synthetic keyword corpus: class c uses columns 10c..10c+5.
    fn keyword_corpus(n: usize, k: usize, seed: u64) -> (Vec<SparseVec>, Vec<usize>) {
        let dim = 10 * k;
        let mut rng = Rng::new(seed);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let class = i % k;
            let mut cols: Vec<usize> =
                (0..4).map(|_| 10 * class + rng.below(5)).collect();
            cols.sort_unstable();
            cols.dedup();
            let entries: Vec<(usize, f64)> =
                cols.into_iter().map(|c| (c, 1.0)).collect();
            x.push(SparseVec { dim, entries });
            y.push(class);
        }
        (x, y)
    }

    #[test]
    fn logreg_high_accuracy_on_synthetic_keywords() {
        let (x, y) = keyword_corpus(20, 2, 5);
        let model =
            train_logreg(&x, &y, 2, DEFAULT_EPOCHS, DEFAULT_LEARNING_RATE, DEFAULT_L2, 7).unwrap();
        let (tx, ty) = keyword_corpus(40, 2, 99);
        let correct = tx
            .iter()
            .zip(&ty)
            .filter(|(xi, yi)| predict_linear(&model, xi).unwrap().0 == **yi)
            .count();
        assert!(correct as f64 / ty.len() as f64 >= 0.95);
    }

    #[test]
    fn logreg_loss_non_increasing_at_small_learning_rate() {
        let (x, y) = keyword_corpus(12, 3, 11);
        let mut last = f64::INFINITY;
        for epochs in [1usize, 4, 16, 64] {
            let model = train_logreg(&x, &y, 3, epochs, 0.01, 1e-4, 2).unwrap();
            let loss: f64 = x
                .iter()
                .zip(&y)
                .map(|(xi, yi)| {
                    let (_, p) = predict_linear(&model, xi).unwrap();
                    -(p[*yi].max(1e-12)).ln()
                })
                .sum();
            assert!(loss <= last + 1e-9, "loss {loss} after {epochs} epochs > {last}");
            last = loss;
        }
    }

    #[test]
    fn svm_separable_margins_nonnegative() {
        let x = vec![one_hot(2, 0), one_hot(2, 1)];
        let y = vec![0, 1];
        let model = train_linear_svm(&x, &y, 2, DEFAULT_EPOCHS, 0.1, 1e-4, 1).unwrap();
        for (xi, yi) in x.iter().zip(&y) {
            let (_, scores) = predict_linear(&model, xi).unwrap();
            for c in 0..2 {
                let sign = if *yi == c { 1.0 } else { -1.0 };
                assert!(sign * scores[c] >= 0.0, "margin violated");
            }
        }
    }

    #[test]
    fn svm_identical_documents_predict_majority() {
        let x: Vec<SparseVec> = (0..5).map(|_| one_hot(3, 1)).collect();
        let y = vec![0, 1, 1, 1, 0];
        let model = train_linear_svm(&x, &y, 2, 60, 0.05, 1e-4, 4).unwrap();
        let (label, _) = predict_linear(&model, &one_hot(3, 1)).unwrap();
        assert_eq!(label, 1);
    }

    #[test]
    fn svm_argmax_invariant_under_positive_rescaling() {
        let (x, y) = keyword_corpus(16, 2, 21);
        let mut model = train_linear_svm(&x, &y, 2, 40, 0.1, 1e-4, 8).unwrap();
        let before: Vec<usize> =
            x.iter().map(|xi| predict_linear(&model, xi).unwrap().0).collect();
        for v in model.weights.data_mut() {
            *v *= 3.5;
        }
        for b in &mut model.bias {
            *b *= 3.5;
        }
        let after: Vec<usize> =
            x.iter().map(|xi| predict_linear(&model, xi).unwrap().0).collect();
        assert_eq!(before, after);
    }

    #[test]
    fn svm_binary_symmetric_data_mirrors_weights() {
        // Symmetric two-class one-hot data: one-vs-rest weights mirror.
        let x = vec![one_hot(2, 0), one_hot(2, 1)];
        let y = vec![0, 1];
        let model = train_linear_svm(&x, &y, 2, 200, 0.1, 1e-4, 13).unwrap();
        for col in 0..2 {
            let w0 = model.weights.get(0, col);
            let w1 = model.weights.get(1, col);
            assert!((w0 + w1).abs() < 1e-6, "w0 {w0}, w1 {w1}");
        }
    }

    #[test]
    fn predict_zero_weights_breaks_ties_to_class_zero() {
        let model = LinearModel {
            kind: LinearKind::SvmHinge,
            weights: Matrix::zeros(3, 2),
            bias: vec![0.0; 3],
            l2_strength: 0.0,
            epochs: 0,
            seed: 0,
        };
        let (label, _) = predict_linear(&model, &one_hot(2, 0)).unwrap();
        assert_eq!(label, 0);
    }

    #[test]
    fn predict_hand_set_weights_exact_score() {
        let mut weights = Matrix::zeros(2, 2);
        weights.set(0, 0, 1.5);
        weights.set(0, 1, -0.5);
        weights.set(1, 0, 0.25);
        let model = LinearModel {
            kind: LinearKind::SvmHinge,
            weights,
            bias: vec![0.1, -0.2],
            l2_strength: 0.0,
            epochs: 0,
            seed: 0,
        };
        let x = SparseVec { dim: 2, entries: vec![(0, 2.0), (1, 4.0)] };
        let (_, scores) = predict_linear(&model, &x).unwrap();
        assert!((scores[0] - (1.5 * 2.0 - 0.5 * 4.0 + 0.1)).abs() < 1e-15);
        assert!((scores[1] - (0.25 * 2.0 - 0.2)).abs() < 1e-15);
    }

    #[test]
    fn training_is_deterministic_under_fixed_seed() {
        let (x, y) = keyword_corpus(20, 3, 17);
        let a = train_logreg(&x, &y, 3, 30, 0.1, 1e-4, 5).unwrap();
        let b = train_logreg(&x, &y, 3, 30, 0.1, 1e-4, 5).unwrap();
        assert_eq!(a.weights.data(), b.weights.data());
        assert_eq!(a.bias, b.bias);
        let c = train_linear_svm(&x, &y, 3, 30, 0.1, 1e-4, 5).unwrap();
        let d = train_linear_svm(&x, &y, 3, 30, 0.1, 1e-4, 5).unwrap();
        assert_eq!(c.weights.data(), d.weights.data());
    }

    #[test]
    fn dimension_mismatch_is_error() {
        let model = LinearModel {
            kind: LinearKind::Logistic,
            weights: Matrix::zeros(2, 4),
            bias: vec![0.0; 2],
            l2_strength: 0.0,
            epochs: 0,
            seed: 0,
        };
        assert!(predict_linear(&model, &one_hot(3, 0)).is_err());
    }
}
