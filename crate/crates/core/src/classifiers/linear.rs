//! Logistic regression and linear SVM, both trained by mini-batch
//! (sub)gradient descent.
//!
//! Weights are stored as `scale * v` while training so that L2 shrinkage is
//! a single multiply and a step only touches the batch's stored features.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::corpus::shuffle;
use crate::error::{Error, Result};
use crate::features::FeatureVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    weights: Vec<f64>,
    bias: f64,
}

impl LinearModel {
    pub fn new(weights: Vec<f64>, bias: f64) -> Self {
        LinearModel { weights, bias }
    }

    pub fn zeros(dim: usize) -> Self {
        LinearModel::new(vec![0.0; dim], 0.0)
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn weight_norm(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum::<f64>().sqrt()
    }

    pub fn decision(&self, x: &FeatureVector) -> f64 {
        x.dot(&self.weights) + self.bias
    }
}

/// Loss value with its gradient.
#[derive(Debug, Clone)]
pub struct Objective {
    pub loss: f64,
    pub grad_w: Vec<f64>,
    pub grad_b: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRegParams {
    pub lr: f64,
    pub l2: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for LogRegParams {
    fn default() -> Self {
        LogRegParams {
            lr: 0.5,
            l2: 1e-4,
            epochs: 30,
            batch_size: 16,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvmParams {
    pub lambda: f64,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            lambda: 1e-4,
            lr: 0.1,
            epochs: 30,
            batch_size: 16,
            seed: 42,
        }
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mean logistic loss plus `l2 / 2 * |w|^2`, with its exact gradient.
pub fn logistic_objective(model: &LinearModel, data: &Dataset, l2: f64) -> Objective {
    let n = data.len().max(1) as f64;
    let mut loss = 0.0;
    let mut grad_w = vec![0.0; model.dim()];
    let mut grad_b = 0.0;
    for (x, &y) in data.features().iter().zip(data.labels()) {
        let z = model.decision(x);
        loss += if y { softplus(-z) } else { softplus(z) };
        let g = sigmoid(z) - f64::from(u8::from(y));
        x.for_each(|i, v| grad_w[i] += g * v / n);
        grad_b += g / n;
    }
    let sq: f64 = model.weights.iter().map(|w| w * w).sum();
    for (g, w) in grad_w.iter_mut().zip(&model.weights) {
        *g += l2 * w;
    }
    Objective {
        loss: loss / n + 0.5 * l2 * sq,
        grad_w,
        grad_b,
    }
}

/// Mean hinge loss plus `lambda * |w|^2`. At a kink (margin exactly 1) the
/// hinge term contributes a zero subgradient.
pub fn hinge_objective(model: &LinearModel, data: &Dataset, lambda: f64) -> Objective {
    let n = data.len().max(1) as f64;
    let mut loss = 0.0;
    let mut grad_w = vec![0.0; model.dim()];
    let mut grad_b = 0.0;
    for (x, &y) in data.features().iter().zip(data.labels()) {
        let s = if y { 1.0 } else { -1.0 };
        let margin = s * model.decision(x);
        if margin < 1.0 {
            loss += 1.0 - margin;
            x.for_each(|i, v| grad_w[i] -= s * v / n);
            grad_b -= s / n;
        }
    }
    let sq: f64 = model.weights.iter().map(|w| w * w).sum();
    for (g, w) in grad_w.iter_mut().zip(&model.weights) {
        *g += 2.0 * lambda * w;
    }
    Objective {
        loss: loss / n + lambda * sq,
        grad_w,
        grad_b,
    }
}

/// Weight vector kept as `scale * v`.
struct ScaledWeights {
    v: Vec<f64>,
    scale: f64,
    bias: f64,
}

impl ScaledWeights {
    fn new(dim: usize) -> Self {
        ScaledWeights {
            v: vec![0.0; dim],
            scale: 1.0,
            bias: 0.0,
        }
    }

    fn decision(&self, x: &FeatureVector) -> f64 {
        self.scale * x.dot(&self.v) + self.bias
    }

    fn shrink(&mut self, factor: f64) {
        self.scale *= factor;
        if self.scale < 1e-9 {
            self.v.iter_mut().for_each(|w| *w *= self.scale);
            self.scale = 1.0;
        }
    }

    /// w -= step * x
    fn add_scaled(&mut self, x: &FeatureVector, step: f64) {
        let k = step / self.scale;
        let v = &mut self.v;
        x.for_each(|i, xv| v[i] -= k * xv);
    }

    fn into_model(self) -> LinearModel {
        let scale = self.scale;
        LinearModel::new(self.v.into_iter().map(|w| w * scale).collect(), self.bias)
    }
}

fn check_common(data: &Dataset, epochs: usize, batch_size: usize, lr: f64) -> Result<()> {
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    if epochs == 0 {
        return Err(Error::InvalidArgument("epochs must be >= 1".into()));
    }
    if batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be >= 1".into()));
    }
    if !(lr > 0.0 && lr.is_finite()) {
        return Err(Error::InvalidArgument(format!("learning rate must be > 0, got {lr}")));
    }
    Ok(())
}

fn batches(n: usize, batch_size: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    shuffle(&mut order, rng);
    order.chunks(batch_size).map(<[usize]>::to_vec).collect()
}

/// Minimizes the logistic objective with mini-batch gradient descent.
pub fn logreg_fit(data: &Dataset, params: &LogRegParams) -> Result<LinearModel> {
    check_common(data, params.epochs, params.batch_size, params.lr)?;
    if !(params.l2 >= 0.0) || params.lr * params.l2 >= 1.0 {
        return Err(Error::InvalidArgument(format!(
            "need l2 >= 0 and lr * l2 < 1 (lr {}, l2 {})",
            params.lr, params.l2
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut w = ScaledWeights::new(data.dim());
    for epoch in 0..params.epochs {
        for batch in batches(data.len(), params.batch_size, &mut rng) {
            let m = batch.len() as f64;
            let grads: Vec<f64> = batch
                .iter()
                .map(|&i| {
                    let y = f64::from(u8::from(data.labels()[i]));
                    sigmoid(w.decision(&data.features()[i])) - y
                })
                .collect();
            w.shrink(1.0 - params.lr * params.l2);
            for (&i, g) in batch.iter().zip(&grads) {
                w.add_scaled(&data.features()[i], params.lr * g / m);
            }
            w.bias -= params.lr * grads.iter().sum::<f64>() / m;
        }
        let loss = epoch_loss(&w, data, |z, y| if y { softplus(-z) } else { softplus(z) });
        if !loss.is_finite() || !w.bias.is_finite() {
            return Err(Error::Divergence(format!("logistic loss {loss} after epoch {}", epoch + 1)));
        }
    }
    Ok(w.into_model())
}

/// Linear SVM: hinge loss plus `lambda * |w|^2`, minimized by mini-batch
/// subgradient descent with step `lr / (1 + 2 * lr * lambda * t)`.
pub fn svm_fit(data: &Dataset, params: &SvmParams) -> Result<LinearModel> {
    check_common(data, params.epochs, params.batch_size, params.lr)?;
    if !(params.lambda >= 0.0) || 2.0 * params.lr * params.lambda >= 1.0 {
        return Err(Error::InvalidArgument(format!(
            "need lambda >= 0 and 2 * lr * lambda < 1 (lr {}, lambda {})",
            params.lr, params.lambda
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut w = ScaledWeights::new(data.dim());
    let mut t = 0u64;
    for epoch in 0..params.epochs {
        for batch in batches(data.len(), params.batch_size, &mut rng) {
            let eta = params.lr / (1.0 + 2.0 * params.lr * params.lambda * t as f64);
            t += 1;
            let m = batch.len() as f64;
            let active: Vec<(usize, f64)> = batch
                .iter()
                .filter_map(|&i| {
                    let s = if data.labels()[i] { 1.0 } else { -1.0 };
                    (s * w.decision(&data.features()[i]) < 1.0).then_some((i, s))
                })
                .collect();
            w.shrink(1.0 - 2.0 * eta * params.lambda);
            for &(i, s) in &active {
                w.add_scaled(&data.features()[i], -eta * s / m);
            }
            w.bias += eta * active.iter().map(|(_, s)| s).sum::<f64>() / m;
        }
        let loss = epoch_loss(&w, data, |z, y| {
            let s = if y { 1.0 } else { -1.0 };
            (1.0 - s * z).max(0.0)
        });
        if !loss.is_finite() || !w.bias.is_finite() {
            return Err(Error::Divergence(format!("hinge loss {loss} after epoch {}", epoch + 1)));
        }
    }
    Ok(w.into_model())
}

fn epoch_loss(w: &ScaledWeights, data: &Dataset, loss: impl Fn(f64, bool) -> f64) -> f64 {
    data.features()
        .iter()
        .zip(data.labels())
        .map(|(x, &y)| loss(w.decision(x), y))
        .sum::<f64>()
        / data.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn separable() -> Dataset {
        Dataset::from_rows(&[vec![-1.0], vec![1.0]], vec![false, true]).unwrap()
    }

    fn accuracy(m: &LinearModel, d: &Dataset) -> f64 {
        let ok = d
            .features()
            .iter()
            .zip(d.labels())
            .filter(|(x, &y)| (m.decision(x) > 0.0) == y)
            .count();
        ok as f64 / d.len() as f64
    }

    #[test]
    fn logreg_separates_1d() {
        let m = logreg_fit(&separable(), &LogRegParams { batch_size: 2, ..Default::default() }).unwrap();
        assert!(m.weights()[0] > 0.0);
        assert_eq!(accuracy(&m, &separable()), 1.0);
    }

    #[test]
    fn stronger_l2_gives_smaller_weights() {
        let d = Dataset::from_rows(
            &[vec![-2.0, 0.5], vec![-1.0, 1.0], vec![1.0, -0.5], vec![2.5, 0.0]],
            vec![false, false, true, true],
        )
        .unwrap();
        let fit = |l2| {
            logreg_fit(&d, &LogRegParams { lr: 0.05, l2, epochs: 200, batch_size: 2, seed: 3 }).unwrap()
        };
        assert!(fit(10.0).weight_norm() < fit(0.01).weight_norm());
    }

    #[test]
    fn svm_separates_1d() {
        let m = svm_fit(&separable(), &SvmParams { batch_size: 1, ..Default::default() }).unwrap();
        assert_eq!(accuracy(&m, &separable()), 1.0);
    }

    #[test]
    fn degenerate_svm_predicts_all_negative() {
        let m = LinearModel::new(vec![0.0, 0.0], -0.5);
        let d = Dataset::from_rows(&[vec![3.0, 1.0], vec![-2.0, 9.0]], vec![true, false]).unwrap();
        assert!(d.features().iter().all(|x| m.decision(x) <= 0.0));
    }

    #[test]
    fn divergence_is_reported() {
        let d = Dataset::from_rows(&[vec![1e300], vec![1e300]], vec![true, false]).unwrap();
        let err = logreg_fit(&d, &LogRegParams { lr: 1e10, l2: 0.0, epochs: 3, batch_size: 1, seed: 1 })
            .unwrap_err();
        assert!(matches!(err, Error::Divergence(_)), "{err:?}");
        assert!(err.to_string().contains("smaller learning rate"));
    }

    #[test]
    fn fits_are_bit_reproducible() {
        let d = Dataset::from_rows(
            &[vec![0.3, 1.0], vec![-1.0, 0.2], vec![0.8, -0.1], vec![-0.4, -0.9], vec![1.1, 0.7]],
            vec![true, false, true, false, true],
        )
        .unwrap();
        let p = LogRegParams { seed: 11, ..Default::default() };
        assert_eq!(logreg_fit(&d, &p).unwrap(), logreg_fit(&d, &p).unwrap());
        let s = SvmParams { seed: 11, ..Default::default() };
        assert_eq!(svm_fit(&d, &s).unwrap(), svm_fit(&d, &s).unwrap());
    }

    #[test]
    fn rejects_zero_epochs() {
        let p = LogRegParams { epochs: 0, ..Default::default() };
        assert!(logreg_fit(&separable(), &p).is_err());
        let s = SvmParams { epochs: 0, ..Default::default() };
        assert!(svm_fit(&separable(), &s).is_err());
    }
}
