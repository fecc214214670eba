use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::features::FeatureVector;

pub const DEFAULT_ALPHA: f64 = 1.0;

/// Multinomial naive Bayes with additive smoothing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayes {
    alpha: f64,
    /// ln P(class), indexed `[negative, positive]`.
    class_log_prior: [f64; 2],
    /// ln P(feature | class), one vector per class.
    feature_log_prob: [Vec<f64>; 2],
}

/// Fits `P(t|c) = (count(t,c) + alpha) / (total(c) + alpha * V)` with class
/// priors from label frequencies. Feature values act as (possibly fractional)
/// counts and must be non-negative.
pub fn nb_fit(data: &Dataset, alpha: f64) -> Result<NaiveBayes> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!("alpha must be > 0, got {alpha}")));
    }
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    if !data.has_both_classes() {
        return Err(Error::SingleClass);
    }
    let dim = data.dim();
    let mut counts = [vec![0.0; dim], vec![0.0; dim]];
    let mut docs = [0usize; 2];
    for (x, &y) in data.features().iter().zip(data.labels()) {
        let (index, value) = x.min_value();
        if value < 0.0 {
            return Err(Error::NegativeFeature { index, value });
        }
        let c = usize::from(y);
        docs[c] += 1;
        x.for_each(|i, v| counts[c][i] += v);
    }
    let n = data.len() as f64;
    let feature_log_prob = counts.map(|cnt| {
        let total: f64 = cnt.iter().sum();
        let denom = (total + alpha * dim as f64).ln();
        cnt.iter().map(|c| (c + alpha).ln() - denom).collect()
    });
    Ok(NaiveBayes {
        alpha,
        class_log_prior: [(docs[0] as f64 / n).ln(), (docs[1] as f64 / n).ln()],
        feature_log_prob,
    })
}

impl NaiveBayes {
    pub fn dim(&self) -> usize {
        self.feature_log_prob[0].len()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn class_log_prior(&self, class: bool) -> f64 {
        self.class_log_prior[usize::from(class)]
    }

    pub fn feature_log_prob(&self, class: bool) -> &[f64] {
        &self.feature_log_prob[usize::from(class)]
    }

    /// Unnormalized log posterior of `class`.
    pub fn joint_log_likelihood(&self, x: &FeatureVector, class: bool) -> f64 {
        let c = usize::from(class);
        self.class_log_prior[c] + x.dot(&self.feature_log_prob[c])
    }

    /// Positive only when its log posterior is larger by more than rounding
    /// noise; exact ties go to the negative class.
    pub fn predict(&self, x: &FeatureVector) -> bool {
        let pos = self.joint_log_likelihood(x, true);
        let neg = self.joint_log_likelihood(x, false);
        pos - neg > 1e-10 * pos.abs().max(neg.abs()).max(1.0)
    }
}
