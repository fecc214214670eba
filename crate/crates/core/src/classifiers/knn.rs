use serde::{Deserialize, Serialize};

use super::{Dataset, TrainedModel};
use crate::error::{Error, Result};
use crate::features::FeatureVector;

pub const DEFAULT_K: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub train: Dataset,
    pub k: usize,
}

fn check_k(train: &Dataset, k: usize) -> Result<()> {
    if k == 0 || k % 2 == 0 {
        return Err(Error::InvalidArgument(format!("k must be odd, got {k}")));
    }
    if k > train.len() {
        return Err(Error::InvalidArgument(format!(
            "k = {k} exceeds the {} training examples",
            train.len()
        )));
    }
    Ok(())
}

pub fn knn_fit(train: Dataset, k: usize) -> Result<TrainedModel> {
    check_k(&train, k)?;
    Ok(TrainedModel::Knn(KnnModel { train, k }))
}

/// Majority label among the `k` nearest training points by Euclidean
/// distance. Equal distances prefer the lower training index.
pub fn knn_predict(train: &Dataset, k: usize, query: &FeatureVector) -> Result<bool> {
    check_k(train, k)?;
    if query.dim() != train.dim() {
        return Err(Error::DimensionMismatch {
            expected: train.dim(),
            actual: query.dim(),
        });
    }
    let mut dists: Vec<(f64, usize)> = train
        .features()
        .iter()
        .enumerate()
        .map(|(i, x)| (x.sq_distance(query), i))
        .collect();
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < dists.len() {
        dists.select_nth_unstable_by(k - 1, cmp);
    }
    let positives = dists[..k].iter().filter(|&&(_, i)| train.labels()[i]).count();
    Ok(2 * positives > k)
}
