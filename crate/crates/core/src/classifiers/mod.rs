//! Classical binary classifiers under one fit/predict surface.
//!
//! All models accept [`FeatureVector`]s, sparse or dense. Sparse math only
//! touches stored entries, so 2^18-bucket hashing features stay cheap.

mod forest;
mod knn;
mod linear;
mod naive_bayes;

use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureVector;

pub use forest::{rf_fit, DecisionTree, ForestParams, Node, RandomForest};
pub use knn::{knn_fit, knn_predict, KnnModel, DEFAULT_K};
pub use linear::{
    hinge_objective, logistic_objective, logreg_fit, svm_fit, LinearModel, LogRegParams, Objective,
    SvmParams,
};
pub use naive_bayes::{nb_fit, NaiveBayes, DEFAULT_ALPHA};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    features: Vec<FeatureVector>,
    labels: Vec<bool>,
    dim: usize,
}

impl Dataset {
    pub fn new(features: Vec<FeatureVector>, labels: Vec<bool>) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::InvalidArgument(format!(
                "{} feature vectors but {} labels",
                features.len(),
                labels.len()
            )));
        }
        let dim = features.first().map_or(0, FeatureVector::dim);
        let sparse = features.first().is_some_and(FeatureVector::is_sparse);
        for f in &features {
            if f.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: f.dim(),
                });
            }
            if f.is_sparse() != sparse {
                return Err(Error::InvalidArgument("mixed sparse and dense features".into()));
            }
        }
        Ok(Dataset {
            features,
            labels,
            dim,
        })
    }

    /// Dense dataset from plain rows.
    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<bool>) -> Result<Self> {
        let features = rows
            .iter()
            .map(|r| FeatureVector::Dense(crate::features::DenseVector(r.clone())))
            .collect();
        Self::new(features, labels)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn features(&self) -> &[FeatureVector] {
        &self.features
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub(crate) fn has_both_classes(&self) -> bool {
        self.labels.iter().any(|&l| l) && self.labels.iter().any(|&l| !l)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    NaiveBayes,
    LogisticRegression,
    Knn,
    LinearSvm,
    RandomForest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params")]
pub enum TrainedModel {
    NaiveBayes(NaiveBayes),
    LogisticRegression(LinearModel),
    Knn(KnnModel),
    LinearSvm(LinearModel),
    RandomForest(RandomForest),
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    dim: usize,
    model: TrainedModel,
}

const MODEL_FORMAT: &str = "hatelab-model";

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            TrainedModel::NaiveBayes(_) => ModelKind::NaiveBayes,
            TrainedModel::LogisticRegression(_) => ModelKind::LogisticRegression,
            TrainedModel::Knn(_) => ModelKind::Knn,
            TrainedModel::LinearSvm(_) => ModelKind::LinearSvm,
            TrainedModel::RandomForest(_) => ModelKind::RandomForest,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            TrainedModel::NaiveBayes(m) => m.dim(),
            TrainedModel::LogisticRegression(m) | TrainedModel::LinearSvm(m) => m.dim(),
            TrainedModel::Knn(m) => m.train.dim(),
            TrainedModel::RandomForest(m) => m.dim(),
        }
    }

    pub fn predict(&self, x: &FeatureVector) -> Result<bool> {
        if x.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: x.dim(),
            });
        }
        Ok(match self {
            TrainedModel::NaiveBayes(m) => m.predict(x),
            TrainedModel::LogisticRegression(m) | TrainedModel::LinearSvm(m) => m.decision(x) > 0.0,
            TrainedModel::Knn(m) => knn_predict(&m.train, m.k, x)?,
            TrainedModel::RandomForest(m) => m.predict(x),
        })
    }

    pub fn predict_batch(&self, xs: &[FeatureVector]) -> Result<Vec<bool>> {
        xs.iter().map(|x| self.predict(x)).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&ModelFile {
            format: MODEL_FORMAT.into(),
            version: 1,
            dim: self.dim(),
            model: self.clone(),
        })
        .expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| Error::Model(format!("bad model file: {e}")))?;
        if file.format != MODEL_FORMAT || file.version != 1 {
            return Err(Error::Model(format!(
                "unsupported model format {} v{}",
                file.format, file.version
            )));
        }
        if file.model.dim() != file.dim {
            return Err(Error::Model("model dimension does not match header".into()));
        }
        Ok(file.model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        serde_json::to_writer(
            BufWriter::new(f),
            &ModelFile {
                format: MODEL_FORMAT.into(),
                version: 1,
                dim: self.dim(),
                model: self.clone(),
            },
        )
        .map_err(|e| Error::Model(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = Error::open(path)?;
        let file: ModelFile = serde_json::from_reader(BufReader::new(f))
            .map_err(|e| Error::Model(format!("bad model file: {e}")))?;
        Self::from_json(&serde_json::to_string(&file).expect("reserializes"))
    }
}
