//! Document vectorizers: token counts, TF-IDF, the hashing trick and
//! mean-pooled pretrained embeddings.

mod embeddings;
mod hashing;
mod vocab;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use embeddings::{embed_mean, load_embeddings, parse_embeddings, EmbeddingTable};
pub use hashing::{fnv1a_32, transform_hashing, DEFAULT_HASH_DIM};
pub use vocab::{fit_count, idf, transform_count, transform_tfidf, Vocabulary};

/// Sparse vector with strictly increasing indices and no stored zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    dim: usize,
    entries: Vec<(usize, f64)>,
}

impl SparseVector {
    pub fn zeros(dim: usize) -> Self {
        SparseVector {
            dim,
            entries: Vec::new(),
        }
    }

    /// Builds from entries that must already be sorted, unique and in range.
    /// Zero values are dropped.
    pub fn from_sorted(dim: usize, entries: Vec<(usize, f64)>) -> Result<Self> {
        let mut prev: Option<usize> = None;
        for &(i, v) in &entries {
            if i >= dim {
                return Err(Error::InvalidArgument(format!("index {i} out of range for dim {dim}")));
            }
            if prev.is_some_and(|p| p >= i) {
                return Err(Error::InvalidArgument("sparse indices must be strictly increasing".into()));
            }
            if !v.is_finite() {
                return Err(Error::InvalidArgument(format!("non-finite value at index {i}")));
            }
            prev = Some(i);
        }
        let entries = entries.into_iter().filter(|&(_, v)| v != 0.0).collect();
        Ok(SparseVector { dim, entries })
    }

    pub fn from_dense(values: &[f64]) -> Self {
        SparseVector {
            dim: values.len(),
            entries: values
                .iter()
                .enumerate()
                .filter(|(_, &v)| v != 0.0)
                .map(|(i, &v)| (i, v))
                .collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, index: usize) -> f64 {
        self.entries
            .binary_search_by_key(&index, |&(i, _)| i)
            .map_or(0.0, |k| self.entries[k].1)
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|(_, v)| v * v).sum::<f64>().sqrt()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for &(i, v) in &self.entries {
            out[i] = v;
        }
        out
    }

    pub(crate) fn scale(&mut self, factor: f64) {
        for e in &mut self.entries {
            e.1 *= factor;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseVector(pub Vec<f64>);

impl DenseVector {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// A document representation accepted by every classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FeatureVector {
    Sparse(SparseVector),
    Dense(DenseVector),
}

impl FeatureVector {
    pub fn dim(&self) -> usize {
        match self {
            FeatureVector::Sparse(s) => s.dim(),
            FeatureVector::Dense(d) => d.dim(),
        }
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self, FeatureVector::Sparse(_))
    }

    pub fn get(&self, index: usize) -> f64 {
        match self {
            FeatureVector::Sparse(s) => s.get(index),
            FeatureVector::Dense(d) => d.0[index],
        }
    }

    /// Calls `f` for every stored entry (all entries for dense vectors).
    #[inline]
    pub fn for_each(&self, mut f: impl FnMut(usize, f64)) {
        match self {
            FeatureVector::Sparse(s) => s.entries.iter().for_each(|&(i, v)| f(i, v)),
            FeatureVector::Dense(d) => d.0.iter().enumerate().for_each(|(i, &v)| f(i, v)),
        }
    }

    #[inline]
    pub fn dot(&self, weights: &[f64]) -> f64 {
        let mut acc = 0.0;
        self.for_each(|i, v| acc += v * weights[i]);
        acc
    }

    pub fn sq_norm(&self) -> f64 {
        let mut acc = 0.0;
        self.for_each(|_, v| acc += v * v);
        acc
    }

    /// Smallest stored value, or 0.0 for an all-zero sparse vector.
    pub fn min_value(&self) -> (usize, f64) {
        let mut best = (0, 0.0);
        self.for_each(|i, v| {
            if v < best.1 {
                best = (i, v);
            }
        });
        best
    }

    /// Squared Euclidean distance, summed over indices in increasing order.
    pub fn sq_distance(&self, other: &FeatureVector) -> f64 {
        match (self, other) {
            (FeatureVector::Dense(a), FeatureVector::Dense(b)) => {
                a.0.iter().zip(&b.0).map(|(x, y)| (x - y) * (x - y)).sum()
            }
            (FeatureVector::Sparse(a), FeatureVector::Sparse(b)) => {
                let (a, b) = (&a.entries, &b.entries);
                let (mut i, mut j, mut acc) = (0, 0, 0.0);
                while i < a.len() || j < b.len() {
                    let d = match (a.get(i), b.get(j)) {
                        (Some(&(ia, va)), Some(&(ib, vb))) if ia == ib => {
                            i += 1;
                            j += 1;
                            va - vb
                        }
                        (Some(&(ia, va)), Some(&(ib, _))) if ia < ib => {
                            i += 1;
                            va
                        }
                        (Some(&(_, va)), None) => {
                            i += 1;
                            va
                        }
                        (_, Some(&(_, vb))) => {
                            j += 1;
                            -vb
                        }
                        (None, None) => unreachable!(),
                    };
                    acc += d * d;
                }
                acc
            }
            (a, b) => {
                let mut acc = 0.0;
                for k in 0..a.dim() {
                    let d = a.get(k) - b.get(k);
                    acc += d * d;
                }
                acc
            }
        }
    }
}

impl From<SparseVector> for FeatureVector {
    fn from(v: SparseVector) -> Self {
        FeatureVector::Sparse(v)
    }
}

impl From<DenseVector> for FeatureVector {
    fn from(v: DenseVector) -> Self {
        FeatureVector::Dense(v)
    }
}

/// A fitted document-to-vector mapping.
#[derive(Debug, Clone)]
pub enum Vectorizer {
    Count(Vocabulary),
    Tfidf(Vocabulary),
    Hashing { dim: usize },
    Embedding(EmbeddingTable),
}

impl Vectorizer {
    pub fn transform<S: AsRef<str>>(&self, doc: &[S]) -> Result<FeatureVector> {
        Ok(match self {
            Vectorizer::Count(v) => transform_count(v, doc).into(),
            Vectorizer::Tfidf(v) => transform_tfidf(v, doc).into(),
            Vectorizer::Hashing { dim } => transform_hashing(doc, *dim)?.into(),
            Vectorizer::Embedding(t) => embed_mean(t, doc).into(),
        })
    }

    pub fn vocabulary(&self) -> Option<&Vocabulary> {
        match self {
            Vectorizer::Count(v) | Vectorizer::Tfidf(v) => Some(v),
            _ => None,
        }
    }
}
