use std::collections::HashMap;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::forward::ModelGrad;
use super::model::{LoraConfig, TrainScope, TransformerClassifier};
use super::ops::axpy;
use crate::corpus::{shuffle, LabeledCorpus};
use crate::error::{Error, Result};

pub const UNK: &str = "<unk>";
pub const DEFAULT_VOCAB_TERMS: usize = 8192;

/// Token ids for the encoder. Id 0 is reserved for unknown tokens; the rest
/// are the most frequent training terms, ties broken alphabetically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenVocab {
    terms: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl TokenVocab {
    pub fn build<D: AsRef<[S]>, S: AsRef<str>>(docs: &[D], max_terms: usize) -> Self {
        let mut counts: HashMap<&str, u64> = HashMap::new();
        for doc in docs {
            for tok in doc.as_ref() {
                *counts.entry(tok.as_ref()).or_default() += 1;
            }
        }
        let mut ranked: Vec<(&str, u64)> = counts.into_iter().filter(|(t, _)| *t != UNK).collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        ranked.truncate(max_terms);
        let terms = std::iter::once(UNK.to_string())
            .chain(ranked.into_iter().map(|(t, _)| t.to_string()))
            .collect();
        Self::from_terms(terms)
    }

    pub fn from_terms(terms: Vec<String>) -> Self {
        let index = terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        TokenVocab { terms, index }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(0)
    }

    /// Maps tokens to ids, truncating to `max_len`. An empty document becomes
    /// a single unknown token so that every example has at least one position.
    pub fn encode<S: AsRef<str>>(&self, tokens: &[S], max_len: usize) -> Vec<usize> {
        let ids: Vec<usize> = tokens.iter().take(max_len).map(|t| self.id(t.as_ref())).collect();
        if ids.is_empty() {
            vec![0]
        } else {
            ids
        }
    }

    pub(crate) fn rebuild_index(&mut self) {
        self.index = self.terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
    }
}

pub type Example = (Vec<usize>, bool);

pub fn encode_corpus(corpus: &LabeledCorpus, vocab: &TokenVocab, max_len: usize) -> Vec<Example> {
    corpus
        .posts
        .iter()
        .zip(&corpus.labels)
        .map(|(p, &y)| (vocab.encode(&p.tokens, max_len), y))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrainMode {
    Full,
    Lora,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub mode: TrainMode,
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
    /// Stop after the first epoch whose training accuracy reaches this value.
    pub target_accuracy: Option<f64>,
    /// Computes per-example gradients on the rayon pool. Results are
    /// identical either way.
    pub parallel: bool,
    /// Used when LoRA mode starts from a model without adapters.
    pub lora: LoraConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            mode: TrainMode::Lora,
            epochs: 10,
            lr: 0.05,
            batch_size: 16,
            seed: 42,
            target_accuracy: None,
            parallel: true,
            lora: LoraConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean training loss over the epoch's mini-batches, dropout included.
    pub loss: f64,
    /// Training accuracy after the epoch, in evaluation mode.
    pub accuracy: f64,
    /// Wall-clock seconds spent on gradient steps.
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub mode: TrainMode,
    pub epochs: Vec<EpochStats>,
    pub trainable_params: usize,
    pub total_params: usize,
}

impl TrainReport {
    pub fn mean_epoch_seconds(&self) -> f64 {
        if self.epochs.is_empty() {
            return 0.0;
        }
        self.epochs.iter().map(|e| e.seconds).sum::<f64>() / self.epochs.len() as f64
    }

    pub fn final_accuracy(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.accuracy)
    }
}

fn example_seed(seed: u64, epoch: usize, index: usize) -> u64 {
    let mut z = seed ^ ((epoch as u64) << 32) ^ index as u64;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Classification accuracy in evaluation mode.
pub fn accuracy(model: &TransformerClassifier, data: &[Example]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    let correct = data
        .par_iter()
        .map(|(ids, y)| model.predict(ids).map(|p| (p == *y) as usize))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum::<usize>();
    Ok(correct as f64 / data.len() as f64)
}

fn apply_sgd(model: &mut TransformerClassifier, grad: &ModelGrad, lr: f64) {
    let d = model.config.d_model;
    if let Some(tok) = &grad.tok {
        for (row, g) in tok {
            axpy(&mut model.tok_emb.data[row * d..(row + 1) * d], -lr, g);
        }
    }
    let slots: Vec<Vec<f64>> = grad.dense_slots(model).into_iter().map(<[f64]>::to_vec).collect();
    for ((_, t, _), g) in model.params_mut().into_iter().zip(slots) {
        if !g.is_empty() {
            axpy(&mut t.data, -lr, &g);
        }
    }
}

/// Mini-batch SGD on mean cross-entropy. In LoRA mode, adapters from
/// `config.lora` are attached first unless the model already has some;
/// only adapters (and optionally the head) are updated.
pub fn train(model: &mut TransformerClassifier, data: &[Example], config: &TrainConfig) -> Result<TrainReport> {
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    if config.batch_size == 0 || config.epochs == 0 {
        return Err(Error::InvalidArgument("epochs and batch_size must be positive".into()));
    }
    if !(config.lr > 0.0 && config.lr.is_finite()) {
        return Err(Error::InvalidArgument(format!("invalid learning rate {}", config.lr)));
    }
    for (ids, _) in data {
        model.check_ids(ids)?;
    }
    match (config.mode, model.scope) {
        (TrainMode::Lora, TrainScope::Full) => {
            if model.has_adapters() {
                return Err(Error::Model("adapted model is not in adapter scope".into()));
            }
            *model = model.attach_lora(&config.lora, config.seed)?;
        }
        (TrainMode::Full, TrainScope::Adapters { .. }) => {
            return Err(Error::Model(
                "full fine-tuning of an adapted model; merge the adapters first".into(),
            ));
        }
        _ => {}
    }

    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut epochs = Vec::new();
    for epoch in 0..config.epochs {
        shuffle(&mut order, &mut rng);
        let start = Instant::now();
        let mut loss_sum = 0.0;
        for batch in order.chunks(config.batch_size) {
            let m: &TransformerClassifier = model;
            let run = |&i: &usize| {
                let mut g = ModelGrad::zeros(m);
                let mut r = ChaCha8Rng::seed_from_u64(example_seed(config.seed, epoch, i));
                let (loss, _) = m.example_grad(&data[i].0, data[i].1, Some(&mut r), &mut g);
                (loss, g)
            };
            // Per-example gradients are reduced in batch order for determinism.
            let parts: Vec<(f64, ModelGrad)> = if config.parallel {
                batch.par_iter().map(run).collect()
            } else {
                batch.iter().map(run).collect()
            };
            let mut total = ModelGrad::zeros(m);
            let mut batch_loss = 0.0;
            for (l, g) in &parts {
                batch_loss += l;
                total.add(g);
            }
            if !batch_loss.is_finite() {
                return Err(Error::Divergence(format!("epoch {}", epoch + 1)));
            }
            total.scale(1.0 / batch.len() as f64);
            apply_sgd(model, &total, config.lr);
            loss_sum += batch_loss;
        }
        let seconds = start.elapsed().as_secs_f64();
        let acc = accuracy(model, data)?;
        epochs.push(EpochStats {
            epoch: epoch + 1,
            loss: loss_sum / data.len() as f64,
            accuracy: acc,
            seconds,
        });
        if config.target_accuracy.is_some_and(|t| acc >= t) {
            break;
        }
    }
    Ok(TrainReport {
        mode: config.mode,
        epochs,
        trainable_params: model.trainable_params(),
        total_params: model.total_params(),
    })
}
