//! Reference implementations used as test oracles. Each one is written from
//! the definition, as plainly as possible, without calling into the library.

#![allow(dead_code)]

use std::collections::HashMap;
use std::path::PathBuf;

use hatelab::microformer::{LoraConfig, ModelConfig};
use num_rational::Ratio;
use rand::Rng;

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

/// The labeling loop for one post.
pub fn reference_label(s1: u8, s2: u8, s3: u8, theta: u8) -> bool {
    let label1 = s1 >= theta;
    let label2 = s2 >= theta;
    if label1 == label2 {
        label1
    } else {
        s3 >= theta
    }
}

/// FNV-1a over 32 bits, in u64 arithmetic reduced after every step.
pub fn reference_fnv1a(bytes: &[u8]) -> u32 {
    let mut h: u64 = 2_166_136_261;
    for &b in bytes {
        h ^= b as u64;
        h = (h * 16_777_619) % (1u64 << 32);
    }
    h as u32
}

/// Vocabulary in first-seen order with document frequencies.
pub fn naive_vocab(docs: &[Vec<String>]) -> (Vec<String>, Vec<u64>) {
    let mut terms: Vec<String> = Vec::new();
    for doc in docs {
        for t in doc {
            if !terms.contains(t) {
                terms.push(t.clone());
            }
        }
    }
    let df = terms
        .iter()
        .map(|t| docs.iter().filter(|d| d.contains(t)).count() as u64)
        .collect();
    (terms, df)
}

pub fn naive_count(terms: &[String], doc: &[String]) -> Vec<f64> {
    terms
        .iter()
        .map(|t| doc.iter().filter(|x| *x == t).count() as f64)
        .collect()
}

pub fn naive_tfidf(terms: &[String], df: &[u64], n_docs: usize, doc: &[String]) -> Vec<f64> {
    let mut v: Vec<f64> = naive_count(terms, doc)
        .iter()
        .zip(df)
        .map(|(c, &d)| c * (((1 + n_docs) as f64 / (1 + d) as f64).ln() + 1.0))
        .collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

pub fn naive_hashing(doc: &[String], dim: usize) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    for t in doc {
        v[reference_fnv1a(t.as_bytes()) as usize % dim] += 1.0;
    }
    v
}

pub fn random_docs(rng: &mut impl Rng, n: usize, max_len: usize, n_words: usize) -> Vec<Vec<String>> {
    (0..n)
        .map(|_| {
            let len = rng.random_range(0..=max_len);
            (0..len).map(|_| format!("w{}", rng.random_range(0..n_words))).collect()
        })
        .collect()
}

/// Accuracy, precision, recall and F1 as exact fractions; 0/0 is 0.
pub fn rational_metrics(tp: i64, fp: i64, fn_: i64, tn: i64) -> [Ratio<i64>; 4] {
    let div = |a: i64, b: i64| if b == 0 { Ratio::from_integer(0) } else { Ratio::new(a, b) };
    let precision = div(tp, tp + fp);
    let recall = div(tp, tp + fn_);
    let f1 = if precision + recall == Ratio::from_integer(0) {
        Ratio::from_integer(0)
    } else {
        Ratio::from_integer(2) * precision * recall / (precision + recall)
    };
    [div(tp + tn, tp + fp + fn_ + tn), precision, recall, f1]
}

pub fn ratio_to_f64(r: Ratio<i64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Multinomial naive Bayes decision with add-one smoothing, computed as an
/// exact comparison of the two unnormalized posteriors. Ties are negative.
pub fn rational_nb_predict(docs: &[Vec<u32>], labels: &[bool], query: &[u32]) -> bool {
    let dim = query.len();
    let posterior = |class: bool| -> (u128, u128) {
        let members: Vec<&Vec<u32>> = docs.iter().zip(labels).filter(|(_, &l)| l == class).map(|(d, _)| d).collect();
        let total: u128 = members.iter().flat_map(|d| d.iter()).map(|&c| c as u128).sum();
        let mut num = members.len() as u128;
        let mut den = docs.len() as u128;
        for t in 0..dim {
            let count: u128 = members.iter().map(|d| d[t] as u128).sum();
            for _ in 0..query[t] {
                num *= count + 1;
                den *= total + dim as u128;
            }
        }
        (num, den)
    };
    let (pn, pd) = posterior(true);
    let (nn, nd) = posterior(false);
    pn * nd > nn * pd
}

/// k-NN by sorting every training point on (squared distance, index).
pub fn brute_knn(points: &[Vec<f64>], labels: &[bool], k: usize, query: &[f64]) -> bool {
    let mut order: Vec<(f64, usize)> = points
        .iter()
        .enumerate()
        .map(|(i, p)| (p.iter().zip(query).map(|(a, b)| (a - b) * (a - b)).sum(), i))
        .collect();
    order.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    let votes = order[..k].iter().filter(|(_, i)| labels[*i]).count();
    votes * 2 > k
}

/// Central difference of `f` at `x` along coordinate `i`.
pub fn central_diff(f: &mut dyn FnMut(&[f64]) -> f64, x: &[f64], i: usize, eps: f64) -> f64 {
    let mut xp = x.to_vec();
    xp[i] += eps;
    let mut xm = x.to_vec();
    xm[i] -= eps;
    (f(&xp) - f(&xm)) / (2.0 * eps)
}

/// `|a - b| / max(|a|, |b|, 1e-8)` over whole vectors. The floor keeps
/// gradients that are zero in exact arithmetic (the attention key bias, for
/// one) from comparing rounding noise with rounding noise.
pub fn rel_error(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&diff) / norm(a).max(norm(b)).max(1e-8)
}

/// Parameter count of the encoder classifier, counted layer by layer.
pub fn full_param_count(c: &ModelConfig) -> usize {
    let d = c.d_model;
    let linear = |i: usize, o: usize| i * o + o;
    let layer = 2 * (2 * d) + 4 * linear(d, d) + linear(d, c.d_ff) + linear(c.d_ff, d);
    c.vocab_size * d + c.max_seq_len * d + c.n_layers * layer + 2 * d + linear(d, c.n_classes)
}

/// Trainable parameters with adapters on the square attention projections.
pub fn lora_param_count(c: &ModelConfig, l: &LoraConfig) -> usize {
    let adapters = c.n_layers * l.targets.len() * l.rank * (2 * c.d_model);
    let head = if l.train_head { c.d_model * c.n_classes + c.n_classes } else { 0 };
    adapters + head
}

/// Small encoder shape for finite-difference checks.
pub fn tiny_config() -> ModelConfig {
    ModelConfig {
        vocab_size: 12,
        max_seq_len: 6,
        d_model: 8,
        n_heads: 2,
        n_layers: 2,
        d_ff: 12,
        n_classes: 2,
        dropout: 0.1,
    }
}

pub fn random_ids(rng: &mut impl Rng, vocab: usize, max_len: usize) -> Vec<usize> {
    let len = rng.random_range(1..=max_len);
    (0..len).map(|_| rng.random_range(0..vocab)).collect()
}

pub fn token_counts(doc: &[String]) -> HashMap<&str, usize> {
    let mut m = HashMap::new();
    for t in doc {
        *m.entry(t.as_str()).or_insert(0) += 1;
    }
    m
}
