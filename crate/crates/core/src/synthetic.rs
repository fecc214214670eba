//! Templated corpora and embedding tables for tests and demos.
//!
//! The vocabulary is made of invented placeholder words. Positive posts mention
//! a placeholder target group together with placeholder hostility markers;
//! negatives talk about everyday topics and sometimes mention the group or a
//! marker in a neutral way, which keeps the task from being trivially
//! separable.

use std::fmt::Write as _;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::corpus::{LabeledCorpus, Post};
use crate::features::EmbeddingTable;

pub const GROUP_TERM: &str = "groupx";

pub const MARKERS: [&str; 12] = [
    "vorn", "skel", "drazz", "murk", "quelp", "thrask", "zib", "gronch", "plav", "snerk", "wozz", "fleb",
];

pub const TOPICS: [&str; 18] = [
    "weather", "market", "coffee", "train", "garden", "music", "football", "recipe", "library", "museum", "holiday",
    "traffic", "concert", "election", "school", "bakery", "river", "festival",
];

const FILLER_COUNT: usize = 240;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub n_docs: usize,
    pub positive_rate: f64,
    /// Probability that a negative post carries one marker word anyway.
    pub ambiguity: f64,
    /// Probability that a label is flipped after the text is generated.
    pub label_noise: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_docs: 2000,
            positive_rate: 0.2,
            ambiguity: 0.05,
            label_noise: 0.02,
            seed: 42,
        }
    }
}

impl SyntheticConfig {
    /// A small, cleanly separable, balanced set.
    pub fn separable(n_docs: usize, seed: u64) -> Self {
        SyntheticConfig {
            n_docs,
            positive_rate: 0.5,
            ambiguity: 0.0,
            label_noise: 0.0,
            seed,
        }
    }
}

/// Pronounceable filler words, the same list for every seed.
pub fn filler_words() -> Vec<String> {
    const ONSETS: [char; 12] = ['b', 'd', 'f', 'g', 'k', 'l', 'm', 'n', 'p', 'r', 's', 't'];
    const VOWELS: [char; 5] = ['a', 'e', 'i', 'o', 'u'];
    const CODAS: [char; 4] = ['n', 'l', 'r', 's'];
    let mut all = Vec::new();
    for o1 in ONSETS {
        for v1 in VOWELS {
            for o2 in ONSETS {
                for (k, c) in CODAS.iter().enumerate() {
                    let v2 = VOWELS[(k + all.len()) % VOWELS.len()];
                    all.push(format!("{o1}{v1}{o2}{v2}{c}"));
                }
            }
        }
    }
    // a step coprime to the coda count varies the word endings
    let step = all.len() / FILLER_COUNT - 1;
    all.into_iter().step_by(step).take(FILLER_COUNT).collect()
}

/// Every word the generator can emit, excluding URLs and mentions.
pub fn vocabulary() -> Vec<String> {
    let mut words = filler_words();
    words.extend(TOPICS.iter().map(|s| s.to_string()));
    words.extend(MARKERS.iter().map(|s| s.to_string()));
    words.push(GROUP_TERM.to_string());
    words
}

pub fn synthetic_corpus(cfg: &SyntheticConfig) -> LabeledCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let filler = filler_words();
    let width = cfg.n_docs.max(1).to_string().len().max(4);
    let mut posts = Vec::with_capacity(cfg.n_docs);
    let mut labels = Vec::with_capacity(cfg.n_docs);
    for i in 0..cfg.n_docs {
        let positive = rng.random_bool(cfg.positive_rate);
        let mut words: Vec<String> = (0..rng.random_range(5..=14))
            .map(|_| filler.choose(&mut rng).expect("filler").clone())
            .collect();
        let mut insert = |rng: &mut ChaCha8Rng, w: &str| {
            let at = rng.random_range(0..=words.len());
            words.insert(at, w.to_string());
        };
        let topic = *TOPICS.choose(&mut rng).expect("topics");
        if positive {
            for _ in 0..rng.random_range(1..=2) {
                let m = *MARKERS.choose(&mut rng).expect("markers");
                insert(&mut rng, m);
            }
            if rng.random_bool(0.7) {
                insert(&mut rng, GROUP_TERM);
            }
            if rng.random_bool(0.3) {
                insert(&mut rng, topic);
            }
        } else {
            insert(&mut rng, topic);
            if rng.random_bool(0.25) {
                insert(&mut rng, GROUP_TERM);
            }
            if rng.random_bool(cfg.ambiguity) {
                let m = *MARKERS.choose(&mut rng).expect("markers");
                insert(&mut rng, m);
            }
        }
        let mut text = String::new();
        if rng.random_bool(0.15) {
            let _ = write!(text, "@user{} ", rng.random_range(1..500));
        }
        text.push_str(&words.join(" "));
        if rng.random_bool(0.1) {
            let _ = write!(text, " #{topic}");
        }
        if rng.random_bool(0.1) {
            let _ = write!(text, " https://example.org/p/{i}");
        }
        let label = if rng.random_bool(cfg.label_noise) { !positive } else { positive };
        posts.push(Post::new(format!("syn-{i:0width$}"), text));
        labels.push(label);
    }
    LabeledCorpus::new(posts, labels).expect("lengths match")
}

/// Random vectors for [`vocabulary`] with a shared offset along the first
/// `dim / 4` axes for marker words, so the table carries some signal. Entries
/// take both signs.
pub fn synthetic_embeddings(dim: usize, seed: u64) -> EmbeddingTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.5).expect("valid std");
    let mut table = EmbeddingTable::new(dim);
    for word in vocabulary() {
        let mut v: Vec<f64> = (0..dim).map(|_| noise.sample(&mut rng)).collect();
        if MARKERS.contains(&word.as_str()) {
            v.iter_mut().take((dim / 4).max(1)).for_each(|x| *x += 1.0);
        }
        table.insert(word, v).expect("dimension matches");
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn filler_words_are_unique() {
        let mut f = filler_words();
        assert_eq!(f.len(), FILLER_COUNT);
        f.sort();
        f.dedup();
        assert_eq!(f.len(), FILLER_COUNT);
        let v = vocabulary();
        assert!(!f.iter().any(|w| MARKERS.contains(&w.as_str()) || TOPICS.contains(&w.as_str())));
        assert_eq!(v.len(), FILLER_COUNT + TOPICS.len() + MARKERS.len() + 1);
    }

    #[test]
    fn corpus_shape() {
        let c = synthetic_corpus(&SyntheticConfig::default());
        assert_eq!(c.len(), 2000);
        let rate = c.positives() as f64 / c.len() as f64;
        assert!((0.17..0.23).contains(&rate), "{rate}");
        assert_eq!(c, synthetic_corpus(&SyntheticConfig::default()));
    }

    #[test]
    fn separable_set_is_separable() {
        let c = synthetic_corpus(&SyntheticConfig::separable(64, 1));
        for (p, &y) in c.posts.iter().zip(&c.labels) {
            let has_marker = p.tokens.iter().any(|t| MARKERS.contains(&t.as_str()));
            assert_eq!(has_marker, y, "{}", p.text);
        }
    }

    #[test]
    fn embeddings_have_both_signs() {
        let t = synthetic_embeddings(16, 3);
        assert_eq!(t.len(), vocabulary().len());
        let v = t.get("vorn").unwrap();
        assert!(v.iter().any(|&x| x < 0.0) || t.get("weather").unwrap().iter().any(|&x| x < 0.0));
    }
}
