//! Random forest of Gini-impurity decision trees.
//!
//! Each tree is grown on a bootstrap sample. At every node the split search
//! looks at `max_features` (default `ceil(sqrt(dim))`) randomly chosen
//! features among those that are not constant on the node's samples, and
//! thresholds sit at midpoints between consecutive distinct values.
//!
//! The random stream of a node is keyed by its path from the root, so a tree
//! grown with a larger `max_depth` is the shallower tree with some leaves
//! split further.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::features::FeatureVector;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub seed: u64,
    pub bootstrap: bool,
    /// Features examined per node; `None` means `ceil(sqrt(dim))`.
    pub max_features: Option<usize>,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            max_depth: 16,
            seed: 42,
            bootstrap: true,
            max_features: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    /// Samples with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    /// Class counts `[negative, positive]` of the training samples that reached it.
    Leaf { counts: [u32; 2] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    nodes: Vec<Node>,
}

impl DecisionTree {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn predict(&self, x: &FeatureVector) -> bool {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x.get(*feature) <= *threshold { *left } else { *right },
                Node::Leaf { counts } => return counts[1] > counts[0],
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    dim: usize,
    trees: Vec<DecisionTree>,
}

impl RandomForest {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    /// Majority over trees; a tied vote is negative.
    pub fn predict(&self, x: &FeatureVector) -> bool {
        let votes = self.trees.iter().filter(|t| t.predict(x)).count();
        2 * votes > self.trees.len()
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of tree `t` in a forest seeded with `seed`.
pub(crate) fn tree_seed(seed: u64, t: usize) -> u64 {
    splitmix64(seed ^ splitmix64(t as u64 + 1))
}

/// Bootstrap sample (indices with repetition) used for a tree.
pub(crate) fn bootstrap_sample(n: usize, seed: u64, bootstrap: bool) -> Vec<usize> {
    if !bootstrap {
        return (0..n).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n as u64) as usize).collect();
    idx.sort_unstable();
    idx
}

fn gini(neg: f64, pos: f64) -> f64 {
    let n = neg + pos;
    if n == 0.0 {
        return 0.0;
    }
    let (p0, p1) = (neg / n, pos / n);
    1.0 - p0 * p0 - p1 * p1
}

struct Grower<'a> {
    data: &'a Dataset,
    max_depth: usize,
    max_features: usize,
    nodes: Vec<Node>,
}

struct Candidate {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

impl Grower<'_> {
    fn grow(&mut self, samples: &[usize], depth: usize, key: u64) -> usize {
        let labels = self.data.labels();
        let pos = samples.iter().filter(|&&i| labels[i]).count();
        let counts = [(samples.len() - pos) as u32, pos as u32];
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { counts });
        if pos == 0 || pos == samples.len() || depth >= self.max_depth || samples.len() < 2 {
            return id;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        let Some(best) = self.best_split(samples, &mut rng) else {
            return id;
        };
        let feats = self.data.features();
        let (left, right): (Vec<usize>, Vec<usize>) = samples
            .iter()
            .partition(|&&i| feats[i].get(best.feature) <= best.threshold);
        let l = self.grow(&left, depth + 1, splitmix64(key ^ 1));
        let r = self.grow(&right, depth + 1, splitmix64(key ^ 2));
        self.nodes[id] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left: l,
            right: r,
        };
        id
    }

    fn best_split(&self, samples: &[usize], rng: &mut ChaCha8Rng) -> Option<Candidate> {
        let feats = self.data.features();
        let labels = self.data.labels();
        // Stored values per feature; absent entries are implicit zeros.
        let mut columns: BTreeMap<usize, Vec<(f64, bool)>> = BTreeMap::new();
        for &i in samples {
            feats[i].for_each(|f, v| columns.entry(f).or_default().push((v, labels[i])));
        }
        let n = samples.len();
        let mut candidates: Vec<usize> = columns
            .iter()
            .filter(|(_, col)| {
                let first = col[0].0;
                (col.len() < n && col.iter().any(|&(v, _)| v != 0.0))
                    || col.iter().any(|&(v, _)| v != first)
            })
            .map(|(&f, _)| f)
            .collect();
        let take = self.max_features.min(candidates.len());
        for k in 0..take {
            let j = k + rng.random_range(0..(candidates.len() - k) as u64) as usize;
            candidates.swap(k, j);
        }
        let total_pos = samples.iter().filter(|&&i| labels[i]).count() as f64;
        let total = n as f64;
        let mut best: Option<Candidate> = None;
        for &f in &candidates[..take] {
            let col = &columns[&f];
            let mut values: Vec<(f64, bool)> = col.clone();
            let zeros = n - col.len();
            if zeros > 0 {
                let zero_pos = total_pos as usize - col.iter().filter(|&&(_, y)| y).count();
                values.extend(std::iter::repeat_n((0.0, true), zero_pos));
                values.extend(std::iter::repeat_n((0.0, false), zeros - zero_pos));
            }
            values.sort_by(|a, b| a.0.total_cmp(&b.0));
            let (mut left_n, mut left_pos) = (0.0, 0.0);
            for k in 0..values.len() - 1 {
                left_n += 1.0;
                left_pos += f64::from(u8::from(values[k].1));
                let (lo, hi) = (values[k].0, values[k + 1].0);
                if lo == hi {
                    continue;
                }
                let right_n = total - left_n;
                let right_pos = total_pos - left_pos;
                let impurity = (left_n * gini(left_n - left_pos, left_pos)
                    + right_n * gini(right_n - right_pos, right_pos))
                    / total;
                if best.as_ref().is_none_or(|b| impurity < b.impurity) {
                    let mid = lo + (hi - lo) / 2.0;
                    let threshold = if mid < hi { mid } else { lo };
                    best = Some(Candidate {
                        feature: f,
                        threshold,
                        impurity,
                    });
                }
            }
        }
        best
    }
}

fn grow_tree(data: &Dataset, samples: &[usize], max_depth: usize, max_features: usize, seed: u64) -> DecisionTree {
    let mut g = Grower {
        data,
        max_depth,
        max_features,
        nodes: Vec::new(),
    };
    g.grow(samples, 0, splitmix64(seed));
    DecisionTree { nodes: g.nodes }
}

/// Grows `n_trees` trees in parallel; the result depends only on the data
/// and `params`.
pub fn rf_fit(data: &Dataset, params: &ForestParams) -> Result<RandomForest> {
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    if params.n_trees == 0 {
        return Err(Error::InvalidArgument("n_trees must be >= 1".into()));
    }
    let max_features = params
        .max_features
        .unwrap_or_else(|| (data.dim() as f64).sqrt().ceil() as usize)
        .max(1);
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let seed = tree_seed(params.seed, t);
            let samples = bootstrap_sample(data.len(), seed, params.bootstrap);
            grow_tree(data, &samples, params.max_depth, max_features, seed)
        })
        .collect();
    Ok(RandomForest {
        dim: data.dim(),
        trees,
    })
}
