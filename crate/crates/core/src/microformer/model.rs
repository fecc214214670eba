use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::ops::matmul;
use crate::error::{Error, Result};

pub const INIT_STD: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub max_seq_len: usize,
    pub d_model: usize,
    pub n_heads: usize,
    pub n_layers: usize,
    pub d_ff: usize,
    pub n_classes: usize,
    pub dropout: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            vocab_size: 8193,
            max_seq_len: 64,
            d_model: 64,
            n_heads: 4,
            n_layers: 2,
            d_ff: 256,
            n_classes: 2,
            dropout: 0.1,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.n_heads == 0 || self.d_model % self.n_heads != 0 {
            return bad(format!(
                "d_model {} is not divisible by n_heads {}",
                self.d_model, self.n_heads
            ));
        }
        if self.vocab_size == 0 || self.max_seq_len == 0 || self.d_model == 0 || self.d_ff == 0 {
            return bad("vocab_size, max_seq_len, d_model and d_ff must be positive".into());
        }
        if self.n_classes != 2 {
            return bad(format!("only binary classification is supported, got {} classes", self.n_classes));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout must lie in [0, 1), got {}", self.dropout));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; shape.iter().product()],
        }
    }

    pub(crate) fn normal(shape: &[usize], std: f64, rng: &mut ChaCha8Rng) -> Self {
        let dist = Normal::new(0.0, std).expect("valid std");
        Tensor {
            shape: shape.to_vec(),
            data: (0..shape.iter().product::<usize>()).map(|_| dist.sample(rng)).collect(),
        }
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }
}

/// Attention projections that can carry a low-rank adapter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Projection {
    Query,
    Key,
    Value,
    Output,
}

impl Projection {
    pub const ALL: [Projection; 4] = [Projection::Query, Projection::Key, Projection::Value, Projection::Output];

    pub fn name(self) -> &'static str {
        match self {
            Projection::Query => "query",
            Projection::Key => "key",
            Projection::Value => "value",
            Projection::Output => "output",
        }
    }
}

/// Low-rank update `(alpha / rank) * B * A` added to a frozen weight.
/// `A` is `rank x d_in`, `B` is `d_out x rank`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoraAdapter {
    pub rank: usize,
    pub alpha: f64,
    pub a: Tensor,
    pub b: Tensor,
}

impl LoraAdapter {
    pub fn scaling(&self) -> f64 {
        self.alpha / self.rank as f64
    }

    /// `(alpha / rank) * B * A`, shaped like the wrapped weight.
    pub fn delta(&self) -> Vec<f64> {
        let (d_out, d_in) = (self.b.shape[0], self.a.shape[1]);
        let mut d = matmul(&self.b.data, &self.a.data, d_out, self.rank, d_in);
        let s = self.scaling();
        d.iter_mut().for_each(|v| *v *= s);
        d
    }
}

/// `y = W x + b`, with `W` stored `d_out x d_in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub weight: Tensor,
    pub bias: Tensor,
    pub lora: Option<LoraAdapter>,
}

impl Linear {
    fn init(d_out: usize, d_in: usize, rng: &mut ChaCha8Rng) -> Self {
        Linear {
            weight: Tensor::normal(&[d_out, d_in], INIT_STD, rng),
            bias: Tensor::zeros(&[d_out]),
            lora: None,
        }
    }

    pub fn d_out(&self) -> usize {
        self.weight.shape[0]
    }

    pub fn d_in(&self) -> usize {
        self.weight.shape[1]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerNorm {
    pub gain: Tensor,
    pub bias: Tensor,
}

impl LayerNorm {
    fn new(d: usize) -> Self {
        LayerNorm {
            gain: Tensor::filled(&[d], 1.0),
            bias: Tensor::zeros(&[d]),
        }
    }
}

/// Pre-norm encoder block: `x + Attn(LN(x))`, then `x + FF(LN(x))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderLayer {
    pub ln1: LayerNorm,
    /// Indexed by [`Projection`]: query, key, value, output.
    pub attn: [Linear; 4],
    pub ln2: LayerNorm,
    pub ff_in: Linear,
    pub ff_out: Linear,
}

/// Which parameters receive gradients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrainScope {
    Full,
    Adapters { head: bool },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum ParamKind {
    Base,
    Head,
    Adapter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformerClassifier {
    pub config: ModelConfig,
    pub tok_emb: Tensor,
    pub pos_emb: Tensor,
    pub layers: Vec<EncoderLayer>,
    pub ln_f: LayerNorm,
    pub head: Linear,
    pub scope: TrainScope,
}

/// Adapter placement and size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoraConfig {
    pub rank: usize,
    pub alpha: f64,
    pub targets: Vec<Projection>,
    pub train_head: bool,
}

impl Default for LoraConfig {
    fn default() -> Self {
        LoraConfig {
            rank: 8,
            alpha: 16.0,
            targets: vec![Projection::Query, Projection::Value],
            train_head: true,
        }
    }
}

/// Deterministic initialization: weights ~ N(0, 0.02), biases 0, layer-norm gains 1.
pub fn init_model(config: &ModelConfig, seed: u64) -> Result<TransformerClassifier> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = config.d_model;
    let tok_emb = Tensor::normal(&[config.vocab_size, d], INIT_STD, &mut rng);
    let pos_emb = Tensor::normal(&[config.max_seq_len, d], INIT_STD, &mut rng);
    let layers = (0..config.n_layers)
        .map(|_| EncoderLayer {
            ln1: LayerNorm::new(d),
            attn: std::array::from_fn(|_| Linear::init(d, d, &mut rng)),
            ln2: LayerNorm::new(d),
            ff_in: Linear::init(config.d_ff, d, &mut rng),
            ff_out: Linear::init(d, config.d_ff, &mut rng),
        })
        .collect();
    Ok(TransformerClassifier {
        config: config.clone(),
        tok_emb,
        pos_emb,
        layers,
        ln_f: LayerNorm::new(d),
        head: Linear::init(config.n_classes, d, &mut rng),
        scope: TrainScope::Full,
    })
}

macro_rules! collect_params {
    ($self:expr, $out:ident, $iter:ident, $($mutability:tt)*) => {{
        $out.push(("tok_emb".to_string(), & $($mutability)* $self.tok_emb, ParamKind::Base));
        $out.push(("pos_emb".to_string(), & $($mutability)* $self.pos_emb, ParamKind::Base));
        for (l, layer) in $self.layers.$iter().enumerate() {
            let p = format!("layers.{l}");
            $out.push((format!("{p}.ln1.gain"), & $($mutability)* layer.ln1.gain, ParamKind::Base));
            $out.push((format!("{p}.ln1.bias"), & $($mutability)* layer.ln1.bias, ParamKind::Base));
            for (proj, lin) in Projection::ALL.iter().zip(layer.attn.$iter()) {
                let q = format!("{p}.attn.{}", proj.name());
                $out.push((format!("{q}.weight"), & $($mutability)* lin.weight, ParamKind::Base));
                $out.push((format!("{q}.bias"), & $($mutability)* lin.bias, ParamKind::Base));
                if let Some(lora) = & $($mutability)* lin.lora {
                    $out.push((format!("{q}.lora_a"), & $($mutability)* lora.a, ParamKind::Adapter));
                    $out.push((format!("{q}.lora_b"), & $($mutability)* lora.b, ParamKind::Adapter));
                }
            }
            $out.push((format!("{p}.ln2.gain"), & $($mutability)* layer.ln2.gain, ParamKind::Base));
            $out.push((format!("{p}.ln2.bias"), & $($mutability)* layer.ln2.bias, ParamKind::Base));
            $out.push((format!("{p}.ff_in.weight"), & $($mutability)* layer.ff_in.weight, ParamKind::Base));
            $out.push((format!("{p}.ff_in.bias"), & $($mutability)* layer.ff_in.bias, ParamKind::Base));
            $out.push((format!("{p}.ff_out.weight"), & $($mutability)* layer.ff_out.weight, ParamKind::Base));
            $out.push((format!("{p}.ff_out.bias"), & $($mutability)* layer.ff_out.bias, ParamKind::Base));
        }
        $out.push(("ln_f.gain".to_string(), & $($mutability)* $self.ln_f.gain, ParamKind::Base));
        $out.push(("ln_f.bias".to_string(), & $($mutability)* $self.ln_f.bias, ParamKind::Base));
        $out.push(("head.weight".to_string(), & $($mutability)* $self.head.weight, ParamKind::Head));
        $out.push(("head.bias".to_string(), & $($mutability)* $self.head.bias, ParamKind::Head));
    }};
}

impl TransformerClassifier {
    /// Every tensor with its name, in a fixed canonical order.
    pub(crate) fn params(&self) -> Vec<(String, &Tensor, ParamKind)> {
        let mut out = Vec::new();
        collect_params!(self, out, iter,);
        out
    }

    pub(crate) fn params_mut(&mut self) -> Vec<(String, &mut Tensor, ParamKind)> {
        let mut out = Vec::new();
        collect_params!(self, out, iter_mut, mut);
        out
    }

    pub fn tensor_names(&self) -> Vec<String> {
        self.params().into_iter().map(|(n, _, _)| n).collect()
    }

    pub fn tensor(&self, name: &str) -> Option<&Tensor> {
        self.params().into_iter().find(|(n, _, _)| n == name).map(|(_, t, _)| t)
    }

    pub fn tensor_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.params_mut().into_iter().find(|(n, _, _)| n == name).map(|(_, t, _)| t)
    }

    pub(crate) fn is_trainable(&self, kind: ParamKind) -> bool {
        match (self.scope, kind) {
            (TrainScope::Full, _) => true,
            (TrainScope::Adapters { .. }, ParamKind::Adapter) => true,
            (TrainScope::Adapters { head }, ParamKind::Head) => head,
            (TrainScope::Adapters { .. }, ParamKind::Base) => false,
        }
    }

    pub fn trainable_names(&self) -> Vec<String> {
        self.params()
            .into_iter()
            .filter(|(_, _, k)| self.is_trainable(*k))
            .map(|(n, _, _)| n)
            .collect()
    }

    pub fn total_params(&self) -> usize {
        self.params().iter().map(|(_, t, _)| t.numel()).sum()
    }

    pub fn trainable_params(&self) -> usize {
        self.params()
            .iter()
            .filter(|(_, _, k)| self.is_trainable(*k))
            .map(|(_, t, _)| t.numel())
            .sum()
    }

    /// Resets the classification head to zero, so every input gets equal logits.
    pub fn zero_head(&mut self) {
        self.head.weight.data.fill(0.0);
        self.head.bias.data.fill(0.0);
    }

    pub fn has_adapters(&self) -> bool {
        self.layers.iter().any(|l| l.attn.iter().any(|p| p.lora.is_some()))
    }

    /// Projections currently wrapped by adapters, with the adapter shape.
    pub fn lora_config(&self) -> Option<LoraConfig> {
        let mut targets = Vec::new();
        let mut shape = None;
        for (proj, lin) in Projection::ALL.iter().zip(&self.layers.first()?.attn) {
            if let Some(l) = &lin.lora {
                targets.push(*proj);
                shape = Some((l.rank, l.alpha));
            }
        }
        let (rank, alpha) = shape?;
        Some(LoraConfig {
            rank,
            alpha,
            targets,
            train_head: matches!(self.scope, TrainScope::Adapters { head: true }),
        })
    }

    /// Wraps the target projections of every layer with fresh adapters
    /// (`A ~ N(0, 0.02)`, `B = 0`) and freezes every base weight.
    pub fn attach_lora(&self, lora: &LoraConfig, seed: u64) -> Result<TransformerClassifier> {
        if self.has_adapters() {
            return Err(Error::Model("adapters are already attached".into()));
        }
        if lora.targets.is_empty() {
            return Err(Error::InvalidArgument("no adapter targets given".into()));
        }
        let d = self.config.d_model;
        if lora.rank == 0 || lora.rank >= d {
            return Err(Error::InvalidArgument(format!(
                "rank {} is not low-rank for {d}x{d} projections",
                lora.rank
            )));
        }
        let mut targets = lora.targets.clone();
        targets.sort();
        targets.dedup();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = self.clone();
        for layer in &mut out.layers {
            for &proj in &targets {
                let lin = &mut layer.attn[proj as usize];
                lin.lora = Some(LoraAdapter {
                    rank: lora.rank,
                    alpha: lora.alpha,
                    a: Tensor::normal(&[lora.rank, lin.d_in()], INIT_STD, &mut rng),
                    b: Tensor::zeros(&[lin.d_out(), lora.rank]),
                });
            }
        }
        out.scope = TrainScope::Adapters {
            head: lora.train_head,
        };
        Ok(out)
    }

    /// Folds every adapter into its weight (`W + (alpha / r) B A`) and
    /// returns a plain, fully trainable model.
    pub fn merge_lora(&self) -> Result<TransformerClassifier> {
        if !self.has_adapters() {
            return Err(Error::Model("no adapters to merge".into()));
        }
        let mut out = self.clone();
        for layer in &mut out.layers {
            for lin in &mut layer.attn {
                if let Some(lora) = lin.lora.take() {
                    for (w, dw) in lin.weight.data.iter_mut().zip(lora.delta()) {
                        *w += dw;
                    }
                }
            }
        }
        out.scope = TrainScope::Full;
        Ok(out)
    }
}
