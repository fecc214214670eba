//! A small pre-norm transformer encoder for binary classification, with
//! low-rank adapters on the attention projections.
//!
//! Everything runs in `f64` on the CPU. Training is plain mini-batch SGD,
//! either over all weights or over the adapters and classification head.

mod checkpoint;
mod forward;
mod model;
mod ops;
mod train;

pub use checkpoint::{load_adapters, load_model, save_adapters, save_model};
pub use forward::{ForwardTrace, Gradients};
pub use model::{
    init_model, EncoderLayer, LayerNorm, Linear, LoraAdapter, LoraConfig, ModelConfig, Projection, Tensor,
    TrainScope, TransformerClassifier, INIT_STD,
};
pub use train::{
    accuracy, encode_corpus, train, EpochStats, Example, TokenVocab, TrainConfig, TrainMode, TrainReport,
    DEFAULT_VOCAB_TERMS, UNK,
};
