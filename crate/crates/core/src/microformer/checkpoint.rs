use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{LoraConfig, ModelConfig, ParamKind, Tensor, TransformerClassifier};
use super::train::TokenVocab;
use crate::error::{Error, Result};

const MODEL_FORMAT: &str = "hatelab-microformer";
const ADAPTER_FORMAT: &str = "hatelab-lora";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct NamedTensor {
    name: String,
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    config: ModelConfig,
    vocab: Vec<String>,
    tensors: Vec<NamedTensor>,
}

#[derive(Serialize, Deserialize)]
struct AdapterFile {
    format: String,
    version: u32,
    lora: LoraConfig,
    tensors: Vec<NamedTensor>,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let ctx = || path.display().to_string();
    let file = File::create(path).map_err(|e| Error::io(ctx(), e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer(&mut w, value).map_err(|e| Error::Model(e.to_string()))?;
    w.flush().map_err(|e| Error::io(ctx(), e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let file = Error::open(path)?;
    serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::Model(format!("{}: {e}", path.display())))
}

fn check_header(format: &str, version: u32, expected: &str) -> Result<()> {
    if format != expected || version != VERSION {
        return Err(Error::Model(format!(
            "expected {expected} version {VERSION}, found {format} version {version}"
        )));
    }
    Ok(())
}

fn collect(model: &TransformerClassifier, keep: impl Fn(ParamKind) -> bool) -> Vec<NamedTensor> {
    model
        .params()
        .into_iter()
        .filter(|(_, _, k)| keep(*k))
        .map(|(name, t, _)| NamedTensor {
            name,
            shape: t.shape.clone(),
            data: t.data.clone(),
        })
        .collect()
}

fn restore(model: &mut TransformerClassifier, tensors: Vec<NamedTensor>) -> Result<()> {
    for nt in tensors {
        let slot = model
            .tensor_mut(&nt.name)
            .ok_or_else(|| Error::Model(format!("unexpected tensor {}", nt.name)))?;
        if slot.shape != nt.shape || nt.data.len() != slot.numel() {
            return Err(Error::Model(format!(
                "tensor {} has shape {:?}, expected {:?}",
                nt.name, nt.shape, slot.shape
            )));
        }
        *slot = Tensor {
            shape: nt.shape,
            data: nt.data,
        };
    }
    Ok(())
}

/// Writes the base weights (adapters excluded) and the token vocabulary.
pub fn save_model(model: &TransformerClassifier, vocab: &TokenVocab, path: impl AsRef<Path>) -> Result<()> {
    if vocab.len() != model.config.vocab_size {
        return Err(Error::DimensionMismatch {
            expected: model.config.vocab_size,
            actual: vocab.len(),
        });
    }
    let file = ModelFile {
        format: MODEL_FORMAT.into(),
        version: VERSION,
        config: model.config.clone(),
        vocab: vocab.terms().to_vec(),
        tensors: collect(model, |k| k != ParamKind::Adapter),
    };
    write_json(path.as_ref(), &file)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<(TransformerClassifier, TokenVocab)> {
    let file: ModelFile = read_json(path.as_ref())?;
    check_header(&file.format, file.version, MODEL_FORMAT)?;
    let mut model = super::model::init_model(&file.config, 0)?;
    let expected = model.tensor_names().len();
    if file.tensors.len() != expected {
        return Err(Error::Model(format!(
            "checkpoint holds {} tensors, expected {expected}",
            file.tensors.len()
        )));
    }
    restore(&mut model, file.tensors)?;
    let mut vocab = TokenVocab::from_terms(file.vocab);
    vocab.rebuild_index();
    if vocab.len() != model.config.vocab_size {
        return Err(Error::Model(format!(
            "vocabulary of {} terms for a model of {}",
            vocab.len(),
            model.config.vocab_size
        )));
    }
    Ok((model, vocab))
}

/// Writes only the adapter matrices, plus the head when it was trained.
pub fn save_adapters(model: &TransformerClassifier, path: impl AsRef<Path>) -> Result<()> {
    let lora = model
        .lora_config()
        .ok_or_else(|| Error::Model("model has no adapters".into()))?;
    let head = lora.train_head;
    let file = AdapterFile {
        format: ADAPTER_FORMAT.into(),
        version: VERSION,
        lora,
        tensors: collect(model, |k| k == ParamKind::Adapter || (head && k == ParamKind::Head)),
    };
    write_json(path.as_ref(), &file)
}

/// Attaches the stored adapters (and head, if present) to a copy of `base`.
pub fn load_adapters(base: &TransformerClassifier, path: impl AsRef<Path>) -> Result<TransformerClassifier> {
    let file: AdapterFile = read_json(path.as_ref())?;
    check_header(&file.format, file.version, ADAPTER_FORMAT)?;
    let mut model = base.attach_lora(&file.lora, 0)?;
    restore(&mut model, file.tensors)?;
    Ok(model)
}
