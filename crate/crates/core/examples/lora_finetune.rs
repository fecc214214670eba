//! Full fine-tuning versus adapter-only fine-tuning of the small transformer on
//! the 64-post toy fixture, followed by an adapter merge and a checkpoint
//! round trip.
//!
//! Usage: `cargo run --release --example lora_finetune`

use std::path::Path;

use hatelab::corpus::load_labeled_jsonl;
use hatelab::microformer::{
    encode_corpus, init_model, load_adapters, load_model, save_adapters, save_model, train, ModelConfig, TokenVocab,
    TrainConfig, TrainMode, TrainReport, DEFAULT_VOCAB_TERMS,
};

fn summary(name: &str, r: &TrainReport) {
    let last = r.epochs.last().expect("at least one epoch");
    println!(
        "{name:>5}: {:>3} epochs, loss {:.4}, accuracy {:.3}, {:>7} / {} parameters trained, {:.1} ms per epoch",
        r.epochs.len(),
        last.loss,
        last.accuracy,
        r.trainable_params,
        r.total_params,
        1e3 * r.mean_epoch_seconds()
    );
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let corpus = load_labeled_jsonl(&fixtures.join("toy64.jsonl"))?;
    let vocab = TokenVocab::build(&corpus.tokens(), DEFAULT_VOCAB_TERMS);
    let config = ModelConfig {
        vocab_size: vocab.len(),
        ..Default::default()
    };
    let data = encode_corpus(&corpus, &vocab, config.max_seq_len);
    let base = init_model(&config, 42)?;
    println!("{} posts, vocabulary of {} ids\n", data.len(), vocab.len());

    let mut full = base.clone();
    let full_report = train(
        &mut full,
        &data,
        &TrainConfig {
            mode: TrainMode::Full,
            epochs: 200,
            lr: 0.1,
            target_accuracy: Some(1.0),
            ..Default::default()
        },
    )?;
    summary("full", &full_report);

    let mut adapted = base.clone();
    let lora_report = train(
        &mut adapted,
        &data,
        &TrainConfig {
            mode: TrainMode::Lora,
            epochs: 400,
            lr: 0.1,
            target_accuracy: Some(0.95),
            ..Default::default()
        },
    )?;
    summary("lora", &lora_report);

    let merged = adapted.merge_lora()?;
    let max_diff = data
        .iter()
        .map(|(ids, _)| {
            let a = adapted.forward(ids).expect("valid ids");
            let m = merged.forward(ids).expect("valid ids");
            (a[0] - m[0]).abs().max((a[1] - m[1]).abs())
        })
        .fold(0.0, f64::max);
    println!("\nmerged vs adapted: max logit difference {max_diff:.2e}");

    let dir = std::env::temp_dir().join("hatelab-lora-example");
    std::fs::create_dir_all(&dir)?;
    save_model(&base, &vocab, dir.join("base.json"))?;
    save_adapters(&adapted, dir.join("adapters.json"))?;
    let (restored_base, _) = load_model(dir.join("base.json"))?;
    let restored = load_adapters(&restored_base, dir.join("adapters.json"))?;
    println!(
        "base checkpoint + adapter file reproduce the adapted model: {}",
        restored == adapted
    );
    Ok(())
}
