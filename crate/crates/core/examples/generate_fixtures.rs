//! Regenerates the bundled fixtures in `fixtures/`:
//!
//! * `synthetic_corpus.jsonl`: 2,000 labeled templated posts, about 20% positive
//! * `toy64.jsonl`: 64 balanced, cleanly separable posts
//! * `word2vec_tiny.txt` / `glove_tiny.txt`: 16-dimensional tables over the
//!   generator vocabulary, in word2vec (with header) and GloVe text layouts
//!
//! Usage: `cargo run --example generate_fixtures [output-dir]`

use std::path::PathBuf;

use hatelab::synthetic::{synthetic_corpus, synthetic_embeddings, SyntheticConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures"));
    std::fs::create_dir_all(&dir)?;

    let corpus = synthetic_corpus(&SyntheticConfig::default());
    corpus.export(&dir.join("synthetic_corpus.jsonl"))?;
    println!("synthetic_corpus.jsonl: {} posts, {} positive", corpus.len(), corpus.positives());

    let toy = synthetic_corpus(&SyntheticConfig::separable(64, 7));
    toy.export(&dir.join("toy64.jsonl"))?;
    println!("toy64.jsonl: {} posts, {} positive", toy.len(), toy.positives());

    let w2v = synthetic_embeddings(16, 1);
    std::fs::write(
        dir.join("word2vec_tiny.txt"),
        format!("{} {}\n{}", w2v.len(), w2v.dim(), w2v.to_text()),
    )?;
    let glove = synthetic_embeddings(16, 2);
    std::fs::write(dir.join("glove_tiny.txt"), glove.to_text())?;
    println!("embeddings: {} words, dim {}", w2v.len(), w2v.dim());
    Ok(())
}
