//! Trains the five classical models against every embedding on the bundled
//! synthetic corpus and prints the result table.
//!
//! Usage: `cargo run --release --example classical_grid [corpus.jsonl]`

use std::path::{Path, PathBuf};
use std::time::Instant;

use hatelab::corpus::load_labeled_jsonl;
use hatelab::eval::{emit_report, full_grid, run_grid, GridOptions, ReportFormat};
use hatelab::features::load_embeddings;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let corpus_path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| fixtures.join("synthetic_corpus.jsonl"));
    let corpus = load_labeled_jsonl(&corpus_path)?;
    println!(
        "{}: {} posts, {} positive\n",
        corpus_path.display(),
        corpus.len(),
        corpus.positives()
    );

    let opts = GridOptions {
        word2vec: Some(load_embeddings(&fixtures.join("word2vec_tiny.txt"))?),
        glove: Some(load_embeddings(&fixtures.join("glove_tiny.txt"))?),
        ..Default::default()
    };
    let start = Instant::now();
    let report = run_grid(&corpus, &full_grid(true), &opts)?;
    println!("{}", emit_report(&report, ReportFormat::Markdown));
    println!(
        "train {} / test {} posts, split seed {}, corpus {}, {:.1}s",
        report.n_train,
        report.n_test,
        report.split_seed,
        report.corpus_id,
        start.elapsed().as_secs_f64()
    );
    Ok(())
}
