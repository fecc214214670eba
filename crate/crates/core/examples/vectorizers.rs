//! Normalization and the four document vectorizers on a handful of posts.
//!
//! Usage: `cargo run --example vectorizers`

use hatelab::corpus::normalize;
use hatelab::features::{
    embed_mean, fit_count, fnv1a_32, parse_embeddings, transform_count, transform_hashing, transform_tfidf,
    FeatureVector,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let texts = [
        "@someone Check https://example.org/x the #Market report",
        "market report again, and again",
        "a quiet day by the river",
    ];
    let docs: Vec<Vec<String>> = texts.iter().map(|t| normalize(t)).collect();
    for (t, d) in texts.iter().zip(&docs) {
        println!("{t:?}\n  -> {d:?}");
    }

    let vocab = fit_count(&docs)?;
    println!("\nvocabulary ({} terms, {} docs):", vocab.len(), vocab.n_docs());
    for (i, term) in vocab.terms().iter().enumerate() {
        println!("  {i:>2} {term:<8} df={} idf={:.4}", vocab.doc_freq(i), vocab.idf(i));
    }

    let doc = &docs[1];
    println!("\ncount  {:?}", transform_count(&vocab, doc).entries());
    let tfidf = transform_tfidf(&vocab, doc);
    println!("tf-idf {:?} (norm {:.12})", tfidf.entries(), tfidf.norm());

    let dim = 1 << 10;
    println!("hashing (dim {dim}) {:?}", transform_hashing(doc, dim)?.entries());
    println!("fnv1a(\"market\") mod {dim} = {}", fnv1a_32(b"market") as usize % dim);

    let table = parse_embeddings("market 0.5 -1.0\nreport 1.0 0.25\nriver -0.5 0.5\n".as_bytes())?;
    let v = FeatureVector::from(embed_mean(&table, doc));
    println!("mean embedding {:?}", (0..v.dim()).map(|i| v.get(i)).collect::<Vec<_>>());
    Ok(())
}
