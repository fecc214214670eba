use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, BufReader};
use std::path::Path;

use super::DenseVector;
use crate::error::{Error, Result};

/// Pretrained word vectors, all of dimension `dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        EmbeddingTable {
            dim,
            vectors: HashMap::new(),
        }
    }

    pub fn insert(&mut self, word: impl Into<String>, vector: Vec<f64>) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: vector.len(),
            });
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("embedding values must be finite".into()));
        }
        self.vectors.insert(word.into(), vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.vectors.get(word).map(Vec::as_slice)
    }

    /// GloVe-style text: one `word v1 ... vd` line per word, sorted by word.
    pub fn to_text(&self) -> String {
        let mut words: Vec<&String> = self.vectors.keys().collect();
        words.sort();
        let mut out = String::new();
        for w in words {
            out.push_str(w);
            for v in &self.vectors[w] {
                out.push(' ');
                out.push_str(&v.to_string());
            }
            out.push('\n');
        }
        out
    }
}

/// Parses whitespace-separated `word v1 ... vd` lines (GloVe text layout).
/// A leading `count dim` header, as written by word2vec, is skipped. The
/// dimension comes from the first vector and every later line must match it.
pub fn parse_embeddings<R: BufRead>(reader: R) -> Result<EmbeddingTable> {
    let mut table: Option<EmbeddingTable> = None;
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(format!("embedding line {line_no}"), e))?;
        if line_no == 1 && is_word2vec_header(&line) {
            continue;
        }
        let mut fields = line.split_whitespace();
        let Some(word) = fields.next() else { continue };
        let values = fields
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| Error::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
        if values.is_empty() {
            return Err(Error::Parse {
                line: line_no,
                message: format!("word {word:?} has no vector"),
            });
        }
        let t = table.get_or_insert_with(|| EmbeddingTable::new(values.len()));
        if values.len() != t.dim {
            return Err(Error::Parse {
                line: line_no,
                message: format!("dimension {} differs from {}", values.len(), t.dim),
            });
        }
        t.insert(word, values).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
    }
    table.ok_or_else(|| Error::Parse {
        line: 0,
        message: "no vectors".into(),
    })
}

fn is_word2vec_header(line: &str) -> bool {
    let fields: Vec<&str> = line.split_whitespace().collect();
    fields.len() == 2 && fields.iter().all(|f| f.parse::<u64>().is_ok())
}

pub fn load_embeddings(path: &Path) -> Result<EmbeddingTable> {
    parse_embeddings(BufReader::new(Error::open(path)?))
}

/// Mean of the vectors of in-table tokens; the zero vector when none are known.
///
/// Tokens are grouped and summed in sorted order so the result does not
/// depend on token order, bit for bit.
pub fn embed_mean<S: AsRef<str>>(table: &EmbeddingTable, doc: &[S]) -> DenseVector {
    let mut counts: BTreeMap<&str, f64> = BTreeMap::new();
    let mut n = 0usize;
    for tok in doc {
        if let Some((word, _)) = table.vectors.get_key_value(tok.as_ref()) {
            *counts.entry(word.as_str()).or_insert(0.0) += 1.0;
            n += 1;
        }
    }
    let mut out = vec![0.0; table.dim];
    if n == 0 {
        return DenseVector(out);
    }
    for (word, c) in counts {
        for (o, v) in out.iter_mut().zip(&table.vectors[word]) {
            *o += c * v;
        }
    }
    let n = n as f64;
    out.iter_mut().for_each(|o| *o /= n);
    DenseVector(out)
}
