use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{BufRead, Write};

use super::SparseVector;
use crate::error::{Error, Result};

/// Fitted term index plus document frequencies.
///
/// Serialized as a header line `N <n_docs>` followed by one
/// `term index df` line per term in index order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    terms: Vec<String>,
    index: HashMap<String, usize>,
    doc_freq: Vec<u64>,
    n_docs: u64,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn n_docs(&self) -> u64 {
        self.n_docs
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn contains(&self, term: &str) -> bool {
        self.index.contains_key(term)
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn doc_freq(&self, index: usize) -> u64 {
        self.doc_freq[index]
    }

    pub fn idf(&self, index: usize) -> f64 {
        idf(self.n_docs, self.doc_freq[index])
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let err = |e| Error::io("write vocabulary", e);
        writeln!(w, "N {}", self.n_docs).map_err(err)?;
        for (i, t) in self.terms.iter().enumerate() {
            if t.is_empty() || t.chars().any(char::is_whitespace) {
                return Err(Error::InvalidArgument(format!("term {t:?} cannot be serialized")));
            }
            writeln!(w, "{t} {i} {}", self.doc_freq[i]).map_err(err)?;
        }
        w.flush().map_err(err)
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines().enumerate();
        let parse_err = |line: usize, message: &str| Error::Parse {
            line,
            message: message.to_string(),
        };
        let header = match lines.next() {
            Some((_, l)) => l.map_err(|e| Error::io("read vocabulary", e))?,
            None => return Err(parse_err(1, "missing N header")),
        };
        let n_docs = header
            .strip_prefix("N ")
            .and_then(|n| n.trim().parse::<u64>().ok())
            .ok_or_else(|| parse_err(1, "expected `N <count>` header"))?;
        let mut vocab = Vocabulary {
            terms: Vec::new(),
            index: HashMap::new(),
            doc_freq: Vec::new(),
            n_docs,
        };
        for (i, line) in lines {
            let line_no = i + 1;
            let line = line.map_err(|e| Error::io("read vocabulary", e))?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let [term, idx, df] = fields[..] else {
                return Err(parse_err(line_no, "expected `term index df`"));
            };
            let idx: usize = idx.parse().map_err(|_| parse_err(line_no, "bad index"))?;
            let df: u64 = df.parse().map_err(|_| parse_err(line_no, "bad document frequency"))?;
            if idx != vocab.terms.len() {
                return Err(parse_err(line_no, "indices must be dense and in order"));
            }
            if df == 0 || df > n_docs {
                return Err(parse_err(line_no, "document frequency outside 1..=N"));
            }
            if vocab.index.insert(term.to_string(), idx).is_some() {
                return Err(parse_err(line_no, "duplicate term"));
            }
            vocab.terms.push(term.to_string());
            vocab.doc_freq.push(df);
        }
        Ok(vocab)
    }
}

/// Smoothed inverse document frequency: `ln((1 + N) / (1 + df)) + 1`.
pub fn idf(n_docs: u64, df: u64) -> f64 {
    ((1.0 + n_docs as f64) / (1.0 + df as f64)).ln() + 1.0
}

/// Collects every distinct token, indexed in first-seen order.
pub fn fit_count<D, S>(docs: &[D]) -> Result<Vocabulary>
where
    D: AsRef<[S]>,
    S: AsRef<str>,
{
    if docs.is_empty() {
        return Err(Error::EmptyData);
    }
    let mut vocab = Vocabulary {
        terms: Vec::new(),
        index: HashMap::new(),
        doc_freq: Vec::new(),
        n_docs: docs.len() as u64,
    };
    let mut seen_in_doc: HashSet<usize> = HashSet::new();
    for doc in docs {
        seen_in_doc.clear();
        for tok in doc.as_ref() {
            let tok = tok.as_ref();
            let idx = match vocab.index.get(tok) {
                Some(&i) => i,
                None => {
                    let i = vocab.terms.len();
                    vocab.terms.push(tok.to_string());
                    vocab.index.insert(tok.to_string(), i);
                    vocab.doc_freq.push(0);
                    i
                }
            };
            if seen_in_doc.insert(idx) {
                vocab.doc_freq[idx] += 1;
            }
        }
    }
    Ok(vocab)
}

fn counts<S: AsRef<str>>(vocab: &Vocabulary, doc: &[S]) -> BTreeMap<usize, f64> {
    let mut counts = BTreeMap::new();
    for tok in doc {
        if let Some(i) = vocab.index_of(tok.as_ref()) {
            *counts.entry(i).or_insert(0.0) += 1.0;
        }
    }
    counts
}

/// Term counts over the vocabulary; unknown tokens are dropped.
pub fn transform_count<S: AsRef<str>>(vocab: &Vocabulary, doc: &[S]) -> SparseVector {
    SparseVector {
        dim: vocab.len(),
        entries: counts(vocab, doc).into_iter().collect(),
    }
}

/// Raw counts times smoothed idf, scaled to unit L2 norm. A document with no
/// known tokens stays the zero vector.
pub fn transform_tfidf<S: AsRef<str>>(vocab: &Vocabulary, doc: &[S]) -> SparseVector {
    let mut v = SparseVector {
        dim: vocab.len(),
        entries: counts(vocab, doc)
            .into_iter()
            .map(|(i, c)| (i, c * vocab.idf(i)))
            .collect(),
    };
    let norm = v.norm();
    if norm > 0.0 {
        v.scale(1.0 / norm);
    }
    v
}
