//! Post ingestion, text normalization and stratified train/test splits.
//!
//! Posts arrive as line-delimited JSON records:
//!
//! ```text
//! {"id": "1", "text": "hello", "label": 0, "meta": {"source": "fixture"}}
//! ```
//!
//! `label` and `meta` are optional. Exported files carry the same fields plus
//! the normalized `tokens`, which are ignored (and recomputed) on reload.

use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::LazyLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

pub const URL_TOKEN: &str = "<url>";
pub const USER_TOKEN: &str = "<user>";

pub const DEFAULT_TEST_FRACTION: f64 = 0.2;
pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Post {
    pub id: String,
    pub text: String,
    pub tokens: Vec<String>,
    pub meta: BTreeMap<String, String>,
}

impl Post {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        let text = text.into();
        Post {
            id: id.into(),
            tokens: normalize(&text),
            text,
            meta: BTreeMap::new(),
        }
    }

    pub fn with_meta(mut self, meta: BTreeMap<String, String>) -> Self {
        self.meta = meta;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LabeledCorpus {
    pub posts: Vec<Post>,
    pub labels: Vec<bool>,
    pub split_seed: u64,
}

impl LabeledCorpus {
    pub fn new(posts: Vec<Post>, labels: Vec<bool>) -> Result<Self> {
        if posts.len() != labels.len() {
            return Err(Error::InvalidArgument(format!(
                "{} posts but {} labels",
                posts.len(),
                labels.len()
            )));
        }
        Ok(LabeledCorpus {
            posts,
            labels,
            split_seed: DEFAULT_SEED,
        })
    }

    pub fn len(&self) -> usize {
        self.posts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.posts.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&l| l).count()
    }

    pub fn tokens(&self) -> Vec<&[String]> {
        self.posts.iter().map(|p| p.tokens.as_slice()).collect()
    }

    pub fn write_jsonl<W: Write>(&self, writer: W) -> Result<()> {
        write_records(writer, &self.posts, Some(&self.labels))
    }

    pub fn export(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        self.write_jsonl(std::io::BufWriter::new(file))
    }
}

static SPECIAL: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?P<url>[a-z][a-z0-9+.\-]*://\S+)|(?P<user>@\w+)|(?P<lit><url>|<user>)")
        .expect("static regex")
});

/// Lowercases `text`, maps URLs and @-mentions to `<url>` / `<user>`, and
/// splits what remains on runs of non-alphanumeric characters.
///
/// A `#` is never part of a token, so hashtags come out as their bare word.
pub fn normalize(text: &str) -> Vec<String> {
    let lowered = text.to_lowercase();
    let mut tokens = Vec::new();
    let mut last = 0;
    for caps in SPECIAL.captures_iter(&lowered) {
        let m = caps.get(0).expect("whole match");
        split_alnum(&lowered[last..m.start()], &mut tokens);
        let sentinel = if caps.name("url").is_some() {
            URL_TOKEN
        } else if caps.name("user").is_some() {
            USER_TOKEN
        } else {
            m.as_str()
        };
        tokens.push(sentinel.to_string());
        last = m.end();
    }
    split_alnum(&lowered[last..], &mut tokens);
    tokens
}

fn split_alnum(segment: &str, out: &mut Vec<String>) {
    out.extend(
        segment
            .split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .map(str::to_string),
    );
}

#[derive(Deserialize)]
struct RawRecord {
    id: String,
    text: String,
    #[serde(default)]
    label: Option<Value>,
    #[serde(default)]
    meta: Option<BTreeMap<String, String>>,
}

#[derive(Serialize)]
struct OutRecord<'a> {
    id: &'a str,
    text: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    label: Option<u8>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    meta: &'a BTreeMap<String, String>,
    tokens: &'a [String],
}

/// One parsed input line: the post, its optional label and its 1-based line number.
#[derive(Debug, Clone)]
pub struct ParsedRecord {
    pub post: Post,
    pub label: Option<bool>,
    pub line: usize,
}

fn parse_label(value: &Value, line: usize) -> Result<Option<bool>> {
    match value {
        Value::Null => Ok(None),
        Value::Bool(b) => Ok(Some(*b)),
        Value::Number(n) => match n.as_u64() {
            Some(0) => Ok(Some(false)),
            Some(1) => Ok(Some(true)),
            _ => Err(Error::Parse {
                line,
                message: format!("label must be 0 or 1, got {n}"),
            }),
        },
        other => Err(Error::Parse {
            line,
            message: format!("label must be 0 or 1, got {other}"),
        }),
    }
}

/// Parses line-delimited records. Blank lines are skipped but still counted.
pub fn read_records<R: BufRead>(reader: R) -> Result<Vec<ParsedRecord>> {
    let mut seen: HashSet<String> = HashSet::new();
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(format!("line {line_no}"), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if raw.id.is_empty() {
            return Err(Error::Parse {
                line: line_no,
                message: "empty id".into(),
            });
        }
        if !seen.insert(raw.id.clone()) {
            return Err(Error::DuplicateId {
                id: raw.id,
                line: line_no,
            });
        }
        let label = match &raw.label {
            Some(v) => parse_label(v, line_no)?,
            None => None,
        };
        let post = Post::new(raw.id, raw.text).with_meta(raw.meta.unwrap_or_default());
        out.push(ParsedRecord {
            post,
            label,
            line: line_no,
        });
    }
    Ok(out)
}

pub fn load_jsonl(path: &Path) -> Result<Vec<Post>> {
    let file = Error::open(path)?;
    Ok(read_records(BufReader::new(file))?
        .into_iter()
        .map(|r| r.post)
        .collect())
}

/// Loads a corpus in which every record carries a label.
pub fn load_labeled_jsonl(path: &Path) -> Result<LabeledCorpus> {
    let file = Error::open(path)?;
    let records = read_records(BufReader::new(file))?;
    let mut posts = Vec::with_capacity(records.len());
    let mut labels = Vec::with_capacity(records.len());
    for r in records {
        let label = r.label.ok_or_else(|| Error::Parse {
            line: r.line,
            message: format!("post {} has no label", r.post.id),
        })?;
        posts.push(r.post);
        labels.push(label);
    }
    LabeledCorpus::new(posts, labels)
}

pub fn write_records<W: Write>(mut writer: W, posts: &[Post], labels: Option<&[bool]>) -> Result<()> {
    for (i, post) in posts.iter().enumerate() {
        let rec = OutRecord {
            id: &post.id,
            text: &post.text,
            label: labels.map(|l| u8::from(l[i])),
            meta: &post.meta,
            tokens: &post.tokens,
        };
        let line = serde_json::to_string(&rec).expect("record serializes");
        writeln!(writer, "{line}").map_err(|e| Error::io("write corpus", e))?;
    }
    writer.flush().map_err(|e| Error::io("write corpus", e))
}

pub fn export_jsonl(path: &Path, posts: &[Post]) -> Result<()> {
    let file =
        std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    write_records(std::io::BufWriter::new(file), posts, None)
}

/// Splits per class, sending `round(class_count * test_fraction)` posts of
/// each class to the test side. Both sides keep corpus order.
pub fn split_stratified(
    corpus: &LabeledCorpus,
    test_fraction: f64,
    seed: u64,
) -> Result<(LabeledCorpus, LabeledCorpus)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_test = vec![false; corpus.len()];
    for class in [false, true] {
        let mut idx: Vec<usize> = (0..corpus.len())
            .filter(|&i| corpus.labels[i] == class)
            .collect();
        let n_test = (idx.len() as f64 * test_fraction).round() as usize;
        shuffle(&mut idx, &mut rng);
        for &i in &idx[..n_test] {
            in_test[i] = true;
        }
    }
    let mut train = LabeledCorpus {
        split_seed: seed,
        ..Default::default()
    };
    let mut test = train.clone();
    for (i, post) in corpus.posts.iter().enumerate() {
        let side = if in_test[i] { &mut test } else { &mut train };
        side.posts.push(post.clone());
        side.labels.push(corpus.labels[i]);
    }
    Ok((train, test))
}

/// Fisher-Yates over u64 draws so the permutation does not depend on the
/// platform's pointer width.
pub(crate) fn shuffle<T>(items: &mut [T], rng: &mut impl Rng) {
    for i in (1..items.len()).rev() {
        let j = rng.random_range(0..=i as u64) as usize;
        items.swap(i, j);
    }
}
