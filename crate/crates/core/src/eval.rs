//! Metrics, model-by-embedding evaluation grids and report rendering.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifiers::{
    knn_fit, logreg_fit, nb_fit, rf_fit, svm_fit, Dataset, ForestParams, LogRegParams, SvmParams, TrainedModel,
    DEFAULT_ALPHA, DEFAULT_K,
};
use crate::corpus::{split_stratified, LabeledCorpus, DEFAULT_SEED, DEFAULT_TEST_FRACTION};
use crate::error::{Error, Result};
use crate::features::{fit_count, fnv1a_32, EmbeddingTable, FeatureVector, Vectorizer, DEFAULT_HASH_DIM};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

/// Counts with `true` as the positive class.
pub fn confusion(predictions: &[bool], truth: &[bool]) -> Result<ConfusionMatrix> {
    if predictions.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            actual: predictions.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::EmptyData);
    }
    let mut cm = ConfusionMatrix::default();
    for (&p, &t) in predictions.iter().zip(truth) {
        match (p, t) {
            (true, true) => cm.tp += 1,
            (true, false) => cm.fp += 1,
            (false, true) => cm.fn_ += 1,
            (false, false) => cm.tn += 1,
        }
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Accuracy, precision, recall and F1. Undefined ratios are reported as 0.
pub fn metrics(cm: &ConfusionMatrix) -> Result<Metrics> {
    if cm.total() == 0 {
        return Err(Error::EmptyData);
    }
    let precision = ratio(cm.tp, cm.tp + cm.fp);
    let recall = ratio(cm.tp, cm.tp + cm.fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(Metrics {
        accuracy: ratio(cm.tp + cm.tn, cm.total()),
        precision,
        recall,
        f1,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelSpec {
    LogisticRegression,
    Knn,
    LinearSvm,
    RandomForest,
    NaiveBayes,
}

impl ModelSpec {
    pub const ALL: [ModelSpec; 5] = [
        ModelSpec::LogisticRegression,
        ModelSpec::Knn,
        ModelSpec::LinearSvm,
        ModelSpec::RandomForest,
        ModelSpec::NaiveBayes,
    ];

    /// Short name accepted in grid files.
    pub fn key(self) -> &'static str {
        match self {
            ModelSpec::LogisticRegression => "lr",
            ModelSpec::Knn => "knn",
            ModelSpec::LinearSvm => "svm",
            ModelSpec::RandomForest => "rf",
            ModelSpec::NaiveBayes => "nb",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            ModelSpec::LogisticRegression => "Logistic Regression",
            ModelSpec::Knn => "k-NN",
            ModelSpec::LinearSvm => "SVM",
            ModelSpec::RandomForest => "Random Forests",
            ModelSpec::NaiveBayes => "Naive Bayes",
        }
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.display_name())
    }
}

fn valid_names<T: Copy>(all: &[T], key: fn(T) -> &'static str) -> String {
    all.iter().map(|&x| key(x)).collect::<Vec<_>>().join(", ")
}

impl FromStr for ModelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let k = s.trim().to_ascii_lowercase().replace(['-', '_', ' '], "");
        Ok(match k.as_str() {
            "lr" | "logreg" | "logisticregression" => ModelSpec::LogisticRegression,
            "knn" => ModelSpec::Knn,
            "svm" | "linearsvm" => ModelSpec::LinearSvm,
            "rf" | "randomforest" | "randomforests" => ModelSpec::RandomForest,
            "nb" | "naivebayes" => ModelSpec::NaiveBayes,
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "unknown model '{}'; valid names: {}",
                    s.trim(),
                    valid_names(&ModelSpec::ALL, ModelSpec::key)
                )))
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EmbeddingSpec {
    Count,
    Tfidf,
    Hashing,
    Word2Vec,
    Glove,
}

impl EmbeddingSpec {
    pub const ALL: [EmbeddingSpec; 5] = [
        EmbeddingSpec::Count,
        EmbeddingSpec::Tfidf,
        EmbeddingSpec::Hashing,
        EmbeddingSpec::Word2Vec,
        EmbeddingSpec::Glove,
    ];

    pub fn key(self) -> &'static str {
        match self {
            EmbeddingSpec::Count => "count",
            EmbeddingSpec::Tfidf => "tfidf",
            EmbeddingSpec::Hashing => "hashing",
            EmbeddingSpec::Word2Vec => "word2vec",
            EmbeddingSpec::Glove => "glove",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            EmbeddingSpec::Count => "CountVectorizer",
            EmbeddingSpec::Tfidf => "TfidfVectorizer",
            EmbeddingSpec::Hashing => "HashingVectorizer",
            EmbeddingSpec::Word2Vec => "Word2Vec",
            EmbeddingSpec::Glove => "GloVe",
        }
    }

    pub fn is_pretrained(self) -> bool {
        matches!(self, EmbeddingSpec::Word2Vec | EmbeddingSpec::Glove)
    }
}

impl fmt::Display for EmbeddingSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.display_name())
    }
}

impl FromStr for EmbeddingSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let k = s.trim().to_ascii_lowercase().replace(['-', '_', ' '], "");
        Ok(match k.as_str() {
            "count" | "countvectorizer" => EmbeddingSpec::Count,
            "tfidf" | "tfidfvectorizer" => EmbeddingSpec::Tfidf,
            "hashing" | "hash" | "hashingvectorizer" => EmbeddingSpec::Hashing,
            "word2vec" | "w2v" => EmbeddingSpec::Word2Vec,
            "glove" => EmbeddingSpec::Glove,
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "unknown embedding '{}'; valid names: {}",
                    s.trim(),
                    valid_names(&EmbeddingSpec::ALL, EmbeddingSpec::key)
                )))
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridCell {
    pub model: ModelSpec,
    pub embedding: EmbeddingSpec,
}

impl GridCell {
    pub fn new(model: ModelSpec, embedding: EmbeddingSpec) -> Self {
        GridCell { model, embedding }
    }
}

/// Every model against every embedding, grouped by model. Pretrained
/// embeddings are left out when `pretrained` is false.
pub fn full_grid(pretrained: bool) -> Vec<GridCell> {
    ModelSpec::ALL
        .iter()
        .flat_map(|&m| {
            EmbeddingSpec::ALL
                .iter()
                .filter(move |e| pretrained || !e.is_pretrained())
                .map(move |&e| GridCell::new(m, e))
        })
        .collect()
}

/// Parses one `model,embedding` pair per line. Blank lines and lines
/// starting with `#` are ignored.
pub fn parse_grid(text: &str) -> Result<Vec<GridCell>> {
    let mut cells = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parse_err = |e: Error| Error::Parse {
            line: i + 1,
            message: match e {
                Error::InvalidArgument(m) => m,
                other => other.to_string(),
            },
        };
        let (m, e) = line.split_once(',').ok_or_else(|| Error::Parse {
            line: i + 1,
            message: format!("expected 'model,embedding', got '{line}'"),
        })?;
        cells.push(GridCell::new(m.parse().map_err(parse_err)?, e.parse().map_err(parse_err)?));
    }
    Ok(cells)
}

/// Split, featurization and hyperparameters shared by every grid cell.
/// `seed` drives the split and every model that uses randomness.
#[derive(Debug, Clone)]
pub struct GridOptions {
    pub test_fraction: f64,
    pub seed: u64,
    pub hash_dim: usize,
    pub word2vec: Option<EmbeddingTable>,
    pub glove: Option<EmbeddingTable>,
    pub logreg: LogRegParams,
    pub svm: SvmParams,
    pub forest: ForestParams,
    pub knn_k: usize,
    pub nb_alpha: f64,
}

impl Default for GridOptions {
    fn default() -> Self {
        GridOptions {
            test_fraction: DEFAULT_TEST_FRACTION,
            seed: DEFAULT_SEED,
            hash_dim: DEFAULT_HASH_DIM,
            word2vec: None,
            glove: None,
            logreg: LogRegParams::default(),
            svm: SvmParams::default(),
            forest: ForestParams::default(),
            knn_k: DEFAULT_K,
            nb_alpha: DEFAULT_ALPHA,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub model: ModelSpec,
    pub embedding: EmbeddingSpec,
    pub confusion: Option<ConfusionMatrix>,
    pub metrics: Option<Metrics>,
    /// Set when the cell was not trained.
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<ReportRow>,
    pub split_seed: u64,
    /// FNV-1a digest of post ids and labels, in corpus order.
    pub corpus_id: String,
    pub n_train: usize,
    pub n_test: usize,
}

impl EvalReport {
    pub fn row(&self, model: ModelSpec, embedding: EmbeddingSpec) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.model == model && r.embedding == embedding)
    }
}

pub fn corpus_id(corpus: &LabeledCorpus) -> String {
    let mut bytes = Vec::new();
    for (p, &l) in corpus.posts.iter().zip(&corpus.labels) {
        bytes.extend_from_slice(p.id.as_bytes());
        bytes.push(0);
        bytes.push(l as u8);
    }
    format!("{:08x}", fnv1a_32(&bytes))
}

/// The train/test split every cell of [`run_grid`] shares.
pub fn grid_split(corpus: &LabeledCorpus, opts: &GridOptions) -> Result<(LabeledCorpus, LabeledCorpus)> {
    split_stratified(corpus, opts.test_fraction, opts.seed)
}

/// Fits `spec` on the training documents only.
pub fn fit_vectorizer(spec: EmbeddingSpec, train: &LabeledCorpus, opts: &GridOptions) -> Result<Vectorizer> {
    let missing = |name: &str| Error::InvalidArgument(format!("{name} embeddings were not provided"));
    Ok(match spec {
        EmbeddingSpec::Count => Vectorizer::Count(fit_count(&train.tokens())?),
        EmbeddingSpec::Tfidf => Vectorizer::Tfidf(fit_count(&train.tokens())?),
        EmbeddingSpec::Hashing => Vectorizer::Hashing { dim: opts.hash_dim },
        EmbeddingSpec::Word2Vec => Vectorizer::Embedding(opts.word2vec.clone().ok_or_else(|| missing("word2vec"))?),
        EmbeddingSpec::Glove => Vectorizer::Embedding(opts.glove.clone().ok_or_else(|| missing("glove"))?),
    })
}

fn featurize(v: &Vectorizer, corpus: &LabeledCorpus) -> Result<Vec<FeatureVector>> {
    corpus.posts.par_iter().map(|p| v.transform(&p.tokens)).collect()
}

struct Featurized {
    train: Dataset,
    test: Vec<FeatureVector>,
    has_negative: bool,
}

fn train_model(spec: ModelSpec, data: &Dataset, opts: &GridOptions) -> Result<TrainedModel> {
    let seed = opts.seed;
    Ok(match spec {
        ModelSpec::LogisticRegression => {
            TrainedModel::LogisticRegression(logreg_fit(data, &LogRegParams { seed, ..opts.logreg })?)
        }
        ModelSpec::LinearSvm => TrainedModel::LinearSvm(svm_fit(data, &SvmParams { seed, ..opts.svm })?),
        ModelSpec::RandomForest => TrainedModel::RandomForest(rf_fit(data, &ForestParams { seed, ..opts.forest })?),
        ModelSpec::NaiveBayes => TrainedModel::NaiveBayes(nb_fit(data, opts.nb_alpha)?),
        ModelSpec::Knn => knn_fit(data.clone(), opts.knn_k)?,
    })
}

/// Trains every cell on one shared split and scores it on the held-out side.
/// Naive Bayes cells whose features contain negative values are skipped with
/// the reason "negative features".
pub fn run_grid(corpus: &LabeledCorpus, grid: &[GridCell], opts: &GridOptions) -> Result<EvalReport> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty grid".into()));
    }
    if corpus.positives() == 0 || corpus.positives() == corpus.len() {
        return Err(Error::SingleClass);
    }
    let (train, test) = grid_split(corpus, opts)?;

    let mut specs: Vec<EmbeddingSpec> = Vec::new();
    for c in grid {
        if !specs.contains(&c.embedding) {
            specs.push(c.embedding);
        }
    }
    let featurized: Vec<Featurized> = specs
        .iter()
        .map(|&spec| {
            let v = fit_vectorizer(spec, &train, opts)?;
            let train_x = featurize(&v, &train)?;
            let test_x = featurize(&v, &test)?;
            let has_negative = train_x.iter().chain(&test_x).any(|x| x.min_value().1 < 0.0);
            Ok(Featurized {
                train: Dataset::new(train_x, train.labels.clone())?,
                test: test_x,
                has_negative,
            })
        })
        .collect::<Result<_>>()?;

    let rows = grid
        .par_iter()
        .map(|cell| {
            let f = &featurized[specs.iter().position(|s| *s == cell.embedding).expect("fitted")];
            let mut row = ReportRow {
                model: cell.model,
                embedding: cell.embedding,
                confusion: None,
                metrics: None,
                skipped: None,
            };
            if cell.model == ModelSpec::NaiveBayes && f.has_negative {
                row.skipped = Some("negative features".into());
                return Ok(row);
            }
            let model = train_model(cell.model, &f.train, opts)?;
            let pred = model.predict_batch(&f.test)?;
            let cm = confusion(&pred, &test.labels)?;
            row.metrics = Some(metrics(&cm)?);
            row.confusion = Some(cm);
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(EvalReport {
        rows,
        split_seed: opts.seed,
        corpus_id: corpus_id(corpus),
        n_train: train.len(),
        n_test: test.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "md" | "markdown" => Ok(ReportFormat::Markdown),
            _ => Err(Error::InvalidArgument(format!("unknown format '{s}'; valid names: csv, md"))),
        }
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Renders the report with two-decimal metrics in grid order. CSV gains a
/// trailing `reason` column only when some cell was skipped.
pub fn emit_report(report: &EvalReport, format: ReportFormat) -> String {
    let mut out = String::new();
    let fmt_metrics = |m: &Option<Metrics>| -> [String; 4] {
        match m {
            Some(m) => [m.accuracy, m.precision, m.recall, m.f1].map(|v| format!("{v:.2}")),
            None => Default::default(),
        }
    };
    match format {
        ReportFormat::Csv => {
            let with_reason = report.rows.iter().any(|r| r.skipped.is_some());
            out.push_str("model,accuracy,precision,recall,f1,embedding");
            if with_reason {
                out.push_str(",reason");
            }
            out.push('\n');
            for r in &report.rows {
                let [a, p, rc, f] = fmt_metrics(&r.metrics);
                out.push_str(&format!(
                    "{},{a},{p},{rc},{f},{}",
                    csv_field(r.model.display_name()),
                    csv_field(r.embedding.display_name())
                ));
                if with_reason {
                    out.push(',');
                    out.push_str(&csv_field(r.skipped.as_deref().unwrap_or("")));
                }
                out.push('\n');
            }
        }
        ReportFormat::Markdown => {
            out.push_str("| Model | Accuracy | Precision | Recall | F1-score | Embedding |\n");
            out.push_str("|---|---|---|---|---|---|\n");
            let mut prev = None;
            for r in &report.rows {
                let name = if prev == Some(r.model) { "" } else { r.model.display_name() };
                prev = Some(r.model);
                let cells = match &r.skipped {
                    Some(_) => ["-", "-", "-", "-"].map(String::from),
                    None => fmt_metrics(&r.metrics),
                };
                let embedding = match &r.skipped {
                    Some(reason) => format!("{} (skipped: {reason})", r.embedding.display_name()),
                    None => r.embedding.display_name().to_string(),
                };
                out.push_str(&format!(
                    "| {name} | {} | {} | {} | {} | {embedding} |\n",
                    cells[0], cells[1], cells[2], cells[3]
                ));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Post;

    #[test]
    fn confusion_counts() {
        let cm = confusion(&[true, true, false, false], &[true, false, true, false]).unwrap();
        assert_eq!(cm, ConfusionMatrix { tp: 1, fp: 1, fn_: 1, tn: 1 });
        assert!(confusion(&[true], &[]).is_err());
        assert!(confusion(&[], &[]).is_err());
        let cm = confusion(&[false; 3], &[true, false, true]).unwrap();
        assert_eq!(cm.tp, 0);
    }

    #[test]
    fn metric_examples() {
        let m = metrics(&ConfusionMatrix { tp: 3, fp: 1, fn_: 2, tn: 4 }).unwrap();
        assert!((m.accuracy - 0.7).abs() < 1e-15);
        assert!((m.precision - 0.75).abs() < 1e-15);
        assert!((m.recall - 0.6).abs() < 1e-15);
        assert!((m.f1 - 2.0 * 0.75 * 0.6 / 1.35).abs() < 1e-15);
        let z = metrics(&ConfusionMatrix { tp: 0, fp: 0, fn_: 5, tn: 20 }).unwrap();
        assert_eq!((z.precision, z.recall, z.f1), (0.0, 0.0, 0.0));
        let p = metrics(&ConfusionMatrix { tp: 2, fp: 0, fn_: 0, tn: 2 }).unwrap();
        assert_eq!((p.accuracy, p.precision, p.recall, p.f1), (1.0, 1.0, 1.0, 1.0));
        assert!(metrics(&ConfusionMatrix::default()).is_err());
    }

    #[test]
    fn names_parse() {
        assert_eq!("LR".parse::<ModelSpec>().unwrap(), ModelSpec::LogisticRegression);
        assert_eq!("random_forest".parse::<ModelSpec>().unwrap(), ModelSpec::RandomForest);
        let err = "xgboost".parse::<ModelSpec>().unwrap_err().to_string();
        assert!(err.contains("lr, knn, svm, rf, nb"), "{err}");
        assert_eq!("TfidfVectorizer".parse::<EmbeddingSpec>().unwrap(), EmbeddingSpec::Tfidf);
    }

    #[test]
    fn grid_file_errors_name_the_line() {
        let g = parse_grid("# header\nlr,tfidf\n\nnb, count\n").unwrap();
        assert_eq!(g.len(), 2);
        match parse_grid("lr,tfidf\nfoo,count\n") {
            Err(Error::Parse { line: 2, message }) => assert!(message.contains("valid names")),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_grid("lr"), Err(Error::Parse { line: 1, .. })));
    }

    fn report(rows: Vec<ReportRow>) -> EvalReport {
        EvalReport {
            rows,
            split_seed: 42,
            corpus_id: String::new(),
            n_train: 0,
            n_test: 0,
        }
    }

    fn scored(model: ModelSpec, embedding: EmbeddingSpec, v: f64) -> ReportRow {
        ReportRow {
            model,
            embedding,
            confusion: None,
            metrics: Some(Metrics { accuracy: v, precision: v, recall: v, f1: v }),
            skipped: None,
        }
    }

    #[test]
    fn csv_layout() {
        assert_eq!(emit_report(&report(vec![]), ReportFormat::Csv), "model,accuracy,precision,recall,f1,embedding\n");
        let r = report(vec![scored(ModelSpec::LogisticRegression, EmbeddingSpec::Tfidf, 0.666666)]);
        assert_eq!(
            emit_report(&r, ReportFormat::Csv),
            "model,accuracy,precision,recall,f1,embedding\nLogistic Regression,0.67,0.67,0.67,0.67,TfidfVectorizer\n"
        );
        let mut skipped = scored(ModelSpec::NaiveBayes, EmbeddingSpec::Word2Vec, 0.0);
        skipped.metrics = None;
        skipped.skipped = Some("negative features".into());
        let r = report(vec![scored(ModelSpec::NaiveBayes, EmbeddingSpec::Count, 0.5), skipped]);
        let csv = emit_report(&r, ReportFormat::Csv);
        assert_eq!(
            csv,
            "model,accuracy,precision,recall,f1,embedding,reason\n\
             Naive Bayes,0.50,0.50,0.50,0.50,CountVectorizer,\n\
             Naive Bayes,,,,,Word2Vec,negative features\n"
        );
        let md = emit_report(&r, ReportFormat::Markdown);
        let lines: Vec<_> = md.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[2].starts_with("| Naive Bayes | 0.50"));
        assert!(lines[3].starts_with("|  | - |"));
    }

    fn toy_corpus() -> LabeledCorpus {
        let mut posts = Vec::new();
        let mut labels = Vec::new();
        for i in 0..60 {
            let pos = i % 3 == 0;
            let text = if pos {
                format!("zorp blick item{i} zorp")
            } else {
                format!("calm weather item{i} today")
            };
            posts.push(Post::new(format!("p{i}"), text));
            labels.push(pos);
        }
        LabeledCorpus::new(posts, labels).unwrap()
    }

    #[test]
    fn grid_runs_and_is_deterministic() {
        let c = toy_corpus();
        let grid = full_grid(false);
        let opts = GridOptions {
            forest: ForestParams { n_trees: 10, ..Default::default() },
            hash_dim: 1 << 10,
            ..Default::default()
        };
        let a = run_grid(&c, &grid, &opts).unwrap();
        assert_eq!(a.rows.len(), 15);
        assert!(a.rows.iter().all(|r| r.skipped.is_none()));
        let lr = a.row(ModelSpec::LogisticRegression, EmbeddingSpec::Tfidf).unwrap();
        assert_eq!(lr.metrics.unwrap().accuracy, 1.0);
        assert_eq!(a, run_grid(&c, &grid, &opts).unwrap());
        assert!(run_grid(&c, &[], &opts).is_err());
        let w2v = [GridCell::new(ModelSpec::LogisticRegression, EmbeddingSpec::Word2Vec)];
        assert!(run_grid(&c, &w2v, &opts).is_err());
    }

    #[test]
    fn nb_skips_negative_embeddings() {
        let c = toy_corpus();
        let mut t = EmbeddingTable::new(2);
        t.insert("zorp", vec![1.0, -1.0]).unwrap();
        t.insert("calm", vec![-1.0, 1.0]).unwrap();
        let opts = GridOptions { word2vec: Some(t), ..Default::default() };
        let grid = [
            GridCell::new(ModelSpec::NaiveBayes, EmbeddingSpec::Word2Vec),
            GridCell::new(ModelSpec::Knn, EmbeddingSpec::Word2Vec),
        ];
        let r = run_grid(&c, &grid, &opts).unwrap();
        assert_eq!(r.rows[0].skipped.as_deref(), Some("negative features"));
        assert_eq!(r.rows[1].metrics.unwrap().accuracy, 1.0);
    }

    #[test]
    fn vectorizers_see_only_training_terms() {
        let c = toy_corpus();
        let opts = GridOptions::default();
        let (train, test) = grid_split(&c, &opts).unwrap();
        let v = fit_vectorizer(EmbeddingSpec::Count, &train, &opts).unwrap();
        let vocab = v.vocabulary().unwrap();
        let train_terms: std::collections::HashSet<&str> =
            train.posts.iter().flat_map(|p| p.tokens.iter().map(String::as_str)).collect();
        let test_only: Vec<&str> = test
            .posts
            .iter()
            .flat_map(|p| p.tokens.iter().map(String::as_str))
            .filter(|t| !train_terms.contains(t))
            .collect();
        assert!(!test_only.is_empty());
        assert!(test_only.iter().all(|t| !vocab.contains(t)));
    }
}
