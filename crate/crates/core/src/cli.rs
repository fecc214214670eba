//! The `hatelab` command line.
//!
//! Exit codes: 0 on success, 1 for usage and domain errors, 2 for I/O errors.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use crate::annotation::{serve, AnnotationConfig, AnnotationStore, DEFAULT_THETA};
use crate::corpus::{load_labeled_jsonl, read_records, write_records, DEFAULT_SEED, DEFAULT_TEST_FRACTION};
use crate::error::Error;
use crate::eval::{emit_report, full_grid, parse_grid, run_grid, GridOptions, ReportFormat};
use crate::features::load_embeddings;
use crate::microformer::{
    encode_corpus, init_model, save_adapters, save_model, train, ModelConfig, TokenVocab, TrainConfig, TrainMode,
    DEFAULT_VOCAB_TERMS,
};

pub const STATE_DIR_ENV: &str = "HATELAB_STATE_DIR";
pub const DEFAULT_STATE_DIR: &str = "hatelab-state";
pub const EVENT_LOG: &str = "events.jsonl";

#[derive(Debug, Parser)]
#[command(name = "hatelab", version, about = "Annotation, training and evaluation for hate-speech detection")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Normalize a JSONL corpus and write it with its tokens.
    Ingest(IngestArgs),
    /// Serve the annotation HTTP API over a corpus.
    AnnotateServe(ServeArgs),
    /// Write the resolved labels from an annotation state directory.
    ExportLabels(ExportArgs),
    /// Train and evaluate a model-by-embedding grid on a labeled corpus.
    TrainEval(TrainEvalArgs),
    /// Fine-tune the small transformer, fully or through adapters.
    Finetune(FinetuneArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Corpus to annotate.
    #[arg(long)]
    pub input: PathBuf,
    /// State directory; defaults to $HATELAB_STATE_DIR, then ./hatelab-state.
    #[arg(long)]
    pub state: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// 0 picks a free port.
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value_t = DEFAULT_THETA)]
    pub theta: u8,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub state: Option<PathBuf>,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = DEFAULT_THETA)]
    pub theta: u8,
}

#[derive(Debug, Args)]
pub struct TrainEvalArgs {
    /// Labeled JSONL corpus.
    #[arg(long)]
    pub input: PathBuf,
    /// Report path. The other format is written next to it.
    #[arg(long)]
    pub output: PathBuf,
    /// One `model,embedding` pair per line; defaults to the full grid.
    #[arg(long)]
    pub grid: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    pub format: String,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_TEST_FRACTION)]
    pub test_fraction: f64,
    /// Pretrained vectors in word2vec text format.
    #[arg(long)]
    pub word2vec: Option<PathBuf>,
    /// Pretrained vectors in GloVe text format.
    #[arg(long)]
    pub glove: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FinetuneArgs {
    /// Labeled JSONL corpus.
    #[arg(long)]
    pub input: PathBuf,
    /// Directory for the checkpoint, adapters and training report.
    #[arg(long)]
    pub output: PathBuf,
    /// `full` or `lora`.
    #[arg(long, default_value = "lora")]
    pub mode: String,
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.05)]
    pub lr: f64,
    #[arg(long, default_value_t = 16)]
    pub batch_size: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
}

/// A failure with its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError {
            code: if e.is_io() { 2 } else { 1 },
            message: e.to_string(),
        }
    }
}

fn in_file(path: &Path) -> impl Fn(Error) -> CliError + '_ {
    move |e| {
        let mut err = CliError::from(e);
        if !err.message.contains(&path.display().to_string()) {
            err.message = format!("{}: {}", path.display(), err.message);
        }
        err
    }
}

fn write_file(path: &Path, contents: &str) -> std::result::Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError {
        code: 2,
        message: format!("{}: {e}", path.display()),
    })
}

pub fn cmd_ingest(args: &IngestArgs) -> std::result::Result<(), CliError> {
    let file = Error::open(&args.input).map_err(in_file(&args.input))?;
    let records = read_records(std::io::BufReader::new(file)).map_err(in_file(&args.input))?;
    let labeled = records.iter().filter(|r| r.label.is_some()).count();
    if labeled != 0 && labeled != records.len() {
        let line = records.iter().find(|r| r.label.is_none()).expect("unlabeled record").line;
        return Err(in_file(&args.input)(Error::Parse {
            line,
            message: "label missing while other records are labeled".into(),
        }));
    }
    let labels: Option<Vec<bool>> = (labeled > 0).then(|| records.iter().map(|r| r.label.unwrap_or(false)).collect());
    let posts: Vec<_> = records.into_iter().map(|r| r.post).collect();
    let out = std::fs::File::create(&args.output).map_err(|e| CliError {
        code: 2,
        message: format!("{}: {e}", args.output.display()),
    })?;
    write_records(std::io::BufWriter::new(out), &posts, labels.as_deref()).map_err(in_file(&args.output))?;
    println!("ingested {} posts into {}", posts.len(), args.output.display());
    Ok(())
}

fn state_dir(arg: &Option<PathBuf>) -> PathBuf {
    arg.clone()
        .or_else(|| std::env::var_os(STATE_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_STATE_DIR))
}

fn open_store(input: &Path, state: &Option<PathBuf>, theta: u8) -> std::result::Result<AnnotationStore, CliError> {
    let config = AnnotationConfig::new(theta)?;
    let posts = crate::corpus::load_jsonl(input).map_err(in_file(input))?;
    let dir = state_dir(state);
    std::fs::create_dir_all(&dir).map_err(|e| CliError {
        code: 2,
        message: format!("{}: {e}", dir.display()),
    })?;
    let log = dir.join(EVENT_LOG);
    AnnotationStore::open(posts, config, &log).map_err(|e| in_file(&log)(e))
}

pub fn cmd_annotate_serve(args: &ServeArgs) -> std::result::Result<(), CliError> {
    let store = Arc::new(open_store(&args.input, &args.state, args.theta)?);
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError {
        code: 2,
        message: format!("cannot start runtime: {e}"),
    })?;
    runtime.block_on(async {
        let addr = format!("{}:{}", args.host, args.port);
        let listener = tokio::net::TcpListener::bind(&addr).await.map_err(|e| CliError {
            code: 2,
            message: format!("cannot listen on {addr}: {e}"),
        })?;
        let local = listener.local_addr().map_err(|e| CliError {
            code: 2,
            message: e.to_string(),
        })?;
        println!(
            "listening on http://{local} ({} posts, {} events replayed)",
            store.len(),
            store.events().len()
        );
        let _ = std::io::stdout().flush();
        serve(listener, store).await.map_err(|e| CliError {
            code: 2,
            message: e.to_string(),
        })
    })
}

pub fn cmd_export_labels(args: &ExportArgs) -> std::result::Result<(), CliError> {
    let store = open_store(&args.input, &args.state, args.theta)?;
    let labeled = store.export_labels();
    labeled.export(&args.output).map_err(in_file(&args.output))?;
    println!(
        "exported {} of {} posts ({} positive) to {}",
        labeled.len(),
        store.len(),
        labeled.positives(),
        args.output.display()
    );
    Ok(())
}

fn sibling(path: &Path, format: ReportFormat) -> PathBuf {
    path.with_extension(match format {
        ReportFormat::Csv => "md",
        ReportFormat::Markdown => "csv",
    })
}

pub fn cmd_train_eval(args: &TrainEvalArgs) -> std::result::Result<(), CliError> {
    let format: ReportFormat = args.format.parse()?;
    let grid = match &args.grid {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| {
                let err = if e.kind() == std::io::ErrorKind::NotFound {
                    Error::NotFound { path: p.clone() }
                } else {
                    Error::Io {
                        context: p.display().to_string(),
                        source: e,
                    }
                };
                CliError::from(err)
            })?;
            parse_grid(&text).map_err(in_file(p))?
        }
        None => full_grid(args.word2vec.is_some() && args.glove.is_some()),
    };
    let load = |p: &Option<PathBuf>| -> std::result::Result<_, CliError> {
        p.as_ref()
            .map(|p| load_embeddings(p).map_err(in_file(p)))
            .transpose()
    };
    let opts = GridOptions {
        test_fraction: args.test_fraction,
        seed: args.seed,
        word2vec: load(&args.word2vec)?,
        glove: load(&args.glove)?,
        ..Default::default()
    };
    let corpus = load_labeled_jsonl(&args.input).map_err(in_file(&args.input))?;
    let report = run_grid(&corpus, &grid, &opts)?;
    write_file(&args.output, &emit_report(&report, format))?;
    let other = match format {
        ReportFormat::Csv => ReportFormat::Markdown,
        ReportFormat::Markdown => ReportFormat::Csv,
    };
    let other_path = sibling(&args.output, format);
    write_file(&other_path, &emit_report(&report, other))?;
    print!("{}", emit_report(&report, ReportFormat::Markdown));
    println!(
        "wrote {} and {} ({} train / {} test posts)",
        args.output.display(),
        other_path.display(),
        report.n_train,
        report.n_test
    );
    Ok(())
}

pub fn cmd_finetune(args: &FinetuneArgs) -> std::result::Result<(), CliError> {
    let mode = match args.mode.to_ascii_lowercase().as_str() {
        "full" => TrainMode::Full,
        "lora" => TrainMode::Lora,
        other => {
            return Err(CliError {
                code: 1,
                message: format!("unknown mode '{other}'; valid names: full, lora"),
            })
        }
    };
    let corpus = load_labeled_jsonl(&args.input).map_err(in_file(&args.input))?;
    let vocab = TokenVocab::build(&corpus.tokens(), DEFAULT_VOCAB_TERMS);
    let config = ModelConfig {
        vocab_size: vocab.len(),
        ..Default::default()
    };
    let data = encode_corpus(&corpus, &vocab, config.max_seq_len);
    let mut model = init_model(&config, args.seed)?;
    let tc = TrainConfig {
        mode,
        epochs: args.epochs,
        lr: args.lr,
        batch_size: args.batch_size,
        seed: args.seed,
        ..Default::default()
    };
    let report = train(&mut model, &data, &tc)?;
    std::fs::create_dir_all(&args.output).map_err(|e| CliError {
        code: 2,
        message: format!("{}: {e}", args.output.display()),
    })?;
    let model_path = args.output.join("model.json");
    save_model(&model, &vocab, &model_path).map_err(in_file(&model_path))?;
    if model.has_adapters() {
        let p = args.output.join("adapters.json");
        save_adapters(&model, &p).map_err(in_file(&p))?;
    }
    let report_json = serde_json::to_string_pretty(&report).expect("report serializes");
    write_file(&args.output.join("train_report.json"), &report_json)?;
    for e in &report.epochs {
        println!(
            "epoch {:>3}  loss {:.4}  accuracy {:.3}  {:.2}s",
            e.epoch, e.loss, e.accuracy, e.seconds
        );
    }
    println!(
        "{} of {} parameters trained; outputs in {}",
        report.trainable_params,
        report.total_params,
        args.output.display()
    );
    Ok(())
}

pub fn execute(cli: &Cli) -> std::result::Result<(), CliError> {
    match &cli.command {
        Command::Ingest(a) => cmd_ingest(a),
        Command::AnnotateServe(a) => cmd_annotate_serve(a),
        Command::ExportLabels(a) => cmd_export_labels(a),
        Command::TrainEval(a) => cmd_train_eval(a),
        Command::Finetune(a) => cmd_finetune(a),
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}
