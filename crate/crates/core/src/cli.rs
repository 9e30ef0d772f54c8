//! The `tagnn` command line: `preprocess`, `train`, `evaluate`, `ablate`,
//! `predict`.
//!
//! Settings come from built-in defaults, then an optional `--config` file of
//! `key=value` lines (`#` starts a comment), then flags. Config-file keys
//! are the long flag names without the leading dashes.
//!
//! Exit codes: 0 success, 2 input error, 3 checkpoint or vocabulary error,
//! 4 inference input error, 1 anything else.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
use crate::data::{
    build_and_filter, expand_all, load_examples, parse_events, save_examples, select_recent,
    split_by_time, FilterConfig, Fraction, ItemVocabulary, LogFormat, TrainExample, MS_PER_DAY,
};
use crate::error::Error;
use crate::eval::{check_vocabulary, evaluate, rank_topk, Metrics};
use crate::graph::{build_graph, pad_graph};
use crate::model::{predict, Variant};
use crate::train::{fit, EpochLog, TrainConfig};

pub const TRAIN_FILE: &str = "train.txt";
pub const TEST_FILE: &str = "test.txt";
pub const VOCAB_FILE: &str = "vocab.txt";
pub const STATS_FILE: &str = "stats.txt";
pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const LOG_FILE: &str = "train_log.txt";
pub const ABLATION_FILE: &str = "ablation.txt";

#[derive(Debug, Parser)]
#[command(
    name = "tagnn",
    version,
    about = "Next-item recommendation for click sessions with gated graph networks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Turn a raw click log into train/test example files and a vocabulary.
    Preprocess(Flags),
    /// Train a model on preprocessed data.
    Train(Flags),
    /// Report Precision@k and MRR@k of a checkpoint on the test examples.
    Evaluate(Flags),
    /// Train and evaluate every session-representation variant.
    Ablate(Flags),
    /// Recommend the next items for one session.
    Predict(Flags),
}

#[derive(Debug, Default, Args)]
pub struct Flags {
    /// `key=value` configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Raw log file (preprocess) or prepared data directory.
    #[arg(long)]
    pub data: Option<String>,
    /// yoochoose | diginetica | prepared
    #[arg(long)]
    pub format: Option<String>,
    #[arg(long)]
    pub out: Option<String>,
    #[arg(long)]
    pub checkpoint: Option<String>,
    /// full | L | Avg | Att | L_plus_Att
    #[arg(long)]
    pub variant: Option<String>,
    /// categorical | eq13
    #[arg(long)]
    pub loss: Option<String>,
    #[arg(long)]
    pub d: Option<String>,
    #[arg(long)]
    pub batch: Option<String>,
    #[arg(long)]
    pub lr: Option<String>,
    #[arg(long)]
    pub l2: Option<String>,
    #[arg(long = "decay-factor")]
    pub decay_factor: Option<String>,
    #[arg(long = "decay-every")]
    pub decay_every: Option<String>,
    #[arg(long)]
    pub epochs: Option<String>,
    #[arg(long)]
    pub patience: Option<String>,
    #[arg(long)]
    pub steps: Option<String>,
    /// mrr | precision
    #[arg(long)]
    pub selection: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long)]
    pub threads: Option<String>,
    #[arg(long)]
    pub k: Option<String>,
    /// Share of most recent training sessions to keep, e.g. `1/64`.
    #[arg(long)]
    pub fraction: Option<String>,
    #[arg(long = "test-window-days")]
    pub test_window_days: Option<String>,
    /// Comma-separated external item ids (predict).
    #[arg(long)]
    pub session: Option<String>,
    /// Print the sum of all item probabilities (predict).
    #[arg(long = "check-normalization")]
    pub check_normalization: bool,
    /// Print the session graph as `u -> v : weight` lines (predict).
    #[arg(long = "dump-graph")]
    pub dump_graph: bool,
}

impl Flags {
    /// Flags that were given, as `(key, value)` pairs.
    pub fn given(&self) -> Vec<(&'static str, String)> {
        let pairs = [
            ("data", &self.data),
            ("format", &self.format),
            ("out", &self.out),
            ("checkpoint", &self.checkpoint),
            ("variant", &self.variant),
            ("loss", &self.loss),
            ("d", &self.d),
            ("batch", &self.batch),
            ("lr", &self.lr),
            ("l2", &self.l2),
            ("decay-factor", &self.decay_factor),
            ("decay-every", &self.decay_every),
            ("epochs", &self.epochs),
            ("patience", &self.patience),
            ("steps", &self.steps),
            ("selection", &self.selection),
            ("seed", &self.seed),
            ("threads", &self.threads),
            ("k", &self.k),
            ("fraction", &self.fraction),
            ("test-window-days", &self.test_window_days),
            ("session", &self.session),
        ];
        let mut out: Vec<(&'static str, String)> = pairs
            .into_iter()
            .filter_map(|(k, v)| v.clone().map(|v| (k, v)))
            .collect();
        if self.check_normalization {
            out.push(("check-normalization", "true".into()));
        }
        if self.dump_graph {
            out.push(("dump-graph", "true".into()));
        }
        out
    }
}

/// Every key accepted in a config file or as a flag.
pub const KEYS: &[&str] = &[
    "data",
    "format",
    "out",
    "checkpoint",
    "variant",
    "loss",
    "d",
    "batch",
    "lr",
    "l2",
    "decay-factor",
    "decay-every",
    "epochs",
    "patience",
    "steps",
    "selection",
    "seed",
    "threads",
    "k",
    "fraction",
    "test-window-days",
    "session",
    "check-normalization",
    "dump-graph",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum DataFormat {
    Yoochoose,
    Diginetica,
    #[default]
    Prepared,
}

/// Fully resolved settings for one command.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub format: DataFormat,
    pub out: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub train: TrainConfig,
    pub threads: usize,
    pub k: usize,
    pub fraction: Fraction,
    pub test_window_days: Option<f64>,
    pub session: Option<String>,
    pub check_normalization: bool,
    pub dump_graph: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data: None,
            format: DataFormat::Prepared,
            out: None,
            checkpoint: None,
            train: TrainConfig::default(),
            threads: 1,
            k: 20,
            fraction: Fraction::ONE,
            test_window_days: None,
            session: None,
            check_normalization: false,
            dump_graph: false,
        }
    }
}

/// Parses a `key=value` config file body.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>, Error> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: i + 1,
            msg: format!("expected key=value, got `{raw}`"),
        })?;
        let k = k.trim();
        if !KEYS.contains(&k) {
            return Err(Error::Config(format!("unknown config key `{k}`")));
        }
        map.insert(k.to_string(), v.trim().to_string());
    }
    Ok(map)
}

impl RunConfig {
    /// Defaults, overridden by `file` entries, overridden by `flags`.
    pub fn resolve(file: Option<&str>, flags: &[(&str, String)]) -> Result<Self, Error> {
        let mut merged = match file {
            Some(text) => parse_config_text(text)?,
            None => BTreeMap::new(),
        };
        for (k, v) in flags {
            if !KEYS.contains(k) {
                return Err(Error::Config(format!("unknown flag `{k}`")));
            }
            merged.insert(k.to_string(), v.clone());
        }
        let mut cfg = RunConfig::default();
        for (k, v) in &merged {
            cfg.set(k, v)?;
        }
        cfg.train.k = cfg.k;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), Error> {
        let bad = || Error::Config(format!("bad value `{value}` for `{key}`"));
        let flag = || match value {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            _ => Err(bad()),
        };
        match key {
            "data" => self.data = Some(PathBuf::from(value)),
            "out" => self.out = Some(PathBuf::from(value)),
            "checkpoint" => self.checkpoint = Some(PathBuf::from(value)),
            "format" => {
                self.format = match value {
                    "yoochoose" => DataFormat::Yoochoose,
                    "diginetica" => DataFormat::Diginetica,
                    "prepared" => DataFormat::Prepared,
                    _ => return Err(bad()),
                }
            }
            "threads" => self.threads = value.parse().map_err(|_| bad())?,
            "k" => self.k = value.parse().map_err(|_| bad())?,
            "fraction" => self.fraction = value.parse()?,
            "test-window-days" => {
                let days: f64 = value.parse().map_err(|_| bad())?;
                if !(days > 0.0 && days.is_finite()) {
                    return Err(bad());
                }
                self.test_window_days = Some(days);
            }
            "session" => self.session = Some(value.to_string()),
            "check-normalization" => self.check_normalization = flag()?,
            "dump-graph" => self.dump_graph = flag()?,
            other => {
                let train_key = other.replace('-', "_");
                if !self.train.set(&train_key, value)? {
                    return Err(Error::Config(format!("unknown key `{other}`")));
                }
            }
        }
        Ok(())
    }
}

/// Failure with its process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn input(msg: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: msg.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Io { .. }
            | Error::Parse { .. }
            | Error::Config(_)
            | Error::EmptyDataset(_)
            | Error::Split(_) => 2,
            Error::Checkpoint(_) | Error::VocabularyMismatch { .. } => 3,
            Error::UnknownItem(_) => 4,
            _ => 1,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self {
            code: 1,
            message: e.to_string(),
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

/// Parses arguments, runs the command, and returns the exit code. Normal
/// output goes to `out`, diagnostics to `err`.
pub fn run<I, S>(args: I, out: &mut (dyn Write + Send), err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            if code == 0 {
                let _ = write!(out, "{e}");
            } else {
                let _ = write!(err, "{e}");
            }
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message);
            e.code
        }
    }
}

fn dispatch(command: Command, out: &mut (dyn Write + Send)) -> CliResult {
    let flags = match &command {
        Command::Preprocess(f)
        | Command::Train(f)
        | Command::Evaluate(f)
        | Command::Ablate(f)
        | Command::Predict(f) => f,
    };
    let file_text = match &flags.config {
        Some(p) => Some(
            fs::read_to_string(p).map_err(|e| CliError::input(format!("{}: {e}", p.display())))?,
        ),
        None => None,
    };
    let cfg = RunConfig::resolve(file_text.as_deref(), &flags.given())?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| CliError {
            code: 1,
            message: e.to_string(),
        })?;
    pool.install(|| match command {
        Command::Preprocess(_) => cmd_preprocess(&cfg, out),
        Command::Train(_) => cmd_train(&cfg, out),
        Command::Evaluate(_) => cmd_evaluate(&cfg, out),
        Command::Ablate(_) => cmd_ablate(&cfg, out),
        Command::Predict(_) => cmd_predict(&cfg, out),
    })
}

fn require_file(path: &Option<PathBuf>, what: &str) -> CliResult<PathBuf> {
    let p = path
        .clone()
        .ok_or_else(|| CliError::input(format!("missing --{what}")))?;
    if !p.is_file() {
        return Err(CliError::input(format!("{}: no such file", p.display())));
    }
    Ok(p)
}

fn require_dir_files(path: &Option<PathBuf>, files: &[&str]) -> CliResult<PathBuf> {
    let dir = path
        .clone()
        .ok_or_else(|| CliError::input("missing --data"))?;
    for f in files {
        if !dir.join(f).is_file() {
            return Err(CliError::input(format!(
                "{}: no such file",
                dir.join(f).display()
            )));
        }
    }
    Ok(dir)
}

fn require_prepared(cfg: &RunConfig) -> CliResult {
    if cfg.format != DataFormat::Prepared {
        return Err(CliError::input(
            "this command reads prepared data (--format prepared)",
        ));
    }
    Ok(())
}

fn output_dir(cfg: &RunConfig) -> CliResult<PathBuf> {
    let dir = cfg
        .out
        .clone()
        .ok_or_else(|| CliError::input("missing --out"))?;
    fs::create_dir_all(&dir).map_err(|e| CliError::input(format!("{}: {e}", dir.display())))?;
    Ok(dir)
}

fn load_ckpt(cfg: &RunConfig) -> CliResult<Checkpoint> {
    let path = cfg
        .checkpoint
        .clone()
        .ok_or_else(|| CliError::input("missing --checkpoint"))?;
    load_checkpoint(&path).map_err(|e| CliError {
        code: 3,
        message: e.to_string(),
    })
}

/// Counts written by `preprocess`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PreprocessStats {
    pub rows: usize,
    pub skipped_rows: usize,
    pub sessions: usize,
    pub items: usize,
    pub train_sessions: usize,
    pub test_sessions: usize,
    pub train_examples: usize,
    pub test_examples: usize,
    pub warning: Option<String>,
}

impl PreprocessStats {
    pub fn report(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "rows={}", self.rows);
        let _ = writeln!(s, "skipped_rows={}", self.skipped_rows);
        let _ = writeln!(s, "sessions={}", self.sessions);
        let _ = writeln!(s, "items={}", self.items);
        let _ = writeln!(s, "train_sessions={}", self.train_sessions);
        let _ = writeln!(s, "test_sessions={}", self.test_sessions);
        let _ = writeln!(s, "train_examples={}", self.train_examples);
        let _ = writeln!(s, "test_examples={}", self.test_examples);
        if let Some(w) = &self.warning {
            let _ = writeln!(s, "warning={w}");
        }
        s
    }
}

/// Raw log → `train.txt`, `test.txt`, `vocab.txt`, `stats.txt`.
pub fn cmd_preprocess(cfg: &RunConfig, out: &mut dyn Write) -> CliResult {
    let path = require_file(&cfg.data, "data")?;
    let format = match cfg.format {
        DataFormat::Yoochoose => LogFormat::Yoochoose,
        DataFormat::Diginetica => LogFormat::Diginetica,
        DataFormat::Prepared => {
            return Err(CliError::input(
                "preprocess needs --format yoochoose or diginetica",
            ))
        }
    };
    let out_dir = output_dir(cfg)?;
    let window_days = cfg.test_window_days.unwrap_or(match format {
        LogFormat::Yoochoose => 1.0,
        LogFormat::Diginetica => 7.0,
    });

    let file =
        fs::File::open(&path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let parsed = parse_events(BufReader::new(file), format)?;
    let warning = parsed.warning();
    let (sessions, vocab) = build_and_filter(&parsed.events, FilterConfig::default())?;
    let total_sessions = sessions.len();
    let (train, test) = split_by_time(sessions, (window_days * MS_PER_DAY as f64).round() as i64)?;
    let train = select_recent(train, cfg.fraction);
    let train_examples = expand_all(&train)?;
    let test_examples = expand_all(&test)?;

    save_examples(&out_dir.join(TRAIN_FILE), &train_examples)?;
    save_examples(&out_dir.join(TEST_FILE), &test_examples)?;
    vocab.save(&out_dir.join(VOCAB_FILE))?;
    let stats = PreprocessStats {
        rows: parsed.rows,
        skipped_rows: parsed.skipped,
        sessions: total_sessions,
        items: vocab.len(),
        train_sessions: train.len(),
        test_sessions: test.len(),
        train_examples: train_examples.len(),
        test_examples: test_examples.len(),
        warning,
    };
    let report = stats.report();
    fs::write(out_dir.join(STATS_FILE), &report)
        .map_err(|e| Error::io(out_dir.join(STATS_FILE), e))?;
    out.write_all(report.as_bytes())?;
    Ok(())
}

fn load_prepared(
    dir: &Path,
    examples_file: &str,
) -> CliResult<(Vec<TrainExample>, ItemVocabulary)> {
    let vocab = ItemVocabulary::load(&dir.join(VOCAB_FILE))?;
    let examples = load_examples(&dir.join(examples_file))?;
    crate::data::check_indices(&examples, vocab.len())
        .map_err(|e| CliError::input(e.to_string()))?;
    Ok((examples, vocab))
}

/// Trains and writes `model.ckpt` plus `train_log.txt`.
pub fn cmd_train(cfg: &RunConfig, out: &mut dyn Write) -> CliResult {
    require_prepared(cfg)?;
    let dir = require_dir_files(&cfg.data, &[TRAIN_FILE, VOCAB_FILE])?;
    let out_dir = output_dir(cfg)?;
    cfg.train.validate()?;
    let (examples, vocab) = load_prepared(&dir, TRAIN_FILE)?;

    writeln!(out, "{}", EpochLog::HEADER)?;
    let mut log_text = format!("{}\n", EpochLog::HEADER);
    let mut io_err = None;
    let outcome = fit(
        &examples,
        vocab.len(),
        vocab.fingerprint(),
        &cfg.train,
        |entry| {
            let line = entry.line();
            if let Err(e) = writeln!(out, "{line}") {
                io_err.get_or_insert(e);
            }
            log_text.push_str(&line);
            log_text.push('\n');
        },
    )?;
    if let Some(e) = io_err {
        return Err(e.into());
    }
    save_checkpoint(&out_dir.join(CHECKPOINT_FILE), &outcome.checkpoint)?;
    fs::write(out_dir.join(LOG_FILE), log_text)
        .map_err(|e| Error::io(out_dir.join(LOG_FILE), e))?;
    writeln!(
        out,
        "best epoch {} ({}={:.2})",
        outcome.checkpoint.epoch, cfg.train.selection, outcome.checkpoint.best_metric
    )?;
    Ok(())
}

/// Scores `test.txt` with a checkpoint.
pub fn cmd_evaluate(cfg: &RunConfig, out: &mut dyn Write) -> CliResult {
    require_prepared(cfg)?;
    let dir = require_dir_files(&cfg.data, &[TEST_FILE, VOCAB_FILE])?;
    let ckpt = load_ckpt(cfg)?;
    let (examples, vocab) = load_prepared(&dir, TEST_FILE)?;
    check_vocabulary(ckpt.vocab_hash, &vocab)?;
    let metrics = evaluate(&ckpt.params, ckpt.config.variant_config(), &examples, cfg.k)?;
    write!(out, "{}\n{}", metrics.table(), metrics.key_values())?;
    Ok(())
}

/// Trains every variant with the same seed and budget and tabulates test metrics.
pub fn cmd_ablate(cfg: &RunConfig, out: &mut dyn Write) -> CliResult {
    require_prepared(cfg)?;
    let dir = require_dir_files(&cfg.data, &[TRAIN_FILE, TEST_FILE, VOCAB_FILE])?;
    cfg.train.validate()?;
    let (train, vocab) = load_prepared(&dir, TRAIN_FILE)?;
    let (test, _) = load_prepared(&dir, TEST_FILE)?;

    let mut rows: Vec<(Variant, Metrics)> = Vec::new();
    for variant in Variant::ALL {
        let train_cfg = TrainConfig {
            variant,
            ..cfg.train.clone()
        };
        let result =
            fit(&train, vocab.len(), vocab.fingerprint(), &train_cfg, |_| {}).and_then(|o| {
                evaluate(
                    &o.checkpoint.params,
                    train_cfg.variant_config(),
                    &test,
                    cfg.k,
                )
            });
        match result {
            Ok(m) => rows.push((variant, m)),
            Err(e) => {
                let partial = ablation_table(&rows, cfg.k);
                writeln!(out, "{partial}partial results: variant {variant} failed")?;
                return Err(CliError::from(e));
            }
        }
    }
    let table = ablation_table(&rows, cfg.k);
    out.write_all(table.as_bytes())?;
    if let Some(o) = &cfg.out {
        let dir = output_dir(&RunConfig {
            out: Some(o.clone()),
            ..RunConfig::default()
        })?;
        fs::write(dir.join(ABLATION_FILE), &table)
            .map_err(|e| Error::io(dir.join(ABLATION_FILE), e))?;
    }
    Ok(())
}

pub fn ablation_table(rows: &[(Variant, Metrics)], k: usize) -> String {
    let mut s = format!(
        "{:<12} {:>8} {:>8}\n",
        "variant",
        format!("P@{k}"),
        format!("MRR@{k}")
    );
    for (v, m) in rows {
        let _ = writeln!(
            s,
            "{:<12} {:>8.2} {:>8.2}",
            v.name(),
            m.precision_at_k,
            m.mrr_at_k
        );
    }
    s
}

/// Top-k next items for `--session`.
pub fn cmd_predict(cfg: &RunConfig, out: &mut dyn Write) -> CliResult {
    require_prepared(cfg)?;
    let dir = require_dir_files(&cfg.data, &[VOCAB_FILE])?;
    let ckpt = load_ckpt(cfg)?;
    let vocab = ItemVocabulary::load(&dir.join(VOCAB_FILE))?;
    check_vocabulary(ckpt.vocab_hash, &vocab)?;
    let session = cfg.session.as_deref().ok_or_else(|| CliError {
        code: 4,
        message: "missing --session".into(),
    })?;
    let ids: Vec<&str> = session
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect();
    if ids.is_empty() {
        return Err(CliError {
            code: 4,
            message: "empty session".into(),
        });
    }
    let prefix = vocab.encode(&ids)?;
    let m = ckpt.params.num_items();
    if cfg.k == 0 || cfg.k > m {
        return Err(CliError::input(format!(
            "k must be in 1..={m}, got {}",
            cfg.k
        )));
    }
    let graph = build_graph(&prefix)?;
    if cfg.dump_graph {
        for u in 0..graph.len() {
            for v in 0..graph.len() {
                let w = graph.out_weight(u, v);
                if w != 0.0 {
                    let name = |slot: usize| vocab.external(graph.nodes[slot]).unwrap_or("?");
                    writeln!(out, "# {} -> {} : {}", name(u), name(v), w)?;
                }
            }
        }
    }
    let padded = pad_graph(&graph, graph.len(), ckpt.params.pad_index())?;
    let probs = predict(&ckpt.params, &padded, ckpt.config.variant_config())?;
    for (rank, item) in rank_topk(&probs, cfg.k)?.into_iter().enumerate() {
        writeln!(
            out,
            "{} {} {:.6}",
            rank + 1,
            vocab.external(item).unwrap_or("?"),
            probs[item]
        )?;
    }
    if cfg.check_normalization {
        let total: f64 = probs.iter().map(|&p| f64::from(p)).sum();
        writeln!(out, "# probability_sum={total:.6}")?;
    }
    Ok(())
}
