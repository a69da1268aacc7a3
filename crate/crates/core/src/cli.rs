//! The `fuselab` command line: experiment configs, subcommands and exit codes.
//!
//! Exit codes are `0` on success, `1` when `gradcheck` finds a failing check,
//! `2` for usage, configuration, data and schema errors, and `3` when training
//! diverges.

use std::fs;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::Deserialize;

use crate::datakit::{
    generate_synthetic, load_jsonl, load_jsonl_with, merge_to_binary, split_and_batch, write_jsonl, Dataset, LabelSpace,
    SyntheticSpec, SyntheticTask,
};
use crate::error::{Error, Result};
use crate::metrics::{evaluate_labels, render_csv, render_per_class, render_table, MetricsReport, ReportRow};
use crate::textprep::{normalize, Lexicons};
use crate::training::{
    build_model, evaluate, gradient_suite, load_model, loss_csv, prepare_all, save_model, FusionModel, ModelConfig,
    TrainConfig, Trainer,
};

pub const MODEL_FILE: &str = "model.bin";
pub const LOSS_FILE: &str = "loss.csv";
pub const TEST_FILE: &str = "test.jsonl";

#[derive(Debug, Parser)]
#[command(name = "fuselab", version, about = "Multimodal fusion experiments from the command line")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model from an experiment config and report test-split metrics.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (created if missing).
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a saved model on a JSON Lines dataset.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Merge classes into Hate/NoHate before scoring.
        #[arg(long)]
        binarize: bool,
        #[arg(long, default_value_t = 1)]
        threads: usize,
        /// Stem for the `.txt` and `.csv` reports; defaults to `eval_metrics`
        /// next to the model.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Normalize one string per line. `-` reads stdin or writes stdout.
    Normalize {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the finite-difference gradient suite.
    Gradcheck {
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
    },
    /// Write a synthetic dataset as JSON Lines.
    Synth {
        #[arg(long)]
        task: SyntheticTask,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        noise: f64,
        #[arg(long, default_value_t = 8)]
        grid_size: usize,
    },
}

/// Process exit code for an error.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Divergence { .. } => 3,
        _ => 2,
    }
}

// ---- experiment config -------------------------------------------------

fn default_split() -> [f64; 3] {
    [0.7, 0.15, 0.15]
}
fn default_threads() -> usize {
    1
}
fn default_metrics() -> PathBuf {
    PathBuf::from("metrics")
}
fn default_noise() -> f64 {
    0.1
}
fn default_grid() -> usize {
    8
}
fn default_vocab() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSection {
    pub task: SyntheticTask,
    pub n: usize,
    /// Defaults to the experiment seed.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_noise")]
    pub noise: f64,
    #[serde(default = "default_grid")]
    pub grid_size: usize,
    #[serde(default = "default_vocab")]
    pub vocab_size: usize,
}

/// Where the data comes from. Exactly one of `synthetic`, `path`, or the
/// pre-split `train`/`val`/`test` files must be given. `path` and
/// `synthetic` data are split by `split`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    #[serde(default)]
    pub synthetic: Option<SyntheticSection>,
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub train: Option<PathBuf>,
    #[serde(default)]
    pub val: Option<PathBuf>,
    #[serde(default)]
    pub test: Option<PathBuf>,
    /// Train/val/test fractions.
    #[serde(default = "default_split")]
    pub split: [f64; 3],
    /// Merge a multi-class label space into Hate/NoHate before training.
    #[serde(default)]
    pub binarize: bool,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    /// Report stem relative to the output directory; `.txt` and `.csv` are appended.
    #[serde(default = "default_metrics")]
    pub metrics: PathBuf,
    #[serde(default = "default_threads")]
    pub threads: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            metrics: default_metrics(),
            threads: default_threads(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Single source of randomness: data generation, split, initialisation
    /// and training order.
    #[serde(default)]
    pub seed: u64,
    /// Label for the `Model` column; defaults to the config file stem.
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub model: ModelConfig,
    pub data: DataSection,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub eval: EvalSection,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let raw: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if raw.get("train").and_then(|t| t.get("seed")).is_some() {
            return Err(Error::Config("train.seed is not allowed; set the top-level seed".into()));
        }
        let mut config: ExperimentConfig = raw.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        config.train.seed = config.seed;
        config.validate()?;
        Ok(config)
    }

    /// Reads a config file; relative data paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let d = &mut config.data;
        for p in [&mut d.path, &mut d.train, &mut d.val, &mut d.test].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if config.name.is_none() {
            config.name = path.file_stem().map(|s| s.to_string_lossy().into_owned());
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.data;
        let sources = [d.synthetic.is_some(), d.path.is_some(), d.train.is_some()];
        if sources.iter().filter(|s| **s).count() != 1 {
            return Err(Error::Config(
                "data needs exactly one of `synthetic`, `path`, or `train` (+ `test`)".into(),
            ));
        }
        if d.train.is_some() && d.test.is_none() {
            return Err(Error::Config("pre-split data needs a `test` file".into()));
        }
        if d.train.is_none() && (d.val.is_some() || d.test.is_some()) {
            return Err(Error::Config("`val`/`test` files need a `train` file".into()));
        }
        if self.eval.threads == 0 {
            return Err(Error::Config("eval.threads must be at least 1".into()));
        }
        self.model.validate()
    }

    /// `(train, val, test)` datasets.
    pub fn datasets(&self) -> Result<(Dataset, Dataset, Dataset)> {
        let d = &self.data;
        let (train, val, test) = if let Some(train_path) = &d.train {
            let train = load_jsonl(train_path)?;
            let labels = Some(train.labels.clone());
            let val = match &d.val {
                Some(p) => load_jsonl_with(p, labels.clone())?,
                None => train.subset(&[]),
            };
            let test = load_jsonl_with(d.test.as_ref().expect("validated"), labels)?;
            if val.labels != train.labels || test.labels != train.labels {
                return Err(Error::Config("train/val/test files disagree on the label space".into()));
            }
            (train, val, test)
        } else {
            let all = match (&d.synthetic, &d.path) {
                (Some(s), _) => {
                    let spec = SyntheticSpec {
                        task: s.task,
                        n: s.n,
                        seed: s.seed.unwrap_or(self.seed),
                        noise: s.noise,
                        grid_size: s.grid_size,
                        vocab_size: s.vocab_size,
                    };
                    generate_synthetic(&spec)?.dataset
                }
                (None, Some(p)) => load_jsonl(p)?,
                (None, None) => unreachable!("validated"),
            };
            let split = split_and_batch(all.len(), d.split, self.train.batch_size, self.seed)?;
            (
                all.subset(&split.train_indices()),
                all.subset(&split.val_indices()),
                all.subset(&split.test_indices()),
            )
        };
        if d.binarize {
            Ok((train.binarized()?, val.binarized()?, test.binarized()?))
        } else {
            Ok((train, val, test))
        }
    }
}

// ---- commands ----------------------------------------------------------

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn with_ext(stem: &Path, ext: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

fn report_row(name: &str, model: &FusionModel, report: MetricsReport) -> ReportRow {
    ReportRow {
        model: name.to_string(),
        input_modes: model.config.modes.describe().to_string(),
        fusion: model.config.fusion_name().to_string(),
        report,
    }
}

/// Writes `<stem>.txt` (table plus per-class breakdown) and `<stem>.csv`.
fn write_reports(stem: &Path, rows: &[ReportRow]) -> Result<String> {
    let table = render_table(rows);
    let mut text = table.clone();
    for row in rows {
        text.push('\n');
        text.push_str(&render_per_class(&row.report));
    }
    write_file(&with_ext(stem, "txt"), &text)?;
    write_file(&with_ext(stem, "csv"), &render_csv(rows))?;
    Ok(table)
}

/// Outputs of [`cmd_train`].
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub table: String,
    pub row: ReportRow,
    pub steps: usize,
}

pub fn cmd_train(config_path: &Path, out: &Path) -> Result<TrainOutcome> {
    let config = ExperimentConfig::load(config_path)?;
    let (train, _val, test) = config.datasets()?;
    if train.is_empty() {
        return Err(Error::Input("training split is empty".into()));
    }
    if test.is_empty() {
        return Err(Error::Input("test split is empty".into()));
    }
    let lexicons = Arc::new(Lexicons::from_env()?);
    let mut model = build_model(config.model.clone(), &train, lexicons, config.seed)?;
    let samples = prepare_all(&model, &train)?;
    let log = {
        let mut trainer = Trainer::new(&mut model, config.train.clone())?;
        trainer.fit(&samples)?.to_vec()
    };

    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    save_model(&model, &out.join(MODEL_FILE))?;
    write_file(&out.join(LOSS_FILE), &loss_csv(&log))?;
    write_jsonl(&test, &out.join(TEST_FILE))?;

    let (_, report) = evaluate(&model, &test, config.eval.threads)?;
    let name = config.name.as_deref().unwrap_or("fuselab");
    let row = report_row(name, &model, report);
    let table = write_reports(&out.join(&config.eval.metrics), std::slice::from_ref(&row))?;
    Ok(TrainOutcome {
        table,
        row,
        steps: log.len(),
    })
}

/// Scores `model` on `data`. With `binarize`, multi-class truths and
/// predictions are merged to Hate/NoHate, or a multi-class dataset is merged
/// before a binary model sees it.
pub fn eval_model(model: &FusionModel, data: &Dataset, binarize: bool, threads: usize) -> Result<MetricsReport> {
    if data.labels == model.labels {
        let (preds, report) = evaluate(model, data, threads)?;
        if !binarize || model.labels == LabelSpace::binary() {
            return Ok(report);
        }
        let merge = |ids: &mut dyn Iterator<Item = usize>| ids.map(|l| merge_to_binary(l, &data.labels)).collect::<Result<Vec<_>>>();
        let truths = merge(&mut data.publications.iter().map(|p| p.label))?;
        let preds = merge(&mut preds.iter().copied())?;
        return evaluate_labels(&truths, &preds, &LabelSpace::binary());
    }
    if binarize && model.labels == LabelSpace::binary() {
        return Ok(evaluate(model, &data.binarized()?, threads)?.1);
    }
    Err(Error::Config(format!(
        "model labels {:?} do not match dataset labels {:?}",
        model.labels.names, data.labels.names
    )))
}

pub fn cmd_eval(model_path: &Path, data: &Path, binarize: bool, threads: usize, out: Option<&Path>) -> Result<String> {
    if threads == 0 {
        return Err(Error::Config("--threads must be at least 1".into()));
    }
    let model = load_model(model_path)?;
    let dataset = load_jsonl_with(data, Some(model.labels.clone()))?;
    let report = eval_model(&model, &dataset, binarize, threads)?;
    let name = model_path
        .file_stem()
        .map_or_else(|| "model".to_string(), |s| s.to_string_lossy().into_owned());
    let stem = match out {
        Some(p) => p.to_path_buf(),
        None => model_path.with_file_name("eval_metrics"),
    };
    write_reports(&stem, &[report_row(&name, &model, report)])
}

pub fn cmd_normalize(input: &Path, out: &Path) -> Result<usize> {
    let lexicons = Lexicons::from_env()?;
    let reader: Box<dyn BufRead> = if input == Path::new("-") {
        Box::new(io::stdin().lock())
    } else {
        Box::new(BufReader::new(fs::File::open(input).map_err(|e| Error::io(input, e))?))
    };
    let writer: Box<dyn Write> = if out == Path::new("-") {
        Box::new(io::stdout().lock())
    } else {
        Box::new(fs::File::create(out).map_err(|e| Error::io(out, e))?)
    };
    let mut writer = BufWriter::new(writer);
    let mut n = 0;
    for line in reader.lines() {
        let line = line.map_err(|e| Error::io(input, e))?;
        writeln!(writer, "{}", normalize(&line, &lexicons).surface()).map_err(|e| Error::io(out, e))?;
        n += 1;
    }
    writer.flush().map_err(|e| Error::io(out, e))?;
    Ok(n)
}

pub fn cmd_synth(spec: &SyntheticSpec, out: &Path) -> Result<()> {
    write_jsonl(&generate_synthetic(spec)?.dataset, out)
}

/// Runs a parsed command line, printing results. Returns the exit code.
pub fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Train { config, out } => {
            let outcome = cmd_train(&config, &out)?;
            print!("{}", outcome.table);
            eprintln!("trained {} steps; artifacts in {}", outcome.steps, out.display());
            Ok(0)
        }
        Command::Eval {
            model,
            data,
            binarize,
            threads,
            out,
        } => {
            print!("{}", cmd_eval(&model, &data, binarize, threads, out.as_deref())?);
            Ok(0)
        }
        Command::Normalize { input, out } => {
            let n = cmd_normalize(&input, &out)?;
            if out != Path::new("-") {
                eprintln!("normalized {n} lines");
            }
            Ok(0)
        }
        Command::Gradcheck { tol } => {
            if !(tol > 0.0) {
                return Err(Error::Config("--tol must be positive".into()));
            }
            let start = Instant::now();
            let results = gradient_suite(tol)?;
            let width = results.iter().map(|r| r.name.len()).max().unwrap_or(0);
            let mut failed = 0;
            for r in &results {
                let status = if r.passed { "ok" } else { "FAIL" };
                failed += usize::from(!r.passed);
                println!("{:width$}  {:.3e}  {status}", r.name, r.max_rel_err);
            }
            println!(
                "{} checks, {failed} failed, tol {tol:e}, {:.2}s",
                results.len(),
                start.elapsed().as_secs_f64()
            );
            Ok(if failed == 0 { 0 } else { 1 })
        }
        Command::Synth {
            task,
            n,
            seed,
            out,
            noise,
            grid_size,
        } => {
            let spec = SyntheticSpec {
                noise,
                grid_size,
                ..SyntheticSpec::new(task, n, seed)
            };
            cmd_synth(&spec, &out)?;
            Ok(0)
        }
    }
}

/// Entry point for the binary: parses `std::env::args` and runs.
pub fn main_with_args() -> u8 {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
