//! Command-line front end.
//!
//! Subcommands: `train`, `predict`, `evaluate`, `ablate`, `synth`, `stats`.
//! Outputs are written to a temporary file and renamed into place, so a
//! failed command never leaves a partial output behind.

mod ablate;

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

pub use ablate::{run_ablation, AblationTable};

use crate::data::{read_letor_file, write_letor, ParseOptions, QueryDataset};
use crate::error::{invalid_input, Error, Result};
use crate::gbm::{train, LearningCurve, TrainConfig, TreeEnsemble};
use crate::loss::LossVariant;
use crate::metrics::{evaluate, EvalReport};
use crate::synth::{generate_splits, SynthConfig};

#[derive(Debug, Parser)]
#[command(name = "softrank-gbm", version, about = "Listwise learning-to-rank with boosted trees and a soft-rank loss")]
pub struct Cli {
    /// Worker threads (defaults to all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model and write it together with its learning curve.
    Train(TrainArgs),
    /// Score a LETOR file with a saved model.
    Predict(PredictArgs),
    /// Compute NDCG@k / MAP@k for a score file.
    Evaluate(EvaluateArgs),
    /// Train all four loss variants and tabulate their metrics.
    Ablate(AblateArgs),
    /// Generate synthetic LETOR train/valid/test files.
    Synth(SynthArgs),
    /// Print dataset statistics.
    Stats(StatsArgs),
}

#[derive(Debug, Clone, Args)]
pub struct BoostArgs {
    #[arg(long, default_value_t = 1000)]
    pub iterations: usize,
    #[arg(long, default_value_t = 0.1)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 0.01)]
    pub epsilon: f64,
    /// Maximum leaves per tree.
    #[arg(long, default_value_t = 255)]
    pub leaves: usize,
    #[arg(long, default_value_t = 255)]
    pub max_bins: usize,
    #[arg(long, default_value_t = 1)]
    pub min_samples_per_leaf: usize,
    /// Truncation level; repeat for several.
    #[arg(long = "k")]
    pub k: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub eval_every: usize,
    /// Regroup documents of a query that are not contiguous in the file.
    #[arg(long)]
    pub regroup: bool,
}

impl BoostArgs {
    pub fn ks(&self) -> Vec<usize> {
        if self.k.is_empty() {
            vec![1, 10]
        } else {
            self.k.clone()
        }
    }

    pub fn config(&self, loss: LossVariant) -> TrainConfig {
        TrainConfig {
            iterations: self.iterations,
            learning_rate: self.learning_rate,
            num_leaves: self.leaves,
            epsilon: self.epsilon,
            max_bins: self.max_bins,
            min_samples_per_leaf: self.min_samples_per_leaf,
            loss,
            eval_at: self.ks(),
            eval_every: self.eval_every,
            seed: self.seed,
        }
    }

    fn parse_options(&self) -> ParseOptions {
        ParseOptions { regroup_interleaved: self.regroup }
    }
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub valid: Option<PathBuf>,
    /// Output model file.
    #[arg(long)]
    pub model: PathBuf,
    /// Learning-curve file (default: `<model>.curve.tsv`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// mse | listwise-mse | softrank-mse-pointwise | softrank-mse
    #[arg(long, default_value = "softrank-mse")]
    pub loss: String,
    #[command(flatten)]
    pub boost: BoostArgs,
}

#[derive(Debug, Clone, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// LETOR file to score.
    #[arg(long)]
    pub test: PathBuf,
    /// Score file, one value per document in input order.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    /// LETOR file holding the labels.
    #[arg(long)]
    pub test: PathBuf,
    /// Score file, one value per document (may come from another system).
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long = "k")]
    pub k: Vec<usize>,
    /// Report file (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Optional per-query dump.
    #[arg(long)]
    pub per_query: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct AblateArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub valid: Option<PathBuf>,
    /// Evaluation set; defaults to `--valid`.
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Table file (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub boost: BoostArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// Output directory; receives train.txt, valid.txt and test.txt.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub train_queries: usize,
    #[arg(long, default_value_t = 30)]
    pub valid_queries: usize,
    #[arg(long, default_value_t = 30)]
    pub test_queries: usize,
    #[arg(long, default_value_t = 20)]
    pub docs_per_query: usize,
    #[arg(long, default_value_t = 10)]
    pub features: usize,
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub data: PathBuf,
}

fn require_file(path: &Path) -> Result<()> {
    if !path.is_file() {
        return Err(invalid_input(format!("input file {} does not exist", path.display())));
    }
    Ok(())
}

fn require_output_dir(path: &Path) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    if !dir.is_dir() {
        return Err(invalid_input(format!("output directory {} does not exist", dir.display())));
    }
    Ok(())
}

fn with_context(path: &Path, err: Error) -> Error {
    match err {
        Error::Parse { line, message } => Error::Parse { line, message: format!("{}: {message}", path.display()) },
        Error::EmptyDataset => invalid_input(format!("{} contains no documents", path.display())),
        other => other,
    }
}

fn read_dataset(path: &Path, options: ParseOptions) -> Result<QueryDataset> {
    read_letor_file(path, options).map_err(|e| with_context(path, e))
}

/// Writes through a sibling temporary file and renames it over `path`.
pub fn write_atomic<F>(path: &Path, write: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> Result<()>,
{
    let mut tmp_name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    let result = (|| {
        let mut w = BufWriter::new(File::create(&tmp)?);
        write(&mut w)?;
        w.into_inner().map_err(|e| e.into_error())?.sync_all()?;
        fs::rename(&tmp, path)?;
        Ok(())
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

fn to_err(e: std::io::Error) -> Error {
    Error::Io(e)
}

pub fn default_curve_path(model: &Path) -> PathBuf {
    let mut name = model.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".curve.tsv");
    model.with_file_name(name)
}

/// Result of `train`, also returned to library callers.
pub struct TrainOutcome {
    pub model: TreeEnsemble,
    pub curve: LearningCurve,
    pub report: Option<EvalReport>,
}

pub fn cmd_train(args: &TrainArgs) -> Result<TrainOutcome> {
    require_file(&args.train)?;
    if let Some(v) = &args.valid {
        require_file(v)?;
    }
    let curve_path = args.out.clone().unwrap_or_else(|| default_curve_path(&args.model));
    require_output_dir(&args.model)?;
    require_output_dir(&curve_path)?;
    let loss: LossVariant = args.loss.parse()?;
    let config = args.boost.config(loss);
    config.validate()?;

    let mut train_set = read_dataset(&args.train, args.boost.parse_options())?;
    let mut valid_set = args
        .valid
        .as_deref()
        .map(|p| read_dataset(p, args.boost.parse_options()))
        .transpose()?;
    let d = train_set.num_features().max(valid_set.as_ref().map_or(0, |v| v.num_features()));
    train_set.widen_features(d);
    if let Some(v) = valid_set.as_mut() {
        v.widen_features(d);
    }

    let started = Instant::now();
    let (model, curve) = train(&train_set, &config, valid_set.as_ref())?;
    eprintln!("trained {} trees in {:.2?}", model.len(), started.elapsed());

    let report = match &valid_set {
        Some(v) => Some(evaluate(v, &model.predict(&v.features)?, &config.eval_at)?),
        None => None,
    };

    write_atomic(&args.model, |w| model.save(w))?;
    if let Err(e) = write_atomic(&curve_path, |w| curve.write_tsv(w).map_err(to_err)) {
        let _ = fs::remove_file(&args.model);
        return Err(e);
    }
    Ok(TrainOutcome { model, curve, report })
}

pub fn load_model(path: &Path) -> Result<TreeEnsemble> {
    require_file(path)?;
    TreeEnsemble::load(BufReader::new(File::open(path)?))
        .map_err(|e| invalid_input(format!("{}: {e}", path.display())))
}

pub fn write_scores<W: Write>(scores: &[f64], mut out: W) -> std::io::Result<()> {
    for s in scores {
        writeln!(out, "{s:.16e}")?;
    }
    Ok(())
}

pub fn read_scores(path: &Path) -> Result<Vec<f64>> {
    require_file(path)?;
    let mut scores = Vec::new();
    for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let v: f64 = t.parse().map_err(|_| Error::Parse {
            line: i + 1,
            message: format!("{}: malformed score '{t}'", path.display()),
        })?;
        scores.push(v);
    }
    Ok(scores)
}

pub fn cmd_predict(args: &PredictArgs) -> Result<Vec<f64>> {
    require_file(&args.test)?;
    require_output_dir(&args.out)?;
    let model = load_model(&args.model)?;
    let data = read_dataset(&args.test, ParseOptions::default())?;
    if data.num_features() > model.num_features {
        return Err(invalid_input(format!(
            "{} has {} features but the model was trained on {}",
            args.test.display(),
            data.num_features(),
            model.num_features
        )));
    }
    let scores = model.predict(&data.features)?;
    write_atomic(&args.out, |w| write_scores(&scores, w).map_err(to_err))?;
    Ok(scores)
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<EvalReport> {
    require_file(&args.test)?;
    for out in args.out.iter().chain(&args.per_query) {
        require_output_dir(out)?;
    }
    let data = read_dataset(&args.test, ParseOptions::default())?;
    let scores = read_scores(&args.scores)?;
    if scores.len() != data.num_docs() {
        return Err(invalid_input(format!(
            "{} has {} scores but {} has {} documents",
            args.scores.display(),
            scores.len(),
            args.test.display(),
            data.num_docs()
        )));
    }
    let ks = if args.k.is_empty() { vec![1, 10] } else { args.k.clone() };
    let report = evaluate(&data, &scores, &ks)?;
    match &args.out {
        Some(path) => write_atomic(path, |w| report.write_table(w).map_err(to_err))?,
        None => report.write_table(std::io::stdout().lock())?,
    }
    if let Some(path) = &args.per_query {
        write_atomic(path, |w| report.write_per_query(w).map_err(to_err))?;
    }
    Ok(report)
}

pub fn cmd_ablate(args: &AblateArgs) -> Result<AblationTable> {
    require_file(&args.train)?;
    let eval_path = args
        .test
        .as_ref()
        .or(args.valid.as_ref())
        .ok_or_else(|| invalid_input("ablate needs --valid or --test to evaluate on"))?;
    require_file(eval_path)?;
    if let Some(out) = &args.out {
        require_output_dir(out)?;
    }
    let config = args.boost.config(LossVariant::ListwiseSoftRankMse);
    config.validate()?;

    let mut train_set = read_dataset(&args.train, args.boost.parse_options())?;
    let mut eval_set = read_dataset(eval_path, args.boost.parse_options())?;
    let d = train_set.num_features().max(eval_set.num_features());
    train_set.widen_features(d);
    eval_set.widen_features(d);

    let table = run_ablation(&train_set, &eval_set, &config)?;
    match &args.out {
        Some(path) => write_atomic(path, |w| table.write_tsv(w).map_err(to_err))?,
        None => table.write_tsv(std::io::stdout().lock())?,
    }
    Ok(table)
}

pub fn cmd_synth(args: &SynthArgs) -> Result<Vec<QueryDataset>> {
    if !args.out.is_dir() {
        return Err(invalid_input(format!("output directory {} does not exist", args.out.display())));
    }
    let config = SynthConfig {
        docs_per_query: args.docs_per_query,
        num_features: args.features,
        noise: args.noise,
        seed: args.seed,
    };
    let splits = generate_splits(&config, &[args.train_queries, args.valid_queries, args.test_queries])?;
    for (name, ds) in ["train.txt", "valid.txt", "test.txt"].iter().zip(&splits) {
        write_atomic(&args.out.join(name), |w| write_letor(ds, w))?;
    }
    Ok(splits)
}

pub fn cmd_stats(args: &StatsArgs) -> Result<()> {
    require_file(&args.data)?;
    let ds = read_dataset(&args.data, ParseOptions { regroup_interleaved: true })?;
    print!("{}", ds.stats());
    Ok(())
}

/// Runs a parsed command line. Returns the process exit status.
pub fn run(cli: Cli) -> i32 {
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: cannot configure {threads} threads: {e}");
            return 2;
        }
    }
    let result = match &cli.command {
        Command::Train(a) => cmd_train(a).map(|outcome| {
            if let Some(report) = outcome.report {
                print!("{report}");
            }
        }),
        Command::Predict(a) => cmd_predict(a).map(drop),
        Command::Evaluate(a) => cmd_evaluate(a).map(drop),
        Command::Ablate(a) => cmd_ablate(a).map(drop),
        Command::Synth(a) => cmd_synth(a).map(drop),
        Command::Stats(a) => cmd_stats(a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
