//! Command implementations behind the `spatial-lucid` binary.
//!
//! Every command writes a [`RunManifest`] next to its outputs; `replay` re-runs
//! the recorded argument vector.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use log::info;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::checkpoint::{load_ensemble, save_ensemble};
use crate::data::{load_dataset, manifest_path, save_dataset, Dataset, PlaceTypeId};
use crate::datagen::{generate_benchmark, AugmentConfig, BenchmarkConfig};
use crate::error::{Error, Result};
use crate::explain::{explain_ensemble, ExplainConfig, ImportanceReport, Scope, DEFAULT_MAX_SUBSET};
use crate::io_util::{read_to_string, write_atomic};
use crate::metrics::EvalReport;
use crate::training::{
    evaluate, evaluate_grouped, fine_tune_sda, format_training_log, pretrain_shared, split_dataset,
    train, Aggregation, DataSplit, StrategyConfig, StrategyKind, TrainedEnsemble,
};

pub const THREADS_ENV: &str = "SPATIAL_LUCID_THREADS";
pub const RUN_MANIFEST: &str = "run_manifest.json";

#[derive(Debug, Parser)]
#[command(name = "spatial-lucid", version, about = "Place-type aware point-set classification")]
pub struct Cli {
    /// Increase log verbosity (repeatable); logs go to standard error.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic benchmark dataset directory.
    Generate(GenerateArgs),
    /// Train an ensemble under one strategy.
    Train(TrainArgs),
    /// Evaluate a trained ensemble on a dataset split.
    Eval(EvalArgs),
    /// Train domain adaptation for every frozen-layer count 0..=N.
    SweepFrozen(SweepArgs),
    /// Rank spatial relationships by permutation importance.
    Explain(ExplainArgs),
    /// Re-run the command recorded in a run manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    /// `fig1` or a path to a benchmark JSON file.
    #[arg(long)]
    pub benchmark: String,
    /// Overrides the benchmark's count (fig1 default: 40).
    #[arg(long)]
    pub samples_per_cell: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    #[arg(long, default_value_t = 10)]
    pub k_neighbors: usize,
    /// Drop neighbors farther than this distance.
    #[arg(long)]
    pub cutoff: Option<f64>,
    #[arg(long, default_value_t = 4)]
    pub layers: usize,
    #[arg(long, default_value_t = 32)]
    pub hidden: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Expand training samples by MBR partitioning and rotation.
    #[arg(long)]
    pub augment: bool,
    /// Keep the final epoch instead of the best validation epoch.
    #[arg(long)]
    pub no_val_select: bool,
    /// Train only the member for this place-type name.
    #[arg(long)]
    pub target_place_type: Option<String>,
    /// Dataset directory or manifest file.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub strategy: StrategyKind,
    /// Place-type distance threshold (wdlr only).
    #[arg(long)]
    pub alpha_threshold: Option<f64>,
    /// Message-passing layers frozen during fine-tuning (sda only).
    #[arg(long)]
    pub frozen_layers: Option<usize>,
    /// Weight of the representation alignment penalty (sda only).
    #[arg(long)]
    pub lambda: Option<f64>,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "test")]
    pub split: SplitName,
    /// Combine samples sharing an id prefix (before `:`) into one prediction.
    #[arg(long)]
    pub aggregation: Option<Aggregation>,
    /// Report file (JSON).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Also freeze the classifier (diagnostic: the k = N row then equals the pre-trained model).
    #[arg(long)]
    pub freeze_classifier: bool,
    #[arg(long, default_value = "test")]
    pub split: SplitName,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Clone, Args)]
#[command(group = clap::ArgGroup::new("scope").required(true).args(["place_type", "global"]))]
pub struct ExplainArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub place_type: Option<String>,
    #[arg(long)]
    pub global: bool,
    #[arg(long, default_value_t = 10)]
    pub repeats: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Hidden layer to read (0 = embedded input); defaults to the last layer.
    #[arg(long)]
    pub layer: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_MAX_SUBSET)]
    pub max_subset: usize,
    #[arg(long, default_value = "test")]
    pub split: SplitName,
    /// Ranked table (CSV).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitName {
    Train,
    Val,
    Test,
}

impl SplitName {
    fn pick(self, split: &DataSplit) -> &[crate::data::MultiCategoryPointSet] {
        match self {
            SplitName::Train => &split.train,
            SplitName::Val => &split.val,
            SplitName::Test => &split.test,
        }
    }
}

impl clap::ValueEnum for StrategyKind {
    fn value_variants<'a>() -> &'a [Self] {
        &[StrategyKind::Osfa, StrategyKind::PlaceType, StrategyKind::Wdlr, StrategyKind::Sda]
    }

    fn to_possible_value(&self) -> Option<clap::builder::PossibleValue> {
        Some(clap::builder::PossibleValue::new(match self {
            StrategyKind::Osfa => "osfa",
            StrategyKind::PlaceType => "place-type",
            StrategyKind::Wdlr => "wdlr",
            StrategyKind::Sda => "sda",
        }))
    }
}

impl clap::ValueEnum for Aggregation {
    fn value_variants<'a>() -> &'a [Self] {
        &[Aggregation::WeightedAverage, Aggregation::MajorityVote]
    }

    fn to_possible_value(&self) -> Option<clap::builder::PossibleValue> {
        Some(clap::builder::PossibleValue::new(match self {
            Aggregation::WeightedAverage => "weighted_average",
            Aggregation::MajorityVote => "majority_vote",
        }))
    }
}

/// Provenance record written by every command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Arguments after the program name, as given.
    pub args: Vec<String>,
    pub config: serde_json::Value,
    pub seed: u64,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub started_unix_seconds: u64,
    pub wall_clock_seconds: f64,
    pub version: String,
}

struct Outcome {
    config: serde_json::Value,
    seed: u64,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    manifest_path: PathBuf,
}

fn sidecar(file: &Path) -> PathBuf {
    let mut name = file.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    file.with_file_name(name)
}

fn usage(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn resolve_place_type(dataset: &Dataset, name: &str) -> Result<PlaceTypeId> {
    dataset
        .place_type_by_name(name)
        .ok_or_else(|| Error::data(None, format!("unknown place-type `{name}`")))
}

pub fn cmd_generate(args: &GenerateArgs) -> Result<Dataset> {
    let mut config = if args.benchmark == "fig1" {
        BenchmarkConfig::fig1(40)
    } else {
        let path = Path::new(&args.benchmark);
        serde_json::from_str(&read_to_string(path)?)
            .map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: e.line(),
                message: e.to_string(),
            })?
    };
    if let Some(n) = args.samples_per_cell {
        config.samples_per_cell = n;
    }
    let dataset = generate_benchmark(&config, args.seed)?;
    save_dataset(&dataset, &args.out)?;
    info!("wrote {} samples to {}", dataset.samples.len(), args.out.display());
    Ok(dataset)
}

fn strategy_config(model: &ModelArgs, kind: StrategyKind, dataset: &Dataset) -> Result<StrategyConfig> {
    Ok(StrategyConfig {
        kind,
        base_lr: model.lr,
        epochs: model.epochs,
        seed: model.seed,
        k_neighbors: model.k_neighbors,
        cutoff: model.cutoff,
        num_layers: model.layers,
        hidden_dim: model.hidden,
        select_on_validation: !model.no_val_select,
        augment: model.augment.then(AugmentConfig::default),
        target_place_type: model
            .target_place_type
            .as_deref()
            .map(|n| resolve_place_type(dataset, n))
            .transpose()?,
        ..StrategyConfig::default()
    })
}

/// Checks strategy-specific flags and resolves the full configuration.
pub fn train_config(args: &TrainArgs, dataset: &Dataset) -> Result<StrategyConfig> {
    if args.strategy != StrategyKind::Sda {
        if args.frozen_layers.is_some() {
            return Err(usage("--frozen-layers requires --strategy sda"));
        }
        if args.lambda.is_some() {
            return Err(usage("--lambda requires --strategy sda"));
        }
    }
    if args.strategy != StrategyKind::Wdlr && args.alpha_threshold.is_some() {
        return Err(usage("--alpha-threshold requires --strategy wdlr"));
    }
    let mut cfg = strategy_config(&args.model, args.strategy, dataset)?;
    cfg.alpha_threshold = args.alpha_threshold;
    cfg.sda_frozen_layers = args.frozen_layers.unwrap_or(0);
    if let Some(l) = args.lambda {
        cfg.sda_lambda = l;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn cmd_train(args: &TrainArgs) -> Result<TrainedEnsemble> {
    let dataset = load_dataset(&args.model.data)?;
    let cfg = train_config(args, &dataset)?;
    let split = split_dataset(&dataset, cfg.seed);
    let ensemble = train(&dataset, &split, &cfg)?;
    create_dir(&args.model.out)?;
    save_ensemble(&args.model.out, &ensemble)?;
    write_atomic(
        &args.model.out.join("training_log.csv"),
        format_training_log(&ensemble.training_log).as_bytes(),
    )?;
    Ok(ensemble)
}

fn json_text<T: Serialize>(v: &T) -> Result<String> {
    serde_json::to_string_pretty(v).map_err(|e| Error::Config(e.to_string()))
}

pub fn cmd_eval(args: &EvalArgs) -> Result<EvalReport> {
    let ensemble = load_ensemble(&args.checkpoint)?;
    let dataset = load_dataset(&args.data)?;
    let split = split_dataset(&dataset, ensemble.config.seed);
    let report = evaluate_grouped(&ensemble, args.split.pick(&split), args.aggregation)?;
    write_atomic(&args.out, json_text(&report)?.as_bytes())?;
    Ok(report)
}

/// One row of the frozen-layer sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub frozen_layers: usize,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub pretrained: EvalReport,
    pub rows: Vec<SweepRow>,
}

fn metrics_csv(first: &str, rows: &[(String, &EvalReport)]) -> String {
    let mut out = format!("{first},accuracy,precision,recall,f1\n");
    for (k, r) in rows {
        out.push_str(&format!("{k},{},{},{},{}\n", r.accuracy, r.precision, r.recall, r.f1));
    }
    out
}

/// Pre-trains once, then fine-tunes with k = 0..=N frozen layers.
pub fn sweep_frozen(dataset: &Dataset, split: &DataSplit, cfg: &StrategyConfig, eval_on: SplitName) -> Result<SweepResult> {
    let samples = eval_on.pick(split);
    let pretrained = pretrain_shared(dataset, split, cfg)?;
    let pre_ensemble = TrainedEnsemble {
        members: [(crate::network::ParamKey::Shared, pretrained.params.clone())].into(),
        config: StrategyConfig {
            kind: StrategyKind::Osfa,
            ..cfg.clone()
        },
        model_config: cfg.model_config(dataset),
        training_log: pretrained.log.clone(),
    };
    let pre_report = evaluate(&pre_ensemble, samples)?;
    let mut rows = Vec::with_capacity(cfg.num_layers + 1);
    for k in 0..=cfg.num_layers {
        let kcfg = StrategyConfig {
            sda_frozen_layers: k,
            ..cfg.clone()
        };
        let ens = fine_tune_sda(&pretrained, dataset, split, &kcfg)?;
        let report = evaluate(&ens, samples)?;
        info!("frozen {k}: accuracy {}", report.accuracy);
        rows.push(SweepRow {
            frozen_layers: k,
            report,
        });
    }
    Ok(SweepResult {
        pretrained: pre_report,
        rows,
    })
}

pub fn cmd_sweep_frozen(args: &SweepArgs) -> Result<SweepResult> {
    let dataset = load_dataset(&args.model.data)?;
    let mut cfg = strategy_config(&args.model, StrategyKind::Sda, &dataset)?;
    if let Some(l) = args.lambda {
        cfg.sda_lambda = l;
    }
    cfg.sda_freeze_classifier = args.freeze_classifier;
    cfg.validate()?;
    let split = split_dataset(&dataset, cfg.seed);
    let result = sweep_frozen(&dataset, &split, &cfg, args.split)?;
    create_dir(&args.model.out)?;
    let rows: Vec<(String, &EvalReport)> = result
        .rows
        .iter()
        .map(|r| (r.frozen_layers.to_string(), &r.report))
        .collect();
    write_atomic(&args.model.out.join("sweep.csv"), metrics_csv("k", &rows).as_bytes())?;
    write_atomic(
        &args.model.out.join("pretrained.csv"),
        metrics_csv("model", &[("pretrained".into(), &result.pretrained)]).as_bytes(),
    )?;
    Ok(result)
}

pub fn cmd_explain(args: &ExplainArgs) -> Result<ImportanceReport> {
    if args.repeats == 0 {
        return Err(usage("--repeats must be at least 1"));
    }
    let ensemble = load_ensemble(&args.checkpoint)?;
    let dataset = load_dataset(&args.data)?;
    let scope = match &args.place_type {
        Some(name) => Scope::PlaceType(resolve_place_type(&dataset, name)?),
        None => Scope::Global,
    };
    let split = split_dataset(&dataset, ensemble.config.seed);
    let cfg = ExplainConfig {
        layer: args.layer,
        max_subset: args.max_subset,
        repeats: args.repeats,
        seed: args.seed,
        ..ExplainConfig::default()
    };
    let report = explain_ensemble(&ensemble, &split.train, args.split.pick(&split), scope, &cfg)?;
    write_atomic(&args.out, report.to_csv(&dataset.category_names).as_bytes())?;
    Ok(report)
}

fn execute(command: &Command) -> Result<Outcome> {
    match command {
        Command::Generate(a) => {
            cmd_generate(a)?;
            Ok(Outcome {
                config: json!({ "benchmark": a.benchmark, "samples_per_cell": a.samples_per_cell }),
                seed: a.seed,
                inputs: if a.benchmark == "fig1" { vec![] } else { vec![a.benchmark.clone().into()] },
                outputs: vec![a.out.clone()],
                manifest_path: a.out.join(RUN_MANIFEST),
            })
        }
        Command::Train(a) => {
            let e = cmd_train(a)?;
            Ok(Outcome {
                config: serde_json::to_value(&e.config).map_err(|e| Error::Config(e.to_string()))?,
                seed: e.config.seed,
                inputs: vec![manifest_path(&a.model.data)],
                outputs: vec![a.model.out.clone()],
                manifest_path: a.model.out.join(RUN_MANIFEST),
            })
        }
        Command::Eval(a) => {
            cmd_eval(a)?;
            Ok(Outcome {
                config: json!({ "split": a.split, "aggregation": a.aggregation }),
                seed: 0,
                inputs: vec![a.checkpoint.clone(), manifest_path(&a.data)],
                outputs: vec![a.out.clone()],
                manifest_path: sidecar(&a.out),
            })
        }
        Command::SweepFrozen(a) => {
            cmd_sweep_frozen(a)?;
            Ok(Outcome {
                config: json!({
                    "lr": a.model.lr, "epochs": a.model.epochs, "layers": a.model.layers,
                    "hidden": a.model.hidden, "k_neighbors": a.model.k_neighbors,
                    "cutoff": a.model.cutoff, "lambda": a.lambda,
                    "freeze_classifier": a.freeze_classifier, "split": a.split,
                }),
                seed: a.model.seed,
                inputs: vec![manifest_path(&a.model.data)],
                outputs: vec![a.model.out.clone()],
                manifest_path: a.model.out.join(RUN_MANIFEST),
            })
        }
        Command::Explain(a) => {
            cmd_explain(a)?;
            Ok(Outcome {
                config: json!({
                    "place_type": a.place_type, "global": a.global, "repeats": a.repeats,
                    "layer": a.layer, "max_subset": a.max_subset, "split": a.split,
                }),
                seed: a.seed,
                inputs: vec![a.checkpoint.clone(), manifest_path(&a.data)],
                outputs: vec![a.out.clone()],
                manifest_path: sidecar(&a.out),
            })
        }
        Command::Replay(_) => unreachable!("replay is resolved before execution"),
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Generate(_) => "generate",
        Command::Train(_) => "train",
        Command::Eval(_) => "eval",
        Command::SweepFrozen(_) => "sweep-frozen",
        Command::Explain(_) => "explain",
        Command::Replay(_) => "replay",
    }
}

/// Runs one parsed invocation and writes its manifest. `args` excludes the program name.
pub fn run_command(command: &Command, args: &[String]) -> Result<RunManifest> {
    if let Command::Replay(r) = command {
        let recorded: RunManifest = serde_json::from_str(&read_to_string(&r.manifest)?)
            .map_err(|e| Error::Checkpoint(format!("{}: {e}", r.manifest.display())))?;
        let argv = std::iter::once("spatial-lucid".to_string()).chain(recorded.args.iter().cloned());
        let cli = Cli::try_parse_from(argv).map_err(|e| usage(e.to_string()))?;
        if matches!(cli.command, Command::Replay(_)) {
            return Err(usage("a manifest cannot replay another replay"));
        }
        return run_command(&cli.command, &recorded.args);
    }
    let started = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let clock = Instant::now();
    let outcome = execute(command)?;
    let manifest = RunManifest {
        command: command_name(command).into(),
        args: args.to_vec(),
        config: outcome.config,
        seed: outcome.seed,
        inputs: outcome.inputs,
        outputs: outcome.outputs,
        started_unix_seconds: started,
        wall_clock_seconds: clock.elapsed().as_secs_f64(),
        version: env!("CARGO_PKG_VERSION").into(),
    };
    write_atomic(&outcome.manifest_path, json_text(&manifest)?.as_bytes())?;
    Ok(manifest)
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .parse()
            .map_err(|_| usage(format!("{THREADS_ENV} must be a positive integer, got `{v}`")))?;
        // a second initialization in the same process is harmless
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

/// Parses `argv` (including the program name), runs, and returns the exit code:
/// 0 success, 1 usage, 2 data validation, 3 numerical failure.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .target(env_logger::Target::Stderr)
        .try_init();
    let args: Vec<String> = argv
        .iter()
        .skip(1)
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    match configure_threads().and_then(|_| run_command(&cli.command, &args)) {
        Ok(_) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> std::result::Result<Cli, clap::Error> {
        Cli::try_parse_from(std::iter::once("spatial-lucid").chain(args.iter().copied()))
    }

    #[test]
    fn generate_requires_out() {
        assert!(parse(&["generate", "--benchmark", "fig1"]).is_err());
        assert_eq!(main_with_args(["spatial-lucid", "generate", "--benchmark", "fig1"]), 1);
    }

    #[test]
    fn explain_needs_exactly_one_scope() {
        let base = ["explain", "--checkpoint", "c", "--data", "d", "--out", "o"];
        assert!(parse(&base).is_err());
        let mut both = base.to_vec();
        both.extend(["--global", "--place-type", "PT-I"]);
        assert!(parse(&both).is_err());
    }

    #[test]
    fn strategy_flag_mismatch_is_usage_error() {
        let cli = parse(&[
            "train", "--strategy", "osfa", "--frozen-layers", "2", "--data", "d", "--out", "o",
        ])
        .unwrap();
        let Command::Train(a) = cli.command else { panic!() };
        let ds = crate::datagen::generate_benchmark(&BenchmarkConfig::fig1(2), 0).unwrap();
        let err = train_config(&a, &ds).unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn sidecar_names() {
        assert_eq!(sidecar(Path::new("/a/report.json")), PathBuf::from("/a/report.json.manifest.json"));
    }
}
