//! Command-line front end.
//!
//! Every invocation resolves its options (flags, then a `key=value` config
//! file, then `SATPIPE_SEED` for the seed), runs one subcommand, writes its
//! artifacts under `--out-dir` and records a JSON run manifest next to them.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 numeric failure.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use ndarray::Array2;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::analysis::{self, IdConfig, LayerReduction};
use crate::dbn::{self, InputKind, ModelFile, TrainConfig};
use crate::features::{self, FeatureConfig, FEATURE_NAMES};
use crate::network::FinetuneConfig;
use crate::normalize::{NormalizationMode, NormalizationStats};
use crate::patchio::{self, Dataset, Format, SyntheticSpec};
use crate::pipeline::{self, PreparedInputs};
use crate::sdae::SdaeConfig;
use crate::{Error, Result, RNG_ALGORITHM};

static QUIET: AtomicBool = AtomicBool::new(false);

/// Prints a human-readable summary line unless `--quiet` was given.
macro_rules! say {
    ($($arg:tt)*) => {
        if !QUIET.load(Ordering::Relaxed) {
            println!($($arg)*);
        }
    };
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

/// Environment variable consulted when no seed is given.
pub const SEED_ENV: &str = "SATPIPE_SEED";

#[derive(Debug, Parser, Serialize)]
#[command(name = "satpipe", version, about = "Satellite patch classification pipeline")]
pub struct Cli {
    /// Directory for all outputs (default: ./runs/<unix-seconds>).
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,

    /// Plain-text `key=value` file; keys are long flag names. Flags win.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,

    /// Seed for every random choice (falls back to SATPIPE_SEED, then 0).
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Suppress summary output.
    #[arg(long, short, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
pub enum Command {
    /// Generate, convert or split patch datasets.
    #[command(subcommand)]
    Dataset(DatasetCommand),
    /// Extract the 22 features into a CSV.
    Extract(ExtractArgs),
    /// Train a classifier.
    #[command(subcommand)]
    Train(TrainCommand),
    /// Evaluate a trained model on a labeled dataset.
    Eval(EvalArgs),
    /// Rank features by distribution separability.
    Rank(RankArgs),
    /// Per-column distribution separability of features or raw pixels.
    Separability(InputArgs),
    /// Separability of the mean activation of each hidden layer.
    Layersep(LayersepArgs),
    /// Intrinsic dimension of features or raw pixels.
    Id(IdArgs),
    /// Relative volume of the inscribed hypersphere for n = 1..=max-n.
    Hypersphere(HypersphereArgs),
    /// Train and analyse a grid of models and emit table-shaped results.
    Report(ReportArgs),
}

#[derive(Debug, Subcommand, Serialize)]
pub enum DatasetCommand {
    Gen(GenArgs),
    Convert(ConvertArgs),
    Split(SplitArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct GenArgs {
    #[arg(long, default_value_t = 4)]
    pub classes: usize,
    #[arg(long, default_value_t = 100)]
    pub per_class: usize,
    #[arg(long, default_value_t = patchio::PATCH_SIZE)]
    pub size: usize,
    #[arg(long, default_value = "dataset.satbin")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatArg::Satbin)]
    pub format: FormatArg,
}

#[derive(Debug, Args, Serialize)]
pub struct ConvertArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub from: FormatArg,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, value_enum)]
    pub to: FormatArg,
}

#[derive(Debug, Args, Serialize)]
pub struct SplitArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 0.8)]
    pub fraction: f64,
    #[arg(long, default_value = "train.satbin")]
    pub train_out: PathBuf,
    #[arg(long, default_value = "test.satbin")]
    pub test_out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FormatArg {
    Satbin,
    Csv,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Satbin => Format::Satbin,
            FormatArg::Csv => Format::Csv,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct DataArgs {
    /// Dataset file.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatArg::Satbin)]
    pub data_format: FormatArg,
}

#[derive(Debug, Args, Serialize)]
pub struct FeatureArgs {
    /// Co-occurrence quantization levels.
    #[arg(long, default_value_t = 8)]
    pub levels: usize,
    /// Feature-extraction threads (default: available parallelism).
    #[arg(long)]
    pub workers: Option<usize>,
}

impl FeatureArgs {
    fn config(&self) -> FeatureConfig {
        FeatureConfig {
            levels: self.levels,
            ..FeatureConfig::default()
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct ExtractArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub features: FeatureArgs,
    #[arg(long, default_value = "features.csv")]
    pub out: PathBuf,
    /// Also write min-max normalized features and their statistics.
    #[arg(long)]
    pub normalize: bool,
}

#[derive(Debug, Subcommand, Serialize)]
pub enum TrainCommand {
    /// DBN on the 22 normalized features.
    Deepsat(TrainArgs),
    /// DBN on raw scaled pixels.
    DbnRaw(TrainArgs),
    /// Stacked denoising autoencoder.
    Sdae(SdaeArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct FinetuneArgs {
    #[arg(long, default_value_t = 0.01)]
    pub finetune_lr: f64,
    #[arg(long, default_value_t = 0.5)]
    pub finetune_momentum: f64,
    #[arg(long, default_value_t = 500)]
    pub max_finetune_epochs: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub l2: f64,
    #[arg(long, default_value_t = 0.1)]
    pub validation_fraction: f64,
    #[arg(long, default_value_t = 20)]
    pub patience: usize,
    #[arg(long, default_value_t = 100)]
    pub batch_size: usize,
}

impl FinetuneArgs {
    fn config(&self) -> FinetuneConfig {
        FinetuneConfig {
            finetune_learning_rate: self.finetune_lr,
            finetune_momentum: self.finetune_momentum,
            max_finetune_epochs: self.max_finetune_epochs,
            l2_coefficient: self.l2,
            validation_fraction: self.validation_fraction,
            early_stopping_patience: self.patience,
            batch_size: self.batch_size,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub features: FeatureArgs,
    /// Hidden layer widths, comma separated (default 50,50 for deepsat and
    /// 100,100,100 for dbn-raw).
    #[arg(long, value_delimiter = ',')]
    pub layers: Option<Vec<usize>>,
    #[arg(long, default_value_t = 1)]
    pub cd_steps: usize,
    #[arg(long, default_value_t = 0.05)]
    pub rbm_lr: f64,
    #[arg(long, default_value_t = 30)]
    pub rbm_epochs: usize,
    #[command(flatten)]
    pub finetune: FinetuneArgs,
    #[arg(long, default_value = "model.json")]
    pub model_out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum InputArg {
    Features,
    Raw,
}

#[derive(Debug, Args, Serialize)]
pub struct SdaeArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub features: FeatureArgs,
    #[arg(long, value_enum, default_value_t = InputArg::Raw)]
    pub input: InputArg,
    #[arg(long, value_delimiter = ',', default_value = "100,100")]
    pub layers: Vec<usize>,
    #[arg(long, default_value_t = 0.25)]
    pub corruption: f64,
    /// Pretraining step size (default 0.005 on features, 0.0005 on raw pixels).
    #[arg(long)]
    pub sdae_lr: Option<f64>,
    #[arg(long, default_value_t = 0.9)]
    pub sdae_momentum: f64,
    #[arg(long, default_value_t = 30)]
    pub sdae_epochs: usize,
    #[command(flatten)]
    pub finetune: FinetuneArgs,
    #[arg(long, default_value = "model.json")]
    pub model_out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormArg {
    /// Normalize the evaluated features with their own statistics.
    Separate,
    /// Reuse the training statistics stored in the model.
    TrainStats,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub features: FeatureArgs,
    #[arg(long, value_enum, default_value_t = NormArg::Separate)]
    pub norm: NormArg,
    #[arg(long, default_value = "eval.json")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct RankArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub features: FeatureArgs,
    /// Rank the wider candidate pool instead of the 22 features.
    #[arg(long)]
    pub candidates: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct InputArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub features: FeatureArgs,
    #[arg(long, value_enum, default_value_t = InputArg::Features)]
    pub input: InputArg,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReductionArg {
    SampleMean,
    UnitAverage,
}

#[derive(Debug, Args, Serialize)]
pub struct LayersepArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub features: FeatureArgs,
    #[arg(long, value_enum, default_value_t = ReductionArg::SampleMean)]
    pub reduction: ReductionArg,
}

#[derive(Debug, Args, Serialize)]
pub struct IdArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long, default_value_t = 10)]
    pub rounds: usize,
    #[arg(long, default_value_t = 1000)]
    pub sample_size: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct HypersphereArgs {
    #[arg(long, default_value_t = 20)]
    pub max_n: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct ReportArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[command(flatten)]
    pub features: FeatureArgs,
    /// DeepSat architectures as `<neurons>x<layers>`, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "50x2")]
    pub deepsat_grid: Vec<String>,
    /// Raw-pixel DBN architectures.
    #[arg(long, value_delimiter = ',', default_value = "100x3")]
    pub raw_grid: Vec<String>,
    /// Raw-pixel SDAE architectures (empty to skip).
    #[arg(long, value_delimiter = ',', default_value = "")]
    pub sdae_grid: Vec<String>,
    #[arg(long, default_value_t = 30)]
    pub rbm_epochs: usize,
    #[arg(long, default_value_t = 30)]
    pub sdae_epochs: usize,
    #[command(flatten)]
    pub finetune: FinetuneArgs,
}

/// Hash of an input or output file.
#[derive(Debug, Clone, Serialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

/// Record of one run, sufficient to repeat it.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub argv: Vec<String>,
    pub config: serde_json::Value,
    pub seed: u64,
    pub rng: String,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub duration_seconds: f64,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(hex::encode(Sha256::digest(fs::read(path)?)))
}

struct Run {
    out_dir: PathBuf,
    seed: u64,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

impl Run {
    fn input(&mut self, path: &Path) -> PathBuf {
        self.inputs.push(path.to_path_buf());
        path.to_path_buf()
    }

    /// Output path under the run directory (absolute paths are kept).
    fn output(&mut self, name: &Path) -> Result<PathBuf> {
        let path = if name.is_absolute() { name.to_path_buf() } else { self.out_dir.join(name) };
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        self.outputs.push(path.clone());
        Ok(path)
    }

    fn write_json(&mut self, name: &str, value: &impl Serialize) -> Result<PathBuf> {
        let path = self.output(Path::new(name))?;
        fs::write(&path, serde_json::to_string_pretty(value)?)?;
        Ok(path)
    }

    fn load(&mut self, args: &DataArgs) -> Result<Dataset> {
        let path = self.input(&args.data);
        patchio::load_dataset(path, args.data_format.into())
    }
}

/// Maps an error to the documented exit code.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) => EXIT_USAGE,
        Error::Numeric(_) => EXIT_NUMERIC,
        _ => EXIT_DATA,
    }
}

/// Parses `key=value` lines; `#` starts a comment.
pub fn parse_config_file(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("config line {}: expected key=value", n + 1)))?;
        out.push((key.trim().replace('_', "-"), value.trim().to_string()));
    }
    Ok(out)
}

/// Appends config-file values for flags the leaf subcommand accepts and the
/// command line did not set.
fn merge_config(argv: Vec<OsString>) -> std::result::Result<Vec<OsString>, clap::Error> {
    let matches = Cli::command().try_get_matches_from(&argv)?;
    let Some(config_path) = matches.get_one::<PathBuf>("config") else {
        return Ok(argv);
    };
    let text = fs::read_to_string(config_path).map_err(|e| {
        Cli::command().error(clap::error::ErrorKind::Io, format!("cannot read {}: {e}", config_path.display()))
    })?;
    let entries = parse_config_file(&text)
        .map_err(|e| Cli::command().error(clap::error::ErrorKind::InvalidValue, e.to_string()))?;

    let mut cmd = Cli::command();
    cmd.build();
    let mut leaf = &cmd;
    let mut m = &matches;
    while let Some((name, sub)) = m.subcommand() {
        leaf = leaf.find_subcommand(name).expect("parsed subcommand exists");
        m = sub;
    }
    let accepted: Vec<String> = leaf.get_arguments().filter_map(|a| a.get_long().map(str::to_string)).collect();
    let given: Vec<String> = argv
        .iter()
        .filter_map(|a| a.to_str())
        .filter_map(|a| a.strip_prefix("--"))
        .map(|a| a.split('=').next().unwrap_or(a).to_string())
        .collect();

    let mut merged = argv;
    for (key, value) in entries {
        if key == "config" || given.contains(&key) {
            continue;
        }
        if !accepted.contains(&key) {
            return Err(Cli::command().error(
                clap::error::ErrorKind::UnknownArgument,
                format!("config key `{key}` is not accepted by this subcommand"),
            ));
        }
        if value == "true" {
            merged.push(format!("--{key}").into());
        } else if value != "false" {
            merged.push(format!("--{key}={value}").into());
        }
    }
    Ok(merged)
}

/// Runs the CLI on `argv` (including the program name) and returns the exit
/// code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let parsed = merge_config(argv.clone()).and_then(|merged| Cli::try_parse_from(merged));
    let cli = match parsed {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let argv_strings = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    match execute(&cli, argv_strings) {
        Ok(manifest) => {
            log::info!("wrote {} outputs", manifest.outputs.len());
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn resolve_seed(flag: Option<u64>) -> Result<u64> {
    if let Some(seed) = flag {
        return Ok(seed);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| Error::Config(format!("{SEED_ENV}={v:?} is not a u64"))),
        Err(_) => Ok(0),
    }
}

fn subcommand_name(command: &Command) -> String {
    match command {
        Command::Dataset(DatasetCommand::Gen(_)) => "dataset gen",
        Command::Dataset(DatasetCommand::Convert(_)) => "dataset convert",
        Command::Dataset(DatasetCommand::Split(_)) => "dataset split",
        Command::Extract(_) => "extract",
        Command::Train(TrainCommand::Deepsat(_)) => "train deepsat",
        Command::Train(TrainCommand::DbnRaw(_)) => "train dbn-raw",
        Command::Train(TrainCommand::Sdae(_)) => "train sdae",
        Command::Eval(_) => "eval",
        Command::Rank(_) => "rank",
        Command::Separability(_) => "separability",
        Command::Layersep(_) => "layersep",
        Command::Id(_) => "id",
        Command::Hypersphere(_) => "hypersphere",
        Command::Report(_) => "report",
    }
    .to_string()
}

/// Executes a parsed command and writes its manifest.
pub fn execute(cli: &Cli, argv: Vec<String>) -> Result<RunManifest> {
    let start = Instant::now();
    QUIET.store(cli.quiet, Ordering::Relaxed);
    let seed = resolve_seed(cli.seed)?;
    let out_dir = match &cli.out_dir {
        Some(dir) => dir.clone(),
        None => {
            let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
            PathBuf::from("runs").join(secs.to_string())
        }
    };
    fs::create_dir_all(&out_dir)?;
    let mut run = Run {
        out_dir,
        seed,
        inputs: Vec::new(),
        outputs: Vec::new(),
    };

    match &cli.command {
        Command::Dataset(cmd) => dataset(&mut run, cmd)?,
        Command::Extract(args) => extract(&mut run, args)?,
        Command::Train(cmd) => train(&mut run, cmd)?,
        Command::Eval(args) => eval(&mut run, args)?,
        Command::Rank(args) => rank(&mut run, args)?,
        Command::Separability(args) => separability(&mut run, args)?,
        Command::Layersep(args) => layersep(&mut run, args)?,
        Command::Id(args) => id(&mut run, args)?,
        Command::Hypersphere(args) => hypersphere(&mut run, args)?,
        Command::Report(args) => report(&mut run, args)?,
    }

    let name = subcommand_name(&cli.command);
    let digests = |paths: &[PathBuf]| -> Result<Vec<FileDigest>> {
        paths
            .iter()
            .map(|p| Ok(FileDigest { path: p.clone(), sha256: sha256_file(p)? }))
            .collect()
    };
    let mut config = serde_json::to_value(cli)?;
    config["seed"] = seed.into();
    let manifest = RunManifest {
        subcommand: name.clone(),
        argv,
        config,
        seed,
        rng: RNG_ALGORITHM.to_string(),
        inputs: digests(&run.inputs)?,
        outputs: digests(&run.outputs)?,
        duration_seconds: start.elapsed().as_secs_f64(),
    };
    let path = run.out_dir.join(format!("manifest-{}.json", name.replace(' ', "-")));
    fs::write(path, serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

fn dataset(run: &mut Run, cmd: &DatasetCommand) -> Result<()> {
    match cmd {
        DatasetCommand::Gen(args) => {
            let spec = SyntheticSpec {
                width: args.size,
                height: args.size,
                ..SyntheticSpec::with_classes(args.classes, args.per_class)
            };
            let data = patchio::generate_synthetic(&spec, run.seed)?;
            let out = run.output(&args.out)?;
            patchio::save_dataset(&data, &out, args.format.into())?;
            say!("generated {} patches into {}", data.len(), out.display());
        }
        DatasetCommand::Convert(args) => {
            let input = run.input(&args.input);
            let data = patchio::load_dataset(input, args.from.into())?;
            let out = run.output(&args.output)?;
            patchio::save_dataset(&data, &out, args.to.into())?;
            say!("converted {} patches into {}", data.len(), out.display());
        }
        DatasetCommand::Split(args) => {
            let input = run.input(&args.data);
            let data = patchio::load_dataset(input, Format::Satbin)?;
            let (train, test) = patchio::shuffle_split(&data, args.fraction, run.seed)?;
            let train_out = run.output(&args.train_out)?;
            patchio::save_dataset(&train, &train_out, Format::Satbin)?;
            let test_out = run.output(&args.test_out)?;
            patchio::save_dataset(&test, &test_out, Format::Satbin)?;
            say!("split {} patches into {} train / {} test", data.len(), train.len(), test.len());
        }
    }
    Ok(())
}

fn extract(run: &mut Run, args: &ExtractArgs) -> Result<()> {
    let data = run.load(&args.data)?;
    let matrix = features::extract_batch(&data, &args.features.config(), args.features.workers)?;
    let out = run.output(&args.out)?;
    features::write_feature_csv(BufWriter::new(fs::File::create(&out)?), &matrix, data.labels())?;
    if args.normalize {
        let stats = NormalizationStats::fit(&matrix)?;
        let normalized = stats.apply(&matrix)?;
        let path = run.output(Path::new("features_normalized.csv"))?;
        features::write_feature_csv(BufWriter::new(fs::File::create(&path)?), &normalized, data.labels())?;
        let path = run.output(Path::new("normalization.csv"))?;
        stats.write_csv(BufWriter::new(fs::File::create(&path)?), &FEATURE_NAMES)?;
    }
    say!("extracted {}×{} features into {}", matrix.nrows(), matrix.ncols(), out.display());
    Ok(())
}

/// Single-set inputs for a model: feature inputs are normalized with the
/// set's own statistics, or with `stats` when given.
fn inputs_for(
    kind: InputKind,
    data: &Dataset,
    features: &FeatureArgs,
    stats: Option<&NormalizationStats>,
) -> Result<(Array2<f64>, Option<NormalizationStats>)> {
    match kind {
        InputKind::RawPixels => Ok((data.pixel_matrix(), None)),
        InputKind::Features22 => {
            let raw = features::extract_batch(data, &features.config(), features.workers)?;
            match stats {
                Some(s) => Ok((s.apply(&raw)?, Some(s.clone()))),
                None => {
                    let own = NormalizationStats::fit(&raw)?;
                    Ok((own.apply(&raw)?, Some(own)))
                }
            }
        }
        InputKind::Custom => Err(Error::Config("models with custom inputs cannot read patch datasets".into())),
    }
}

fn check_finite(x: &Array2<f64>) -> Result<()> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("input matrix contains NaN or infinite values".into()));
    }
    Ok(())
}

fn train(run: &mut Run, cmd: &TrainCommand) -> Result<()> {
    let (file, report_csv) = match cmd {
        TrainCommand::Deepsat(args) | TrainCommand::DbnRaw(args) => {
            let kind = match cmd {
                TrainCommand::Deepsat(_) => InputKind::Features22,
                _ => InputKind::RawPixels,
            };
            let data = run.load(&args.data)?;
            let (x, stats) = inputs_for(kind, &data, &args.features, None)?;
            check_finite(&x)?;
            let default_layers = match kind {
                InputKind::RawPixels => vec![100, 100, 100],
                _ => vec![50, 50],
            };
            let config = TrainConfig {
                layer_sizes: args.layers.clone().unwrap_or(default_layers),
                cd_steps: args.cd_steps,
                rbm_learning_rate: args.rbm_lr,
                rbm_epochs: args.rbm_epochs,
                finetune: args.finetune.config(),
                seed: run.seed,
                ..TrainConfig::default()
            };
            let (mut model, report) = dbn::train_dbn(&x, data.labels(), data.scheme(), kind, &config)?;
            model.normalization = stats;
            run.write_json("pretrain_report.json", &report.pretrain)?;
            print_training(&report.finetune);
            (ModelFile::new(model, &config, run.seed)?, report.finetune)
        }
        TrainCommand::Sdae(args) => {
            let kind = match args.input {
                InputArg::Features => InputKind::Features22,
                InputArg::Raw => InputKind::RawPixels,
            };
            let data = run.load(&args.data)?;
            let (x, stats) = inputs_for(kind, &data, &args.features, None)?;
            check_finite(&x)?;
            let defaults = pipeline::sdae_config(kind, args.layers.clone(), run.seed);
            let config = SdaeConfig {
                layer_sizes: args.layers.clone(),
                corruption_fraction: args.corruption,
                learning_rate: args.sdae_lr.unwrap_or(defaults.learning_rate),
                momentum: args.sdae_momentum,
                epochs: args.sdae_epochs,
                finetune: args.finetune.config(),
                seed: run.seed,
            };
            let (mut model, report) = crate::sdae::train_sdae(&x, data.labels(), data.scheme(), kind, &config)?;
            model.normalization = stats;
            run.write_json("pretrain_report.json", &report.pretrain)?;
            print_training(&report.finetune);
            (ModelFile::new(model, &config, run.seed)?, report.finetune)
        }
    };
    let model_out = match cmd {
        TrainCommand::Deepsat(a) | TrainCommand::DbnRaw(a) => a.model_out.clone(),
        TrainCommand::Sdae(a) => a.model_out.clone(),
    };
    let path = run.output(&model_out)?;
    file.save(&path)?;
    let csv_path = run.output(Path::new("train_report.csv"))?;
    report_csv.write_csv(BufWriter::new(fs::File::create(&csv_path)?))?;
    say!("model written to {}", path.display());
    Ok(())
}

fn print_training(report: &crate::network::TrainReport) {
    say!(
        "fine-tuned {} epochs; best epoch {} with validation error {:.4}",
        report.epochs.len(),
        report.best_epoch,
        report.best_validation_error
    );
}

fn load_model(run: &mut Run, path: &Path) -> Result<ModelFile> {
    let path = run.input(path);
    ModelFile::load(path)
}

fn eval(run: &mut Run, args: &EvalArgs) -> Result<()> {
    let file = load_model(run, &args.model)?;
    let data = run.load(&args.data)?;
    let stats = match args.norm {
        NormArg::Separate => None,
        NormArg::TrainStats => Some(
            file.model
                .normalization
                .as_ref()
                .ok_or_else(|| Error::Config("model carries no normalization statistics".into()))?,
        ),
    };
    let (x, _) = inputs_for(file.model.input_kind, &data, &args.features, stats)?;
    check_finite(&x)?;
    let evaluation = dbn::evaluate(&file.model, &x, data.labels())?;
    run.write_json(args.out.to_string_lossy().as_ref(), &evaluation)?;
    say!("accuracy {:.4} on {} patches", evaluation.accuracy, data.len());
    Ok(())
}

fn rank(run: &mut Run, args: &RankArgs) -> Result<()> {
    let data = run.load(&args.data)?;
    let config = args.features.config();
    let ranking = if args.candidates {
        let rows = data
            .patches()
            .iter()
            .map(|p| features::extract_candidates(p, &config))
            .collect::<Result<Vec<_>>>()?;
        let names: Vec<String> = rows[0].iter().map(|(n, _)| n.clone()).collect();
        let matrix = Array2::from_shape_fn((rows.len(), names.len()), |(i, j)| rows[i][j].1);
        analysis::rank_features(&matrix, data.labels(), &names)?
    } else {
        let matrix = features::extract_batch(&data, &config, args.features.workers)?;
        analysis::rank_features(&matrix, data.labels(), &FEATURE_NAMES)?
    };
    let path = run.output(Path::new("ranking.csv"))?;
    ranking.write_csv(BufWriter::new(fs::File::create(&path)?))?;
    run.write_json("ranking.json", &ranking)?;
    for e in ranking.entries.iter().take(10) {
        say!("{:>3} {:<24} {:.4} {:.4} {:.4}", e.rank, e.feature, e.delta_mean, e.delta_sigma, e.d_s);
    }
    Ok(())
}

fn matrix_for(input: InputArg, data: &Dataset, features: &FeatureArgs) -> Result<(Array2<f64>, Vec<String>)> {
    match input {
        InputArg::Features => {
            let m = features::extract_batch(data, &features.config(), features.workers)?;
            let m = NormalizationStats::fit(&m)?.apply(&m)?;
            Ok((m, FEATURE_NAMES.iter().map(|s| s.to_string()).collect()))
        }
        InputArg::Raw => {
            let m = data.pixel_matrix();
            let names = (0..m.ncols()).map(|i| format!("px_{i}")).collect();
            Ok((m, names))
        }
    }
}

#[derive(Serialize)]
struct ColumnRow<'a> {
    column: &'a str,
    delta_mean: f64,
    delta_sigma: f64,
    d_s: f64,
}

fn separability(run: &mut Run, args: &InputArgs) -> Result<()> {
    let data = run.load(&args.data)?;
    let (matrix, names) = matrix_for(args.input, &data, &args.features)?;
    let reports = analysis::separability(&matrix, data.labels())?;
    let path = run.output(Path::new("separability.csv"))?;
    let mut writer = csv::Writer::from_path(&path)?;
    for (name, r) in names.iter().zip(&reports) {
        writer.serialize(ColumnRow { column: name, delta_mean: r.delta_mean, delta_sigma: r.delta_sigma, d_s: r.d_s })?;
    }
    writer.flush()?;
    let summary = analysis::summarize(&reports);
    run.write_json("separability_summary.json", &summary)?;
    say!(
        "mean distance between means {:.4}, mean std {:.4}, mean D_s {:.4}",
        summary.mean_delta_mean, summary.mean_delta_sigma, summary.mean_d_s
    );
    Ok(())
}

fn layersep(run: &mut Run, args: &LayersepArgs) -> Result<()> {
    let file = load_model(run, &args.model)?;
    let data = run.load(&args.data)?;
    let (x, _) = inputs_for(file.model.input_kind, &data, &args.features, None)?;
    let reduction = match args.reduction {
        ReductionArg::SampleMean => LayerReduction::SampleMean,
        ReductionArg::UnitAverage => LayerReduction::UnitAverage,
    };
    let values = analysis::layer_separability(&file.model, &x, data.labels(), reduction)?;
    let path = run.output(Path::new("layersep.csv"))?;
    let mut writer = csv::Writer::from_path(&path)?;
    writer.write_record(["layer", "d_s"])?;
    for (i, v) in values.iter().enumerate() {
        writer.write_record([(i + 1).to_string(), v.to_string()])?;
        say!("layer {}: D_s {v:.6}", i + 1);
    }
    writer.flush()?;
    Ok(())
}

fn id(run: &mut Run, args: &IdArgs) -> Result<()> {
    let data = run.load(&args.input.data)?;
    let (matrix, _) = matrix_for(args.input.input, &data, &args.input.features)?;
    let config = IdConfig {
        k: args.k,
        rounds: args.rounds,
        sample_size: args.sample_size,
        seed: run.seed,
    };
    let estimate = analysis::intrinsic_dimension(&matrix, &config)?;
    run.write_json("id.json", &estimate)?;
    say!("intrinsic dimension {:.3} (k = {}, {} points per round)", estimate.dimension, estimate.k, estimate.sample_size);
    Ok(())
}

fn hypersphere(run: &mut Run, args: &HypersphereArgs) -> Result<()> {
    let path = run.output(Path::new("hypersphere.csv"))?;
    let mut writer = csv::Writer::from_path(&path)?;
    writer.write_record(["n", "relative_volume"])?;
    for n in 1..=args.max_n {
        writer.write_record([n.to_string(), analysis::hypersphere_relative_volume(n)?.to_string()])?;
    }
    writer.flush()?;
    say!("wrote {} rows to {}", args.max_n, path.display());
    Ok(())
}

/// Parses `<neurons>x<layers>`.
pub fn parse_architecture(spec: &str) -> Result<Vec<usize>> {
    let (neurons, layers) = spec
        .trim()
        .split_once('x')
        .ok_or_else(|| Error::Config(format!("architecture {spec:?} must look like 50x2")))?;
    let parse = |s: &str| s.trim().parse::<usize>().map_err(|_| Error::Config(format!("bad architecture {spec:?}")));
    let (neurons, layers) = (parse(neurons)?, parse(layers)?);
    if neurons == 0 {
        return Err(Error::Config(format!("architecture {spec:?} has no neurons")));
    }
    Ok(vec![neurons; layers])
}

#[derive(Debug, Serialize)]
struct AccuracyRow {
    model: String,
    input: String,
    neurons: usize,
    layers: usize,
    accuracy: f64,
    best_epoch: usize,
}

#[derive(Debug, Serialize)]
struct LayerRow {
    model: String,
    architecture: String,
    layer: usize,
    d_s: f64,
}

#[derive(Debug, Serialize)]
struct ReportBundle {
    accuracy: Vec<AccuracyRow>,
    separability: BTreeMap<String, analysis::SeparabilitySummary>,
    ranking: analysis::FeatureRanking,
    layer_separability: Vec<LayerRow>,
    intrinsic_dimension: BTreeMap<String, f64>,
    hypersphere: Vec<(usize, f64)>,
}

fn report(run: &mut Run, args: &ReportArgs) -> Result<()> {
    let train_path = run.input(&args.train);
    let test_path = run.input(&args.test);
    let train = patchio::load_dataset(train_path, Format::Satbin)?;
    let test = patchio::load_dataset(test_path, Format::Satbin)?;
    let fconfig = args.features.config();
    let feats = pipeline::feature_inputs(&train, &test, &fconfig, NormalizationMode::Separate, args.features.workers)?;
    let pixels = pipeline::pixel_inputs(&train, &test);
    check_finite(&feats.train)?;

    let mut separability = BTreeMap::new();
    separability.insert("raw".to_string(), analysis::summarize(&analysis::separability(&pixels.train, train.labels())?));
    separability.insert("features".to_string(), analysis::summarize(&analysis::separability(&feats.train, train.labels())?));
    let ranking = analysis::rank_features(&feats.train, train.labels(), &FEATURE_NAMES)?;

    let id_config = IdConfig { seed: run.seed, ..IdConfig::default() };
    let mut intrinsic_dimension = BTreeMap::new();
    intrinsic_dimension.insert("raw".to_string(), analysis::intrinsic_dimension(&pixels.train, &id_config)?.dimension);
    intrinsic_dimension.insert("features".to_string(), analysis::intrinsic_dimension(&feats.train, &id_config)?.dimension);

    let mut accuracy = Vec::new();
    let mut layer_rows = Vec::new();
    let runs: Vec<(&str, &PreparedInputs, &Vec<String>)> = vec![
        ("deepsat", &feats, &args.deepsat_grid),
        ("dbn-raw", &pixels, &args.raw_grid),
        ("sdae", &pixels, &args.sdae_grid),
    ];
    for (name, inputs, grid) in runs {
        for arch in grid.iter().filter(|s| !s.trim().is_empty()) {
            let layers = parse_architecture(arch)?;
            let (model, report) = if name == "sdae" {
                let config = SdaeConfig {
                    epochs: args.sdae_epochs,
                    finetune: args.finetune.config(),
                    ..pipeline::sdae_config(inputs.kind, layers.clone(), run.seed)
                };
                let (m, r) = pipeline::train_sdae_on(inputs, &train, &config)?;
                (m, r.finetune)
            } else {
                let config = TrainConfig {
                    layer_sizes: layers.clone(),
                    rbm_epochs: args.rbm_epochs,
                    finetune: args.finetune.config(),
                    seed: run.seed,
                    ..TrainConfig::default()
                };
                let (m, r) = pipeline::train_dbn_on(inputs, &train, &config)?;
                (m, r.finetune)
            };
            let eval = dbn::evaluate(&model, &inputs.test, test.labels())?;
            say!("{name} {arch}: accuracy {:.4}", eval.accuracy);
            accuracy.push(AccuracyRow {
                model: name.to_string(),
                input: format!("{:?}", inputs.kind),
                neurons: layers.first().copied().unwrap_or(0),
                layers: layers.len(),
                accuracy: eval.accuracy,
                best_epoch: report.best_epoch,
            });
            let seps = analysis::layer_separability(&model, &inputs.test, test.labels(), LayerReduction::SampleMean)?;
            for (i, d_s) in seps.into_iter().enumerate() {
                layer_rows.push(LayerRow { model: name.to_string(), architecture: arch.clone(), layer: i + 1, d_s });
            }
        }
    }

    let hypersphere = (1..=20)
        .map(|n| Ok((n, analysis::hypersphere_relative_volume(n)?)))
        .collect::<Result<Vec<_>>>()?;

    let path = run.output(Path::new("accuracy.csv"))?;
    let mut writer = csv::Writer::from_path(&path)?;
    for row in &accuracy {
        writer.serialize(row)?;
    }
    writer.flush()?;
    let path = run.output(Path::new("ranking.csv"))?;
    ranking.write_csv(BufWriter::new(fs::File::create(&path)?))?;
    let path = run.output(Path::new("layersep.csv"))?;
    let mut writer = csv::Writer::from_path(&path)?;
    for row in &layer_rows {
        writer.serialize(row)?;
    }
    writer.flush()?;

    run.write_json(
        "report.json",
        &ReportBundle {
            accuracy,
            separability,
            ranking,
            layer_separability: layer_rows,
            intrinsic_dimension,
            hypersphere,
        },
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_file_parsing() {
        let entries = parse_config_file("# comment\nseed = 7\nrbm_epochs=3 # trailing\n\n").unwrap();
        assert_eq!(entries, vec![("seed".into(), "7".into()), ("rbm-epochs".into(), "3".into())]);
        assert!(parse_config_file("novalue").is_err());
    }

    #[test]
    fn architecture_parsing() {
        assert_eq!(parse_architecture("50x2").unwrap(), vec![50, 50]);
        assert_eq!(parse_architecture("100x0").unwrap(), Vec::<usize>::new());
        assert!(parse_architecture("50").is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Numeric("nan".into())), EXIT_NUMERIC);
        assert_eq!(exit_code(&Error::Format("magic".into())), EXIT_DATA);
        assert_eq!(exit_code(&Error::Config("x".into())), EXIT_USAGE);
        assert_eq!(run(["satpipe", "--bogus"]), EXIT_USAGE);
        assert_eq!(run(["satpipe", "hypersphere", "--nope"]), EXIT_USAGE);
    }

    #[test]
    fn clap_definition_is_consistent() {
        Cli::command().debug_assert();
    }
}
