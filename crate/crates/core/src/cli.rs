//! The `detfuse` command line.
//!
//! Exit status is 0 on success, 1 for usage, validation and configuration
//! errors, and 2 for I/O errors. Diagnostics go to standard error; data goes
//! to the `--out` files or, when a subcommand allows omitting `--out`, to
//! standard output.

use std::ffi::OsString;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::ensemble::{run_ensemble, EnsembleConfig, VotingStrategy};
use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalConfig, EvalReport, Interpolation, IouThreshold};
use crate::io::{self, BoxEncoding};
use crate::model::{class_distribution, split_manifest};
use crate::nms::{nms_file, NmsConfig, NmsMode};
use crate::report::{render, BenchmarkTable, Report, ReportFormat};
use crate::synth::{generate, PerturbConfig, ScoreModel};

#[derive(Debug, Parser)]
#[command(name = "detfuse", version, about = "Detection ensembling and mAP evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fuse several detectors' outputs by voting.
    Fuse(FuseArgs),
    /// Score one detection file against ground truth.
    Eval(EvalArgs),
    /// Tabulate mAP of several detection files or reports.
    Benchmark(BenchmarkArgs),
    /// Per-class annotation counts.
    Stats(StatsArgs),
    /// Seeded image-level train/test split.
    Split(SplitArgs),
    /// Synthesize a detector's output from ground truth.
    Gen(GenArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Strategy {
    Affirmative,
    Consensus,
    Unanimous,
}

impl From<Strategy> for VotingStrategy {
    fn from(s: Strategy) -> Self {
        match s {
            Strategy::Affirmative => VotingStrategy::Affirmative,
            Strategy::Consensus => VotingStrategy::Consensus,
            Strategy::Unanimous => VotingStrategy::Unanimous,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mode {
    Aware,
    Agnostic,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
    Svg,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Json => ReportFormat::Json,
            Format::Csv => ReportFormat::Csv,
            Format::Svg => ReportFormat::Svg,
        }
    }
}

#[derive(Debug, Args)]
struct NmsArgs {
    /// IoU at or above which a lower-scored box is suppressed.
    #[arg(long, value_name = "F")]
    nms_iou: Option<f64>,
    #[arg(long, value_enum, value_name = "MODE")]
    nms_mode: Option<Mode>,
    /// Drop detections scoring below this before suppression.
    #[arg(long, value_name = "F")]
    score_floor: Option<f64>,
    /// Skip per-model suppression.
    #[arg(long, conflicts_with_all = ["nms_iou", "nms_mode", "score_floor"])]
    no_nms: bool,
}

impl NmsArgs {
    fn any_set(&self) -> bool {
        self.nms_iou.is_some() || self.nms_mode.is_some() || self.score_floor.is_some()
    }

    fn resolve(&self) -> Result<Option<NmsConfig>> {
        if self.no_nms {
            return Ok(None);
        }
        let defaults = NmsConfig::default();
        let cfg = NmsConfig {
            iou_threshold: self.nms_iou.unwrap_or(defaults.iou_threshold),
            mode: match self.nms_mode {
                Some(Mode::Agnostic) => NmsMode::ClassAgnostic,
                Some(Mode::Aware) | None => NmsMode::ClassAware,
            },
            score_floor: self.score_floor.unwrap_or(defaults.score_floor),
        };
        cfg.validate()?;
        Ok(Some(cfg))
    }
}

fn nms_provenance(cfg: &Option<NmsConfig>) -> (String, String) {
    let value = match cfg {
        None => "off".to_string(),
        Some(c) => format!(
            "iou={};mode={};floor={}",
            c.iou_threshold,
            match c.mode {
                NmsMode::ClassAware => "aware",
                NmsMode::ClassAgnostic => "agnostic",
            },
            c.score_floor
        ),
    };
    ("nms".into(), value)
}

#[derive(Debug, Args)]
struct FuseArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, num_args = 1.., required = true)]
    detections: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "consensus")]
    strategy: Strategy,
    #[arg(long, default_value_t = 0.5)]
    group_iou: f64,
    /// Input boxes are `[x1, y1, x2, y2]`.
    #[arg(long)]
    corners: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    nms: NmsArgs,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    detections: PathBuf,
    /// Comma-separated IoU thresholds.
    #[arg(long, default_value = "0.25,0.5,0.75")]
    iou: String,
    /// 101-point recall sampling instead of all-point AP.
    #[arg(long = "coco-101")]
    coco_101: bool,
    #[arg(long)]
    corners: bool,
    /// Report file; format follows the extension unless `--format` is given.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Suppression is applied only when one of these flags is given.
    #[command(flatten)]
    nms: NmsArgs,
}

#[derive(Debug, Args)]
struct BenchmarkArgs {
    /// Evaluation report JSON files to tabulate.
    #[arg(long, num_args = 1.., conflicts_with_all = ["manifest", "detections"])]
    reports: Vec<PathBuf>,
    #[arg(long, requires = "detections")]
    manifest: Option<PathBuf>,
    #[arg(long, num_args = 1.., requires = "manifest")]
    detections: Vec<PathBuf>,
    /// Row names, one per input; defaults to each input's model id.
    #[arg(long, num_args = 1..)]
    names: Vec<String>,
    /// Run labels, one per input, used as plot x positions.
    #[arg(long, num_args = 1..)]
    runs: Vec<String>,
    #[arg(long, default_value = "0.25,0.5,0.75")]
    iou: String,
    #[arg(long = "coco-101")]
    coco_101: bool,
    #[arg(long)]
    corners: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Debug, Args)]
struct StatsArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    corners: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SplitArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value_t = 0.2)]
    test_fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    corners: bool,
    #[arg(long)]
    out_train: PathBuf,
    #[arg(long)]
    out_test: PathBuf,
}

#[derive(Debug, Args)]
struct GenArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.1)]
    jitter: f64,
    #[arg(long, default_value_t = 0.1)]
    drop: f64,
    #[arg(long, default_value_t = 0.5)]
    fp: f64,
    #[arg(long, default_value = "synth")]
    model_id: String,
    #[arg(long)]
    corners: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn encoding(corners: bool) -> BoxEncoding {
    if corners {
        BoxEncoding::Corners
    } else {
        BoxEncoding::Xywh
    }
}

fn parse_thresholds(list: &str) -> Result<Vec<IouThreshold>> {
    let thresholds = list
        .split(',')
        .map(|s| {
            let s = s.trim();
            s.parse::<f64>()
                .map_err(|_| Error::Config(format!("invalid IoU threshold `{s}`")))
                .and_then(IouThreshold::new)
        })
        .collect::<Result<Vec<_>>>()?;
    if thresholds.is_empty() {
        return Err(Error::Config("at least one IoU threshold is required".into()));
    }
    Ok(thresholds)
}

fn interpolation(coco_101: bool) -> Interpolation {
    if coco_101 {
        Interpolation::Coco101
    } else {
        Interpolation::AllPoint
    }
}

fn resolve_format(out: Option<&Path>, flag: Option<Format>, fallback: ReportFormat) -> ReportFormat {
    flag.map(Into::into)
        .or_else(|| out.and_then(ReportFormat::from_extension))
        .unwrap_or(fallback)
}

fn emit(out: Option<&Path>, contents: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, contents).map_err(|e| Error::io(path, e)),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(contents.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| Error::io("<stdout>", e))
        }
    }
}

fn fuse(args: FuseArgs) -> Result<()> {
    let cfg = EnsembleConfig {
        strategy: args.strategy.into(),
        group_iou: args.group_iou,
        nms: args.nms.resolve()?,
    };
    cfg.validate()?;
    let enc = encoding(args.corners);
    let manifest = io::load_manifest_with(&args.manifest, enc)?;
    let files = args
        .detections
        .iter()
        .map(|p| io::load_detections_with(p, &manifest, enc))
        .collect::<Result<Vec<_>>>()?;
    let fused = run_ensemble(&files, &manifest, &cfg)?;
    emit(args.out.as_deref(), &io::detections_to_json(&fused))
}

fn eval(args: EvalArgs) -> Result<()> {
    let nms = if args.nms.any_set() {
        args.nms.resolve()?
    } else {
        None
    };
    let cfg = EvalConfig {
        thresholds: parse_thresholds(&args.iou)?,
        interpolation: interpolation(args.coco_101),
        provenance: vec![
            nms_provenance(&nms),
            ("corners".into(), args.corners.to_string()),
        ],
    };
    let format = resolve_format(args.out.as_deref(), args.format, ReportFormat::Json);
    let enc = encoding(args.corners);
    let manifest = io::load_manifest_with(&args.manifest, enc)?;
    let mut dets = io::load_detections_with(&args.detections, &manifest, enc)?;
    if let Some(nms) = &nms {
        dets = nms_file(&dets, nms)?;
    }
    let report = evaluate(&dets, &manifest, &cfg)?;
    emit(args.out.as_deref(), &render(Report::Eval(&report), format))
}

fn benchmark(args: BenchmarkArgs) -> Result<()> {
    let thresholds = parse_thresholds(&args.iou)?;
    let format = resolve_format(args.out.as_deref(), args.format, ReportFormat::Csv);
    let n_inputs = if args.reports.is_empty() {
        args.detections.len()
    } else {
        args.reports.len()
    };
    if n_inputs == 0 {
        return Err(Error::Config("benchmark needs --reports or --manifest with --detections".into()));
    }
    for (flag, len) in [("--names", args.names.len()), ("--runs", args.runs.len())] {
        if len != 0 && len != n_inputs {
            return Err(Error::Config(format!(
                "{flag} has {len} entries for {n_inputs} inputs"
            )));
        }
    }

    let reports: Vec<EvalReport> = if !args.reports.is_empty() {
        args.reports.iter().map(io::load_report).collect::<Result<_>>()?
    } else {
        let manifest_path = args.manifest.as_ref().expect("clap enforces --manifest");
        let enc = encoding(args.corners);
        let manifest = io::load_manifest_with(manifest_path, enc)?;
        let cfg = EvalConfig {
            thresholds: thresholds.clone(),
            interpolation: interpolation(args.coco_101),
            provenance: vec![("corners".into(), args.corners.to_string())],
        };
        args.detections
            .iter()
            .map(|p| {
                let dets = io::load_detections_with(p, &manifest, enc)?;
                evaluate(&dets, &manifest, &cfg)
            })
            .collect::<Result<_>>()?
    };

    let mut table = BenchmarkTable::new(&thresholds);
    for (i, report) in reports.iter().enumerate() {
        let name = args
            .names
            .get(i)
            .cloned()
            .unwrap_or_else(|| report.detections_id.clone());
        table.push_report(name, args.runs.get(i).cloned(), report)?;
    }
    emit(args.out.as_deref(), &render(Report::Benchmark(&table), format))
}

fn stats(args: StatsArgs) -> Result<()> {
    let manifest = io::load_manifest_with(&args.manifest, encoding(args.corners))?;
    emit(args.out.as_deref(), &class_distribution(&manifest).to_csv())
}

fn split(args: SplitArgs) -> Result<()> {
    if !(args.test_fraction > 0.0 && args.test_fraction < 1.0) {
        return Err(Error::Config(format!(
            "--test-fraction must lie in (0, 1), got {}",
            args.test_fraction
        )));
    }
    let manifest = io::load_manifest_with(&args.manifest, encoding(args.corners))?;
    let (train, test) = split_manifest(&manifest, args.test_fraction, args.seed)?;
    emit(Some(&args.out_train), &io::manifest_to_json(&train))?;
    emit(Some(&args.out_test), &io::manifest_to_json(&test))
}

fn gen(args: GenArgs) -> Result<()> {
    let cfg = PerturbConfig {
        seed: args.seed,
        jitter: args.jitter,
        drop_rate: args.drop,
        fp_rate: args.fp,
        score_model: ScoreModel::default(),
    };
    cfg.validate()?;
    let manifest = io::load_manifest_with(&args.manifest, encoding(args.corners))?;
    let out = generate(&manifest, &cfg, &args.model_id)?;
    emit(args.out.as_deref(), &io::detections_to_json(&out))
}

struct StderrLogger;

impl log::Log for StderrLogger {
    fn enabled(&self, metadata: &log::Metadata<'_>) -> bool {
        metadata.level() <= log::Level::Warn
    }

    fn log(&self, record: &log::Record<'_>) {
        if self.enabled(record.metadata()) {
            eprintln!("detfuse: {}: {}", record.level().as_str().to_lowercase(), record.args());
        }
    }

    fn flush(&self) {}
}

static LOGGER: StderrLogger = StderrLogger;

/// Runs one invocation. `args` includes the program name.
pub fn run<I, T>(args: I) -> std::result::Result<(), RunError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(RunError::Usage)?;
    let outcome = match cli.command {
        Command::Fuse(a) => fuse(a),
        Command::Eval(a) => eval(a),
        Command::Benchmark(a) => benchmark(a),
        Command::Stats(a) => stats(a),
        Command::Split(a) => split(a),
        Command::Gen(a) => gen(a),
    };
    outcome.map_err(RunError::Failed)
}

#[derive(Debug)]
pub enum RunError {
    Usage(clap::Error),
    Failed(Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Usage(e) if !e.use_stderr() => 0,
            RunError::Usage(_) => 1,
            RunError::Failed(e) if e.is_io() => 2,
            RunError::Failed(_) => 1,
        }
    }
}

/// Entry point used by the binary; returns the process exit code.
pub fn main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    if log::set_logger(&LOGGER).is_ok() {
        log::set_max_level(log::LevelFilter::Warn);
    }
    match run(args) {
        Ok(()) => 0,
        Err(err) => {
            let code = err.exit_code();
            match &err {
                // --help and --version land here and print to stdout.
                RunError::Usage(e) => {
                    let _ = e.print();
                }
                RunError::Failed(e) => eprintln!("detfuse: error: {e}"),
            }
            code
        }
    }
}
