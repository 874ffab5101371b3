//! `osrmon`: fit novelty detectors, score and track inference streams,
//! evaluate detectors and run the zero-day simulations.

mod commands;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use osrmon::detectors::mahalanobis::DEFAULT_EPSILON;
use osrmon::detectors::openmax::DEFAULT_TAIL_SIZE;
use osrmon::detectors::pca::DEFAULT_RETAINED_VARIANCE;
use osrmon::detectors::threshold::DEFAULT_TARGET_FPR;
use osrmon::tracking::drift::{DEFAULT_MIN_SAMPLES, DEFAULT_SKEW_FRACTION, DEFAULT_Z};
use osrmon::tracking::TrackMode;
use osrmon::DetectorId;

#[derive(Parser, Debug)]
#[command(
    name = "osrmon",
    version,
    about = "Open-set novelty scoring and model-quality tracking"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit detectors on known-class records and write a bundle
    Fit(FitArgs),
    /// Score a record stream; writes sample_id,detector,value,is_unknown
    Score(ScoreArgs),
    /// Track the running moments of one detector's output and raise drift alerts
    Track(TrackArgs),
    /// AUC and FPR-capped AUC per detector on labeled records
    Eval(EvalArgs),
    /// Single-threaded scoring throughput per detector
    Bench(BenchArgs),
    /// Zero-day arrival simulations and the synthetic record world
    #[command(subcommand)]
    Simulate(SimulateCommand),
    /// Convert a record file between the binary and CSV forms
    Convert(ConvertArgs),
}

#[derive(Args, Debug)]
struct FitArgs {
    /// Fit records (.osr or CSV)
    #[arg(long)]
    records: PathBuf,
    /// Output bundle path
    #[arg(long)]
    out: PathBuf,
    /// TOML file with a [model_head] table, stored in the bundle and checked against every record
    #[arg(long)]
    head: Option<PathBuf>,
    /// Records whose known-class scores calibrate the thresholds [default: the fit records]
    #[arg(long)]
    calibration: Option<PathBuf>,
    /// Comma-separated detectors [default: all]
    #[arg(long, value_delimiter = ',')]
    detectors: Option<Vec<DetectorId>>,
    /// OpenMax tail size per class
    #[arg(long, default_value_t = DEFAULT_TAIL_SIZE)]
    tail_size: usize,
    /// OpenMax revision rank [default: min(10, K)]
    #[arg(long)]
    revision_rank: Option<usize>,
    /// Mahalanobis covariance shrinkage, relative to mean variance
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
    /// Centroids for both clustering detectors [default: number of known classes]
    #[arg(long)]
    clusters: Option<usize>,
    /// Variance kept by the output-clustering PCA
    #[arg(long, default_value_t = DEFAULT_RETAINED_VARIANCE)]
    retained_variance: f64,
    /// False-positive rate on known records used to set every threshold
    #[arg(long, default_value_t = DEFAULT_TARGET_FPR)]
    target_fpr: f64,
    /// k-means restarts; the lowest-inertia run is kept
    #[arg(long, default_value_t = 1)]
    restarts: usize,
    #[command(flatten)]
    seed: SeedArg,
}

#[derive(Args, Debug)]
struct SeedArg {
    /// Seed for every random choice
    #[arg(long, env = "OSRMON_SEED", default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct ScoreArgs {
    #[arg(long)]
    bundle: PathBuf,
    /// Record stream (.osr or CSV)
    #[arg(long)]
    records: PathBuf,
    /// Comma-separated detectors [default: every detector with a threshold in the bundle]
    #[arg(long, value_delimiter = ',')]
    detectors: Option<Vec<DetectorId>>,
    /// Output path [default: stdout]
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads [default: one per core]
    #[arg(long)]
    threads: Option<usize>,
    /// Records scored per parallel batch
    #[arg(long, default_value_t = 4096)]
    batch: usize,
}

#[derive(Args, Debug)]
struct TrackArgs {
    #[arg(long)]
    bundle: PathBuf,
    /// Record stream (.osr or CSV)
    #[arg(long)]
    records: PathBuf,
    #[arg(long, default_value_t = DetectorId::Softmax)]
    detector: DetectorId,
    /// binary tracks the 0/1 verdict; raw tracks the score and disables the drift policies
    #[arg(long, default_value_t = TrackMode::Binary)]
    mode: TrackMode,
    /// Expected fraction of flagged records on a healthy stream
    #[arg(long, default_value_t = DEFAULT_TARGET_FPR)]
    baseline_alpha: f64,
    /// Standard errors above the baseline before the mean policy fires
    #[arg(long, default_value_t = DEFAULT_Z)]
    z: f64,
    /// Relative deviation from the expected skew before the skew policy fires
    #[arg(long, default_value_t = DEFAULT_SKEW_FRACTION)]
    skew_fraction: f64,
    /// Samples before either policy may fire
    #[arg(long, default_value_t = DEFAULT_MIN_SAMPLES)]
    min_samples: u64,
    /// Emit a statistics row every this many records
    #[arg(long, default_value_t = 1000)]
    stride: u64,
    /// Output path for the statistics rows [default: stdout]
    #[arg(long)]
    out: Option<PathBuf>,
    /// Continue from the tracker state stored in the bundle
    #[arg(long)]
    resume: bool,
    /// Store the final tracker state back into the bundle file
    #[arg(long)]
    save_state: bool,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    bundle: PathBuf,
    /// Labeled records: known classes >= 0, unknown -1
    #[arg(long)]
    records: PathBuf,
    /// Comma-separated detectors [default: every detector with a threshold in the bundle]
    #[arg(long, value_delimiter = ',')]
    detectors: Option<Vec<DetectorId>>,
    /// Comma-separated FPR caps for the partial AUC
    #[arg(long, value_delimiter = ',', default_values_t = osrmon::eval::DEFAULT_FPR_CAPS)]
    fpr_caps: Vec<f64>,
    /// Also measure throughput for this many milliseconds per detector (at least 500)
    #[arg(long)]
    bench_ms: Option<u64>,
    /// Output path for the plot data [default: stdout]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long)]
    bundle: PathBuf,
    #[arg(long)]
    records: PathBuf,
    /// Comma-separated detectors [default: every detector with a threshold in the bundle]
    #[arg(long, value_delimiter = ',')]
    detectors: Option<Vec<DetectorId>>,
    /// Minimum wall time per detector in milliseconds (at least 500)
    #[arg(long, default_value_t = 500)]
    duration_ms: u64,
    /// Output path [default: stdout]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum SimulateCommand {
    /// Bernoulli zero-day arrival stream: n,arrival
    Arrivals(ArrivalArgs),
    /// Expected indicator moments over a grid of rates: alpha,mean,std,skew
    Moments(MomentArgs),
    /// Running moments of an arrival stream with drift alerts
    Tracking(TrackingArgs),
    /// Gaussian-mixture record world: fit and test records plus the model head
    World(WorldArgs),
}

#[derive(Args, Debug)]
struct ArrivalArgs {
    /// Zero-day rate
    #[arg(long)]
    alpha: f64,
    /// Stream length
    #[arg(long)]
    n: u64,
    #[command(flatten)]
    seed: SeedArg,
    /// Output path [default: stdout]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct MomentArgs {
    /// Comma-separated zero-day rates
    #[arg(long, value_delimiter = ',', default_values_t = [0.5, 0.1, 0.01, 0.001, 0.0001])]
    alphas: Vec<f64>,
    /// Output path [default: stdout]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TrackingArgs {
    /// Zero-day rate, also used as the drift baseline
    #[arg(long)]
    alpha: f64,
    /// Stream length
    #[arg(long)]
    n: u64,
    /// Samples before either drift policy may fire
    #[arg(long, default_value_t = DEFAULT_MIN_SAMPLES)]
    warm_up: u64,
    /// Emit a row every this many samples
    #[arg(long, default_value_t = 1000)]
    stride: u64,
    /// Rate in force from --shift-at on; the baseline stays --alpha
    #[arg(long, requires = "shift_at")]
    shift_alpha: Option<f64>,
    /// 0-based sample index where the rate changes
    #[arg(long, requires = "shift_alpha")]
    shift_at: Option<u64>,
    #[command(flatten)]
    seed: SeedArg,
    /// Output path [default: stdout]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct WorldArgs {
    /// Output directory for fit, test and head files
    #[arg(long)]
    out_dir: PathBuf,
    /// Known classes K
    #[arg(long, default_value_t = 10)]
    known: usize,
    /// Unknown classes U
    #[arg(long, default_value_t = 4)]
    unknown: usize,
    /// Feature dimension D
    #[arg(long, default_value_t = 32)]
    dim: usize,
    /// Raw input length; 0 leaves raw inputs out
    #[arg(long, default_value_t = 0)]
    raw_dim: usize,
    /// Distance of known class centers from the origin
    #[arg(long, default_value_t = 4.0)]
    radius: f64,
    /// Distance of unknown class centers from the origin
    #[arg(long, default_value_t = 4.0)]
    unknown_radius: f64,
    /// Per-coordinate standard deviation around each center
    #[arg(long, default_value_t = 1.0)]
    noise: f64,
    /// Head weight rows are the known centers times this factor
    #[arg(long, default_value_t = 0.5)]
    logit_scale: f64,
    #[arg(long, default_value_t = 200)]
    fit_per_class: usize,
    #[arg(long, default_value_t = 100)]
    test_per_class: usize,
    #[arg(long, default_value_t = 100)]
    unknown_per_class: usize,
    #[arg(long, value_enum, default_value_t = RecordFormat::Osr)]
    format: RecordFormat,
    #[command(flatten)]
    seed: SeedArg,
}

#[derive(Args, Debug)]
struct ConvertArgs {
    /// Input record file (.osr or CSV, detected from its content)
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, value_enum)]
    to: RecordFormat,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum RecordFormat {
    Osr,
    Csv,
}

impl RecordFormat {
    fn extension(self) -> &'static str {
        match self {
            RecordFormat::Osr => "osr",
            RecordFormat::Csv => "csv",
        }
    }
}

/// Errors that are the caller's fault rather than the data's.
#[derive(Debug)]
struct Usage(String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<Usage>().is_some() {
        return 2;
    }
    match err.downcast_ref::<osrmon::Error>() {
        Some(e) if e.is_numerical() => 4,
        _ => 3,
    }
}

/// A downstream reader such as `head` went away; not worth reporting.
fn closed_stdout(err: &anyhow::Error) -> bool {
    err.chain().any(|cause| {
        let io = match cause.downcast_ref::<osrmon::Error>() {
            Some(osrmon::Error::Io(e)) => Some(e),
            _ => cause.downcast_ref::<std::io::Error>(),
        };
        io.is_some_and(|e| e.kind() == std::io::ErrorKind::BrokenPipe)
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit(args) => commands::fit(args),
        Command::Score(args) => commands::score(args),
        Command::Track(args) => commands::track(args),
        Command::Eval(args) => commands::eval(args),
        Command::Bench(args) => commands::bench(args),
        Command::Simulate(cmd) => commands::simulate(cmd),
        Command::Convert(args) => commands::convert(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) if closed_stdout(&err) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
