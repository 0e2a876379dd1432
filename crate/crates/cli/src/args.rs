use std::path::PathBuf;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use ppg_resp::data::{InputScaling, RespKind};
use ppg_resp::interpret::AttributionMode;

#[derive(Debug, Parser)]
#[command(
    name = "ppgresp",
    version,
    about = "Respiratory waveforms from PPG: synthesis, training, evaluation and kernel attribution"
)]
pub struct Cli {
    /// TOML file with default settings. Flags given on the command line win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Base directory; every run creates a new timestamped directory below it.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Worker threads for folds and subjects.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset in the recording CSV format.
    Synth(SynthArgs),
    /// Convert a foreign CSV export into the recording CSV format.
    Convert(ConvertArgs),
    /// Train leave-one-subject-out fold models or a single global model.
    Train(TrainArgs),
    /// Evaluate trained weights and optionally the PLS baseline.
    Eval(EvalArgs),
    /// Attribute windows to first-layer kernels and export kernel weights.
    Interpret(InterpretArgs),
    /// Measure single-window inference latency.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub subjects: Option<usize>,
    /// Recording length in seconds.
    #[arg(long)]
    pub duration: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_name = "BPM")]
    pub rr_min: Option<f64>,
    #[arg(long, value_name = "BPM")]
    pub rr_max: Option<f64>,
    #[arg(long)]
    pub noise_std: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    /// CSV file with a header row and one column per signal.
    #[arg(long)]
    pub input: PathBuf,
    /// Sampling rate of the input in Hz.
    #[arg(long)]
    pub fs: f64,
    #[arg(long)]
    pub subject: String,
    #[arg(long, value_name = "NAME")]
    pub ppg_column: String,
    #[arg(long, value_name = "NAME")]
    pub resp_column: String,
    #[arg(long, value_enum, default_value_t = KindArg::Capnography)]
    pub kind: KindArg,
    /// Optional CSV with respiratory rate annotations.
    #[arg(long, value_name = "FILE")]
    pub rr: Option<PathBuf>,
    #[arg(long, value_name = "NAME", default_value = "t_sec")]
    pub rr_time_column: String,
    #[arg(long, value_name = "NAME", default_value = "rr_bpm")]
    pub rr_column: String,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KindArg {
    Capnography,
    Impedance,
}

impl From<KindArg> for RespKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Capnography => RespKind::Capnography,
            KindArg::Impedance => RespKind::Impedance,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ScalingArg {
    Zscore,
    Raw,
}

impl From<ScalingArg> for InputScaling {
    fn from(s: ScalingArg) -> Self {
        match s {
            ScalingArg::Zscore => InputScaling::ZScore,
            ScalingArg::Raw => InputScaling::Raw,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Bottleneck,
    FirstLayer,
}

impl From<ModeArg> for AttributionMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Bottleneck => AttributionMode::Bottleneck,
            ModeArg::FirstLayer => AttributionMode::FirstLayer,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Directory of recordings.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Train one model on every subject instead of one model per held-out subject.
    #[arg(long)]
    pub no_loso: bool,
    /// Continue from these weights instead of a fresh initialization.
    #[arg(long, value_name = "FILE")]
    pub pretrained: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub keep_probability: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub scaling: Option<ScalingArg>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// A weight file, a training run directory, or its `folds` directory.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Fusion window lengths in seconds.
    #[arg(long, value_delimiter = ',', value_name = "SECONDS")]
    pub windows: Option<Vec<f64>>,
    /// Also evaluate the PLS baseline on leave-one-subject-out folds of the data.
    #[arg(long)]
    pub pls: bool,
    #[arg(long)]
    pub pls_components: Option<usize>,
    #[arg(long, value_enum)]
    pub scaling: Option<ScalingArg>,
}

#[derive(Debug, Args)]
pub struct InterpretArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// A single weight file or a directory holding `model.bin`.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    #[arg(long, value_enum)]
    pub scaling: Option<ScalingArg>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Weights to time; a freshly initialized model is used when omitted.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}
