//! `pdn`: train, evaluate and inspect position-aware decay weighted
//! networks for aspect-term sentiment classification.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure
//! (non-finite values during training or a failed gradient check).

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pdn::data::Format;
use pdn::model::{DecayKind, ModelKind};

#[derive(Parser, Debug)]
#[command(
    name = "pdn",
    version,
    about = "Position-aware decay weighted network for aspect sentiment"
)]
#[command(after_help = "Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train a model and write a checkpoint.
    Train(TrainArgs),
    /// Report accuracy of a checkpoint on a labelled file.
    Eval(EvalArgs),
    /// Classify one sentence with respect to an aspect term.
    Predict(PredictArgs),
    /// Compare analytic and finite-difference gradients of a small random model.
    Gradcheck(GradcheckArgs),
    /// Write a synthetic cue-distance dataset as TSV.
    Synth(SynthArgs),
    /// Accuracy of predicting the most frequent training label.
    Majority(MajorityArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum DecayArg {
    Inverse,
    Expo,
    Tangent,
}

impl From<DecayArg> for DecayKind {
    fn from(d: DecayArg) -> Self {
        match d {
            DecayArg::Inverse => DecayKind::Inverse,
            DecayArg::Expo => DecayKind::Exponential,
            DecayArg::Tangent => DecayKind::Tangent,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ModelArg {
    Pdn,
    Nbow,
    Lstm,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Pdn => ModelKind::Pdn,
            ModelArg::Nbow => ModelKind::Nbow,
            ModelArg::Lstm => ModelKind::Lstm,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum FormatArg {
    Xml,
    Tsv,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Xml => Format::SemevalXml,
            FormatArg::Tsv => Format::Tsv,
        }
    }
}

#[derive(Args, Debug)]
pub struct DataFormat {
    /// Input format; by default chosen from the extension (.xml or .tsv).
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Training data (.xml SemEval or .tsv).
    #[arg(long)]
    pub train: PathBuf,
    /// Held-out data evaluated after every epoch.
    #[arg(long)]
    pub dev: Option<PathBuf>,
    /// Pretrained word vectors, one `token v1 ... v_d` line per word.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[command(flatten)]
    pub format: DataFormat,
    /// Checkpoint to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Epoch reports without timings, one key=value line per epoch.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "pdn")]
    pub model: ModelArg,
    #[arg(long, value_enum, default_value = "inverse")]
    pub decay: DecayArg,
    /// Decay constant [default: 1.1333 inverse, 0.3 expo, 0.45 tangent]
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Seed for initialisation, shuffling and dropout.
    #[arg(long, env = "PDN_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 30)]
    pub epochs: usize,
    #[arg(long, default_value_t = 20)]
    pub batch_size: usize,
    /// Adam learning rate.
    #[arg(long, default_value_t = 0.001)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.9)]
    pub beta1: f64,
    #[arg(long, default_value_t = 0.999)]
    pub beta2: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub adam_eps: f64,
    /// Dropout on the penultimate layer.
    #[arg(long, default_value_t = 0.5)]
    pub dropout: f64,
    #[arg(long, default_value_t = 300)]
    pub word_dim: usize,
    #[arg(long, default_value_t = 25)]
    pub position_dim: usize,
    /// LSTM hidden units.
    #[arg(long, default_value_t = 100)]
    pub hidden_dim: usize,
    /// Units projecting position embeddings in the attention network.
    #[arg(long, default_value_t = 50)]
    pub pan_position_hidden: usize,
    /// Units projecting LSTM states in the attention network.
    #[arg(long, default_value_t = 50)]
    pub pan_sequence_hidden: usize,
    /// Units of the attention scoring layer.
    #[arg(long, default_value_t = 50)]
    pub attention_hidden: usize,
    #[arg(long, default_value_t = 64)]
    pub penultimate: usize,
    /// Maximum sentence length; longer sentences are cut around the aspect.
    #[arg(long, default_value_t = 80)]
    pub max_len: usize,
    /// Keep word embeddings fixed during training.
    #[arg(long)]
    pub freeze_embeddings: bool,
    /// Compute per-example gradients on one thread.
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[command(flatten)]
    pub format: DataFormat,
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long)]
    pub sentence: String,
    /// Aspect term.
    #[arg(long)]
    pub aspect: String,
    /// Which occurrence of the aspect term to classify, counting from 1.
    #[arg(long, default_value_t = 1)]
    pub occurrence: usize,
    /// Append per-token position, decay and attention weights.
    #[arg(long)]
    pub dump_attention: bool,
}

#[derive(Args, Debug)]
pub struct GradcheckArgs {
    #[arg(long, env = "PDN_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Sentence length.
    #[arg(long, default_value_t = 8)]
    pub n: usize,
    #[arg(long, value_enum, default_value = "pdn")]
    pub model: ModelArg,
    #[arg(long, value_enum, default_value = "inverse")]
    pub decay: DecayArg,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Inject a deliberate error into the decay weighting backward pass.
    #[arg(long)]
    pub break_decay_gradient: bool,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 5000)]
    pub count: usize,
    #[arg(long, env = "PDN_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// One aspect token per sentence instead of one next to each cue.
    #[arg(long)]
    pub single_aspect: bool,
}

#[derive(Args, Debug)]
pub struct MajorityArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[command(flatten)]
    pub format: DataFormat,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    ExitCode::SUCCESS
                }
                _ => ExitCode::from(1),
            };
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
