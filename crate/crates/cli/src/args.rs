use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "ehr-denoise", version, about = "Denoise and impute unrecorded positives in sparse binary records")]
pub struct Cli {
    /// Worker threads; 1 runs everything on the calling thread.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,

    /// File of `key=value` lines applied before the command-line flags.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Where to write the run manifest [default: <primary output>.manifest.json].
    #[arg(long, global = true, value_name = "FILE")]
    pub manifest: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample clean records from the latent-factor generator.
    Gen(GenArgs),
    /// Apply one-sided mixture corruption, or prevalence-matched masking.
    Corrupt(CorruptArgs),
    /// Element-wise OR of two matrices.
    Merge(MergeArgs),
    /// Train a neural denoiser on a noisy/clean pair.
    Train(TrainArgs),
    /// Fit per-dimension thresholds over a trained denoiser.
    FitThresholds(FitThresholdsArgs),
    /// Score a noisy matrix with a trained denoiser.
    Denoise(DenoiseArgs),
    /// Score a noisy matrix with a non-neural imputer.
    Baseline(BaselineArgs),
    /// Per-dimension, macro and micro AUPRC of scores against clean records.
    Eval(EvalArgs),
    /// Hold-one-code-out downstream prediction task.
    Holdout(HoldoutArgs),
    /// Covariance spectrum against a Bernoulli null band.
    Spectrum(SpectrumArgs),
    /// Compare the closed-form optimal denoiser with brute-force posteriors.
    OracleCheck(OracleCheckArgs),
    /// Finite-difference check of a denoiser's analytic gradients.
    Gradcheck(GradcheckArgs),
    /// Re-run the command recorded in a manifest and verify its outputs.
    Replay(ReplayArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Gen(_) => "gen",
            Command::Corrupt(_) => "corrupt",
            Command::Merge(_) => "merge",
            Command::Train(_) => "train",
            Command::FitThresholds(_) => "fit-thresholds",
            Command::Denoise(_) => "denoise",
            Command::Baseline(_) => "baseline",
            Command::Eval(_) => "eval",
            Command::Holdout(_) => "holdout",
            Command::Spectrum(_) => "spectrum",
            Command::OracleCheck(_) => "oracle-check",
            Command::Gradcheck(_) => "gradcheck",
            Command::Replay(_) => "replay",
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SplitArgs {
    /// Also write `<out>.train`, `<out>.fit` and `<out>.test` row splits.
    #[arg(long)]
    pub split: bool,
    #[arg(long, default_value_t = 0.5)]
    pub train_frac: f64,
    #[arg(long, default_value_t = 0.3)]
    pub fit_frac: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
#[command(args_override_self = true)]
pub struct GenArgs {
    /// Number of codes per record.
    #[arg(long = "T", visible_alias = "cols")]
    pub n_cols: usize,
    #[arg(long)]
    pub rows: usize,
    /// Latent factors.
    #[arg(long, default_value_t = 4)]
    pub rank: usize,
    /// Base prevalence shared by every code.
    #[arg(long, default_value_t = 0.02)]
    pub base_prev: f64,
    /// Per-code base prevalences, one per line; overrides --base-prev.
    #[arg(long, value_name = "FILE")]
    pub base_prev_file: Option<PathBuf>,
    #[arg(long, default_value_t = 0.4)]
    pub factor_strength: f64,
    /// Deterministic rule `target:src,src,...` (repeatable).
    #[arg(long = "and-rule", value_name = "RULE")]
    pub and_rules: Vec<String>,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub split: SplitArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
#[command(args_override_self = true)]
pub struct CorruptArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Probability a row is left untouched.
    #[arg(long, default_value_t = 0.3)]
    pub beta: f64,
    /// Drop probability for every observed one.
    #[arg(long, default_value_t = 0.6)]
    pub drop: f64,
    /// Per-code drop probabilities, one per line; overrides --drop.
    #[arg(long, value_name = "FILE")]
    pub drop_file: Option<PathBuf>,
    /// Instead of mixture noise, thin each code to these prevalences (one per line).
    #[arg(long, value_name = "FILE")]
    pub target_prev: Option<PathBuf>,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub split: SplitArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
#[command(args_override_self = true)]
pub struct MergeArgs {
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArchArg {
    Mlp,
    Dae,
    SetAttention,
}

#[derive(Debug, Clone, Args, Serialize)]
#[command(args_override_self = true)]
pub struct TrainArgs {
    #[arg(long)]
    pub noisy: PathBuf,
    #[arg(long)]
    pub clean: PathBuf,
    #[arg(long, value_enum)]
    pub arch: ArchArg,
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    /// [default: 128 for mlp/dae, 48 for set-attention]
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long, default_value_t = 3e-4)]
    pub lr: f64,
    #[arg(long, default_value_t = 1e-5)]
    pub weight_decay: f64,
    /// Weight on unrecorded positives in the cross-entropy.
    #[arg(long, default_value_t = 2.0)]
    pub lambda: f64,
    /// Probability of zeroing each input entry per step.
    #[arg(long, default_value_t = 0.3)]
    pub mask_prob: f64,
    #[arg(long, default_value_t = 512)]
    pub hidden: usize,
    /// Hidden layers (mlp, dae encoder) or attention blocks (set-attention).
    #[arg(long, default_value_t = 4)]
    pub depth: usize,
    #[arg(long, default_value_t = 512)]
    pub latent: usize,
    #[arg(long, default_value_t = 200)]
    pub embed_dim: usize,
    #[arg(long, default_value_t = 10)]
    pub heads: usize,
    #[arg(long)]
    pub seed: u64,
    /// Checkpoint path.
    #[arg(long)]
    pub out: PathBuf,
    /// Loss curve CSV [default: <out>.loss.csv].
    #[arg(long)]
    pub loss_curve: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
#[command(args_override_self = true)]
pub struct FitThresholdsArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub noisy: PathBuf,
    #[arg(long)]
    pub clean: PathBuf,
    /// Sharpness of the soft threshold.
    #[arg(long, default_value_t = 100.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1e-2)]
    pub lr: f64,
    #[arg(long, default_value_t = 20)]
    pub epochs: usize,
    #[arg(long, default_value_t = 256)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 2.0)]
    pub lambda: f64,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
#[command(args_override_self = true)]
pub struct DenoiseArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    /// Threshold file from fit-thresholds.
    #[arg(long)]
    pub thresholds: Option<PathBuf>,
    /// Use the sigmoid weight instead of the hard cut-off.
    #[arg(long)]
    pub soft: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodArg {
    Identity,
    Prevalence,
    Knn,
    SoftImpute,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ImputerArgs {
    #[arg(long, value_enum)]
    pub method: MethodArg,
    /// Reference matrix: training prevalences (prevalence) or neighbour buffer (knn).
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// Neighbours at Hamming distance >= tau are ignored (knn).
    #[arg(long, default_value_t = 2)]
    pub tau: u32,
    /// Neighbours consulted by --majority (knn).
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    /// Majority vote over the k nearest neighbours instead of copying the nearest (knn).
    #[arg(long)]
    pub majority: bool,
    /// Singular-value shrinkage (soft-impute).
    #[arg(long, default_value_t = 1.0)]
    pub shrinkage: f64,
    /// Rank cap [default: min(50, rows, T)] (soft-impute).
    #[arg(long)]
    pub max_rank: Option<usize>,
    #[arg(long, default_value_t = 100)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
#[command(args_override_self = true)]
pub struct BaselineArgs {
    #[command(flatten)]
    pub imputer: ImputerArgs,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Per-iteration objective (soft-impute), one value per line.
    #[arg(long)]
    pub objective_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
#[command(args_override_self = true)]
pub struct EvalArgs {
    /// Score matrix CSV.
    #[arg(long)]
    pub scores: PathBuf,
    /// Clean records.
    #[arg(long)]
    pub truth: PathBuf,
    /// Noisy records the scores were computed from.
    #[arg(long)]
    pub noisy: PathBuf,
    /// Label stored in the report [default: scores file stem].
    #[arg(long)]
    pub method: Option<String>,
    /// Score only positions where the noisy matrix is 0.
    #[arg(long)]
    pub restrict_to_zeros: bool,
    /// Bootstrap replicates; 0 disables the interval.
    #[arg(long, default_value_t = 50)]
    pub bootstrap_reps: usize,
    #[arg(long, default_value_t = 0.8)]
    pub bootstrap_fraction: f64,
    #[arg(long)]
    pub seed: u64,
    /// Per-dimension CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// JSON summary [default: <out>.json].
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
#[command(args_override_self = true)]
pub struct HoldoutArgs {
    #[arg(long)]
    pub clean: PathBuf,
    #[arg(long)]
    pub noisy: PathBuf,
    #[arg(long)]
    pub target_dim: usize,
    /// Trained denoiser; takes the place of --method.
    #[arg(long, conflicts_with = "method")]
    pub model: Option<PathBuf>,
    #[arg(long, requires = "model")]
    pub thresholds: Option<PathBuf>,
    #[arg(long, value_enum, required_unless_present = "model")]
    pub method: Option<MethodArg>,
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    pub tau: u32,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    #[arg(long)]
    pub majority: bool,
    #[arg(long, default_value_t = 1.0)]
    pub shrinkage: f64,
    #[arg(long)]
    pub max_rank: Option<usize>,
    #[arg(long, default_value_t = 100)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    #[arg(long, default_value_t = 50)]
    pub bootstrap_reps: usize,
    #[arg(long, default_value_t = 0.8)]
    pub bootstrap_fraction: f64,
    #[arg(long)]
    pub seed: u64,
    /// JSON result.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
#[command(args_override_self = true)]
pub struct SpectrumArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Null matrices drawn for the band.
    #[arg(long, default_value_t = 100)]
    pub n_random: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
#[command(args_override_self = true)]
pub struct OracleCheckArgs {
    /// Codes per instance (at most 12).
    #[arg(long = "T")]
    pub n_dims: usize,
    #[arg(long, default_value_t = 50)]
    pub trials: usize,
    /// Clean-row probabilities cycled over trials.
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.5,0.9,1.0")]
    pub betas: Vec<f64>,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long)]
    pub seed: u64,
    /// JSON report.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
#[command(args_override_self = true)]
pub struct GradcheckArgs {
    #[arg(long, value_enum)]
    pub arch: ArchArg,
    #[arg(long = "T", default_value_t = 6)]
    pub n_cols: usize,
    #[arg(long, default_value_t = 3)]
    pub rows: usize,
    #[arg(long, default_value_t = 16)]
    pub hidden: usize,
    #[arg(long, default_value_t = 2)]
    pub depth: usize,
    #[arg(long, default_value_t = 8)]
    pub latent: usize,
    #[arg(long, default_value_t = 6)]
    pub embed_dim: usize,
    #[arg(long, default_value_t = 2)]
    pub heads: usize,
    #[arg(long, default_value_t = 2.0)]
    pub lambda: f64,
    /// Coordinates probed.
    #[arg(long, default_value_t = 200)]
    pub coords: usize,
    #[arg(long, default_value_t = 1e-5)]
    pub step: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    #[arg(long)]
    pub seed: u64,
    /// JSON report.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ReplayArgs {
    /// Manifest written by an earlier run.
    pub manifest_file: PathBuf,
}
