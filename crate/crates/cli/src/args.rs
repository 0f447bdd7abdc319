//! Command-line arguments. Every argument struct is also the serialized run
//! configuration embedded in the reports it produces.

use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use depthscale::analyzer::InputDistribution;
use depthscale::data::Scaling;
use depthscale::{Direction, Distribution, FanMode, InitScheme, KSource};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "depthscale", version, about = "Depth-aware weight initialization toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Solve the depth-wise base K for a target network variance.
    SolveK(SolveKArgs),
    /// Theoretical and Monte Carlo per-layer variance profile.
    Profile(ProfileArgs),
    /// Train one scheme and report per-epoch statistics.
    Train(TrainArgs),
    /// Train several schemes on identical data and rank them.
    Compare(CompareArgs),
    /// Re-run the configuration embedded in a report.
    #[serde(skip)]
    Rerun(RerunArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeKind {
    Glorot,
    He,
    Const,
    DepthwiseInc,
    DepthwiseDec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistArg {
    Normal,
    Uniform,
}

impl From<DistArg> for Distribution {
    fn from(d: DistArg) -> Self {
        match d {
            DistArg::Normal => Distribution::Normal,
            DistArg::Uniform => Distribution::Uniform,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FanModeArg {
    FanIn,
    FanOut,
}

impl From<FanModeArg> for FanMode {
    fn from(m: FanModeArg) -> Self {
        match m {
            FanModeArg::FanIn => FanMode::FanIn,
            FanModeArg::FanOut => FanMode::FanOut,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputArg {
    Normal,
    ZeroOne,
}

impl From<InputArg> for InputDistribution {
    fn from(i: InputArg) -> Self {
        match i {
            InputArg::Normal => InputDistribution::StandardNormal,
            InputArg::ZeroOne => InputDistribution::ZeroOne,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScalingArg {
    ZeroOne,
    Standardized,
    Raw,
}

impl From<ScalingArg> for Scaling {
    fn from(s: ScalingArg) -> Self {
        match s {
            ScalingArg::ZeroOne => Scaling::ZeroOne,
            ScalingArg::Standardized => Scaling::Standardized,
            ScalingArg::Raw => Scaling::Raw,
        }
    }
}

/// `synthetic` or `cifar10:PATH`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataArg {
    Synthetic,
    Cifar10(PathBuf),
}

impl FromStr for DataArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "synthetic" {
            return Ok(Self::Synthetic);
        }
        match s.strip_prefix("cifar10:") {
            Some(path) if !path.is_empty() => Ok(Self::Cifar10(PathBuf::from(path))),
            _ => Err(format!("expected `synthetic` or `cifar10:PATH`, got `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SolveKArgs {
    #[arg(long)]
    pub layers: usize,
    #[arg(long)]
    pub width: usize,
    #[arg(long)]
    pub variance: f64,
    #[arg(long, default_value_t = 0)]
    pub shift: u32,
}

/// Scheme selection shared by `profile` and `train`.
#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SchemeArgs {
    #[arg(long, value_enum)]
    pub scheme: SchemeKind,
    /// Target network variance V (const and depthwise schemes).
    #[arg(long)]
    pub variance: Option<f64>,
    /// Explicit depth-wise base K (depthwise schemes).
    #[arg(long)]
    pub k: Option<f64>,
    /// Log-base shift c (depthwise schemes).
    #[arg(long)]
    pub shift: Option<u32>,
    #[arg(long, value_enum, default_value_t = DistArg::Normal)]
    pub dist: DistArg,
    /// Fan used for the He base variance; defaults to fan-out for profiles
    /// and fan-in for training (classifier heads have a different width).
    #[arg(long, value_enum)]
    pub fan_mode: Option<FanModeArg>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ProfileArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub scheme: SchemeArgs,
    #[arg(long, default_value_t = 54)]
    pub layers: usize,
    #[arg(long, default_value_t = 64)]
    pub width: usize,
    #[arg(long, default_value_t = 16)]
    pub trials: usize,
    #[arg(long, default_value_t = 256)]
    pub batch: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = InputArg::Normal)]
    pub input: InputArg,
    /// Skip the Monte Carlo measurement.
    #[arg(long)]
    pub theory_only: bool,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Output file; relative paths resolve against $DEPTHSCALE_OUT_DIR when
    /// set. Standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Data, optimizer and architecture options shared by `train` and `compare`.
#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct RunArgs {
    #[arg(long, default_value_t = 54)]
    pub layers: usize,
    #[arg(long, default_value_t = 64)]
    pub width: usize,
    #[arg(long, default_value = "synthetic")]
    pub data: DataArg,
    /// Synthetic samples.
    #[arg(long, default_value_t = 2000)]
    pub samples: usize,
    /// Synthetic feature dimension.
    #[arg(long, default_value_t = 32)]
    pub dims: usize,
    /// Synthetic class count.
    #[arg(long, default_value_t = 10)]
    pub classes: usize,
    /// Distance between synthetic class means.
    #[arg(long, default_value_t = 4.0)]
    pub separation: f64,
    /// Synthetic feature scaling.
    #[arg(long, value_enum, default_value_t = ScalingArg::ZeroOne)]
    pub scaling: ScalingArg,
    /// CIFAR-10 records to load.
    #[arg(long)]
    pub limit: Option<usize>,
    #[arg(long, default_value_t = 20)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub lr: f64,
    #[arg(long, default_value_t = 32)]
    pub batch: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct TrainArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub scheme: SchemeArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct CompareArgs {
    /// Comma-separated `kind[/dist]` entries, e.g. `he/normal,depthwise-inc`.
    /// Defaults to he, const, depthwise-inc and depthwise-dec under both
    /// normal and uniform distributions.
    #[arg(long, value_delimiter = ',')]
    pub schemes: Option<Vec<String>>,
    #[arg(long, default_value_t = 22.0)]
    pub variance: f64,
    #[arg(long, default_value_t = 0)]
    pub shift: u32,
    #[arg(long, value_enum, default_value_t = DistArg::Normal)]
    pub dist: DistArg,
    #[arg(long, value_enum, default_value_t = FanModeArg::FanIn)]
    pub fan_mode: FanModeArg,
    #[command(flatten)]
    #[serde(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct RerunArgs {
    /// A JSON report written by this tool.
    pub report: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub const DEFAULT_COMPARE_SCHEMES: [&str; 8] = [
    "he/normal",
    "const/normal",
    "depthwise-inc/normal",
    "depthwise-dec/normal",
    "he/uniform",
    "const/uniform",
    "depthwise-inc/uniform",
    "depthwise-dec/uniform",
];

/// A flag combination that does not describe a scheme.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

impl SchemeArgs {
    pub fn resolve(&self, default_fan: FanMode) -> Result<InitScheme, UsageError> {
        let usage = |msg: &str| Err(UsageError(msg.to_string()));
        let distribution = self.dist.into();
        let fan_mode = self.fan_mode.map_or(default_fan, FanMode::from);
        let depthwise = matches!(self.scheme, SchemeKind::DepthwiseInc | SchemeKind::DepthwiseDec);
        if !depthwise && (self.k.is_some() || self.shift.is_some()) {
            return usage("--k and --shift only apply to depthwise schemes");
        }
        match self.scheme {
            SchemeKind::Glorot | SchemeKind::He if self.variance.is_some() => {
                usage("--variance does not apply to glorot or he")
            }
            SchemeKind::Glorot if self.fan_mode.is_some() => {
                usage("--fan-mode does not apply to glorot")
            }
            SchemeKind::Glorot => Ok(InitScheme::Glorot { distribution }),
            SchemeKind::He => Ok(InitScheme::He {
                distribution,
                fan_mode,
            }),
            SchemeKind::Const => match self.variance {
                Some(target_variance) => Ok(InitScheme::ConstantScaled {
                    target_variance,
                    distribution,
                    fan_mode,
                }),
                None => usage("const requires --variance"),
            },
            SchemeKind::DepthwiseInc | SchemeKind::DepthwiseDec => {
                let k_source = match (self.variance, self.k) {
                    (Some(v), None) => KSource::SolveFromV(v),
                    (None, Some(k)) => KSource::Explicit(k),
                    _ => return usage("depthwise schemes need exactly one of --variance or --k"),
                };
                Ok(InitScheme::DepthwiseLog {
                    k_source,
                    shift: self.shift.unwrap_or(0),
                    direction: if self.scheme == SchemeKind::DepthwiseInc {
                        Direction::Increasing
                    } else {
                        Direction::Decreasing
                    },
                    distribution,
                    fan_mode,
                })
            }
        }
    }
}

impl CompareArgs {
    pub fn scheme_entries(&self) -> Vec<String> {
        self.schemes.clone().unwrap_or_else(|| {
            DEFAULT_COMPARE_SCHEMES.iter().map(|s| s.to_string()).collect()
        })
    }

    /// Parses one `kind[/dist]` entry.
    pub fn resolve_entry(&self, entry: &str) -> Result<InitScheme, UsageError> {
        let (kind, dist) = match entry.split_once('/') {
            Some((k, d)) => (k, Some(d)),
            None => (entry, None),
        };
        let kind = SchemeKind::from_str(kind.trim(), true)
            .map_err(|_| UsageError(format!("unknown scheme `{kind}` in `{entry}`")))?;
        let dist = match dist {
            Some(d) => DistArg::from_str(d.trim(), true)
                .map_err(|_| UsageError(format!("unknown distribution `{d}` in `{entry}`")))?,
            None => self.dist,
        };
        let needs_variance = !matches!(kind, SchemeKind::Glorot | SchemeKind::He);
        let depthwise = matches!(kind, SchemeKind::DepthwiseInc | SchemeKind::DepthwiseDec);
        SchemeArgs {
            scheme: kind,
            variance: needs_variance.then_some(self.variance),
            k: None,
            shift: depthwise.then_some(self.shift),
            dist,
            fan_mode: (kind != SchemeKind::Glorot).then_some(self.fan_mode),
        }
        .resolve(self.fan_mode.into())
    }
}
