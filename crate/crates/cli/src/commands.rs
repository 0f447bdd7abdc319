use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use depthscale::analyzer::{compare_profiles, empirical_profile, theoretical_profile, ProfileOptions};
use depthscale::data::{gen_synthetic, load_cifar10_binary, Dataset, Scaling};
use depthscale::train::{train, TrainConfig};
use depthscale::{
    build_plan, gain_product, Direction, Distribution, Error, FanMode, InitScheme, KSolution,
    KSource, NetworkSpec, Propagation,
};
use rayon::prelude::*;

use crate::args::{
    Command, CompareArgs, DataArg, Format, ProfileArgs, RerunArgs, RunArgs, SolveKArgs,
    TrainArgs, UsageError,
};
use crate::report::{
    compare_csv, profile_csv, train_csv, CompareResult, CompareRow, Envelope, ProfileResult,
    RowStatus, SolveKResult, Timing,
};

pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_DIVERGED: i32 = 3;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_DATA: i32 = 66;

/// Directory that relative `--out` paths resolve against.
pub const OUT_DIR_ENV: &str = "DEPTHSCALE_OUT_DIR";

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

pub fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::NoValidK { .. } | Error::Unsupported(_) => EXIT_INFEASIBLE,
        Error::Diverged { .. } => EXIT_DIVERGED,
        Error::CorruptFile { .. } | Error::CorruptRecord { .. } | Error::Io { .. } => EXIT_DATA,
        Error::InvalidArgument(_) => EXIT_USAGE,
    }
}

impl From<Error> for CliError {
    fn from(err: Error) -> Self {
        Self {
            code: exit_code_for(&err),
            message: err.to_string(),
        }
    }
}

impl From<UsageError> for CliError {
    fn from(err: UsageError) -> Self {
        Self {
            code: EXIT_USAGE,
            message: err.0,
        }
    }
}

fn usage(message: impl Into<String>) -> CliError {
    CliError {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

fn io_error(path: &Path, err: std::io::Error) -> CliError {
    CliError {
        code: EXIT_DATA,
        message: format!("{}: {err}", path.display()),
    }
}

fn resolve_out(path: &Path) -> PathBuf {
    match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) if path.is_relative() => Path::new(&dir).join(path),
        _ => path.to_path_buf(),
    }
}

fn emit(text: &str, out: Option<&Path>, stdout: &mut dyn Write) -> Result<(), CliError> {
    match out {
        Some(path) => {
            let path = resolve_out(path);
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent).map_err(|e| io_error(parent, e))?;
            }
            std::fs::write(&path, text).map_err(|e| io_error(&path, e))
        }
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| io_error(Path::new("<stdout>"), e)),
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    text
}

/// Executes `command`, writing its report to `--out` or `stdout`.
pub fn run(command: &Command, stdout: &mut dyn Write) -> Result<(), CliError> {
    let sink = match command {
        Command::Profile(a) => a.out.clone(),
        Command::Train(a) => a.run.out.clone(),
        Command::Compare(a) => a.run.out.clone(),
        Command::SolveK(_) => None,
        Command::Rerun(args) => return rerun(args, stdout),
    };
    execute(command, sink.as_deref(), stdout)
}

fn execute(command: &Command, sink: Option<&Path>, stdout: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::SolveK(args) => solve_k(command, args, sink, stdout),
        Command::Profile(args) => profile(command, args, sink, stdout),
        Command::Train(args) => train_one(command, args, sink, stdout),
        Command::Compare(args) => compare(command, args, sink, stdout),
        Command::Rerun(_) => Err(usage("cannot rerun a rerun")),
    }
}

fn solve_k(
    config: &Command,
    args: &SolveKArgs,
    sink: Option<&Path>,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    let solution = KSolution::new(args.layers, args.width, args.variance, args.shift)?;
    let spec = NetworkSpec::uniform(args.width, args.layers)?;
    let scheme = InitScheme::DepthwiseLog {
        k_source: KSource::SolveFromV(args.variance),
        shift: args.shift,
        direction: Direction::Increasing,
        distribution: Distribution::Normal,
        fan_mode: FanMode::FanOut,
    };
    let plan = build_plan(&spec, &scheme)?;
    let check = gain_product(&plan, &spec, Propagation::Backward)?;
    let envelope = Envelope::new(config.clone(), SolveKResult::new(&solution, check), None);
    emit(&to_json(&envelope), sink, stdout)
}

fn profile(
    config: &Command,
    args: &ProfileArgs,
    sink: Option<&Path>,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    let scheme = args.scheme.resolve(FanMode::FanOut)?;
    let spec = NetworkSpec::uniform(args.width, args.layers)?;
    let profile = if args.theory_only {
        theoretical_profile(&spec, &build_plan(&spec, &scheme)?)?
    } else {
        let options = ProfileOptions {
            trials: args.trials,
            batch: args.batch,
            seed: args.seed,
            input: args.input.into(),
        };
        empirical_profile(&spec, &scheme, &options)?
    };
    let text = match args.format {
        Format::Json => {
            let comparison = if profile.has_empirical() {
                Some(compare_profiles(&profile)?)
            } else {
                None
            };
            to_json(&Envelope::new(
                config.clone(),
                ProfileResult {
                    profile,
                    comparison,
                },
                None,
            ))
        }
        Format::Csv => profile_csv(config, &profile),
    };
    emit(&text, sink, stdout)
}

fn check_run(run: &RunArgs) -> Result<(), CliError> {
    if !(run.lr.is_finite() && run.lr > 0.0) {
        return Err(usage(format!("--lr must be positive, got {}", run.lr)));
    }
    if run.epochs == 0 || run.batch == 0 {
        return Err(usage("--epochs and --batch must be positive"));
    }
    Ok(())
}

fn load_data(run: &RunArgs) -> Result<Dataset, CliError> {
    match &run.data {
        DataArg::Synthetic => gen_synthetic(
            run.seed,
            run.samples,
            run.dims,
            run.classes,
            run.separation,
            run.scaling.into(),
        )
        .map_err(CliError::from),
        DataArg::Cifar10(path) => {
            let mut data = load_cifar10_binary(path, run.limit).map_err(|e| match e {
                Error::InvalidArgument(msg) => usage(msg),
                other => CliError {
                    code: EXIT_DATA,
                    message: other.to_string(),
                },
            })?;
            let scaling: Scaling = run.scaling.into();
            if scaling != Scaling::ZeroOne {
                data.rescale(scaling);
            }
            Ok(data)
        }
    }
}

fn train_config(run: &RunArgs) -> TrainConfig {
    TrainConfig {
        epochs: run.epochs,
        lr: run.lr,
        batch_size: run.batch,
        seed: run.seed,
        ..TrainConfig::default()
    }
}

fn classifier(run: &RunArgs, data: &Dataset) -> Result<NetworkSpec, CliError> {
    Ok(NetworkSpec::classifier(
        data.dims(),
        run.width,
        run.layers,
        data.num_classes,
    )?)
}

fn train_one(
    config: &Command,
    args: &TrainArgs,
    sink: Option<&Path>,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    check_run(&args.run)?;
    let scheme = args.scheme.resolve(FanMode::FanIn)?;
    let data = load_data(&args.run)?;
    let spec = classifier(&args.run, &data)?;
    let start = Instant::now();
    let report = train(&spec, &scheme, &data, &train_config(&args.run))?;
    let timing = Timing {
        wall_clock_ms: start.elapsed().as_millis() as u64,
    };
    let text = match args.run.format {
        Format::Json => to_json(&Envelope::new(config.clone(), report, Some(timing))),
        Format::Csv => train_csv(config, &report),
    };
    emit(&text, sink, stdout)
}

/// Runs every scheme of the list on identical data, order and seeds.
pub fn compare_rows(args: &CompareArgs) -> Result<CompareResult, CliError> {
    check_run(&args.run)?;
    let entries = args.scheme_entries();
    if entries.is_empty() {
        return Err(usage("--schemes must name at least one scheme"));
    }
    let schemes = entries
        .iter()
        .map(|e| args.resolve_entry(e))
        .collect::<Result<Vec<_>, _>>()?;
    let data = load_data(&args.run)?;
    let spec = classifier(&args.run, &data)?;
    let config = train_config(&args.run);

    let rows = entries
        .par_iter()
        .zip(&schemes)
        .enumerate()
        .map(|(slot, (entry, scheme))| {
            let outcome = train(&spec, scheme, &data, &config);
            let (status, error, exit_code, report) = match outcome {
                Ok(report) => (RowStatus::Ok, None, None, Some(report)),
                Err(err) => (
                    RowStatus::Failed,
                    Some(err.to_string()),
                    Some(exit_code_for(&err)),
                    None,
                ),
            };
            CompareRow {
                slot,
                entry: entry.clone(),
                scheme: scheme.label(),
                status,
                error,
                exit_code,
                report,
            }
        })
        .collect();
    Ok(CompareResult::new(rows))
}

fn compare(
    config: &Command,
    args: &CompareArgs,
    sink: Option<&Path>,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    let start = Instant::now();
    let result = compare_rows(args)?;
    let timing = Timing {
        wall_clock_ms: start.elapsed().as_millis() as u64,
    };
    let text = match args.run.format {
        Format::Json => to_json(&Envelope::new(config.clone(), &result, Some(timing))),
        Format::Csv => compare_csv(config, &result),
    };
    emit(&text, sink, stdout)?;
    if result.ranking.is_empty() {
        let first = result.rows.first().and_then(|r| r.exit_code).unwrap_or(EXIT_DIVERGED);
        return Err(CliError {
            code: first,
            message: "every scheme failed".into(),
        });
    }
    Ok(())
}

/// Reads the `config` of a JSON report and executes it again. The new report
/// embeds the original config unchanged but goes to `--out` (or standard
/// output) rather than the original destination.
fn rerun(args: &RerunArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.report).map_err(|e| io_error(&args.report, e))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| CliError {
        code: EXIT_DATA,
        message: format!("{}: {e}", args.report.display()),
    })?;
    let config = value.get("config").cloned().ok_or_else(|| CliError {
        code: EXIT_DATA,
        message: format!("{} has no embedded config", args.report.display()),
    })?;
    let command: Command = serde_json::from_value(config).map_err(|e| CliError {
        code: EXIT_DATA,
        message: format!("embedded config is invalid: {e}"),
    })?;
    execute(&command, args.out.as_deref(), stdout)
}
