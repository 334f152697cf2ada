use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use cvrisk::analyze::{analyze_csv, ModelSpec};
use cvrisk::experiments::{
    with_threads, ExperimentConfig, LdaSpeedupConfig, LimitLaw, LimitLawConfig, OutputFormat, RidgeCoverageConfig,
    RidgeSpeedupConfig,
};
use cvrisk::models::MeanScaling;
use cvrisk::Error;

#[derive(Parser)]
#[command(name = "cvrisk", version, about = "Cross-validated risk: experiments and data analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Coverage of CV confidence intervals for ridge regression.
    RidgeCoverage(ExperimentArgs),
    /// Split vs CV variance for ridge regression.
    RidgeSpeedup(ExperimentArgs),
    /// Split vs CV variance of the LDA misclassification rate.
    LdaSpeedup(ExperimentArgs),
    /// Finite-sample statistic against its non-Gaussian limit.
    LimitLaw {
        #[command(flatten)]
        common: ExperimentArgs,
        /// Which law, when no config is given.
        #[arg(long, value_enum)]
        law: Option<LawArg>,
    },
    /// CV risk, variance estimate and interval for a CSV dataset.
    Analyze(AnalyzeArgs),
}

#[derive(Args)]
struct ExperimentArgs {
    /// JSON config; defaults are used when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicates: Option<usize>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Write the table here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// CSV with header `x1..xd` and an optional `y` column.
    data: PathBuf,
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, value_enum, default_value = "ridge")]
    model: ModelArg,
    /// Ridge penalty.
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// LDA class-mean normalisation.
    #[arg(long, value_enum, default_value = "half-sample")]
    scaling: ScalingArg,
    /// One minus the interval level.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long)]
    threads: Option<usize>,
    /// Also write the CSV report here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// `md` prints the aligned table, `csv` the machine-readable report.
    #[arg(long, value_enum, default_value = "md")]
    format: FormatArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Md,
}

#[derive(Clone, Copy, ValueEnum)]
enum LawArg {
    Nn,
    Noiseless,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Ridge,
    Mean,
    Lda,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScalingArg {
    HalfSample,
    WithinClass,
}

fn load(args: &ExperimentArgs, default: ExperimentConfig) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::from_path(path)?,
        None => default.clone(),
    };
    if cfg.name() != default.name() {
        return Err(Error::Config(format!(
            "config describes `{}` but the subcommand is `{}`",
            cfg.name(),
            default.name()
        )));
    }
    if let Some(seed) = args.seed {
        cfg.set_seed(seed);
    }
    if let Some(r) = args.replicates {
        cfg.set_replicates(r);
    }
    if args.threads.is_some() {
        cfg.run_settings_mut().threads = args.threads;
    }
    if let Some(out) = &args.out {
        cfg.run_settings_mut().out = Some(out.display().to_string());
    }
    Ok(cfg)
}

fn run_experiment(args: &ExperimentArgs, default: ExperimentConfig) -> Result<(), Error> {
    let cfg = load(args, default)?;
    let table = cfg.run()?;
    let format = match args.format {
        FormatArg::Csv => OutputFormat::Csv,
        FormatArg::Md => OutputFormat::Markdown,
    };
    let text = table.render(format);
    match &cfg.run_settings().out {
        Some(path) => {
            std::fs::write(path, text)?;
            eprintln!(
                "{}: {} rows, {} failures, {:.1}s -> {path}",
                table.metadata.experiment,
                table.rows.len(),
                table.metadata.failures,
                table.metadata.runtime_secs
            );
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn run_analyze(args: &AnalyzeArgs) -> Result<(), Error> {
    let model = match args.model {
        ModelArg::Ridge => ModelSpec::Ridge { lambda: args.lambda },
        ModelArg::Mean => ModelSpec::Mean,
        ModelArg::Lda => ModelSpec::Lda {
            scaling: match args.scaling {
                ScalingArg::HalfSample => MeanScaling::HalfSample,
                ScalingArg::WithinClass => MeanScaling::WithinClass,
            },
        },
    };
    let report = with_threads(args.threads, || analyze_csv(&args.data, args.k, model, args.alpha))??;
    if let Some(out) = &args.out {
        std::fs::write(out, report.to_csv())?;
    }
    match args.format {
        FormatArg::Csv => print!("{}", report.to_csv()),
        FormatArg::Md => print!("{}", report.to_text()),
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    if e.is_numerical() {
        3
    } else {
        2
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::RidgeCoverage(a) => run_experiment(a, ExperimentConfig::RidgeCoverage(RidgeCoverageConfig::default())),
        Command::RidgeSpeedup(a) => run_experiment(a, ExperimentConfig::RidgeSpeedup(RidgeSpeedupConfig::default())),
        Command::LdaSpeedup(a) => run_experiment(a, ExperimentConfig::LdaSpeedup(LdaSpeedupConfig::default())),
        Command::LimitLaw { common, law } => {
            let mut cfg = LimitLawConfig::default();
            if let Some(LawArg::Noiseless) = law {
                cfg.law = LimitLaw::Noiseless;
            }
            let r = run_experiment(common, ExperimentConfig::LimitLaw(cfg));
            if law.is_some() && common.config.is_some() {
                eprintln!("note: --law is ignored when --config is given");
            }
            r
        }
        Command::Analyze(a) => run_analyze(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
