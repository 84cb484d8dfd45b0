use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand};
use dpt_core::data::CsvLayout;
use dpt_core::frontier::SweepKind;
use dpt_core::neural::{Activation, Penalty};
use dpt_core::portfolio_map::{FoldScheme, Solver};
use serde::de::DeserializeOwned;
use serde::Serialize;

mod commands;
mod config;
mod output;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io(String),
    /// A numerical check performed by the tool itself failed.
    Numerical(String),
    Core(dpt_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use dpt_core::Error as E;
        match self {
            CliError::Config(_) => 1,
            CliError::Io(_) => 2,
            CliError::Numerical(_) => 4,
            CliError::Core(e) => match e.root() {
                E::Divergence { .. } => 3,
                E::Conditioning(_) | E::IterationLimit { .. } => 4,
                E::Io(_) | E::Parse { .. } | E::Schema(_) | E::Data(_) | E::Json(_) => 2,
                _ => 1,
            },
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Io(m) => write!(f, "I/O error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical check failed: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<dpt_core::Error> for CliError {
    fn from(e: dpt_core::Error) -> Self {
        CliError::Core(e)
    }
}

fn serde_enum<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Parser, Debug)]
#[command(name = "dpt", version, about = "Deep portfolio construction: auto-encode, calibrate, validate, verify")]
struct Cli {
    /// Flat JSON config; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for concurrent jobs.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Output directory (for `synth`, the output CSV file).
    #[arg(short = 'o', long = "out-dir", global = true)]
    out_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic latent-factor market.
    Synth(SynthArgs),
    /// Validate a returns or prices CSV and write it in wide layout.
    Ingest(DataArgs),
    /// Train the market map and rank stocks by communal information.
    Encode(PipelineArgs),
    /// Calibrate the portfolio map on a selected universe.
    Calibrate(PipelineArgs),
    /// Trace the efficient deep frontier.
    Frontier(PipelineArgs),
    /// Classic encoders.
    Baseline {
        #[command(subcommand)]
        which: BaselineCmd,
    },
    /// Compare frontier reports and select per grid point.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long)]
    pub assets: Option<usize>,
    #[arg(long)]
    pub periods: Option<usize>,
    #[arg(long)]
    pub latent: Option<usize>,
    #[arg(long)]
    pub factor_scale: Option<f64>,
    #[arg(long)]
    pub noise_scale: Option<f64>,
    #[arg(long)]
    pub start_date: Option<String>,
    /// Shock as `asset:period:magnitude` (zero-based indices).
    #[arg(long)]
    pub drawdown: Option<String>,
}

#[derive(Args, Debug, Serialize)]
pub struct DataArgs {
    #[arg(short = 'i', long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub layout: Option<CsvLayout>,
    /// Input holds prices; convert to simple returns.
    #[arg(long, action = ArgAction::SetTrue)]
    #[serde(skip_serializing_if = "is_false")]
    pub prices: bool,
}

#[derive(Args, Debug, Serialize)]
pub struct PipelineArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,

    #[arg(long)]
    pub calibration_start: Option<String>,
    #[arg(long)]
    pub calibration_end: Option<String>,
    #[arg(long)]
    pub validation_start: Option<String>,
    #[arg(long)]
    pub validation_end: Option<String>,
    #[arg(long)]
    pub calibration_fraction: Option<f64>,

    #[arg(long, value_delimiter = ',')]
    pub market_hidden: Option<Vec<usize>>,
    #[arg(long)]
    pub market_activation: Option<Activation>,
    #[arg(long)]
    pub market_lambda: Option<f64>,
    #[arg(long)]
    pub market_penalty: Option<Penalty>,
    #[arg(long)]
    pub market_learning_rate: Option<f64>,
    #[arg(long)]
    pub market_epochs: Option<usize>,
    #[arg(long)]
    pub market_batch_size: Option<usize>,

    #[arg(long, value_delimiter = ',')]
    pub portfolio_hidden: Option<Vec<usize>>,
    #[arg(long)]
    pub portfolio_activation: Option<Activation>,
    #[arg(long)]
    pub portfolio_lambda: Option<f64>,
    #[arg(long)]
    pub portfolio_penalty: Option<Penalty>,
    #[arg(long)]
    pub portfolio_learning_rate: Option<f64>,
    #[arg(long)]
    pub portfolio_epochs: Option<usize>,
    #[arg(long)]
    pub portfolio_batch_size: Option<usize>,
    #[arg(long)]
    pub k_folds: Option<usize>,
    #[arg(long, value_parser = serde_enum::<FoldScheme>)]
    pub fold_scheme: Option<FoldScheme>,
    /// `sgd` or `exact-linear`.
    #[arg(long, value_parser = serde_enum::<Solver>)]
    pub solver: Option<Solver>,

    /// Target ticker; defaults to the equal-weight index.
    #[arg(long)]
    pub target: Option<String>,
    #[arg(long)]
    pub target_file: Option<PathBuf>,
    /// Replace target returns below the floor with the replacement value.
    #[arg(long, action = ArgAction::SetTrue)]
    #[serde(skip_serializing_if = "is_false")]
    pub amend_target: bool,
    #[arg(long)]
    pub amend_floor: Option<f64>,
    #[arg(long)]
    pub amend_replacement: Option<f64>,

    /// `stocks` or `lambda`.
    #[arg(long, value_parser = serde_enum::<SweepKind>)]
    pub sweep: Option<SweepKind>,
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub lambda_grid: Option<Vec<f64>>,
    #[arg(long)]
    pub n_stocks: Option<usize>,
    #[arg(long)]
    pub n_communal: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum BaselineCmd {
    /// Sample mean and covariance.
    Moments(DataArgs),
    /// Black-Litterman ridge mean from a views file.
    Bl(BlArgs),
    /// Sparse linear factor model by alternating lasso and least squares.
    Factor(FactorArgs),
}

#[derive(Args, Debug)]
pub struct BlArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// JSON `{"p": [[..]], "q": [..], "omega": [[..]], "lambda": x}`.
    #[arg(long)]
    pub views: PathBuf,
    /// Overrides the views file's lambda.
    #[arg(long)]
    pub lambda: Option<f64>,
}

#[derive(Args, Debug)]
pub struct FactorArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(short = 'K', long = "factors", default_value_t = 3)]
    pub k: usize,
    #[arg(long, default_value_t = 0.1)]
    pub lambda: f64,
    #[arg(long, default_value_t = 200)]
    pub max_iters: usize,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Frontier report JSON files, in preference order.
    #[arg(required = true)]
    pub reports: Vec<PathBuf>,
}

fn overrides<S: Serialize>(cli: &Cli, args: Option<&S>) -> serde_json::Value {
    let mut v = args.map_or_else(|| serde_json::json!({}), |a| serde_json::to_value(a).expect("flags serialize"));
    let m = v.as_object_mut().expect("flags form an object");
    m.insert("seed".into(), serde_json::to_value(cli.seed).unwrap());
    m.insert("jobs".into(), serde_json::to_value(cli.jobs).unwrap());
    m.insert("out_dir".into(), serde_json::to_value(&cli.out_dir).unwrap());
    v
}

fn run(cli: Cli) -> Result<(), CliError> {
    let resolve = |args: serde_json::Value| config::RunConfig::resolve(cli.config.as_deref(), args);
    let cfg = match &cli.command {
        Command::Synth(_) => {
            let mut v = overrides::<()>(&cli, None);
            // for synth, -o names the output file rather than a directory
            v.as_object_mut().unwrap().remove("out_dir");
            resolve(v)?
        }
        Command::Ingest(a) | Command::Baseline { which: BaselineCmd::Moments(a) } => resolve(overrides(&cli, Some(a)))?,
        Command::Baseline { which: BaselineCmd::Bl(a) } => resolve(overrides(&cli, Some(&a.data)))?,
        Command::Baseline { which: BaselineCmd::Factor(a) } => resolve(overrides(&cli, Some(&a.data)))?,
        Command::Encode(a) | Command::Calibrate(a) | Command::Frontier(a) => resolve(overrides(&cli, Some(a)))?,
        Command::Report(_) => resolve(overrides::<()>(&cli, None))?,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Synth(a) => commands::synth(&cfg, a, cli.seed, cli.out_dir.as_deref()),
        Command::Ingest(_) => commands::ingest(&cfg),
        Command::Encode(_) => commands::encode(&cfg),
        Command::Calibrate(_) => commands::calibrate(&cfg),
        Command::Frontier(_) => commands::frontier(&cfg),
        Command::Baseline { which } => match which {
            BaselineCmd::Moments(_) => commands::moments(&cfg),
            BaselineCmd::Bl(a) => commands::black_litterman(&cfg, &a.views, a.lambda),
            BaselineCmd::Factor(a) => commands::factor(&cfg, a.k, a.lambda, a.max_iters),
        },
        Command::Report(a) => commands::report(&cfg, &a.reports),
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dpt: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
