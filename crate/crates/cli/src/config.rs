use std::path::{Path, PathBuf};

use dpt_core::data::{CsvLayout, SynthSpec};
use dpt_core::frontier::{Amendment, PipelineConfig, SweepKind};
use dpt_core::neural::{Activation, MapConfig, Penalty, TrainConfig};
use dpt_core::portfolio_map::{CalibrationConfig, FoldScheme, Solver, DEFAULT_AMEND_FLOOR, DEFAULT_AMEND_REPLACEMENT};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::CliError;

/// Every knob of a pipeline run, as one flat JSON object. Flags given on the
/// command line replace the matching fields of a `--config` file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub layout: CsvLayout,
    /// Input holds prices rather than returns.
    pub prices: bool,
    /// Synthetic market used when no input file is given.
    pub synth: SynthSpec,

    pub calibration_start: Option<String>,
    pub calibration_end: Option<String>,
    pub validation_start: Option<String>,
    pub validation_end: Option<String>,
    /// Share of rows used for calibration when no ranges are given.
    pub calibration_fraction: f64,

    pub market_hidden: Vec<usize>,
    pub market_activation: Activation,
    pub market_lambda: f64,
    pub market_penalty: Penalty,
    pub market_learning_rate: f64,
    pub market_epochs: usize,
    pub market_batch_size: usize,
    pub market_init_scale: Option<f64>,

    pub portfolio_hidden: Vec<usize>,
    pub portfolio_activation: Activation,
    pub portfolio_lambda: f64,
    pub portfolio_penalty: Penalty,
    pub portfolio_learning_rate: f64,
    pub portfolio_epochs: usize,
    pub portfolio_batch_size: usize,
    pub portfolio_init_scale: Option<f64>,
    pub k_folds: usize,
    pub fold_scheme: FoldScheme,
    pub solver: Solver,

    /// Ticker used as the target; `None` tracks the equal-weight index.
    pub target: Option<String>,
    /// Wide CSV with a single target column, aligned to the data by date.
    pub target_file: Option<PathBuf>,
    pub amend_target: bool,
    pub amend_floor: f64,
    pub amend_replacement: f64,

    pub sweep: SweepKind,
    pub grid: Vec<usize>,
    pub lambda_grid: Vec<f64>,
    pub n_stocks: Option<usize>,
    pub n_communal: usize,

    pub seed: u64,
    pub jobs: Option<usize>,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let train = TrainConfig::<f64>::default();
        let map = MapConfig::<f64>::default();
        let cal = CalibrationConfig::<f64>::default();
        RunConfig {
            input: None,
            layout: CsvLayout::Wide,
            prices: false,
            synth: SynthSpec::default(),
            calibration_start: None,
            calibration_end: None,
            validation_start: None,
            validation_end: None,
            calibration_fraction: 0.5,
            market_hidden: map.hidden.clone(),
            market_activation: map.hidden_activation,
            market_lambda: train.lambda,
            market_penalty: train.penalty,
            market_learning_rate: train.learning_rate,
            market_epochs: train.epochs,
            market_batch_size: train.batch_size,
            market_init_scale: None,
            portfolio_hidden: map.hidden,
            portfolio_activation: map.hidden_activation,
            portfolio_lambda: train.lambda,
            portfolio_penalty: train.penalty,
            portfolio_learning_rate: train.learning_rate,
            portfolio_epochs: train.epochs,
            portfolio_batch_size: train.batch_size,
            portfolio_init_scale: None,
            k_folds: cal.k_folds,
            fold_scheme: cal.fold_scheme,
            solver: cal.solver,
            target: None,
            target_file: None,
            amend_target: false,
            amend_floor: DEFAULT_AMEND_FLOOR,
            amend_replacement: DEFAULT_AMEND_REPLACEMENT,
            sweep: SweepKind::Stocks,
            grid: Vec::new(),
            lambda_grid: Vec::new(),
            n_stocks: None,
            n_communal: dpt_core::market_map::DEFAULT_N_COMMUNAL,
            seed: 0,
            jobs: None,
            out_dir: PathBuf::from("."),
        }
    }
}

impl RunConfig {
    /// Reads an optional config file, then applies `overrides` on top.
    /// Override entries that are `null` are ignored.
    pub fn resolve(file: Option<&Path>, overrides: Value) -> Result<Self, CliError> {
        let mut doc = match file {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Io(format!("reading config {}: {e}", p.display())))?;
                match serde_json::from_str::<Value>(&text) {
                    Ok(Value::Object(m)) => m,
                    Ok(_) => return Err(CliError::Config(format!("{}: config must be a JSON object", p.display()))),
                    Err(e) => return Err(CliError::Config(format!("{}: {e}", p.display()))),
                }
            }
            None => Map::new(),
        };
        if let Value::Object(m) = overrides {
            for (k, v) in m {
                if !v.is_null() {
                    doc.insert(k, v);
                }
            }
        }
        let cfg: RunConfig = serde_json::from_value(Value::Object(doc)).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<(), CliError> {
        if !(self.calibration_fraction > 0.0 && self.calibration_fraction < 1.0) {
            return Err(CliError::Config(format!(
                "calibration_fraction must lie in (0, 1), got {}",
                self.calibration_fraction
            )));
        }
        if self.jobs == Some(0) {
            return Err(CliError::Config("jobs must be >= 1".into()));
        }
        if self.target.is_some() && self.target_file.is_some() {
            return Err(CliError::Config("give either target or target_file, not both".into()));
        }
        Ok(())
    }

    fn train(&self, prefix: Prefix) -> TrainConfig<f64> {
        let (lambda, penalty, learning_rate, epochs, batch_size, init_scale) = match prefix {
            Prefix::Market => (
                self.market_lambda,
                self.market_penalty,
                self.market_learning_rate,
                self.market_epochs,
                self.market_batch_size,
                self.market_init_scale,
            ),
            Prefix::Portfolio => (
                self.portfolio_lambda,
                self.portfolio_penalty,
                self.portfolio_learning_rate,
                self.portfolio_epochs,
                self.portfolio_batch_size,
                self.portfolio_init_scale,
            ),
        };
        TrainConfig { lambda, penalty, learning_rate, epochs, batch_size, seed: self.seed, init_scale }
    }

    pub fn market_map(&self) -> MapConfig<f64> {
        MapConfig {
            hidden: self.market_hidden.clone(),
            hidden_activation: self.market_activation,
            output_activation: Activation::Linear,
            train: self.train(Prefix::Market),
        }
    }

    pub fn calibration(&self) -> CalibrationConfig<f64> {
        CalibrationConfig {
            map: MapConfig {
                hidden: self.portfolio_hidden.clone(),
                hidden_activation: self.portfolio_activation,
                output_activation: Activation::Linear,
                train: self.train(Prefix::Portfolio),
            },
            k_folds: self.k_folds,
            fold_scheme: self.fold_scheme,
            solver: self.solver,
        }
    }

    pub fn pipeline(&self) -> PipelineConfig<f64> {
        PipelineConfig {
            market: self.market_map(),
            calibration: self.calibration(),
            n_communal: self.n_communal,
            amendment: self
                .amend_target
                .then_some(Amendment { floor: self.amend_floor, replacement: self.amend_replacement }),
        }
    }
}

#[derive(Clone, Copy)]
enum Prefix {
    Market,
    Portfolio,
}
