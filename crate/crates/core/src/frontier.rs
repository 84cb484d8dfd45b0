//! Validation errors, the efficient deep frontier, and
//! verification by comparing frontiers.
//!
//! Both errors are per-row means, so frontiers built on validation windows of
//! different lengths stay comparable.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{format_sig10, split, ReturnsMatrix, SplitSpec};
use crate::error::{shape_err, Error, Result};
use crate::market_map::{encode, market_error, select_universe, EncoderReport, DEFAULT_N_COMMUNAL};
use crate::neural::{MapConfig, Network};
use crate::portfolio_map::{amend_target, calibrate, track, CalibrationConfig, CalibrationReport, TargetSeries};
use crate::scalar::Scalar;

/// Returns `(ε_m, ε_p)` on a held-out window.
pub fn validation_errors<T: Scalar>(
    market_net: &Network<T>,
    portfolio_net: &Network<T>,
    x_hat: &ReturnsMatrix<T>,
    x_hat_sel: &ReturnsMatrix<T>,
    y_hat: &TargetSeries<T>,
) -> Result<(T, T)> {
    if x_hat.n_periods() != x_hat_sel.n_periods() || x_hat.timestamps() != x_hat_sel.timestamps() {
        return shape_err("selected panel does not cover the same periods as the full panel");
    }
    if let Some(t) = x_hat_sel.tickers().iter().find(|t| x_hat.ticker_index(t).is_none()) {
        return shape_err(format!("selected ticker {t:?} is not in the validation panel"));
    }
    if y_hat.len() != x_hat.n_periods() {
        return shape_err(format!("target has {} values for {} periods", y_hat.len(), x_hat.n_periods()));
    }
    let eps_m = market_error(market_net, x_hat)?;
    let tracker = track(portfolio_net, x_hat_sel)?;
    Ok((eps_m, mean_sq_diff(&y_hat.values, &tracker)))
}

fn mean_sq_diff<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum::<T>() / T::from_usize_lossy(a.len())
}

/// Target and tracker returns over one window, aligned by date.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TrackingSeries<T> {
    pub dates: Vec<String>,
    pub target: Vec<T>,
    pub tracker: Vec<T>,
}

impl<T: Scalar> TrackingSeries<T> {
    pub fn mse(&self) -> T {
        mean_sq_diff(&self.target, &self.tracker)
    }

    /// CSV with header `date,target,tracker`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "date,target,tracker")?;
        for ((d, &y), &p) in self.dates.iter().zip(&self.target).zip(&self.tracker) {
            writeln!(out, "{d},{},{}", format_sig10(y), format_sig10(p))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Amendment<T> {
    pub floor: T,
    pub replacement: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepKind {
    /// Stock count varies at fixed λ.
    #[default]
    Stocks,
    /// λ varies at a fixed stock count; the same λ is used by both maps.
    Lambda,
}

/// Settings shared by every point of a frontier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", default)]
pub struct PipelineConfig<T> {
    pub market: MapConfig<T>,
    pub calibration: CalibrationConfig<T>,
    /// Number of most-communal stocks kept in every universe. A grid point
    /// below this count uses only communal stocks.
    pub n_communal: usize,
    /// Applied to the calibration and validation targets alike.
    pub amendment: Option<Amendment<T>>,
}

impl<T: Scalar> Default for PipelineConfig<T> {
    fn default() -> Self {
        PipelineConfig {
            market: MapConfig::default(),
            calibration: CalibrationConfig::default(),
            n_communal: DEFAULT_N_COMMUNAL,
            amendment: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct FrontierPoint<T> {
    pub n_stocks: usize,
    pub epsilon_m: T,
    pub epsilon_p: T,
    pub lambda: T,
    pub seed: u64,
    pub tickers: Vec<String>,
    /// Calibration-window MSE of the delivered portfolio map.
    pub in_sample_error: T,
    /// Mean held-out fold error from cross-validation.
    pub cv_error: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Frontier<T> {
    pub sweep: SweepKind,
    pub points: Vec<FrontierPoint<T>>,
    pub config: PipelineConfig<T>,
    pub split: SplitSpec,
    pub target: String,
}

impl<T: Scalar> Frontier<T> {
    /// CSV with header `n_stocks,lambda,epsilon_m,epsilon_p`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "n_stocks,lambda,epsilon_m,epsilon_p")?;
        for p in &self.points {
            writeln!(
                out,
                "{},{},{},{}",
                p.n_stocks,
                format_sig10(p.lambda),
                format_sig10(p.epsilon_m),
                format_sig10(p.epsilon_p)
            )?;
        }
        Ok(())
    }
}

/// Everything produced for one frontier point.
#[derive(Debug, Clone)]
pub struct PointDetail<T: Scalar> {
    pub market: EncoderReport<T>,
    pub portfolio: CalibrationReport<T>,
    pub calibration_tracking: TrackingSeries<T>,
    pub validation_tracking: TrackingSeries<T>,
}

#[derive(Debug, Clone)]
pub struct FrontierRun<T: Scalar> {
    pub frontier: Frontier<T>,
    /// One entry per frontier point, in the same order.
    pub details: Vec<PointDetail<T>>,
}

struct Windows<T: Scalar> {
    x_cal: ReturnsMatrix<T>,
    x_val: ReturnsMatrix<T>,
    y_cal: TargetSeries<T>,
    y_val: TargetSeries<T>,
}

fn prepare<T: Scalar>(
    data: &ReturnsMatrix<T>,
    target: &TargetSeries<T>,
    spec: &SplitSpec,
    cfg: &PipelineConfig<T>,
) -> Result<Windows<T>> {
    if target.len() != data.n_periods() {
        return shape_err(format!("target has {} values for {} periods", target.len(), data.n_periods()));
    }
    let (x_cal, x_val) = split(data, spec)?;
    let rows_in = |r: &crate::data::TimeRange| -> Vec<usize> {
        data.timestamps().iter().enumerate().filter(|(_, ts)| r.contains(ts)).map(|(i, _)| i).collect()
    };
    let mut y_cal = target.select(&rows_in(&spec.calibration));
    let mut y_val = target.select(&rows_in(&spec.validation));
    if let Some(a) = cfg.amendment {
        y_cal = amend_target(&y_cal, a.floor, a.replacement)?;
        y_val = amend_target(&y_val, a.floor, a.replacement)?;
    }
    Ok(Windows { x_cal, x_val, y_cal, y_val })
}

fn run_point<T: Scalar>(
    w: &Windows<T>,
    market: EncoderReport<T>,
    n: usize,
    n_communal: usize,
    calibration: &CalibrationConfig<T>,
) -> Result<(FrontierPoint<T>, PointDetail<T>)> {
    let tickers = select_universe(&market.ranking, n, n_communal.min(n)).map_err(|e| e.context("selection"))?;
    let sel_cal = w.x_cal.select_tickers(&tickers)?;
    let sel_val = w.x_val.select_tickers(&tickers)?;
    let portfolio = calibrate(&sel_cal, &w.y_cal, calibration).map_err(|e| e.context("calibration"))?;
    let (epsilon_m, epsilon_p) = validation_errors(&market.network, &portfolio.network, &w.x_val, &sel_val, &w.y_val)
        .map_err(|e| e.context("validation"))?;
    let calibration_tracking = TrackingSeries {
        dates: w.x_cal.timestamps().to_vec(),
        target: w.y_cal.values.clone(),
        tracker: track(&portfolio.network, &sel_cal)?,
    };
    let validation_tracking = TrackingSeries {
        dates: w.x_val.timestamps().to_vec(),
        target: w.y_val.values.clone(),
        tracker: track(&portfolio.network, &sel_val)?,
    };
    let point = FrontierPoint {
        n_stocks: n,
        epsilon_m,
        epsilon_p,
        lambda: calibration.map.train.lambda,
        seed: calibration.map.train.seed,
        tickers,
        in_sample_error: portfolio.in_sample_error,
        cv_error: portfolio.mean_cv_error,
    };
    Ok((point, PointDetail { market, portfolio, calibration_tracking, validation_tracking }))
}

fn finish<T: Scalar>(
    results: Vec<(FrontierPoint<T>, PointDetail<T>)>,
    sweep: SweepKind,
    cfg: &PipelineConfig<T>,
    spec: &SplitSpec,
    target: &TargetSeries<T>,
) -> FrontierRun<T> {
    let (points, details) = results.into_iter().unzip();
    FrontierRun {
        frontier: Frontier { sweep, points, config: cfg.clone(), split: spec.clone(), target: target.label.clone() },
        details,
    }
}

/// Traces the frontier over an ascending stock-count grid.
///
/// The market map is trained and stocks are ranked once on the calibration
/// window; grid points then run concurrently and are returned in grid order.
pub fn build_frontier<T: Scalar>(
    data: &ReturnsMatrix<T>,
    target: &TargetSeries<T>,
    spec: &SplitSpec,
    grid: &[usize],
    cfg: &PipelineConfig<T>,
) -> Result<FrontierRun<T>> {
    if grid.is_empty() {
        return Err(Error::Domain("stock grid is empty".into()));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Domain(format!("stock grid must be strictly increasing, got {grid:?}")));
    }
    if grid[0] == 0 || grid[grid.len() - 1] > data.n_assets() {
        return Err(Error::Selection(format!("grid values must lie in 1..={}, got {grid:?}", data.n_assets())));
    }
    let w = prepare(data, target, spec, cfg)?;
    let market = encode(&w.x_cal, Some(&w.x_val), &cfg.market).map_err(|e| e.context("market map"))?;
    let results = grid
        .par_iter()
        .map(|&n| {
            run_point(&w, market.clone(), n, cfg.n_communal, &cfg.calibration)
                .map_err(|e| e.context(format!("grid point n_stocks={n}")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(finish(results, SweepKind::Stocks, cfg, spec, target))
}

/// Regularization sweep at a fixed stock count. Each λ retrains both maps
/// with that penalty weight, so the ranking may change along the sweep.
pub fn build_lambda_frontier<T: Scalar>(
    data: &ReturnsMatrix<T>,
    target: &TargetSeries<T>,
    spec: &SplitSpec,
    n_stocks: usize,
    lambdas: &[T],
    cfg: &PipelineConfig<T>,
) -> Result<FrontierRun<T>> {
    if lambdas.is_empty() {
        return Err(Error::Domain("lambda grid is empty".into()));
    }
    if lambdas.windows(2).any(|w| w[0].is_nan() || w[1].is_nan() || w[0] >= w[1]) {
        return Err(Error::Domain("lambda grid must be strictly increasing".into()));
    }
    if n_stocks == 0 || n_stocks > data.n_assets() {
        return Err(Error::Selection(format!("n_stocks must lie in 1..={}, got {n_stocks}", data.n_assets())));
    }
    let w = prepare(data, target, spec, cfg)?;
    let results = lambdas
        .par_iter()
        .map(|&lambda| {
            let mut market_cfg = cfg.market.clone();
            market_cfg.train.lambda = lambda;
            let mut cal_cfg = cfg.calibration.clone();
            cal_cfg.map.train.lambda = lambda;
            encode(&w.x_cal, Some(&w.x_val), &market_cfg)
                .map_err(|e| e.context("market map"))
                .and_then(|market| run_point(&w, market, n_stocks, cfg.n_communal, &cal_cfg))
                .map_err(|e| e.context(format!("grid point lambda={lambda}")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(finish(results, SweepKind::Lambda, cfg, spec, target))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "T: Scalar")]
pub struct PointVerdict<T> {
    pub n_stocks: usize,
    pub lambda: T,
    /// Index of the frontier with the smallest ε_p; ties go to the first listed.
    pub best: usize,
    /// Every frontier attaining the minimum.
    pub tied: Vec<usize>,
    pub epsilon_p: Vec<T>,
}

impl<T> PointVerdict<T> {
    pub fn is_tie(&self) -> bool {
        self.tied.len() > 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "T: Scalar")]
pub struct VerificationReport<T> {
    pub points: Vec<PointVerdict<T>>,
    /// First frontier whose ε_p is no larger than every other frontier's at
    /// every grid point.
    pub dominant: Option<usize>,
    /// Whether the dominant frontier is strictly better than each rival
    /// somewhere.
    pub strictly_dominant: bool,
}

/// Per-point model selection across aligned frontiers.
pub fn compare_frontiers<T: Scalar>(frontiers: &[Frontier<T>]) -> Result<VerificationReport<T>> {
    let Some(first) = frontiers.first() else {
        return Err(Error::Comparison("no frontiers to compare".into()));
    };
    // points align on the swept variable; the other one may differ between
    // frontiers, which is what a comparison usually varies
    let same_point = |a: &FrontierPoint<T>, b: &FrontierPoint<T>| match first.sweep {
        SweepKind::Stocks => a.n_stocks == b.n_stocks,
        SweepKind::Lambda => a.lambda == b.lambda,
    };
    for (i, f) in frontiers.iter().enumerate().skip(1) {
        let aligned = f.sweep == first.sweep
            && f.points.len() == first.points.len()
            && f.points.iter().zip(&first.points).all(|(a, b)| same_point(a, b));
        if !aligned {
            return Err(Error::Comparison(format!("frontier {i} is not on the same grid as frontier 0")));
        }
    }
    let points = first
        .points
        .iter()
        .enumerate()
        .map(|(j, p)| {
            let eps: Vec<T> = frontiers.iter().map(|f| f.points[j].epsilon_p).collect();
            let min = eps.iter().copied().fold(T::infinity(), T::min);
            let tied: Vec<usize> = (0..eps.len()).filter(|&i| eps[i] == min).collect();
            PointVerdict { n_stocks: p.n_stocks, lambda: p.lambda, best: tied[0], tied, epsilon_p: eps }
        })
        .collect::<Vec<_>>();

    let weakly_best = |i: usize| points.iter().all(|v| v.epsilon_p.iter().all(|&e| v.epsilon_p[i] <= e));
    let dominant = (0..frontiers.len()).find(|&i| weakly_best(i));
    let strictly_dominant = dominant.is_some_and(|d| {
        (0..frontiers.len()).filter(|&r| r != d).all(|r| points.iter().any(|v| v.epsilon_p[d] < v.epsilon_p[r]))
    });
    Ok(VerificationReport { points, dominant, strictly_dominant })
}
