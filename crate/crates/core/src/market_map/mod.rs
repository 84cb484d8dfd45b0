//! Auto-encode the market, rank stocks by how much communal
//! information they share, and pick the deep-portfolio universe.

mod alternating;

pub use alternating::{
    alternating_objective, train_autoencoder_alternating, AlternatingConfig, AlternatingFit, InnerSolver,
};

use std::io::Write;

use serde::Serialize;

use crate::data::{format_sig10, ReturnsMatrix};
use crate::error::{shape_err, Error, Result};
use crate::neural::{LossTrace, MapConfig, Network};
use crate::scalar::Scalar;

/// Default size of the communal block in [`select_universe`].
pub const DEFAULT_N_COMMUNAL: usize = 10;

/// Trains an `N → hidden → N` autoencoder on the rows (periods) of `x`.
pub fn train_autoencoder<T: Scalar>(x: &ReturnsMatrix<T>, cfg: &MapConfig<T>) -> Result<(Network<T>, LossTrace<T>)> {
    if cfg.hidden.is_empty() {
        return Err(Error::Domain("autoencoder needs at least one hidden layer".into()));
    }
    let v = x.values();
    cfg.fit(v, v)
}

/// Per-stock 2-norm of the reconstruction residual over all rows of `x`.
pub fn reconstruction_errors<T: Scalar>(net: &Network<T>, x: &ReturnsMatrix<T>) -> Result<Vec<T>> {
    let n = x.n_assets();
    if net.n_in() != n || net.n_out() != n {
        return shape_err(format!("market map is {}->{}, panel has {n} assets", net.n_in(), net.n_out()));
    }
    let recon = net.forward_batch(x.values())?;
    let resid = &x.values() - &recon;
    Ok(resid.columns().into_iter().map(|c| c.dot(&c).sqrt()).collect())
}

/// ε_m: mean over rows of the squared reconstruction residual norm.
pub fn market_error<T: Scalar>(net: &Network<T>, x: &ReturnsMatrix<T>) -> Result<T> {
    let errs = reconstruction_errors(net, x)?;
    let total: T = errs.iter().map(|&e| e * e).sum();
    Ok(total / T::from_usize_lossy(x.n_periods()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "T: Scalar")]
pub struct RankedStock<T> {
    pub ticker: String,
    pub reconstruction_error: T,
}

/// Stocks sorted from most communal (smallest reconstruction error) to least.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "T: Scalar")]
pub struct CommunalRanking<T> {
    entries: Vec<RankedStock<T>>,
}

impl<T: Scalar> CommunalRanking<T> {
    pub fn entries(&self) -> &[RankedStock<T>] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Tickers in ranking order.
    pub fn order(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.ticker.as_str()).collect()
    }

    pub fn error_of(&self, ticker: &str) -> Option<T> {
        self.entries.iter().find(|e| e.ticker == ticker).map(|e| e.reconstruction_error)
    }

    /// CSV with header `rank,ticker,reconstruction_error`; ranks start at 1.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "rank,ticker,reconstruction_error")?;
        for (i, e) in self.entries.iter().enumerate() {
            writeln!(out, "{},{},{}", i + 1, e.ticker, format_sig10(e.reconstruction_error))?;
        }
        Ok(())
    }
}

/// Sorts ascending by error; equal errors fall back to ticker order.
pub fn rank_communal<T: Scalar, S: AsRef<str>>(errors: &[T], tickers: &[S]) -> Result<CommunalRanking<T>> {
    if errors.len() != tickers.len() {
        return shape_err(format!("{} errors for {} tickers", errors.len(), tickers.len()));
    }
    if let Some(e) = errors.iter().find(|e| !e.is_finite() || **e < T::zero()) {
        return Err(Error::Domain(format!("reconstruction errors must be finite and >= 0, got {e}")));
    }
    let mut entries: Vec<RankedStock<T>> = errors
        .iter()
        .zip(tickers)
        .map(|(&e, t)| RankedStock { ticker: t.as_ref().to_string(), reconstruction_error: e })
        .collect();
    entries.sort_by(|a, b| {
        a.reconstruction_error
            .partial_cmp(&b.reconstruction_error)
            .expect("finite errors")
            .then_with(|| a.ticker.cmp(&b.ticker))
    });
    Ok(CommunalRanking { entries })
}

/// The `n_communal` most communal stocks followed by the
/// `n_total − n_communal` least communal ones.
///
/// The second block keeps ranking order, so it is a suffix of
/// [`CommunalRanking::order`].
pub fn select_universe<T: Scalar>(
    ranking: &CommunalRanking<T>,
    n_total: usize,
    n_communal: usize,
) -> Result<Vec<String>> {
    let n = ranking.len();
    if n_communal > n_total {
        return Err(Error::Selection(format!("n_communal ({n_communal}) exceeds n_total ({n_total})")));
    }
    if n_total > n {
        return Err(Error::Selection(format!("cannot select {n_total} stocks from a universe of {n}")));
    }
    if n_total == 0 {
        return Err(Error::Selection("n_total must be >= 1".into()));
    }
    let order = ranking.order();
    let tail = n_total - n_communal;
    Ok(order[..n_communal].iter().chain(order[n - tail..].iter()).map(|s| s.to_string()).collect())
}

/// Trained market map with its diagnostics.
#[derive(Debug, Clone)]
pub struct EncoderReport<T: Scalar> {
    pub network: Network<T>,
    pub trace: LossTrace<T>,
    pub ranking: CommunalRanking<T>,
    /// ε_m on the held-out panel, when one was supplied.
    pub epsilon_m: Option<T>,
}

/// Trains on `calibration`, ranks stocks on the same window, and scores the
/// held-out panel when given. Validation data never reaches the ranking.
pub fn encode<T: Scalar>(
    calibration: &ReturnsMatrix<T>,
    validation: Option<&ReturnsMatrix<T>>,
    cfg: &MapConfig<T>,
) -> Result<EncoderReport<T>> {
    let (network, trace) = train_autoencoder(calibration, cfg)?;
    let errors = reconstruction_errors(&network, calibration)?;
    let ranking = rank_communal(&errors, calibration.tickers())?;
    let epsilon_m = validation
        .map(|v| {
            if v.tickers() != calibration.tickers() {
                return Err(Error::Schema("validation panel has different tickers".into()));
            }
            market_error(&network, v)
        })
        .transpose()?;
    Ok(EncoderReport { network, trace, ranking, epsilon_m })
}
