//! Calibrate a portfolio-map network from the selected stocks to a
//! target return series, with k-fold cross-validation on the calibration
//! window.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::ReturnsMatrix;
use crate::error::{shape_err, Error, Result};
use crate::linalg::lstsq;
use crate::neural::{Layer, LossTrace, MapConfig, Network};
use crate::rng::seeded;
use crate::scalar::Scalar;

pub const DEFAULT_AMEND_FLOOR: f64 = -0.05;
pub const DEFAULT_AMEND_REPLACEMENT: f64 = 0.05;

/// Target returns `Y`, one per period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TargetSeries<T> {
    pub label: String,
    pub values: Vec<T>,
    pub amended: bool,
    /// Amendment parameters; only meaningful when `amended` is set.
    pub floor: T,
    pub replacement: T,
}

impl<T: Scalar> TargetSeries<T> {
    pub fn new(label: impl Into<String>, values: Vec<T>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Data(format!("target contains non-finite value {v}")));
        }
        Ok(TargetSeries {
            label: label.into(),
            values,
            amended: false,
            floor: T::lit(DEFAULT_AMEND_FLOOR),
            replacement: T::lit(DEFAULT_AMEND_REPLACEMENT),
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Sub-series at the given row positions.
    pub fn select(&self, rows: &[usize]) -> Self {
        TargetSeries {
            label: self.label.clone(),
            values: rows.iter().map(|&r| self.values[r]).collect(),
            amended: self.amended,
            floor: self.floor,
            replacement: self.replacement,
        }
    }
}

/// Replaces every value strictly below `floor` with `replacement`.
pub fn amend_target<T: Scalar>(y: &TargetSeries<T>, floor: T, replacement: T) -> Result<TargetSeries<T>> {
    if !(floor.is_finite() && replacement.is_finite()) {
        return Err(Error::Domain("amendment floor and replacement must be finite".into()));
    }
    if replacement < floor {
        return Err(Error::Domain(format!("replacement {replacement} lies below the floor {floor}")));
    }
    Ok(TargetSeries {
        label: y.label.clone(),
        values: y.values.iter().map(|&v| if v < floor { replacement } else { v }).collect(),
        amended: true,
        floor,
        replacement,
    })
}

/// Where the target series comes from.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "ticker")]
pub enum TargetSource {
    /// Equal-weight average of every asset in the panel.
    #[default]
    EqualWeight,
    /// One column of the panel; it is removed from the investable universe.
    Ticker(String),
}

/// Splits a panel into the investable universe and the target series.
pub fn resolve_target<T: Scalar>(
    data: &ReturnsMatrix<T>,
    source: &TargetSource,
) -> Result<(ReturnsMatrix<T>, TargetSeries<T>)> {
    match source {
        TargetSource::EqualWeight => Ok((data.clone(), TargetSeries::new("equal_weight", data.equal_weight_index())?)),
        TargetSource::Ticker(t) => {
            let col = data.column(t).ok_or_else(|| Error::Selection(format!("target ticker {t:?} not in data")))?;
            let y = TargetSeries::new(t.clone(), col.to_vec())?;
            Ok((data.drop_ticker(t)?, y))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FoldScheme {
    /// Seeded random assignment of rows to folds.
    #[default]
    Random,
    /// Consecutive blocks of rows, in time order.
    Contiguous,
}

/// Partitions `0..n_rows` into `k` folds whose sizes differ by at most one.
/// Each fold's indices are sorted.
pub fn kfold_split(n_rows: usize, k: usize, seed: u64, scheme: FoldScheme) -> Result<Vec<Vec<usize>>> {
    if k < 2 || k > n_rows {
        return Err(Error::Domain(format!("k must be in 2..={n_rows}, got {k}")));
    }
    let mut idx: Vec<usize> = (0..n_rows).collect();
    if scheme == FoldScheme::Random {
        idx.shuffle(&mut seeded(seed));
    }
    let (base, extra) = (n_rows / k, n_rows % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        let mut fold = idx[start..start + size].to_vec();
        fold.sort_unstable();
        folds.push(fold);
        start += size;
    }
    Ok(folds)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Solver {
    /// Penalized mini-batch SGD.
    #[default]
    Sgd,
    /// Closed-form least squares; needs an all-linear architecture and
    /// `lambda = 0`. Used as a diagnostic for the deep configuration.
    ExactLinear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", default)]
pub struct CalibrationConfig<T> {
    pub map: MapConfig<T>,
    pub k_folds: usize,
    pub fold_scheme: FoldScheme,
    pub solver: Solver,
}

impl<T: Scalar> Default for CalibrationConfig<T> {
    fn default() -> Self {
        CalibrationConfig {
            map: MapConfig::default(),
            k_folds: 4,
            fold_scheme: FoldScheme::Random,
            solver: Solver::Sgd,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(bound = "T: Scalar")]
pub struct CalibrationReport<T: Scalar> {
    pub network: Network<T>,
    /// Held-out MSE of each fold.
    pub fold_errors: Vec<T>,
    pub mean_cv_error: T,
    /// MSE of the delivered network on all calibration rows.
    pub in_sample_error: T,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<LossTrace<T>>,
}

impl<T: Scalar> CalibrationReport<T> {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn mse<T: Scalar>(a: &[T], b: &[T]) -> T {
    let s: T = a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum();
    s / T::from_usize_lossy(a.len())
}

/// Packs an affine map `x·w + c` into a network with the configured
/// all-linear architecture.
fn affine_network<T: Scalar>(cfg: &MapConfig<T>, weights: &Array1<T>, intercept: T) -> Result<Network<T>> {
    let widths = cfg.widths(weights.len(), 1);
    let acts = cfg.activations();
    let last = acts.len() - 1;
    let layers = widths
        .windows(2)
        .zip(&acts)
        .enumerate()
        .map(|(i, (w, &act))| {
            let mut m = Array2::<T>::zeros((w[1], w[0]));
            if i == 0 {
                m.row_mut(0).assign(weights);
            } else {
                m[[0, 0]] = T::one();
            }
            let mut b = Array1::<T>::zeros(w[1]);
            if i == last {
                b[0] = intercept;
            }
            Layer::new(m, b, act)
        })
        .collect::<Result<Vec<_>>>()?;
    Network::new(layers)
}

fn fit_once<T: Scalar>(
    x: ArrayView2<T>,
    y: &[T],
    cfg: &CalibrationConfig<T>,
    seed: u64,
) -> Result<(Network<T>, Option<LossTrace<T>>)> {
    match cfg.solver {
        Solver::Sgd => {
            let mut map = cfg.map.clone();
            map.train.seed = seed;
            let yy = Array2::from_shape_vec((y.len(), 1), y.to_vec()).expect("column vector");
            let (net, trace) = map.fit(x, yy.view())?;
            Ok((net, Some(trace)))
        }
        Solver::ExactLinear => {
            let design = ndarray::concatenate(Axis(1), &[Array2::<T>::ones((x.nrows(), 1)).view(), x])
                .map_err(|e| Error::Shape(e.to_string()))?;
            let coef = lstsq(design.view(), Array1::from(y.to_vec()).view())?;
            let intercept = coef[0];
            let w = coef.slice(ndarray::s![1..]).to_owned();
            Ok((affine_network(&cfg.map, &w, intercept)?, None))
        }
    }
}

/// Cross-validated calibration of the portfolio map, then a final fit on
/// every calibration row. Fold `i` trains with seed `seed + i`; the final fit
/// uses `seed` itself.
pub fn calibrate<T: Scalar>(
    x_sel: &ReturnsMatrix<T>,
    y: &TargetSeries<T>,
    cfg: &CalibrationConfig<T>,
) -> Result<CalibrationReport<T>> {
    if y.len() != x_sel.n_periods() {
        return shape_err(format!("target has {} values for {} periods", y.len(), x_sel.n_periods()));
    }
    if cfg.solver == Solver::ExactLinear {
        if !cfg.map.is_linear() {
            return Err(Error::Domain("exact-linear solver needs linear activations".into()));
        }
        if cfg.map.train.lambda != T::zero() {
            return Err(Error::Domain("exact-linear solver needs lambda = 0".into()));
        }
    }
    cfg.map.train.validate()?;
    let x = x_sel.values();
    let seed = cfg.map.train.seed;
    let folds = kfold_split(x.nrows(), cfg.k_folds, seed, cfg.fold_scheme)?;

    let fold_errors = folds
        .par_iter()
        .enumerate()
        .map(|(i, held)| {
            let mut is_held = vec![false; x.nrows()];
            held.iter().for_each(|&r| is_held[r] = true);
            let train: Vec<usize> = (0..x.nrows()).filter(|&r| !is_held[r]).collect();
            let xt = x.select(Axis(0), &train);
            let yt: Vec<T> = train.iter().map(|&r| y.values[r]).collect();
            let (net, _) = fit_once(xt.view(), &yt, cfg, seed.wrapping_add(i as u64))
                .map_err(|e| e.context(format!("fold {}", i + 1)))?;
            let pred = track_values(&net, x.select(Axis(0), held).view())?;
            let truth: Vec<T> = held.iter().map(|&r| y.values[r]).collect();
            Ok(mse(&truth, &pred))
        })
        .collect::<Result<Vec<T>>>()?;

    let (network, trace) = fit_once(x, &y.values, cfg, seed).map_err(|e| e.context("final fit"))?;
    let in_sample_error = mse(&y.values, &track_values(&network, x)?);
    let mean_cv_error = fold_errors.iter().copied().sum::<T>() / T::from_usize_lossy(fold_errors.len());
    Ok(CalibrationReport { network, fold_errors, mean_cv_error, in_sample_error, trace })
}

fn track_values<T: Scalar>(net: &Network<T>, x: ArrayView2<T>) -> Result<Vec<T>> {
    if net.n_out() != 1 {
        return shape_err(format!("portfolio map must have one output, has {}", net.n_out()));
    }
    Ok(net.forward_batch(x)?.column(0).to_vec())
}

/// Tracker return per period: the portfolio map applied to each row.
pub fn track<T: Scalar>(net: &Network<T>, x_sel: &ReturnsMatrix<T>) -> Result<Vec<T>> {
    track_values(net, x_sel.values())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::Activation;
    use ndarray::array;

    #[test]
    fn amendment_is_strict_and_idempotent() {
        let y = TargetSeries::new("t", vec![-0.06, 0.01, -0.05]).unwrap();
        let a = amend_target(&y, -0.05, 0.05).unwrap();
        assert_eq!(a.values, vec![0.05, 0.01, -0.05]);
        assert!(a.amended);
        let aa = amend_target(&a, -0.05, 0.05).unwrap();
        assert_eq!(aa.values, a.values);
        let calm = TargetSeries::new("t", vec![0.0, -0.01]).unwrap();
        assert_eq!(amend_target(&calm, -0.05, 0.05).unwrap().values, calm.values);
    }

    #[test]
    fn fold_sizes() {
        let f = kfold_split(100, 4, 1, FoldScheme::Random).unwrap();
        assert!(f.iter().all(|x| x.len() == 25));
        let mut sizes: Vec<usize> = kfold_split(10, 3, 1, FoldScheme::Random).unwrap().iter().map(Vec::len).collect();
        sizes.sort();
        assert_eq!(sizes, vec![3, 3, 4]);
        let c = kfold_split(6, 3, 0, FoldScheme::Contiguous).unwrap();
        assert_eq!(c, vec![vec![0, 1], vec![2, 3], vec![4, 5]]);
        assert!(kfold_split(5, 1, 0, FoldScheme::Random).is_err());
        assert!(kfold_split(5, 6, 0, FoldScheme::Random).is_err());
    }

    #[test]
    fn zero_net_with_bias_tracks_constant() {
        let net =
            Network::new(vec![Layer::new(Array2::zeros((1, 2)), array![0.001], Activation::Linear).unwrap()]).unwrap();
        let x = ReturnsMatrix::new(
            array![[0.1, 0.2], [0.3, 0.4], [0.0, 0.0]],
            vec!["A".into(), "B".into()],
            vec!["1".into(), "2".into(), "3".into()],
        )
        .unwrap();
        assert_eq!(track(&net, &x).unwrap(), vec![0.001; 3]);
    }

    #[test]
    fn affine_packing_reproduces_affine_map() {
        let cfg: MapConfig<f64> =
            MapConfig { hidden: vec![3, 2], hidden_activation: Activation::Linear, ..Default::default() };
        let net = affine_network(&cfg, &array![0.5, -1.0], 0.25).unwrap();
        let out = net.forward(array![2.0, 1.0].view()).unwrap();
        assert_eq!(out[0], 0.25);
    }
}
