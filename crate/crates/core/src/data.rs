//! Return panels: loading, writing, price conversion, splitting into
//! calibration and validation windows, and a seeded synthetic market.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use chrono::{Duration, NaiveDate};
use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::seeded;
use crate::scalar::Scalar;

/// A dense `T × N` panel of per-period simple returns.
///
/// Rows are periods (ordered by timestamp), columns are assets.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnsMatrix<T: Scalar> {
    values: Array2<T>,
    tickers: Vec<String>,
    timestamps: Vec<String>,
}

impl<T: Scalar> ReturnsMatrix<T> {
    pub fn new(values: Array2<T>, tickers: Vec<String>, timestamps: Vec<String>) -> Result<Self> {
        let (t, n) = values.dim();
        if tickers.len() != n {
            return Err(Error::Shape(format!("{n} columns but {} tickers", tickers.len())));
        }
        if timestamps.len() != t {
            return Err(Error::Shape(format!("{t} rows but {} timestamps", timestamps.len())));
        }
        if t < 2 || n < 1 {
            return Err(Error::Shape(format!("need at least 2 periods and 1 asset, got {t}x{n}")));
        }
        let mut seen = HashSet::with_capacity(n);
        for tk in &tickers {
            if !seen.insert(tk.as_str()) {
                return Err(Error::Schema(format!("duplicate ticker {tk:?}")));
            }
        }
        for w in timestamps.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::Data(format!("timestamps not strictly increasing: {:?} then {:?}", w[0], w[1])));
            }
        }
        if let Some(((r, c), v)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Data(format!(
                "non-finite value {v} at period {:?}, ticker {:?}",
                timestamps[r], tickers[c]
            )));
        }
        Ok(ReturnsMatrix { values, tickers, timestamps })
    }

    pub fn values(&self) -> ArrayView2<'_, T> {
        self.values.view()
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn timestamps(&self) -> &[String] {
        &self.timestamps
    }

    pub fn n_periods(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_assets(&self) -> usize {
        self.values.ncols()
    }

    pub fn ticker_index(&self, ticker: &str) -> Option<usize> {
        self.tickers.iter().position(|t| t == ticker)
    }

    pub fn column(&self, ticker: &str) -> Option<ArrayView1<'_, T>> {
        self.ticker_index(ticker).map(|i| self.values.column(i))
    }

    /// Sub-panel with the given tickers, in the given order.
    pub fn select_tickers<S: AsRef<str>>(&self, tickers: &[S]) -> Result<Self> {
        let idx = tickers
            .iter()
            .map(|t| {
                self.ticker_index(t.as_ref()).ok_or_else(|| Error::Schema(format!("unknown ticker {:?}", t.as_ref())))
            })
            .collect::<Result<Vec<_>>>()?;
        ReturnsMatrix::new(
            self.values.select(Axis(1), &idx),
            idx.iter().map(|&i| self.tickers[i].clone()).collect(),
            self.timestamps.clone(),
        )
    }

    /// Panel without the named ticker.
    pub fn drop_ticker(&self, ticker: &str) -> Result<Self> {
        let keep: Vec<&String> = self.tickers.iter().filter(|t| *t != ticker).collect();
        if keep.len() == self.tickers.len() {
            return Err(Error::Schema(format!("unknown ticker {ticker:?}")));
        }
        self.select_tickers(&keep)
    }

    pub(crate) fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        ReturnsMatrix::new(
            self.values.select(Axis(0), rows),
            self.tickers.clone(),
            rows.iter().map(|&r| self.timestamps[r].clone()).collect(),
        )
    }

    /// Equal-weighted cross-sectional average return per period.
    pub fn equal_weight_index(&self) -> Vec<T> {
        let n = T::from_usize_lossy(self.n_assets());
        self.values.outer_iter().map(|row| row.sum() / n).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CsvLayout {
    /// `date,TICKER1,...,TICKERN` header, one row per period.
    Wide,
    /// `date,ticker,value` rows.
    Long,
}

impl std::str::FromStr for CsvLayout {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "wide" => Ok(CsvLayout::Wide),
            "long" => Ok(CsvLayout::Long),
            other => Err(format!("unknown layout {other:?} (expected wide or long)")),
        }
    }
}

fn parse_value<T: Scalar>(field: &str, line: usize) -> Result<T> {
    let v: T =
        field.trim().parse().map_err(|_| Error::Parse { line, msg: format!("cannot parse {field:?} as a number") })?;
    if !v.is_finite() {
        return Err(Error::Data(format!("non-finite value {field:?} at line {line}")));
    }
    Ok(v)
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        kind => Error::Parse { line, msg: format!("{kind:?}") },
    }
}

/// Sorts rows by timestamp and builds the panel.
fn assemble<T: Scalar>(mut rows: Vec<(String, Vec<T>)>, tickers: Vec<String>) -> Result<ReturnsMatrix<T>> {
    rows.sort_by(|a, b| a.0.cmp(&b.0));
    if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::Data(format!("duplicate timestamp {:?}", w[0].0)));
    }
    let n = tickers.len();
    let t = rows.len();
    let mut values = Array2::<T>::zeros((t, n));
    let mut stamps = Vec::with_capacity(t);
    for (r, (ts, vals)) in rows.into_iter().enumerate() {
        values.row_mut(r).assign(&ArrayView1::from(&vals));
        stamps.push(ts);
    }
    ReturnsMatrix::new(values, tickers, stamps)
}

pub fn read_returns_csv<T: Scalar, R: Read>(reader: R, layout: CsvLayout) -> Result<ReturnsMatrix<T>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(csv_err)?.clone();
    match layout {
        CsvLayout::Wide => {
            if header.len() < 2 {
                return Err(Error::Parse { line: 1, msg: "header needs a date column and at least one ticker".into() });
            }
            let tickers: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
            let mut seen = HashSet::new();
            for tk in &tickers {
                if tk.is_empty() {
                    return Err(Error::Schema("empty ticker name in header".into()));
                }
                if !seen.insert(tk.clone()) {
                    return Err(Error::Schema(format!("duplicate ticker {tk:?}")));
                }
            }
            let mut rows = Vec::new();
            for rec in rdr.records() {
                let rec = rec.map_err(csv_err)?;
                let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
                if rec.len() != tickers.len() + 1 {
                    return Err(Error::Parse {
                        line,
                        msg: format!("expected {} fields, found {}", tickers.len() + 1, rec.len()),
                    });
                }
                let vals = rec.iter().skip(1).map(|f| parse_value(f, line)).collect::<Result<Vec<T>>>()?;
                rows.push((rec[0].to_string(), vals));
            }
            assemble(rows, tickers)
        }
        CsvLayout::Long => {
            if header.len() != 3 {
                return Err(Error::Parse { line: 1, msg: "long layout header must be date,ticker,value".into() });
            }
            let mut tickers: Vec<String> = Vec::new();
            let mut ticker_pos: HashMap<String, usize> = HashMap::new();
            let mut cells: BTreeMap<String, HashMap<usize, T>> = BTreeMap::new();
            for rec in rdr.records() {
                let rec = rec.map_err(csv_err)?;
                let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
                if rec.len() != 3 {
                    return Err(Error::Parse { line, msg: format!("expected 3 fields, found {}", rec.len()) });
                }
                let ticker = rec[1].to_string();
                if ticker.is_empty() {
                    return Err(Error::Parse { line, msg: "empty ticker".into() });
                }
                let v = parse_value(&rec[2], line)?;
                let col = *ticker_pos.entry(ticker.clone()).or_insert_with(|| {
                    tickers.push(ticker.clone());
                    tickers.len() - 1
                });
                if cells.entry(rec[0].to_string()).or_default().insert(col, v).is_some() {
                    return Err(Error::Data(format!("duplicate cell ({}, {ticker}) at line {line}", &rec[0])));
                }
            }
            let mut rows = Vec::with_capacity(cells.len());
            for (ts, by_col) in cells {
                let mut vals = Vec::with_capacity(tickers.len());
                for (c, tk) in tickers.iter().enumerate() {
                    match by_col.get(&c) {
                        Some(&v) => vals.push(v),
                        None => return Err(Error::Data(format!("missing value for ({ts}, {tk})"))),
                    }
                }
                rows.push((ts, vals));
            }
            assemble(rows, tickers)
        }
    }
}

pub fn load_returns_csv<T: Scalar>(path: impl AsRef<Path>, layout: CsvLayout) -> Result<ReturnsMatrix<T>> {
    let file = std::fs::File::open(path.as_ref())?;
    read_returns_csv(std::io::BufReader::new(file), layout)
}

/// Formats a value with 10 significant digits, using the shortest text that
/// reads back to the rounded value.
pub fn format_sig10<T: Scalar>(v: T) -> String {
    let v = v.to_f64_lossy();
    let rounded: f64 = format!("{v:.9e}").parse().expect("formatted float parses");
    if rounded == 0.0 {
        return "0".to_string();
    }
    format!("{rounded}")
}

/// Writes the panel in wide layout.
pub fn write_returns_csv<T: Scalar, W: Write>(data: &ReturnsMatrix<T>, mut out: W) -> Result<()> {
    let mut line = String::from("date");
    for t in data.tickers() {
        line.push(',');
        line.push_str(t);
    }
    writeln!(out, "{line}")?;
    for (ts, row) in data.timestamps().iter().zip(data.values().outer_iter()) {
        line.clear();
        line.push_str(ts);
        for &v in row.iter() {
            line.push(',');
            line.push_str(&format_sig10(v));
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Simple returns `P_t / P_{t−1} − 1` of a single price series.
pub fn simple_returns<T: Scalar>(prices: &[T]) -> Result<Vec<T>> {
    if let Some(p) = prices.iter().find(|p| p.is_nan() || **p <= T::zero()) {
        return Err(Error::Domain(format!("non-positive price {p}")));
    }
    Ok(prices.windows(2).map(|w| w[1] / w[0] - T::one()).collect())
}

/// Converts a panel of price levels to simple returns `P_t / P_{t−1} − 1`.
pub fn prices_to_returns<T: Scalar>(prices: &ReturnsMatrix<T>) -> Result<ReturnsMatrix<T>> {
    let p = prices.values();
    if let Some(((r, c), v)) = p.indexed_iter().find(|(_, v)| **v <= T::zero()) {
        return Err(Error::Domain(format!(
            "non-positive price {v} at ({}, {})",
            prices.timestamps()[r],
            prices.tickers()[c]
        )));
    }
    let t = p.nrows();
    if t < 3 {
        return Err(Error::Domain(format!("need at least 3 price periods to form 2 returns, got {t}")));
    }
    let mut out = Array2::<T>::zeros((t - 1, p.ncols()));
    for r in 1..t {
        for c in 0..p.ncols() {
            out[[r - 1, c]] = p[[r, c]] / p[[r - 1, c]] - T::one();
        }
    }
    ReturnsMatrix::new(out, prices.tickers().to_vec(), prices.timestamps()[1..].to_vec())
}

/// Half-open timestamp interval `[start, end)`; `None` leaves a side open.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TimeRange {
    pub start: Option<String>,
    pub end: Option<String>,
}

impl TimeRange {
    pub fn new(start: impl Into<String>, end: impl Into<String>) -> Self {
        TimeRange { start: Some(start.into()), end: Some(end.into()) }
    }

    pub fn contains(&self, ts: &str) -> bool {
        self.start.as_deref().is_none_or(|s| ts >= s) && self.end.as_deref().is_none_or(|e| ts < e)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub calibration: TimeRange,
    pub validation: TimeRange,
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let (Some(cal_end), Some(val_start)) = (&self.calibration.end, &self.validation.start) else {
            return Err(Error::Split("calibration range must end before the validation range starts".into()));
        };
        if cal_end > val_start {
            return Err(Error::Split(format!(
                "ranges overlap: calibration ends at {cal_end:?} after validation starts at {val_start:?}"
            )));
        }
        for (name, r) in [("calibration", &self.calibration), ("validation", &self.validation)] {
            if let (Some(s), Some(e)) = (&r.start, &r.end) {
                if s >= e {
                    return Err(Error::Split(format!("{name} range is empty: [{s}, {e})")));
                }
            }
        }
        Ok(())
    }

    /// Calibration on the first `n_calibration` rows, validation on the rest.
    pub fn at_row<T: Scalar>(data: &ReturnsMatrix<T>, n_calibration: usize) -> Result<Self> {
        let ts = data.timestamps();
        if n_calibration < 2 || n_calibration + 2 > ts.len() {
            return Err(Error::Split(format!("cannot split {} periods at row {n_calibration}", ts.len())));
        }
        Ok(SplitSpec {
            calibration: TimeRange { start: Some(ts[0].clone()), end: Some(ts[n_calibration].clone()) },
            validation: TimeRange { start: Some(ts[n_calibration].clone()), end: None },
        })
    }
}

/// Row-disjoint calibration and validation sub-panels.
pub fn split<T: Scalar>(data: &ReturnsMatrix<T>, spec: &SplitSpec) -> Result<(ReturnsMatrix<T>, ReturnsMatrix<T>)> {
    spec.validate()?;
    let pick = |r: &TimeRange, name: &str| -> Result<ReturnsMatrix<T>> {
        let rows: Vec<usize> =
            data.timestamps().iter().enumerate().filter(|(_, ts)| r.contains(ts)).map(|(i, _)| i).collect();
        if rows.len() < 2 {
            return Err(Error::Split(format!("{name} range selects {} rows, need at least 2", rows.len())));
        }
        data.select_rows(&rows)
    };
    Ok((pick(&spec.calibration, "calibration")?, pick(&spec.validation, "validation")?))
}

/// Additive shock injected into one cell of a synthetic market.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Drawdown {
    /// Zero-based column index.
    pub asset: usize,
    /// Zero-based row index.
    pub period: usize,
    pub magnitude: f64,
}

/// Parameters of the linear latent-factor market `r_t = Λ f_t + ε_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub n_assets: usize,
    pub n_periods: usize,
    pub n_latent: usize,
    pub drawdown: Option<Drawdown>,
    pub seed: u64,
    /// Standard deviation of each latent factor per period.
    pub factor_scale: f64,
    /// Standard deviation of the idiosyncratic noise.
    pub noise_scale: f64,
    /// First timestamp; subsequent periods are weekly.
    pub start_date: String,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_assets: 30,
            n_periods: 200,
            n_latent: 3,
            drawdown: None,
            seed: 0,
            factor_scale: 0.02,
            noise_scale: 0.01,
            start_date: "2012-01-06".to_string(),
        }
    }
}

/// Seeded synthetic market with `n_latent` common factors.
///
/// Loadings on the first factor are centered at 1 (a market factor), the
/// remaining loadings are centered at 0. The random draws do not depend on
/// the scales or on the drawdown, so toggling either leaves every other cell
/// unchanged.
pub fn synth_market<T: Scalar>(spec: &SynthSpec) -> Result<ReturnsMatrix<T>> {
    let (n, t, k) = (spec.n_assets, spec.n_periods, spec.n_latent);
    if n == 0 || t < 2 {
        return Err(Error::Domain(format!("need at least 1 asset and 2 periods, got {n} and {t}")));
    }
    if k == 0 || k > n {
        return Err(Error::Domain(format!("n_latent must be in 1..={n}, got {k}")));
    }
    if !(spec.factor_scale >= 0.0 && spec.noise_scale >= 0.0) {
        return Err(Error::Domain("scales must be non-negative".into()));
    }
    if let Some(d) = &spec.drawdown {
        if d.asset >= n || d.period >= t {
            return Err(Error::Domain(format!(
                "drawdown at (asset {}, period {}) outside {t} periods x {n} assets",
                d.asset, d.period
            )));
        }
        if !d.magnitude.is_finite() {
            return Err(Error::Domain("drawdown magnitude must be finite".into()));
        }
    }
    let start = NaiveDate::parse_from_str(&spec.start_date, "%Y-%m-%d")
        .map_err(|e| Error::Domain(format!("bad start date {:?}: {e}", spec.start_date)))?;

    let mut rng = seeded(spec.seed);
    let mut normal = || -> f64 { rng.sample(StandardNormal) };
    let mut loadings = Array2::<f64>::zeros((n, k));
    for i in 0..n {
        for j in 0..k {
            let z = normal();
            loadings[[i, j]] = if j == 0 { 1.0 + 0.3 * z } else { z };
        }
    }
    let mut values = Array2::<T>::zeros((t, n));
    for r in 0..t {
        let f: Vec<f64> = (0..k).map(|_| spec.factor_scale * normal()).collect();
        for i in 0..n {
            let common: f64 = (0..k).map(|j| loadings[[i, j]] * f[j]).sum();
            values[[r, i]] = T::lit(common + spec.noise_scale * normal());
        }
    }
    if let Some(d) = &spec.drawdown {
        values[[d.period, d.asset]] = values[[d.period, d.asset]] + T::lit(d.magnitude);
    }
    let width = (n.saturating_sub(1)).to_string().len().max(3);
    let tickers = (0..n).map(|i| format!("S{i:0width$}")).collect();
    let timestamps = (0..t).map(|r| (start + Duration::weeks(r as i64)).format("%Y-%m-%d").to_string()).collect();
    ReturnsMatrix::new(values, tickers, timestamps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn ts(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("2020-01-{:02}", i + 1)).collect()
    }

    fn panel(values: Array2<f64>) -> ReturnsMatrix<f64> {
        let (t, n) = values.dim();
        let tickers = (0..n).map(|i| format!("T{i}")).collect();
        ReturnsMatrix::new(values, tickers, ts(t)).unwrap()
    }

    #[test]
    fn wide_csv_reads_back_values() {
        let text = "date,A,B\n2020-01-01,0.01,-0.02\n2020-01-02,0.00,0.03\n2020-01-03,0.02,0.01\n";
        let m: ReturnsMatrix<f64> = read_returns_csv(text.as_bytes(), CsvLayout::Wide).unwrap();
        assert_eq!(m.values(), array![[0.01, -0.02], [0.0, 0.03], [0.02, 0.01]]);
        assert_eq!(m.tickers(), ["A", "B"]);
    }

    #[test]
    fn wide_csv_sorts_rows() {
        let text = "date,A\n2020-01-02,2\n2020-01-01,1\n";
        let m: ReturnsMatrix<f64> = read_returns_csv(text.as_bytes(), CsvLayout::Wide).unwrap();
        assert_eq!(m.timestamps(), ["2020-01-01", "2020-01-02"]);
        assert_eq!(m.values()[[0, 0]], 1.0);
    }

    #[test]
    fn long_csv_complete() {
        let text = "date,ticker,value\n2020-01-01,A,0.1\n2020-01-01,B,0.2\n2020-01-02,A,0.3\n2020-01-02,B,0.4\n";
        let m: ReturnsMatrix<f64> = read_returns_csv(text.as_bytes(), CsvLayout::Long).unwrap();
        assert_eq!(m.values(), array![[0.1, 0.2], [0.3, 0.4]]);
    }

    #[test]
    fn long_csv_missing_cell_names_gap() {
        let text = "date,ticker,value\n2020-01-01,A,0.1\n2020-01-01,B,0.2\n2020-01-02,A,0.3\n";
        let err = read_returns_csv::<f64, _>(text.as_bytes(), CsvLayout::Long).unwrap_err();
        match err {
            Error::Data(msg) => assert!(msg.contains("2020-01-02") && msg.contains('B'), "{msg}"),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn malformed_row_reports_line() {
        let text = "date,A,B\n2020-01-01,0.1,0.2\n2020-01-02,abc,0.2\n";
        match read_returns_csv::<f64, _>(text.as_bytes(), CsvLayout::Wide).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            e => panic!("unexpected {e:?}"),
        }
        let short = "date,A,B\n2020-01-01,0.1\n";
        assert!(matches!(
            read_returns_csv::<f64, _>(short.as_bytes(), CsvLayout::Wide),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn duplicate_ticker_and_nan_rejected() {
        let dup = "date,A,A\n2020-01-01,0.1,0.2\n2020-01-02,0.1,0.2\n";
        assert!(matches!(read_returns_csv::<f64, _>(dup.as_bytes(), CsvLayout::Wide), Err(Error::Schema(_))));
        let nan = "date,A\n2020-01-01,NaN\n2020-01-02,0.1\n";
        assert!(matches!(read_returns_csv::<f64, _>(nan.as_bytes(), CsvLayout::Wide), Err(Error::Data(_))));
    }

    #[test]
    fn writer_uses_ten_significant_digits() {
        assert_eq!(format_sig10(0.1_f64), "0.1");
        assert_eq!(format_sig10(1.0_f64 / 3.0), "0.3333333333");
        assert_eq!(format_sig10(-123456.789012345_f64), "-123456.789");
        assert_eq!(format_sig10(0.0_f64), "0");
    }

    #[test]
    fn single_series_returns() {
        let r = simple_returns(&[100.0_f64, 110.0]).unwrap();
        assert_eq!(r.len(), 1);
        assert!((r[0] - 0.10).abs() < 1e-15);
        assert_eq!(simple_returns(&[50.0, 50.0, 50.0]).unwrap(), vec![0.0, 0.0]);
        let g = simple_returns(&[1.0_f64, 1.5, 2.25, 3.375]).unwrap();
        assert!(g.iter().all(|v| (v - 0.5).abs() < 1e-15));
        assert!(matches!(simple_returns(&[1.0, -1.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn price_conversion() {
        let p = panel(array![[100.0, 50.0], [110.0, 50.0], [99.0, 50.0]]);
        let r = prices_to_returns(&p).unwrap();
        assert_eq!(r.n_periods(), 2);
        assert!((r.values()[[0, 0]] - 0.10).abs() < 1e-15);
        assert!((r.values()[[1, 0]] + 0.10).abs() < 1e-15);
        assert_eq!(r.values().column(1).to_vec(), vec![0.0, 0.0]);
        assert_eq!(r.timestamps()[0], p.timestamps()[1]);
    }

    #[test]
    fn nonpositive_price_is_domain_error() {
        let p = panel(array![[100.0], [0.0], [1.0]]);
        assert!(matches!(prices_to_returns(&p), Err(Error::Domain(_))));
    }

    #[test]
    fn split_shapes_and_gaps() {
        let data = panel(Array2::from_shape_fn((10, 3), |(r, c)| (r * 3 + c) as f64));
        let t = data.timestamps().to_vec();
        let spec = SplitSpec {
            calibration: TimeRange::new(&t[0], &t[6]),
            validation: TimeRange { start: Some(t[6].clone()), end: None },
        };
        let (c, v) = split(&data, &spec).unwrap();
        assert_eq!((c.n_periods(), v.n_periods()), (6, 4));

        let gap = SplitSpec {
            calibration: TimeRange::new(&t[0], &t[5]),
            validation: TimeRange { start: Some(t[7].clone()), end: None },
        };
        let (c, v) = split(&data, &gap).unwrap();
        assert_eq!(c.n_periods() + v.n_periods(), 8);
        assert!(!c.timestamps().contains(&t[5]) && !v.timestamps().contains(&t[6]));
    }

    #[test]
    fn split_rejects_overlap_and_tiny_windows() {
        let data = panel(Array2::zeros((10, 2)));
        let t = data.timestamps().to_vec();
        let overlap = SplitSpec { calibration: TimeRange::new(&t[0], &t[6]), validation: TimeRange::new(&t[4], &t[9]) };
        assert!(matches!(split(&data, &overlap), Err(Error::Split(_))));
        let one_row = SplitSpec { calibration: TimeRange::new(&t[0], &t[1]), validation: TimeRange::new(&t[2], &t[9]) };
        assert!(matches!(split(&data, &one_row), Err(Error::Split(_))));
    }

    #[test]
    fn synth_is_deterministic_and_injects_drawdown() {
        let spec = SynthSpec { n_assets: 8, n_periods: 30, n_latent: 2, seed: 11, ..Default::default() };
        let a: ReturnsMatrix<f64> = synth_market(&spec).unwrap();
        let b: ReturnsMatrix<f64> = synth_market(&spec).unwrap();
        assert_eq!(a, b);
        let dd = SynthSpec { drawdown: Some(Drawdown { asset: 3, period: 15, magnitude: -0.5 }), ..spec.clone() };
        let c: ReturnsMatrix<f64> = synth_market(&dd).unwrap();
        for ((r, col), v) in c.values().indexed_iter() {
            let base = a.values()[[r, col]];
            if (r, col) == (15, 3) {
                assert!((base - v - 0.5).abs() < 1e-15);
            } else {
                assert_eq!(*v, base);
            }
        }
    }

    #[test]
    fn synth_validates_arguments() {
        let bad = SynthSpec { n_assets: 4, n_latent: 5, ..Default::default() };
        assert!(matches!(synth_market::<f64>(&bad), Err(Error::Domain(_))));
        let oob = SynthSpec {
            n_assets: 4,
            n_periods: 10,
            n_latent: 1,
            drawdown: Some(Drawdown { asset: 4, period: 0, magnitude: -0.1 }),
            ..Default::default()
        };
        assert!(matches!(synth_market::<f64>(&oob), Err(Error::Domain(_))));
    }

    #[test]
    fn rank_one_noiseless_market_is_perfectly_correlated() {
        let spec =
            SynthSpec { n_assets: 5, n_periods: 40, n_latent: 1, noise_scale: 0.0, seed: 3, ..Default::default() };
        let m: ReturnsMatrix<f64> = synth_market(&spec).unwrap();
        let x = m.values();
        let corr = |a: usize, b: usize| {
            let (ca, cb) = (x.column(a), x.column(b));
            let (ma, mb) = (ca.mean().unwrap(), cb.mean().unwrap());
            let cov: f64 = ca.iter().zip(cb.iter()).map(|(p, q)| (p - ma) * (q - mb)).sum();
            let va: f64 = ca.iter().map(|p| (p - ma).powi(2)).sum();
            let vb: f64 = cb.iter().map(|q| (q - mb).powi(2)).sum();
            cov / (va * vb).sqrt()
        };
        for a in 0..5 {
            for b in 0..5 {
                assert!((corr(a, b).abs() - 1.0).abs() < 1e-12);
            }
        }
    }
}
