use dpt_core::data::{
    format_sig10, prices_to_returns, read_returns_csv, simple_returns, split, synth_market, write_returns_csv,
    CsvLayout, Drawdown, ReturnsMatrix, SplitSpec, SynthSpec, TimeRange,
};
use dpt_core::Error;
use ndarray::{array, Array2};
use proptest::prelude::*;

fn dates(t: usize) -> Vec<String> {
    (0..t).map(|i| format!("2020-{:02}-{:02}", 1 + i / 28, 1 + i % 28)).collect()
}

fn panel(values: Array2<f64>) -> ReturnsMatrix<f64> {
    let (t, n) = values.dim();
    ReturnsMatrix::new(values, (0..n).map(|i| format!("T{i}")).collect(), dates(t)).unwrap()
}

fn to_csv(m: &ReturnsMatrix<f64>) -> String {
    let mut buf = Vec::new();
    write_returns_csv(m, &mut buf).unwrap();
    String::from_utf8(buf).unwrap()
}

proptest! {
    #[test]
    fn csv_round_trip_is_exact(
        t in 2usize..12,
        n in 1usize..6,
        seed in prop::collection::vec(-1e9f64..1e9, 72),
        exp in -6i32..1,
    ) {
        // values drawn on a 10-significant-digit grid survive the text format
        let vals = Array2::from_shape_fn((t, n), |(r, c)| {
            let v: f64 = format!("{:.9e}", seed[r * 6 + c] * 10f64.powi(exp)).parse().unwrap();
            v
        });
        let m = panel(vals);
        let text = to_csv(&m);
        let back: ReturnsMatrix<f64> = read_returns_csv(text.as_bytes(), CsvLayout::Wide).unwrap();
        prop_assert_eq!(&back, &m);
        prop_assert_eq!(to_csv(&back), text);
    }

    #[test]
    fn geometric_prices_give_constant_returns(g in 0.5f64..1.5, t in 3usize..30, p0 in 1.0f64..100.0) {
        let prices: Vec<f64> = (0..t).map(|i| p0 * g.powi(i as i32)).collect();
        let m = panel(Array2::from_shape_vec((t, 1), prices).unwrap());
        let r = prices_to_returns(&m).unwrap();
        prop_assert_eq!(r.n_periods(), t - 1);
        prop_assert!(r.values().iter().all(|v| (v - (g - 1.0)).abs() <= 1e-12));
    }

    #[test]
    fn split_is_disjoint_and_ordered(t in 6usize..60, a in 0usize..100, b in 0usize..100) {
        let m = panel(Array2::from_shape_fn((t, 2), |(r, c)| (r * 2 + c) as f64));
        let cut = 2 + a % (t - 3);
        let gap = b % (t - cut - 1);
        let ts = m.timestamps();
        let spec = SplitSpec {
            calibration: TimeRange { start: None, end: Some(ts[cut].clone()) },
            validation: TimeRange { start: Some(ts[cut + gap].clone()), end: None },
        };
        match split(&m, &spec) {
            Ok((cal, val)) => {
                prop_assert!(cal.timestamps().last().unwrap() < &val.timestamps()[0]);
                prop_assert_eq!(cal.tickers(), m.tickers());
                prop_assert_eq!(val.tickers(), m.tickers());
                prop_assert_eq!(cal.n_periods(), cut);
                prop_assert_eq!(val.n_periods(), t - cut - gap);
                prop_assert_eq!(val.values()[[0, 0]], ((cut + gap) * 2) as f64);
            }
            Err(e) => prop_assert!(t - cut - gap < 2, "{}", e),
        }
    }
}

#[test]
fn wide_csv_reads_back() {
    let text = "date,A,B\n2020-01-01,0.01,-0.02\n2020-01-02,0.00,0.03\n2020-01-03,0.02,0.01\n";
    let m: ReturnsMatrix<f64> = read_returns_csv(text.as_bytes(), CsvLayout::Wide).unwrap();
    assert_eq!(m.values(), array![[0.01, -0.02], [0.0, 0.03], [0.02, 0.01]]);
    assert_eq!(m.tickers(), ["A", "B"]);
}

#[test]
fn long_csv_pivots_and_sorts() {
    let text = "date,ticker,value\n2020-01-02,B,0.4\n2020-01-01,A,0.1\n2020-01-01,B,0.2\n2020-01-02,A,0.3\n";
    let m: ReturnsMatrix<f64> = read_returns_csv(text.as_bytes(), CsvLayout::Long).unwrap();
    assert_eq!(m.timestamps(), ["2020-01-01", "2020-01-02"]);
    let a = m.ticker_index("A").unwrap();
    let b = m.ticker_index("B").unwrap();
    assert_eq!(m.values()[[0, a]], 0.1);
    assert_eq!(m.values()[[1, b]], 0.4);
}

#[test]
fn long_csv_gap_is_named() {
    let text = "date,ticker,value\n2020-01-01,A,0.1\n2020-01-01,B,0.2\n2020-01-02,A,0.3\n";
    let err = read_returns_csv::<f64, _>(text.as_bytes(), CsvLayout::Long).unwrap_err();
    assert!(matches!(err, Error::Data(_)), "{err}");
    let msg = err.to_string();
    assert!(msg.contains("2020-01-02") && msg.contains('B'), "{msg}");
}

#[test]
fn csv_error_contracts() {
    let bad_number = "date,A\n2020-01-01,0.1\n2020-01-02,abc\n";
    match read_returns_csv::<f64, _>(bad_number.as_bytes(), CsvLayout::Wide).unwrap_err() {
        Error::Parse { line, .. } => assert_eq!(line, 3),
        e => panic!("unexpected {e}"),
    }
    let dup = "date,A,A\n2020-01-01,0.1,0.2\n2020-01-02,0.1,0.2\n";
    assert!(matches!(read_returns_csv::<f64, _>(dup.as_bytes(), CsvLayout::Wide), Err(Error::Schema(_))));
    let nan = "date,A\n2020-01-01,0.1\n2020-01-02,NaN\n";
    assert!(matches!(read_returns_csv::<f64, _>(nan.as_bytes(), CsvLayout::Wide), Err(Error::Data(_))));
}

#[test]
fn price_examples() {
    assert_eq!(simple_returns(&[100.0_f64, 110.0]).unwrap().len(), 1);
    assert!((simple_returns(&[100.0_f64, 110.0]).unwrap()[0] - 0.10).abs() <= 1e-15);
    assert_eq!(simple_returns(&[50.0, 50.0, 50.0]).unwrap(), vec![0.0, 0.0]);
    let r = simple_returns(&[100.0_f64, 90.0, 99.0]).unwrap();
    assert!((r[0] + 0.10).abs() <= 1e-15 && (r[1] - 0.10).abs() <= 1e-15);
    assert!(matches!(simple_returns(&[100.0, 0.0]), Err(Error::Domain(_))));
    let m = panel(array![[100.0, 50.0], [90.0, 50.0], [99.0, -1.0]]);
    assert!(matches!(prices_to_returns(&m), Err(Error::Domain(_))));
}

#[test]
fn split_examples() {
    let m = panel(Array2::from_shape_fn((10, 3), |(r, c)| (r + c) as f64));
    let (cal, val) = split(&m, &SplitSpec::at_row(&m, 6).unwrap()).unwrap();
    assert_eq!((cal.values().dim(), val.values().dim()), ((6, 3), (4, 3)));

    let ts = m.timestamps();
    let overlap = SplitSpec { calibration: TimeRange::new(&ts[0], &ts[6]), validation: TimeRange::new(&ts[4], &ts[9]) };
    assert!(matches!(split(&m, &overlap), Err(Error::Split(_))));

    let gapped = SplitSpec {
        calibration: TimeRange::new(&ts[0], &ts[5]),
        validation: TimeRange { start: Some(ts[7].clone()), end: None },
    };
    let (cal, val) = split(&m, &gapped).unwrap();
    assert_eq!(cal.timestamps(), &ts[..5]);
    assert_eq!(val.timestamps(), &ts[7..]);

    let one_row = SplitSpec {
        calibration: TimeRange::new(&ts[0], &ts[5]),
        validation: TimeRange { start: Some(ts[9].clone()), end: None },
    };
    assert!(matches!(split(&m, &one_row), Err(Error::Split(_))));
}

#[test]
fn synth_is_a_pure_function() {
    let spec = SynthSpec { n_assets: 7, n_periods: 40, seed: 11, ..Default::default() };
    let a: ReturnsMatrix<f64> = synth_market(&spec).unwrap();
    let b: ReturnsMatrix<f64> = synth_market(&spec).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.values().dim(), (40, 7));
}

#[test]
fn drawdown_is_additive() {
    let base = SynthSpec { n_assets: 5, n_periods: 30, seed: 2, ..Default::default() };
    let hit = SynthSpec { drawdown: Some(Drawdown { asset: 3, period: 15, magnitude: -0.5 }), ..base.clone() };
    let a: ReturnsMatrix<f64> = synth_market(&base).unwrap();
    let b: ReturnsMatrix<f64> = synth_market(&hit).unwrap();
    let diff = &b.values() - &a.values();
    for ((r, c), d) in diff.indexed_iter() {
        if (r, c) == (15, 3) {
            assert!((d + 0.5).abs() <= 1e-15);
        } else {
            assert_eq!(*d, 0.0);
        }
    }
    let out = SynthSpec { drawdown: Some(Drawdown { asset: 5, period: 0, magnitude: -0.5 }), ..base };
    assert!(matches!(synth_market::<f64>(&out), Err(Error::Domain(_))));
}

#[test]
fn rank_one_market_is_perfectly_correlated() {
    let spec = SynthSpec { n_assets: 6, n_periods: 50, n_latent: 1, noise_scale: 0.0, seed: 9, ..Default::default() };
    let m: ReturnsMatrix<f64> = synth_market(&spec).unwrap();
    let x = m.values();
    let centered = |c: usize| {
        let col = x.column(c);
        let mean = col.sum() / col.len() as f64;
        col.mapv(|v| v - mean)
    };
    let base = centered(0);
    for c in 1..6 {
        let other = centered(c);
        let corr = base.dot(&other) / (base.dot(&base) * other.dot(&other)).sqrt();
        assert!((corr.abs() - 1.0).abs() <= 1e-10, "column {c}: corr {corr}");
    }
}

#[test]
fn writer_uses_ten_significant_digits() {
    assert_eq!(format_sig10(0.12345678901234_f64), "0.123456789");
    assert_eq!(format_sig10(-1.5e-7_f64), "-0.00000015");
    assert_eq!(format_sig10(0.0_f64), "0");
}
