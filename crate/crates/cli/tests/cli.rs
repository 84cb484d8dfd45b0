mod common;

use common::{code, dpt, json, ok, read, snapshot};
use tempfile::tempdir;

const FAST: &[&str] = &["--market-epochs", "20", "--portfolio-epochs", "20"];

fn synth(dir: &std::path::Path) {
    ok(dir, &["synth", "--assets", "30", "--periods", "200", "--latent", "3", "--seed", "7", "-o", "m.csv"]);
}

fn with_fast<'a>(args: &[&'a str]) -> Vec<&'a str> {
    args.iter().chain(FAST).copied().collect()
}

#[test]
fn synth_writes_the_requested_shape() {
    let dir = tempdir().unwrap();
    let out =
        ok(dir.path(), &["synth", "--assets", "30", "--periods", "200", "--latent", "3", "--seed", "7", "-o", "m.csv"]);
    let text = read(dir.path().join("m.csv"));
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap().split(',').count(), 31);
    assert_eq!(lines.count(), 200);
    let echo: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(echo["synth"]["seed"], 7);
    assert_eq!(echo["synth"]["n_latent"], 3);

    ok(dir.path(), &["synth", "--assets", "30", "--periods", "200", "--latent", "3", "--seed", "7", "-o", "again.csv"]);
    assert_eq!(std::fs::read(dir.path().join("m.csv")).unwrap(), std::fs::read(dir.path().join("again.csv")).unwrap());
}

#[test]
fn exit_codes_follow_the_contract() {
    let dir = tempdir().unwrap();
    let p = dir.path();
    let bad_latent = dpt(p, &["synth", "--latent", "40", "--assets", "30", "-o", "x.csv"]);
    assert_eq!(code(&bad_latent), 1);
    assert!(!bad_latent.stderr.is_empty());
    std::fs::write(p.join("plain"), "a file, not a directory").unwrap();
    assert_eq!(code(&dpt(p, &["synth", "--seed", "1", "-o", "plain/x.csv"])), 2);
    assert_eq!(code(&dpt(p, &["ingest", "-i", "missing.csv"])), 2);
    assert_eq!(code(&dpt(p, &["frontier", "--no-such-flag"])), 1);
    std::fs::write(p.join("bad.json"), "{\"not_a_field\": 1}").unwrap();
    assert_eq!(code(&dpt(p, &["--config", "bad.json", "encode"])), 1);

    synth(p);
    let diverge = dpt(p, &["encode", "-i", "m.csv", "--market-learning-rate", "50", "--market-epochs", "20"]);
    assert_eq!(code(&diverge), 3);
    assert!(String::from_utf8_lossy(&diverge.stderr).contains("epoch"));

    // two identical columns make the covariance singular
    std::fs::write(p.join("twin.csv"), "date,A,B\n2020-01-01,0.1,0.1\n2020-01-02,0.2,0.2\n2020-01-03,0.0,0.0\n")
        .unwrap();
    std::fs::write(p.join("views.json"), r#"{"p": [[1.0, 0.0]], "q": [0.1], "omega": [[1.0]], "lambda": 1.0}"#)
        .unwrap();
    assert_eq!(code(&dpt(p, &["baseline", "bl", "-i", "twin.csv", "--views", "views.json"])), 4);
}

#[test]
fn ingest_normalizes_long_layout() {
    let dir = tempdir().unwrap();
    let p = dir.path();
    std::fs::write(
        p.join("long.csv"),
        "date,ticker,value\n2020-01-02,B,0.4\n2020-01-01,A,0.1\n2020-01-01,B,0.2\n2020-01-02,A,0.3\n",
    )
    .unwrap();
    ok(p, &["ingest", "-i", "long.csv", "--layout", "long", "-o", "out"]);
    // tickers keep their order of first appearance
    assert_eq!(read(p.join("out/returns.csv")), "date,B,A\n2020-01-01,0.2,0.1\n2020-01-02,0.4,0.3\n");
    assert_eq!(json(p.join("out/ingest.json"))["n_assets"], 2);
}

#[test]
fn encode_ranks_every_stock() {
    let dir = tempdir().unwrap();
    let p = dir.path();
    synth(p);
    ok(p, &with_fast(&["encode", "-i", "m.csv", "-o", "enc"]));
    let text = read(p.join("enc/ranking.csv"));
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 30);
    let errs: Vec<f64> = rows.iter().map(|r| r[2].parse().unwrap()).collect();
    assert_eq!(rows[0][0], "1");
    assert!(errs.iter().all(|&e| e >= errs[0]));
    let doc = json(p.join("enc/market_map.json"));
    let first = &doc["network"]["layers"][0];
    assert_eq!((first["n_in"].as_u64(), first["n_out"].as_u64()), (Some(30), Some(5)));
}

#[test]
fn frontier_grid_and_report() {
    let dir = tempdir().unwrap();
    let p = dir.path();
    synth(p);
    ok(p, &with_fast(&["frontier", "-i", "m.csv", "--grid", "15,25,30", "--amend-target", "-o", "f"]));
    let csv = read(p.join("f/frontier.csv"));
    assert_eq!(csv.lines().next(), Some("n_stocks,lambda,epsilon_m,epsilon_p"));
    assert_eq!(csv.lines().count(), 4);
    for n in ["n015", "n025", "n030"] {
        for w in ["calibration", "validation"] {
            let t = read(p.join(format!("f/tracking/{n}_{w}.csv")));
            assert_eq!(t.lines().next(), Some("date,target,tracker"));
            for line in t.lines().skip(1) {
                let target: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
                assert!(target >= -0.05);
            }
        }
    }
    let report = json(p.join("f/frontier_report.json"));
    let cfg = &report["config"];
    // defaulted fields are echoed alongside the flags
    assert_eq!(cfg["grid"], serde_json::json!([15, 25, 30]));
    assert_eq!(cfg["amend_target"], true);
    assert_eq!(cfg["k_folds"], 4);
    assert_eq!(cfg["market_hidden"], serde_json::json!([5]));
    assert_eq!(cfg["n_communal"], 10);
    assert_eq!(cfg["market_epochs"], 20);
    assert!(cfg.get("seed").is_some());

    ok(p, &with_fast(&["frontier", "-i", "m.csv", "--grid", "15,25,30", "--portfolio-lambda", "0.01", "-o", "g"]));
    let out = ok(p, &["report", "f/frontier_report.json", "g/frontier_report.json", "-o", "v"]);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.lines().filter(|l| l.starts_with("n_stocks=")).count(), 3);
    let v = json(p.join("v/verification.json"));
    assert_eq!(v["verification"]["points"].as_array().unwrap().len(), 3);

    ok(p, &with_fast(&["frontier", "-i", "m.csv", "--grid", "15,20", "-o", "h"]));
    assert_eq!(code(&dpt(p, &["report", "f/frontier_report.json", "h/frontier_report.json"])), 1);
}

#[test]
fn frontier_failure_names_the_grid_point() {
    let dir = tempdir().unwrap();
    let p = dir.path();
    synth(p);
    let out = dpt(p, &with_fast(&["frontier", "-i", "m.csv", "--grid", "15,45", "-o", "f"]));
    assert_ne!(code(&out), 0);
    let err = dpt(p, &["frontier", "-i", "m.csv", "--grid", "15", "--portfolio-learning-rate", "1e6", "-o", "f"]);
    assert_eq!(code(&err), 3);
    let msg = String::from_utf8_lossy(&err.stderr);
    assert!(msg.contains("n_stocks=15") && msg.contains("calibration"), "{msg}");
}

#[test]
fn calibrate_writes_tracking_series() {
    let dir = tempdir().unwrap();
    let p = dir.path();
    synth(p);
    ok(p, &with_fast(&["calibrate", "-i", "m.csv", "--n-stocks", "12", "--target", "S004", "-o", "c"]));
    let doc = json(p.join("c/portfolio_map.json"));
    assert_eq!(doc["tickers"].as_array().unwrap().len(), 12);
    assert!(!doc["tickers"].as_array().unwrap().iter().any(|t| t == "S004"));
    assert_eq!(doc["calibration"]["fold_errors"].as_array().unwrap().len(), 4);
    assert_eq!(read(p.join("c/tracking_validation.csv")).lines().count(), 101);
}

#[test]
fn identical_invocations_write_identical_bytes() {
    let runs: Vec<_> = (0..2)
        .map(|_| {
            let dir = tempdir().unwrap();
            let p = dir.path();
            synth(p);
            ok(
                p,
                &with_fast(&["--seed", "3", "frontier", "-i", "m.csv", "--grid", "10,20", "--jobs", "2", "-o", "out"]),
            );
            ok(p, &["--seed", "3", "baseline", "factor", "-i", "m.csv", "-K", "3", "-o", "out"]);
            snapshot(p)
        })
        .collect();
    assert!(runs[0].len() >= 7);
    assert_eq!(runs[0], runs[1]);
}

#[test]
fn baselines_from_the_command_line() {
    let dir = tempdir().unwrap();
    let p = dir.path();
    synth(p);
    ok(p, &["baseline", "moments", "-i", "m.csv", "-o", "b"]);
    let m = json(p.join("b/moments.json"));
    let mean: Vec<f64> = serde_json::from_value(m["mean"].clone()).unwrap();
    let cov: Vec<Vec<f64>> = serde_json::from_value(m["covariance"].clone()).unwrap();
    assert_eq!(mean.len(), 30);
    assert!(cov.len() == 30 && cov.iter().all(|r| r.len() == 30));

    let p_row: Vec<Vec<f64>> = vec![(0..30).map(|i| if i == 0 { 1.0 } else { 0.0 }).collect()];
    let views = serde_json::json!({ "p": p_row, "q": [0.05], "omega": [[0.0001]], "lambda": 5.0 });
    std::fs::write(p.join("views.json"), views.to_string()).unwrap();
    ok(p, &["baseline", "bl", "-i", "m.csv", "--views", "views.json", "--lambda", "0", "-o", "b"]);
    let bl: Vec<f64> = serde_json::from_value(json(p.join("b/bl_mean.json"))["mean"].clone()).unwrap();
    assert!(bl.iter().zip(&mean).all(|(a, b)| (a - b).abs() <= 1e-12));
    ok(p, &["baseline", "bl", "-i", "m.csv", "--views", "views.json", "-o", "b"]);
    let tilted: Vec<f64> = serde_json::from_value(json(p.join("b/bl_mean.json"))["mean"].clone()).unwrap();
    assert!((tilted[0] - 0.05).abs() < (mean[0] - 0.05).abs());

    ok(p, &["baseline", "factor", "-i", "m.csv", "-K", "3", "--lambda", "0.1", "-o", "b"]);
    let f = json(p.join("b/factor_model.json"));
    let trace: Vec<f64> = serde_json::from_value(f["objective_trace"].clone()).unwrap();
    assert!(!trace.is_empty());
    assert!(trace.windows(2).all(|w| w[1] <= w[0] + 1e-10 * trace[0].max(1.0)));
    assert_eq!(f["trace_non_increasing"], true);
    assert_eq!(f["loadings"].as_array().unwrap().len(), 30);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempdir().unwrap();
    let p = dir.path();
    synth(p);
    let cfg = serde_json::json!({ "input": "m.csv", "market_epochs": 5, "portfolio_epochs": 5, "grid": [5, 10], "n_communal": 3 });
    std::fs::write(p.join("run.json"), cfg.to_string()).unwrap();
    ok(p, &["--config", "run.json", "frontier", "--grid", "4,8,12", "-o", "o"]);
    let report = json(p.join("o/frontier_report.json"));
    assert_eq!(report["config"]["grid"], serde_json::json!([4, 8, 12]));
    assert_eq!(report["config"]["n_communal"], 3);
    assert_eq!(report["frontier"]["points"].as_array().unwrap().len(), 3);
}
