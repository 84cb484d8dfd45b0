use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use dpt_core::baselines::{
    black_litterman_mean, factor_model_fit, markowitz_moments, FactorOptions, ViewDoc, ViewSpec,
};
use dpt_core::data::{
    load_returns_csv, prices_to_returns, synth_market, write_returns_csv, CsvLayout, Drawdown, SplitSpec, TimeRange,
};
use dpt_core::frontier::{build_frontier, build_lambda_frontier, compare_frontiers, Frontier, FrontierRun, SweepKind};
use dpt_core::portfolio_map::{resolve_target, TargetSeries, TargetSource};
use dpt_core::{Error, ReturnsMatrix};
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::output::{io_err, write_atomic, write_json};
use crate::{CliError, SynthArgs};

const DEFAULT_N_STOCKS: usize = 25;

fn core_write(r: dpt_core::Result<()>) -> Result<(), CliError> {
    r.map_err(CliError::Core)
}

fn load_data(cfg: &RunConfig) -> Result<ReturnsMatrix, CliError> {
    let data = match &cfg.input {
        Some(p) => load_returns_csv(p, cfg.layout).map_err(|e| e.context(format!("loading {}", p.display())))?,
        None => synth_market(&cfg.synth).map_err(|e| e.context("synthetic market"))?,
    };
    if cfg.prices {
        return Ok(prices_to_returns(&data)?);
    }
    Ok(data)
}

fn resolve_split(cfg: &RunConfig, data: &ReturnsMatrix) -> Result<SplitSpec, CliError> {
    let given = [&cfg.calibration_start, &cfg.calibration_end, &cfg.validation_start, &cfg.validation_end];
    if given.iter().any(|r| r.is_some()) {
        return Ok(SplitSpec {
            calibration: TimeRange { start: cfg.calibration_start.clone(), end: cfg.calibration_end.clone() },
            validation: TimeRange { start: cfg.validation_start.clone(), end: cfg.validation_end.clone() },
        });
    }
    let rows = (data.n_periods() as f64 * cfg.calibration_fraction).round() as usize;
    Ok(SplitSpec::at_row(data, rows)?)
}

fn load_target(cfg: &RunConfig, data: &ReturnsMatrix) -> Result<(ReturnsMatrix, TargetSeries<f64>), CliError> {
    let Some(path) = &cfg.target_file else {
        let source = cfg.target.clone().map_or(TargetSource::EqualWeight, TargetSource::Ticker);
        return resolve_target(data, &source).map_err(|e| match e {
            Error::Selection(m) => CliError::Config(m),
            e => e.into(),
        });
    };
    let file: ReturnsMatrix =
        load_returns_csv(path, CsvLayout::Wide).map_err(|e| e.context(format!("loading {}", path.display())))?;
    if file.n_assets() != 1 {
        return Err(CliError::Core(Error::Schema(format!(
            "{}: target file must have exactly one value column, has {}",
            path.display(),
            file.n_assets()
        ))));
    }
    let by_date: HashMap<&str, f64> =
        file.timestamps().iter().map(String::as_str).zip(file.values().column(0).iter().copied()).collect();
    let values =
        data.timestamps()
            .iter()
            .map(|ts| {
                by_date.get(ts.as_str()).copied().ok_or_else(|| {
                    CliError::Core(Error::Schema(format!("{}: no target value for {ts}", path.display())))
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
    Ok((data.clone(), TargetSeries::new(file.tickers()[0].clone(), values)?))
}

pub fn synth(cfg: &RunConfig, args: &SynthArgs, seed: Option<u64>, out: Option<&Path>) -> Result<(), CliError> {
    let mut spec = cfg.synth.clone();
    if let Some(v) = args.assets {
        spec.n_assets = v;
    }
    if let Some(v) = args.periods {
        spec.n_periods = v;
    }
    if let Some(v) = args.latent {
        spec.n_latent = v;
    }
    if let Some(v) = args.factor_scale {
        spec.factor_scale = v;
    }
    if let Some(v) = args.noise_scale {
        spec.noise_scale = v;
    }
    if let Some(v) = &args.start_date {
        spec.start_date = v.clone();
    }
    if let Some(s) = seed {
        spec.seed = s;
    }
    if let Some(d) = &args.drawdown {
        spec.drawdown = Some(parse_drawdown(d)?);
    }
    let out = out.ok_or_else(|| CliError::Config("synth needs -o <file.csv>".into()))?;
    let data: ReturnsMatrix = synth_market(&spec).map_err(|e| match e {
        Error::Domain(m) => CliError::Config(m),
        e => e.into(),
    })?;
    write_atomic(out, |w| core_write(write_returns_csv(&data, w)))?;
    let echo = json!({ "command": "synth", "output": out, "synth": spec });
    println!("{}", serde_json::to_string_pretty(&echo).expect("echo serializes"));
    Ok(())
}

fn parse_drawdown(s: &str) -> Result<Drawdown, CliError> {
    let bad = || CliError::Config(format!("drawdown must be asset:period:magnitude, got {s:?}"));
    let parts: Vec<&str> = s.split(':').collect();
    let [a, p, m] = parts.as_slice() else { return Err(bad()) };
    Ok(Drawdown {
        asset: a.parse().map_err(|_| bad())?,
        period: p.parse().map_err(|_| bad())?,
        magnitude: m.parse().map_err(|_| bad())?,
    })
}

pub fn ingest(cfg: &RunConfig) -> Result<(), CliError> {
    if cfg.input.is_none() {
        return Err(CliError::Config("ingest needs -i <file>".into()));
    }
    let data = load_data(cfg)?;
    write_atomic(&cfg.out_dir.join("returns.csv"), |w| core_write(write_returns_csv(&data, w)))?;
    write_json(
        &cfg.out_dir.join("ingest.json"),
        &json!({
            "command": "ingest",
            "config": cfg,
            "n_periods": data.n_periods(),
            "n_assets": data.n_assets(),
            "first_period": data.timestamps().first(),
            "last_period": data.timestamps().last(),
            "tickers": data.tickers(),
        }),
    )
}

pub fn encode(cfg: &RunConfig) -> Result<(), CliError> {
    let data = load_data(cfg)?;
    let (universe, _) = load_target(cfg, &data)?;
    let split = resolve_split(cfg, &universe)?;
    let (cal, val) = dpt_core::data::split(&universe, &split)?;
    let report = dpt_core::market_map::encode(&cal, Some(&val), &cfg.market_map()).map_err(|e| e.context("encode"))?;
    write_atomic(&cfg.out_dir.join("ranking.csv"), |w| core_write(report.ranking.write_csv(w)))?;
    write_json(
        &cfg.out_dir.join("market_map.json"),
        &json!({
            "command": "encode",
            "config": cfg,
            "split": split,
            "calibration_periods": cal.n_periods(),
            "validation_periods": val.n_periods(),
            "epsilon_m": report.epsilon_m,
            "loss_trace": report.trace,
            "network": report.network,
        }),
    )
}

fn default_n_stocks(cfg: &RunConfig, universe: &ReturnsMatrix) -> usize {
    cfg.n_stocks.unwrap_or(DEFAULT_N_STOCKS.min(universe.n_assets()))
}

fn write_tracking(dir: &Path, label: &str, run: &FrontierRun<f64>, i: usize) -> Result<(), CliError> {
    let d = &run.details[i];
    write_atomic(&dir.join(format!("{label}_calibration.csv")), |w| core_write(d.calibration_tracking.write_csv(w)))?;
    write_atomic(&dir.join(format!("{label}_validation.csv")), |w| core_write(d.validation_tracking.write_csv(w)))
}

pub fn calibrate(cfg: &RunConfig) -> Result<(), CliError> {
    let data = load_data(cfg)?;
    let (universe, target) = load_target(cfg, &data)?;
    let split = resolve_split(cfg, &universe)?;
    let mut cfg = cfg.clone();
    cfg.n_stocks = Some(default_n_stocks(&cfg, &universe));
    let n = cfg.n_stocks.unwrap();
    let run = build_frontier(&universe, &target, &split, &[n], &cfg.pipeline()).map_err(|e| e.context("calibrate"))?;
    write_tracking(&cfg.out_dir, "tracking", &run, 0)?;
    let p = &run.frontier.points[0];
    write_json(
        &cfg.out_dir.join("portfolio_map.json"),
        &json!({
            "command": "calibrate",
            "config": cfg,
            "split": split,
            "target": target.label,
            "tickers": p.tickers,
            "epsilon_m": p.epsilon_m,
            "epsilon_p": p.epsilon_p,
            "calibration": run.details[0].portfolio,
        }),
    )
}

pub fn frontier(cfg: &RunConfig) -> Result<(), CliError> {
    let data = load_data(cfg)?;
    let (universe, target) = load_target(cfg, &data)?;
    let split = resolve_split(cfg, &universe)?;
    let mut cfg = cfg.clone();
    let run = match cfg.sweep {
        SweepKind::Stocks => {
            if cfg.grid.is_empty() {
                return Err(CliError::Config("frontier needs a stock grid (--grid 15,25,45)".into()));
            }
            build_frontier(&universe, &target, &split, &cfg.grid, &cfg.pipeline())
        }
        SweepKind::Lambda => {
            if cfg.lambda_grid.is_empty() {
                return Err(CliError::Config("lambda sweep needs --lambda-grid".into()));
            }
            cfg.n_stocks = Some(default_n_stocks(&cfg, &universe));
            build_lambda_frontier(&universe, &target, &split, cfg.n_stocks.unwrap(), &cfg.lambda_grid, &cfg.pipeline())
        }
    }
    .map_err(|e| e.context("frontier"))?;

    write_atomic(&cfg.out_dir.join("frontier.csv"), |w| core_write(run.frontier.write_csv(w)))?;
    let tracking = cfg.out_dir.join("tracking");
    let mut files = Vec::new();
    for (i, p) in run.frontier.points.iter().enumerate() {
        let label = match cfg.sweep {
            SweepKind::Stocks => format!("n{:03}", p.n_stocks),
            SweepKind::Lambda => format!("lambda{i:02}"),
        };
        write_tracking(&tracking, &label, &run, i)?;
        files.push(label);
    }
    write_json(
        &cfg.out_dir.join("frontier_report.json"),
        &json!({
            "command": "frontier",
            "config": cfg,
            "tracking_files": files,
            "frontier": run.frontier,
        }),
    )
}

fn with_config(cfg: &RunConfig, command: &str, body: String) -> Result<Value, CliError> {
    let mut v: Value = serde_json::from_str(&body).map_err(|e| CliError::Core(e.into()))?;
    let m = v.as_object_mut().expect("baseline documents are objects");
    m.insert("command".into(), json!(command));
    m.insert("config".into(), serde_json::to_value(cfg).expect("config serializes"));
    Ok(v)
}

pub fn moments(cfg: &RunConfig) -> Result<(), CliError> {
    let data = load_data(cfg)?;
    let m = markowitz_moments(&data);
    let doc = with_config(cfg, "baseline moments", m.to_json(data.tickers())?)?;
    write_json(&cfg.out_dir.join("moments.json"), &doc)
}

pub fn black_litterman(cfg: &RunConfig, views: &Path, lambda: Option<f64>) -> Result<(), CliError> {
    let data = load_data(cfg)?;
    let text = std::fs::read_to_string(views).map_err(|e| io_err(views, e))?;
    let doc: ViewDoc<f64> =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", views.display())))?;
    let mut spec = ViewSpec::from_doc(&doc)?;
    if let Some(l) = lambda {
        spec.lambda = l;
    }
    let m = markowitz_moments(&data);
    let mean = black_litterman_mean(&m, &spec).map_err(|e| e.context("black-litterman"))?;
    write_json(
        &cfg.out_dir.join("bl_mean.json"),
        &json!({
            "command": "baseline bl",
            "config": cfg,
            "views": views,
            "lambda": spec.lambda,
            "tickers": data.tickers(),
            "prior_mean": m.mean.to_vec(),
            "mean": mean.to_vec(),
        }),
    )
}

pub fn factor(cfg: &RunConfig, k: usize, lambda: f64, max_iters: usize) -> Result<(), CliError> {
    let data = load_data(cfg)?;
    let opts = FactorOptions { max_iters, ..FactorOptions::default() };
    let model = factor_model_fit(&data, k, lambda, cfg.seed, opts).map_err(|e| e.context("factor model"))?;
    let scale = model.objective_trace.first().copied().unwrap_or(1.0).max(1.0);
    if !model.trace_is_non_increasing(1e-10 * scale) {
        return Err(CliError::Numerical("factor-model objective trace increased".into()));
    }
    let mut doc = with_config(cfg, "baseline factor", model.to_json(data.tickers())?)?;
    let m = doc.as_object_mut().unwrap();
    m.insert("k".into(), json!(k));
    m.insert("trace_non_increasing".into(), json!(true));
    write_json(&cfg.out_dir.join("factor_model.json"), &doc)
}

pub fn report(cfg: &RunConfig, reports: &[PathBuf]) -> Result<(), CliError> {
    let frontiers = reports
        .iter()
        .map(|p| {
            let text = std::fs::read_to_string(p).map_err(|e| io_err(p, e))?;
            let mut v: Value = serde_json::from_str(&text)
                .map_err(|e| CliError::Core(Error::from(e).context(p.display().to_string())))?;
            let f = v
                .get_mut("frontier")
                .map(Value::take)
                .ok_or_else(|| CliError::Core(Error::Schema(format!("{}: no \"frontier\" entry", p.display()))))?;
            serde_json::from_value::<Frontier<f64>>(f)
                .map_err(|e| CliError::Core(Error::from(e).context(p.display().to_string())))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let verdict = compare_frontiers(&frontiers)?;

    let mut out = std::io::stdout().lock();
    for v in &verdict.points {
        let best = reports[v.best].display();
        let tie = if v.is_tie() { " (tie)" } else { "" };
        writeln!(out, "n_stocks={} lambda={} best={best}{tie}", v.n_stocks, v.lambda)
            .map_err(|e| CliError::Io(e.to_string()))?;
    }
    if let Some(d) = verdict.dominant {
        writeln!(out, "dominant: {}", reports[d].display()).map_err(|e| CliError::Io(e.to_string()))?;
    }
    write_json(
        &cfg.out_dir.join("verification.json"),
        &json!({ "command": "report", "config": cfg, "reports": reports, "verification": verdict }),
    )
}
