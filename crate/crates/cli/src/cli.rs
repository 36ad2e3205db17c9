//! Command-line verbs.

use std::path::{Path, PathBuf};

use chrono::NaiveDateTime;
use clap::{Args, Parser, Subcommand};
use varlab::var::{fit, forecast, FittedVar, TrendSpec};
use varlab::TimeSeriesFrame;

use crate::config::{parse_config_timestamp, PipelineConfig};
use crate::error::{Result, RunError};
use crate::manifest::ArtifactWriter;
use crate::pipeline::{
    diagnose, fevd_for_model, forecast_metrics, ingest, model_input, prepare, run_pipeline, select_model,
};
use crate::synth::{write_dataset, SyntheticSpec};

#[derive(Debug, Args, Clone, Default)]
pub struct Common {
    /// Pipeline configuration (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `output_dir`.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Seed for randomized steps; overrides `seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

fn parse_ts(raw: &str) -> std::result::Result<NaiveDateTime, String> {
    parse_config_timestamp(raw).ok_or_else(|| format!("bad timestamp `{raw}`"))
}

fn parse_trend(raw: &str) -> std::result::Result<TrendSpec, String> {
    raw.parse().map_err(|e: varlab::Error| e.to_string())
}

/// Flags that override individual config keys.
#[derive(Debug, Args, Clone, Default)]
pub struct Overrides {
    #[arg(long = "test_start", alias = "test-start", value_parser = parse_ts)]
    pub test_start: Option<NaiveDateTime>,
    #[arg(long = "grid_lags", alias = "grid-lags", value_delimiter = ',')]
    pub grid_lags: Option<Vec<usize>>,
    #[arg(long = "grid_trends", alias = "grid-trends", value_delimiter = ',', value_parser = parse_trend)]
    pub grid_trends: Option<Vec<TrendSpec>>,
    #[arg(long = "granger_lag", alias = "granger-lag")]
    pub granger_lag: Option<usize>,
    #[arg(long = "fevd_horizon", alias = "fevd-horizon")]
    pub fevd_horizon: Option<usize>,
    #[arg(long = "fevd_order", alias = "fevd-order", value_delimiter = ',')]
    pub fevd_order: Option<Vec<String>>,
    #[arg(long = "validation_hours", alias = "validation-hours")]
    pub validation_hours: Option<usize>,
    #[arg(long = "adf_max_lag", alias = "adf-max-lag")]
    pub adf_max_lag: Option<usize>,
    #[arg(long = "auto_difference", alias = "auto-difference")]
    pub auto_difference: bool,
    #[arg(long = "plot_columns", alias = "plot-columns", value_delimiter = ',')]
    pub plot_columns: Option<Vec<String>>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load, align and impute the sources.
    Ingest {
        #[command(flatten)]
        overrides: Overrides,
    },
    /// ADF and Granger tests on the training range.
    Diagnose {
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Lag order and trend selection on the training range.
    Gridsearch {
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Fit a model on the training range. Without --lag/--trend the grid-search winner is used.
    Fit {
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long)]
        lag: Option<usize>,
        #[arg(long, value_parser = parse_trend)]
        trend: Option<TrendSpec>,
    },
    /// Forecast from a saved model file.
    Forecast {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 24)]
        steps: usize,
    },
    /// Score a forecast CSV against observed values.
    Evaluate {
        #[arg(long)]
        actual: PathBuf,
        #[arg(long)]
        forecast: PathBuf,
    },
    /// Variance decomposition of a saved model.
    Fevd {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = varlab::fevd::DEFAULT_HORIZON)]
        horizon: usize,
        /// Cholesky ordering, comma separated; defaults to the model's column order.
        #[arg(long, value_delimiter = ',')]
        order: Option<Vec<String>>,
    },
    /// The full analysis: ingest through variance decomposition.
    Run {
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Write a seeded synthetic dataset and matching config.
    Simulate {
        #[arg(long, default_value = "2018-01-01 00:00:00", value_parser = parse_ts)]
        start: NaiveDateTime,
        #[arg(long, default_value_t = 24 * 365)]
        hours: usize,
        #[arg(long, default_value_t = 9)]
        stations: usize,
        #[arg(long, default_value_t = 13)]
        weather: usize,
        /// Leave every cell observed.
        #[arg(long)]
        complete: bool,
    },
}

#[derive(Debug, Parser)]
#[command(name = "varlab", version, about = "Hourly multivariate time-series analysis with VAR models")]
struct Wrapper {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

pub fn load_config(common: &Common, overrides: &Overrides) -> Result<PipelineConfig> {
    let path = common
        .config
        .as_deref()
        .ok_or_else(|| RunError::Config("--config is required for this command".into()))?;
    let mut c = PipelineConfig::load(path)?;
    if let Some(v) = overrides.test_start {
        c.test_start = v;
    }
    if let Some(v) = &overrides.grid_lags {
        c.grid_lags = v.clone();
    }
    if let Some(v) = &overrides.grid_trends {
        c.grid_trends = v.clone();
    }
    if let Some(v) = overrides.granger_lag {
        c.granger_lag = v;
    }
    if let Some(v) = overrides.fevd_horizon {
        c.fevd_horizon = v;
    }
    if let Some(v) = &overrides.fevd_order {
        c.fevd_order = Some(v.clone());
    }
    if let Some(v) = overrides.validation_hours {
        c.validation_hours = v;
    }
    if let Some(v) = overrides.adf_max_lag {
        c.adf_max_lag = Some(v);
    }
    if overrides.auto_difference {
        c.auto_difference = true;
    }
    if let Some(v) = &overrides.plot_columns {
        c.plot_columns = Some(v.clone());
    }
    if let Some(v) = &common.output {
        c.output_dir = v.clone();
    }
    if let Some(v) = common.seed {
        c.seed = v;
    }
    c.validate()?;
    Ok(c)
}

fn output_dir(common: &Common) -> PathBuf {
    common.output.clone().unwrap_or_else(|| PathBuf::from("output"))
}

fn read_model(path: &Path) -> Result<FittedVar> {
    let text = std::fs::read(path).map_err(|e| RunError::io(path, e))?;
    Ok(serde_json::from_slice(&text)?)
}

fn report(paths: &[String], dir: &Path) {
    for p in paths {
        println!("{}", dir.join(p).display());
    }
}

/// Parses `args` (program name first) and runs the verb. Returns the process
/// exit code.
pub fn main_with_args<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let parsed = match Wrapper::try_parse_from(args) {
        Ok(p) => p,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&parsed.common, parsed.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(common: &Common, command: Command) -> Result<()> {
    match command {
        Command::Ingest { overrides } => {
            let c = load_config(common, &overrides)?;
            let data = ingest(&c)?;
            let mut out = ArtifactWriter::create(&c.output_dir)?;
            out.with_writer("clean.csv", |w| Ok(data.frame.write_csv(w)?))?;
            out.with_writer("imputation_log.csv", |w| Ok(data.log.write_csv(w)?))?;
            report(out.artifacts(), out.dir());
        }
        Command::Diagnose { overrides } => {
            let c = load_config(common, &overrides)?;
            let mut out = ArtifactWriter::create(&c.output_dir)?;
            diagnose(&c, &mut out)?;
            report(out.artifacts(), out.dir());
        }
        Command::Gridsearch { overrides } => {
            let c = load_config(common, &overrides)?;
            let train = prepare(&c)?.train;
            let grid = select_model(&c, &train, 0)?;
            let mut out = ArtifactWriter::create(&c.output_dir)?;
            out.with_writer("grid_search.csv", |w| Ok(grid.write_csv(w)?))?;
            out.json("grid_search.json", &grid)?;
            println!("best: p = {}, trend = {}, rmse = {}", grid.best.p, grid.best.trend, grid.best_rmse);
            report(out.artifacts(), out.dir());
        }
        Command::Fit { overrides, lag, trend } => {
            let c = load_config(common, &overrides)?;
            let train = prepare(&c)?.train;
            let (p, trend) = match (lag, trend) {
                (Some(p), Some(t)) => (p, t),
                (lag, trend) => {
                    let grid = select_model(&c, &train, 0)?;
                    (lag.unwrap_or(grid.best.p), trend.unwrap_or(grid.best.trend))
                }
            };
            let model = fit(&model_input(&train, 0)?, p, trend)?;
            let mut out = ArtifactWriter::create(&c.output_dir)?;
            out.json("model.json", &model)?;
            let residuals = varlab::stattests::residual_diagnostics(&model)?;
            out.json("residual_diagnostics.json", &residuals)?;
            report(out.artifacts(), out.dir());
        }
        Command::Forecast { model, steps } => {
            let m = read_model(&model)?;
            let fc = forecast(&m, steps)?;
            let mut out = ArtifactWriter::create(&output_dir(common))?;
            out.with_writer("forecast.csv", |w| Ok(fc.write_csv(w)?))?;
            report(out.artifacts(), out.dir());
        }
        Command::Evaluate { actual, forecast } => {
            let a = TimeSeriesFrame::from_csv_path(&actual)?;
            let f = TimeSeriesFrame::from_csv_path(&forecast)?;
            let metrics = forecast_metrics(&a, &f)?;
            let mut out = ArtifactWriter::create(&output_dir(common))?;
            out.json("metrics.json", &metrics)?;
            println!("average rmse: {}", metrics.average.rmse);
            report(out.artifacts(), out.dir());
        }
        Command::Fevd { model, horizon, order } => {
            let m = read_model(&model)?;
            let table = fevd_for_model(&m, horizon, order)?;
            let mut out = ArtifactWriter::create(&output_dir(common))?;
            out.with_writer("fevd.csv", |w| Ok(table.write_csv(w)?))?;
            out.json("fevd_summary.json", &table.summary())?;
            report(out.artifacts(), out.dir());
        }
        Command::Run { overrides } => {
            let c = load_config(common, &overrides)?;
            let manifest = run_pipeline(&c)?;
            for w in &manifest.warnings {
                eprintln!("warning: {w}");
            }
            report(&manifest.artifacts, &c.output_dir);
        }
        Command::Simulate { start, hours, stations, weather, complete } => {
            let spec = SyntheticSpec { start, hours, stations, weather, seed: common.seed.unwrap_or(0), missing: !complete };
            let dir = output_dir(common);
            write_dataset(&spec, &dir)?;
            for f in ["traffic.csv", "weather.csv", "config.json"] {
                if dir.join(f).exists() {
                    println!("{}", dir.join(f).display());
                }
            }
        }
    }
    Ok(())
}
